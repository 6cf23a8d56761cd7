use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::text::TokenSeq;

/// One stored experience.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: TokenSeq,
    pub action: TokenSeq,
    /// Extrinsic reward plus the scaled intrinsic bonus.
    pub reward: f64,
    /// Game reward alone; decides reward-bearing indexing.
    pub extrinsic: f64,
    pub next_obs: TokenSeq,
    pub next_actions: Arc<[TokenSeq]>,
    pub done: bool,
}

/// Ring buffer with a secondary index over reward-bearing transitions.
///
/// Sampling draws `ceil(rho * batch)` items uniformly from the reward
/// index (or the whole ring while it is empty) and the rest uniformly
/// from the whole ring, with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    rho: f64,
    ring: Vec<Transition>,
    next: usize,
    reward_slots: Vec<usize>,
    slot_pos: Vec<Option<usize>>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, rho: f64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            rho: rho.clamp(0.0, 1.0),
            ring: Vec::new(),
            next: 0,
            reward_slots: Vec::new(),
            slot_pos: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn reward_count(&self) -> usize {
        self.reward_slots.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.ring.iter()
    }

    fn deindex(&mut self, slot: usize) {
        if let Some(pos) = self.slot_pos[slot].take() {
            self.reward_slots.swap_remove(pos);
            if let Some(&moved) = self.reward_slots.get(pos) {
                self.slot_pos[moved] = Some(pos);
            }
        }
    }

    pub fn push(&mut self, t: Transition) {
        let rewarded = t.extrinsic != 0.0;
        let slot = if self.ring.len() < self.capacity {
            self.ring.push(t);
            self.slot_pos.push(None);
            self.ring.len() - 1
        } else {
            let slot = self.next;
            self.deindex(slot);
            self.ring[slot] = t;
            slot
        };
        self.next = (slot + 1) % self.capacity;
        if rewarded {
            self.slot_pos[slot] = Some(self.reward_slots.len());
            self.reward_slots.push(slot);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.ring.len() < batch || batch == 0 {
            return Err(Error::InsufficientSamples {
                size: self.ring.len(),
                batch,
            });
        }
        let prioritized = (self.rho * batch as f64).ceil() as usize;
        let mut out = Vec::with_capacity(batch);
        for i in 0..batch {
            let slot = if i < prioritized && !self.reward_slots.is_empty() {
                self.reward_slots[rng.random_range(0..self.reward_slots.len())]
            } else {
                rng.random_range(0..self.ring.len())
            };
            out.push(&self.ring[slot]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(id: u32, r: f64) -> Transition {
        Transition {
            obs: TokenSeq::new(vec![id]),
            action: TokenSeq::new(vec![id + 1]),
            reward: r,
            extrinsic: r,
            next_obs: TokenSeq::new(vec![id + 2]),
            next_actions: vec![TokenSeq::new(vec![7])].into(),
            done: false,
        }
    }

    #[test]
    fn zero_reward_not_indexed() {
        let mut b = ReplayBuffer::new(10, 0.5);
        b.push(tr(0, 0.0));
        assert_eq!(b.reward_count(), 0);
        b.push(tr(1, 1.0));
        assert_eq!(b.reward_count(), 1);
    }

    #[test]
    fn eviction_deindexes() {
        let mut b = ReplayBuffer::new(3, 0.5);
        b.push(tr(0, 1.0));
        b.push(tr(1, 0.0));
        b.push(tr(2, 2.0));
        b.push(tr(3, 0.0)); // evicts slot 0
        assert_eq!(b.len(), 3);
        assert_eq!(b.reward_count(), 1);
        assert!(!b.iter().any(|t| t.obs.ids() == [0]));
        b.push(tr(4, 0.0)); // evicts slot 1
        b.push(tr(5, 0.0)); // evicts slot 2, the last rewarded one
        assert_eq!(b.reward_count(), 0);
    }

    #[test]
    fn prioritized_only_returns_rewarded() {
        let mut b = ReplayBuffer::new(100, 1.0);
        for i in 0..20 {
            b.push(tr(i * 10, 0.0));
        }
        b.push(tr(999, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = b.sample(16, &mut rng).unwrap();
        assert!(s.iter().all(|t| t.obs.ids() == [999]));
    }

    #[test]
    fn falls_back_to_ring() {
        let mut b = ReplayBuffer::new(100, 0.5);
        for i in 0..10 {
            b.push(tr(i, 0.0));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(b.sample(8, &mut rng).unwrap().len(), 8);
        assert!(matches!(b.sample(11, &mut rng), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn prioritized_fraction_is_about_half() {
        // 10% reward-bearing items, rho = 0.5: expected share is
        // 0.5 + 0.5 * 0.1 = 0.55 of draws come from rewarded items, of
        // which the prioritized half is exactly 50% of each batch.
        let mut b = ReplayBuffer::new(1000, 0.5);
        for i in 0..1000 {
            b.push(tr(i, if i % 10 == 0 { 1.0 } else { 0.0 }));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rewarded = 0;
        let mut total = 0;
        for _ in 0..(10_000 / 50) {
            for t in b.sample(50, &mut rng).unwrap() {
                total += 1;
                rewarded += usize::from(t.extrinsic != 0.0);
            }
        }
        let share = rewarded as f64 / total as f64;
        assert!((share - 0.55).abs() < 0.05, "{share}");
    }
}
