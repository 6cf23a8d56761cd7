use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::linalg::{axpy, dot};
use crate::nn::{init, mlp_forward, Activation, Mlp, ParamStore};
use crate::text::{hash_encode, EncoderConfig, EncoderMode, TextEncoders, TokenSeq, Vocab, Which};

use super::replay::Transition;

/// `g(concat(o_repr, a_repr))`.
pub fn q_value(o_repr: &[f64], a_repr: &[f64], g: &Mlp, store: &ParamStore) -> Result<f64> {
    let mut x = Vec::with_capacity(o_repr.len() + a_repr.len());
    x.extend_from_slice(o_repr);
    x.extend_from_slice(a_repr);
    if x.len() != g.input_dim() {
        return Err(Error::Shape(format!(
            "q_value input {} does not match aggregator input {}",
            x.len(),
            g.input_dim()
        )));
    }
    let layers: Vec<_> = g
        .layers
        .iter()
        .map(|l| (store.get(l.w), store.value(l.b), l.activation))
        .collect();
    Ok(mlp_forward(&x, &layers)?[0])
}

/// Encoders (or the fixed hash map) plus the aggregator `g: 2d -> d -> 1`.
#[derive(Debug, Clone)]
pub struct QNetwork {
    pub config: EncoderConfig,
    pub vocab: Arc<Vocab>,
    /// Encoder and aggregator parameters.
    pub phi: ParamStore,
    /// `None` in hash mode.
    pub encoders: Option<TextEncoders>,
    pub g: Mlp,
}

impl QNetwork {
    pub fn new<R: Rng>(vocab: Arc<Vocab>, config: EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut phi = ParamStore::new();
        let encoders = match config.mode {
            EncoderMode::Hash => None,
            _ => Some(TextEncoders::register(&mut phi, vocab.len(), &config, rng)?),
        };
        let d = config.hidden_dim;
        let g = Mlp::register(&mut phi, "g", &[2 * d, d, 1], Activation::Relu, Activation::Identity, rng)?;
        Ok(QNetwork {
            config,
            vocab,
            phi,
            encoders,
            g,
        })
    }

    /// Rebuilds handles over an existing parameter store.
    pub fn from_store(vocab: Arc<Vocab>, config: EncoderConfig, phi: ParamStore) -> Result<Self> {
        config.validate()?;
        let encoders = match config.mode {
            EncoderMode::Hash => None,
            _ => Some(TextEncoders::lookup(&phi)?),
        };
        let g = Mlp::lookup(&phi, "g", &[Activation::Relu, Activation::Identity])?;
        if g.input_dim() != 2 * config.hidden_dim {
            return Err(Error::Checkpoint(format!(
                "aggregator input {} does not match hidden size {}",
                g.input_dim(),
                config.hidden_dim
            )));
        }
        Ok(QNetwork {
            config,
            vocab,
            phi,
            encoders,
            g,
        })
    }

    pub fn mode(&self) -> EncoderMode {
        self.config.mode
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden_dim
    }

    /// Draws fresh aggregator weights; encoders are untouched.
    pub fn reinit_g<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        for l in &self.g.layers {
            *self.phi.get_mut(l.w) = init::fan_in(vec![l.output, l.input], l.input, rng)?;
            *self.phi.get_mut(l.b) = init::fan_in(vec![l.output], l.input, rng)?;
        }
        Ok(())
    }

    /// Marks every encoder parameter frozen.
    pub fn freeze_encoders(&mut self) {
        if let Some(enc) = self.encoders {
            for id in enc.ids() {
                self.phi.set_trainable(id, false);
            }
        }
    }

    pub fn encode(&self, seq: &TokenSeq, which: Which) -> Result<Vec<f64>> {
        match &self.encoders {
            None => hash_encode(seq.ids(), self.hidden()),
            Some(enc) => enc.encode(&self.phi, seq, which),
        }
    }

    /// `W1[:, offset..offset + d] * repr`, the half of g's first layer that
    /// sees one side of the concatenation.
    pub(crate) fn project(&self, repr: &[f64], which: Which) -> Vec<f64> {
        let d = self.hidden();
        let off = match which {
            Which::Observation => 0,
            Which::Action => d,
        };
        let w = self.phi.value(self.g.layers[0].w);
        (0..d)
            .map(|i| dot(&w[i * 2 * d + off..i * 2 * d + off + d], repr))
            .collect()
    }

    /// `W1[:, half]^T dp`, added into `out`.
    pub(crate) fn project_back(&self, dp: &[f64], which: Which, out: &mut [f64]) {
        let d = self.hidden();
        let off = match which {
            Which::Observation => 0,
            Which::Action => d,
        };
        let w = self.phi.value(self.g.layers[0].w);
        for (i, &g) in dp.iter().enumerate() {
            if g != 0.0 {
                axpy(g, &w[i * 2 * d + off..i * 2 * d + off + d], out);
            }
        }
    }

    /// Evaluates g from the two first-layer projections. Returns the Q-value
    /// and the hidden pre-activation.
    pub(crate) fn head(&self, po: &[f64], pa: &[f64]) -> (f64, Vec<f64>) {
        let l0 = &self.g.layers[0];
        let l1 = &self.g.layers[1];
        let pre: Vec<f64> = po
            .iter()
            .zip(pa)
            .zip(self.phi.value(l0.b))
            .map(|((a, b), c)| a + b + c)
            .collect();
        let w2 = self.phi.value(l1.w);
        let q = self.phi.value(l1.b)[0] + pre.iter().zip(w2).map(|(p, w)| p.max(0.0) * w).sum::<f64>();
        (q, pre)
    }

    /// Q-values of every candidate action in one state.
    pub fn q_values(&self, obs: &TokenSeq, actions: &[TokenSeq]) -> Result<Vec<f64>> {
        let po = self.project(&self.encode(obs, Which::Observation)?, Which::Observation);
        actions
            .iter()
            .map(|a| {
                let pa = self.project(&self.encode(a, Which::Action)?, Which::Action);
                Ok(self.head(&po, &pa).0)
            })
            .collect()
    }
}

/// Reference TD loss: mean of `(r + gamma * max Q(o', a') - Q(o, a))^2`,
/// without the bootstrap term on terminal transitions.
pub fn td_loss(batch: &[&Transition], qnet: &QNetwork, gamma: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Invalid("td_loss needs a non-empty batch".into()));
    }
    let mut total = 0.0;
    for t in batch {
        let o = qnet.encode(&t.obs, Which::Observation)?;
        let a = qnet.encode(&t.action, Which::Action)?;
        let q = q_value(&o, &a, &qnet.g, &qnet.phi)?;
        let mut y = t.reward;
        if !t.done {
            let o2 = qnet.encode(&t.next_obs, Which::Observation)?;
            let mut best = f64::NEG_INFINITY;
            for a2 in t.next_actions.iter() {
                let a2 = qnet.encode(a2, Which::Action)?;
                best = best.max(q_value(&o2, &a2, &qnet.g, &qnet.phi)?);
            }
            y += gamma * best;
        }
        total += (y - q).powi(2);
    }
    Ok(total / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(mode: EncoderMode) -> QNetwork {
        let vocab = Arc::new(Vocab::build(["take lamp", "go north", "a dark room"]));
        let config = EncoderConfig {
            embed_dim: 6,
            hidden_dim: 4,
            mode,
        };
        QNetwork::new(vocab, config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    #[test]
    fn zero_g_gives_zero() {
        let mut q = small(EncoderMode::Base);
        let ids: Vec<_> = q.g.ids();
        for id in ids {
            q.phi.get_mut(id).values_mut().fill(0.0);
        }
        let v = q_value(&[1.0, 2.0, 3.0, 4.0], &[-1.0, 0.5, 0.0, 9.0], &q.g, &q.phi).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn hand_computed_mlp() {
        // d = 1: W1 = [[1, -1]], b1 = [0.5], W2 = [[2]], b2 = [0.25]
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = Mlp::register(&mut store, "g", &[2, 1, 1], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        *store.get_mut(g.layers[0].w) = Tensor::new(vec![1, 2], vec![1.0, -1.0]).unwrap();
        *store.get_mut(g.layers[0].b) = Tensor::new(vec![1], vec![0.5]).unwrap();
        *store.get_mut(g.layers[1].w) = Tensor::new(vec![1, 1], vec![2.0]).unwrap();
        *store.get_mut(g.layers[1].b) = Tensor::new(vec![1], vec![0.25]).unwrap();
        // relu(3 - 1 + 0.5) * 2 + 0.25
        assert_eq!(q_value(&[3.0], &[1.0], &g, &store).unwrap(), 5.25);
        // relu(1 - 3 + 0.5) = 0
        assert_eq!(q_value(&[1.0], &[3.0], &g, &store).unwrap(), 0.25);
    }

    #[test]
    fn concat_order_matters() {
        let q = small(EncoderMode::Base);
        let x = [0.3, -0.2, 0.9, 0.1];
        let y = [-0.5, 0.8, 0.0, 0.4];
        let a = q_value(&x, &y, &q.g, &q.phi).unwrap();
        let b = q_value(&y, &x, &q.g, &q.phi).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn factored_head_matches_mlp() {
        for mode in [EncoderMode::Base, EncoderMode::Hash] {
            let q = small(mode);
            let obs = tokenize_words(&q, "a dark room");
            let acts = [tokenize_words(&q, "take lamp"), tokenize_words(&q, "go north")];
            let fast = q.q_values(&obs, &acts).unwrap();
            let o = q.encode(&obs, Which::Observation).unwrap();
            for (a, f) in acts.iter().zip(&fast) {
                let a = q.encode(a, Which::Action).unwrap();
                let slow = q_value(&o, &a, &q.g, &q.phi).unwrap();
                assert!((slow - f).abs() < 1e-12, "{slow} vs {f}");
            }
        }
    }

    #[test]
    fn hash_mode_only_g() {
        let q = small(EncoderMode::Hash);
        assert!(q.phi.iter().all(|(_, name, _, _)| name.starts_with("g.")));
    }

    #[test]
    fn td_loss_hand_values() {
        let q = small(EncoderMode::Hash);
        let obs = tokenize_words(&q, "a dark room");
        let act = tokenize_words(&q, "take lamp");
        let o = q.encode(&obs, Which::Observation).unwrap();
        let a = q.encode(&act, Which::Action).unwrap();
        let qv = q_value(&o, &a, &q.g, &q.phi).unwrap();
        let done = Transition {
            obs: obs.clone(),
            action: act.clone(),
            reward: qv,
            extrinsic: qv,
            next_obs: obs.clone(),
            next_actions: Arc::from(Vec::new()),
            done: true,
        };
        assert!(td_loss(&[&done], &q, 0.9).unwrap() < 1e-24);
        // self-loop: target r + 0.9 * max over the single next action = r + 0.9 q
        let looped = Transition {
            reward: 1.0,
            done: false,
            next_actions: vec![act.clone()].into(),
            ..done.clone()
        };
        let expect = (1.0 + 0.9 * qv - qv).powi(2);
        assert!((td_loss(&[&looped], &q, 0.9).unwrap() - expect).abs() < 1e-12);
    }

    fn tokenize_words(q: &QNetwork, s: &str) -> TokenSeq {
        crate::text::tokenize(s, &q.vocab)
    }
}
