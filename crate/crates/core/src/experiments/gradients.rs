use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::learner::{td_target, BatchObjective};
use crate::agent::train::{game_vocab, init_agent};
use crate::agent::{TrainConfig, Transition};
use crate::env::{GameSpec, GameState};
use crate::error::Result;
use crate::nn::gradcheck::{grad_check, spread_probes, GradCheckReport, Objective};
use crate::par::Exec;
use crate::text::{compose_observation_text, tokenize, TokenSeq};

/// Finite-difference check of the full training loss on `rows` transitions
/// collected by uniformly random play. Bootstrap targets are evaluated once
/// and then held fixed, as they are during training.
pub fn agent_grad_check(
    spec: &Arc<GameSpec>,
    config: &TrainConfig,
    rows: usize,
    probes_per_param: usize,
    h: f64,
) -> Result<GradCheckReport> {
    let agent = init_agent(Arc::new(game_vocab(spec)), config, Exec::Sequential)?;
    let q = &agent.qnet;
    let seq = |s: &str| tokenize(s, &q.vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut state, mut res) = GameState::reset(spec.clone(), config.seed, config.stochastic);
    let mut batch = Vec::with_capacity(rows);
    while batch.len() < rows {
        let obs = seq(&compose_observation_text(&res.observation, config.mode));
        let pick = rng.random_range(0..res.valid_actions.len());
        let action = seq(&res.valid_actions[pick]);
        let next = state.step(&res.valid_actions[pick])?;
        let next_obs = seq(&compose_observation_text(&next.observation, config.mode));
        let max_next = if next.done {
            None
        } else {
            let acts: Vec<TokenSeq> = next.valid_actions.iter().map(|a| seq(a)).collect();
            let qs = q.q_values(&next_obs, &acts)?;
            Some(qs.into_iter().fold(f64::NEG_INFINITY, f64::max))
        };
        let extrinsic = next.reward as f64;
        batch.push(Transition {
            obs,
            action,
            reward: td_target(extrinsic, config.gamma, max_next),
            extrinsic,
            next_obs,
            next_actions: Arc::from(Vec::new()),
            done: true,
        });
        if next.done {
            (state, res) = GameState::reset(spec.clone(), config.seed + batch.len() as u64, config.stochastic);
        } else {
            res = next;
        }
    }
    let mut obj = BatchObjective {
        agent,
        batch,
        gamma: config.gamma,
    };
    let probes = spread_probes(&obj.stores(), probes_per_param);
    Ok(grad_check(&mut obj, &probes, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Variant;
    use crate::env::fixtures::fixture;

    #[test]
    fn small_agents_pass() {
        let spec = fixture("treasure-hunt").unwrap();
        for v in Variant::ALL {
            let mut c = TrainConfig {
                embed_dim: 4,
                hidden_dim: 6,
                ..TrainConfig::default()
            };
            c.set_variant(v);
            let r = agent_grad_check(&spec, &c, 6, 2, 1e-5).unwrap();
            assert!(r.checked > 0);
            assert!(r.max_rel_error < 1e-4, "{v}: {:?}", r.per_param);
        }
    }
}
