use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::train::{agent_from_checkpoint, game_vocab, init_agent, train_agent};
use crate::agent::{Agent, TrainConfig, TrainingOutcome};
use crate::env::GameSpec;
use crate::error::{Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::par::Exec;
use crate::text::EncoderMode;

/// Raw bytes of every encoder parameter (embedding, `f_o`, `f_a`), in
/// store order. Empty in hash mode.
pub fn encoder_bytes(agent: &Agent) -> Vec<u8> {
    let mut out = Vec::new();
    if let Some(enc) = &agent.qnet.encoders {
        for id in enc.ids() {
            for v in agent.qnet.phi.value(id) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

/// Loads the encoders from `checkpoint`, freezes them, draws a fresh
/// aggregator from `seed` and trains only the aggregator on `target` for
/// `steps` environment steps. The inverse-dynamics head, if any, is dropped.
pub fn transfer_train(checkpoint: &Checkpoint, target: &Arc<GameSpec>, steps: usize, seed: u64) -> Result<TrainingOutcome> {
    let (agent, mut config) = agent_from_checkpoint(checkpoint, Exec::default())?;
    if config.mode == EncoderMode::MinOb {
        return Err(Error::Config("transfer needs a base or hash checkpoint, not min-ob".into()));
    }
    config.invdy = false;
    config.total_steps = steps;
    config.seed = seed;
    let mut qnet = agent.qnet;
    qnet.reinit_g(&mut ChaCha8Rng::seed_from_u64(seed))?;
    qnet.freeze_encoders();
    let agent = Agent::new(qnet, None, config.weights(), config.adam, Exec::default())?;
    train_agent(agent, target, &config)
}

/// Baseline for transfer: a fresh agent of the same configuration trained
/// on `target` for `steps` steps.
pub fn from_scratch(config: &TrainConfig, target: &Arc<GameSpec>, steps: usize, seed: u64) -> Result<TrainingOutcome> {
    let mut config = config.clone();
    config.total_steps = steps;
    config.seed = seed;
    let agent = init_agent(Arc::new(game_vocab(target)), &config, Exec::default())?;
    train_agent(agent, target, &config)
}
