use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{GameSpec, GameState, StepResult, DEFAULT_STEP_LIMIT};
use crate::error::{Error, Result};
use crate::invdy::{InvDynHead, LossWeights};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::AdamConfig;
use crate::par::Exec;
use crate::text::{compose_observation_text, tokenize, EncoderConfig, EncoderMode, SplitMix64, TokenSeq, Vocab};

use super::learner::{Agent, LossBreakdown};
use super::policy::select_action;
use super::qnet::QNetwork;
use super::replay::{ReplayBuffer, Transition};

/// The four model variants compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Base,
    MinOb,
    Hash,
    InvDy,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Base, Variant::MinOb, Variant::Hash, Variant::InvDy];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::MinOb => "min-ob",
            Variant::Hash => "hash",
            Variant::InvDy => "inv-dy",
        }
    }

    pub fn mode(self) -> EncoderMode {
        match self {
            Variant::Base | Variant::InvDy => EncoderMode::Base,
            Variant::MinOb => EncoderMode::MinOb,
            Variant::Hash => EncoderMode::Hash,
        }
    }

    pub fn invdy(self) -> bool {
        self == Variant::InvDy
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?} (expected base, min-ob, hash or inv-dy)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub num_envs: usize,
    pub total_steps: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    /// Optimizer updates per environment step; fractional values update
    /// every `1 / updates_per_step` steps.
    pub updates_per_step: f64,
    pub seed: u64,
    pub mode: EncoderMode,
    pub invdy: bool,
    pub lambda_inv: f64,
    pub lambda_dec: f64,
    pub beta: f64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub adam: AdamConfig,
    pub replay_capacity: usize,
    pub priority_fraction: f64,
    pub step_limit: usize,
    pub stochastic: bool,
    pub log_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.9,
            batch_size: 64,
            num_envs: 8,
            total_steps: 100_000,
            warmup: 500,
            updates_per_step: 1.0,
            seed: 0,
            mode: EncoderMode::Base,
            invdy: false,
            lambda_inv: 1.0,
            lambda_dec: 1.0,
            beta: 1.0,
            embed_dim: 64,
            hidden_dim: 128,
            adam: AdamConfig::default(),
            replay_capacity: 100_000,
            priority_fraction: 0.5,
            step_limit: DEFAULT_STEP_LIMIT,
            stochastic: false,
            log_interval: 1000,
        }
    }
}

impl TrainConfig {
    pub fn variant(&self) -> Variant {
        match (self.mode, self.invdy) {
            (EncoderMode::Base, true) => Variant::InvDy,
            (EncoderMode::Base, false) => Variant::Base,
            (EncoderMode::MinOb, _) => Variant::MinOb,
            (EncoderMode::Hash, _) => Variant::Hash,
        }
    }

    pub fn set_variant(&mut self, v: Variant) {
        self.mode = v.mode();
        self.invdy = v.invdy();
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_inv: self.lambda_inv,
            lambda_dec: self.lambda_dec,
            beta: self.beta,
        }
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            mode: self.mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.batch_size == 0 || self.num_envs == 0 || self.replay_capacity == 0 || self.log_interval == 0 {
            return bad("batch_size, num_envs, replay_capacity and log_interval must be positive".into());
        }
        if self.batch_size > self.replay_capacity {
            return bad("batch_size exceeds replay_capacity".into());
        }
        if !(self.updates_per_step >= 0.0 && self.updates_per_step.is_finite()) {
            return bad(format!("updates_per_step must be non-negative, got {}", self.updates_per_step));
        }
        if !(0.0..=1.0).contains(&self.priority_fraction) {
            return bad(format!("priority_fraction must lie in [0, 1], got {}", self.priority_fraction));
        }
        if self.step_limit == 0 {
            return bad("step_limit must be positive".into());
        }
        if self.invdy && self.mode != EncoderMode::Base {
            return bad(format!("inverse dynamics requires base mode, not {}", self.mode));
        }
        self.weights().validate()?;
        self.encoder().validate()
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Episode {
        step: usize,
        env: usize,
        episode: usize,
        score: i64,
    },
    Interval {
        step: usize,
        updates: u64,
        td: f64,
        inv: f64,
        dec: f64,
        r_plus: f64,
    },
    /// First occurrence of a full observation text.
    Seen { step: usize, text: String },
}

/// Serializes records one JSON object per line.
pub fn log_to_jsonl(log: &[LogRecord]) -> String {
    let mut s = String::new();
    for r in log {
        s.push_str(&serde_json::to_string(r).expect("log records serialize"));
        s.push('\n');
    }
    s
}

pub fn log_from_jsonl(text: &str) -> Result<Vec<LogRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn episode_scores(log: &[LogRecord]) -> Vec<i64> {
    log.iter()
        .filter_map(|r| match r {
            LogRecord::Episode { score, .. } => Some(*score),
            _ => None,
        })
        .collect()
}

pub fn seen_texts(log: &[LogRecord]) -> HashSet<&str> {
    log.iter()
        .filter_map(|r| match r {
            LogRecord::Seen { text, .. } => Some(text.as_str()),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub agent: Agent,
    pub config: TrainConfig,
    pub log: Vec<LogRecord>,
    /// Intrinsic bonus of every collected transition, in collection order.
    pub intrinsic: Vec<f64>,
}

impl TrainingOutcome {
    pub fn episode_scores(&self) -> Vec<i64> {
        episode_scores(&self.log)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        agent_checkpoint(&self.agent, &self.config)
    }
}

const CHECKPOINT_FORMAT: &str = "semprobe-agent";

pub fn agent_checkpoint(agent: &Agent, config: &TrainConfig) -> Checkpoint {
    let meta = serde_json::json!({
        "format": CHECKPOINT_FORMAT,
        "config": config,
        "vocab": agent.qnet.vocab.tokens(),
    });
    let mut ck = Checkpoint::new(meta);
    ck.push_store("phi.", &agent.qnet.phi);
    if let Some(h) = &agent.head {
        ck.push_store("theta.", &h.theta);
    }
    ck
}

/// Rebuilds an agent, its training configuration and vocabulary.
pub fn agent_from_checkpoint(ck: &Checkpoint, exec: Exec) -> Result<(Agent, TrainConfig)> {
    let meta = &ck.metadata;
    if meta.get("format").and_then(|v| v.as_str()) != Some(CHECKPOINT_FORMAT) {
        return Err(Error::Checkpoint("not an agent checkpoint".into()));
    }
    let config: TrainConfig = serde_json::from_value(meta["config"].clone())?;
    let vocab: Vec<String> = serde_json::from_value(meta["vocab"].clone())?;
    let vocab = Arc::new(Vocab::from_tokens(vocab));
    let qnet = QNetwork::from_store(vocab, config.encoder(), ck.store("phi.")?)?;
    let head = if config.invdy {
        Some(InvDynHead::from_store(ck.store("theta.")?)?)
    } else {
        None
    };
    let agent = Agent::new(qnet, head, config.weights(), config.adam, exec)?;
    Ok((agent, config))
}

/// Vocabulary over every bundled game plus `spec`.
pub fn game_vocab(spec: &GameSpec) -> Vocab {
    let mut texts = crate::env::fixtures::bundled_texts();
    texts.extend(spec.texts());
    Vocab::build(texts.iter().map(String::as_str))
}

/// Fresh agent for `config`, with parameters drawn from `config.seed`.
pub fn init_agent(vocab: Arc<Vocab>, config: &TrainConfig, exec: Exec) -> Result<Agent> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let qnet = QNetwork::new(vocab.clone(), config.encoder(), &mut rng)?;
    let head = if config.invdy {
        Some(InvDynHead::new(config.embed_dim, config.hidden_dim, vocab.len(), &mut rng)?)
    } else {
        None
    };
    Agent::new(qnet, head, config.weights(), config.adam, exec)
}

/// Trains a fresh agent on `spec`.
pub fn run_training(spec: &Arc<GameSpec>, config: &TrainConfig) -> Result<TrainingOutcome> {
    let agent = init_agent(Arc::new(game_vocab(spec)), config, Exec::default())?;
    train_agent(agent, spec, config)
}

fn episode_seed(base: u64, env: usize, episode: usize) -> u64 {
    let mut s = SplitMix64::new(base ^ ((env as u64) << 40) ^ episode as u64);
    s.next_u64()
}

struct Slot {
    state: GameState,
    obs: TokenSeq,
    actions: Vec<String>,
    action_seqs: Vec<TokenSeq>,
    episode: usize,
}

struct Tokens<'a> {
    vocab: &'a Vocab,
    mode: EncoderMode,
    cache: HashMap<String, TokenSeq>,
}

impl Tokens<'_> {
    fn seq(&mut self, text: &str) -> TokenSeq {
        if let Some(s) = self.cache.get(text) {
            return s.clone();
        }
        let s = tokenize(text, self.vocab);
        self.cache.insert(text.to_string(), s.clone());
        s
    }

    fn observe(&mut self, r: &StepResult) -> (TokenSeq, String, Vec<TokenSeq>) {
        let obs = self.seq(&compose_observation_text(&r.observation, self.mode));
        let full = compose_observation_text(&r.observation, EncoderMode::Base);
        let acts = r.valid_actions.iter().map(|a| self.seq(a)).collect();
        (obs, full, acts)
    }
}

#[allow(clippy::too_many_arguments)]
fn start_episode(
    spec: &Arc<GameSpec>,
    config: &TrainConfig,
    env: usize,
    episode: usize,
    step: usize,
    log: &mut Vec<LogRecord>,
    tokens: &mut Tokens,
    seen: &mut HashSet<String>,
) -> Slot {
    let (mut state, r) = GameState::reset(spec.clone(), episode_seed(config.seed, env, episode), config.stochastic);
    state.set_step_limit(config.step_limit);
    let (obs, full_text, action_seqs) = tokens.observe(&r);
    if seen.insert(full_text.clone()) {
        log.push(LogRecord::Seen { step, text: full_text });
    }
    Slot {
        state,
        obs,
        actions: r.valid_actions,
        action_seqs,
        episode,
    }
}

/// Runs the interleaved collection and update loop on an existing agent.
pub fn train_agent(mut agent: Agent, spec: &Arc<GameSpec>, config: &TrainConfig) -> Result<TrainingOutcome> {
    config.validate()?;
    if agent.qnet.mode() != config.mode {
        return Err(Error::Config(format!(
            "agent encodes in {} mode but the configuration asks for {}",
            agent.qnet.mode(),
            config.mode
        )));
    }
    let vocab = agent.qnet.vocab.clone();
    let mut tokens = Tokens {
        vocab: &vocab,
        mode: config.mode,
        cache: HashMap::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5DEE_CE66_D1CE_4E5B);
    let mut buffer = ReplayBuffer::new(config.replay_capacity, config.priority_fraction);
    let mut log = Vec::new();
    let mut intrinsic = Vec::with_capacity(config.total_steps);
    let mut seen = HashSet::new();

    let mut slots: Vec<Slot> = (0..config.num_envs)
        .map(|e| start_episode(spec, config, e, 0, 0, &mut log, &mut tokens, &mut seen))
        .collect();
    let mut episodes = vec![1usize; config.num_envs];

    let mut credit = 0.0;
    let mut window: Vec<LossBreakdown> = Vec::new();
    let mut window_bonus = Vec::new();
    let min_fill = config.warmup.max(config.batch_size);

    for step in 0..config.total_steps {
        let e = step % config.num_envs;
        let slot = &mut slots[e];
        let qs = agent.qnet.q_values(&slot.obs, &slot.action_seqs)?;
        let choice = select_action(&qs, &mut rng);
        let res = slot.state.step(&slot.actions[choice])?;
        let (next_obs, next_full, next_seqs) = tokens.observe(&res);
        let bonus = agent.intrinsic_reward(&slot.obs, &next_obs, &slot.action_seqs[choice])?;
        intrinsic.push(bonus);
        window_bonus.push(bonus);
        let extrinsic = res.reward as f64;
        buffer.push(Transition {
            obs: slot.obs.clone(),
            action: slot.action_seqs[choice].clone(),
            reward: extrinsic + config.beta * bonus,
            extrinsic,
            next_obs: next_obs.clone(),
            next_actions: if res.done { Arc::from(Vec::new()) } else { next_seqs.clone().into() },
            done: res.done,
        });
        if res.done {
            log.push(LogRecord::Episode {
                step: step + 1,
                env: e,
                episode: slot.episode,
                score: slot.state.score(),
            });
            let k = episodes[e];
            episodes[e] += 1;
            slots[e] = start_episode(spec, config, e, k, step + 1, &mut log, &mut tokens, &mut seen);
        } else {
            if seen.insert(next_full.clone()) {
                log.push(LogRecord::Seen {
                    step: step + 1,
                    text: next_full.clone(),
                });
            }
            slot.obs = next_obs;
            slot.actions = res.valid_actions;
            slot.action_seqs = next_seqs;
        }

        if buffer.len() >= min_fill {
            credit += config.updates_per_step;
            while credit >= 1.0 {
                credit -= 1.0;
                window.push(agent.train_step(&buffer, config.batch_size, config.gamma, &mut rng)?);
            }
        }
        if (step + 1) % config.log_interval == 0 {
            let mean = |f: fn(&LossBreakdown) -> f64| {
                if window.is_empty() {
                    0.0
                } else {
                    window.iter().map(f).sum::<f64>() / window.len() as f64
                }
            };
            log.push(LogRecord::Interval {
                step: step + 1,
                updates: agent.updates(),
                td: mean(|l| l.td),
                inv: mean(|l| l.inv),
                dec: mean(|l| l.dec),
                r_plus: window_bonus.iter().sum::<f64>() / window_bonus.len().max(1) as f64,
            });
            window.clear();
            window_bonus.clear();
        }
    }
    Ok(TrainingOutcome {
        agent,
        config: config.clone(),
        log,
        intrinsic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::desk_config;
    use crate::env::fixtures::fixture;

    fn quick(variant: Variant, steps: usize) -> TrainConfig {
        let mut c = desk_config();
        c.set_variant(variant);
        c.embed_dim = 6;
        c.hidden_dim = 8;
        c.batch_size = 8;
        c.num_envs = 2;
        c.warmup = 16;
        c.total_steps = steps;
        c.log_interval = 50;
        c
    }

    #[test]
    fn zero_steps_play_nothing() {
        let spec = fixture("treasure-hunt").unwrap();
        let out = run_training(&spec, &quick(Variant::Base, 0)).unwrap();
        assert!(out.episode_scores().is_empty());
        assert!(out.intrinsic.is_empty());
        assert_eq!(out.agent.updates(), 0);
        // the opening observation is still recorded once
        assert_eq!(seen_texts(&out.log).len(), 1);
    }

    #[test]
    fn identical_seeds_identical_runs() {
        let spec = fixture("treasure-hunt").unwrap();
        let c = quick(Variant::InvDy, 300);
        let a = run_training(&spec, &c).unwrap();
        let b = run_training(&spec, &c).unwrap();
        assert_eq!(log_to_jsonl(&a.log), log_to_jsonl(&b.log));
        assert_eq!(a.agent.qnet.phi.snapshot(), b.agent.qnet.phi.snapshot());
        let mut c2 = c.clone();
        c2.seed = 1;
        let d = run_training(&spec, &c2).unwrap();
        assert_ne!(log_to_jsonl(&a.log), log_to_jsonl(&d.log));
    }

    #[test]
    fn bookkeeping() {
        let spec = fixture("treasure-hunt").unwrap();
        let mut c = quick(Variant::InvDy, 200);
        c.updates_per_step = 0.5;
        let out = run_training(&spec, &c).unwrap();
        assert_eq!(out.intrinsic.len(), 200);
        assert!(out.intrinsic.iter().all(|r| r.is_finite() && *r > 0.0));
        // updates start once `warmup` transitions are stored
        let expected = ((200 - c.warmup + 1) as f64 * 0.5).floor() as u64;
        assert_eq!(out.agent.updates(), expected);
        let intervals: Vec<usize> = out
            .log
            .iter()
            .filter_map(|r| match r {
                LogRecord::Interval { step, .. } => Some(*step),
                _ => None,
            })
            .collect();
        assert_eq!(intervals, vec![50, 100, 150, 200]);
        let mut last = 0;
        for r in &out.log {
            if let LogRecord::Episode { step, score, .. } = r {
                assert!(*step >= last && (0..=10).contains(score));
                last = *step;
            }
        }
        let parsed = log_from_jsonl(&log_to_jsonl(&out.log)).unwrap();
        assert_eq!(parsed, out.log);
        let seen = seen_texts(&out.log);
        assert_eq!(seen.len(), out.log.iter().filter(|r| matches!(r, LogRecord::Seen { .. })).count());
    }

    #[test]
    fn bandit_learns_the_gap() {
        let spec = fixture("bandit1").unwrap();
        let mut c = quick(Variant::Base, 2000);
        c.updates_per_step = 1.0;
        let out = run_training(&spec, &c).unwrap();
        let (_, r) = GameState::reset(spec.clone(), 0, false);
        let q = &out.agent.qnet;
        let obs = tokenize(&compose_observation_text(&r.observation, EncoderMode::Base), &q.vocab);
        let acts: Vec<TokenSeq> = r.valid_actions.iter().map(|a| tokenize(a, &q.vocab)).collect();
        let qs = q.q_values(&obs, &acts).unwrap();
        let gap = (qs[0] - qs[1]).abs();
        assert!(gap > 0.5, "{:?} {qs:?}", r.valid_actions);
    }

    #[test]
    fn checkpoint_round_trip() {
        let spec = fixture("treasure-hunt").unwrap();
        for v in Variant::ALL {
            let out = run_training(&spec, &quick(v, 60)).unwrap();
            let bytes = out.checkpoint().to_bytes();
            let ck = Checkpoint::from_bytes(&bytes).unwrap();
            let (agent, config) = agent_from_checkpoint(&ck, Exec::Sequential).unwrap();
            assert_eq!(config, out.config);
            assert_eq!(agent.qnet.phi.snapshot(), out.agent.qnet.phi.snapshot());
            assert_eq!(agent.head.is_some(), v.invdy());
            assert_eq!(agent.qnet.vocab.tokens(), out.agent.qnet.vocab.tokens());
        }
        let bogus = Checkpoint::new(serde_json::json!({"format": "other"}));
        assert!(agent_from_checkpoint(&bogus, Exec::Sequential).is_err());
    }

    #[test]
    fn hash_training_keeps_the_map_fixed() {
        let spec = fixture("treasure-hunt").unwrap();
        let out = run_training(&spec, &quick(Variant::Hash, 200)).unwrap();
        assert!(out.agent.qnet.encoders.is_none());
        assert!(out.agent.updates() > 0);
        assert!(out.agent.qnet.phi.iter().all(|(_, n, _, _)| n.starts_with("g.")));
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let spec = fixture("treasure-hunt").unwrap();
        let c = quick(Variant::Base, 10);
        let agent = init_agent(Arc::new(game_vocab(&spec)), &c, Exec::Sequential).unwrap();
        let mut other = c.clone();
        other.set_variant(Variant::Hash);
        assert!(train_agent(agent, &spec, &other).is_err());
    }

    #[test]
    fn episode_seeds_differ() {
        let a = episode_seed(0, 0, 0);
        assert_ne!(a, episode_seed(0, 1, 0));
        assert_ne!(a, episode_seed(0, 0, 1));
        assert_ne!(a, episode_seed(1, 0, 0));
    }

    #[test]
    fn variants_parse() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
            let mut c = TrainConfig::default();
            c.set_variant(v);
            assert_eq!(c.variant(), v);
            assert!(c.validate().is_ok());
        }
        assert!("bag-of-words".parse::<Variant>().is_err());
    }
}
