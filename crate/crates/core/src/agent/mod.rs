//! DRRN learner: Q-network, softmax exploration, TD training with
//! reward-prioritized replay, and the interleaved multi-environment
//! training loop.

pub mod learner;
pub mod policy;
pub mod qnet;
pub mod replay;
pub mod train;

pub use learner::{Agent, LossBreakdown};
pub use policy::{select_action, softmax_probs};
pub use qnet::{q_value, QNetwork};
pub use replay::{ReplayBuffer, Transition};
pub use train::{run_training, LogRecord, TrainConfig, TrainingOutcome, Variant};
