//! Synthetic interactive-fiction engine.
//!
//! Games are declared in a JSON document (see [`spec`]) and simulated by
//! [`GameState`]. Observations are augmented with the room description and
//! inventory listing after every step.

pub mod engine;
pub mod fixtures;
pub mod spec;

pub use engine::{augment_observation, GameState, Observation, StepResult, DEFAULT_STEP_LIMIT};
pub use spec::{parse_game_spec, GameSpec};
