//! A text-game reinforcement-learning laboratory.
//!
//! The crate bundles a small synthetic interactive-fiction engine, a
//! from-scratch GRU/MLP/Adam training stack, and a DRRN agent with three
//! semantic probes:
//!
//! * **min-ob**: the observation is reduced to its location phrase,
//! * **hash**: texts are mapped to fixed seeded Gaussian vectors,
//! * **inv-dy**: an inverse-dynamics decoder regularizes the encoders and
//!   supplies an intrinsic exploration reward.
//!
//! Data-parallel inner loops (per-sequence encoding, per-transition decoding,
//! experiment cells) go through [`par::Exec`], which uses rayon when the
//! `parallel` feature is enabled and a sequential loop otherwise. Both paths
//! produce bitwise-identical results.

pub mod agent;
pub mod config;
pub mod env;
pub mod error;
pub mod experiments;
pub mod invdy;
pub mod nn;
pub mod par;
pub mod text;

pub use error::{Error, Result};
