//! Minimal dense neural-network stack: tensors, parameter stores, GRU
//! cells, MLPs, a teacher-forced GRU decoder, Adam, finite-difference
//! gradient checking and a binary checkpoint container.
//!
//! Gradients are computed by hand-written per-layer backward passes. Each
//! forward call that needs gradients returns a trace; the matching backward
//! call consumes it and accumulates into a [`GradBuffer`].

pub mod adam;
pub mod checkpoint;
pub mod decoder;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod linalg;
pub mod mlp;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use decoder::{decode_logprob, Decoder, DecodeTrace};
pub use gradcheck::{grad_check, GradCheckReport, Objective, Probe};
pub use gru::{GruParams, GruTrace};
pub use mlp::{mlp_forward, Activation, Layer, Mlp, MlpTrace};
pub use tensor::{GradBuffer, ParamId, ParamStore, Tensor};
