//! Text front ends: vocabulary and tokenizer, observation composition for
//! each encoder mode, the trainable GRU text encoders, and the fixed
//! hash encoder.

pub mod compose;
pub mod encoder;
pub mod hash;
pub mod vocab;

pub use compose::{compose_observation_text, SEP_MARKER};
pub use encoder::{EncodeTrace, EncoderConfig, EncoderMode, TextEncoders, Which};
pub use hash::{fnv1a64, hash_encode, hash_tokens, splitmix64_next, SplitMix64};
pub use vocab::{tokenize, TokenSeq, Vocab, BOS, EOS, PAD, SEP, UNK};
