//! Experiment drivers: score metrics, variant comparison tables,
//! encoder transfer, embedding export with a linear 2-D projection, and an
//! interactive player for game specs.

pub mod compare;
pub mod embeddings;
pub mod gradients;
pub mod metrics;
pub mod repl;
pub mod transfer;

pub use compare::{run_compare, CellResult, CompareOutput, ScoreTable, VariantSummary};
pub use embeddings::{export_embeddings, project_2d, projection_csv, EmbeddingDump, EmbeddingRow};
pub use gradients::agent_grad_check;
pub use metrics::{final_score, max_score, normalized_score, FINAL_WINDOW};
pub use repl::{play_repl, ReplSummary};
pub use transfer::{encoder_bytes, from_scratch, transfer_train};
