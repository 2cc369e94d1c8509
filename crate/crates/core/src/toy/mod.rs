//! Small dense reference implementations of the trainable encoder pieces:
//! low-rank adapters, zero-initialized feature fusion and a frame memory bank.
//!
//! Everything here is plain `f64` linear algebra meant for checking
//! invariants, not for speed.

mod fusion;
mod lora;
mod memory;
mod report;

pub use fusion::{Conv3x3, FusionBlock, Tensor3};
pub use lora::{lora_grad_check, quadratic_loss, GradCheck, LoraGrads, LoraLinear};
pub use memory::{
    process_sequence, MemoryAttention, MemoryBank, MemoryEntry, RetentionPolicy, SequenceOutput,
};
pub use report::{invariant_report, ToyEncoder, ToyReport};

#[derive(Debug, thiserror::Error)]
pub enum ToyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("adapter rank {rank} exceeds the bound {max}")]
    Rank { rank: usize, max: usize },
    #[error("unsupported fusion depth {0} (use 1 or 3)")]
    Depth(usize),
}
