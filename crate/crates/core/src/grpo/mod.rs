//! SFT and GRPO objectives over a tabular autoregressive policy.
//!
//! The policy is a bigram table indexed by (previous symbol, position), small
//! enough that KL terms are exact and every gradient can be checked against
//! finite differences.

pub mod objective;
pub mod policy;
pub mod task;
pub mod train;

pub use objective::{
    categorical_kl, clipped_term, group_advantages, grpo_loss, kl_divergence, sft_loss, GrpoLoss,
    LossAndGrad,
};
pub use policy::{Context, ToyPolicy, Vocabulary};
pub use task::{canonical_completion, Episode, ToyTask};
pub use train::{
    grpo_step, train_two_stage, GrpoConfig, SftConfig, Stage, StepRecord, TrainingMode,
    TrainingOutcome, TrainingPlan, TrainingTrace, TRACE_HEADER,
};
