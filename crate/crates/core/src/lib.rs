//! Entity-aware reward engine and RL harness for multi-entity visual
//! grounding.
//!
//! A completion of the form
//! `<think>...</think> <answer>subject: [(x1, y1), (x2, y2)], object: [...]</answer>`
//! is parsed ([`parser`]), matched role-by-role against ground truth and
//! scored as format + grounding accuracy + relational bonus ([`reward`]).
//! [`grpo`] implements the supervised and group-relative policy objectives
//! over a tabular toy policy, [`evaluation`] computes Acc@0.5 metrics and
//! [`data`] handles the line-delimited dataset format.

pub mod data;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod grpo;
pub mod parser;
pub mod protocol;
pub mod reward;

pub use domain::{
    BoundingBox, Entity, EntityRole, GroundingInstance, InstanceFields, MatchedPair,
    ParsedCompletion, ParsedEntity, RewardBreakdown, RewardConfig, Split,
};
pub use error::{DataError, DomainError, PolicyError};
pub use evaluation::{evaluate_dataset, evaluate_instance, MetricsReport};
pub use parser::{check_structural_format, extract_entities, parse_completion};
pub use reward::{iou, match_entities, tier_score, total_reward, Matching};
