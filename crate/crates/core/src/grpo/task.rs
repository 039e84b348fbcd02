//! Desk-scale tasks that connect the tabular policy to the reward engine.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::domain::GroundingInstance;
use crate::error::PolicyError;
use crate::grpo::policy::{ToyPolicy, Vocabulary};
use crate::parser::{format_answer, format_completion};

/// Think text used when an instance carries no reasoning trace.
pub const PLACEHOLDER_THINK: &str =
    "Identify the subject, then locate each object it is related to.";

/// Text of the low-reward alternative in [`ToyTask::two_completion`]. It has
/// no tags and no entity, so it scores zero.
pub const NO_ANSWER_TEXT: &str = "The referred entities cannot be located.";

/// Interior of a `<think>...</think>` trace, or the whole text if untagged.
fn think_interior(cot: &str) -> &str {
    let t = cot.trim();
    t.strip_prefix("<think>")
        .and_then(|r| r.strip_suffix("</think>"))
        .unwrap_or(t)
}

/// The supervised target text for an instance: the reasoning trace (or a
/// fixed placeholder) followed by every ground-truth entity.
pub fn canonical_completion(instance: &GroundingInstance) -> String {
    let think = instance.cot().map_or(PLACEHOLDER_THINK, think_interior);
    let answer = format_answer(instance.entities().iter().map(|e| (e.role, &e.bbox)));
    format_completion(think, &answer)
}

/// An instance paired with the token sequence of its best-known completion.
#[derive(Debug, Clone)]
pub struct Episode {
    pub instance: GroundingInstance,
    /// Canonical completion, terminated by the stop symbol when it is
    /// shorter than the policy's maximum length.
    pub target: Vec<usize>,
}

/// Vocabulary, sequence budget and episodes for toy training.
#[derive(Debug, Clone)]
pub struct ToyTask {
    vocab: Arc<Vocabulary>,
    max_length: usize,
    episodes: Vec<Episode>,
}

impl ToyTask {
    /// Two-way choice on one instance: the perfect canonical completion or a
    /// zero-reward refusal, each a single symbol, followed by stop.
    ///
    /// Repeating or mixing the two symbols produces partially rewarded
    /// texts, so the policy also has to learn to stop.
    pub fn two_completion(instance: GroundingInstance) -> Self {
        let symbols = vec![
            String::new(),
            canonical_completion(&instance),
            NO_ANSWER_TEXT.to_string(),
        ];
        let vocab = Arc::new(Vocabulary::new(symbols, 0).expect("stop index is in range"));
        Self {
            vocab,
            max_length: 2,
            episodes: vec![Episode {
                instance,
                target: vec![1, 0],
            }],
        }
    }

    /// Fine-grained vocabulary of tag, role, punctuation and number symbols
    /// (plus one symbol per distinct think text) covering every instance's
    /// canonical completion.
    pub fn tokenized(instances: &[GroundingInstance]) -> Result<Self, PolicyError> {
        if instances.is_empty() {
            return Err(PolicyError::EmptyDataset);
        }
        let mut pieces: BTreeSet<String> = [
            "<think>", "</think>", "<answer>", "</answer>", " ", "subject: ", "object: ",
            "[(", ", ", "), (", ")]",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        for inst in instances {
            pieces.insert(
                inst.cot()
                    .map_or(PLACEHOLDER_THINK, think_interior)
                    .to_string(),
            );
            for e in inst.entities() {
                for c in e.bbox.corners() {
                    pieces.insert(c.to_string());
                }
            }
        }
        pieces.remove("");

        let mut symbols = vec![String::new()];
        symbols.extend(pieces);
        let vocab = Arc::new(Vocabulary::new(symbols, 0)?);

        let mut encoded = Vec::with_capacity(instances.len());
        for inst in instances {
            encoded.push(vocab.encode(&canonical_completion(inst))?);
        }
        let max_length = encoded.iter().map(Vec::len).max().unwrap_or(0) + 1;
        let episodes = instances
            .iter()
            .cloned()
            .zip(encoded)
            .map(|(instance, mut target)| {
                target.push(vocab.stop());
                Episode { instance, target }
            })
            .collect();
        Ok(Self {
            vocab,
            max_length,
            episodes,
        })
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn max_length(&self) -> usize {
        self.max_length
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    /// Uniform starting policy sized for this task.
    pub fn initial_policy(&self) -> ToyPolicy {
        ToyPolicy::uniform(self.vocab.clone(), self.max_length)
    }
}
