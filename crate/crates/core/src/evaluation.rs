//! Subject/object grounding accuracy at an IoU threshold.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::domain::{Entity, EntityRole, GroundingInstance, ParsedEntity};
use crate::parser::parse_completion;
use crate::reward::match_entities;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InstanceHits {
    pub subject_hit: bool,
    pub object_hits: usize,
    pub object_total: usize,
}

/// Uses the reward engine's matching; a ground-truth entity is a hit when
/// its matched IoU is strictly above `threshold`.
pub fn evaluate_instance(predicted: &[ParsedEntity], gt: &[Entity], threshold: f64) -> InstanceHits {
    let matching = match_entities(predicted, gt);
    let mut hits = InstanceHits {
        subject_hit: false,
        object_hits: 0,
        object_total: gt.iter().filter(|e| e.role == EntityRole::Object).count(),
    };
    for pair in &matching.pairs {
        if pair.iou <= threshold {
            continue;
        }
        match gt[pair.ground_truth].role {
            EntityRole::Subject => hits.subject_hit = true,
            EntityRole::Object => hits.object_hits += 1,
        }
    }
    hits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RoleCounts {
    pub hits: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceDetail {
    pub instance_id: String,
    #[serde(flatten)]
    pub hits: InstanceHits,
    pub missing_prediction: bool,
}

/// Accuracies are percentages in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub instances: usize,
    pub acc_sub: f64,
    pub acc_obj: f64,
    /// Entity-pooled accuracy over subjects and objects.
    pub macc_micro: f64,
    /// Mean of `acc_sub` and `acc_obj`.
    pub macc_macro: f64,
    pub subject: RoleCounts,
    pub object: RoleCounts,
    pub missing_predictions: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_instance: Option<Vec<InstanceDetail>>,
}

fn percent(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * hits as f64 / total as f64
    }
}

/// Scores every instance in `dataset` against its prediction. Missing
/// predictions count as empty completions; predictions for unknown ids are
/// reported as warnings and ignored.
pub fn evaluate_dataset(
    predictions: &HashMap<String, String>,
    dataset: &[GroundingInstance],
    threshold: f64,
    detailed: bool,
) -> MetricsReport {
    let mut subject = RoleCounts::default();
    let mut object = RoleCounts::default();
    let mut missing = 0;
    let mut details = Vec::new();

    for inst in dataset {
        let prediction = predictions.get(inst.id());
        if prediction.is_none() {
            missing += 1;
        }
        let parsed = parse_completion(prediction.map_or("", String::as_str));
        let hits = evaluate_instance(&parsed.entities, inst.entities(), threshold);
        subject.total += 1;
        subject.hits += usize::from(hits.subject_hit);
        object.total += hits.object_total;
        object.hits += hits.object_hits;
        if detailed {
            details.push(InstanceDetail {
                instance_id: inst.id().to_string(),
                hits,
                missing_prediction: prediction.is_none(),
            });
        }
    }

    let known: std::collections::HashSet<&str> = dataset.iter().map(|i| i.id()).collect();
    let mut unknown: Vec<&String> = predictions
        .keys()
        .filter(|k| !known.contains(k.as_str()))
        .collect();
    unknown.sort();
    let warnings = unknown
        .into_iter()
        .map(|k| format!("prediction for unknown instance id {k:?} ignored"))
        .collect();

    let acc_sub = percent(subject.hits, subject.total);
    let acc_obj = percent(object.hits, object.total);
    MetricsReport {
        threshold,
        instances: dataset.len(),
        acc_sub,
        acc_obj,
        macc_micro: percent(subject.hits + object.hits, subject.total + object.total),
        macc_macro: (acc_sub + acc_obj) / 2.0,
        subject,
        object,
        missing_predictions: missing,
        warnings,
        per_instance: detailed.then_some(details),
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "threshold: {}", self.threshold)?;
        writeln!(f, "instances: {}", self.instances)?;
        writeln!(f, "acc_sub: {:.2}", self.acc_sub)?;
        writeln!(f, "acc_obj: {:.2}", self.acc_obj)?;
        writeln!(f, "macc_micro: {:.2}", self.macc_micro)?;
        writeln!(f, "macc_macro: {:.2}", self.macc_macro)?;
        writeln!(f, "subject_hits: {}/{}", self.subject.hits, self.subject.total)?;
        writeln!(f, "object_hits: {}/{}", self.object.hits, self.object.total)?;
        write!(f, "missing_predictions: {}", self.missing_predictions)?;
        if let Some(details) = &self.per_instance {
            for d in details {
                write!(
                    f,
                    "\ninstance {}: subject {} objects {}/{}{}",
                    d.instance_id,
                    u8::from(d.hits.subject_hit),
                    d.hits.object_hits,
                    d.hits.object_total,
                    if d.missing_prediction { " (missing)" } else { "" }
                )?;
            }
        }
        Ok(())
    }
}
