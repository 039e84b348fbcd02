//! Entity-aware reward: format, grounding accuracy and relational bonus.

use std::cmp::Ordering;

use crate::domain::{
    BoundingBox, Entity, EntityRole, GroundingInstance, MatchedPair, ParsedCompletion,
    ParsedEntity, RewardBreakdown, RewardConfig,
};
use crate::parser::parse_completion;

/// Intersection over union of two valid boxes; 0 when disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.x2().min(b.x2()) - a.x1().max(b.x1());
    let h = a.y2().min(b.y2()) - a.y1().max(b.y1());
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    inter / (a.area() + b.area() - inter)
}

/// Maps an IoU onto the discrete tier table. Comparisons are strict.
pub fn tier_score(iou_value: f64, config: &RewardConfig) -> f64 {
    config
        .iou_tiers
        .iter()
        .find(|(threshold, _)| iou_value > *threshold)
        .map_or(0.0, |&(_, score)| score)
}

/// One-to-one, role-constrained correspondence between predictions and
/// ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    /// Pairs in the order the greedy rule selected them.
    pub pairs: Vec<MatchedPair>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_ground_truth: Vec<usize>,
}

impl Matching {
    /// IoU credited to prediction `i`: its matched IoU, or 0.
    pub fn prediction_iou(&self, i: usize) -> f64 {
        self.pairs
            .iter()
            .find(|p| p.prediction == i)
            .map_or(0.0, |p| p.iou)
    }

    /// Matched IoU of ground-truth entity `k`, if any.
    pub fn ground_truth_iou(&self, k: usize) -> Option<f64> {
        self.pairs.iter().find(|p| p.ground_truth == k).map(|p| p.iou)
    }
}

/// Greedy matching: among same-role pairs with positive IoU, take the highest
/// IoU first (ties to the lower prediction index, then the lower
/// ground-truth index) and retire both sides.
pub fn match_entities(predicted: &[ParsedEntity], gt: &[Entity]) -> Matching {
    let mut candidates = Vec::new();
    for (p, pred) in predicted.iter().enumerate() {
        for (g, truth) in gt.iter().enumerate() {
            if pred.role != truth.role {
                continue;
            }
            let value = iou(&pred.bbox, &truth.bbox);
            if value > 0.0 {
                candidates.push(MatchedPair {
                    prediction: p,
                    ground_truth: g,
                    iou: value,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .partial_cmp(&a.iou)
            .unwrap_or(Ordering::Equal)
            .then(a.prediction.cmp(&b.prediction))
            .then(a.ground_truth.cmp(&b.ground_truth))
    });

    let mut pred_used = vec![false; predicted.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if pred_used[c.prediction] || gt_used[c.ground_truth] {
            continue;
        }
        pred_used[c.prediction] = true;
        gt_used[c.ground_truth] = true;
        pairs.push(c);
    }

    let unmatched = |used: &[bool]| {
        used.iter()
            .enumerate()
            .filter(|(_, &u)| !u)
            .map(|(i, _)| i)
            .collect()
    };
    Matching {
        pairs,
        unmatched_predictions: unmatched(&pred_used),
        unmatched_ground_truth: unmatched(&gt_used),
    }
}

pub fn format_reward(parsed: &ParsedCompletion, config: &RewardConfig) -> f64 {
    let mut r = 0.0;
    if parsed.structural_ok {
        r += config.lambda1;
    }
    if !parsed.entities.is_empty() {
        r += config.lambda2;
    }
    r
}

/// Role-weighted mean tier score over all predicted entities. Unmatched
/// predictions contribute zero but still count in the denominator.
pub fn entity_reward(matching: &Matching, predicted: &[ParsedEntity], config: &RewardConfig) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let sum: f64 = predicted
        .iter()
        .enumerate()
        .map(|(i, e)| config.alpha(e.role) * tier_score(matching.prediction_iou(i), config))
        .sum();
    sum / predicted.len() as f64
}

pub fn relational_reward(matching: &Matching, gt: &[Entity], config: &RewardConfig) -> f64 {
    let mut subjects = 0;
    let mut objects = 0;
    for (k, entity) in gt.iter().enumerate() {
        let hit = matching
            .ground_truth_iou(k)
            .is_some_and(|v| v > config.match_threshold);
        if hit {
            match entity.role {
                EntityRole::Subject => subjects += 1,
                EntityRole::Object => objects += 1,
            }
        }
    }
    let mut r = 0.0;
    if subjects >= 1 && objects >= 1 {
        r += config.beta1;
    }
    if objects >= 2 {
        r += config.beta2;
    }
    r
}

/// Scores an already parsed completion.
pub fn score_parsed(
    parsed: &ParsedCompletion,
    instance: &GroundingInstance,
    config: &RewardConfig,
) -> RewardBreakdown {
    let matching = match_entities(&parsed.entities, instance.entities());
    let r_fmt = format_reward(parsed, config);
    let r_ent = entity_reward(&matching, &parsed.entities, config);
    let r_rel = relational_reward(&matching, instance.entities(), config);
    RewardBreakdown {
        r_fmt,
        r_ent,
        r_rel,
        r_total: r_fmt + r_ent + r_rel,
        matching: matching.pairs,
        unmatched_predictions: matching.unmatched_predictions,
    }
}

/// Full reward for a raw completion against one instance.
pub fn total_reward(
    completion_text: &str,
    instance: &GroundingInstance,
    config: &RewardConfig,
) -> RewardBreakdown {
    score_parsed(&parse_completion(completion_text), instance, config)
}
