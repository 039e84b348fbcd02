//! Loss functions over [`ToyPolicy`] with exact gradients with respect to
//! the logit table.

use crate::error::PolicyError;
use crate::grpo::policy::{Context, ToyPolicy};

/// A scalar loss and its gradient, laid out like [`ToyPolicy::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Negative log-likelihood of `target` under `policy`.
pub fn sft_loss(policy: &ToyPolicy, target: &[usize]) -> Result<LossAndGrad, PolicyError> {
    if target.is_empty() {
        return Err(PolicyError::EmptyTarget);
    }
    policy.check_sequence(target)?;

    let mut grad = vec![0.0; policy.num_params()];
    let mut loss = 0.0;
    for t in 0..target.len() {
        let ctx = Context::of(target, t);
        let offset = policy.row_offset(ctx);
        let log_p = policy.log_probs(ctx);
        loss -= log_p[target[t]];
        // d(-log p_y)/d logit_k = p_k - [k == y]
        for (k, lp) in log_p.iter().enumerate() {
            grad[offset + k] += lp.exp();
        }
        grad[offset + target[t]] -= 1.0;
    }
    Ok(LossAndGrad { loss, grad })
}

/// Group-normalized advantages `(R - mean) / (std + eps)` with the
/// population standard deviation.
pub fn group_advantages(rewards: &[f64], advantage_epsilon: f64) -> Vec<f64> {
    // the float mean of equal values can be off by an ulp
    if rewards.iter().all(|&r| r == rewards[0]) {
        return vec![0.0; rewards.len()];
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + advantage_epsilon;
    rewards.iter().map(|r| (r - mean) / denom).collect()
}

/// `min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)`.
pub fn clipped_term(ratio: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Whether the unclipped branch of [`clipped_term`] is the active one, i.e.
/// whether the term depends on the ratio locally.
fn unclipped_active(ratio: f64, advantage: f64, clip_epsilon: f64) -> bool {
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    ratio * advantage <= clipped * advantage
}

/// KL(p || q) for two categorical distributions.
pub fn categorical_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pk, _)| pk > 0.0)
        .map(|(&pk, &qk)| pk * (pk.ln() - qk.ln()))
        .sum()
}

fn row_kl(policy: &ToyPolicy, reference: &ToyPolicy, ctx: Context) -> f64 {
    let lp = policy.log_probs(ctx);
    let lq = reference.log_probs(ctx);
    lp.iter()
        .zip(&lq)
        .map(|(a, b)| a.exp() * (a - b))
        .sum()
}

/// Exact per-context KL(policy || reference), averaged over every token
/// position visited by `trajectories`. Zero when nothing was visited.
pub fn kl_divergence(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    trajectories: &[Vec<usize>],
) -> Result<f64, PolicyError> {
    policy.check_same_shape(reference)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for tokens in trajectories {
        policy.check_sequence(tokens)?;
        for t in 0..tokens.len() {
            total += row_kl(policy, reference, Context::of(tokens, t));
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Value of the per-step GRPO loss and its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct GrpoLoss {
    pub loss: f64,
    /// Mean length-normalized clipped surrogate (the quantity maximized).
    pub surrogate: f64,
    pub kl: f64,
    pub grad: Vec<f64>,
    /// Largest number of visits to a single context in the batch.
    pub max_context_visits: usize,
    pub visited_tokens: usize,
}

/// GRPO loss for a fixed batch of trajectories sampled from `old`:
///
/// `-(1/G) sum_i (1/|o_i|) sum_t min(r A_i, clip(r) A_i) + kl_beta * KL`
///
/// where `r` is the per-token probability ratio between `policy` and `old`
/// and KL is [`kl_divergence`] against `reference`. Every token of a
/// completion shares that completion's advantage.
pub fn grpo_loss(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    reference: &ToyPolicy,
    trajectories: &[Vec<usize>],
    advantages: &[f64],
    clip_epsilon: f64,
    kl_beta: f64,
) -> Result<GrpoLoss, PolicyError> {
    policy.check_same_shape(old)?;
    policy.check_same_shape(reference)?;
    if trajectories.len() != advantages.len() {
        return Err(PolicyError::ShapeMismatch(format!(
            "{} trajectories but {} advantages",
            trajectories.len(),
            advantages.len()
        )));
    }

    let g = trajectories.len().max(1) as f64;
    let mut grad = vec![0.0; policy.num_params()];
    let mut surrogate = 0.0;
    let mut kl_sum = 0.0;
    let mut visited = 0usize;
    let mut visits = std::collections::HashMap::new();

    // visited rows, with multiplicity, for the KL term
    let mut kl_rows = Vec::new();

    for (tokens, &adv) in trajectories.iter().zip(advantages) {
        policy.check_sequence(tokens)?;
        if tokens.is_empty() {
            continue;
        }
        let weight = 1.0 / (g * tokens.len() as f64);
        for t in 0..tokens.len() {
            let ctx = Context::of(tokens, t);
            let y = tokens[t];
            let lp = policy.log_probs(ctx);
            let lp_old = old.log_probs(ctx);
            let ratio = (lp[y] - lp_old[y]).exp();
            surrogate += weight * clipped_term(ratio, adv, clip_epsilon);

            if unclipped_active(ratio, adv, clip_epsilon) {
                // d ratio / d logit_k = ratio * ([k == y] - p_k)
                let offset = policy.row_offset(ctx);
                let scale = weight * adv * ratio;
                for (k, l) in lp.iter().enumerate() {
                    grad[offset + k] += scale * l.exp();
                }
                grad[offset + y] -= scale;
            }

            kl_rows.push(ctx);
            *visits.entry(ctx).or_insert(0usize) += 1;
            visited += 1;
        }
    }

    if visited > 0 {
        let norm = kl_beta / visited as f64;
        for &ctx in &kl_rows {
            let lp = policy.log_probs(ctx);
            let lq = reference.log_probs(ctx);
            let kl: f64 = lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum();
            kl_sum += kl;
            if norm != 0.0 {
                // d KL / d logit_k = p_k (log p_k - log q_k - KL)
                let offset = policy.row_offset(ctx);
                for k in 0..lp.len() {
                    grad[offset + k] += norm * lp[k].exp() * (lp[k] - lq[k] - kl);
                }
            }
        }
    }
    let kl = if visited == 0 { 0.0 } else { kl_sum / visited as f64 };

    Ok(GrpoLoss {
        loss: -surrogate + kl_beta * kl,
        surrogate,
        kl,
        grad,
        max_context_visits: visits.values().copied().max().unwrap_or(0),
        visited_tokens: visited,
    })
}
