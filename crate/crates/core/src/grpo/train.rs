//! Two-stage optimization: supervised cold start, then reward-driven GRPO.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::RewardConfig;
use crate::error::PolicyError;
use crate::grpo::objective::{group_advantages, grpo_loss, sft_loss};
use crate::grpo::policy::ToyPolicy;
use crate::grpo::task::{Episode, ToyTask};
use crate::reward::total_reward;

#[derive(Debug, Clone, PartialEq)]
pub struct GrpoConfig {
    /// Completions sampled per step.
    pub group_size: usize,
    pub clip_epsilon: f64,
    pub kl_beta: f64,
    pub advantage_epsilon: f64,
    pub learning_rate: f64,
    pub steps: usize,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            clip_epsilon: 0.2,
            kl_beta: 0.0025,
            advantage_epsilon: 1e-8,
            learning_rate: 1e-5,
            steps: 200,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.group_size < 2 {
            return Err(PolicyError::InvalidConfig("group_size must be at least 2".into()));
        }
        if !(self.clip_epsilon.is_finite() && self.clip_epsilon > 0.0) {
            return Err(PolicyError::InvalidConfig("clip_epsilon must be positive".into()));
        }
        if !(self.kl_beta.is_finite() && self.kl_beta >= 0.0) {
            return Err(PolicyError::InvalidConfig("kl_beta must be finite and >= 0".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(PolicyError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.advantage_epsilon.is_finite() && self.advantage_epsilon >= 0.0) {
            return Err(PolicyError::InvalidConfig("advantage_epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftConfig {
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            learning_rate: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    TwoStage,
    SftOnly,
    GrpoOnly,
}

/// Everything a training run needs besides the task.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPlan {
    pub mode: TrainingMode,
    pub sft: SftConfig,
    pub grpo: GrpoConfig,
    pub reward: RewardConfig,
    pub seed: u64,
}

impl TrainingPlan {
    /// Hyperparameters sized for the tabular toy policy: learning rates are
    /// far larger than what a billion-parameter model would use.
    pub fn toy(mode: TrainingMode) -> Self {
        let reward = match mode {
            TrainingMode::GrpoOnly => RewardConfig::grpo_only(),
            _ => RewardConfig::default(),
        };
        Self {
            mode,
            sft: SftConfig {
                steps: 5,
                learning_rate: 0.2,
            },
            grpo: GrpoConfig {
                learning_rate: 0.5,
                ..GrpoConfig::default()
            },
            reward,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sft,
    Grpo,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Sft => "sft",
            Stage::Grpo => "grpo",
        })
    }
}

/// One optimization step. Reward and KL columns are only meaningful for
/// GRPO steps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub stage: Stage,
    pub step: usize,
    pub mean_reward: Option<f64>,
    pub r_fmt_mean: Option<f64>,
    pub r_ent_mean: Option<f64>,
    pub r_rel_mean: Option<f64>,
    pub kl: Option<f64>,
    pub loss: f64,
    /// Probability of the episode's best-known completion before the update.
    pub p_best: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub records: Vec<StepRecord>,
}

pub const TRACE_HEADER: &str = "stage,step,mean_reward,r_fmt_mean,r_ent_mean,r_rel_mean,kl,loss,p_best";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainingTrace {
    pub fn grpo_records(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.stage == Stage::Grpo)
    }

    /// First GRPO step (0-based) whose pre-update `p_best` exceeds
    /// `threshold`, or `None` if it never does.
    pub fn grpo_steps_to_reach(&self, threshold: f64) -> Option<usize> {
        self.grpo_records()
            .find(|r| r.p_best > threshold)
            .map(|r| r.step)
    }

    /// CSV with [`TRACE_HEADER`]; empty cells for columns a stage lacks.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.stage,
                r.step,
                opt(r.mean_reward),
                opt(r.r_fmt_mean),
                opt(r.r_ent_mean),
                opt(r.r_rel_mean),
                opt(r.kl),
                r.loss,
                r.p_best
            )?;
        }
        Ok(())
    }
}

/// One GRPO update.
///
/// Samples `group_size` completions from `old`, scores them, normalizes the
/// rewards within the group and takes one descent step on the GRPO loss.
/// The step size is `lr / (1 + lr * s)`, where `s` bounds the curvature of
/// the KL term near the reference; it equals `lr` for small `kl_beta` and
/// keeps the update stable when the KL term dominates.
#[allow(clippy::too_many_arguments)]
pub fn grpo_step<R: Rng + ?Sized>(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    old: &ToyPolicy,
    episode: &Episode,
    step: usize,
    config: &GrpoConfig,
    reward_config: &RewardConfig,
    rng: &mut R,
) -> Result<(ToyPolicy, StepRecord), PolicyError> {
    let trajectories: Vec<Vec<usize>> = (0..config.group_size).map(|_| old.sample(rng)).collect();
    let vocab = old.vocab();
    let breakdowns: Vec<_> = trajectories
        .iter()
        .map(|t| total_reward(&vocab.decode(t), &episode.instance, reward_config))
        .collect();
    let rewards: Vec<f64> = breakdowns.iter().map(|b| b.r_total).collect();
    let advantages = group_advantages(&rewards, config.advantage_epsilon);

    let out = grpo_loss(
        policy,
        old,
        reference,
        &trajectories,
        &advantages,
        config.clip_epsilon,
        config.kl_beta,
    )?;

    let curvature = if out.visited_tokens == 0 {
        0.0
    } else {
        // softmax Fisher blocks have spectral norm <= 1/2
        0.5 * config.kl_beta * out.max_context_visits as f64 / out.visited_tokens as f64
    };
    let lr = config.learning_rate / (1.0 + config.learning_rate * curvature);

    let p_best = policy.sequence_log_prob(&episode.target)?.exp();
    let mut updated = policy.clone();
    updated.descend(&out.grad, lr);

    let g = breakdowns.len() as f64;
    let mean = |f: fn(&crate::domain::RewardBreakdown) -> f64| {
        Some(breakdowns.iter().map(f).sum::<f64>() / g)
    };
    let record = StepRecord {
        stage: Stage::Grpo,
        step,
        mean_reward: mean(|b| b.r_total),
        r_fmt_mean: mean(|b| b.r_fmt),
        r_ent_mean: mean(|b| b.r_ent),
        r_rel_mean: mean(|b| b.r_rel),
        kl: Some(out.kl),
        loss: out.loss,
        p_best,
    };
    Ok((updated, record))
}

/// Result of [`train_two_stage`].
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub policy: ToyPolicy,
    /// Frozen snapshot taken after stage I (the initial policy when the
    /// supervised stage is skipped).
    pub reference: ToyPolicy,
    pub trace: TrainingTrace,
}

/// Runs the supervised stage on canonical targets, freezes the result as
/// the reference, then runs GRPO. Episodes are visited round-robin.
pub fn train_two_stage(task: &ToyTask, plan: &TrainingPlan) -> Result<TrainingOutcome, PolicyError> {
    let episodes = task.episodes();
    if episodes.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    plan.grpo.validate()?;
    plan.reward
        .validate()
        .map_err(|e| PolicyError::InvalidConfig(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut policy = task.initial_policy();
    let mut trace = TrainingTrace::default();

    if plan.mode != TrainingMode::GrpoOnly {
        for step in 0..plan.sft.steps {
            let episode = &episodes[step % episodes.len()];
            let p_best = policy.sequence_log_prob(&episode.target)?.exp();
            let out = sft_loss(&policy, &episode.target)?;
            policy.descend(&out.grad, plan.sft.learning_rate);
            trace.records.push(StepRecord {
                stage: Stage::Sft,
                step,
                mean_reward: None,
                r_fmt_mean: None,
                r_ent_mean: None,
                r_rel_mean: None,
                kl: None,
                loss: out.loss,
                p_best,
            });
        }
    }

    let reference = policy.clone();
    if plan.mode != TrainingMode::SftOnly {
        for step in 0..plan.grpo.steps {
            let episode = &episodes[step % episodes.len()];
            let old = policy.clone();
            let (next, record) = grpo_step(
                &policy,
                &reference,
                &old,
                episode,
                step,
                &plan.grpo,
                &plan.reward,
                &mut rng,
            )?;
            policy = next;
            trace.records.push(record);
        }
    }

    Ok(TrainingOutcome {
        policy,
        reference,
        trace,
    })
}
