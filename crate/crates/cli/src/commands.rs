use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use groundrl::data::{dataset_stats, load_completions, load_dataset, CompletionRecord};
use groundrl::grpo::{train_two_stage, ToyTask, TrainingMode, TrainingPlan};
use groundrl::protocol::ScoringService;
use groundrl::{evaluate_dataset, DataError, GroundingInstance, PolicyError, RewardBreakdown, RewardConfig, Split};
use serde::Serialize;

use crate::{Cli, Command, OutputFormat, TaskKind, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    /// The dataset had rejected records; the report has already been printed.
    Validation,
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Validation => 3,
        }
    }

    pub fn message(&self) -> Option<&str> {
        match self {
            CliError::Usage(m) | CliError::Input(m) => Some(m),
            CliError::Validation => None,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(format!("i/o error: {e}"))
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Score { completions, dataset } => score(cli, completions, dataset),
        Command::Evaluate {
            predictions,
            dataset,
            threshold,
            out,
            per_instance,
        } => evaluate(cli, predictions, dataset, *threshold, out.as_deref(), *per_instance),
        Command::Validate { dataset } => validate(cli, dataset),
        Command::TrainToy(args) => train_toy(cli, args),
        Command::Serve { dataset } => serve(cli, dataset),
    }
}

fn reward_config(cli: &Cli) -> Result<RewardConfig> {
    let Some(path) = &cli.config else {
        return Ok(RewardConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    let config: RewardConfig = toml::from_str(&text)
        .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))?;
    config
        .validate()
        .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))?;
    Ok(config)
}

/// Loads the accepted instances, warning about rejected lines.
fn instances(path: &Path) -> Result<Vec<GroundingInstance>> {
    let (instances, report) = load_dataset(path)?;
    for e in &report.errors {
        eprintln!("warning: {}: line {}: {}: {}", path.display(), e.line, e.code, e.message);
    }
    Ok(instances)
}

fn completions(path: &Path) -> Result<Vec<CompletionRecord>> {
    let (records, warnings) = load_completions(path)?;
    for (line, msg) in warnings {
        eprintln!("warning: {}: line {line}: skipped: {msg}", path.display());
    }
    Ok(records)
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report types serialize")
}

#[derive(Serialize)]
struct ScoreLine<'a> {
    instance_id: &'a str,
    #[serde(flatten)]
    breakdown: &'a RewardBreakdown,
}

#[derive(Serialize, Default)]
struct ScoreSummary {
    count: usize,
    r_fmt_mean: f64,
    r_ent_mean: f64,
    r_rel_mean: f64,
    r_total_mean: f64,
}

fn score(cli: &Cli, completions_path: &Path, dataset: &Path) -> Result<()> {
    let service = ScoringService::new(instances(dataset)?, reward_config(cli)?);
    let records = completions(completions_path)?;
    let mut out = BufWriter::new(io::stdout().lock());
    let mut sum = ScoreSummary::default();
    for record in &records {
        let Some(b) = service.score(&record.instance_id, &record.completion) else {
            eprintln!("warning: unknown instance id {:?}, skipped", record.instance_id);
            continue;
        };
        sum.count += 1;
        sum.r_fmt_mean += b.r_fmt;
        sum.r_ent_mean += b.r_ent;
        sum.r_rel_mean += b.r_rel;
        sum.r_total_mean += b.r_total;
        match cli.format {
            OutputFormat::Record => writeln!(
                out,
                "{}",
                json(&ScoreLine {
                    instance_id: &record.instance_id,
                    breakdown: &b,
                })
            )?,
            OutputFormat::Text => writeln!(
                out,
                "{}: r_fmt={} r_ent={} r_rel={} r_total={}",
                record.instance_id, b.r_fmt, b.r_ent, b.r_rel, b.r_total
            )?,
        }
    }
    if sum.count > 0 {
        let n = sum.count as f64;
        sum.r_fmt_mean /= n;
        sum.r_ent_mean /= n;
        sum.r_rel_mean /= n;
        sum.r_total_mean /= n;
        match cli.format {
            OutputFormat::Record => writeln!(out, "{}", json(&serde_json::json!({ "summary": sum })))?,
            OutputFormat::Text => writeln!(
                out,
                "count: {}\nr_fmt_mean: {}\nr_ent_mean: {}\nr_rel_mean: {}\nr_total_mean: {}",
                sum.count, sum.r_fmt_mean, sum.r_ent_mean, sum.r_rel_mean, sum.r_total_mean
            )?,
        }
    }
    out.flush()?;
    Ok(())
}

fn evaluate(
    cli: &Cli,
    predictions_path: &Path,
    dataset: &Path,
    threshold: f64,
    out_path: Option<&Path>,
    per_instance: bool,
) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Usage(format!("--threshold must be in [0, 1], got {threshold}")));
    }
    let instances = instances(dataset)?;
    let mut predictions = HashMap::new();
    for record in completions(predictions_path)? {
        if predictions.insert(record.instance_id.clone(), record.completion).is_some() {
            eprintln!("warning: duplicate prediction for {:?}, keeping the last", record.instance_id);
        }
    }
    let report = evaluate_dataset(&predictions, &instances, threshold, per_instance);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = out_path {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(path, text + "\n")
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    match cli.format {
        OutputFormat::Text => println!("{report}"),
        OutputFormat::Record => println!("{}", json(&report)),
    }
    Ok(())
}

fn validate(cli: &Cli, dataset: &Path) -> Result<()> {
    let (instances, report) = load_dataset(dataset)?;
    let stats = dataset_stats(&instances);
    match cli.format {
        OutputFormat::Text => println!("{report}\n{stats}"),
        OutputFormat::Record => println!(
            "{}",
            json(&serde_json::json!({ "validation": report, "stats": stats }))
        ),
    }
    if report.rejected > 0 {
        Err(CliError::Validation)
    } else {
        Ok(())
    }
}

fn policy_error(e: PolicyError) -> CliError {
    match e {
        PolicyError::EmptyDataset | PolicyError::Untokenizable(_) => CliError::Input(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

fn training_plan(cli: &Cli, args: &TrainArgs) -> Result<TrainingPlan> {
    let mode = if args.grpo_only {
        TrainingMode::GrpoOnly
    } else if args.sft_only {
        TrainingMode::SftOnly
    } else {
        TrainingMode::TwoStage
    };
    let mut plan = TrainingPlan::toy(mode);
    if cli.config.is_some() {
        plan.reward = reward_config(cli)?;
        if mode == TrainingMode::GrpoOnly {
            let preset = RewardConfig::grpo_only();
            plan.reward.lambda1 = preset.lambda1;
            plan.reward.lambda2 = preset.lambda2;
        }
    }
    plan.seed = args.seed;
    if let Some(v) = args.steps {
        plan.grpo.steps = v;
    }
    if let Some(v) = args.sft_steps {
        plan.sft.steps = v;
    }
    if let Some(v) = args.lr {
        plan.grpo.learning_rate = v;
    }
    if let Some(v) = args.sft_lr {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Usage("--sft-lr must be positive".into()));
        }
        plan.sft.learning_rate = v;
    }
    if let Some(v) = args.group_size {
        plan.grpo.group_size = v;
    }
    if let Some(v) = args.kl_beta {
        plan.grpo.kl_beta = v;
    }
    if let Some(v) = args.clip_epsilon {
        plan.grpo.clip_epsilon = v;
    }
    plan.grpo.validate().map_err(policy_error)?;
    Ok(plan)
}

fn toy_task(args: &TrainArgs, instances: Vec<GroundingInstance>) -> Result<ToyTask> {
    match args.task {
        TaskKind::TwoCompletion => {
            let chosen = match &args.instance {
                Some(id) => instances.into_iter().find(|i| i.id() == id),
                None => {
                    let first_train = instances.iter().position(|i| i.split() == Split::Train);
                    first_train.map(|k| instances[k].clone()).or_else(|| instances.into_iter().next())
                }
            };
            let instance = chosen.ok_or_else(|| match &args.instance {
                Some(id) => CliError::Input(format!("instance {id:?} not found in dataset")),
                None => CliError::Input("dataset has no valid instances".into()),
            })?;
            Ok(ToyTask::two_completion(instance))
        }
        TaskKind::Tokenized => {
            let train: Vec<_> = instances.iter().filter(|i| i.split() == Split::Train).cloned().collect();
            let chosen = if train.is_empty() {
                eprintln!("warning: no training instances, using every instance");
                instances
            } else {
                train
            };
            ToyTask::tokenized(&chosen).map_err(policy_error)
        }
    }
}

fn train_toy(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let plan = training_plan(cli, args)?;
    let task = toy_task(args, instances(&args.dataset)?)?;
    let r = &plan.reward;
    let sft_steps = if plan.mode == TrainingMode::GrpoOnly { 0 } else { plan.sft.steps };
    let grpo_steps = if plan.mode == TrainingMode::SftOnly { 0 } else { plan.grpo.steps };
    eprintln!(
        "mode={:?} seed={} sft_steps={} grpo_steps={} group_size={} kl_beta={} clip_epsilon={}",
        plan.mode, plan.seed, sft_steps, grpo_steps, plan.grpo.group_size, plan.grpo.kl_beta, plan.grpo.clip_epsilon
    );
    eprintln!(
        "reward lambda1={} lambda2={} alpha_subject={} alpha_object={} beta1={} beta2={}",
        r.lambda1, r.lambda2, r.alpha_subject, r.alpha_object, r.beta1, r.beta2
    );
    eprintln!(
        "task episodes={} vocab={} max_length={}",
        task.episodes().len(),
        task.vocab().len(),
        task.max_length()
    );

    let outcome = train_two_stage(&task, &plan).map_err(policy_error)?;
    match &args.trace_out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            outcome.trace.write_csv(&mut w)?;
            w.flush()?;
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            outcome.trace.write_csv(&mut w)?;
            w.flush()?;
        }
    }

    let final_p: f64 = task
        .episodes()
        .iter()
        .map(|e| outcome.policy.sequence_log_prob(&e.target).map(f64::exp))
        .sum::<std::result::Result<f64, _>>()
        .map_err(policy_error)?
        / task.episodes().len() as f64;
    let reached = outcome
        .trace
        .grpo_steps_to_reach(0.9)
        .map_or("never".to_string(), |s| s.to_string());
    match cli.format {
        OutputFormat::Text => eprintln!("final_p_best={final_p} grpo_steps_to_0.9={reached}"),
        OutputFormat::Record => eprintln!(
            "{}",
            json(&serde_json::json!({ "final_p_best": final_p, "grpo_steps_to_0.9": reached }))
        ),
    }
    Ok(())
}

fn serve(cli: &Cli, dataset: &Path) -> Result<()> {
    let service = ScoringService::new(instances(dataset)?, reward_config(cli)?);
    service.serve(io::stdin().lock(), io::stdout().lock())?;
    Ok(())
}
