use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use ddtrl::analysis::{emit_report, AnalysisConfig, AnalysisStart};
use ddtrl::baselines::{cart_fit, collect_dataset, training_accuracy};
use ddtrl::crisp::{discretize_tree, prune, CrispPolicy, NameTable};
use ddtrl::envs::EnvConfig;
use ddtrl::rng::{stream, Stream};
use ddtrl::train::{
    evaluate, train as run_training, write_curve_csv, ActionSelection, Actor, Arch, PolicyActor, PolicyModel,
    RandomActor, ReturnConvention, TrainConfig, DEFAULT_MLP_WIDTH,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ToolConfig;
use crate::manifest::{write_atomic, RunManifest, RunRecorder, RunStatus};
use crate::UsageError;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Args)]
pub struct EnvArgs {
    /// Environment: chain, cartpole or wildfire.
    #[arg(long)]
    pub env: Option<String>,
    /// Environment parameters as JSON (with a "name" field); overrides --env defaults.
    #[arg(long)]
    pub env_config: Option<PathBuf>,
}

impl EnvArgs {
    fn resolve(&self) -> anyhow::Result<EnvConfig> {
        match (&self.env, &self.env_config) {
            (_, Some(path)) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let cfg: EnvConfig = serde_json::from_str(&text)
                    .map_err(|e| usage(format!("environment config {}: {e}", path.display())))?;
                if let Some(name) = &self.env {
                    if name != cfg.name() {
                        return Err(usage(format!(
                            "--env {name} disagrees with {} in {}",
                            cfg.name(),
                            path.display()
                        )));
                    }
                }
                Ok(cfg)
            }
            (Some(name), None) => Ok(EnvConfig::by_name(name)?),
            (None, None) => Err(usage("pass --env or --env-config")),
        }
    }
}

fn names_for(env: Option<&EnvConfig>, policy: &CrispPolicy) -> anyhow::Result<NameTable> {
    match env {
        Some(cfg) => {
            let env = cfg.build()?;
            Ok(NameTable::new(env.feature_names(), env.action_names()))
        }
        None => Ok(NameTable::generic(policy.d, policy.n_actions)),
    }
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    write_atomic(path, text.as_bytes())
}

// ---------------------------------------------------------------- train

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// Architecture: tree:L (L leaves), list:R (R rules), mlp:H or mlp:HxW.
    #[arg(long, default_value = "tree:2")]
    pub arch: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Episodes collected per PPO update.
    #[arg(long)]
    pub batch_episodes: Option<usize>,
    /// Return convention: conventional or from_end.
    #[arg(long)]
    pub returns: Option<String>,
    /// Keep every split's alpha at its initial value.
    #[arg(long)]
    pub freeze_alpha: bool,
    /// Stop once the trailing 50-episode average reaches this value.
    #[arg(long)]
    pub stop_at: Option<f64>,
    /// Episodes for the random-policy baseline and the final evaluation (0 skips both).
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "runs/train")]
    pub out: PathBuf,
    /// Replay the resolved configuration of an earlier run and check its metrics.
    #[arg(long, conflicts_with_all = ["env", "env_config"])]
    pub from_manifest: Option<PathBuf>,
}

/// The fully resolved inputs of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub env: EnvConfig,
    pub arch: Arch,
    pub train: TrainConfig,
    pub eval_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub episodes_run: usize,
    pub stopped_early: bool,
    pub final_moving_avg_50: Option<f64>,
    pub best_moving_avg_50: Option<f64>,
    pub random_policy_mean: Option<f64>,
    pub random_policy_std: Option<f64>,
    pub eval_mean: Option<f64>,
    pub eval_std: Option<f64>,
}

fn resolve_train(cfg: &ToolConfig, a: &TrainArgs) -> anyhow::Result<TrainRun> {
    let env = a.env.resolve()?;
    let arch: Arch = a.arch.parse().map_err(usage)?;
    let mut train = cfg.train_config(env.name())?;
    if let Some(v) = a.seed {
        train.seed = v;
    }
    if let Some(v) = a.episodes {
        train.episodes = v;
    }
    if let Some(v) = a.lr {
        train.learning_rate = v;
    }
    if let Some(v) = a.gamma {
        train.gamma = v;
    }
    if let Some(v) = a.max_steps {
        train.max_steps = v;
    }
    if let Some(v) = a.batch_episodes {
        train.batch_episodes = v;
    }
    if let Some(v) = &a.returns {
        train.returns = serde_json::from_value::<ReturnConvention>(Value::String(v.clone()))
            .map_err(|_| usage(format!("unknown return convention {v:?} (conventional, from_end)")))?;
    }
    if a.freeze_alpha {
        train.freeze_alpha = true;
    }
    if a.stop_at.is_some() {
        train.stop_at_average = a.stop_at;
    }
    train.validate()?;
    Ok(TrainRun {
        env,
        arch,
        train,
        eval_episodes: a.eval_episodes.unwrap_or(cfg.eval_episodes),
    })
}

/// Trains one run into `out` and writes its manifest, also when training
/// fails part way.
pub fn execute_train(run: &TrainRun, out: &Path) -> anyhow::Result<RunManifest> {
    run.train.validate()?;
    let mut rec = RunRecorder::start("train", run.train.seed, run);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest_path = out.join("manifest.json");
    rec.output("manifest", &manifest_path);

    let mut env = run.env.build()?;
    let mut init_rng = stream(run.train.seed, Stream::PolicyInit);
    let mut model = run.arch.build(env.obs_dim(), env.n_actions(), &mut init_rng);
    let max_steps = run.train.max_steps;

    let random = if run.eval_episodes > 0 {
        let actor = RandomActor {
            n_actions: env.n_actions(),
        };
        Some(evaluate(
            &actor,
            env.as_mut(),
            run.eval_episodes,
            max_steps,
            run.train.seed,
        )?)
    } else {
        None
    };

    let outcome = match run_training(&mut model, &run.env, &run.train) {
        Ok(o) => o,
        Err(e) => {
            let metrics = json!({ "random_policy_mean": random.as_ref().map(|r| r.mean) });
            rec.finish(RunStatus::Failed, Some(e.to_string()), metrics)
                .write(&manifest_path)?;
            return Err(e.into());
        }
    };

    let model_path = out.join("model.json");
    write_text(&model_path, &(model.to_json() + "\n"))?;
    rec.output("model", &model_path);
    let curve_path = out.join("curve.csv");
    write_curve_csv(&curve_path, &outcome.records)?;
    rec.output("curve", &curve_path);

    let trained = if run.eval_episodes > 0 {
        let actor = PolicyActor {
            policy: model.as_policy(),
            selection: ActionSelection::Sample,
        };
        Some(evaluate(
            &actor,
            env.as_mut(),
            run.eval_episodes,
            max_steps,
            run.train.seed,
        )?)
    } else {
        None
    };
    let metrics = TrainMetrics {
        episodes_run: outcome.records.len(),
        stopped_early: outcome.stopped_early,
        final_moving_avg_50: outcome.records.last().map(|r| r.moving_avg_50),
        best_moving_avg_50: (!outcome.records.is_empty()).then(|| outcome.best_moving_average()),
        random_policy_mean: random.as_ref().map(|r| r.mean),
        random_policy_std: random.as_ref().map(|r| r.std),
        eval_mean: trained.as_ref().map(|r| r.mean),
        eval_std: trained.as_ref().map(|r| r.std),
    };
    let manifest = rec.finish(RunStatus::Ok, None, serde_json::to_value(&metrics)?);
    manifest.write(&manifest_path)?;
    Ok(manifest)
}

pub fn train(cfg: &ToolConfig, a: TrainArgs) -> anyhow::Result<()> {
    let (run, expected) = match &a.from_manifest {
        Some(path) => {
            let old = RunManifest::read(path)?;
            if old.command != "train" {
                return Err(usage(format!(
                    "{} is a {} manifest, not a train manifest",
                    path.display(),
                    old.command
                )));
            }
            let run: TrainRun =
                serde_json::from_value(old.config.clone()).map_err(|e| usage(format!("manifest config: {e}")))?;
            (run, Some(old.metrics))
        }
        None => (resolve_train(cfg, &a)?, None),
    };
    let manifest = execute_train(&run, &a.out)?;
    println!("{}", serde_json::to_string(&manifest.metrics)?);
    if let Some(expected) = expected {
        if expected != manifest.metrics {
            anyhow::bail!(
                "replayed metrics differ from the manifest: expected {expected}, got {}",
                manifest.metrics
            );
        }
        println!("metrics reproduced exactly");
    }
    Ok(())
}

// ----------------------------------------------------------- discretize

#[derive(Debug, Args)]
pub struct DiscretizeArgs {
    /// Trained soft tree or rule list (model.json).
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory for crisp.json, crisp.txt and crisp.dot.
    #[arg(long)]
    pub out: PathBuf,
    /// Drop splits whose subtrees always pick the same action.
    #[arg(long)]
    pub prune: bool,
    /// Environment whose feature and action names label the text and dot output.
    #[command(flatten)]
    pub env: EnvArgs,
}

fn read_model(path: &Path) -> anyhow::Result<PolicyModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    PolicyModel::from_json(&text).map_err(|e| usage(format!("model {}: {e}", path.display())))
}

fn optional_env(a: &EnvArgs) -> anyhow::Result<Option<EnvConfig>> {
    if a.env.is_none() && a.env_config.is_none() {
        Ok(None)
    } else {
        a.resolve().map(Some)
    }
}

fn write_crisp(policy: &CrispPolicy, names: &NameTable, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let files = [
        ("crisp.json", policy.to_json() + "\n"),
        ("crisp.txt", policy.to_text(names)?),
        ("crisp.dot", policy.to_dot(names)?),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let p = out.join(name);
        write_text(&p, &body)?;
        paths.push(p);
    }
    Ok(paths)
}

pub fn discretize(a: DiscretizeArgs) -> anyhow::Result<()> {
    let tree = match read_model(&a.model)? {
        PolicyModel::Tree(t) => t,
        PolicyModel::Mlp(_) => return Err(usage("an MLP has no tree structure to discretize")),
    };
    let mut policy = discretize_tree(&tree).context("discretizing")?;
    if a.prune {
        policy = prune(&policy);
    }
    let env = optional_env(&a.env)?;
    let names = names_for(env.as_ref(), &policy)?;
    write_crisp(&policy, &names, &a.out)?;
    print!("{}", policy.to_text(&names)?);
    Ok(())
}

// ----------------------------------------------------------------- eval

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Soft tree, MLP or crisp policy file.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub env: EnvArgs,
    /// Defaults to eval_episodes from the tool configuration.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to the environment's training episode cap.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Take the most likely action of a soft policy instead of sampling.
    #[arg(long)]
    pub greedy: bool,
    /// Write the summary, including every episode return, as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Any policy file the toolkit writes.
pub enum LoadedPolicy {
    Soft(PolicyModel),
    Crisp(CrispPolicy),
}

impl LoadedPolicy {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("policy {}: {e}", path.display())))?;
        if value.get("root").is_some() && value.get("kind").is_some() {
            let p = CrispPolicy::from_json(&text).map_err(|e| usage(format!("policy {}: {e}", path.display())))?;
            Ok(LoadedPolicy::Crisp(p))
        } else {
            Ok(LoadedPolicy::Soft(read_model(path)?))
        }
    }

    fn with_actor<T>(&self, selection: ActionSelection, f: impl FnOnce(&dyn Actor) -> T) -> T {
        match self {
            LoadedPolicy::Soft(m) => f(&PolicyActor {
                policy: m.as_policy(),
                selection,
            }),
            LoadedPolicy::Crisp(c) => f(c),
        }
    }
}

pub fn eval(cfg: &ToolConfig, a: EvalArgs) -> anyhow::Result<()> {
    let episodes = a.episodes.unwrap_or(cfg.eval_episodes);
    if episodes == 0 {
        return Err(usage("--episodes must be at least 1"));
    }
    let env_cfg = a.env.resolve()?;
    let max_steps = match a.max_steps {
        Some(m) => m,
        None => cfg.train_config(env_cfg.name())?.max_steps,
    };
    let policy = LoadedPolicy::read(&a.model)?;
    let selection = if a.greedy {
        ActionSelection::Greedy
    } else {
        ActionSelection::Sample
    };
    let mut env = env_cfg.build()?;
    let summary = policy.with_actor(selection, |actor| {
        evaluate(actor, env.as_mut(), episodes, max_steps, a.seed)
    })?;
    let report = json!({
        "model": a.model,
        "env": env_cfg.name(),
        "episodes": episodes,
        "seed": a.seed,
        "max_steps": max_steps,
        "selection": selection,
        "mean": summary.mean,
        "std": summary.std,
    });
    println!("{report}");
    if let Some(out) = &a.out {
        let mut full = report;
        full["returns"] = json!(summary.returns);
        write_text(out, &(serde_json::to_string_pretty(&full)? + "\n"))?;
    }
    Ok(())
}

// -------------------------------------------------------------- analyze

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Analysis settings as JSON; defaults to the "analysis" block of the tool configuration.
    #[arg(long)]
    pub analysis_config: Option<PathBuf>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Episode cap in steps, including the terminal step.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Start state: "averaged" or a state index.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long, default_value = "runs/analysis")]
    pub out: PathBuf,
}

pub fn analyze(cfg: &ToolConfig, a: AnalyzeArgs) -> anyhow::Result<()> {
    let mut ac: AnalysisConfig = match &a.analysis_config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("analysis config {}: {e}", path.display())))?
        }
        None => cfg.analysis.clone(),
    };
    if let Some(g) = a.grid_points {
        ac.grid_points = g;
    }
    if a.horizon.is_some() {
        ac.horizon = a.horizon;
    }
    if let Some(s) = &a.start {
        ac.start = match s.as_str() {
            "averaged" => AnalysisStart::Averaged,
            n => AnalysisStart::Fixed(n.parse().map_err(|_| usage(format!("bad --start {n:?}")))?),
        };
    }
    ac.validate()?;
    let mut rec = RunRecorder::start("analyze", 0, &ac);
    let (report, paths) = emit_report(&ac, &a.out)?;
    for p in &paths {
        let key = p.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
        rec.output(key, p);
    }
    let manifest_path = a.out.join("manifest.json");
    rec.output("manifest", &manifest_path);
    let s = &report.summary;
    let metrics = json!({
        "root_counts": s.root_counts,
        "q_roots": s.roots["q"].roots,
        "pg_roots": s.roots["pg"].roots,
        "pg_roots_by_start": s.pg_roots_by_start,
        "extrema_counts": s.extrema_counts,
        "wrong_action_argmin": s.wrong_action_argmin,
    });
    rec.finish(RunStatus::Ok, None, metrics.clone()).write(&manifest_path)?;
    println!("{metrics}");
    Ok(())
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Tree,
    List,
    Mlp,
}

impl Family {
    fn key(self) -> &'static str {
        match self {
            Family::Tree => "tree",
            Family::List => "list",
            Family::Mlp => "mlp",
        }
    }

    fn arch(self, size: usize) -> anyhow::Result<Arch> {
        let spec = match self {
            Family::Mlp => format!("mlp:{size}x{DEFAULT_MLP_WIDTH}"),
            f => format!("{}:{size}", f.key()),
        };
        spec.parse().map_err(usage)
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    #[arg(long, value_enum)]
    pub family: Family,
    /// Comma-separated sizes; defaults to the family's list in the tool configuration.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory for sweep.csv, sweep_runs.csv and manifest.json.
    #[arg(long, default_value = "runs/sweep")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct SweepPlan {
    env: EnvConfig,
    family: Family,
    sizes: Vec<usize>,
    seeds: Vec<u64>,
    train: TrainConfig,
}

struct CellResult {
    size: usize,
    seed: u64,
    final_avg: f64,
    best_avg: f64,
}

fn run_cell(plan: &SweepPlan, size: usize, seed: u64) -> anyhow::Result<(f64, f64)> {
    let env = plan.env.build()?;
    let arch = plan.family.arch(size)?;
    let cfg = TrainConfig {
        seed,
        ..plan.train.clone()
    };
    let mut model = arch.build(env.obs_dim(), env.n_actions(), &mut stream(seed, Stream::PolicyInit));
    let out = run_training(&mut model, &plan.env, &cfg)?;
    let last = out.records.last().map_or(f64::NAN, |r| r.moving_avg_50);
    Ok((last, out.best_moving_average()))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn sweep(cfg: &ToolConfig, a: SweepArgs) -> anyhow::Result<()> {
    let env = a.env.resolve()?;
    let sizes = match &a.sizes {
        Some(s) => s.clone(),
        None => cfg.sweep_sizes.get(a.family.key()).cloned().unwrap_or_default(),
    };
    if sizes.is_empty() {
        return Err(usage("the sweep needs at least one size"));
    }
    if a.seeds.is_empty() {
        return Err(usage("the sweep needs at least one seed"));
    }
    for &s in &sizes {
        a.family.arch(s)?;
    }
    let mut train = cfg.train_config(env.name())?;
    if let Some(v) = a.episodes {
        train.episodes = v;
    }
    if let Some(v) = a.lr {
        train.learning_rate = v;
    }
    if let Some(v) = a.max_steps {
        train.max_steps = v;
    }
    train.validate()?;
    let plan = SweepPlan {
        env,
        family: a.family,
        sizes,
        seeds: a.seeds.clone(),
        train,
    };
    let mut rec = RunRecorder::start("sweep", plan.seeds[0], &plan);

    let cells: Vec<(usize, u64)> = plan
        .sizes
        .iter()
        .flat_map(|&size| plan.seeds.iter().map(move |&seed| (size, seed)))
        .collect();
    let work = || -> Vec<CellResult> {
        cells
            .par_iter()
            .map(|&(size, seed)| {
                let (final_avg, best_avg) = run_cell(&plan, size, seed).unwrap_or_else(|e| {
                    log::error!("sweep cell {}:{size} seed {seed} failed: {e:#}", plan.family.key());
                    (f64::NAN, f64::NAN)
                });
                CellResult {
                    size,
                    seed,
                    final_avg,
                    best_avg,
                }
            })
            .collect()
    };
    let results = match a.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work),
        None => work(),
    };

    let mut runs_csv = String::from("arch,size,seed,final_moving_avg_50,best_moving_avg_50\n");
    for r in &results {
        runs_csv += &format!(
            "{},{},{},{},{}\n",
            plan.family.key(),
            r.size,
            r.seed,
            r.final_avg,
            r.best_avg
        );
    }
    let mut table = String::from("arch,size,runs,failures,mean,std\n");
    let mut rows = Vec::new();
    for &size in &plan.sizes {
        let finals: Vec<f64> = results.iter().filter(|r| r.size == size).map(|r| r.final_avg).collect();
        let ok: Vec<f64> = finals.iter().copied().filter(|v| v.is_finite()).collect();
        let (mean, std) = mean_std(&ok);
        table += &format!(
            "{},{size},{},{},{mean},{std}\n",
            plan.family.key(),
            finals.len(),
            finals.len() - ok.len()
        );
        rows.push(
            json!({"size": size, "runs": finals.len(), "failures": finals.len() - ok.len(), "mean": mean, "std": std}),
        );
    }
    let table_path = a.out.join("sweep.csv");
    let runs_path = a.out.join("sweep_runs.csv");
    write_text(&table_path, &table)?;
    write_text(&runs_path, &runs_csv)?;
    rec.output("table", &table_path);
    rec.output("runs", &runs_path);
    let manifest_path = a.out.join("manifest.json");
    rec.output("manifest", &manifest_path);
    rec.finish(RunStatus::Ok, None, json!({ "cells": rows }))
        .write(&manifest_path)?;
    print!("{table}");
    Ok(())
}

// --------------------------------------------------------------- export

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Text,
    Dot,
    Json,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Crisp policy (crisp.json).
    #[arg(long)]
    pub crisp: PathBuf,
    #[arg(long, value_enum, default_value_t = ExportFormat::Text)]
    pub format: ExportFormat,
    /// Environment whose names label the output.
    #[command(flatten)]
    pub env: EnvArgs,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn export(a: ExportArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.crisp).with_context(|| format!("reading {}", a.crisp.display()))?;
    let policy = CrispPolicy::from_json(&text).map_err(|e| usage(format!("policy {}: {e}", a.crisp.display())))?;
    let env = optional_env(&a.env)?;
    let names = names_for(env.as_ref(), &policy)?;
    let body = match a.format {
        ExportFormat::Text => policy.to_text(&names)?,
        ExportFormat::Dot => policy.to_dot(&names)?,
        ExportFormat::Json => policy.to_json() + "\n",
    };
    match &a.out {
        Some(p) => write_text(p, &body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

// --------------------------------------------------------------- fit-dt

#[derive(Debug, Args)]
pub struct FitDtArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// Policy whose actions are logged; a uniformly random policy when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Log the most likely action of a soft policy instead of a sample.
    #[arg(long)]
    pub greedy: bool,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Output directory for dataset.csv, the crisp files and manifest.json.
    #[arg(long, default_value = "runs/fit-dt")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct FitDtPlan {
    env: EnvConfig,
    model: Option<PathBuf>,
    selection: ActionSelection,
    samples: usize,
    max_depth: usize,
    seed: u64,
    max_steps: usize,
}

pub fn fit_dt(cfg: &ToolConfig, a: FitDtArgs) -> anyhow::Result<()> {
    let env_cfg = a.env.resolve()?;
    let plan = FitDtPlan {
        max_steps: match a.max_steps {
            Some(m) => m,
            None => cfg.train_config(env_cfg.name())?.max_steps,
        },
        env: env_cfg,
        model: a.model.clone(),
        selection: if a.greedy {
            ActionSelection::Greedy
        } else {
            ActionSelection::Sample
        },
        samples: a.samples.unwrap_or(cfg.cart.samples),
        max_depth: a.max_depth.unwrap_or(cfg.cart.max_depth),
        seed: a.seed,
    };
    if plan.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let mut rec = RunRecorder::start("fit-dt", plan.seed, &plan);
    let mut env = plan.env.build()?;
    let data = match &plan.model {
        Some(path) => LoadedPolicy::read(path)?.with_actor(plan.selection, |actor| {
            collect_dataset(actor, env.as_mut(), plan.samples, plan.max_steps, plan.seed)
        })?,
        None => {
            let actor = RandomActor {
                n_actions: env.n_actions(),
            };
            collect_dataset(&actor, env.as_mut(), plan.samples, plan.max_steps, plan.seed)?
        }
    };
    let policy = cart_fit(&data, env.n_actions(), plan.max_depth)?;
    let accuracy = training_accuracy(&policy, &data);

    let data_path = a.out.join("dataset.csv");
    std::fs::create_dir_all(&a.out)?;
    data.write_csv(&data_path)?;
    rec.output("dataset", &data_path);
    let names = NameTable::new(env.feature_names(), env.action_names());
    for p in write_crisp(&policy, &names, &a.out)? {
        let key = p.extension().and_then(|s| s.to_str()).unwrap_or("crisp").to_string();
        rec.output(&format!("crisp_{key}"), &p);
    }
    let manifest_path = a.out.join("manifest.json");
    rec.output("manifest", &manifest_path);
    let metrics = json!({
        "samples": data.len(),
        "training_accuracy": accuracy,
        "leaves": policy.root.leaf_count(),
        "depth": policy.root.depth(),
    });
    rec.finish(RunStatus::Ok, None, metrics.clone()).write(&manifest_path)?;
    println!("{metrics}");
    Ok(())
}
