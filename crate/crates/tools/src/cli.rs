// SPDX-License-Identifier: Apache-2.0

//! The `ccs` command line.
//!
//! Every command first prints the resolved configuration as one JSON line on
//! stderr, so a run can be repeated from its log. Results go to stdout, or
//! to `--out` where a command writes a file.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use ccs_core::baselines::{calibrate_threshold, calibrated_predict, zero_shot_dataset};
use ccs_core::ccs::predict;
use ccs_core::dataset::{balance_and_subsample, normalize_self, split, ContrastDataset};
use ccs_core::eval::{
    accuracy_with_sign, evaluate, fit, sample_complexity_sweep, transfer_eval_split,
    wald_bound, AccuracyRecord, EvalReport, FittedModel, Method, NormMode,
};
use ccs_core::synthetic::{generate, generate_pair_family};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::exec::ParallelExecutor;
use crate::formats::{load_model, read_json, save_model, write_json};
use crate::report::{records_from_json, render_report, sweep_csv, transfer_csv, ReportFormat};
use crate::store::{load_dataset, save_dataset};
use crate::{ToolError, ToolResult};

#[derive(Debug, Parser)]
#[command(name = "ccs", version, about = "Contrast-consistent search on activation datasets")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for restarts, transfer cells and sweep trials.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory (or a family of them).
    Synth(SynthArgs),
    /// Normalize each side of a dataset with its own statistics.
    Normalize(NormalizeArgs),
    /// Write `train/` and `test/` subdirectories.
    Split(SplitArgs),
    /// Balance the classes and subsample.
    Balance(BalanceArgs),
    /// Train a probe or direction and write it to a JSON file.
    Train(TrainArgs),
    /// Apply a trained model to a dataset.
    Eval(EvalArgs),
    /// Zero-shot and calibrated zero-shot accuracy from the label logits.
    Baseline(BaselineArgs),
    /// Train on each dataset, test on every dataset.
    Transfer(TransferArgs),
    /// Accuracy as a function of the number of training pairs.
    Sweep(SweepArgs),
    /// Merge accuracy records into a report.
    Report(ReportArgs),
    /// Coarse standard-error bound and Wald statistic.
    Wald(WaldArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub sep: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub label_offset: Option<f64>,
    #[arg(long)]
    pub truth_seed: Option<u64>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Number of datasets; more than one writes `DIR/synthetic-K` subdirectories.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Give each dataset of the family its own truth direction.
    #[arg(long)]
    pub independent: bool,
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Remove the means only.
    #[arg(long)]
    pub center_only: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub max_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainOverrides {
    /// Seed of the restart streams.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Statistics for raw evaluation sets: probe-carried or per-dataset.
    #[arg(long, value_parser = parse_norm_mode)]
    pub norm_mode: Option<NormMode>,
    #[arg(long)]
    pub center_only: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_method, default_value = "ccs")]
    pub method: Method,
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Train on the training part of the configured split only.
    #[arg(long)]
    pub split: bool,
    #[command(flatten)]
    pub train: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub probe: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Report sign-resolved accuracy against the dataset labels.
    #[arg(long)]
    pub labels: bool,
    /// Evaluate on the test part of the configured split only.
    #[arg(long)]
    pub split: bool,
    #[arg(long, value_parser = parse_norm_mode)]
    pub norm_mode: Option<NormMode>,
    /// Also write an accuracy record for `ccs report`.
    #[arg(long, value_name = "FILE", requires = "labels")]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Write the accuracy records for `ccs report`.
    #[arg(long, value_name = "FILE")]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long, value_parser = parse_method, default_value = "ccs")]
    pub method: Method,
    #[arg(long, value_name = "DIR", num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: ReportFormat,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_method, default_value = "ccs")]
    pub method: Method,
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Comma-separated training sizes.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Seed of the subsampling streams.
    #[arg(long)]
    pub sample_seed: Option<u64>,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    pub format: ReportFormat,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Record files, record arrays or earlier reports.
    #[arg(long, value_name = "FILE", num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value = "table", value_parser = parse_format)]
    pub format: ReportFormat,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WaldArgs {
    #[arg(long)]
    pub mu0: f64,
    #[arg(long)]
    pub mu_hat: f64,
    #[arg(long)]
    pub n: usize,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|_| format!("expected one of ccs, tpc, bss, lr; got {s:?}"))
}

fn parse_norm_mode(s: &str) -> Result<NormMode, String> {
    match s {
        "probe-carried" => Ok(NormMode::ProbeCarried),
        "per-dataset" => Ok(NormMode::PerDataset),
        _ => Err(format!("expected probe-carried or per-dataset; got {s:?}")),
    }
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn required<T: Clone>(flag: Option<T>, fallback: Option<&T>, name: &str) -> ToolResult<T> {
    flag.or_else(|| fallback.cloned())
        .ok_or_else(|| ToolError::Usage(format!("missing required --{name}")))
}

fn data_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> ToolResult<PathBuf> {
    required(flag, cfg.paths.data.first(), "data")
}

fn apply_train(cfg: &mut RunConfig, method: Method, t: &TrainOverrides) {
    let m = &mut cfg.methods;
    if let Some(seed) = t.seed {
        m.ccs.seed = seed;
        m.bss.seed = seed;
    }
    match method {
        Method::Bss => {
            if let Some(r) = t.restarts {
                m.bss.restarts = r;
            }
            if let Some(e) = t.epochs {
                m.bss.epochs = e;
            }
            if let Some(lr) = t.lr {
                m.bss.learning_rate = lr;
            }
        }
        _ => {
            if let Some(r) = t.restarts {
                m.ccs.restarts = r;
            }
            if let Some(e) = t.epochs {
                m.ccs.epochs = e;
            }
            if let Some(lr) = t.lr {
                m.ccs.learning_rate = lr;
            }
        }
    }
    if let Some(wd) = t.weight_decay {
        m.ccs.weight_decay = wd;
    }
    if let Some(mode) = t.norm_mode {
        m.norm_mode = mode;
    }
    if t.center_only {
        m.norm.scale_variance = false;
    }
}

fn fold_paths(cfg: &mut RunConfig, data: &[PathBuf], out: Option<&PathBuf>, probe: Option<&PathBuf>) {
    if !data.is_empty() {
        cfg.paths.data = data.to_vec();
    }
    if let Some(o) = out {
        cfg.paths.out = Some(o.clone());
    }
    if let Some(p) = probe {
        cfg.paths.probe = Some(p.clone());
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn emit(out: &mut dyn Write, text: &str) -> ToolResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| ToolError::io("<stdout>", e))
}

fn emit_json(out: &mut dyn Write, v: &Value) -> ToolResult<()> {
    emit(out, &format!("{v}\n"))
}

fn write_text(path: &Path, text: &str) -> ToolResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| ToolError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| ToolError::io(path, e))
}

fn executor(jobs: usize) -> ToolResult<ParallelExecutor> {
    ParallelExecutor::new(jobs).map_err(|e| ToolError::Usage(format!("--jobs {jobs}: {e}")))
}

fn record_for(ds: &ContrastDataset, method: &str, acc: f64, sign: ccs_core::Sign) -> AccuracyRecord {
    AccuracyRecord {
        dataset: ds.meta.dataset_id.clone(),
        prompt: ds.meta.prompt_id.clone(),
        variant: ds.meta.variant.clone(),
        method: method.to_string(),
        accuracy: acc,
        sign,
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> ToolResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.jobs, cli.jobs);

    // Fold the flags into the configuration before echoing it.
    let name = match &cli.command {
        Command::Synth(a) => {
            let s = &mut cfg.synth;
            set(&mut s.n, a.n);
            set(&mut s.d, a.d);
            set(&mut s.sep, a.sep);
            set(&mut s.noise, a.noise);
            set(&mut s.label_offset, a.label_offset);
            set(&mut s.truth_dir_seed, a.truth_seed);
            set(&mut s.data_seed, a.data_seed);
            fold_paths(&mut cfg, &[], a.out.as_ref(), None);
            "synth"
        }
        Command::Normalize(a) => {
            if a.center_only {
                cfg.methods.norm.scale_variance = false;
            }
            fold_paths(&mut cfg, a.data.as_slice(), a.out.as_ref(), None);
            "normalize"
        }
        Command::Split(a) => {
            set(&mut cfg.split.train_fraction, a.train_fraction);
            set(&mut cfg.split.seed, a.seed);
            fold_paths(&mut cfg, a.data.as_slice(), a.out.as_ref(), None);
            "split"
        }
        Command::Balance(a) => {
            fold_paths(&mut cfg, a.data.as_slice(), a.out.as_ref(), None);
            "balance"
        }
        Command::Train(a) => {
            apply_train(&mut cfg, a.method, &a.train);
            fold_paths(&mut cfg, a.data.as_slice(), a.out.as_ref(), None);
            "train"
        }
        Command::Eval(a) => {
            set(&mut cfg.methods.norm_mode, a.norm_mode);
            fold_paths(&mut cfg, a.data.as_slice(), None, a.probe.as_ref());
            "eval"
        }
        Command::Baseline(a) => {
            fold_paths(&mut cfg, a.data.as_slice(), None, None);
            "baseline"
        }
        Command::Transfer(a) => {
            apply_train(&mut cfg, a.method, &a.train);
            fold_paths(&mut cfg, &a.data, a.out.as_ref(), None);
            "transfer"
        }
        Command::Sweep(a) => {
            apply_train(&mut cfg, a.method, &a.train);
            if !a.k.is_empty() {
                cfg.sweep.k = a.k.clone();
            }
            set(&mut cfg.sweep.trials, a.trials);
            set(&mut cfg.sweep.seed, a.sample_seed);
            fold_paths(&mut cfg, a.data.as_slice(), a.out.as_ref(), None);
            "sweep"
        }
        Command::Report(_) => "report",
        Command::Wald(_) => "wald",
    };
    cfg.validate()?;
    let echo = json!({"command": name, "config": &cfg});
    writeln!(err, "{echo}").map_err(|e| ToolError::io("<stderr>", e))?;

    match cli.command {
        Command::Synth(a) => cmd_synth(&a, &cfg, out),
        Command::Normalize(a) => {
            let data = data_dir(a.data, &cfg)?;
            let dest = required(a.out, cfg.paths.out.as_ref(), "out")?;
            let ds = load_dataset(&data)?;
            if ds.is_normalized() {
                return Err(ToolError::format(&data, "dataset is already normalized"));
            }
            save_dataset(&normalize_self(&ds, cfg.methods.norm)?, &dest)?;
            emit_json(out, &json!({"normalized": dest, "n": ds.n(), "d": ds.d()}))
        }
        Command::Split(a) => {
            let data = data_dir(a.data, &cfg)?;
            let dest = required(a.out, cfg.paths.out.as_ref(), "out")?;
            let (train, test) = split(&load_dataset(&data)?, &cfg.split)?;
            save_dataset(&train, dest.join("train"))?;
            save_dataset(&test, dest.join("test"))?;
            emit_json(out, &json!({"train": train.n(), "test": test.n()}))
        }
        Command::Balance(a) => {
            let data = data_dir(a.data, &cfg)?;
            let dest = required(a.out, cfg.paths.out.as_ref(), "out")?;
            let ds = balance_and_subsample(&load_dataset(&data)?, a.max_n, a.seed)?;
            save_dataset(&ds, &dest)?;
            emit_json(out, &json!({"n": ds.n()}))
        }
        Command::Train(a) => cmd_train(&a, &cfg, out),
        Command::Eval(a) => cmd_eval(&a, &cfg, out),
        Command::Baseline(a) => cmd_baseline(&a, &cfg, out),
        Command::Transfer(a) => cmd_transfer(&a, &cfg, out),
        Command::Sweep(a) => cmd_sweep(&a, &cfg, out),
        Command::Report(a) => cmd_report(&a, out),
        Command::Wald(a) => {
            let r = wald_bound(a.mu0, a.mu_hat, a.n)?;
            emit_json(out, &serde_json::to_value(r).expect("finite report"))
        }
    }
}

fn cmd_synth(a: &SynthArgs, cfg: &RunConfig, out: &mut dyn Write) -> ToolResult<()> {
    let dest = required(None, cfg.paths.out.as_ref(), "out")?;
    if a.count == 0 {
        return Err(ToolError::Usage("--count must be >= 1".into()));
    }
    if a.count == 1 && !a.independent {
        let ds = generate(&cfg.synth)?;
        save_dataset(&ds, &dest)?;
        return emit_json(out, &json!({"dataset": dest, "n": ds.n(), "d": ds.d()}));
    }
    let family = generate_pair_family(&cfg.synth, !a.independent, a.count)?;
    let mut dirs = Vec::with_capacity(family.len());
    for ds in &family {
        let dir = dest.join(&ds.meta.dataset_id);
        save_dataset(ds, &dir)?;
        dirs.push(dir);
    }
    emit_json(out, &json!({"datasets": dirs}))
}

fn cmd_train(a: &TrainArgs, cfg: &RunConfig, out: &mut dyn Write) -> ToolResult<()> {
    let data = data_dir(a.data.clone(), cfg)?;
    let dest = required(a.out.clone(), cfg.paths.out.as_ref(), "out")?;
    let mut ds = load_dataset(&data)?;
    if a.split {
        ds = split(&ds, &cfg.split)?.0;
    }
    let exec = executor(cfg.jobs)?;
    let model = fit(a.method, &ds, &cfg.methods, &exec)?;
    save_model(&model, &dest)?;
    log::info!("wrote {}", dest.display());
    emit_json(
        out,
        &json!({"method": a.method, "n": ds.n(), "loss": model.loss(), "out": dest}),
    )
}

fn cmd_eval(a: &EvalArgs, cfg: &RunConfig, out: &mut dyn Write) -> ToolResult<()> {
    let probe = required(a.probe.clone(), cfg.paths.probe.as_ref(), "probe")?;
    let data = data_dir(a.data.clone(), cfg)?;
    let model = load_model(&probe)?;
    let mut ds = load_dataset(&data)?;
    if a.split {
        ds = split(&ds, &cfg.split)?.1;
    }
    let mode = cfg.methods.norm_mode;
    let opts = cfg.methods.norm;
    let hard = model.predict_labels(&ds, mode, opts)?;
    let frac_true = hard.iter().filter(|&&l| l == 1).count() as f64 / hard.len() as f64;
    let mut summary = json!({
        "method": model.method(),
        "dataset": ds.meta.dataset_id,
        "prompt": ds.meta.prompt_id,
        "n": ds.n(),
        "fraction_true": frac_true,
    });
    if let FittedModel::Ccs { probe, .. } = &model {
        let prepared = model.prepare(&ds, mode, opts)?;
        let p = predict(probe, &prepared)?;
        let n = p.p_tilde.len() as f64;
        let mean = p.p_tilde.iter().sum::<f64>() / n;
        let confident = p.p_tilde.iter().filter(|&&x| (x - 0.5).abs() > 0.4).count() as f64 / n;
        summary["p_tilde_mean"] = json!(mean);
        summary["p_tilde_confident"] = json!(confident);
        summary["probe_loss"] = json!(p.probe_loss);
    }
    if a.labels {
        let (acc, sign) = evaluate(&model, &ds, mode, opts)?;
        summary["accuracy"] = json!(acc);
        summary["sign"] = json!(sign);
        if let Some(path) = &a.record {
            let rec = record_for(&ds, model.method().as_str(), acc, sign);
            write_json(path, &rec)?;
        }
    }
    emit_json(out, &summary)
}

fn cmd_baseline(a: &BaselineArgs, cfg: &RunConfig, out: &mut dyn Write) -> ToolResult<()> {
    let data = data_dir(a.data.clone(), cfg)?;
    let ds = load_dataset(&data)?;
    let labels = ds.require_labels()?;
    let zs = zero_shot_dataset(&ds)?;
    let (zs_acc, _) = accuracy_with_sign(&zs, labels)?;
    let zs_raw = ccs_core::eval::raw_accuracy(&zs, labels)?;

    let (train, test) = split(&ds, &cfg.split)?;
    let (tp, tn) = train.logits().ok_or(ccs_core::Error::MissingLogits)?;
    let cal = calibrate_threshold(tp, tn)?;
    let (ep, en) = test.logits().ok_or(ccs_core::Error::MissingLogits)?;
    let cal_pred = calibrated_predict(&cal, ep, en)?;
    let cal_acc = ccs_core::eval::raw_accuracy(&cal_pred, test.require_labels()?)?;

    let records = vec![
        record_for(&ds, "zero-shot", zs_raw, ccs_core::Sign::Positive),
        record_for(&test, "calibrated", cal_acc, ccs_core::Sign::Positive),
    ];
    if let Some(path) = &a.record {
        write_json(path, &records)?;
    }
    emit_json(
        out,
        &json!({
            "dataset": ds.meta.dataset_id,
            "zero_shot": zs_raw,
            "zero_shot_sign_resolved": zs_acc,
            "calibrated": cal_acc,
            "gamma": cal.gamma,
        }),
    )
}

fn cmd_transfer(a: &TransferArgs, cfg: &RunConfig, out: &mut dyn Write) -> ToolResult<()> {
    let dirs = if a.data.is_empty() { cfg.paths.data.clone() } else { a.data.clone() };
    if dirs.is_empty() {
        return Err(ToolError::Usage("missing required --data".into()));
    }
    let datasets = dirs.iter().map(load_dataset).collect::<ToolResult<Vec<_>>>()?;
    let exec = executor(cfg.jobs)?;
    let m = transfer_eval_split(&datasets, &cfg.split, a.method, &cfg.methods, &exec)?;
    let text = match a.format {
        ReportFormat::Csv | ReportFormat::Table => transfer_csv(&m),
        ReportFormat::Json => format!("{}\n", serde_json::to_string_pretty(&m).expect("serializable")),
    };
    match &a.out {
        Some(path) => write_text(path, &text),
        None => emit(out, &text),
    }
}

fn cmd_sweep(a: &SweepArgs, cfg: &RunConfig, out: &mut dyn Write) -> ToolResult<()> {
    let data = data_dir(a.data.clone(), cfg)?;
    let ds = load_dataset(&data)?;
    let exec = executor(cfg.jobs)?;
    let curve = sample_complexity_sweep(
        &ds,
        a.method,
        &cfg.sweep.k,
        cfg.sweep.trials,
        &cfg.split,
        cfg.sweep.seed,
        &cfg.methods,
        &exec,
    )?;
    let text = match a.format {
        ReportFormat::Csv | ReportFormat::Table => sweep_csv(&curve),
        ReportFormat::Json => format!("{}\n", serde_json::to_string_pretty(&curve).expect("serializable")),
    };
    match &a.out {
        Some(path) => write_text(path, &text),
        None => emit(out, &text),
    }
}

fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> ToolResult<()> {
    let mut records = Vec::new();
    for path in &a.input {
        let v: Value = read_json(path)?;
        records.extend(records_from_json(path, v)?);
    }
    let text = render_report(&EvalReport::from_records(records), a.format);
    match &a.out {
        Some(path) => write_text(path, &text),
        None => emit(out, &text),
    }
}

/// Default logging for the binary: warnings, or `RUST_LOG` when set.
pub fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
}
