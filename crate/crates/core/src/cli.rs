//! Command-line front end.
//!
//! `mmvfl run --mode <mode>` reads a JSON config (optional) and applies flag
//! overrides on top. Every run writes `manifest.json` with the fully resolved
//! config; passing that manifest back as `--config` repeats the run.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 1 for runtime
//! failures (including an audit that finds violations).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::baselines::{supfl_solve, supmvlfl_solve};
use crate::data::{self, make_folds, synth_planted, MultiViewDataset, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::{self, grid_search, Method, TableRow};
use crate::featsel::{score_features, P_GRID};
use crate::federation::message::format_f64;
use crate::federation::{
    audit_trace, run_federated, FederationConfig, MessageTrace, PrivacyReport, TransportKind,
};
use crate::numerics::{Matrix, Seed};
use crate::optimizer::{run_reference, Hyperparams};

/// Version string recorded in manifests.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

pub const BETA_GRID: [f64; 7] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Reference,
    FederatedInproc,
    FederatedTcp,
    Supfl,
    Supmvlfl,
    Sweep,
    Synth,
    Audit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub views: Vec<PathBuf>,
    pub labels: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    /// Sparsity weight for single runs.
    pub beta: f64,
    pub beta_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub zeta: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub outer_tol: f64,
    pub outer_max: usize,
    pub transport_port: u16,
    pub round_timeout_secs: f64,
    pub folds: usize,
    pub methods: Vec<Method>,
    /// Name used for curve files and the difference table.
    pub dataset: String,
    /// Message trace to check in audit mode.
    pub trace: Option<PathBuf>,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: None,
            views: Vec::new(),
            labels: None,
            seed: 0,
            out: PathBuf::from("out"),
            beta: 0.1,
            beta_grid: BETA_GRID.to_vec(),
            p_grid: P_GRID.to_vec(),
            zeta: 1000.0,
            eta: 1000.0,
            epsilon: Hyperparams::DEFAULT_EPSILON,
            inner_tol: Hyperparams::DEFAULT_INNER_TOL,
            inner_max: Hyperparams::DEFAULT_INNER_MAX,
            outer_tol: Hyperparams::DEFAULT_OUTER_TOL,
            outer_max: Hyperparams::DEFAULT_OUTER_MAX,
            transport_port: 0,
            round_timeout_secs: 60.0,
            folds: 5,
            methods: Method::ALL.to_vec(),
            dataset: "dataset".into(),
            trace: None,
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
}

impl RunConfig {
    /// Reads a config file or a manifest written by an earlier run. Relative
    /// paths are taken relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let parsed = if value.get("config").is_some() && value.get("version").is_some() {
            serde_json::from_value::<Manifest>(value).map(|m| m.config)
        } else {
            serde_json::from_value::<RunConfig>(value)
        };
        let mut cfg = parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.views.iter_mut().for_each(fix);
        self.labels.iter_mut().for_each(fix);
        self.trace.iter_mut().for_each(fix);
        fix(&mut self.out);
    }

    fn absolutize(&mut self) -> Result<()> {
        let abs = |p: &mut PathBuf| -> Result<()> {
            *p = std::path::absolute(&*p)?;
            Ok(())
        };
        self.views.iter_mut().try_for_each(abs)?;
        self.labels.iter_mut().try_for_each(abs)?;
        self.trace.iter_mut().try_for_each(abs)?;
        abs(&mut self.out)
    }

    pub fn hyperparams(&self, k: usize) -> Hyperparams {
        Hyperparams {
            beta: vec![self.beta; k],
            zeta: vec![self.zeta; k],
            eta: self.eta,
            epsilon: self.epsilon,
            inner_tol: self.inner_tol,
            inner_max: self.inner_max,
            outer_tol: self.outer_tol,
            outer_max: self.outer_max,
        }
    }

    /// Checks that the fields the mode needs are present and sane.
    pub fn validate(&self) -> Result<Mode> {
        let mode = self
            .mode
            .ok_or_else(|| Error::Config("no mode given (use --mode or \"mode\")".into()))?;
        let needs_data = !matches!(mode, Mode::Synth | Mode::Audit);
        if needs_data {
            if self.views.is_empty() {
                return Err(Error::Config(format!("mode {mode:?} needs --views")));
            }
            if self.labels.is_none() {
                return Err(Error::Config(format!("mode {mode:?} needs --labels")));
            }
            let multi = matches!(
                mode,
                Mode::Reference | Mode::FederatedInproc | Mode::FederatedTcp
            );
            let sweeps_mmvfl = mode == Mode::Sweep && self.methods.contains(&Method::Mmvfl);
            if (multi || sweeps_mmvfl) && self.views.len() < 2 {
                return Err(Error::Config(
                    "federated training needs at least 2 views".into(),
                ));
            }
            self.hyperparams(self.views.len())
                .validate(self.views.len())
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        if mode == Mode::Audit && self.trace.is_none() {
            return Err(Error::Config("audit mode needs --trace".into()));
        }
        if mode == Mode::Sweep {
            if self.beta_grid.is_empty() || self.p_grid.is_empty() || self.methods.is_empty() {
                return Err(Error::Config(
                    "sweep needs non-empty grids and methods".into(),
                ));
            }
            if let Some(b) = self
                .beta_grid
                .iter()
                .find(|&&b| !(b > 0.0 && b.is_finite()))
            {
                return Err(Error::Config(format!(
                    "beta grid value {b} is not positive"
                )));
            }
            if let Some(p) = self.p_grid.iter().find(|&&p| !(p > 0.0 && p <= 100.0)) {
                return Err(Error::Config(format!(
                    "p grid value {p} is outside (0, 100]"
                )));
            }
            if self.folds < 2 {
                return Err(Error::Config("need at least 2 folds".into()));
            }
        }
        if !(self.round_timeout_secs > 0.0 && self.round_timeout_secs.is_finite()) {
            return Err(Error::Config("round timeout must be positive".into()));
        }
        Ok(mode)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mmvfl",
    version,
    about = "Vertical federated multi-view feature selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train, sweep, generate data or audit a trace.
    Run(Box<RunArgs>),
    /// Turn a results CSV into per-participant accuracy-vs-p files.
    Curves(CurvesArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// JSON config or manifest; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated view CSV paths; the first view owns the labels.
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<PathBuf>>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    transport_port: Option<u16>,
    /// Message trace to audit.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Dataset name for sweep outputs.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long, default_value = "dataset")]
    dataset: String,
    #[arg(long, default_value = "curves")]
    out: PathBuf,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { cfg.$field = v; }
            )*};
        }
        set!(
            seed,
            out,
            views,
            beta,
            beta_grid,
            p_grid,
            zeta,
            eta,
            transport_port,
            dataset
        );
        if self.mode.is_some() {
            cfg.mode = self.mode;
        }
        if self.labels.is_some() {
            cfg.labels = self.labels;
        }
        if self.trace.is_some() {
            cfg.trace = self.trace;
        }
        if let Some(ms) = self.methods {
            cfg.methods = ms
                .iter()
                .map(|m| m.parse().map_err(|e: Error| Error::Config(e.to_string())))
                .collect::<Result<_>>()?;
        }
        cfg.absolutize()?;
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => args.into_config().and_then(|cfg| execute(&cfg)),
        Command::Curves(args) => curves(&args),
    };
    match result {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::Violations(n)) => {
            eprintln!("audit found {n} violation(s)");
            1
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Audit mode found this many violations.
    Violations(usize),
}

fn curves(args: &CurvesArgs) -> Result<Outcome> {
    let runs = eval::read_results_csv(&args.results)?;
    let (files, _) = eval::emit_curves(&runs, &args.dataset, &args.out)?;
    println!(
        "wrote {} curve file(s) to {}",
        files.len(),
        args.out.display()
    );
    Ok(Outcome::Success)
}

/// Runs a validated config and writes its outputs.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let mode = cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;
    write_manifest(cfg)?;
    let seed = Seed(cfg.seed);
    let outcome = match mode {
        Mode::Reference => {
            let ds = load(cfg)?;
            let run = run_reference(
                &ds.views,
                &ds.label_matrix()?,
                &cfg.hyperparams(ds.num_views()),
                seed,
            )?;
            let weights: Vec<&Matrix> = run.weights();
            write_training_outputs(&cfg.out, &weights, &run.z, &run.objective_trace)?;
            Outcome::Success
        }
        Mode::FederatedInproc | Mode::FederatedTcp => {
            let ds = load(cfg)?;
            let transport = if mode == Mode::FederatedTcp {
                TransportKind::Tcp {
                    port: cfg.transport_port,
                }
            } else {
                TransportKind::InProcess
            };
            let mut fed = FederationConfig::new(cfg.hyperparams(ds.num_views()), seed, transport);
            fed.round_timeout = Duration::from_secs_f64(cfg.round_timeout_secs);
            let run = run_federated(&ds.views, &ds.label_matrix()?, &fed)?;
            let c = &run.coordinator;
            write_training_outputs(&cfg.out, &run.weights(), &c.z, &c.objective_trace)?;
            c.trace.write_jsonl(&cfg.out.join("messages.jsonl"))?;
            let report = audit_trace(&c.trace);
            write_json(&cfg.out.join("privacy_report.json"), &report)?;
            if report.is_clean() {
                Outcome::Success
            } else {
                Outcome::Violations(report.violations.len())
            }
        }
        Mode::Supfl => {
            let ds = load(cfg)?;
            let y = ds.label_matrix()?;
            let mut weights = Vec::new();
            let mut rows = Vec::new();
            for (k, x) in ds.views.iter().enumerate() {
                let fit = supfl_solve(x, &y, cfg.beta, cfg.epsilon, cfg.inner_tol, cfg.inner_max)?;
                rows.extend(
                    fit.objective_trace
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| (k + 1, i, v)),
                );
                weights.push(fit.w);
            }
            write_weights(&cfg.out, &weights.iter().collect::<Vec<_>>())?;
            write_baseline_trace(&cfg.out.join("objective_trace.csv"), &rows)?;
            Outcome::Success
        }
        Mode::Supmvlfl => {
            let ds = load(cfg)?;
            let betas = vec![cfg.beta; ds.num_views()];
            let fit = supmvlfl_solve(
                &ds.views,
                &ds.label_matrix()?,
                &betas,
                cfg.epsilon,
                cfg.inner_tol,
                cfg.inner_max,
            )?;
            write_weights(&cfg.out, &fit.w.iter().collect::<Vec<_>>())?;
            write_trace(
                &cfg.out.join("objective_trace.csv"),
                &fit.objective_trace,
                0,
            )?;
            Outcome::Success
        }
        Mode::Sweep => {
            sweep(cfg, &load(cfg)?, seed)?;
            Outcome::Success
        }
        Mode::Synth => {
            let planted = synth_planted(&cfg.synth, seed)?;
            data::write_dataset(&cfg.out, &planted.dataset)?;
            let informative: Vec<Vec<usize>> = planted.informative.clone();
            write_json(&cfg.out.join("informative.json"), &informative)?;
            Outcome::Success
        }
        Mode::Audit => {
            let path = cfg.trace.as_ref().expect("validated");
            let trace = MessageTrace::read_jsonl(path)?;
            let report: PrivacyReport = audit_trace(&trace);
            write_json(&cfg.out.join("privacy_report.json"), &report)?;
            if report.is_clean() {
                Outcome::Success
            } else {
                Outcome::Violations(report.violations.len())
            }
        }
    };
    println!("{:?} run finished; outputs in {}", mode, cfg.out.display());
    Ok(outcome)
}

fn load(cfg: &RunConfig) -> Result<MultiViewDataset> {
    data::load_csv(&cfg.views, cfg.labels.as_ref().expect("validated"))
}

fn write_manifest(cfg: &RunConfig) -> Result<()> {
    let manifest = Manifest {
        version: VERSION.to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
    };
    write_json(&cfg.out.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_weights(dir: &Path, weights: &[&Matrix]) -> Result<()> {
    for (k, w) in weights.iter().enumerate() {
        data::write_matrix_csv(&dir.join(format!("w_{}.csv", k + 1)), w)?;
    }
    let mut out = BufWriter::new(File::create(dir.join("feature_scores.csv"))?);
    writeln!(out, "participant,feature,score,rank")?;
    for (k, w) in weights.iter().enumerate() {
        let ranking = score_features(w);
        let mut rank = vec![0; ranking.len()];
        for (r, &f) in ranking.order.iter().enumerate() {
            rank[f] = r + 1;
        }
        for (f, s) in ranking.scores.iter().enumerate() {
            writeln!(out, "{},{},{},{}", k + 1, f + 1, format_f64(*s), rank[f])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_trace(path: &Path, values: &[f64], first: usize) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "round,objective")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{},{}", i + first, format_f64(*v))?;
    }
    out.flush()?;
    Ok(())
}

fn write_baseline_trace(path: &Path, rows: &[(usize, usize, f64)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "participant,iteration,objective")?;
    for (k, i, v) in rows {
        writeln!(out, "{k},{i},{}", format_f64(*v))?;
    }
    out.flush()?;
    Ok(())
}

fn write_training_outputs(
    dir: &Path,
    weights: &[&Matrix],
    z: &Matrix,
    trace: &[f64],
) -> Result<()> {
    write_weights(dir, weights)?;
    data::write_matrix_csv(&dir.join("z.csv"), z)?;
    write_trace(&dir.join("objective_trace.csv"), trace, 1)
}

fn sweep(cfg: &RunConfig, ds: &MultiViewDataset, seed: Seed) -> Result<()> {
    let folds = make_folds(&ds.labels, ds.num_classes, cfg.folds, seed)?;
    let hyper = cfg.hyperparams(ds.num_views());
    let mut runs = Vec::new();
    let mut curves = Vec::new();
    for &method in &cfg.methods {
        let g = grid_search(
            method,
            ds,
            &folds,
            &cfg.beta_grid,
            &cfg.p_grid,
            &hyper,
            seed,
        )?;
        log::info!("{method}: mean accuracy {:.4}", g.curves().mean());
        curves.push(g.curves());
        runs.extend(g.runs);
    }
    eval::write_results_csv(&cfg.out.join("results.csv"), &runs)?;
    eval::emit_curves(&runs, &cfg.dataset, &cfg.out.join("curves"))?;

    let mmvfl = curves.iter().find(|c| c.method == Method::Mmvfl);
    let rows: Vec<TableRow> = match mmvfl {
        Some(a) => curves
            .iter()
            .filter(|c| c.method != Method::Mmvfl)
            .map(|b| {
                Ok(TableRow::new(
                    &cfg.dataset,
                    a.method,
                    b.method,
                    eval::diff_table(a, b)?,
                ))
            })
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    if !rows.is_empty() {
        std::fs::write(cfg.out.join("diff_table.csv"), eval::format_table(&rows))?;
    }
    Ok(())
}
