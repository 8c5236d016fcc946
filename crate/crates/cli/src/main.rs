//! `gsprt`: run composite sequential tests from a JSON config.
//!
//! Exit codes: 0 success, 1 domain or assumption failure, 2 usage or parse
//! failure. Errors are reported on stderr as a JSON object.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gsprt::expfam::{self, GaussianParams, GaussianStatistic};
use gsprt::gsprt::{first_order_thresholds, second_order_thresholds, GsprtState, Thresholds, TypeStatistic};
use gsprt::montecarlo::{self, McConfig};
use gsprt::{Distribution, Projector};
use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use serde::Serialize;
use serde_json::json;

use config::{HypothesisSpec, Model, RunConfig, ThresholdSpec};

#[derive(Parser)]
#[command(name = "gsprt", version, about = "Sequential tests of a simple null against a composite alternative")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// JSON config file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Write the JSON result here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long, value_name = "N")]
    trials: Option<u64>,
    /// Worker threads for simulations.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Write per-trial CSV here (mc only).
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the modelling assumptions.
    Validate(Common),
    /// Project a type onto the uncertainty set.
    Project(Common),
    /// Compute the test thresholds.
    Thresholds(Common),
    /// Run one test on a simulated stream.
    Run(Common),
    /// Estimate error probabilities and stopping-time tails.
    Mc(Common),
    /// Compare the normalized statistic with the standard normal.
    Clt(Common),
    /// Exceedance frequency of the uniform law of large numbers.
    Uwlln(Common),
}

enum Failure {
    Parse(String),
    Domain(gsprt::Error),
    Io(String),
    /// The command ran but its check did not pass; the payload is still emitted.
    Check,
}

impl From<gsprt::Error> for Failure {
    fn from(e: gsprt::Error) -> Self {
        Failure::Domain(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            report(&json!({"kind": "usage", "message": e.to_string().trim_end()}));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Parse(msg)) => {
            report(&json!({"kind": "parse", "message": msg}));
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            report(&json!({"kind": "io", "message": msg}));
            ExitCode::from(1)
        }
        Err(Failure::Domain(e)) => {
            report(&json!({"kind": error_kind(&e), "message": e.to_string()}));
            ExitCode::from(1)
        }
    }
}

fn error_kind(e: &gsprt::Error) -> &'static str {
    use gsprt::Error::*;
    match e {
        DimensionMismatch { .. } => "dimension_mismatch",
        InvalidDistribution(_) => "invalid_distribution",
        InfiniteDivergence { .. } => "infinite_divergence",
        SymbolOutOfRange { .. } => "symbol_out_of_range",
        OutOfRange(_) => "out_of_range",
        Infeasible(_) => "infeasible",
        Assumption(_) => "assumption",
        NonConvergence { .. } => "non_convergence",
        Unsupported(_) => "unsupported",
        AlreadyStopped(_) => "already_stopped",
    }
}

fn report(err: &serde_json::Value) {
    eprintln!("{}", json!({ "error": err }));
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Validate(c) => validate(&c),
        Command::Project(c) => project(&c),
        Command::Thresholds(c) => thresholds(&c),
        Command::Run(c) => run(&c),
        Command::Mc(c) => mc(&c),
        Command::Clt(c) => clt(&c),
        Command::Uwlln(c) => uwlln(&c),
    }
}

fn load(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&c.config).map_err(Failure::Parse)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("results serialize");
    text.push('\n');
    write_text(out, &text)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn output_path<'a>(flag: &'a Option<PathBuf>, fallback: &'a Option<PathBuf>) -> Option<&'a Path> {
    flag.as_deref().or(fallback.as_deref())
}

fn finite_parts(cfg: &RunConfig) -> Result<(Projector, Option<Distribution>), Failure> {
    match &cfg.model {
        Model::Finite { p0, gamma, q } => Ok((Projector::new(p0.clone(), gamma.clone())?, q.clone())),
        Model::Gaussian { .. } => Err(gsprt::Error::Unsupported("this command needs the finite model".into()).into()),
    }
}

fn horizon(cfg: &RunConfig) -> Result<u64, Failure> {
    cfg.n.ok_or_else(|| Failure::Parse("config needs \"n\"".into()))
}

fn threshold_spec(cfg: &RunConfig) -> Result<ThresholdSpec, Failure> {
    cfg.threshold.ok_or_else(|| Failure::Parse("config needs \"threshold\"".into()))
}

fn validate(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let out = output_path(&c.out, &cfg.output.summary);
    let ok = match &cfg.model {
        Model::Finite { p0, gamma, .. } => {
            let r = gamma.validate(p0)?;
            emit(out, &r)?;
            r.all_hold()
        }
        Model::Gaussian { gamma0, bx } => {
            let r = expfam::check_conditions(gamma0, bx)?;
            emit(out, &r)?;
            r.passes
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn project(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let (projector, q) = finite_parts(&cfg)?;
    let q = q.unwrap_or_else(|| projector.p0().clone());
    let r = projector.project(&q)?;
    emit(output_path(&c.out, &cfg.output.summary), &r)
}

#[derive(Serialize)]
#[serde(untagged)]
enum AnyThresholds {
    Finite(gsprt::gsprt::ThresholdReport),
    Gaussian(expfam::GaussianThresholds),
    Manual {
        n: Option<u64>,
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B")]
        b: f64,
    },
}

impl AnyThresholds {
    fn thresholds(&self) -> Thresholds {
        match self {
            AnyThresholds::Finite(r) => r.thresholds(),
            AnyThresholds::Gaussian(r) => r.thresholds(),
            AnyThresholds::Manual { a, b, .. } => Thresholds { a: *a, b: *b },
        }
    }
}

fn compute_thresholds(cfg: &RunConfig) -> Result<AnyThresholds, Failure> {
    let spec = threshold_spec(cfg)?;
    if let ThresholdSpec::Manual { a, b } = spec {
        Thresholds::new(a, b)?;
        return Ok(AnyThresholds::Manual { n: cfg.n, a, b });
    }
    let n = horizon(cfg)?;
    match (&cfg.model, spec) {
        (Model::Finite { .. }, ThresholdSpec::FirstOrder { eps0, eps1 }) => {
            let (p, _) = finite_parts(cfg)?;
            Ok(AnyThresholds::Finite(first_order_thresholds(&p, n, eps0, eps1)?))
        }
        (Model::Finite { .. }, ThresholdSpec::SecondOrder { eps, eta0, eta1 }) => {
            let (p, _) = finite_parts(cfg)?;
            Ok(AnyThresholds::Finite(second_order_thresholds(&p, n, eps, eta0, eta1)?))
        }
        (Model::Gaussian { gamma0, bx }, ThresholdSpec::FirstOrder { eps0, eps1 }) => Ok(AnyThresholds::Gaussian(
            expfam::gaussian_first_order_thresholds(gamma0, bx, n, eps0, eps1)?,
        )),
        (Model::Gaussian { .. }, _) => Err(gsprt::Error::Unsupported(
            "second-order thresholds need a finite alphabet".into(),
        )
        .into()),
        (_, ThresholdSpec::Manual { .. }) => unreachable!("handled above"),
    }
}

fn thresholds(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let t = compute_thresholds(&cfg)?;
    emit(output_path(&c.out, &cfg.output.summary), &t)
}

fn n_max_of(cfg: &RunConfig) -> Result<u64, Failure> {
    match (cfg.n_max, cfg.n) {
        (Some(m), _) => Ok(m),
        (None, Some(n)) => Ok(50 * n),
        (None, None) => Err(Failure::Parse("config needs \"n\" or \"n_max\"".into())),
    }
}

fn run(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let th = compute_thresholds(&cfg)?.thresholds();
    let n_max = n_max_of(&cfg)?;
    let mut rng = montecarlo::trial_rng(cfg.seed, 0, 0);
    let outcome = match &cfg.model {
        Model::Finite { .. } => {
            let (p, _) = finite_parts(&cfg)?;
            let source = match &cfg.hypothesis {
                None => p.p0().clone(),
                Some(HypothesisSpec::Named(s)) if s.eq_ignore_ascii_case("h0") => p.p0().clone(),
                Some(HypothesisSpec::Finite { gamma }) => gamma.clone(),
                Some(other) => return Err(Failure::Parse(format!("unsupported hypothesis {other:?}"))),
            };
            if source.dim() != p.dim() {
                return Err(gsprt::Error::DimensionMismatch { expected: p.dim(), got: source.dim() }.into());
            }
            let stream = std::iter::from_fn(|| Some(source.sample_with(rng.random::<f64>())));
            GsprtState::new(TypeStatistic::new(&p), th, n_max)?.run(stream, cfg.record_trajectory)?
        }
        Model::Gaussian { gamma0, bx } => {
            let source = match &cfg.hypothesis {
                None => *gamma0,
                Some(HypothesisSpec::Named(s)) if s.eq_ignore_ascii_case("h0") => *gamma0,
                Some(HypothesisSpec::Gaussian { gamma }) => *gamma,
                Some(other) => return Err(Failure::Parse(format!("unsupported hypothesis {other:?}"))),
            };
            let normal = Normal::new(source.mu(), source.sigma2().sqrt())
                .map_err(|e| gsprt::Error::OutOfRange(e.to_string()))?;
            let stream = std::iter::from_fn(|| Some(normal.sample(&mut rng)));
            GsprtState::new(GaussianStatistic::new(*gamma0, *bx)?, th, n_max)?.run(stream, cfg.record_trajectory)?
        }
    };
    emit(output_path(&c.out, &cfg.output.summary), &outcome)
}

fn mc_config(cfg: &RunConfig, c: &Common, default_trials: u64, section_trials: Option<u64>) -> Result<McConfig, Failure> {
    let trials = c.trials.or(section_trials).unwrap_or(default_trials);
    let workers = c.workers.or(cfg.mc.workers).unwrap_or(1);
    Ok(McConfig::new(trials, cfg.seed, workers)?)
}

fn mc(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let th = compute_thresholds(&cfg)?.thresholds();
    let n = horizon(&cfg)?;
    let n_max = n_max_of(&cfg)?;
    let mcc = mc_config(&cfg, c, 1000, cfg.mc.trials)?;
    let run = match &cfg.model {
        Model::Finite { .. } => {
            let (p, _) = finite_parts(&cfg)?;
            let mut panel = montecarlo::default_panel(&p)?;
            for v in &cfg.mc.panel {
                let g: Distribution = serde_json::from_value(v.clone()).map_err(|e| Failure::Parse(format!("panel: {e}")))?;
                panel.push(g);
            }
            montecarlo::estimate_errors(&mcc, &p, th, n, n_max, &panel)?
        }
        Model::Gaussian { gamma0, bx } => {
            let mut panel: Vec<GaussianParams> = Vec::new();
            for v in &cfg.mc.panel {
                panel.push(serde_json::from_value(v.clone()).map_err(|e| Failure::Parse(format!("panel: {e}")))?);
            }
            if panel.is_empty() {
                panel.push(GaussianParams::from_natural(bx.center())?);
            }
            montecarlo::estimate_errors_gaussian(&mcc, gamma0, bx, th, n, n_max, &panel)?
        }
    };
    if let Some(path) = output_path(&c.csv, &cfg.output.csv) {
        write_text(Some(path), &montecarlo::records_to_csv(&run.records))?;
    }
    let tails: Vec<_> = montecarlo::stopping_tail(&run)
        .into_iter()
        .map(|(label, e)| json!({"hypothesis": label, "tail": e}))
        .collect();
    emit(
        output_path(&c.out, &cfg.output.summary),
        &json!({"estimates": run.estimates, "stopping_tail": tails}),
    )
}

fn clt(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let (p, _) = finite_parts(&cfg)?;
    let n = cfg.clt.n.or(cfg.n).unwrap_or(2000);
    let mcc = mc_config(&cfg, c, 10_000, cfg.clt.trials)?;
    let r = montecarlo::clt_check(&p, n, &mcc)?;
    emit(output_path(&c.out, &cfg.output.summary), &r)
}

fn uwlln(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let (p, _) = finite_parts(&cfg)?;
    let n = cfg.clt.n.or(cfg.n).unwrap_or(100);
    let delta = cfg.clt.delta.unwrap_or(0.02);
    let mcc = mc_config(&cfg, c, 1000, cfg.clt.trials)?;
    let r = montecarlo::uwlln_check(&p, n, delta, &mcc)?;
    emit(output_path(&c.out, &cfg.output.summary), &r)
}
