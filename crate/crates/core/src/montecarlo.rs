//! Reproducible Monte Carlo harness.
//!
//! Every trial owns a ChaCha8 generator seeded from the run seed with the
//! stream set to `(hypothesis index << 40) | trial`, so results do not
//! depend on how trials are spread over workers. Records are always
//! returned in trial order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{GaussianParams, GaussianStatistic, ParamBox};
use crate::gsprt::{run_finite, Decision, GsprtState, TestOutcome, Thresholds};
use crate::projection::{Projector, WarmStart};
use crate::simplex::{gaussian_cdf, relative_entropy_variance, Distribution, EmpiricalType};

/// z-value of a two-sided 95% interval.
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    1
}

impl McConfig {
    pub fn new(trials: u64, seed: u64, workers: usize) -> Result<Self> {
        if trials == 0 {
            return Err(Error::OutOfRange("trials must be at least 1".into()));
        }
        if workers == 0 {
            return Err(Error::OutOfRange("workers must be at least 1".into()));
        }
        Ok(Self {
            trials,
            seed,
            workers,
        })
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.trials, self.seed, self.workers).map(|_| ())
    }
}

/// The generator for one trial.
pub fn trial_rng(seed: u64, hypothesis: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((hypothesis << 40) | trial);
    rng
}

/// Runs `f` for every trial index, in parallel when enabled, preserving order.
fn map_trials<T, F>(cfg: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if cfg.workers > 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
            return pool.install(|| (0..cfg.trials).into_par_iter().map(&f).collect());
        }
    }
    (0..cfg.trials).map(f).collect()
}

/// Wilson score interval at 95%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub successes: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn wilson(successes: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = if trials == 0 { 0.0 } else { successes as f64 / n };
        let (lo, hi) = if trials == 0 {
            (0.0, 1.0)
        } else {
            let z2 = Z95 * Z95;
            let denom = 1.0 + z2 / n;
            let center = (p + z2 / (2.0 * n)) / denom;
            let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
            ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
        };
        Self {
            estimate: p,
            lo,
            hi,
            successes,
            trials,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    /// A member of the alternative, identified by its panel index.
    H1 { gamma_id: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub hypothesis: Hypothesis,
    pub decision: Decision,
    pub tau: u64,
    #[serde(rename = "S_tau")]
    pub s_tau: f64,
}

pub const CSV_HEADER: &str = "trial_id,hypothesis,gamma_id,decision,tau,S_tau";

#[derive(Serialize)]
struct CsvRow<'a> {
    trial_id: u64,
    hypothesis: &'a str,
    gamma_id: Option<usize>,
    decision: Decision,
    tau: u64,
    #[serde(rename = "S_tau")]
    s_tau: f64,
}

/// One row per trial, columns as in [`CSV_HEADER`].
pub fn records_to_csv(records: &[TrialRecord]) -> String {
    if records.is_empty() {
        return format!("{CSV_HEADER}\n");
    }
    let mut w = csv::Writer::from_writer(Vec::with_capacity(32 * (records.len() + 1)));
    for r in records {
        let (hypothesis, gamma_id) = match r.hypothesis {
            Hypothesis::H0 => ("H0", None),
            Hypothesis::H1 { gamma_id } => ("H1", Some(gamma_id)),
        };
        w.serialize(CsvRow {
            trial_id: r.trial_id,
            hypothesis,
            gamma_id,
            decision: r.decision,
            tau: r.tau,
            s_tau: r.s_tau,
        })
        .expect("writing to memory");
    }
    let bytes = w.into_inner().expect("flushing to memory");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

/// Summary of the trials run under one hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSummary {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_id: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    pub decided_h0: u64,
    pub decided_h1: u64,
    pub truncated: u64,
    /// Wrong decisions, counting truncation as an error.
    pub error: Estimate,
    /// `P(tau > n)`.
    pub tail: Estimate,
    pub truncation_rate: f64,
    pub mean_tau: f64,
}

fn summarize(label: String, gamma_id: Option<usize>, gamma: Option<Vec<f64>>, n: u64, recs: &[TrialRecord]) -> HypothesisSummary {
    let count = |d: Decision| recs.iter().filter(|r| r.decision == d).count() as u64;
    let (h0, h1, tr) = (count(Decision::H0), count(Decision::H1), count(Decision::Truncated));
    let trials = recs.len() as u64;
    let wrong = if gamma_id.is_none() { h1 + tr } else { h0 + tr };
    let late = recs.iter().filter(|r| r.tau > n).count() as u64;
    HypothesisSummary {
        label,
        gamma_id,
        gamma,
        decided_h0: h0,
        decided_h1: h1,
        truncated: tr,
        error: Estimate::wilson(wrong, trials),
        tail: Estimate::wilson(late, trials),
        truncation_rate: tr as f64 / trials.max(1) as f64,
        mean_tau: recs.iter().map(|r| r.tau as f64).sum::<f64>() / trials.max(1) as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimates {
    pub n: u64,
    pub n_max: u64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub trials: u64,
    pub seed: u64,
    /// Type-I error `P_0(decide H1)` with truncation counted as error.
    pub p10_hat: Estimate,
    /// Largest type-II error over the panel.
    pub p01_max: Estimate,
    pub p01_argmax: usize,
    /// `e^-A` and `e^-B`.
    pub type1_bound: f64,
    pub type2_bound: f64,
    pub truncation_rate: f64,
    pub h0: HypothesisSummary,
    pub panel: Vec<HypothesisSummary>,
}

/// Records and their summary.
#[derive(Debug, Clone)]
pub struct McRun {
    pub estimates: ErrorEstimates,
    pub records: Vec<TrialRecord>,
}

/// Default panel: the projection of `p0`, the reverse projection, and the
/// interior point, without duplicates.
pub fn default_panel(projector: &Projector) -> Result<Vec<Distribution>> {
    let mut panel = vec![
        projector.project(projector.p0())?.gamma_tilde,
        projector.reverse_projection()?.gamma_star,
        projector.interior_point(),
    ];
    let mut out: Vec<Distribution> = Vec::new();
    for g in panel.drain(..) {
        if !out.iter().any(|o| o.max_abs_diff(&g) < 1e-9) {
            out.push(g);
        }
    }
    Ok(out)
}

fn finite_trial(projector: &Projector, th: Thresholds, n_max: u64, source: &Distribution, mut rng: ChaCha8Rng) -> Result<TestOutcome> {
    let stream = std::iter::from_fn(|| Some(source.sample_with(rng.random::<f64>())));
    run_finite(projector, th, n_max, stream)
}

/// Runs `trials` tests under H0 and under every panel member.
pub fn estimate_errors(
    cfg: &McConfig,
    projector: &Projector,
    thresholds: Thresholds,
    n: u64,
    n_max: u64,
    panel: &[Distribution],
) -> Result<McRun> {
    cfg.validate()?;
    Thresholds::new(thresholds.a, thresholds.b)?;
    if panel.is_empty() {
        return Err(Error::OutOfRange("panel must be nonempty".into()));
    }
    for (k, g) in panel.iter().enumerate() {
        if !projector.family().contains(g)? {
            return Err(Error::Infeasible(format!("panel member {k} is outside the uncertainty set")));
        }
    }
    let mut sources = vec![(Hypothesis::H0, projector.p0().clone())];
    sources.extend(panel.iter().cloned().enumerate().map(|(k, g)| (Hypothesis::H1 { gamma_id: k }, g)));
    let mut records = Vec::with_capacity(sources.len() * cfg.trials as usize);
    for (h, (hyp, source)) in sources.iter().enumerate() {
        let outs = map_trials(cfg, |t| {
            finite_trial(projector, thresholds, n_max, source, trial_rng(cfg.seed, h as u64, t))
        })?;
        records.extend(outs.into_iter().enumerate().map(|(t, o)| TrialRecord {
            trial_id: t as u64,
            hypothesis: hyp.clone(),
            decision: o.decision,
            tau: o.tau,
            s_tau: o.s_tau,
        }));
    }
    let estimates = assemble(cfg, thresholds, n, n_max, &records, |k| Some(panel[k].probs().to_vec()));
    Ok(McRun { estimates, records })
}

fn assemble<G>(cfg: &McConfig, th: Thresholds, n: u64, n_max: u64, records: &[TrialRecord], gamma_of: G) -> ErrorEstimates
where
    G: Fn(usize) -> Option<Vec<f64>>,
{
    let per = cfg.trials as usize;
    let h0 = summarize("H0".into(), None, None, n, &records[..per]);
    let panel: Vec<HypothesisSummary> = records[per..]
        .chunks(per)
        .enumerate()
        .map(|(k, recs)| summarize(format!("H1[{k}]"), Some(k), gamma_of(k), n, recs))
        .collect();
    let (arg, worst) = panel
        .iter()
        .enumerate()
        .fold((0, &panel[0]), |(ba, b), (k, s)| {
            if s.error.estimate > b.error.estimate {
                (k, s)
            } else {
                (ba, b)
            }
        });
    let truncated: u64 = h0.truncated + panel.iter().map(|s| s.truncated).sum::<u64>();
    ErrorEstimates {
        n,
        n_max,
        a: th.a,
        b: th.b,
        trials: cfg.trials,
        seed: cfg.seed,
        p10_hat: h0.error,
        p01_max: worst.error,
        p01_argmax: arg,
        type1_bound: (-th.a).exp(),
        type2_bound: (-th.b).exp(),
        truncation_rate: truncated as f64 / records.len() as f64,
        h0,
        panel,
    }
}

/// `P(tau > n)` under H0 and each panel member, from the same trials as
/// [`estimate_errors`].
pub fn stopping_tail(run: &McRun) -> Vec<(String, Estimate)> {
    std::iter::once(&run.estimates.h0)
        .chain(&run.estimates.panel)
        .map(|s| (s.label.clone(), s.tail))
        .collect()
}

/// Error estimates for the Gaussian model. Panel members must lie in the box.
pub fn estimate_errors_gaussian(
    cfg: &McConfig,
    gamma0: &GaussianParams,
    bx: &ParamBox,
    thresholds: Thresholds,
    n: u64,
    n_max: u64,
    panel: &[GaussianParams],
) -> Result<McRun> {
    cfg.validate()?;
    Thresholds::new(thresholds.a, thresholds.b)?;
    if panel.is_empty() {
        return Err(Error::OutOfRange("panel must be nonempty".into()));
    }
    if let Some(k) = panel.iter().position(|g| !bx.contains(g.natural())) {
        return Err(Error::Infeasible(format!("panel member {k} is outside the box")));
    }
    let mut sources = vec![(Hypothesis::H0, *gamma0)];
    sources.extend(panel.iter().enumerate().map(|(k, g)| (Hypothesis::H1 { gamma_id: k }, *g)));
    let mut records = Vec::new();
    for (h, (hyp, source)) in sources.iter().enumerate() {
        let normal = Normal::new(source.mu(), source.sigma2().sqrt())
            .map_err(|e| Error::OutOfRange(e.to_string()))?;
        let outs = map_trials(cfg, |t| {
            let mut rng = trial_rng(cfg.seed, h as u64, t);
            let stat = GaussianStatistic::new(*gamma0, *bx)?;
            let stream = std::iter::from_fn(|| Some(normal.sample(&mut rng)));
            GsprtState::new(stat, thresholds, n_max)?.run(stream, false)
        })?;
        records.extend(outs.into_iter().enumerate().map(|(t, o)| TrialRecord {
            trial_id: t as u64,
            hypothesis: hyp.clone(),
            decision: o.decision,
            tau: o.tau,
            s_tau: o.s_tau,
        }));
    }
    let estimates = assemble(cfg, thresholds, n, n_max, &records, |k| {
        Some(vec![panel[k].mu(), panel[k].sigma2()])
    });
    Ok(McRun { estimates, records })
}

/// Draws the type of `n` samples from `p`.
fn sample_type(p: &Distribution, n: u64, rng: &mut ChaCha8Rng) -> EmpiricalType {
    let mut counts = vec![0u64; p.dim()];
    for _ in 0..n {
        counts[p.sample_with(rng.random::<f64>())] += 1;
    }
    EmpiricalType::from_counts(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Lower edge; `None` for the open left tail.
    pub lo: Option<f64>,
    /// Upper edge; `None` for the open right tail.
    pub hi: Option<f64>,
    pub count: u64,
    /// Count expected under the standard normal.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    /// `D(p0 || gamma')` and `V(p0 || gamma')`.
    pub divergence: f64,
    pub variance: f64,
    pub ks_distance: f64,
    pub mean: f64,
    pub sample_variance: f64,
    /// False below n = 500, where no normal approximation is claimed.
    pub asymptotic_regime: bool,
    pub histogram: Vec<HistogramBin>,
}

/// One-sample Kolmogorov-Smirnov distance to the standard normal.
pub fn ks_distance_normal(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = gaussian_cdf(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Samples `sqrt(n) (f(Q_n) - D) / sqrt(V)` under H0, where
/// `f(Q_n) = -S_n / n`, and compares it with the standard normal.
pub fn clt_check(projector: &Projector, n: u64, cfg: &McConfig) -> Result<CltReport> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::OutOfRange("n must be positive".into()));
    }
    let base = projector.project(projector.p0())?;
    let d = base.f_value;
    let v = relative_entropy_variance(projector.p0(), &base.gamma_tilde)?;
    if !(v > 0.0) {
        return Err(Error::Assumption("zero variance at the projection of p0".into()));
    }
    let scale = (n as f64).sqrt() / v.sqrt();
    let z = map_trials(cfg, |t| {
        let mut rng = trial_rng(cfg.seed, 0, t);
        let ty = sample_type(projector.p0(), n, &mut rng);
        let f = projector.f_of_empirical(&ty, &mut WarmStart::default())?;
        Ok(scale * (f - d))
    })?;
    let m = z.len() as f64;
    let mean = z.iter().sum::<f64>() / m;
    let sample_variance = if z.len() > 1 {
        z.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let edges: Vec<f64> = (0..=16).map(|k| -4.0 + 0.5 * k as f64).collect();
    let mut histogram = Vec::new();
    for k in 0..=edges.len() {
        let lo = if k == 0 { f64::NEG_INFINITY } else { edges[k - 1] };
        let hi = if k == edges.len() { f64::INFINITY } else { edges[k] };
        let count = z.iter().filter(|&&x| x >= lo && x < hi).count() as u64;
        histogram.push(HistogramBin {
            lo: lo.is_finite().then_some(lo),
            hi: hi.is_finite().then_some(hi),
            count,
            expected: m * (gaussian_cdf(hi) - gaussian_cdf(lo)),
        });
    }
    Ok(CltReport {
        n,
        trials: cfg.trials,
        seed: cfg.seed,
        divergence: d,
        variance: v,
        ks_distance: ks_distance_normal(&z),
        mean,
        sample_variance,
        asymptotic_regime: n >= 500,
        histogram,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UwllnReport {
    pub n: u64,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    pub frequency_n: Estimate,
    pub frequency_4n: Estimate,
}

/// Exceedance frequency of `|max_gamma mean_k g(X_k, gamma) - max_gamma E g|`
/// over `delta`, with `g(x, gamma) = log(gamma(x) / p0(x))`, at `n` and `4n`.
/// Both maxima are projections: the first is `-f(Q_n)`, the second `-f(p0)`.
pub fn uwlln_check(projector: &Projector, n: u64, delta: f64, cfg: &McConfig) -> Result<UwllnReport> {
    cfg.validate()?;
    if !(delta > 0.0) || n == 0 {
        return Err(Error::OutOfRange(format!("need delta > 0 and n > 0, got {delta}, {n}")));
    }
    let f0 = projector.f_of_type(projector.p0())?;
    let freq = |len: u64, hyp: u64| -> Result<Estimate> {
        let hits = map_trials(cfg, |t| {
            let mut rng = trial_rng(cfg.seed, hyp, t);
            let ty = sample_type(projector.p0(), len, &mut rng);
            let f = projector.f_of_empirical(&ty, &mut WarmStart::default())?;
            Ok((f - f0).abs() >= delta)
        })?;
        Ok(Estimate::wilson(hits.iter().filter(|&&h| h).count() as u64, cfg.trials))
    };
    Ok(UwllnReport {
        n,
        delta,
        trials: cfg.trials,
        seed: cfg.seed,
        frequency_n: freq(n, 0)?,
        frequency_4n: freq(4 * n, 1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::LinearFamily;

    fn running() -> Projector {
        let fam = LinearFamily::new(vec![vec![1.0, 0.0, 0.0]], vec![0.3], 0.05).unwrap();
        Projector::new(Distribution::new(vec![0.5, 0.3, 0.2]).unwrap(), fam).unwrap()
    }

    #[test]
    fn wilson_contains_estimate() {
        for (s, n) in [(0, 10), (10, 10), (3, 10), (1, 100_000), (50, 100)] {
            let e = Estimate::wilson(s, n);
            assert!(e.lo <= e.estimate && e.estimate <= e.hi, "{e:?}");
            assert!(e.lo >= 0.0 && e.hi <= 1.0);
        }
        let e = Estimate::wilson(50, 100);
        assert!((e.lo - 0.4038).abs() < 1e-4 && (e.hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn ks_of_perfect_quantiles_is_small() {
        let m = 1000;
        let xs: Vec<f64> = (0..m)
            .map(|i| crate::simplex::gaussian_quantile((i as f64 + 0.5) / m as f64).unwrap())
            .collect();
        assert!((ks_distance_normal(&xs) - 0.5 / m as f64).abs() < 1e-9);
    }

    #[test]
    fn huge_thresholds_truncate_everything() {
        let p = running();
        let cfg = McConfig::new(20, 1, 1).unwrap();
        let panel = default_panel(&p).unwrap();
        let run = estimate_errors(&cfg, &p, Thresholds::new(1e9, 1e9).unwrap(), 10, 30, &panel).unwrap();
        assert_eq!(run.estimates.truncation_rate, 1.0);
        assert!(run.records.iter().all(|r| r.decision == Decision::Truncated && r.tau == 30));
        assert!(stopping_tail(&run).iter().all(|(_, e)| e.estimate == 1.0));
    }

    #[test]
    fn tiny_thresholds_stop_at_once() {
        let p = running();
        let cfg = McConfig::new(50, 2, 1).unwrap();
        let panel = default_panel(&p).unwrap();
        let run = estimate_errors(&cfg, &p, Thresholds::new(1e-9, 1e-9).unwrap(), 10, 500, &panel).unwrap();
        assert!(run.records.iter().all(|r| r.tau == 1));
        assert!(stopping_tail(&run).iter().all(|(_, e)| e.estimate == 0.0));
    }

    #[test]
    fn panel_is_checked() {
        let p = running();
        let cfg = McConfig::new(5, 2, 1).unwrap();
        let bad = vec![Distribution::new(vec![0.5, 0.3, 0.2]).unwrap()];
        assert!(matches!(
            estimate_errors(&cfg, &p, Thresholds::new(1.0, 1.0).unwrap(), 10, 50, &bad),
            Err(Error::Infeasible(_))
        ));
        assert_eq!(default_panel(&p).unwrap().len(), 2);
    }

    #[test]
    fn deep_member_is_detected() {
        let p = running();
        let cfg = McConfig::new(200, 3, 1).unwrap();
        let panel = vec![Distribution::new(vec![0.06, 0.06, 0.88]).unwrap()];
        let run = estimate_errors(&cfg, &p, Thresholds::new(1.0, 3.0).unwrap(), 50, 2500, &panel).unwrap();
        assert!(run.estimates.panel[0].error.estimate < 0.02);
    }

    #[test]
    fn deterministic_across_workers() {
        let p = running();
        let panel = default_panel(&p).unwrap();
        let th = Thresholds::new(3.0, 3.0).unwrap();
        let one = estimate_errors(&McConfig::new(64, 11, 1).unwrap(), &p, th, 40, 2000, &panel).unwrap();
        let four = estimate_errors(&McConfig::new(64, 11, 4).unwrap(), &p, th, 40, 2000, &panel).unwrap();
        assert_eq!(records_to_csv(&one.records), records_to_csv(&four.records));
        assert_eq!(
            serde_json::to_string(&one.estimates).unwrap(),
            serde_json::to_string(&four.estimates).unwrap()
        );
        let other = estimate_errors(&McConfig::new(64, 12, 1).unwrap(), &p, th, 40, 2000, &panel).unwrap();
        assert_ne!(records_to_csv(&one.records), records_to_csv(&other.records));
    }

    #[test]
    fn csv_layout() {
        let recs = vec![
            TrialRecord { trial_id: 0, hypothesis: Hypothesis::H0, decision: Decision::H0, tau: 12, s_tau: -3.5 },
            TrialRecord { trial_id: 0, hypothesis: Hypothesis::H1 { gamma_id: 1 }, decision: Decision::Truncated, tau: 9, s_tau: 0.25 },
        ];
        assert_eq!(
            records_to_csv(&recs),
            "trial_id,hypothesis,gamma_id,decision,tau,S_tau\n0,H0,,H0,12,-3.5\n0,H1,1,truncated,9,0.25\n"
        );
    }

    #[test]
    fn clt_small_n_is_far_from_normal() {
        let p = running();
        let r = clt_check(&p, 1, &McConfig::new(2000, 5, 1).unwrap()).unwrap();
        assert!(r.ks_distance > 0.1, "{}", r.ks_distance);
        assert!(!r.asymptotic_regime);
        assert_eq!(r.histogram.iter().map(|b| b.count).sum::<u64>(), 2000);
    }

    #[test]
    fn uwlln_decays_and_saturates() {
        let p = running();
        let cfg = McConfig::new(400, 9, 1).unwrap();
        let r = uwlln_check(&p, 50, 0.03, &cfg).unwrap();
        assert!(r.frequency_4n.estimate <= r.frequency_n.estimate + r.frequency_n.half_width());
        let big = (1.0f64 / 0.05).ln() + (1.0f64 / 0.2).ln();
        let r = uwlln_check(&p, 5, big, &cfg).unwrap();
        assert_eq!(r.frequency_n.estimate, 0.0);
        let r = uwlln_check(&p, 1, 1e-3, &cfg).unwrap();
        assert!(r.frequency_n.estimate > 0.95);
    }

    #[test]
    fn gaussian_errors_run() {
        let g0 = GaussianParams::new(0.0, 1.0).unwrap();
        let bx = ParamBox::mean_variance([0.5, 1.0], [1.5, 2.0]).unwrap();
        let panel = vec![GaussianParams::new(0.75, 1.75).unwrap()];
        let cfg = McConfig::new(40, 4, 1).unwrap();
        let run = estimate_errors_gaussian(&cfg, &g0, &bx, Thresholds::new(3.0, 3.0).unwrap(), 20, 1000, &panel).unwrap();
        assert_eq!(run.records.len(), 80);
        assert!(run.estimates.p10_hat.estimate < 0.3);
        let outside = vec![GaussianParams::new(0.0, 1.0).unwrap()];
        assert!(estimate_errors_gaussian(&cfg, &g0, &bx, Thresholds::new(3.0, 3.0).unwrap(), 20, 1000, &outside).is_err());
    }
}
