//! The generalized sequential probability ratio test.
//!
//! `S_n = sup_{gamma in Gamma} sum_{k <= n} log(gamma(X_k) / p0(X_k))`,
//! which on a finite alphabet equals `-n f(Q_n)`. The test stops at the
//! first `n` with `S_n > A` (decide H1) or `S_n < -B` (decide H0).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::projection::{Projector, WarmStart};
use crate::simplex::{gaussian_quantile, Distribution, EmpiricalType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    H0,
    H1,
    #[serde(rename = "truncated")]
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub a: f64,
    pub b: f64,
}

impl Thresholds {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "thresholds must be positive and finite, got A = {a}, B = {b}"
            )));
        }
        Ok(Self { a, b })
    }
}

/// Thresholds with the quantities they were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub n: u64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// `min D(gamma || p0)` and its minimizer.
    pub reverse_divergence: f64,
    pub gamma_star: Distribution,
    /// `min D(p0 || gamma)` and its minimizer.
    pub forward_divergence: f64,
    pub gamma_prime: Distribution,
    /// Second-order only: minimizers of the penalized objectives.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_a: Option<Distribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_b: Option<Distribution>,
}

impl ThresholdReport {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            a: self.a,
            b: self.b,
        }
    }
}

/// `A_n = n (min D(gamma || p0) - eps0)`, `B_n = n (min D(p0 || gamma) - eps1)`.
pub fn first_order_thresholds(
    projector: &Projector,
    n: u64,
    eps0: f64,
    eps1: f64,
) -> Result<ThresholdReport> {
    if n == 0 {
        return Err(Error::OutOfRange("n must be positive".into()));
    }
    let rev = projector.reverse_projection()?;
    let fwd = projector.project(projector.p0())?;
    if !(eps0 > 0.0 && eps0 < rev.divergence) {
        return Err(Error::OutOfRange(format!(
            "eps0 = {eps0} must lie in (0, {})",
            rev.divergence
        )));
    }
    if !(eps1 > 0.0 && eps1 < fwd.f_value) {
        return Err(Error::OutOfRange(format!(
            "eps1 = {eps1} must lie in (0, {})",
            fwd.f_value
        )));
    }
    let nf = n as f64;
    Ok(ThresholdReport {
        n,
        a: nf * (rev.divergence - eps0),
        b: nf * (fwd.f_value - eps1),
        reverse_divergence: rev.divergence,
        gamma_star: rev.gamma_star,
        forward_divergence: fwd.f_value,
        gamma_prime: fwd.gamma_tilde,
        gamma_a: None,
        gamma_b: None,
    })
}

/// `A_n = n min_gamma (D(gamma||p0) + z0 sqrt(V(gamma||p0) / n))` with
/// `z0 = Phi^-1(eps - eta0)`, and `B_n` likewise with `D(p0||gamma)`,
/// `V(p0||gamma)` and `eta1`.
pub fn second_order_thresholds(
    projector: &Projector,
    n: u64,
    eps: f64,
    eta0: f64,
    eta1: f64,
) -> Result<ThresholdReport> {
    if n == 0 {
        return Err(Error::OutOfRange("n must be positive".into()));
    }
    if !(eps < 1.0 && eta0 > 0.0 && eta1 > 0.0 && eta0 < eps && eta1 < eps) {
        return Err(Error::OutOfRange(format!(
            "need 0 < eta0, eta1 < eps < 1, got eps = {eps}, eta0 = {eta0}, eta1 = {eta1}"
        )));
    }
    let rev = projector.reverse_projection()?;
    let fwd = projector.project(projector.p0())?;
    let nf = n as f64;
    let z0 = gaussian_quantile(eps - eta0)?;
    let z1 = gaussian_quantile(eps - eta1)?;
    let starts = vec![
        rev.gamma_star.probs().to_vec(),
        fwd.gamma_tilde.probs().to_vec(),
        projector.interior_point().into_vec(),
    ];
    let p0 = projector.p0().probs();
    let (val_a, gamma_a) = minimize_over_family(
        projector,
        |g| {
            let (d, v, dd, dv) = reverse_moments(g, p0);
            penalized(d, v, &dd, &dv, z0, nf)
        },
        &starts,
    )?;
    let (val_b, gamma_b) = minimize_over_family(
        projector,
        |g| {
            let (d, v, dd, dv) = forward_moments(p0, g);
            penalized(d, v, &dd, &dv, z1, nf)
        },
        &starts,
    )?;
    let thresholds = Thresholds::new(nf * val_a, nf * val_b).map_err(|_| {
        Error::Assumption(format!(
            "second-order thresholds are not positive at n = {n} (A = {}, B = {})",
            nf * val_a,
            nf * val_b
        ))
    })?;
    Ok(ThresholdReport {
        n,
        a: thresholds.a,
        b: thresholds.b,
        reverse_divergence: rev.divergence,
        gamma_star: rev.gamma_star,
        forward_divergence: fwd.f_value,
        gamma_prime: fwd.gamma_tilde,
        gamma_a: Some(Distribution::normalized(gamma_a)?),
        gamma_b: Some(Distribution::normalized(gamma_b)?),
    })
}

/// `D + z sqrt(V / n)` and its gradient.
fn penalized(d: f64, v: f64, dd: &[f64], dv: &[f64], z: f64, n: f64) -> (f64, Vec<f64>) {
    let root = v.max(0.0).sqrt();
    let value = d + z * root / n.sqrt();
    let coef = if root > 1e-150 { z / (2.0 * root * n.sqrt()) } else { 0.0 };
    let grad = dd.iter().zip(dv).map(|(a, b)| a + coef * b).collect();
    (value, grad)
}

/// `D(g||p0)`, `V(g||p0)` and their gradients in `g`.
fn reverse_moments(g: &[f64], p0: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
    let l: Vec<f64> = g.iter().zip(p0).map(|(g, p)| (g / p).ln()).collect();
    let d: f64 = g.iter().zip(&l).map(|(g, l)| g * l).sum();
    let m2: f64 = g.iter().zip(&l).map(|(g, l)| g * l * l).sum();
    let dd = l.iter().map(|l| l + 1.0).collect();
    let dv = l.iter().map(|l| l * l + 2.0 * l - 2.0 * d * (l + 1.0)).collect();
    (d, m2 - d * d, dd, dv)
}

/// `D(p0||g)`, `V(p0||g)` and their gradients in `g`.
fn forward_moments(p0: &[f64], g: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
    let m: Vec<f64> = p0.iter().zip(g).map(|(p, g)| (p / g).ln()).collect();
    let d: f64 = p0.iter().zip(&m).map(|(p, m)| p * m).sum();
    let m2: f64 = p0.iter().zip(&m).map(|(p, m)| p * m * m).sum();
    let dd = p0.iter().zip(g).map(|(p, g)| -p / g).collect();
    let dv = p0
        .iter()
        .zip(g)
        .zip(&m)
        .map(|((p, g), m)| -2.0 * p * (m - d) / g)
        .collect();
    (d, m2 - d * d, dd, dv)
}

/// Feasible simplex grid points with spacing `1/m`.
fn simplex_grid(d: usize, m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; d];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, m: usize, out: &mut Vec<Vec<f64>>) {
        let d = cur.len();
        if i == d - 1 {
            cur[i] = left;
            out.push(cur.iter().map(|&c| c as f64 / m as f64).collect());
            return;
        }
        for c in 0..=left {
            cur[i] = c;
            rec(i + 1, left - c, cur, m, out);
        }
    }
    rec(0, m, &mut cur, m, &mut out);
    out
}

/// Projected gradient descent over the family from several starts, plus
/// the best points of a coarse grid when the alphabet is small.
pub(crate) fn minimize_over_family<F>(
    projector: &Projector,
    objective: F,
    starts: &[Vec<f64>],
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let family = projector.family();
    let d = projector.dim();
    let mut all: Vec<Vec<f64>> = starts.to_vec();
    let grid_m = match d {
        2 => 200,
        3 => 40,
        4 => 20,
        _ => 0,
    };
    if grid_m > 0 {
        let mut scored: Vec<(f64, Vec<f64>)> = simplex_grid(d, grid_m)
            .into_iter()
            .filter(|g| family.max_violation(g) <= 0.0)
            .map(|g| (objective(&g).0, g))
            .filter(|(v, _)| v.is_finite())
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        all.extend(scored.into_iter().take(2).map(|(_, g)| g));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in all {
        let (v, g) = projected_gradient(projector, &objective, start)?;
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, g));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no start point".into()))
}

fn projected_gradient<F>(projector: &Projector, objective: &F, start: Vec<f64>) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = projector.euclidean_project(&start)?;
    let (mut fx, mut gx) = objective(&x);
    let mut t = 1e-2;
    let mut stalled = 0;
    for _ in 0..20_000 {
        let mut accepted = None;
        for _ in 0..80 {
            let y: Vec<f64> = x.iter().zip(&gx).map(|(x, g)| x - t * g).collect();
            let cand = projector.euclidean_project(&y)?;
            let step: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
            let (fc, gc) = objective(&cand);
            let lin: f64 = gx.iter().zip(&step).map(|(g, s)| g * s).sum();
            let quad: f64 = step.iter().map(|s| s * s).sum::<f64>() / (2.0 * t);
            if fc.is_finite() && fc <= fx + lin + quad + 1e-15 * fx.abs() {
                accepted = Some((cand, fc, gc, step));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc, gc, step)) = accepted else {
            break;
        };
        // rounding noise stops strict descent long before the step vanishes
        stalled = if fx - fc <= 1e-15 * fx.abs() { stalled + 1 } else { 0 };
        x = cand;
        fx = fc;
        gx = gc;
        if max_abs(&step) <= 1e-14 || stalled >= 5 {
            break;
        }
        t *= 2.0;
    }
    Ok((fx, x))
}

/// Source of the running statistic `S_n`.
pub trait Statistic {
    type Obs;
    /// Absorbs one observation and returns the new `S_n`.
    fn observe(&mut self, x: Self::Obs) -> Result<f64>;
    fn n(&self) -> u64;
}

/// `S_n = -n f(Q_n)` on a finite alphabet.
#[derive(Debug, Clone)]
pub struct TypeStatistic<'a> {
    projector: &'a Projector,
    ty: EmpiricalType,
    warm: WarmStart,
}

impl<'a> TypeStatistic<'a> {
    pub fn new(projector: &'a Projector) -> Self {
        Self {
            projector,
            ty: EmpiricalType::empty(projector.dim()),
            warm: WarmStart::default(),
        }
    }

    pub fn empirical_type(&self) -> &EmpiricalType {
        &self.ty
    }
}

impl Statistic for TypeStatistic<'_> {
    type Obs = usize;

    fn observe(&mut self, x: usize) -> Result<f64> {
        self.ty.update(x)?;
        let f = self.projector.f_of_empirical(&self.ty, &mut self.warm)?;
        Ok(-(self.ty.n() as f64) * f)
    }

    fn n(&self) -> u64 {
        self.ty.n()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub decision: Decision,
    pub tau: u64,
    #[serde(rename = "S_tau")]
    pub s_tau: f64,
    pub trajectory_len: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<f64>>,
}

/// A test in progress.
#[derive(Debug, Clone)]
pub struct GsprtState<S> {
    stat: S,
    thresholds: Thresholds,
    n_max: u64,
    s_n: f64,
    decision: Option<Decision>,
}

impl<S: Statistic> GsprtState<S> {
    pub fn new(stat: S, thresholds: Thresholds, n_max: u64) -> Result<Self> {
        Thresholds::new(thresholds.a, thresholds.b)?;
        if n_max == 0 {
            return Err(Error::OutOfRange("n_max must be positive".into()));
        }
        Ok(Self {
            stat,
            thresholds,
            n_max,
            s_n: 0.0,
            decision: None,
        })
    }

    pub fn statistic(&self) -> &S {
        &self.stat
    }

    pub fn s_n(&self) -> f64 {
        self.s_n
    }

    pub fn n(&self) -> u64 {
        self.stat.n()
    }

    pub fn decision(&self) -> Option<Decision> {
        self.decision
    }

    pub fn step(&mut self, x: S::Obs) -> Result<Option<Decision>> {
        if self.decision.is_some() {
            return Err(Error::AlreadyStopped(self.stat.n()));
        }
        self.s_n = self.stat.observe(x)?;
        self.decision = classify(self.s_n, self.stat.n(), self.thresholds, self.n_max);
        Ok(self.decision)
    }

    /// Feeds `stream` until a decision, truncation, or the stream ends.
    pub fn run<I>(mut self, stream: I, record: bool) -> Result<TestOutcome>
    where
        I: IntoIterator<Item = S::Obs>,
    {
        let mut trajectory = record.then(Vec::new);
        for x in stream {
            let d = self.step(x)?;
            if let Some(t) = trajectory.as_mut() {
                t.push(self.s_n);
            }
            if d.is_some() {
                break;
            }
        }
        let tau = self.stat.n();
        Ok(TestOutcome {
            decision: self.decision.unwrap_or(Decision::Truncated),
            tau,
            s_tau: self.s_n,
            trajectory_len: tau,
            trajectory,
        })
    }
}

fn classify(s: f64, n: u64, th: Thresholds, n_max: u64) -> Option<Decision> {
    if s > th.a {
        Some(Decision::H1)
    } else if s < -th.b {
        Some(Decision::H0)
    } else if n >= n_max {
        Some(Decision::Truncated)
    } else {
        None
    }
}

/// Runs the finite-alphabet test, evaluating `S_n` only at steps where a
/// threshold could have been crossed.
///
/// With `gamma_m` the maximizer at the last evaluation `m`,
/// `S_n >= S_m + sum_{m<k<=n} log(gamma_m(x_k)/p0(x_k))`, and
/// `S_n <= S_m + sum_{m<k<=n} log(gmax(x_k)/p0(x_k))` where
/// `gmax = 1 - (d-1) c0` bounds every coordinate of the family. Outcomes
/// match [`GsprtState::run`] exactly.
pub fn run_finite<I>(projector: &Projector, thresholds: Thresholds, n_max: u64, stream: I) -> Result<TestOutcome>
where
    I: IntoIterator<Item = usize>,
{
    Thresholds::new(thresholds.a, thresholds.b)?;
    let d = projector.dim();
    let p0 = projector.p0().probs();
    let gmax = 1.0 - (d as f64 - 1.0) * projector.family().c0();
    let up: Vec<f64> = p0.iter().map(|p| (gmax / p).ln() + 1e-12).collect();
    let mut down: Vec<f64> = projector
        .interior_point()
        .probs()
        .iter()
        .zip(p0)
        .map(|(g, p)| (g / p).ln())
        .collect();
    let mut ty = EmpiricalType::empty(d);
    let mut warm = WarmStart::default();
    let (mut s_m, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
    let margin = 1e-9 * (1.0 + thresholds.a.max(thresholds.b));
    for x in stream {
        ty.update(x)?;
        lo += down[x];
        hi += up[x];
        let n = ty.n();
        if n >= n_max || s_m + hi > thresholds.a - margin || s_m + lo < -thresholds.b + margin {
            let r = projector.project_empirical(&ty, &mut warm)?;
            let s = -(n as f64) * r.f_value;
            if let Some(decision) = classify(s, n, thresholds, n_max) {
                return Ok(TestOutcome {
                    decision,
                    tau: n,
                    s_tau: s,
                    trajectory_len: n,
                    trajectory: None,
                });
            }
            s_m = s;
            lo = -margin;
            hi = margin;
            for (dv, (g, p)) in down.iter_mut().zip(r.gamma_tilde.probs().iter().zip(p0)) {
                *dv = (g / p).ln();
            }
        }
    }
    // stream exhausted: report the exact statistic at the last step
    let n = ty.n();
    let s = if n == 0 {
        0.0
    } else {
        -(n as f64) * projector.f_of_empirical(&ty, &mut warm)?
    };
    Ok(TestOutcome {
        decision: Decision::Truncated,
        tau: n,
        s_tau: s,
        trajectory_len: n,
        trajectory: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::LinearFamily;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn running() -> Projector {
        let fam = LinearFamily::new(vec![vec![1.0, 0.0, 0.0]], vec![0.3], 0.05).unwrap();
        Projector::new(Distribution::new(vec![0.5, 0.3, 0.2]).unwrap(), fam).unwrap()
    }

    fn draw(p: &[f64], rng: &mut ChaCha8Rng, len: usize) -> Vec<usize> {
        let dist = Distribution::new(p.to_vec()).unwrap();
        (0..len).map(|_| dist.sample_with(rng.random::<f64>())).collect()
    }

    #[test]
    fn first_order_running_example() {
        let p = running();
        let r = first_order_thresholds(&p, 100, 0.01, 0.01).unwrap();
        assert_abs_diff_eq!(r.a, 100.0 * (0.08228287850505184 - 0.01), epsilon = 1e-9);
        assert_abs_diff_eq!(r.b, 100.0 * (0.08717669357238891 - 0.01), epsilon = 1e-9);
        assert!(first_order_thresholds(&p, 100, r.reverse_divergence, 0.01).is_err());
        assert!(first_order_thresholds(&p, 0, 0.01, 0.01).is_err());
        assert!(first_order_thresholds(&p, 100, 0.0, 0.01).is_err());
    }

    #[test]
    fn second_order_at_median_is_first_order_limit() {
        let p = running();
        let r = second_order_thresholds(&p, 1000, 0.6, 0.1, 0.1).unwrap();
        assert_abs_diff_eq!(r.a, 1000.0 * r.reverse_divergence, epsilon = 1e-8);
        assert_abs_diff_eq!(r.b, 1000.0 * r.forward_divergence, epsilon = 1e-8);
    }

    #[test]
    fn second_order_backoff() {
        let p = running();
        let r = second_order_thresholds(&p, 10_000, 0.2, 0.05, 0.05).unwrap();
        let z = gaussian_quantile(0.15).unwrap();
        let want = 1e4 * 0.08717669357238891 + z * (1e4 * 0.1794784160541833f64).sqrt();
        assert_abs_diff_eq!(r.b, want, epsilon = 1e-6);
        assert!(r.a < 1e4 * r.reverse_divergence);
        assert!(second_order_thresholds(&p, 100, 0.2, 0.25, 0.05).is_err());
        assert!(second_order_thresholds(&p, 100, 1.0, 0.05, 0.05).is_err());
    }

    #[test]
    fn first_step_statistic() {
        let p = running();
        let th = Thresholds::new(100.0, 100.0).unwrap();
        let mut st = GsprtState::new(TypeStatistic::new(&p), th, 1000).unwrap();
        st.step(0).unwrap();
        assert_abs_diff_eq!(st.s_n(), (0.3f64 / 0.5).ln(), epsilon = 1e-12);
    }

    #[test]
    fn incremental_matches_batch() {
        let p = running();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs = draw(&[0.4, 0.35, 0.25], &mut rng, 100);
        let th = Thresholds::new(1e6, 1e6).unwrap();
        let mut st = GsprtState::new(TypeStatistic::new(&p), th, 10_000).unwrap();
        for (k, &x) in xs.iter().enumerate() {
            st.step(x).unwrap();
            let n = k + 1;
            if [1, 10, 100].contains(&n) {
                let ty = EmpiricalType::from_symbols(3, &xs[..n]).unwrap();
                let q = ty.to_distribution().unwrap();
                let batch = -(n as f64) * p.f_of_type(&q).unwrap();
                assert_abs_diff_eq!(st.s_n(), batch, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn step_after_decision_fails() {
        let p = running();
        let th = Thresholds::new(0.01, 0.01).unwrap();
        let mut st = GsprtState::new(TypeStatistic::new(&p), th, 10).unwrap();
        assert_eq!(st.step(0).unwrap(), Some(Decision::H0));
        assert!(matches!(st.step(0), Err(Error::AlreadyStopped(1))));
    }

    #[test]
    fn large_thresholds_truncate() {
        let p = running();
        let th = Thresholds::new(1e9, 1e9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = draw(&[0.5, 0.3, 0.2], &mut rng, 500);
        let out = GsprtState::new(TypeStatistic::new(&p), th, 200)
            .unwrap()
            .run(xs.iter().copied(), true)
            .unwrap();
        assert_eq!(out.decision, Decision::Truncated);
        assert_eq!(out.tau, 200);
        let traj = out.trajectory.unwrap();
        assert!(traj.iter().all(|s| s.abs() <= 1e9));
        let short = GsprtState::new(TypeStatistic::new(&p), th, 200)
            .unwrap()
            .run(xs[..37].iter().copied(), false)
            .unwrap();
        assert_eq!((short.decision, short.tau), (Decision::Truncated, 37));
    }

    #[test]
    fn repeating_symbol_has_linear_drift() {
        // only symbol 1: S_n = n log(0.9 / 0.3) = n log 3
        let p = running();
        let a = 10.0;
        let th = Thresholds::new(a, 10.0).unwrap();
        let out = GsprtState::new(TypeStatistic::new(&p), th, 1000)
            .unwrap()
            .run(std::iter::repeat(1), false)
            .unwrap();
        assert_eq!(out.decision, Decision::H1);
        let want = (a / 3f64.ln()).floor() as u64 + 1;
        assert_eq!(out.tau, want);
        assert_abs_diff_eq!(out.s_tau, want as f64 * 3f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn skip_ahead_matches_exact_run() {
        let p = running();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..60 {
            let source: &[f64] = match trial % 3 {
                0 => &[0.5, 0.3, 0.2],
                1 => &[0.3, 0.42, 0.28],
                _ => &[0.2, 0.5, 0.3],
            };
            let xs = draw(source, &mut rng, 400);
            let th = Thresholds::new(3.0 + trial as f64 * 0.1, 2.0 + trial as f64 * 0.05).unwrap();
            let exact = GsprtState::new(TypeStatistic::new(&p), th, 300)
                .unwrap()
                .run(xs.iter().copied(), false)
                .unwrap();
            let fast = run_finite(&p, th, 300, xs.iter().copied()).unwrap();
            assert_eq!(exact.decision, fast.decision, "trial {trial}");
            assert_eq!(exact.tau, fast.tau, "trial {trial}");
            assert_abs_diff_eq!(exact.s_tau, fast.s_tau, epsilon = 1e-9);
        }
    }

    #[test]
    fn raising_a_never_flips_h0_to_h1() {
        let p = running();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let xs = draw(&[0.35, 0.4, 0.25], &mut rng, 2000);
            let low = run_finite(&p, Thresholds::new(2.0, 3.0).unwrap(), 2000, xs.iter().copied()).unwrap();
            let high = run_finite(&p, Thresholds::new(4.0, 3.0).unwrap(), 2000, xs.iter().copied()).unwrap();
            if low.decision == Decision::H0 {
                assert_eq!(high.decision, Decision::H0);
                assert_eq!(high.tau, low.tau);
            }
            if high.decision == Decision::H1 {
                assert_eq!(low.decision, Decision::H1);
                assert!(high.tau >= low.tau);
            }
        }
    }

    #[test]
    fn point_inside_family_leads_to_h1() {
        let p = running();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = draw(&[0.1, 0.6, 0.3], &mut rng, 5000);
        let out = run_finite(&p, Thresholds::new(5.0, 5.0).unwrap(), 5000, xs).unwrap();
        assert_eq!(out.decision, Decision::H1);
    }

    #[test]
    fn outcome_json_shape() {
        let o = TestOutcome {
            decision: Decision::Truncated,
            tau: 3,
            s_tau: 0.5,
            trajectory_len: 3,
            trajectory: None,
        };
        assert_eq!(
            serde_json::to_string(&o).unwrap(),
            r#"{"decision":"truncated","tau":3,"S_tau":0.5,"trajectory_len":3}"#
        );
    }
}
