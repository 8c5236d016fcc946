//! Continuous observations from canonical exponential families, with the
//! Gaussian family in closed form.
//!
//! Natural parameters of `N(mu, s2)` are `theta = (mu / s2, -1 / (2 s2))`,
//! with sufficient statistic `T(x) = (x, x^2)` and cumulant
//! `A(theta) = -theta1^2 / (4 theta2) - log(-2 theta2) / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsprt::Statistic;

/// A canonical exponential family `p(x) = h(x) exp(theta . T(x) - A(theta))`.
pub trait ExponentialFamily {
    fn statistic(&self, x: f64) -> Vec<f64>;
    fn log_partition(&self, theta: &[f64]) -> f64;
    fn grad_log_partition(&self, theta: &[f64]) -> Vec<f64>;

    /// `log p_theta(x) / p_theta0(x)`.
    fn log_likelihood_ratio(&self, theta: &[f64], theta0: &[f64], x: f64) -> f64 {
        let t = self.statistic(x);
        let lin: f64 = theta.iter().zip(theta0).zip(&t).map(|((a, b), t)| (a - b) * t).sum();
        lin - self.log_partition(theta) + self.log_partition(theta0)
    }

    /// `D(p_theta || p_theta0) = (theta - theta0) . grad A(theta) - A(theta) + A(theta0)`.
    fn kl(&self, theta: &[f64], theta0: &[f64]) -> f64 {
        let g = self.grad_log_partition(theta);
        let lin: f64 = theta.iter().zip(theta0).zip(&g).map(|((a, b), g)| (a - b) * g).sum();
        lin - self.log_partition(theta) + self.log_partition(theta0)
    }
}

/// The Gaussian family in natural coordinates.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian;

impl ExponentialFamily for Gaussian {
    fn statistic(&self, x: f64) -> Vec<f64> {
        vec![x, x * x]
    }

    fn log_partition(&self, t: &[f64]) -> f64 {
        -t[0] * t[0] / (4.0 * t[1]) - 0.5 * (-2.0 * t[1]).ln()
    }

    fn grad_log_partition(&self, t: &[f64]) -> Vec<f64> {
        grad_a([t[0], t[1]]).to_vec()
    }
}

fn log_partition(t: [f64; 2]) -> f64 {
    -t[0] * t[0] / (4.0 * t[1]) - 0.5 * (-2.0 * t[1]).ln()
}

fn grad_a(t: [f64; 2]) -> [f64; 2] {
    let mu = -t[0] / (2.0 * t[1]);
    [mu, mu * mu - 1.0 / (2.0 * t[1])]
}

fn hess_a(t: [f64; 2]) -> [[f64; 2]; 2] {
    let (a, b) = (t[0], t[1]);
    let off = a / (2.0 * b * b);
    [
        [-1.0 / (2.0 * b), off],
        [off, -a * a / (2.0 * b * b * b) + 1.0 / (2.0 * b * b)],
    ]
}

fn min_eig(m: [[f64; 2]; 2]) -> f64 {
    let mid = 0.5 * (m[0][0] + m[1][1]);
    let half = 0.5 * (m[0][0] - m[1][1]);
    mid - (half * half + m[0][1] * m[0][1]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian", into = "RawGaussian")]
pub struct GaussianParams {
    mu: f64,
    sigma2: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGaussian {
    mu: f64,
    sigma2: f64,
}

impl TryFrom<RawGaussian> for GaussianParams {
    type Error = Error;

    fn try_from(r: RawGaussian) -> Result<Self> {
        Self::new(r.mu, r.sigma2)
    }
}

impl From<GaussianParams> for RawGaussian {
    fn from(g: GaussianParams) -> Self {
        RawGaussian {
            mu: g.mu,
            sigma2: g.sigma2,
        }
    }
}

impl GaussianParams {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite() && mu.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "need finite mean and positive variance, got ({mu}, {sigma2})"
            )));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn from_natural(theta: [f64; 2]) -> Result<Self> {
        if !(theta[1] < 0.0) {
            return Err(Error::OutOfRange(format!(
                "second natural coordinate must be negative, got {}",
                theta[1]
            )));
        }
        let sigma2 = -1.0 / (2.0 * theta[1]);
        Self::new(theta[0] * sigma2, sigma2)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn natural(&self) -> [f64; 2] {
        [self.mu / self.sigma2, -0.5 / self.sigma2]
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = x - self.mu;
        -0.5 * (2.0 * std::f64::consts::PI * self.sigma2).ln() - z * z / (2.0 * self.sigma2)
    }
}

/// `D(N(a) || N(b))`.
pub fn gaussian_kl(a: &GaussianParams, b: &GaussianParams) -> f64 {
    let dm = a.mu - b.mu;
    0.5 * (b.sigma2 / a.sigma2).ln() + (a.sigma2 + dm * dm) / (2.0 * b.sigma2) - 0.5
}

/// `(D, V)` with `V = Var_a[log p_a(X) / p_b(X)]`.
pub fn gaussian_rev(a: &GaussianParams, b: &GaussianParams) -> (f64, f64) {
    // with X = mu_a + sigma_a Z the log-ratio is c + (r - 1)/2 Z^2 + k Z
    let r = a.sigma2 / b.sigma2;
    let dm = a.mu - b.mu;
    let v = 0.5 * (r - 1.0) * (r - 1.0) + r * dm * dm / b.sigma2;
    (gaussian_kl(a, b), v)
}

/// A compact convex parameter set: either a rectangle in natural
/// coordinates or the image of a mean/variance rectangle (a trapezoid).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamBox {
    Natural { lo: [f64; 2], hi: [f64; 2] },
    MeanVariance { mu: [f64; 2], sigma2: [f64; 2] },
}

impl ParamBox {
    pub fn natural(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        let b = ParamBox::Natural { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn mean_variance(mu: [f64; 2], sigma2: [f64; 2]) -> Result<Self> {
        let b = ParamBox::MeanVariance { mu, sigma2 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi, ok) = match *self {
            ParamBox::Natural { lo, hi } => (lo, hi, hi[1] < 0.0),
            ParamBox::MeanVariance { mu, sigma2 } => (
                [mu[0], sigma2[0]],
                [mu[1], sigma2[1]],
                sigma2[0] > 0.0,
            ),
        };
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) || lo[0] > hi[0] || lo[1] > hi[1] {
            return Err(Error::OutOfRange(format!("bad box bounds {lo:?}..{hi:?}")));
        }
        if !ok {
            return Err(Error::OutOfRange(
                "box leaves the natural parameter space (variance must stay positive)".into(),
            ));
        }
        Ok(())
    }

    /// Natural parameter at local coordinates `(s, t)` in the unit square.
    pub fn point(&self, s: f64, t: f64) -> [f64; 2] {
        match *self {
            ParamBox::Natural { lo, hi } => [lo[0] + s * (hi[0] - lo[0]), lo[1] + t * (hi[1] - lo[1])],
            ParamBox::MeanVariance { mu, sigma2 } => {
                let m = mu[0] + s * (mu[1] - mu[0]);
                let v = sigma2[0] + t * (sigma2[1] - sigma2[0]);
                [m / v, -0.5 / v]
            }
        }
    }

    /// Corners in counterclockwise order (natural coordinates).
    pub fn vertices(&self) -> [[f64; 2]; 4] {
        let mut v = [
            self.point(0.0, 0.0),
            self.point(1.0, 0.0),
            self.point(1.0, 1.0),
            self.point(0.0, 1.0),
        ];
        if signed_area(&v) < 0.0 {
            v.reverse();
        }
        v
    }

    pub fn center(&self) -> [f64; 2] {
        self.point(0.5, 0.5)
    }

    pub fn contains(&self, theta: [f64; 2]) -> bool {
        let v = self.vertices();
        let scale = v.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
        let tol = 1e-12 * scale;
        let within = (0..2).all(|c| {
            let lo = v.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min);
            let hi = v.iter().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max);
            theta[c] >= lo - tol && theta[c] <= hi + tol
        });
        within && (0..4).all(|k| {
            let (a, b) = (v[k], v[(k + 1) % 4]);
            let cross = (b[0] - a[0]) * (theta[1] - a[1]) - (b[1] - a[1]) * (theta[0] - a[0]);
            cross >= -1e-12 * scale * scale
        })
    }
}

fn signed_area(v: &[[f64; 2]; 4]) -> f64 {
    (0..4)
        .map(|k| {
            let (a, b) = (v[k], v[(k + 1) % 4]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Sufficient statistics of a Gaussian sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GaussianSuffStats {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl GaussianSuffStats {
    pub fn from_sample(xs: &[f64]) -> Self {
        let mut s = Self::default();
        for &x in xs {
            s.push(x);
        }
        s
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    /// `sum_i log p_theta(x_i) / p_theta0(x_i)`.
    pub fn log_ratio(&self, theta: [f64; 2], theta0: [f64; 2]) -> f64 {
        (theta[0] - theta0[0]) * self.sum + (theta[1] - theta0[1]) * self.sum_sq
            - self.n as f64 * (log_partition(theta) - log_partition(theta0))
    }

    fn gradient(&self, theta: [f64; 2]) -> [f64; 2] {
        let g = grad_a(theta);
        let n = self.n as f64;
        [self.sum - n * g[0], self.sum_sq - n * g[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoglikMax {
    pub value: f64,
    pub theta: [f64; 2],
    /// Norm of the gradient along the feasible directions at `theta`.
    pub grad_norm: f64,
    pub boundary_active: bool,
}

/// `max_{theta in box} sum_i log p_theta(x_i) / p_theta0(x_i)`.
pub fn max_loglik_ratio(sample: &[f64], gamma0: &GaussianParams, bx: &ParamBox) -> Result<LoglikMax> {
    if sample.is_empty() {
        return Err(Error::OutOfRange("empty sample".into()));
    }
    max_loglik_ratio_stats(&GaussianSuffStats::from_sample(sample), gamma0, bx)
}

/// As [`max_loglik_ratio`], from sufficient statistics.
///
/// The objective is concave, so the maximizer is the unconstrained MLE when
/// it lies in the box and otherwise sits on an edge, where a bisection on
/// the directional derivative finds it.
pub fn max_loglik_ratio_stats(
    stats: &GaussianSuffStats,
    gamma0: &GaussianParams,
    bx: &ParamBox,
) -> Result<LoglikMax> {
    bx.validate()?;
    if stats.n == 0 {
        return Err(Error::OutOfRange("empty sample".into()));
    }
    let theta0 = gamma0.natural();
    let n = stats.n as f64;
    let mean = stats.sum / n;
    let var = stats.sum_sq / n - mean * mean;
    if var > 0.0 {
        if let Ok(mle) = GaussianParams::new(mean, var) {
            let t = mle.natural();
            if bx.contains(t) {
                let g = stats.gradient(t);
                return Ok(LoglikMax {
                    value: stats.log_ratio(t, theta0),
                    theta: t,
                    grad_norm: (g[0] * g[0] + g[1] * g[1]).sqrt() / n,
                    boundary_active: false,
                });
            }
        }
    }
    let v = bx.vertices();
    let mut best: Option<LoglikMax> = None;
    for k in 0..4 {
        let (a, b) = (v[k], v[(k + 1) % 4]);
        let dir = [b[0] - a[0], b[1] - a[1]];
        let at = |s: f64| [a[0] + s * dir[0], a[1] + s * dir[1]];
        let slope = |s: f64| {
            let g = stats.gradient(at(s));
            g[0] * dir[0] + g[1] * dir[1]
        };
        let s = if slope(0.0) <= 0.0 {
            0.0
        } else if slope(1.0) >= 0.0 {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let t = at(s);
        let value = stats.log_ratio(t, theta0);
        let len = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        let tangential = if s > 0.0 && s < 1.0 && len > 0.0 {
            slope(s).abs() / len / n
        } else {
            0.0
        };
        if best.is_none_or(|b| value > b.value) {
            best = Some(LoglikMax {
                value,
                theta: t,
                grad_norm: tangential,
                boundary_active: true,
            });
        }
    }
    best.ok_or_else(|| Error::NonConvergence {
        iterations: 0,
        residual: f64::NAN,
    })
}

/// Running `S_n` for a Gaussian stream.
#[derive(Debug, Clone)]
pub struct GaussianStatistic {
    gamma0: GaussianParams,
    bx: ParamBox,
    stats: GaussianSuffStats,
}

impl GaussianStatistic {
    pub fn new(gamma0: GaussianParams, bx: ParamBox) -> Result<Self> {
        bx.validate()?;
        Ok(Self {
            gamma0,
            bx,
            stats: GaussianSuffStats::default(),
        })
    }

    pub fn stats(&self) -> &GaussianSuffStats {
        &self.stats
    }
}

impl Statistic for GaussianStatistic {
    type Obs = f64;

    fn observe(&mut self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::OutOfRange(format!("observation {x}")));
        }
        self.stats.push(x);
        Ok(max_loglik_ratio_stats(&self.stats, &self.gamma0, &self.bx)?.value)
    }

    fn n(&self) -> u64 {
        self.stats.n
    }
}

/// Minimizes a smooth function of the natural parameter over the box by
/// grid search with successive zooming in local coordinates.
fn minimize_on_box<F: Fn([f64; 2]) -> f64>(bx: &ParamBox, f: F) -> ([f64; 2], f64) {
    let m = 64;
    let (mut s_lo, mut s_hi, mut t_lo, mut t_hi) = (0.0f64, 1.0f64, 0.0f64, 1.0f64);
    let mut best = (bx.center(), f64::INFINITY, 0.5, 0.5);
    for _ in 0..40 {
        for i in 0..=m {
            for j in 0..=m {
                let s = s_lo + (s_hi - s_lo) * i as f64 / m as f64;
                let t = t_lo + (t_hi - t_lo) * j as f64 / m as f64;
                let p = bx.point(s, t);
                let v = f(p);
                if v < best.1 {
                    best = (p, v, s, t);
                }
            }
        }
        let hs = (s_hi - s_lo) / 8.0;
        let ht = (t_hi - t_lo) / 8.0;
        s_lo = (best.2 - hs).max(0.0);
        s_hi = (best.2 + hs).min(1.0);
        t_lo = (best.3 - ht).max(0.0);
        t_hi = (best.3 + ht).min(1.0);
        if hs < 1e-15 && ht < 1e-15 {
            break;
        }
    }
    (best.0, best.1)
}

/// First-order thresholds for the Gaussian model:
/// `A_n = n (min D(p_theta || p_0) - eps0)`, `B_n = n (min D(p_0 || p_theta) - eps1)`.
pub fn gaussian_first_order_thresholds(
    gamma0: &GaussianParams,
    bx: &ParamBox,
    n: u64,
    eps0: f64,
    eps1: f64,
) -> Result<GaussianThresholds> {
    bx.validate()?;
    if n == 0 {
        return Err(Error::OutOfRange("n must be positive".into()));
    }
    let g0 = *gamma0;
    let to_params = |t: [f64; 2]| GaussianParams::from_natural(t).expect("box stays in the parameter space");
    let (ta, da) = minimize_on_box(bx, |t| gaussian_kl(&to_params(t), &g0));
    let (tb, db) = minimize_on_box(bx, |t| gaussian_kl(&g0, &to_params(t)));
    if !(eps0 > 0.0 && eps0 < da) {
        return Err(Error::OutOfRange(format!("eps0 = {eps0} must lie in (0, {da})")));
    }
    if !(eps1 > 0.0 && eps1 < db) {
        return Err(Error::OutOfRange(format!("eps1 = {eps1} must lie in (0, {db})")));
    }
    let nf = n as f64;
    Ok(GaussianThresholds {
        n,
        a: nf * (da - eps0),
        b: nf * (db - eps1),
        reverse_divergence: da,
        theta_a: ta,
        forward_divergence: db,
        theta_b: tb,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianThresholds {
    pub n: u64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub reverse_divergence: f64,
    pub theta_a: [f64; 2],
    pub forward_divergence: f64,
    pub theta_b: [f64; 2],
}

impl GaussianThresholds {
    pub fn thresholds(&self) -> crate::gsprt::Thresholds {
        crate::gsprt::Thresholds {
            a: self.a,
            b: self.b,
        }
    }
}

/// Grid resolution per axis for [`check_conditions`].
pub const CONDITION_GRID: usize = 33;
/// Smallest eigenvalue accepted as positive definite.
pub const EIGEN_THRESHOLD: f64 = 1e-10;

/// Hessian of `theta -> D(p_theta || p_theta0)`:
/// `grad^2 A(theta) + sum_k (theta - theta0)_k d_k grad^2 A(theta)`.
pub fn divergence_hessian(theta: [f64; 2], theta0: [f64; 2]) -> [[f64; 2]; 2] {
    let (a, b) = (theta[0], theta[1]);
    let d = [a - theta0[0], b - theta0[1]];
    let h = hess_a(theta);
    // third derivatives of A
    let a112 = 1.0 / (2.0 * b * b);
    let a122 = -a / (b * b * b);
    let a222 = 3.0 * a * a / (2.0 * b.powi(4)) - 1.0 / (b * b * b);
    [
        [h[0][0] + d[1] * a112, h[0][1] + d[0] * a112 + d[1] * a122],
        [h[1][0] + d[0] * a112 + d[1] * a122, h[1][1] + d[0] * a122 + d[1] * a222],
    ]
}

/// The matrix displayed for the standard normal null in the worked Gaussian
/// example. It differs from [`divergence_hessian`] in its last entry and is
/// kept only as a diagnostic.
pub fn displayed_cross_matrix(theta: [f64; 2]) -> [[f64; 2]; 2] {
    let (a, b) = (theta[0], theta[1]);
    let off = -a / (2.0 * b * b * b);
    [
        [1.0 / (4.0 * b * b), off],
        [off, 3.0 * a / (4.0 * b.powi(4)) - 1.0 / (2.0 * b * b * b) - 1.0 / (b * b)],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionViolation {
    pub theta: [f64; 2],
    pub mu: f64,
    pub sigma2: f64,
    pub check: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub grid_points: usize,
    pub gamma0_excluded: bool,
    /// Smallest eigenvalue of `grad^2 A` over the grid.
    pub cumulant_hessian_min_eig: f64,
    /// Smallest eigenvalue of the Hessian of `D(p_theta || p_theta0)`.
    pub divergence_hessian_min_eig: f64,
    /// Standard normal null only: the displayed matrix and the variance
    /// inequality `s2 > (4 mu^2 + 1) / (3 mu + 1)`.
    pub displayed_matrix_min_eig: Option<f64>,
    pub variance_inequality_holds: Option<bool>,
    pub violations: Vec<ConditionViolation>,
    pub passes: bool,
}

fn is_standard_null(g: &GaussianParams) -> bool {
    g.mu.abs() <= 1e-12 && (g.sigma2 - 1.0).abs() <= 1e-12
}

/// Checks the decidable regularity conditions on a grid over the box.
pub fn check_conditions(gamma0: &GaussianParams, bx: &ParamBox) -> Result<ConditionReport> {
    bx.validate()?;
    let theta0 = gamma0.natural();
    let standard = is_standard_null(gamma0);
    let mut report = ConditionReport {
        grid_points: CONDITION_GRID * CONDITION_GRID,
        gamma0_excluded: !bx.contains(theta0),
        cumulant_hessian_min_eig: f64::INFINITY,
        divergence_hessian_min_eig: f64::INFINITY,
        displayed_matrix_min_eig: standard.then_some(f64::INFINITY),
        variance_inequality_holds: standard.then_some(true),
        violations: Vec::new(),
        passes: false,
    };
    let last = (CONDITION_GRID - 1) as f64;
    for i in 0..CONDITION_GRID {
        for j in 0..CONDITION_GRID {
            let theta = bx.point(i as f64 / last, j as f64 / last);
            let p = GaussianParams::from_natural(theta)?;
            let mut flag = |check: &str, value: f64| {
                report.violations.push(ConditionViolation {
                    theta,
                    mu: p.mu,
                    sigma2: p.sigma2,
                    check: check.into(),
                    value,
                })
            };
            let e1 = min_eig(hess_a(theta));
            if e1 <= EIGEN_THRESHOLD {
                flag("cumulant_hessian", e1);
            }
            let e2 = min_eig(divergence_hessian(theta, theta0));
            if e2 <= EIGEN_THRESHOLD {
                flag("divergence_hessian", e2);
            }
            if standard {
                let e3 = min_eig(displayed_cross_matrix(theta));
                let slack = if 3.0 * p.mu + 1.0 > 0.0 {
                    p.sigma2 - (4.0 * p.mu * p.mu + 1.0) / (3.0 * p.mu + 1.0)
                } else {
                    f64::NEG_INFINITY
                };
                if !(slack > 0.0) {
                    flag("variance_inequality", slack);
                    report.variance_inequality_holds = Some(false);
                }
                report.displayed_matrix_min_eig = report.displayed_matrix_min_eig.map(|m| m.min(e3));
            }
            report.cumulant_hessian_min_eig = report.cumulant_hessian_min_eig.min(e1);
            report.divergence_hessian_min_eig = report.divergence_hessian_min_eig.min(e2);
        }
    }
    report.passes = report.gamma0_excluded && report.violations.is_empty();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g(mu: f64, s2: f64) -> GaussianParams {
        GaussianParams::new(mu, s2).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(gaussian_kl(&g(0.3, 2.0), &g(0.3, 2.0)), 0.0);
        assert_abs_diff_eq!(gaussian_kl(&g(0.0, 1.0), &g(1.0, 1.0)), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            gaussian_kl(&g(0.0, 1.0), &g(0.0, 4.0)),
            2f64.ln() + 0.125 - 0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(gaussian_rev(&g(0.0, 1.0), &g(1.0, 1.0)).1, 1.0, epsilon = 1e-15);
        assert_eq!(gaussian_rev(&g(1.0, 3.0), &g(1.0, 3.0)).1, 0.0);
        let s2 = 2.5;
        let want = (1.0 - 1.0 / s2) * (1.0 - 1.0 / s2) / 2.0;
        assert_abs_diff_eq!(gaussian_rev(&g(0.0, 1.0), &g(0.0, s2)).1, want, epsilon = 1e-15);
        assert!(GaussianParams::new(0.0, 0.0).is_err());
    }

    #[test]
    fn natural_round_trip() {
        let p = g(0.7, 1.8);
        let t = p.natural();
        let back = GaussianParams::from_natural(t).unwrap();
        assert_abs_diff_eq!(back.mu(), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(back.sigma2(), 1.8, epsilon = 1e-12);
        assert!(GaussianParams::from_natural([1.0, 0.0]).is_err());
    }

    #[test]
    fn generic_family_matches_closed_form() {
        let (a, b) = (g(0.4, 1.7), g(-0.2, 0.9));
        assert_abs_diff_eq!(Gaussian.kl(&a.natural(), &b.natural()), gaussian_kl(&a, &b), epsilon = 1e-12);
        let x = 0.37;
        assert_abs_diff_eq!(
            Gaussian.log_likelihood_ratio(&a.natural(), &b.natural(), x),
            a.log_pdf(x) - b.log_pdf(x),
            epsilon = 1e-12
        );
    }

    #[test]
    fn mean_variance_box_geometry() {
        let bx = ParamBox::mean_variance([0.5, 1.0], [1.5, 2.0]).unwrap();
        assert!(bx.contains(g(0.75, 1.75).natural()));
        assert!(bx.contains(g(1.0, 1.5).natural()));
        assert!(!bx.contains(g(0.0, 1.0).natural()));
        assert!(!bx.contains(g(1.2, 1.75).natural()));
        assert!(ParamBox::natural([0.0, -1.0], [1.0, 0.5]).is_err());
        assert!(ParamBox::mean_variance([1.0, 0.5], [1.0, 2.0]).is_err());
    }

    #[test]
    fn collapsed_box_is_plain_log_ratio() {
        let p1 = g(0.8, 1.6);
        let t = p1.natural();
        let bx = ParamBox::natural(t, t).unwrap();
        let xs = [0.1, -0.4, 2.2, 0.9, 1.3];
        let want: f64 = xs.iter().map(|&x| p1.log_pdf(x) - g(0.0, 1.0).log_pdf(x)).sum();
        let got = max_loglik_ratio(&xs, &g(0.0, 1.0), &bx).unwrap();
        assert_abs_diff_eq!(got.value, want, epsilon = 1e-12);
    }

    #[test]
    fn interior_maximum_is_mle_divergence() {
        // sample with mean 0.75 and variance 1.75 exactly
        let (m, v) = (0.75f64, 1.75f64);
        let xs = [m - v.sqrt(), m + v.sqrt()];
        let bx = ParamBox::mean_variance([0.5, 1.0], [1.5, 2.0]).unwrap();
        let g0 = g(0.0, 1.0);
        let r = max_loglik_ratio(&xs, &g0, &bx).unwrap();
        assert!(!r.boundary_active);
        assert!(r.grad_norm <= 1e-8);
        assert_abs_diff_eq!(r.value, 2.0 * gaussian_kl(&g(m, v), &g0), epsilon = 1e-12);
    }

    #[test]
    fn boundary_maximum_dominates_center() {
        let bx = ParamBox::mean_variance([0.5, 1.0], [1.5, 2.0]).unwrap();
        let g0 = g(0.0, 1.0);
        let xs = [-1.0, 0.2, 0.1, -0.3];
        let r = max_loglik_ratio(&xs, &g0, &bx).unwrap();
        assert!(r.boundary_active);
        let stats = GaussianSuffStats::from_sample(&xs);
        assert!(r.value >= stats.log_ratio(bx.center(), g0.natural()));
        for v in bx.vertices() {
            assert!(r.value >= stats.log_ratio(v, g0.natural()) - 1e-12);
        }
        assert!(r.grad_norm <= 1e-8);
    }

    #[test]
    fn exact_hessian_matches_finite_differences() {
        let t0 = g(0.2, 1.3).natural();
        let t = g(0.9, 1.7).natural();
        let d = |t: [f64; 2]| gaussian_kl(&GaussianParams::from_natural(t).unwrap(), &GaussianParams::from_natural(t0).unwrap());
        let h = 1e-4;
        let hess = divergence_hessian(t, t0);
        for i in 0..2 {
            for j in 0..2 {
                let mut pp = t;
                let mut pm = t;
                let mut mp = t;
                let mut mm = t;
                pp[i] += h;
                pp[j] += h;
                pm[i] += h;
                pm[j] -= h;
                mp[i] -= h;
                mp[j] += h;
                mm[i] -= h;
                mm[j] -= h;
                let fd = (d(pp) - d(pm) - d(mp) + d(mm)) / (4.0 * h * h);
                assert_abs_diff_eq!(hess[i][j], fd, epsilon = 1e-5 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn displayed_matrix_differs_from_exact() {
        let t0 = g(0.0, 1.0).natural();
        let t = g(0.8, 1.4).natural();
        let a = divergence_hessian(t, t0);
        let b = displayed_cross_matrix(t);
        assert_abs_diff_eq!(a[0][0], b[0][0], epsilon = 1e-12);
        assert_abs_diff_eq!(a[0][1], b[0][1], epsilon = 1e-12);
        assert!((a[1][1] - b[1][1]).abs() > 1e-3);
    }

    #[test]
    fn conditions_flag_box_with_null() {
        let bx = ParamBox::mean_variance([-0.5, 1.0], [0.8, 2.0]).unwrap();
        let r = check_conditions(&g(0.0, 1.0), &bx).unwrap();
        assert!(!r.gamma0_excluded);
        assert!(!r.passes);
    }

    #[test]
    fn inequality_boundary_is_a_violation() {
        // mu = 1, s2 = (4 + 1) / 4 = 1.25 exactly
        let bx = ParamBox::mean_variance([1.0, 1.0], [1.25, 1.25]).unwrap();
        let r = check_conditions(&g(0.0, 1.0), &bx).unwrap();
        assert_eq!(r.variance_inequality_holds, Some(false));
        assert!(r.violations.iter().any(|v| v.check == "variance_inequality"));
        assert!(!r.passes);
    }

    #[test]
    fn thresholds_for_gaussian() {
        let bx = ParamBox::mean_variance([0.5, 1.0], [1.5, 2.0]).unwrap();
        let g0 = g(0.0, 1.0);
        let th = gaussian_first_order_thresholds(&g0, &bx, 100, 0.01, 0.01).unwrap();
        // grid oracle over mean/variance
        let mut best_a = f64::INFINITY;
        let mut best_b = f64::INFINITY;
        for i in 0..=200 {
            for j in 0..=200 {
                let p = g(0.5 + 0.5 * i as f64 / 200.0, 1.5 + 0.5 * j as f64 / 200.0);
                best_a = best_a.min(gaussian_kl(&p, &g0));
                best_b = best_b.min(gaussian_kl(&g0, &p));
            }
        }
        assert!(th.reverse_divergence <= best_a + 1e-12);
        assert!(th.forward_divergence <= best_b + 1e-12);
        assert!(best_a - th.reverse_divergence < 1e-4);
        assert_abs_diff_eq!(th.a, 100.0 * (th.reverse_divergence - 0.01), epsilon = 1e-9);
    }
}
