//! I-projection of a type onto a linear family, and the reverse projection
//! of `p0`.
//!
//! `f(q) = min_{gamma in Gamma} sum_i q_i log(p0_i / gamma_i)`.
//!
//! Both problems are separable and strictly convex over the feasible
//! polytope. They are solved by sequential quadratic programming, each
//! subproblem handled by the active-set QP, and the answer is then polished
//! by a Newton iteration on the dual variables of the identified active set.
//! A warm start that already knows the active set skips the SQP phase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, max_abs, Dense};
use crate::qp::Qp;
use crate::simplex::{kl_divergence, relative_entropy_variance, Distribution, EmpiricalType};
use crate::uncertainty::LinearFamily;

/// Slack below which a constraint counts as active.
pub const ACTIVE_TOL: f64 = 1e-9;
pub const DEFAULT_KKT_TOL: f64 = 1e-9;

/// Separable convex objective `sum_i phi_i(gamma_i)`.
trait Separable {
    fn value(&self, gamma: &[f64]) -> f64;
    fn grad(&self, i: usize, g: f64) -> f64;
    fn hess(&self, i: usize, g: f64) -> f64;
    /// Solves `phi_i'(g) + s = 0`, returning `g` and `dg/ds`.
    fn invert(&self, i: usize, s: f64) -> Option<(f64, f64)>;
}

/// `-sum q_i log gamma_i` (the `p0` part of `f` is a constant).
struct Forward<'a> {
    q: &'a [f64],
}

impl Separable for Forward<'_> {
    fn value(&self, gamma: &[f64]) -> f64 {
        self.q
            .iter()
            .zip(gamma)
            .filter(|(q, _)| **q > 0.0)
            .map(|(q, g)| -q * g.ln())
            .sum()
    }

    fn grad(&self, i: usize, g: f64) -> f64 {
        -self.q[i] / g
    }

    fn hess(&self, i: usize, g: f64) -> f64 {
        self.q[i] / (g * g)
    }

    fn invert(&self, i: usize, s: f64) -> Option<(f64, f64)> {
        let q = self.q[i];
        if q > 0.0 && s > 0.0 {
            Some((q / s, -q / (s * s)))
        } else {
            None
        }
    }
}

/// `sum gamma_i log(gamma_i / p0_i)`.
struct Reverse<'a> {
    log_p0: &'a [f64],
}

impl Separable for Reverse<'_> {
    fn value(&self, gamma: &[f64]) -> f64 {
        gamma
            .iter()
            .zip(self.log_p0)
            .map(|(g, lp)| if *g > 0.0 { g * (g.ln() - lp) } else { 0.0 })
            .sum()
    }

    fn grad(&self, i: usize, g: f64) -> f64 {
        g.ln() - self.log_p0[i] + 1.0
    }

    fn hess(&self, _i: usize, g: f64) -> f64 {
        1.0 / g
    }

    fn invert(&self, i: usize, s: f64) -> Option<(f64, f64)> {
        let g = (self.log_p0[i] - 1.0 - s).exp();
        (g.is_finite() && g > 0.0).then_some((g, -g))
    }
}

/// Primal point with multipliers for the simplex row and every family row.
#[derive(Debug, Clone)]
struct Solved {
    gamma: Vec<f64>,
    lambda: f64,
    mu: Vec<f64>,
    iterations: usize,
}

/// Warm-start data carried between consecutive projections.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    active: Vec<usize>,
    lambda: f64,
    mu_active: Vec<f64>,
    valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub gamma_tilde: Distribution,
    pub f_value: f64,
    /// Multiplier of `sum gamma = 1`.
    pub lambda: f64,
    /// Multipliers of the user constraints.
    pub mu: Vec<f64>,
    /// Multipliers of the margin rows `gamma_i >= c0`.
    pub mu_positivity: Vec<f64>,
    /// Active user constraints.
    pub active_set: Vec<usize>,
    /// Symbols whose margin row is active.
    pub active_positivity: Vec<usize>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl ProjectionResult {
    /// Active rows in the combined numbering of [`LinearFamily::rows`].
    pub fn active_rows(&self) -> Vec<usize> {
        let l = self.mu.len();
        self.active_set
            .iter()
            .copied()
            .chain(self.active_positivity.iter().map(|i| l + i))
            .collect()
    }

    /// All multipliers in the combined row numbering.
    pub fn all_multipliers(&self) -> Vec<f64> {
        self.mu.iter().chain(&self.mu_positivity).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverseProjection {
    pub gamma_star: Distribution,
    /// `D(gamma* || p0)`.
    pub divergence: f64,
    /// `V(gamma* || p0)`.
    pub variance: f64,
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub mu_positivity: Vec<f64>,
    pub kkt_residual: f64,
}

/// Diagonal Jacobian of `q(i)` with respect to `gamma_tilde(i)` on the face
/// of a single active constraint, indexed by every symbol except the
/// distinguished one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianDiagonal {
    pub distinguished: usize,
    pub indices: Vec<usize>,
    pub diagonal: Vec<f64>,
}

/// Projection problem for a fixed `p0` and family.
#[derive(Debug, Clone)]
pub struct Projector {
    p0: Distribution,
    log_p0: Vec<f64>,
    family: LinearFamily,
    interior: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

impl Projector {
    pub fn new(p0: Distribution, family: LinearFamily) -> Result<Self> {
        if p0.dim() != family.dim() {
            return Err(Error::DimensionMismatch {
                expected: family.dim(),
                got: p0.dim(),
            });
        }
        if let Some(i) = p0.probs().iter().position(|&v| v <= 0.0) {
            return Err(Error::InfiniteDivergence { symbol: i, mass: 0.0 });
        }
        let interior = family.interior_point()?.into_vec();
        let log_p0 = p0.probs().iter().map(|v| v.ln()).collect();
        Ok(Self {
            p0,
            log_p0,
            family,
            interior,
            tol: DEFAULT_KKT_TOL,
            max_iter: 500,
        })
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Self {
        self.tol = tol;
        self.max_iter = max_iter;
        self
    }

    pub fn p0(&self) -> &Distribution {
        &self.p0
    }

    pub fn family(&self) -> &LinearFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.p0.dim()
    }

    /// The cached strictly feasible point used as the default start.
    pub fn interior_point(&self) -> Distribution {
        Distribution::new(self.interior.clone()).expect("interior point is a distribution")
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: d,
            });
        }
        Ok(())
    }

    /// Projects `q` starting from the interior point.
    pub fn project(&self, q: &Distribution) -> Result<ProjectionResult> {
        self.check_dim(q.dim())?;
        self.project_slice(q.probs(), None, &mut WarmStart::default())
    }

    /// Projects `q` starting the SQP phase from a chosen feasible point.
    pub fn project_from(&self, q: &Distribution, start: &Distribution) -> Result<ProjectionResult> {
        self.check_dim(q.dim())?;
        self.check_dim(start.dim())?;
        if self.family.max_violation(start.probs()) > 0.0 {
            return Err(Error::Infeasible("start point is outside the family".into()));
        }
        self.project_slice(q.probs(), Some(start.probs()), &mut WarmStart::default())
    }

    /// Projects `q`, reusing and refreshing `warm`.
    pub fn project_warm(&self, q: &Distribution, warm: &mut WarmStart) -> Result<ProjectionResult> {
        self.check_dim(q.dim())?;
        self.project_slice(q.probs(), None, warm)
    }

    pub fn f_of_type(&self, q: &Distribution) -> Result<f64> {
        Ok(self.project(q)?.f_value)
    }

    /// `f` at the empirical distribution of `t`.
    pub fn f_of_empirical(&self, t: &EmpiricalType, warm: &mut WarmStart) -> Result<f64> {
        self.check_dim(t.dim())?;
        if t.n() == 0 {
            return Err(Error::OutOfRange("empty type".into()));
        }
        Ok(self.project_empirical(t, warm)?.f_value)
    }

    /// Projects the empirical distribution `counts / n` of a nonempty type.
    pub fn project_empirical(&self, t: &EmpiricalType, warm: &mut WarmStart) -> Result<ProjectionResult> {
        self.check_dim(t.dim())?;
        let n = t.n() as f64;
        let q: Vec<f64> = t.counts().iter().map(|&c| c as f64 / n).collect();
        self.project_slice(&q, None, warm)
    }

    fn f_value(&self, q: &[f64], gamma: &[f64]) -> f64 {
        q.iter()
            .zip(gamma)
            .zip(&self.log_p0)
            .filter(|((q, _), _)| **q > 0.0)
            .map(|((q, g), lp)| q * (lp - g.ln()))
            .sum()
    }

    fn project_slice(
        &self,
        q: &[f64],
        start: Option<&[f64]>,
        warm: &mut WarmStart,
    ) -> Result<ProjectionResult> {
        let d = self.dim();
        let l = self.family.num_user();
        if q.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("bad type {q:?}")));
        }
        let solved = if start.is_none() && self.family.max_violation(q) <= 0.0 {
            Solved {
                gamma: q.to_vec(),
                lambda: 1.0,
                mu: vec![0.0; l + d],
                iterations: 0,
            }
        } else {
            let obj = Forward { q };
            let fast = if start.is_none() && warm.valid {
                self.newton_active(&obj, &warm.active, warm.lambda, &warm.mu_active)
            } else {
                None
            };
            match fast {
                Some(s) => s,
                None => self.solve(&obj, start.unwrap_or(&self.interior))?,
            }
        };
        let slack = self.family.violations(&solved.gamma);
        let active: Vec<usize> = (0..l + d).filter(|&k| slack[k] >= -ACTIVE_TOL).collect();
        *warm = WarmStart {
            lambda: solved.lambda,
            mu_active: active
                .iter()
                .filter(|&&k| k < l)
                .map(|&k| solved.mu[k])
                .collect(),
            active: active.clone(),
            valid: true,
        };
        let f_value = self.f_value(q, &solved.gamma);
        let mut result = ProjectionResult {
            gamma_tilde: Distribution::normalized(solved.gamma)?,
            f_value,
            lambda: solved.lambda,
            mu: solved.mu[..l].to_vec(),
            mu_positivity: solved.mu[l..].to_vec(),
            active_set: active.iter().copied().filter(|&k| k < l).collect(),
            active_positivity: active.iter().filter(|&&k| k >= l).map(|k| k - l).collect(),
            kkt_residual: 0.0,
            iterations: solved.iterations,
        };
        result.kkt_residual = self.kkt_residual_slice(q, &result);
        if result.kkt_residual > self.tol {
            return Err(Error::NonConvergence {
                iterations: result.iterations,
                residual: result.kkt_residual,
            });
        }
        Ok(result)
    }

    /// Largest violation of the optimality conditions of `result` for `q`.
    pub fn kkt_residual(&self, q: &Distribution, result: &ProjectionResult) -> Result<f64> {
        self.check_dim(q.dim())?;
        Ok(self.kkt_residual_slice(q.probs(), result))
    }

    fn kkt_residual_slice(&self, q: &[f64], r: &ProjectionResult) -> f64 {
        let g = r.gamma_tilde.probs();
        let grad: Vec<f64> = q
            .iter()
            .zip(g)
            .map(|(q, g)| if *q > 0.0 { -q / g } else { 0.0 })
            .collect();
        self.kkt_generic(&grad, g, r.lambda, &r.all_multipliers())
    }

    fn kkt_generic(&self, grad: &[f64], gamma: &[f64], lambda: f64, mu: &[f64]) -> f64 {
        let rows = self.family.rows();
        let slack = self.family.violations(gamma);
        let mut worst = (gamma.iter().sum::<f64>() - 1.0).abs();
        for i in 0..gamma.len() {
            let s: f64 = rows.iter().zip(mu).map(|(r, m)| m * r[i]).sum();
            worst = worst.max((grad[i] + lambda + s).abs());
        }
        for (m, v) in mu.iter().zip(&slack) {
            worst = worst.max(v.max(0.0)).max((-m).max(0.0)).max((m * v).abs());
        }
        worst
    }

    /// Computes `gamma* = argmin_{gamma in Gamma} D(gamma || p0)`.
    pub fn reverse_projection(&self) -> Result<ReverseProjection> {
        let d = self.dim();
        let l = self.family.num_user();
        let obj = Reverse {
            log_p0: &self.log_p0,
        };
        let solved = if self.family.max_violation(self.p0.probs()) <= 0.0 {
            Solved {
                gamma: self.p0.probs().to_vec(),
                lambda: -1.0,
                mu: vec![0.0; l + d],
                iterations: 0,
            }
        } else {
            self.solve(&obj, &self.interior)?
        };
        let grad: Vec<f64> = (0..d).map(|i| obj.grad(i, solved.gamma[i])).collect();
        let residual = self.kkt_generic(&grad, &solved.gamma, solved.lambda, &solved.mu);
        if residual > self.tol {
            return Err(Error::NonConvergence {
                iterations: solved.iterations,
                residual,
            });
        }
        let gamma_star = Distribution::normalized(solved.gamma)?;
        Ok(ReverseProjection {
            divergence: kl_divergence(&gamma_star, &self.p0)?,
            variance: relative_entropy_variance(&gamma_star, &self.p0)?,
            gamma_star,
            lambda: solved.lambda,
            mu: solved.mu[..l].to_vec(),
            mu_positivity: solved.mu[l..].to_vec(),
            kkt_residual: residual,
        })
    }

    /// SQP from a feasible start, then a dual Newton polish.
    fn solve(&self, obj: &dyn Separable, start: &[f64]) -> Result<Solved> {
        let d = self.dim();
        let rows = self.family.rows();
        let rhs = self.family.rhs();
        let m = rows.len();
        let eq = vec![vec![1.0; d]];
        let mut x = start.to_vec();
        let mut working: Vec<usize> = Vec::new();
        let mut lambda = 0.0;
        let mut mu = vec![0.0; m];
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            iterations += 1;
            let g: Vec<f64> = (0..d).map(|i| obj.grad(i, x[i])).collect();
            let mut h: Vec<f64> = (0..d).map(|i| obj.hess(i, x[i])).collect();
            let rho = 1e-6 * h.iter().cloned().fold(0.0, f64::max);
            for v in &mut h {
                *v += rho;
            }
            let b: Vec<f64> = rows
                .iter()
                .zip(rhs)
                .map(|(r, b)| (b - dot(r, &x)).max(0.0))
                .collect();
            let qp = Qp {
                h: &h,
                c: &g,
                eq: &eq,
                eq_rhs: &[0.0],
                ineq: rows,
                ineq_rhs: &b,
            };
            let sol = qp.solve(vec![0.0; d], &working).map_err(|e| {
                Error::NonConvergence {
                    iterations,
                    residual: if e == crate::qp::QpFailure::Singular { f64::NAN } else { f64::INFINITY },
                }
            })?;
            lambda = sol.nu[0];
            mu = sol.mu;
            working = sol.working;
            let step = sol.x;
            let size = max_abs(&step);
            if size <= 1e-15 {
                converged = true;
                break;
            }
            let f0 = obj.value(&x);
            let slope = dot(&g, &step);
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                let ft = obj.value(&trial);
                if ft <= f0 + 1e-4 * t * slope || t < 1e-12 {
                    x = trial;
                    break;
                }
                t *= 0.5;
            }
            if t == 1.0 && size <= 1e-13 {
                converged = true;
                break;
            }
        }
        let slack = self.family.violations(&x);
        let active: Vec<usize> = (0..m).filter(|&k| slack[k] >= -ACTIVE_TOL).collect();
        let l = self.family.num_user();
        let mu_active: Vec<f64> = active.iter().filter(|&&k| k < l).map(|&k| mu[k]).collect();
        if let Some(mut polished) = self.newton_active(obj, &active, lambda, &mu_active) {
            polished.iterations += iterations;
            return Ok(polished);
        }
        if !converged {
            let grad: Vec<f64> = (0..d).map(|i| obj.grad(i, x[i])).collect();
            return Err(Error::NonConvergence {
                iterations,
                residual: self.kkt_generic(&grad, &x, lambda, &mu),
            });
        }
        Ok(Solved {
            gamma: x,
            lambda,
            mu,
            iterations,
        })
    }

    /// Newton iteration on `(lambda, mu_A)` with the rows in `active` held
    /// tight. Margin rows pin their coordinate at `c0`. Returns `None` when
    /// the guess is not the optimal active set.
    fn newton_active(
        &self,
        obj: &dyn Separable,
        active: &[usize],
        lambda0: f64,
        mu0: &[f64],
    ) -> Option<Solved> {
        let d = self.dim();
        let l = self.family.num_user();
        let rows = self.family.rows();
        let c0 = self.family.c0();
        let mut pinned = vec![false; d];
        let mut user = Vec::new();
        for &k in active {
            if k >= l {
                pinned[k - l] = true;
            } else {
                user.push(k);
            }
        }
        if pinned.iter().all(|&p| p) || mu0.len() != user.len() {
            return None;
        }
        let m = 1 + user.len();
        let row = |a: usize, i: usize| if a == 0 { 1.0 } else { rows[user[a - 1]][i] };
        let target = |a: usize| if a == 0 { 1.0 } else { self.family.rhs()[user[a - 1]] };
        let eval = |z: &[f64]| -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
            let mut gamma = vec![0.0; d];
            let mut dg = vec![0.0; d];
            for i in 0..d {
                if pinned[i] {
                    gamma[i] = c0;
                } else {
                    let s: f64 = (0..m).map(|a| z[a] * row(a, i)).sum();
                    let (g, dgi) = obj.invert(i, s)?;
                    gamma[i] = g;
                    dg[i] = dgi;
                }
            }
            let r: Vec<f64> = (0..m)
                .map(|a| (0..d).map(|i| row(a, i) * gamma[i]).sum::<f64>() - target(a))
                .collect();
            Some((gamma, dg, r))
        };
        let mut z: Vec<f64> = std::iter::once(lambda0).chain(mu0.iter().copied()).collect();
        let (mut gamma, mut dg, mut r) = eval(&z)?;
        let mut norm = max_abs(&r);
        let mut iterations = 0;
        while norm > 1e-16 && iterations < 60 {
            iterations += 1;
            let mut jac = Dense::zeros(m);
            for a in 0..m {
                for b in 0..m {
                    *jac.at(a, b) = (0..d).map(|i| row(a, i) * row(b, i) * dg[i]).sum();
                }
            }
            let delta = jac.solve(r.iter().map(|v| -v).collect())?;
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-10 {
                let zt: Vec<f64> = z.iter().zip(&delta).map(|(a, b)| a + t * b).collect();
                if let Some((gt, dgt, rt)) = eval(&zt) {
                    let nt = max_abs(&rt);
                    if nt < norm {
                        z = zt;
                        gamma = gt;
                        dg = dgt;
                        r = rt;
                        norm = nt;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if norm > 1e-13 {
            return None;
        }
        let mut mu = vec![0.0; l + d];
        for (a, &k) in user.iter().enumerate() {
            mu[k] = z[a + 1];
        }
        for i in 0..d {
            if pinned[i] {
                let s: f64 = (0..m).map(|a| z[a] * row(a, i)).sum();
                mu[l + i] = obj.grad(i, c0) + s;
            }
        }
        let scale = 1.0 + max_abs(&z);
        if mu.iter().any(|&v| v < -1e-12 * scale) {
            return None;
        }
        if self.family.max_violation(&gamma) > 1e-12 {
            return None;
        }
        for v in &mut mu {
            *v = v.max(0.0);
        }
        Some(Solved {
            gamma,
            lambda: z[0],
            mu,
            iterations,
        })
    }

    /// Euclidean projection of an arbitrary vector onto the family.
    pub(crate) fn euclidean_project(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let h = vec![1.0; d];
        let c: Vec<f64> = y.iter().map(|v| -v).collect();
        let eq = vec![vec![1.0; d]];
        let qp = Qp {
            h: &h,
            c: &c,
            eq: &eq,
            eq_rhs: &[1.0],
            ineq: self.family.rows(),
            ineq_rhs: self.family.rhs(),
        };
        qp.solve(self.interior.clone(), &[])
            .map(|s| s.x)
            .map_err(|_| Error::NonConvergence {
                iterations: 0,
                residual: f64::NAN,
            })
    }

    /// Closed-form diagonal of `d q(i) / d gamma_tilde(i)` when exactly one
    /// constraint is active at the projection of `q`.
    pub fn jacobian_closed_form(
        &self,
        result: &ProjectionResult,
        q: &Distribution,
    ) -> Result<JacobianDiagonal> {
        self.check_dim(q.dim())?;
        let active = result.active_rows();
        let k = match active.as_slice() {
            [k] => *k,
            _ => {
                return Err(Error::Assumption(format!(
                    "closed form needs exactly one active constraint, found {}",
                    active.len()
                )))
            }
        };
        let w = &self.family.rows()[k];
        let xi = self.family.rhs()[k];
        let j = w
            .iter()
            .position(|&wj| (wj - xi).abs() > 1e-8)
            .ok_or_else(|| Error::Assumption("every coefficient equals the bound".into()))?;
        let g = result.gamma_tilde.probs();
        let lambda2 = (q[j] - g[j]) / (g[j] * (w[j] - xi));
        let indices: Vec<usize> = (0..self.dim()).filter(|&i| i != j).collect();
        let diagonal = indices.iter().map(|&i| 1.0 + lambda2 * (w[i] - xi)).collect();
        Ok(JacobianDiagonal {
            distinguished: j,
            indices,
            diagonal,
        })
    }

    /// Central-difference Jacobian of the stationarity map
    /// `gamma -> q`, `q(i) = gamma(i) (lambda + sum_k mu_k w_k(i))`, with the
    /// multipliers taken from the solver at `q`. Rows and columns follow
    /// [`JacobianDiagonal::indices`].
    pub fn numerical_jacobian(&self, q: &Distribution, h: f64) -> Result<Vec<Vec<f64>>> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::OutOfRange(format!("step {h}")));
        }
        let result = self.project(q)?;
        let closed = self.jacobian_closed_form(&result, q)?;
        let gamma = result.gamma_tilde.probs();
        if closed.indices.iter().any(|&i| gamma[i] <= h) {
            return Err(Error::OutOfRange(format!(
                "step {h} leaves the positive orthant"
            )));
        }
        let mult = result.all_multipliers();
        let rows = self.family.rows();
        let scale: Vec<f64> = (0..self.dim())
            .map(|i| result.lambda + rows.iter().zip(&mult).map(|(r, m)| m * r[i]).sum::<f64>())
            .collect();
        let preimage = |g: &[f64]| -> Vec<f64> { g.iter().zip(&scale).map(|(g, s)| g * s).collect() };
        let idx = &closed.indices;
        let mut jac = vec![vec![0.0; idx.len()]; idx.len()];
        for (b, &col) in idx.iter().enumerate() {
            let mut up = gamma.to_vec();
            let mut down = gamma.to_vec();
            up[col] += h;
            down[col] -= h;
            let (qu, qd) = (preimage(&up), preimage(&down));
            for (a, &rowi) in idx.iter().enumerate() {
                jac[a][b] = (qu[rowi] - qd[rowi]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Largest `|sum_j q(j) / g_j(q) * D_i g_j(q)|`, with `D_i` the central
    /// difference along the mass-preserving direction `e_i - e_r` and `r`
    /// the symbol with the largest mass.
    pub fn derivative_identity_residual(&self, q: &Distribution, h: f64) -> Result<f64> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::OutOfRange(format!("step {h}")));
        }
        let base = self.project(q)?;
        let g = base.gamma_tilde.probs();
        let r = (0..q.dim())
            .max_by(|&a, &b| q[a].total_cmp(&q[b]))
            .unwrap_or(0);
        let mut worst: f64 = 0.0;
        for i in (0..q.dim()).filter(|&i| i != r) {
            if q[i] < h || q[r] < h {
                return Err(Error::OutOfRange(format!("step {h} leaves the simplex")));
            }
            let shift = |sign: f64| -> Result<ProjectionResult> {
                let mut v = q.probs().to_vec();
                v[i] += sign * h;
                v[r] -= sign * h;
                let res = self.project(&Distribution::new(v)?)?;
                if res.active_rows() != base.active_rows() {
                    return Err(Error::OutOfRange(format!(
                        "step {h} changes the active set"
                    )));
                }
                Ok(res)
            };
            let (up, down) = (shift(1.0)?, shift(-1.0)?);
            let s: f64 = (0..q.dim())
                .map(|j| {
                    let dg = (up.gamma_tilde[j] - down.gamma_tilde[j]) / (2.0 * h);
                    q[j] / g[j] * dg
                })
                .sum();
            worst = worst.max(s.abs());
        }
        Ok(worst)
    }
}
