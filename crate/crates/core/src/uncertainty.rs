//! Uncertainty sets given as linear families on the simplex.
//!
//! A family holds `l` user constraints `w_k . gamma <= xi_k` together with
//! the positivity margin `gamma_i >= c0`. Internally the margin is folded
//! into the constraint list as rows `-e_i . gamma <= -c0`, placed after the
//! user rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::projection::Projector;
use crate::qp::Qp;
use crate::simplex::{kl_divergence, Distribution};

/// Membership tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-10;

pub const DEFAULT_C0: f64 = 1e-3;

fn default_c0() -> f64 {
    DEFAULT_C0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawFamily {
    w: Vec<Vec<f64>>,
    xi: Vec<f64>,
    #[serde(default = "default_c0")]
    c0: f64,
}

/// `Gamma = { gamma in simplex : W gamma <= xi, gamma_i >= c0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily", into = "RawFamily")]
pub struct LinearFamily {
    w: Vec<Vec<f64>>,
    xi: Vec<f64>,
    c0: f64,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl TryFrom<RawFamily> for LinearFamily {
    type Error = Error;

    fn try_from(raw: RawFamily) -> Result<Self> {
        Self::new(raw.w, raw.xi, raw.c0)
    }
}

impl From<LinearFamily> for RawFamily {
    fn from(f: LinearFamily) -> Self {
        RawFamily {
            w: f.w,
            xi: f.xi,
            c0: f.c0,
        }
    }
}

impl LinearFamily {
    pub fn new(w: Vec<Vec<f64>>, xi: Vec<f64>, c0: f64) -> Result<Self> {
        if w.len() != xi.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: xi.len(),
            });
        }
        let d = match w.first() {
            Some(row) => row.len(),
            None => {
                return Err(Error::InvalidDistribution(
                    "a linear family needs at least one constraint; use LinearFamily::positivity for the bare margin set".into(),
                ))
            }
        };
        Self::build(d, w, xi, c0)
    }

    /// The margin set `{gamma_i >= c0}` with no further constraints.
    pub fn positivity(d: usize, c0: f64) -> Result<Self> {
        Self::build(d, Vec::new(), Vec::new(), c0)
    }

    fn build(d: usize, w: Vec<Vec<f64>>, xi: Vec<f64>, c0: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::OutOfRange(format!("alphabet size {d} < 2")));
        }
        if let Some(row) = w.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if w.iter().flatten().chain(&xi).any(|v| !v.is_finite()) {
            return Err(Error::OutOfRange("non-finite constraint coefficient".into()));
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::OutOfRange(format!("margin c0 must be positive, got {c0}")));
        }
        let mut rows = w.clone();
        let mut rhs = xi.clone();
        for i in 0..d {
            let mut row = vec![0.0; d];
            row[i] = -1.0;
            rows.push(row);
            rhs.push(-c0);
        }
        Ok(Self {
            w,
            xi,
            c0,
            rows,
            rhs,
        })
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    /// Number of user constraints `l`.
    pub fn num_user(&self) -> usize {
        self.w.len()
    }

    pub fn w(&self) -> &[Vec<f64>] {
        &self.w
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// All constraint rows, user rows first then the `d` margin rows.
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// `row_k . gamma - rhs_k` for every row; nonpositive inside the set.
    pub fn violations(&self, gamma: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| dot(r, gamma) - b)
            .collect()
    }

    /// `max_k (F_k(gamma) - xi_k)` over every row including the margin rows.
    pub fn max_violation(&self, gamma: &[f64]) -> f64 {
        self.violations(gamma)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
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

    pub fn contains(&self, gamma: &Distribution) -> Result<bool> {
        self.check_dim(gamma.dim())?;
        Ok(self.max_violation(gamma.probs()) <= FEASIBILITY_TOL)
    }

    /// Largest achievable slack `t` with every unit-normalized row
    /// satisfied by `t`, and a point attaining nearly that slack.
    ///
    /// Solves `max t - delta/2 (|gamma - u|^2 + t^2)` by the active-set QP,
    /// shrinking `delta` until the slack guarantee holds.
    fn max_slack_point(&self) -> Result<(Vec<f64>, f64)> {
        let d = self.dim();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (r, &b) in self.rows.iter().zip(&self.rhs) {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                if b < 0.0 {
                    return Err(Error::Infeasible(format!("constraint 0 <= {b} cannot hold")));
                }
                continue;
            }
            let mut row: Vec<f64> = r.iter().map(|v| v / norm).collect();
            row.push(1.0);
            rows.push(row);
            rhs.push(b / norm);
        }
        let uniform = vec![1.0 / d as f64; d];
        let mut eq_row = vec![1.0; d];
        eq_row.push(0.0);
        let eq = vec![eq_row];
        let mut delta = 1e-2;
        loop {
            let mut h = vec![delta; d + 1];
            h[d] = delta;
            let mut c: Vec<f64> = uniform.iter().map(|u| -delta * u).collect();
            c.push(-1.0);
            // start at the uniform point with a slack small enough to be feasible
            let mut x0 = uniform.clone();
            let worst = rows
                .iter()
                .zip(&rhs)
                .map(|(r, b)| b - dot(&r[..d], &uniform))
                .fold(f64::INFINITY, f64::min);
            x0.push(worst.min(0.0) - 1.0);
            let qp = Qp {
                h: &h,
                c: &c,
                eq: &eq,
                eq_rhs: &[1.0],
                ineq: &rows,
                ineq_rhs: &rhs,
            };
            let sol = qp
                .solve(x0, &[])
                .map_err(|e| Error::Infeasible(format!("slack search failed: {e:?}")))?;
            let t = sol.x[d];
            if t < -delta {
                return Err(Error::Infeasible(format!(
                    "no point satisfies every constraint (best slack {t:e})"
                )));
            }
            if t >= 1e-6 || t >= delta {
                let mut gamma = sol.x;
                gamma.truncate(d);
                return Ok((gamma, t));
            }
            if delta < 1e-14 {
                return Err(Error::Infeasible(format!(
                    "feasible set has empty interior (slack {t:e})"
                )));
            }
            delta *= 1e-2;
        }
    }

    /// A deterministic point with every constraint slack by at least
    /// `min(1e-6, t_max / 2)`.
    pub fn interior_point(&self) -> Result<Distribution> {
        let (mut gamma, _) = self.max_slack_point()?;
        let sum: f64 = gamma.iter().sum();
        for g in &mut gamma {
            *g /= sum;
        }
        Distribution::new(gamma)
    }

    /// Runs every assumption check for testing `p0` against this set.
    pub fn validate(&self, p0: &Distribution) -> Result<AssumptionReport> {
        self.check_dim(p0.dim())?;
        let mut details = Vec::new();
        let p0_positive = p0.is_strictly_positive();
        if !p0_positive {
            details.push("p0 has a zero entry".to_string());
        }
        let p0_outside = !self.contains(p0)?;
        if !p0_outside {
            details.push("p0 satisfies every constraint, so p0 lies in the uncertainty set".into());
        }
        let interior = self.interior_point();
        let interior_nonempty = interior.is_ok();
        if let Err(e) = &interior {
            details.push(format!("feasibility search failed: {e}"));
        }
        let margin_ok = self.c0 * self.dim() as f64 <= 1.0;
        if !margin_ok {
            details.push(format!("margin c0 = {} exceeds 1/d", self.c0));
        }
        let mut report = AssumptionReport {
            p0_outside,
            p0_strictly_positive: p0_positive,
            interior_nonempty,
            margin_ok,
            gamma_prime: None,
            divergence_at_projection: None,
            active_at_projection: Vec::new(),
            single_active: None,
            distinguished_symbol: None,
            jacobian_diagonal: None,
            jacobian_full_rank: false,
            details,
        };
        if !(p0_positive && interior_nonempty) {
            return Ok(report);
        }
        let projector = Projector::new(p0.clone(), self.clone())?;
        let proj = match projector.project(p0) {
            Ok(r) => r,
            Err(e) => {
                report.details.push(format!("projection of p0 failed: {e}"));
                return Ok(report);
            }
        };
        report.divergence_at_projection = kl_divergence(p0, &proj.gamma_tilde).ok();
        report.active_at_projection = proj.active_rows();
        report.gamma_prime = Some(proj.gamma_tilde.clone());
        match report.active_at_projection.as_slice() {
            [k] => report.single_active = Some(*k),
            [] => report
                .details
                .push("no constraint is active at the projection of p0".into()),
            many => report.details.push(format!(
                "{} constraints are active at the projection of p0 ({many:?}); second-order outputs unavailable",
                many.len()
            )),
        }
        if report.single_active.is_some() {
            match projector.jacobian_closed_form(&proj, p0) {
                Ok(jac) => {
                    report.jacobian_full_rank = jac.diagonal.iter().all(|v| v.abs() > 1e-12);
                    if !report.jacobian_full_rank {
                        report.details.push("Jacobian has a zero diagonal entry".into());
                    }
                    report.distinguished_symbol = Some(jac.distinguished);
                    report.jacobian_diagonal = Some(jac.diagonal);
                }
                Err(e) => report.details.push(format!("Jacobian unavailable: {e}")),
            }
        }
        Ok(report)
    }
}

/// Outcome of [`LinearFamily::validate`].
///
/// Row indices refer to [`LinearFamily::rows`]: user constraints first, then
/// the margin rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub p0_outside: bool,
    pub p0_strictly_positive: bool,
    pub interior_nonempty: bool,
    pub margin_ok: bool,
    pub gamma_prime: Option<Distribution>,
    pub divergence_at_projection: Option<f64>,
    pub active_at_projection: Vec<usize>,
    pub single_active: Option<usize>,
    pub distinguished_symbol: Option<usize>,
    pub jacobian_diagonal: Option<Vec<f64>>,
    pub jacobian_full_rank: bool,
    pub details: Vec<String>,
}

impl AssumptionReport {
    /// True when the first- and second-order machinery both apply.
    pub fn all_hold(&self) -> bool {
        self.p0_outside
            && self.p0_strictly_positive
            && self.interior_nonempty
            && self.margin_ok
            && self.single_active.is_some()
            && self.jacobian_full_rank
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn running_family() -> LinearFamily {
        LinearFamily::new(vec![vec![1.0, 0.0, 0.0]], vec![0.3], 0.05).unwrap()
    }

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn membership() {
        let g = running_family();
        assert!(g.contains(&dist(&[0.3, 0.42, 0.28])).unwrap());
        assert!(!g.contains(&dist(&[0.5, 0.3, 0.2])).unwrap());
        assert!(g.contains(&dist(&[0.2, 0.4, 0.4])).unwrap());
        assert!(!g.contains(&dist(&[0.2, 0.78, 0.02])).unwrap());
        assert!(matches!(
            g.contains(&dist(&[0.5, 0.5])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn interior_point_has_slack() {
        let g = running_family();
        let p = g.interior_point().unwrap();
        assert!(p[0] < 0.3 - 1e-6);
        assert!(p.probs().iter().all(|&v| v > 0.05 + 1e-6), "{p:?}");
        assert_eq!(p, g.interior_point().unwrap());
    }

    #[test]
    fn bare_margin_set_gives_uniform() {
        let g = LinearFamily::positivity(4, 0.01).unwrap();
        let p = g.interior_point().unwrap();
        for &v in p.probs() {
            assert!((v - 0.25).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn infeasible_family() {
        let g = LinearFamily::new(
            vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]],
            vec![0.1, -0.2],
            0.01,
        )
        .unwrap();
        assert!(matches!(g.interior_point(), Err(Error::Infeasible(_))));
        let p0 = dist(&[0.5, 0.3, 0.2]);
        let r = g.validate(&p0).unwrap();
        assert!(!r.interior_nonempty);
        assert!(!r.all_hold());
    }

    #[test]
    fn validate_running_example() {
        let r = running_family().validate(&dist(&[0.5, 0.3, 0.2])).unwrap();
        assert!(r.p0_outside);
        assert_eq!(r.single_active, Some(0));
        assert_eq!(r.distinguished_symbol, Some(0));
        assert!(r.jacobian_full_rank);
        assert!(r.all_hold(), "{r:?}");
        let diag = r.jacobian_diagonal.unwrap();
        for v in diag {
            assert!((v - 1.0 / 1.4).abs() < 1e-9);
        }
        // deterministic
        let again = running_family().validate(&dist(&[0.5, 0.3, 0.2])).unwrap();
        assert_eq!(
            serde_json::to_string(&again).unwrap(),
            serde_json::to_string(&running_family().validate(&dist(&[0.5, 0.3, 0.2])).unwrap()).unwrap()
        );
    }

    #[test]
    fn validate_flags_p0_inside() {
        let g = LinearFamily::new(vec![vec![1.0, 0.0, 0.0]], vec![0.6], 0.05).unwrap();
        let r = g.validate(&dist(&[0.5, 0.3, 0.2])).unwrap();
        assert!(!r.p0_outside);
        assert!(!r.all_hold());
    }

    #[test]
    fn json_round_trip_and_default_margin() {
        let g: LinearFamily = serde_json::from_str(r#"{"w": [[1, 0, 0]], "xi": [0.3]}"#).unwrap();
        assert_eq!(g.c0(), DEFAULT_C0);
        let s = serde_json::to_string(&running_family()).unwrap();
        assert_eq!(s, r#"{"w":[[1.0,0.0,0.0]],"xi":[0.3],"c0":0.05}"#);
        let back: LinearFamily = serde_json::from_str(&s).unwrap();
        assert_eq!(back, running_family());
        assert!(serde_json::from_str::<LinearFamily>(r#"{"w": [[1, 0]], "xi": [0.3, 0.1]}"#).is_err());
    }

    proptest! {
        #[test]
        fn convex_combinations_stay_inside(
            a in proptest::collection::vec(0.0f64..1.0, 3),
            b in proptest::collection::vec(0.0f64..1.0, 3),
            lam in 0.0f64..=1.0,
        ) {
            let g = running_family();
            // map arbitrary weights into the set: gamma_1 in [0.05, 0.3], rest split
            let to_point = |v: &[f64]| {
                let g1 = 0.05 + 0.25 * v[0];
                let rest = 1.0 - g1 - 0.1;
                let s = v[1] + v[2] + 1e-9;
                dist(&[g1, 0.05 + rest * v[1] / s, 0.05 + rest * (v[2] + 1e-9) / s])
            };
            let pa = to_point(&a);
            let pb = to_point(&b);
            prop_assume!(g.contains(&pa).unwrap() && g.contains(&pb).unwrap());
            let mix: Vec<f64> = (0..3).map(|i| lam * pa[i] + (1.0 - lam) * pb[i]).collect();
            let mix = Distribution::normalized(mix).unwrap();
            prop_assert!(g.contains(&mix).unwrap());
        }
    }
}
