//! Primal active-set method for small strictly convex QPs with a diagonal
//! Hessian:
//!
//! ```text
//!     minimize   1/2 x' diag(h) x + c' x
//!     subject to E x  = e
//!                A x <= b
//! ```
//!
//! The caller supplies a feasible starting point.

use crate::linalg::{dot, max_abs, Dense};

pub(crate) struct Qp<'a> {
    pub h: &'a [f64],
    pub c: &'a [f64],
    pub eq: &'a [Vec<f64>],
    pub eq_rhs: &'a [f64],
    pub ineq: &'a [Vec<f64>],
    pub ineq_rhs: &'a [f64],
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub x: Vec<f64>,
    /// Multipliers of the equality rows.
    pub nu: Vec<f64>,
    /// Multipliers of the inequality rows, zero off the working set.
    pub mu: Vec<f64>,
    pub working: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum QpFailure {
    Singular,
    IterationLimit,
}

const STEP_EPS: f64 = 1e-14;

impl Qp<'_> {
    /// Runs the active-set iteration from the feasible point `x0`.
    /// `hint` seeds the working set; rows that make the system singular are skipped.
    pub fn solve(&self, x0: Vec<f64>, hint: &[usize]) -> Result<QpSolution, QpFailure> {
        let n = self.h.len();
        let m = self.ineq.len();
        debug_assert!(self
            .eq
            .iter()
            .zip(self.eq_rhs)
            .all(|(r, e)| (dot(r, &x0) - e).abs() <= 1e-9 * (1.0 + e.abs())));
        let mut x = x0;
        let mut working: Vec<usize> = Vec::new();
        for &k in hint {
            if k < m && !working.contains(&k) {
                let slack = self.ineq_rhs[k] - dot(&self.ineq[k], &x);
                if slack.abs() <= 1e-12 {
                    working.push(k);
                    if self.kkt_step(&x, &working).is_none() {
                        working.pop();
                    }
                }
            }
        }
        let budget = 50 * (n + m) + 100;
        for _ in 0..budget {
            let (p, mult) = self.kkt_step(&x, &working).ok_or(QpFailure::Singular)?;
            let neq = self.eq.len();
            if max_abs(&p) <= STEP_EPS * (1.0 + max_abs(&x)) {
                let mu_scale = 1.0 + max_abs(&mult);
                let mut drop: Option<(usize, f64)> = None;
                for slot in 0..working.len() {
                    let mu = mult[neq + slot];
                    if mu < -1e-12 * mu_scale {
                        match drop {
                            Some((_, best)) if mu >= best => {}
                            _ => drop = Some((slot, mu)),
                        }
                    }
                }
                match drop {
                    Some((slot, _)) => {
                        working.remove(slot);
                    }
                    None => {
                        let mut mu = vec![0.0; m];
                        for (slot, &k) in working.iter().enumerate() {
                            mu[k] = mult[neq + slot].max(0.0);
                        }
                        return Ok(QpSolution {
                            x,
                            nu: mult[..neq].to_vec(),
                            mu,
                            working,
                        });
                    }
                }
            } else {
                let mut alpha = 1.0;
                let mut blocking = None;
                for k in 0..m {
                    if working.contains(&k) {
                        continue;
                    }
                    let ap = dot(&self.ineq[k], &p);
                    if ap > 1e-15 {
                        let t = ((self.ineq_rhs[k] - dot(&self.ineq[k], &x)) / ap).max(0.0);
                        if t < alpha {
                            alpha = t;
                            blocking = Some(k);
                        }
                    }
                }
                for (xi, pi) in x.iter_mut().zip(&p) {
                    *xi += alpha * pi;
                }
                if let Some(k) = blocking {
                    working.push(k);
                }
            }
        }
        Err(QpFailure::IterationLimit)
    }

    /// Equality-constrained step from `x` with the rows in `working` held active.
    /// Returns the step and the multipliers (equalities first).
    fn kkt_step(&self, x: &[f64], working: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.h.len();
        let rows: Vec<&Vec<f64>> = self
            .eq
            .iter()
            .chain(working.iter().map(|&k| &self.ineq[k]))
            .collect();
        let size = n + rows.len();
        let mut kkt = Dense::zeros(size);
        let mut rhs = vec![0.0; size];
        for i in 0..n {
            *kkt.at(i, i) = self.h[i];
            rhs[i] = -(self.h[i] * x[i] + self.c[i]);
        }
        for (r, row) in rows.iter().enumerate() {
            for i in 0..n {
                *kkt.at(i, n + r) = row[i];
                *kkt.at(n + r, i) = row[i];
            }
        }
        let sol = kkt.solve(rhs)?;
        Some((sol[..n].to_vec(), sol[n..].to_vec()))
    }
}
