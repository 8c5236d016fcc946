//! Dense helpers for the small KKT systems in the solvers.

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot falls below `1e-14` times the largest entry.
    pub fn solve(mut self, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = self.n;
        let scale = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return None;
        }
        let tiny = 1e-14 * scale;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&r, &s| {
                    self.a[r * n + col]
                        .abs()
                        .total_cmp(&self.a[s * n + col].abs())
                })
                .unwrap();
            if self.a[piv * n + col].abs() <= tiny {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    self.a.swap(piv * n + j, col * n + j);
                }
                b.swap(piv, col);
            }
            let d = self.a[col * n + col];
            for r in col + 1..n {
                let f = self.a[r * n + col] / d;
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    self.a[r * n + j] -= f * self.a[col * n + j];
                }
                b[r] -= f * b[col];
            }
        }
        for col in (0..n).rev() {
            let mut s = b[col];
            for j in col + 1..n {
                s -= self.a[col * n + j] * b[j];
            }
            b[col] = s / self.a[col * n + col];
        }
        Some(b)
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoting_system() {
        let mut m = Dense::zeros(3);
        let rows = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                *m.at(i, j) = *v;
            }
        }
        let x = m.solve(vec![5.0, 3.0, 4.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn singular_is_none() {
        let mut m = Dense::zeros(2);
        *m.at(0, 0) = 1.0;
        *m.at(0, 1) = 2.0;
        *m.at(1, 0) = 2.0;
        *m.at(1, 1) = 4.0;
        assert!(m.solve(vec![1.0, 2.0]).is_none());
    }
}
