//! Finite-alphabet probability primitives.
//!
//! Symbols are zero-based indices `0..d`. All logarithms are natural, so
//! divergences are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|sum(p) - 1|` accepted at construction.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A probability vector on the alphabet `{0, .., d-1}`, `d >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates and wraps `probs`. Nothing is renormalized.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "alphabet size must be at least 2, got {}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {p}, expected a finite nonnegative value"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Rescales nonnegative weights to sum to one. Only called on explicit request.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "cannot normalize weights with sum {sum}"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    /// Uniform distribution on `d` symbols.
    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(vec![1.0 / d as f64; d]).or_else(|_| Self::normalized(vec![1.0; d]))
    }

    /// Point mass on `symbol`.
    pub fn point_mass(d: usize, symbol: usize) -> Result<Self> {
        if symbol >= d {
            return Err(Error::SymbolOutOfRange { symbol, d });
        }
        let mut probs = vec![0.0; d];
        probs[symbol] = 1.0;
        Self::new(probs)
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// True when every entry is strictly positive.
    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Inverse-CDF sampling from a uniform draw in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // u landed in the rounding gap above the cumulative sum
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.probs
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// Histogram of an observed sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalType {
    counts: Vec<u64>,
    n: u64,
}

impl EmpiricalType {
    pub fn empty(d: usize) -> Self {
        Self {
            counts: vec![0; d],
            n: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let n = counts.iter().sum();
        Self { counts, n }
    }

    /// Batch histogram of `symbols`.
    pub fn from_symbols(d: usize, symbols: &[usize]) -> Result<Self> {
        let mut t = Self::empty(d);
        for &s in symbols {
            t.update(s)?;
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Records one observation of `symbol` in place.
    pub fn update(&mut self, symbol: usize) -> Result<()> {
        let d = self.counts.len();
        let slot = self
            .counts
            .get_mut(symbol)
            .ok_or(Error::SymbolOutOfRange { symbol, d })?;
        *slot += 1;
        self.n += 1;
        Ok(())
    }

    /// Returns a copy with one more observation of `symbol`.
    pub fn updated(&self, symbol: usize) -> Result<Self> {
        let mut next = self.clone();
        next.update(symbol)?;
        Ok(next)
    }

    /// `Q(i) = counts[i] / n`; `None` before the first observation.
    pub fn to_distribution(&self) -> Option<Distribution> {
        if self.n == 0 {
            return None;
        }
        let n = self.n as f64;
        let mut probs: Vec<f64> = self.counts.iter().map(|&c| c as f64 / n).collect();
        // push the rounding residue onto the largest entry so the sum check holds
        let sum: f64 = probs.iter().sum();
        let imax = probs
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > probs[best] { i } else { best });
        probs[imax] += 1.0 - sum;
        Distribution::new(probs).ok()
    }
}

fn check_pair(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    if let Some(i) = (0..p.dim()).find(|&i| p[i] > 0.0 && q[i] == 0.0) {
        return Err(Error::InfiniteDivergence {
            symbol: i,
            mass: p[i],
        });
    }
    Ok(())
}

/// `D(p||q) = sum_i p(i) log(p(i)/q(i))` with `0 log(0/.) = 0`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_pair(p, q)?;
    let d: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum();
    Ok(d.max(0.0))
}

/// `V(p||q) = Var_p[log p(X)/q(X)]`, computed as a centered second moment.
pub fn relative_entropy_variance(p: &Distribution, q: &Distribution) -> Result<f64> {
    let d = kl_divergence(p, q)?;
    let v: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| {
            let r = (pi / qi).ln() - d;
            pi * r * r
        })
        .sum();
    Ok(v.max(0.0))
}

/// Standard normal CDF.
pub fn gaussian_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of the standard normal CDF on `(0, 1)`.
///
/// Rational approximation (Acklam) polished with Halley steps against the
/// erfc-based CDF; absolute error is below 1e-12 on `[1e-12, 1 - 1e-12]`.
pub fn gaussian_quantile(z: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::OutOfRange(format!(
            "gaussian quantile needs z in (0, 1), got {z}"
        )));
    }
    if z == 0.5 {
        return Ok(0.0);
    }
    // Φ⁻¹(z) = −Φ⁻¹(1−z); work in the lower half for accuracy
    if z > 0.5 {
        return gaussian_quantile(1.0 - z).map(|x| -x);
    }
    let mut x = acklam(z);
    for _ in 0..3 {
        let err = gaussian_cdf(x) - z;
        let u = err / gaussian_pdf(x);
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() < 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}
