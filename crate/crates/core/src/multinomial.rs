//! Simplex vectors, label-count vectors, and multinomial mixture
//! probabilities, computed in log space throughout.

use crate::error::{Error, Result};
use rand::{Rng, RngExt};
use statrs::function::gamma::ln_gamma;

/// Tolerance for accepting a vector as a point on the probability simplex.
pub const PROB_TOL: f64 = 1e-9;

/// A point on the probability simplex: entries in [0, 1] summing to 1.
///
/// Construction accepts inputs that are off by at most [`PROB_TOL`] (per
/// entry and in the total) and renormalizes them, so downstream code can
/// rely on exact closure under summation up to floating-point rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    values: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidProbability("vector is empty".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidProbability(format!(
                    "entry {i} is {v}, expected a finite value"
                )));
            }
            if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&v) {
                return Err(Error::InvalidProbability(format!(
                    "entry {i} is {v}, outside [0, 1] beyond tolerance"
                )));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidProbability(format!(
                "entries sum to {sum}, expected 1 within {PROB_TOL:e}"
            )));
        }
        let mut values = values;
        for v in values.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        let clamped_sum: f64 = values.iter().sum();
        for v in values.iter_mut() {
            *v /= clamped_sum;
        }
        Ok(Self { values })
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution needs at least one category");
        Self { values: vec![1.0 / len as f64; len] }
    }

    pub fn one_hot(len: usize, index: usize) -> Self {
        assert!(index < len, "one-hot index {index} out of range for length {len}");
        let mut values = vec![0.0; len];
        values[index] = 1.0;
        Self { values }
    }

    /// One-hot blended with the uniform distribution:
    /// `(1 − smoothing) · onehot(index) + smoothing / len` per entry.
    pub fn smoothed_one_hot(len: usize, index: usize, smoothing: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&smoothing) {
            return Err(Error::InvalidArgument(format!(
                "smoothing {smoothing} outside [0, 1)"
            )));
        }
        if index >= len {
            return Err(Error::InvalidArgument(format!(
                "index {index} out of range for length {len}"
            )));
        }
        let mut values = vec![smoothing / len as f64; len];
        values[index] += 1.0 - smoothing;
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Index of the largest entry; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "length mismatch in l1_distance");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn linf_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "length mismatch in linf_distance");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Counts of observed labels per category, e.g. the tally of N noisy labels
/// for one sample. The number of trials is the sum of the counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountVector {
    counts: Vec<u64>,
    trials: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidArgument("count vector is empty".into()));
        }
        let trials = counts.iter().sum();
        Ok(Self { counts, trials })
    }

    pub fn class_count(&self) -> usize {
        self.counts.len()
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, index: usize) -> u64 {
        self.counts[index]
    }
}

/// Column-stochastic square matrix: column `c` is the label distribution
/// conditioned on true class `c`, i.e. `entry(r, c) = p(observed = r | true = c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    columns: Vec<ProbabilityVector>,
}

impl TransitionMatrix {
    pub fn from_columns(columns: Vec<ProbabilityVector>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument("transition matrix has no columns".into()));
        }
        let class_count = columns.len();
        for (c, col) in columns.iter().enumerate() {
            if col.len() != class_count {
                return Err(Error::DimensionMismatch(format!(
                    "column {c} has length {}, expected {class_count} (matrix must be square)",
                    col.len()
                )));
            }
        }
        Ok(Self { columns })
    }

    /// Identity blended with the uniform matrix, column by column:
    /// `(1 − smoothing) · I + (smoothing / C) · 𝟙𝟙ᵀ`. Diagonally dominant
    /// for any smoothing < 1.
    pub fn identity_smoothed(class_count: usize, smoothing: f64) -> Result<Self> {
        let columns = (0..class_count)
            .map(|c| ProbabilityVector::smoothed_one_hot(class_count, c, smoothing))
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(columns)
    }

    pub fn class_count(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, c: usize) -> &ProbabilityVector {
        &self.columns[c]
    }

    pub fn columns(&self) -> &[ProbabilityVector] {
        &self.columns
    }

    /// `p(observed = row | true = col)`.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.columns[col].get(row)
    }

    /// True when every column has its largest entry on the diagonal.
    pub fn is_diagonally_dominant(&self) -> bool {
        self.columns
            .iter()
            .enumerate()
            .all(|(c, col)| col.values().iter().all(|&v| v <= col.get(c)))
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!(
            self.class_count(),
            other.class_count(),
            "size mismatch in frobenius_distance"
        );
        let mut sq = 0.0;
        for (a, b) in self.columns.iter().zip(&other.columns) {
            for (x, y) in a.values().iter().zip(b.values()) {
                sq += (x - y) * (x - y);
            }
        }
        sq.sqrt()
    }
}

/// Parameters of one per-sample multinomial mixture: mixing weights `pi`
/// over true classes, transition matrix `rho`, and the number of label
/// draws `trials` each observation tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pi: ProbabilityVector,
    rho: TransitionMatrix,
    trials: u64,
}

impl MixtureParams {
    pub fn new(pi: ProbabilityVector, rho: TransitionMatrix, trials: u64) -> Result<Self> {
        if pi.len() != rho.class_count() {
            return Err(Error::DimensionMismatch(format!(
                "pi has {} entries but rho is {}x{}",
                pi.len(),
                rho.class_count(),
                rho.class_count()
            )));
        }
        if trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        Ok(Self { pi, rho, trials })
    }

    /// Diagonally dominant starting point built from a single observed
    /// label: smoothed one-hot mixing weights and a smoothed identity
    /// transition matrix.
    pub fn smoothed_from_label(
        class_count: usize,
        label: usize,
        trials: u64,
        smoothing: f64,
    ) -> Result<Self> {
        let pi = ProbabilityVector::smoothed_one_hot(class_count, label, smoothing)?;
        let rho = TransitionMatrix::identity_smoothed(class_count, smoothing)?;
        Self::new(pi, rho, trials)
    }

    pub fn class_count(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &ProbabilityVector {
        &self.pi
    }

    pub fn rho(&self) -> &TransitionMatrix {
        &self.rho
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    /// Marginal distribution of a single observed label:
    /// `m_r = Σ_c pi_c · rho_rc`.
    pub fn marginal(&self) -> ProbabilityVector {
        let class_count = self.class_count();
        let mut m = vec![0.0; class_count];
        for (c, col) in self.rho.columns().iter().enumerate() {
            let w = self.pi.get(c);
            for (mi, &p) in m.iter_mut().zip(col.values()) {
                *mi += w * p;
            }
        }
        ProbabilityVector::new(m)
            .expect("convex combination of simplex points stays on the simplex")
    }
}

/// `log Σ exp(v)` computed against the running maximum so that large
/// negative inputs do not underflow. Empty input yields −∞.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Log of the multinomial pmf `N! / ∏ x_c! · ∏ p_c^{x_c}`.
///
/// Categories with zero observed count contribute nothing regardless of
/// their probability; a zero-probability category with a positive count
/// makes the whole pmf zero, returned as −∞ rather than an error.
pub fn multinomial_log_pmf(counts: &CountVector, probs: &ProbabilityVector) -> Result<f64> {
    if counts.class_count() != probs.len() {
        return Err(Error::DimensionMismatch(format!(
            "counts have {} categories, probabilities have {}",
            counts.class_count(),
            probs.len()
        )));
    }
    let mut lp = ln_factorial(counts.trials());
    for (&x, &p) in counts.counts().iter().zip(probs.values()) {
        if x == 0 {
            continue;
        }
        if p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        lp += (x as f64) * p.ln() - ln_factorial(x);
    }
    Ok(lp)
}

/// Log-likelihood of one count vector under a mixture:
/// `log Σ_c pi_c · Mult(counts; trials, rho_·c)`.
pub fn mixture_log_likelihood(counts: &CountVector, params: &MixtureParams) -> Result<f64> {
    if counts.class_count() != params.class_count() {
        return Err(Error::DimensionMismatch(format!(
            "counts have {} categories, mixture has {}",
            counts.class_count(),
            params.class_count()
        )));
    }
    if counts.trials() != params.trials() {
        return Err(Error::DimensionMismatch(format!(
            "counts tally {} trials, mixture expects {}",
            counts.trials(),
            params.trials()
        )));
    }
    let terms = component_log_terms(counts, params)?;
    Ok(log_sum_exp(&terms))
}

/// Per-component joint log terms `log pi_c + log Mult(counts | rho_·c)`,
/// shared by the mixture likelihood and the EM responsibility update.
pub(crate) fn component_log_terms(
    counts: &CountVector,
    params: &MixtureParams,
) -> Result<Vec<f64>> {
    let mut terms = Vec::with_capacity(params.class_count());
    for c in 0..params.class_count() {
        let weight = params.pi().get(c);
        if weight == 0.0 {
            terms.push(f64::NEG_INFINITY);
            continue;
        }
        terms.push(weight.ln() + multinomial_log_pmf(counts, params.rho().column(c))?);
    }
    Ok(terms)
}

/// Draw a multinomial count vector by inverse-CDF sampling each trial.
pub fn sample_multinomial(
    probs: &ProbabilityVector,
    trials: u64,
    rng: &mut impl Rng,
) -> CountVector {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs.values() {
        acc += p;
        cdf.push(acc);
    }
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..trials {
        let u: f64 = rng.random();
        let idx = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        counts[idx] += 1;
    }
    CountVector {
        counts,
        trials,
    }
}
