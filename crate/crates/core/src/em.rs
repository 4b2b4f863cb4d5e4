//! Closed-form EM for one sample's multinomial mixture, in
//! maximum-likelihood and Dirichlet-MAP variants, plus the sample-size
//! bounds that govern when the fit is identifiable.
//!
//! Given L observed count vectors with N trials each, the E-step computes
//! responsibilities `γ_lc ∝ π_c · Mult(ŷ_l; N, ρ_·c)` and the M-step has
//! closed-form updates:
//!
//! - MLE: `π_c = (1/L) Σ_l γ_lc`, `ρ_rc = Σ_l γ_lc ŷ_lr / (N Σ_l γ_lc)`
//! - MAP: `π_c = (Σ_l γ_lc + α_c − 1) / (L + Σα − C)` and
//!   `ρ_rc = (Σ_l γ_lc ŷ_lr + β_r − 1) / (N Σ_l γ_lc + Σβ − C)`
//!
//! The MLE update is exactly the MAP update under the flat prior
//! (all-ones α and β), and the implementation reuses that identity.

use crate::error::{Error, Result};
use crate::multinomial::{
    component_log_terms, log_sum_exp, CountVector, MixtureParams, ProbabilityVector,
    TransitionMatrix,
};
use statrs::function::gamma::ln_gamma;
use std::collections::HashMap;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_MIN_PROB_FLOOR: f64 = 1e-8;

/// Slack for the exact-objective monotonicity check; covers accumulated
/// rounding in the objective recomputation, nothing more.
const MONOTONICITY_SLACK: f64 = 1e-9;

/// Posterior responsibility of each mixture component for each observed
/// count vector: row `l`, entry `c` is `p(Y = c | ŷ_l)` under the current
/// parameters. Rows are points on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    gamma: Vec<Vec<f64>>,
}

impl Responsibilities {
    pub fn from_rows(gamma: Vec<Vec<f64>>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidArgument("responsibility matrix has no rows".into()));
        }
        let class_count = gamma[0].len();
        for (l, row) in gamma.iter().enumerate() {
            if row.len() != class_count {
                return Err(Error::DimensionMismatch(format!(
                    "responsibility row {l} has {} entries, expected {class_count}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for (c, &g) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&g) {
                    return Err(Error::InvalidProbability(format!(
                        "responsibility ({l}, {c}) is {g}, outside [0, 1]"
                    )));
                }
                sum += g;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidProbability(format!(
                    "responsibility row {l} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { gamma })
    }

    pub fn label_count(&self) -> usize {
        self.gamma.len()
    }

    pub fn class_count(&self) -> usize {
        self.gamma[0].len()
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.gamma[l]
    }

    pub fn get(&self, l: usize, c: usize) -> f64 {
        self.gamma[l][c]
    }
}

/// Dirichlet prior parameters: `alpha` on the mixing weights π and `beta`
/// on every transition column ρ_·c.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPriors {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl DirichletPriors {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::DimensionMismatch(format!(
                "alpha has {} entries, beta has {}",
                alpha.len(),
                beta.len()
            )));
        }
        if alpha.is_empty() {
            return Err(Error::InvalidArgument("priors are empty".into()));
        }
        for (name, values) in [("alpha", &alpha), ("beta", &beta)] {
            if let Some(&bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "{name} entries must be strictly positive and finite, found {bad}"
                )));
            }
        }
        Ok(Self { alpha, beta })
    }

    pub fn symmetric(class_count: usize, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![alpha; class_count], vec![beta; class_count])
    }

    /// Flat prior Dir(1, …, 1) on both π and the ρ columns; MAP under it
    /// coincides with maximum likelihood.
    pub fn flat(class_count: usize) -> Self {
        Self::symmetric(class_count, 1.0, 1.0)
            .expect("the flat prior is valid for any positive class count")
    }

    /// Strong symmetric strengths (α = 20 on π, β = 5 on the ρ columns)
    /// for fitting a single model on scarce label sets. The cleaning
    /// pipeline uses much weaker priors; see `PipelineConfig`.
    pub fn recommended(class_count: usize) -> Self {
        Self::symmetric(class_count, 20.0, 5.0)
            .expect("symmetric positive priors are always valid")
    }

    pub fn class_count(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmMode {
    Mle,
    Map,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub mode: EmMode,
    pub max_iters: usize,
    /// Convergence threshold on both ‖Δπ‖ and ‖Δρ‖ (Frobenius).
    pub tol: f64,
    /// Lower bound applied when a MAP numerator is non-positive, which can
    /// only happen with prior entries below 1.
    pub min_prob_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            mode: EmMode::Mle,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            min_prob_floor: DEFAULT_MIN_PROB_FLOOR,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive and finite, got {}",
                self.tol
            )));
        }
        if !(self.min_prob_floor > 0.0 && self.min_prob_floor < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "min_prob_floor must be in (0, 1), got {}",
                self.min_prob_floor
            )));
        }
        Ok(())
    }
}

/// Outcome of an EM run.
///
/// `objective_trace[0]` is the exact objective of the initial parameters;
/// entry `t` is the objective after iteration `t`. In MLE mode the
/// objective is `Σ_l log p(ŷ_l; π, ρ)`; in MAP mode the Dirichlet
/// log-densities of π and the ρ columns are added. The trace is
/// non-decreasing up to floating-point slack except on iterations where
/// the MAP floor fired (see `floored`).
#[derive(Debug, Clone)]
pub struct EmResult {
    pub params: MixtureParams,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// True when any M-step hit the non-positive-numerator floor.
    pub floored: bool,
}

/// Responsibilities `γ_lc ∝ π_c · Mult(ŷ_l; N, ρ_·c)`, rows normalized.
/// Computed in log space; each row has its maximum subtracted before
/// exponentiation.
pub fn e_step(labels: &[CountVector], params: &MixtureParams) -> Result<Responsibilities> {
    check_labels(labels, params)?;
    let mut gamma = Vec::with_capacity(labels.len());
    for (l, counts) in labels.iter().enumerate() {
        let terms = component_log_terms(counts, params)?;
        gamma.push(normalize_log_row(&terms, l)?);
    }
    Ok(Responsibilities { gamma })
}

/// Maximum-likelihood M-step. Components with zero total responsibility
/// get mixing weight 0 and keep their column from `previous_rho` (uniform
/// when no previous parameters are supplied).
pub fn m_step_mle(labels: &[CountVector], gamma: &Responsibilities) -> Result<MixtureParams> {
    m_step_mle_from(labels, gamma, None)
}

/// [`m_step_mle`] with explicit previous parameters for the
/// zero-responsibility fallback.
pub fn m_step_mle_from(
    labels: &[CountVector],
    gamma: &Responsibilities,
    previous_rho: Option<&TransitionMatrix>,
) -> Result<MixtureParams> {
    let priors = DirichletPriors::flat(gamma.class_count());
    let (params, _) = m_step_map_from(labels, gamma, &priors, DEFAULT_MIN_PROB_FLOOR, previous_rho)?;
    Ok(params)
}

/// MAP M-step under Dirichlet priors with the default numerator floor.
pub fn m_step_map(
    labels: &[CountVector],
    gamma: &Responsibilities,
    priors: &DirichletPriors,
) -> Result<MixtureParams> {
    let (params, _) = m_step_map_from(labels, gamma, priors, DEFAULT_MIN_PROB_FLOOR, None)?;
    Ok(params)
}

/// MAP M-step with explicit floor and previous parameters. The boolean
/// reports whether any numerator was floored; with all prior entries ≥ 1
/// it is always false.
pub fn m_step_map_from(
    labels: &[CountVector],
    gamma: &Responsibilities,
    priors: &DirichletPriors,
    min_prob_floor: f64,
    previous_rho: Option<&TransitionMatrix>,
) -> Result<(MixtureParams, bool)> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no labels to fit".into()));
    }
    if gamma.label_count() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} responsibility rows for {} labels",
            gamma.label_count(),
            labels.len()
        )));
    }
    let trials = labels[0].trials();
    let class_count = gamma.class_count();
    for counts in labels {
        if counts.trials() != trials || counts.class_count() != class_count {
            return Err(Error::DimensionMismatch(
                "labels must share one trial count and one class count".into(),
            ));
        }
    }
    let rows: Vec<(&CountVector, &[f64], f64)> = labels
        .iter()
        .zip(gamma.gamma.iter())
        .map(|(counts, row)| (counts, row.as_slice(), 1.0))
        .collect();
    weighted_m_step(&rows, labels.len() as f64, priors, min_prob_floor, previous_rho, trials)
}

/// Smallest per-sample label count that makes a C-class mixture
/// identifiable up to permutation: `2C − 1`.
pub fn identifiability_bound(class_count: usize) -> u64 {
    assert!(class_count >= 1, "class count must be at least 1");
    2 * class_count as u64 - 1
}

/// Identifiability bound for a mixture of K categorical distributions
/// over a finite support: `2⌈log_support(K)⌉ + 1`.
pub fn categorical_mixture_bound(components: usize, support_size: usize) -> u64 {
    assert!(components >= 1, "component count must be at least 1");
    assert!(support_size >= 2, "support must have at least 2 values");
    let mut power: u128 = 1;
    let mut ceil_log = 0u64;
    while power < components as u128 {
        power = power.saturating_mul(support_size as u128);
        ceil_log += 1;
    }
    2 * ceil_log + 1
}

/// Alternate [`e_step`] and the mode-appropriate M-step until both ‖Δπ‖
/// and ‖Δρ‖ fall below `config.tol` or `config.max_iters` is reached.
///
/// The objective is recomputed exactly from the updated parameters every
/// iteration (not the EM surrogate bound), so it must not decrease; a
/// decrease beyond rounding slack reports an internal-consistency error.
/// Iterations where the MAP numerator floor fired are exempt, since the
/// floor projection is outside the EM argmax.
pub fn run_em(
    labels: &[CountVector],
    init: MixtureParams,
    priors: &DirichletPriors,
    config: &EmConfig,
) -> Result<EmResult> {
    config.validate()?;
    check_labels(labels, &init)?;
    if priors.class_count() != init.class_count() {
        return Err(Error::DimensionMismatch(format!(
            "priors cover {} classes, parameters {}",
            priors.class_count(),
            init.class_count()
        )));
    }
    let flat;
    let effective_priors = match config.mode {
        EmMode::Map => priors,
        EmMode::Mle => {
            flat = DirichletPriors::flat(init.class_count());
            &flat
        }
    };

    let grouped = GroupedLabels::build(labels);
    let mut params = init;
    let (mut gamma, loglik) = grouped.e_pass(&params)?;
    let mut objective_trace = vec![loglik + prior_term(&params, effective_priors, config.mode)];
    let mut converged = false;
    let mut iterations = config.max_iters;
    let mut floored = false;

    for iter in 1..=config.max_iters {
        let rows: Vec<(&CountVector, &[f64], f64)> = grouped
            .distinct
            .iter()
            .zip(gamma.iter())
            .zip(grouped.weights.iter())
            .map(|((counts, row), &w)| (counts, row.as_slice(), w))
            .collect();
        let (next, floored_now) = weighted_m_step(
            &rows,
            grouped.total,
            effective_priors,
            config.min_prob_floor,
            Some(params.rho()),
            params.trials(),
        )?;
        floored |= floored_now;

        let pi_delta = l2_distance(params.pi().values(), next.pi().values());
        let rho_delta = params.rho().frobenius_distance(next.rho());

        let (next_gamma, next_loglik) = grouped.e_pass(&next)?;
        let objective = next_loglik + prior_term(&next, effective_priors, config.mode);
        let previous = *objective_trace.last().expect("trace starts non-empty");
        if !floored_now && objective + MONOTONICITY_SLACK < previous {
            return Err(Error::InternalConsistency(format!(
                "objective decreased from {previous} to {objective} at iteration {iter}"
            )));
        }
        objective_trace.push(objective);
        params = next;
        gamma = next_gamma;

        if pi_delta < config.tol && rho_delta < config.tol {
            converged = true;
            iterations = iter;
            break;
        }
    }

    Ok(EmResult { params, iterations, objective_trace, converged, floored })
}

fn check_labels(labels: &[CountVector], params: &MixtureParams) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no labels to fit".into()));
    }
    for counts in labels {
        if counts.class_count() != params.class_count() {
            return Err(Error::DimensionMismatch(format!(
                "label has {} categories, mixture has {}",
                counts.class_count(),
                params.class_count()
            )));
        }
        if counts.trials() != params.trials() {
            return Err(Error::DimensionMismatch(format!(
                "label tallies {} trials, mixture expects {}",
                counts.trials(),
                params.trials()
            )));
        }
    }
    Ok(())
}

fn normalize_log_row(terms: &[f64], label_index: usize) -> Result<Vec<f64>> {
    let normalizer = log_sum_exp(terms);
    if normalizer == f64::NEG_INFINITY {
        return Err(Error::DegenerateRow { index: label_index });
    }
    Ok(terms.iter().map(|t| (t - normalizer).exp()).collect())
}

/// Observed labels grouped by identical count vectors, so EM passes cost
/// O(distinct · C) instead of O(L · C). `weights` are multiplicities and
/// `first_index` maps each group back to an original label position for
/// error reporting.
struct GroupedLabels {
    distinct: Vec<CountVector>,
    weights: Vec<f64>,
    first_index: Vec<usize>,
    total: f64,
}

impl GroupedLabels {
    fn build(labels: &[CountVector]) -> Self {
        let mut lookup: HashMap<&CountVector, usize> = HashMap::new();
        let mut distinct: Vec<CountVector> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut first_index: Vec<usize> = Vec::new();
        for (l, counts) in labels.iter().enumerate() {
            match lookup.get(counts) {
                Some(&g) => weights[g] += 1.0,
                None => {
                    lookup.insert(counts, distinct.len());
                    distinct.push(counts.clone());
                    weights.push(1.0);
                    first_index.push(l);
                }
            }
        }
        let total = labels.len() as f64;
        Self { distinct, weights, first_index, total }
    }

    /// One log-space pass: responsibilities per distinct label plus the
    /// total log-likelihood `Σ_l log p(ŷ_l)` of the current parameters.
    fn e_pass(&self, params: &MixtureParams) -> Result<(Vec<Vec<f64>>, f64)> {
        let mut gamma = Vec::with_capacity(self.distinct.len());
        let mut loglik = 0.0;
        for (g, counts) in self.distinct.iter().enumerate() {
            let terms = component_log_terms(counts, params)?;
            let row_loglik = log_sum_exp(&terms);
            if row_loglik == f64::NEG_INFINITY {
                return Err(Error::DegenerateRow { index: self.first_index[g] });
            }
            gamma.push(terms.iter().map(|t| (t - row_loglik).exp()).collect());
            loglik += self.weights[g] * row_loglik;
        }
        Ok((gamma, loglik))
    }
}

/// Shared M-step over weighted responsibility rows. MLE is the flat-prior
/// case: the `α − 1` and `β − 1` terms contribute exact zeros, reducing
/// the update to the maximum-likelihood formulas bit for bit.
fn weighted_m_step(
    rows: &[(&CountVector, &[f64], f64)],
    total_labels: f64,
    priors: &DirichletPriors,
    min_prob_floor: f64,
    previous_rho: Option<&TransitionMatrix>,
    trials: u64,
) -> Result<(MixtureParams, bool)> {
    let class_count = priors.class_count();
    if let Some((counts, row, _)) = rows.first() {
        if counts.class_count() != class_count || row.len() != class_count {
            return Err(Error::DimensionMismatch(format!(
                "labels and responsibilities must both cover {class_count} classes"
            )));
        }
    }
    if let Some(prev) = previous_rho {
        if prev.class_count() != class_count {
            return Err(Error::DimensionMismatch(format!(
                "previous transition matrix is {}x{}, expected {class_count}x{class_count}",
                prev.class_count(),
                prev.class_count()
            )));
        }
    }

    let sum_alpha_excess: f64 = priors.alpha.iter().map(|a| a - 1.0).sum();
    let sum_beta_excess: f64 = priors.beta.iter().map(|b| b - 1.0).sum();
    let pi_denominator = total_labels + sum_alpha_excess;
    if pi_denominator <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "π update denominator L + Σα − C = {pi_denominator} is not positive; \
             the prior is too diffuse for this label count"
        )));
    }

    // γ column totals and γ-weighted count totals.
    let mut gamma_total = vec![0.0; class_count];
    let mut weighted_counts = vec![vec![0.0; class_count]; class_count];
    for &(counts, row, weight) in rows {
        for c in 0..class_count {
            let wg = weight * row[c];
            if wg == 0.0 {
                continue;
            }
            gamma_total[c] += wg;
            let column = &mut weighted_counts[c];
            for (r, &x) in counts.counts().iter().enumerate() {
                if x > 0 {
                    column[r] += wg * x as f64;
                }
            }
        }
    }

    let sub_uniform_alpha = priors.alpha.iter().any(|&a| a < 1.0);
    let sub_uniform_beta = priors.beta.iter().any(|&b| b < 1.0);

    let mut floored = false;
    let pi_raw: Vec<f64> = (0..class_count)
        .map(|c| (gamma_total[c] + (priors.alpha[c] - 1.0)) / pi_denominator)
        .collect();
    let pi = ProbabilityVector::new(apply_floor(
        pi_raw,
        min_prob_floor,
        sub_uniform_alpha,
        &mut floored,
    ))?;

    let mut columns = Vec::with_capacity(class_count);
    for c in 0..class_count {
        let rho_denominator = trials as f64 * gamma_total[c] + sum_beta_excess;
        if rho_denominator <= 0.0 {
            // No data mass and no prior excess for this component: keep the
            // previous column so the parameters remain a valid fixed point.
            let column = match previous_rho {
                Some(prev) => prev.column(c).clone(),
                None => ProbabilityVector::uniform(class_count),
            };
            columns.push(column);
            continue;
        }
        let raw: Vec<f64> = (0..class_count)
            .map(|r| (weighted_counts[c][r] + (priors.beta[r] - 1.0)) / rho_denominator)
            .collect();
        columns.push(ProbabilityVector::new(apply_floor(
            raw,
            min_prob_floor,
            sub_uniform_beta,
            &mut floored,
        ))?);
    }

    let params = MixtureParams::new(pi, TransitionMatrix::from_columns(columns)?, trials)?;
    Ok((params, floored))
}

/// Clamp non-positive entries to the floor and renormalize.
///
/// Only priors with an entry below 1 can push a numerator to or past zero
/// where the posterior density diverges; with every prior entry at least 1
/// (`sub_uniform` false) an exact zero is the legitimate weight of an
/// empty component and is kept as-is.
fn apply_floor(
    mut values: Vec<f64>,
    min_prob_floor: f64,
    sub_uniform: bool,
    floored: &mut bool,
) -> Vec<f64> {
    if !sub_uniform || values.iter().all(|&v| v > 0.0) {
        return values;
    }
    *floored = true;
    for v in values.iter_mut() {
        if *v <= 0.0 {
            *v = min_prob_floor;
        }
    }
    let sum: f64 = values.iter().sum();
    for v in values.iter_mut() {
        *v /= sum;
    }
    values
}

fn prior_term(params: &MixtureParams, priors: &DirichletPriors, mode: EmMode) -> f64 {
    match mode {
        EmMode::Mle => 0.0,
        EmMode::Map => {
            let mut term = dirichlet_log_density(params.pi().values(), &priors.alpha);
            for column in params.rho().columns() {
                term += dirichlet_log_density(column.values(), &priors.beta);
            }
            term
        }
    }
}

/// Log-density of Dir(alpha) at x. Entries with α_c = 1 contribute no
/// log(x) term even at x_c = 0, matching the density's limit there.
fn dirichlet_log_density(x: &[f64], alpha: &[f64]) -> f64 {
    let alpha_sum: f64 = alpha.iter().sum();
    let mut value = ln_gamma(alpha_sum);
    for (&xi, &ai) in x.iter().zip(alpha) {
        value -= ln_gamma(ai);
        if ai != 1.0 {
            value += (ai - 1.0) * xi.ln();
        }
    }
    value
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
