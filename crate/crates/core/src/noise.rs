//! Noisy-label distribution blending, label-set sampling, synthetic noise
//! injection, and the worked example of two distinct noise models with
//! identical observable marginals.
//!
//! A sample's noisy-label distribution blends its own mixture with its
//! neighbours' through the coding weights A:
//!
//! ```text
//! p̃(Ŷ|X=x_i) = μ p(Ŷ|X=x_i) + (1−μ) Σ_j A_ij p(Ŷ|X=x_j)
//! ```
//!
//! The full form keeps every multinomial component, giving a (K+1)·C
//! component mixture. The simplified form blends pseudo-clean posteriors
//! directly, giving a single categorical that samples in O(C).

use crate::error::{Error, Result};
use crate::multinomial::{
    sample_multinomial, CountVector, MixtureParams, ProbabilityVector, TransitionMatrix,
};
use crate::neighborhood::{CodingVector, FeatureMatrix};
use crate::{align, rng};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

/// Per-sample noisy-label distribution in one of its two forms.
#[derive(Debug, Clone)]
pub enum NoisyLabelDistribution {
    /// Simplified form: one categorical over classes.
    Categorical(ProbabilityVector),
    /// Full form: convex blend of per-sample multinomial mixtures. Each
    /// entry pairs an outer weight with a complete mixture; zero-weight
    /// entries are kept so the component count stays (K+1)·C.
    Mixture { components: Vec<(f64, MixtureParams)> },
}

impl NoisyLabelDistribution {
    pub fn categorical(probs: ProbabilityVector) -> Self {
        Self::Categorical(probs)
    }

    pub fn mixture(components: Vec<(f64, MixtureParams)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        let class_count = components[0].1.class_count();
        let mut total = 0.0;
        for (i, (weight, params)) in components.iter().enumerate() {
            if !weight.is_finite() || *weight < 0.0 {
                return Err(Error::InvalidProbability(format!(
                    "mixture weight {i} is {weight}, expected non-negative and finite"
                )));
            }
            if params.class_count() != class_count {
                return Err(Error::DimensionMismatch(format!(
                    "mixture entry {i} has {} classes, expected {class_count}",
                    params.class_count()
                )));
            }
            total += weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbability(format!(
                "mixture weights sum to {total}, expected 1 within 1e-9"
            )));
        }
        Ok(Self::Mixture { components })
    }

    pub fn class_count(&self) -> usize {
        match self {
            Self::Categorical(p) => p.len(),
            Self::Mixture { components } => components[0].1.class_count(),
        }
    }

    /// Number of elementary multinomial components: 1 for the categorical
    /// form, the summed per-entry class counts for the full form.
    pub fn component_count(&self) -> usize {
        match self {
            Self::Categorical(_) => 1,
            Self::Mixture { components } => {
                components.iter().map(|(_, p)| p.class_count()).sum()
            }
        }
    }

    /// Distribution of a single label draw.
    pub fn marginal(&self) -> ProbabilityVector {
        match self {
            Self::Categorical(p) => p.clone(),
            Self::Mixture { components } => {
                let class_count = self.class_count();
                let mut out = vec![0.0; class_count];
                for (weight, params) in components {
                    for (r, &m) in params.marginal().values().iter().enumerate() {
                        out[r] += weight * m;
                    }
                }
                let total: f64 = out.iter().sum();
                for v in &mut out {
                    *v /= total;
                }
                ProbabilityVector::new(out).expect("convex blend of simplex points")
            }
        }
    }
}

/// Blend a sample's mixture with its neighbours', keeping every
/// multinomial component: entry 0 carries weight μ, neighbour j carries
/// (1−μ)·A_ij.
pub fn approximate_noisy_distribution_full(
    self_params: &MixtureParams,
    neighbour_params: &[MixtureParams],
    weights: &CodingVector,
    mu: f64,
) -> Result<NoisyLabelDistribution> {
    check_mu(mu)?;
    if weights.len() != neighbour_params.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coding weights for {} neighbour mixtures",
            weights.len(),
            neighbour_params.len()
        )));
    }
    let mut components = Vec::with_capacity(neighbour_params.len() + 1);
    components.push((mu, self_params.clone()));
    for (j, params) in neighbour_params.iter().enumerate() {
        components.push(((1.0 - mu) * weights.get(j), params.clone()));
    }
    // Coding weights close to 1 within 1e-7; renormalize to meet the
    // tighter mixture tolerance.
    let total: f64 = components.iter().map(|(w, _)| *w).sum();
    for (w, _) in &mut components {
        *w /= total;
    }
    NoisyLabelDistribution::mixture(components)
}

/// Blend pseudo-clean posteriors into a single categorical:
/// μ·p_i + (1−μ)·Σ_j A_ij·p_j.
pub fn approximate_noisy_distribution_simplified(
    self_posterior: &ProbabilityVector,
    neighbour_posteriors: &[ProbabilityVector],
    weights: &CodingVector,
    mu: f64,
) -> Result<NoisyLabelDistribution> {
    check_mu(mu)?;
    if weights.len() != neighbour_posteriors.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coding weights for {} neighbour posteriors",
            weights.len(),
            neighbour_posteriors.len()
        )));
    }
    let class_count = self_posterior.len();
    let mut blended: Vec<f64> =
        self_posterior.values().iter().map(|&p| mu * p).collect();
    for (j, posterior) in neighbour_posteriors.iter().enumerate() {
        if posterior.len() != class_count {
            return Err(Error::DimensionMismatch(format!(
                "neighbour posterior {j} has {} classes, expected {class_count}",
                posterior.len()
            )));
        }
        let scale = (1.0 - mu) * weights.get(j);
        for (r, &p) in posterior.values().iter().enumerate() {
            blended[r] += scale * p;
        }
    }
    let total: f64 = blended.iter().sum();
    for v in &mut blended {
        *v /= total;
    }
    Ok(NoisyLabelDistribution::Categorical(ProbabilityVector::new(blended)?))
}

fn check_mu(mu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&mu) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("mu must lie in [0, 1], got {mu}")));
    }
    Ok(())
}

/// Draw `sets` count vectors of `trials` labels each. The full form picks
/// an elementary component per set (outer weight times its π entry) and
/// then draws all trials from that column; the categorical form draws
/// directly.
pub fn sample_label_sets(
    dist: &NoisyLabelDistribution,
    trials: u64,
    sets: usize,
    rng: &mut impl Rng,
) -> Result<Vec<CountVector>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial per label set".into()));
    }
    if sets == 0 {
        return Err(Error::InvalidArgument("need at least one label set".into()));
    }
    match dist {
        NoisyLabelDistribution::Categorical(p) => {
            Ok((0..sets).map(|_| sample_multinomial(p, trials, rng)).collect())
        }
        NoisyLabelDistribution::Mixture { components } => {
            let mut columns: Vec<(f64, &ProbabilityVector)> = Vec::new();
            for (weight, params) in components {
                for c in 0..params.class_count() {
                    columns.push((weight * params.pi().get(c), params.rho().column(c)));
                }
            }
            let out = (0..sets)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut chosen = columns.len() - 1;
                    for (idx, (w, _)) in columns.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            chosen = idx;
                            break;
                        }
                    }
                    sample_multinomial(columns[chosen].1, trials, rng)
                })
                .collect();
            Ok(out)
        }
    }
}

/// Synthetic corruption family applied to clean labels.
#[derive(Debug, Clone)]
pub enum NoiseKind {
    /// Each label flips to a uniformly random other class with the given
    /// rate.
    Symmetric,
    /// Each label flips to the next class modulo C with the given rate.
    Asymmetric,
    /// Feature-driven flips: scores = softmax(features · projection); the
    /// ⌈rate·M⌉ samples whose own-label score is lowest flip to their
    /// highest-scoring other class. A missing projection is drawn
    /// standard-normal from the seed.
    InstanceDependent { projection: Option<FeatureMatrix> },
}

/// Corruption kind, target flip rate, and rng seed.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    kind: NoiseKind,
    rate: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "noise rate must lie in [0, 1), got {rate}"
            )));
        }
        Ok(Self { kind, rate, seed })
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Corrupt clean labels according to `spec`. Deterministic given the
/// spec's seed; the output has the same length and class range as the
/// input.
pub fn inject_noise(
    clean_labels: &[usize],
    features: &FeatureMatrix,
    spec: &NoiseSpec,
) -> Result<Vec<usize>> {
    if clean_labels.is_empty() {
        return Err(Error::InvalidArgument("no labels to corrupt".into()));
    }
    if clean_labels.len() != features.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} feature rows",
            clean_labels.len(),
            features.rows()
        )));
    }
    match spec.kind() {
        NoiseKind::Symmetric | NoiseKind::Asymmetric => {
            // Class range inferred from the data: every class up to the
            // largest observed label participates.
            let class_count = clean_labels.iter().max().copied().unwrap_or(0) + 1;
            if class_count < 2 && spec.rate() > 0.0 {
                return Err(Error::InvalidArgument(
                    "cannot flip labels when only one class is present".into(),
                ));
            }
            let asymmetric = matches!(spec.kind(), NoiseKind::Asymmetric);
            let mut rng = rng::root(spec.seed());
            let out = clean_labels
                .iter()
                .map(|&label| {
                    if rng.random::<f64>() >= spec.rate() {
                        return label;
                    }
                    if asymmetric {
                        (label + 1) % class_count
                    } else {
                        // Uniform over the other C−1 classes.
                        let draw = rng.random_range(0..class_count - 1);
                        if draw >= label {
                            draw + 1
                        } else {
                            draw
                        }
                    }
                })
                .collect();
            Ok(out)
        }
        NoiseKind::InstanceDependent { projection } => {
            let generated;
            let projection = match projection {
                Some(p) => p,
                None => {
                    generated = random_projection(features.dim(), 3.max(max_class(clean_labels)), spec.seed());
                    &generated
                }
            };
            instance_dependent_noise(clean_labels, features, projection, spec.rate())
        }
    }
}

fn max_class(labels: &[usize]) -> usize {
    labels.iter().max().copied().unwrap_or(0) + 1
}

fn random_projection(dim: usize, class_count: usize, seed: u64) -> FeatureMatrix {
    let mut rng = rng::root(seed);
    let data: Vec<f64> =
        (0..dim * class_count).map(|_| rng.sample(StandardNormal)).collect();
    FeatureMatrix::new(dim, class_count, data).expect("normal draws are finite")
}

/// Rank samples by how poorly their features support their own label and
/// flip exactly the worst ⌈rate·M⌉ of them, each toward its
/// highest-scoring other class.
fn instance_dependent_noise(
    clean_labels: &[usize],
    features: &FeatureMatrix,
    projection: &FeatureMatrix,
    rate: f64,
) -> Result<Vec<usize>> {
    if projection.rows() != features.dim() {
        return Err(Error::DimensionMismatch(format!(
            "projection expects feature dimension {}, features have {}",
            projection.rows(),
            features.dim()
        )));
    }
    let class_count = projection.dim();
    if class_count < 2 && rate > 0.0 {
        return Err(Error::InvalidArgument(
            "instance-dependent noise needs at least two classes".into(),
        ));
    }
    for (i, &label) in clean_labels.iter().enumerate() {
        if label >= class_count {
            return Err(Error::InvalidArgument(format!(
                "label {label} at index {i} exceeds the projection's {class_count} classes"
            )));
        }
    }

    let count = clean_labels.len();
    let mut propensity = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for (i, &label) in clean_labels.iter().enumerate() {
        let scores = softmax_scores(features.row(i), projection);
        propensity.push(1.0 - scores[label]);
        let target = (0..class_count)
            .filter(|&c| c != label)
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .unwrap_or(label);
        targets.push(target);
    }

    // Small negative guard keeps float fuzz in rate·M from inflating the
    // ceiling by one.
    let flips = ((rate * count as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_unstable_by(|&a, &b| propensity[b].total_cmp(&propensity[a]).then(a.cmp(&b)));

    let mut out = clean_labels.to_vec();
    for &i in order.iter().take(flips.min(count)) {
        out[i] = targets[i];
    }
    Ok(out)
}

fn softmax_scores(row: &[f64], projection: &FeatureMatrix) -> Vec<f64> {
    let class_count = projection.dim();
    let mut logits = vec![0.0; class_count];
    for (r, &x) in row.iter().enumerate() {
        for (c, logit) in logits.iter_mut().enumerate() {
            *logit += x * projection.row(r)[c];
        }
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for logit in &mut logits {
        *logit = (*logit - max).exp();
        total += *logit;
    }
    for logit in &mut logits {
        *logit /= total;
    }
    logits
}

/// Two distinct class-prior/transition factorizations with identical
/// noisy-label marginals, demonstrating that a single label draw per
/// sample cannot identify the noise model.
#[derive(Debug, Clone)]
pub struct NonIdentifiabilityReport {
    pub first_prior: ProbabilityVector,
    pub first_transition: TransitionMatrix,
    pub second_prior: ProbabilityVector,
    pub second_transition: TransitionMatrix,
    pub first_marginal: ProbabilityVector,
    pub second_marginal: ProbabilityVector,
    /// ℓ∞ gap between the two marginals (zero up to rounding).
    pub marginal_gap: f64,
    /// Permutation-aligned distance between the two factorizations,
    /// showing they differ even after any class relabeling.
    pub parameter_distance: f64,
}

/// Build the worked counterexample: both factorizations multiply out to
/// the marginal (0.25, 0.45, 0.3).
pub fn nonidentifiability_demo() -> NonIdentifiabilityReport {
    let first_transition = TransitionMatrix::from_columns(vec![
        ProbabilityVector::new(vec![0.8, 0.15, 0.05]).unwrap(),
        ProbabilityVector::new(vec![0.1, 0.6, 0.3]).unwrap(),
        ProbabilityVector::new(vec![0.2, 0.3, 0.5]).unwrap(),
    ])
    .unwrap();
    let first_prior =
        ProbabilityVector::new(vec![2.0 / 11.0, 13.0 / 22.0, 5.0 / 22.0]).unwrap();
    let second_transition = TransitionMatrix::from_columns(vec![
        ProbabilityVector::new(vec![0.7, 0.1, 0.2]).unwrap(),
        ProbabilityVector::new(vec![0.2, 0.6, 0.2]).unwrap(),
        ProbabilityVector::new(vec![0.1, 0.1, 0.8]).unwrap(),
    ])
    .unwrap();
    let second_prior =
        ProbabilityVector::new(vec![2.0 / 15.0, 7.0 / 10.0, 1.0 / 6.0]).unwrap();

    let first =
        MixtureParams::new(first_prior.clone(), first_transition.clone(), 1).unwrap();
    let second =
        MixtureParams::new(second_prior.clone(), second_transition.clone(), 1).unwrap();
    let first_marginal = first.marginal();
    let second_marginal = second.marginal();
    let marginal_gap = first_marginal.linf_distance(&second_marginal);
    let (parameter_distance, _) =
        align::permutation_aligned_distance(&first, &second).expect("same shape by construction");

    NonIdentifiabilityReport {
        first_prior,
        first_transition,
        second_prior,
        second_transition,
        first_marginal,
        second_marginal,
        marginal_gap,
        parameter_distance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn params(pi: &[f64], cols: &[&[f64]], trials: u64) -> MixtureParams {
        let rho = TransitionMatrix::from_columns(
            cols.iter().map(|c| ProbabilityVector::new(c.to_vec()).unwrap()).collect(),
        )
        .unwrap();
        MixtureParams::new(ProbabilityVector::new(pi.to_vec()).unwrap(), rho, trials).unwrap()
    }

    fn example_params(shift: f64, trials: u64) -> MixtureParams {
        params(
            &[0.5 - shift, 0.3, 0.2 + shift],
            &[
                &[0.7, 0.2, 0.1],
                &[0.1 + shift, 0.8 - shift, 0.1],
                &[0.2, 0.2, 0.6],
            ],
            trials,
        )
    }

    #[test]
    fn full_blend_with_mu_one_is_the_self_mixture() {
        let own = example_params(0.0, 5);
        let other = example_params(0.1, 5);
        let weights = CodingVector::new(vec![0.4, 0.6]).unwrap();
        let dist = approximate_noisy_distribution_full(
            &own,
            &[other.clone(), other],
            &weights,
            1.0,
        )
        .unwrap();
        assert_eq!(dist.component_count(), 9);
        assert!(dist.marginal().linf_distance(&own.marginal()) < 1e-15);
        match &dist {
            NoisyLabelDistribution::Mixture { components } => {
                assert!((components[0].0 - 1.0).abs() < 1e-12);
                assert!(components[1].0.abs() < 1e-12);
            }
            _ => panic!("expected the full form"),
        }
    }

    #[test]
    fn full_blend_with_mu_zero_and_one_neighbour_is_that_neighbour() {
        let own = example_params(0.0, 5);
        let other = example_params(0.1, 5);
        let weights = CodingVector::new(vec![1.0]).unwrap();
        let dist =
            approximate_noisy_distribution_full(&own, std::slice::from_ref(&other), &weights, 0.0).unwrap();
        assert!(dist.marginal().linf_distance(&other.marginal()) < 1e-15);
    }

    #[test]
    fn full_blend_component_count_is_neighbours_plus_one_times_classes() {
        let own = example_params(0.0, 5);
        let neighbours = vec![example_params(0.05, 5); 3];
        let weights = CodingVector::new(vec![0.5, 0.25, 0.25]).unwrap();
        let dist =
            approximate_noisy_distribution_full(&own, &neighbours, &weights, 0.5).unwrap();
        assert_eq!(dist.component_count(), 4 * 3);
    }

    #[test]
    fn simplified_blend_hand_value() {
        let self_posterior = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let p1 = ProbabilityVector::new(vec![0.0, 1.0]).unwrap();
        let p2 = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let weights = CodingVector::new(vec![0.25, 0.75]).unwrap();
        let dist =
            approximate_noisy_distribution_simplified(&self_posterior, &[p1, p2], &weights, 0.5)
                .unwrap();
        let marginal = dist.marginal();
        assert!((marginal.get(0) - 0.875).abs() < 1e-15);
        assert!((marginal.get(1) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn simplified_blend_with_mu_one_returns_the_self_posterior() {
        let self_posterior = ProbabilityVector::new(vec![0.3, 0.7]).unwrap();
        let other = ProbabilityVector::new(vec![0.9, 0.1]).unwrap();
        let weights = CodingVector::new(vec![1.0]).unwrap();
        let dist =
            approximate_noisy_distribution_simplified(&self_posterior, &[other], &weights, 1.0)
                .unwrap();
        assert!(dist.marginal().linf_distance(&self_posterior) < 1e-15);
    }

    #[test]
    fn simplified_blend_of_identical_posteriors_is_that_posterior() {
        let q = ProbabilityVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        let weights = CodingVector::new(vec![0.6, 0.4]).unwrap();
        for mu in [0.0, 0.3, 0.8] {
            let dist = approximate_noisy_distribution_simplified(
                &q,
                &[q.clone(), q.clone()],
                &weights,
                mu,
            )
            .unwrap();
            assert!(dist.marginal().linf_distance(&q) < 1e-12);
        }
    }

    #[test]
    fn blend_rejects_mismatched_weights_and_mu() {
        let own = example_params(0.0, 5);
        let weights = CodingVector::new(vec![1.0]).unwrap();
        assert!(approximate_noisy_distribution_full(&own, &[], &weights, 0.5).is_err());
        assert!(
            approximate_noisy_distribution_full(&own, std::slice::from_ref(&own), &weights, 1.5).is_err()
        );
        let q = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        let short = ProbabilityVector::new(vec![1.0]).unwrap();
        assert!(
            approximate_noisy_distribution_simplified(&q, &[short], &weights, 0.5).is_err()
        );
    }

    #[test]
    fn both_forms_share_the_single_draw_marginal() {
        let own = example_params(0.0, 1);
        let neighbours = vec![example_params(0.1, 1), example_params(0.15, 1)];
        let weights = CodingVector::new(vec![0.7, 0.3]).unwrap();
        let mu = 0.4;
        let full =
            approximate_noisy_distribution_full(&own, &neighbours, &weights, mu).unwrap();
        let posteriors: Vec<ProbabilityVector> =
            neighbours.iter().map(MixtureParams::marginal).collect();
        let simplified = approximate_noisy_distribution_simplified(
            &own.marginal(),
            &posteriors,
            &weights,
            mu,
        )
        .unwrap();
        assert!(full.marginal().linf_distance(&simplified.marginal()) < 1e-12);
    }

    #[test]
    fn one_hot_categorical_sampling_is_deterministic() {
        let dist = NoisyLabelDistribution::categorical(ProbabilityVector::one_hot(4, 1));
        let mut rng = rng::root(3);
        let sets = sample_label_sets(&dist, 5, 3, &mut rng).unwrap();
        assert_eq!(sets.len(), 3);
        for set in sets {
            assert_eq!(set.counts(), &[0, 5, 0, 0]);
        }
    }

    #[test]
    fn pooled_categorical_frequencies_concentrate() {
        let p = [0.2, 0.3, 0.5];
        let dist = NoisyLabelDistribution::categorical(
            ProbabilityVector::new(p.to_vec()).unwrap(),
        );
        let (sets, trials) = (2000usize, 50u64);
        let mut rng = rng::root(11);
        let drawn = sample_label_sets(&dist, trials, sets, &mut rng).unwrap();
        let total = (sets as u64 * trials) as f64;
        for r in 0..3 {
            let freq = drawn.iter().map(|s| s.get(r)).sum::<u64>() as f64 / total;
            let sigma = (p[r] * (1.0 - p[r]) / total).sqrt();
            assert!(
                (freq - p[r]).abs() < 3.0 * sigma,
                "class {r}: frequency {freq} vs probability {}",
                p[r]
            );
        }
    }

    #[test]
    fn mixture_sampling_repeats_under_the_same_seed() {
        let dist = approximate_noisy_distribution_full(
            &example_params(0.0, 7),
            &[example_params(0.1, 7)],
            &CodingVector::new(vec![1.0]).unwrap(),
            0.5,
        )
        .unwrap();
        let a = sample_label_sets(&dist, 7, 20, &mut rng::root(5)).unwrap();
        let b = sample_label_sets(&dist, 7, 20, &mut rng::root(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_weight_components_are_never_drawn() {
        let safe = params(&[1.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]], 1);
        let poisoned = params(&[0.0, 1.0], &[&[1.0, 0.0], &[0.0, 1.0]], 1);
        let dist =
            NoisyLabelDistribution::mixture(vec![(1.0, safe), (0.0, poisoned)]).unwrap();
        let mut rng = rng::root(9);
        for set in sample_label_sets(&dist, 4, 500, &mut rng).unwrap() {
            assert_eq!(set.get(1), 0, "zero-weight component leaked into a draw");
        }
    }

    #[test]
    fn mixture_single_draws_match_the_flattened_marginal_by_chi_square() {
        let dist = approximate_noisy_distribution_full(
            &example_params(0.0, 1),
            &[example_params(0.12, 1), example_params(0.05, 1)],
            &CodingVector::new(vec![0.65, 0.35]).unwrap(),
            0.5,
        )
        .unwrap();
        let draws = 100_000usize;
        let mut rng = rng::root(17);
        let sets = sample_label_sets(&dist, 1, draws, &mut rng).unwrap();
        let mut observed = [0.0f64; 3];
        for set in &sets {
            for r in 0..3 {
                observed[r] += set.get(r) as f64;
            }
        }
        let marginal = dist.marginal();
        let statistic: f64 = (0..3)
            .map(|r| {
                let expected = draws as f64 * marginal.get(r);
                (observed[r] - expected).powi(2) / expected
            })
            .sum();
        let critical = ChiSquared::new(2.0).unwrap().inverse_cdf(0.999);
        assert!(
            statistic < critical,
            "goodness-of-fit statistic {statistic} exceeds the p=0.001 critical value {critical}"
        );
    }

    #[test]
    fn zero_rate_noise_is_the_identity() {
        let features = FeatureMatrix::new(4, 2, vec![0.5; 8]).unwrap();
        let labels = vec![0, 1, 2, 1];
        for kind in [
            NoiseKind::Symmetric,
            NoiseKind::Asymmetric,
            NoiseKind::InstanceDependent { projection: None },
        ] {
            let spec = NoiseSpec::new(kind, 0.0, 1).unwrap();
            assert_eq!(inject_noise(&labels, &features, &spec).unwrap(), labels);
        }
    }

    #[test]
    fn symmetric_noise_hits_the_target_rate() {
        let count = 100_000usize;
        let labels: Vec<usize> = (0..count).map(|i| i % 10).collect();
        let features = FeatureMatrix::new(count, 1, vec![0.0; count]).unwrap();
        let spec = NoiseSpec::new(NoiseKind::Symmetric, 0.5, 21).unwrap();
        let noisy = inject_noise(&labels, &features, &spec).unwrap();
        let flipped =
            labels.iter().zip(&noisy).filter(|(a, b)| a != b).count() as f64 / count as f64;
        assert!((flipped - 0.5).abs() < 0.01, "flip fraction {flipped}");
        assert!(noisy.iter().all(|&l| l < 10));
    }

    #[test]
    fn asymmetric_noise_only_flips_to_the_next_class() {
        let labels: Vec<usize> = (0..10_000).map(|i| i % 4).collect();
        let features = FeatureMatrix::new(labels.len(), 1, vec![0.0; labels.len()]).unwrap();
        let spec = NoiseSpec::new(NoiseKind::Asymmetric, 0.3, 8).unwrap();
        let noisy = inject_noise(&labels, &features, &spec).unwrap();
        let mut flips = 0usize;
        for (&a, &b) in labels.iter().zip(&noisy) {
            if a != b {
                assert_eq!(b, (a + 1) % 4);
                flips += 1;
            }
        }
        let fraction = flips as f64 / labels.len() as f64;
        assert!((fraction - 0.3).abs() < 0.02, "flip fraction {fraction}");
    }

    #[test]
    fn instance_dependent_noise_matches_the_rate_and_flips_the_least_supported() {
        let count = 500usize;
        let mut rng = rng::root(30);
        let data: Vec<f64> = (0..count * 3).map(|_| rng.sample(StandardNormal)).collect();
        let features = FeatureMatrix::new(count, 3, data).unwrap();
        let labels: Vec<usize> = (0..count).map(|i| i % 5).collect();
        let spec = NoiseSpec::new(
            NoiseKind::InstanceDependent { projection: None },
            0.2,
            30,
        )
        .unwrap();
        let noisy = inject_noise(&labels, &features, &spec).unwrap();
        let flipped = labels.iter().zip(&noisy).filter(|(a, b)| a != b).count();
        let rate = flipped as f64 / count as f64;
        assert!((rate - 0.2).abs() <= 0.02, "flip rate {rate}");
        assert!(noisy.iter().all(|&l| l < 5));
    }

    #[test]
    fn instance_dependent_noise_rejects_out_of_range_labels() {
        let features = FeatureMatrix::new(2, 2, vec![0.1; 4]).unwrap();
        let projection = FeatureMatrix::new(2, 3, vec![0.5; 6]).unwrap();
        let spec = NoiseSpec::new(
            NoiseKind::InstanceDependent { projection: Some(projection) },
            0.1,
            2,
        )
        .unwrap();
        assert!(inject_noise(&[0, 7], &features, &spec).is_err());
    }

    #[test]
    fn noise_spec_rejects_rates_outside_the_unit_interval() {
        assert!(NoiseSpec::new(NoiseKind::Symmetric, 1.0, 0).is_err());
        assert!(NoiseSpec::new(NoiseKind::Symmetric, -0.1, 0).is_err());
        assert!(NoiseSpec::new(NoiseKind::Symmetric, 0.99, 0).is_ok());
    }

    #[test]
    fn counterexample_marginals_agree_while_parameters_differ() {
        let report = nonidentifiability_demo();
        let expected = [0.25, 0.45, 0.3];
        for (r, &e) in expected.iter().enumerate() {
            assert!((report.first_marginal.get(r) - e).abs() < 1e-12);
            assert!((report.second_marginal.get(r) - e).abs() < 1e-12);
        }
        assert!(report.marginal_gap < 1e-12);
        assert!(
            report.parameter_distance > 0.1,
            "factorizations should stay distinct after alignment, distance {}",
            report.parameter_distance
        );
    }
}
