//! Properties of the simplex-constrained locality coder: solutions live
//! on the simplex, satisfy first-order optimality of the true objective,
//! and with no locality penalty are invariant to feature scale.

use mixclean::llc_solve;
use rand::{Rng, RngExt};
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

struct Problem {
    x: Vec<f64>,
    neighbors: Vec<Vec<f64>>,
    lambda: f64,
    sigma: f64,
}

fn random_problem(rng: &mut impl Rng) -> Problem {
    let dim = rng.random_range(2..=8);
    let k = rng.random_range(1..=12);
    let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let neighbors: Vec<Vec<f64>> = (0..k)
        .map(|_| x.iter().map(|v| v + rng.random_range(-1.5..1.5)).collect())
        .collect();
    let lambda = *[0.0, 0.1, 1.0].get(rng.random_range(0..3)).unwrap();
    let sigma = if rng.random_bool(0.5) { 0.5 } else { 1.0 };
    Problem { x, neighbors, lambda, sigma }
}

/// ‖x − Ba‖² + λ‖d ⊙ a‖², assembled from first principles.
fn objective(p: &Problem, a: &[f64]) -> f64 {
    let dim = p.x.len();
    let mut residual = 0.0;
    for r in 0..dim {
        let recon: f64 = p.neighbors.iter().zip(a).map(|(b, w)| b[r] * w).sum();
        residual += (p.x[r] - recon) * (p.x[r] - recon);
    }
    let penalty: f64 = p
        .neighbors
        .iter()
        .zip(a)
        .map(|(b, w)| {
            let dist: f64 =
                b.iter().zip(&p.x).map(|(bv, xv)| (bv - xv) * (bv - xv)).sum::<f64>().sqrt();
            let adaptor = (dist / p.sigma).exp();
            adaptor * adaptor * w * w
        })
        .sum();
    residual + p.lambda * penalty
}

/// Gradient of [`objective`] at `a`.
fn gradient(p: &Problem, a: &[f64]) -> Vec<f64> {
    let dim = p.x.len();
    let mut recon = vec![0.0; dim];
    for (b, w) in p.neighbors.iter().zip(a) {
        for r in 0..dim {
            recon[r] += b[r] * w;
        }
    }
    p.neighbors
        .iter()
        .zip(a)
        .map(|(b, w)| {
            let fit: f64 = (0..dim).map(|r| -2.0 * (p.x[r] - recon[r]) * b[r]).sum();
            let dist: f64 =
                b.iter().zip(&p.x).map(|(bv, xv)| (bv - xv) * (bv - xv)).sum::<f64>().sqrt();
            let adaptor = (dist / p.sigma).exp();
            fit + 2.0 * p.lambda * adaptor * adaptor * w
        })
        .collect()
}

fn problems(count: usize, seed: u64) -> Vec<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_problem(&mut rng)).collect()
}

#[test]
fn codes_stay_on_the_simplex() {
    for (idx, p) in problems(200, 71).iter().enumerate() {
        let refs: Vec<&[f64]> = p.neighbors.iter().map(Vec::as_slice).collect();
        let code = llc_solve(&p.x, &refs, p.lambda, p.sigma).expect("well-posed problem");
        let total: f64 = code.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "problem {idx}: weights sum to {total}");
        for (j, &w) in code.weights().iter().enumerate() {
            assert!(w >= -1e-12, "problem {idx}: weight {j} is {w}");
        }
    }
}

#[test]
fn solutions_are_first_order_optimal_over_the_simplex() {
    // A linear function on the simplex is minimized at a vertex, so
    // checking g·(e_j − a) ≥ −tol at every vertex certifies optimality
    // against every feasible direction, including 50 random ones.
    for (idx, p) in problems(200, 72).iter().enumerate() {
        let refs: Vec<&[f64]> = p.neighbors.iter().map(Vec::as_slice).collect();
        let code = llc_solve(&p.x, &refs, p.lambda, p.sigma).expect("well-posed problem");
        let a = code.weights();
        let g = gradient(p, a);
        let moved: f64 = g.iter().zip(a).map(|(gj, aj)| gj * aj).sum();
        let scale = 1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (j, gj) in g.iter().enumerate() {
            assert!(
                gj - moved >= -1e-6 * scale,
                "problem {idx}: descent direction toward vertex {j}: {}",
                gj - moved
            );
        }
    }
}

#[test]
fn zero_penalty_codes_ignore_feature_scale() {
    // Scaling every vector by s multiplies the attainable fit error by
    // s² exactly. Weights themselves can differ in flat valleys (ties
    // between neighbour subsets), so the invariant is the value.
    for (idx, p) in problems(100, 73).iter().enumerate() {
        let p = Problem {
            x: p.x.clone(),
            neighbors: p.neighbors.clone(),
            lambda: 0.0,
            sigma: p.sigma,
        };
        let refs: Vec<&[f64]> = p.neighbors.iter().map(Vec::as_slice).collect();
        let base = llc_solve(&p.x, &refs, 0.0, p.sigma).expect("well-posed problem");
        let base_objective = objective(&p, base.weights());
        for s in [0.1, 10.0] {
            let xs: Vec<f64> = p.x.iter().map(|v| v * s).collect();
            let ns: Vec<Vec<f64>> =
                p.neighbors.iter().map(|b| b.iter().map(|v| v * s).collect()).collect();
            let nrefs: Vec<&[f64]> = ns.iter().map(Vec::as_slice).collect();
            let scaled = llc_solve(&xs, &nrefs, 0.0, p.sigma).expect("well-posed problem");
            let sp = Problem { x: xs, neighbors: ns, lambda: 0.0, sigma: p.sigma };
            let gap = objective(&sp, scaled.weights()) / (s * s) - base_objective;
            assert!(
                gap.abs() < 1e-6 * (1.0 + base_objective),
                "problem {idx}, scale {s}: normalized objective moved by {gap}"
            );
        }
    }
}

#[test]
fn duplicated_neighbour_mass_is_split_without_changing_the_fit() {
    // With no locality penalty, duplicating a column cannot change the
    // achievable reconstruction; merged duplicate weights must reach the
    // same objective. (A positive penalty rewards splitting the mass, so
    // the property holds only at λ = 0.)
    for (idx, p) in problems(100, 74).iter().enumerate() {
        let p = Problem {
            x: p.x.clone(),
            neighbors: p.neighbors.clone(),
            lambda: 0.0,
            sigma: p.sigma,
        };
        let refs: Vec<&[f64]> = p.neighbors.iter().map(Vec::as_slice).collect();
        let base = llc_solve(&p.x, &refs, 0.0, p.sigma).expect("well-posed problem");
        let mut doubled = p.neighbors.clone();
        doubled.push(p.neighbors[0].clone());
        let drefs: Vec<&[f64]> = doubled.iter().map(Vec::as_slice).collect();
        let dup = llc_solve(&p.x, &drefs, 0.0, p.sigma).expect("well-posed problem");
        let dup_weights = dup.weights();
        let merged_first = dup_weights[0] + dup_weights[p.neighbors.len()];
        let mut merged = vec![merged_first];
        merged.extend_from_slice(&dup_weights[1..p.neighbors.len()]);
        let gap = objective(&p, &merged) - objective(&p, base.weights());
        assert!(
            gap.abs() < 1e-6,
            "problem {idx}: duplicating a column shifted the objective by {gap}"
        );
    }
}
