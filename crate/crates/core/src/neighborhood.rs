//! Exact k-nearest-neighbour search and locality-constrained linear
//! coding (LLC) restricted to the probability simplex.
//!
//! The coding weights for a sample x against its neighbour matrix B solve
//!
//! ```text
//! min_a ‖x − B a‖² + λ ‖d ⊙ a‖²   s.t.   𝟙ᵀa = 1, a ≥ 0
//! ```
//!
//! with locality adaptor `d_j = exp(‖x − b_j‖ / σ)`. Under the sum
//! constraint the residual term equals `aᵀ G a` with
//! `G_jk = (b_j − x)·(b_k − x)`, so the problem is a simplex-constrained
//! quadratic program solved here by an active-set method.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Iteration cap for the active-set solver.
const MAX_SOLVER_ITERS: usize = 10_000;
/// First-order optimality tolerance on the returned weights.
const KKT_TOL: f64 = 1e-7;
/// Ridge added to the Gram matrix so duplicate neighbours keep the
/// quadratic strictly convex without visibly moving the solution.
const GRAM_RIDGE: f64 = 1e-10;

/// Row-major matrix of M feature vectors of dimension d; entries must be
/// finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "feature matrix must be non-empty, got {rows}x{dim}"
            )));
        }
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot fill a {rows}x{dim} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "feature entry at row {}, column {} is not finite",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let count = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "feature row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
        }
        Self::new(count, dim, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// K nearest neighbours of one query row: distinct row indices (never the
/// query itself) with their Euclidean distances sorted non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }
}

/// Simplex-constrained coding weights over a neighbour set.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingVector {
    weights: Vec<f64>,
}

impl CodingVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("coding vector is empty".into()));
        }
        for (j, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidProbability(format!(
                    "coding weight {j} is {w}, expected non-negative and finite"
                )));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-7 {
            return Err(Error::InvalidProbability(format!(
                "coding weights sum to {sum}, expected 1 within 1e-7"
            )));
        }
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, j: usize) -> f64 {
        self.weights[j]
    }
}

/// Exact Euclidean K-nearest neighbours of `query_index` among all other
/// rows. Ties break toward the lower row index.
pub fn knn_search(features: &FeatureMatrix, query_index: usize, k: usize) -> Result<NeighborSet> {
    if query_index >= features.rows() {
        return Err(Error::InvalidArgument(format!(
            "query index {query_index} out of range for {} rows",
            features.rows()
        )));
    }
    if k >= features.rows() {
        return Err(Error::InvalidArgument(format!(
            "cannot take {k} neighbours from {} rows excluding the query",
            features.rows()
        )));
    }
    let candidates: Vec<usize> = (0..features.rows()).filter(|&i| i != query_index).collect();
    select_nearest(features, query_index, k, &candidates)
}

/// K-nearest restricted to `candidates` (distinct row indices; the query
/// is skipped if listed). Supports neighbour search over a subsample.
pub fn knn_search_among(
    features: &FeatureMatrix,
    query_index: usize,
    k: usize,
    candidates: &[usize],
) -> Result<NeighborSet> {
    if query_index >= features.rows() {
        return Err(Error::InvalidArgument(format!(
            "query index {query_index} out of range for {} rows",
            features.rows()
        )));
    }
    for &i in candidates {
        if i >= features.rows() {
            return Err(Error::InvalidArgument(format!(
                "candidate index {i} out of range for {} rows",
                features.rows()
            )));
        }
    }
    let filtered: Vec<usize> = candidates.iter().copied().filter(|&i| i != query_index).collect();
    if k > filtered.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot take {k} neighbours from {} candidates",
            filtered.len()
        )));
    }
    select_nearest(features, query_index, k, &filtered)
}

fn select_nearest(
    features: &FeatureMatrix,
    query_index: usize,
    k: usize,
    candidates: &[usize],
) -> Result<NeighborSet> {
    let query = features.row(query_index);
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .map(|&i| (squared_distance(query, features.row(i)), i))
        .collect();
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    Ok(NeighborSet {
        indices: scored.iter().map(|&(_, i)| i).collect(),
        distances: scored.iter().map(|&(d, _)| d.sqrt()).collect(),
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Minimize `‖x − B a‖² + λ‖d ⊙ a‖²` over the probability simplex, where
/// the columns of B are the rows of `neighbors`. Deterministic; the
/// result satisfies first-order optimality within 1e-7.
pub fn llc_solve(
    x: &[f64],
    neighbors: &[&[f64]],
    lambda: f64,
    sigma: f64,
) -> Result<CodingVector> {
    if neighbors.is_empty() {
        return Err(Error::InvalidArgument("no neighbour columns to code against".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be finite and > 0, got {sigma}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("query vector has non-finite entries".into()));
    }
    for (j, b) in neighbors.iter().enumerate() {
        if b.len() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "neighbour {j} has dimension {}, query has {}",
                b.len(),
                x.len()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "neighbour {j} has non-finite entries"
            )));
        }
    }

    let k = neighbors.len();
    // Centered Gram form: G_jk = (b_j − x)·(b_k − x), valid because the
    // weights sum to 1.
    let mut q = DMatrix::zeros(k, k);
    for j in 0..k {
        for l in j..k {
            let dot: f64 = neighbors[j]
                .iter()
                .zip(x)
                .zip(neighbors[l].iter().zip(x))
                .map(|((bj, xj), (bl, xl))| (bj - xj) * (bl - xl))
                .sum();
            q[(j, l)] = dot;
            q[(l, j)] = dot;
        }
    }
    if lambda > 0.0 {
        for j in 0..k {
            let dist = squared_distance(neighbors[j], x).sqrt();
            let adaptor = (dist / sigma).exp();
            q[(j, j)] += lambda * adaptor * adaptor;
        }
    }
    for j in 0..k {
        q[(j, j)] += GRAM_RIDGE;
    }

    let weights = active_set_simplex_qp(&q)?;
    CodingVector::new(weights)
}

/// [`knn_search`] composed with [`llc_solve`] for one sample.
pub fn similarity_row(
    features: &FeatureMatrix,
    i: usize,
    k: usize,
    lambda: f64,
    sigma: f64,
) -> Result<(NeighborSet, CodingVector)> {
    let neighbors = knn_search(features, i, k)?;
    let columns: Vec<&[f64]> = neighbors.indices().iter().map(|&j| features.row(j)).collect();
    let coding = llc_solve(features.row(i), &columns, lambda, sigma)?;
    Ok((neighbors, coding))
}

/// Minimize `aᵀ Q a` over the simplex by an active-set method: repeatedly
/// solve the equality-constrained problem on the free coordinates, clip
/// along the segment to the first bound that blocks, and release the most
/// negative bound multiplier until none remains.
fn active_set_simplex_qp(q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let k = q.nrows();
    let mut a = vec![1.0 / k as f64; k];
    let mut active = vec![false; k];

    for _ in 0..MAX_SOLVER_ITERS {
        let free: Vec<usize> = (0..k).filter(|&j| !active[j]).collect();
        let (target, nu) = equality_solve(q, &free)?;

        let blocking = free
            .iter()
            .copied()
            .filter(|&j| target[j] < -1e-12)
            .min_by(|&x, &y| {
                step_limit(a[x], target[x]).total_cmp(&step_limit(a[y], target[y]))
            });
        match blocking {
            Some(blocker) => {
                let step = step_limit(a[blocker], target[blocker]).clamp(0.0, 1.0);
                for j in 0..k {
                    a[j] += step * (target[j] - a[j]);
                    if a[j] < 0.0 {
                        a[j] = 0.0;
                    }
                }
                a[blocker] = 0.0;
                active[blocker] = true;
            }
            None => {
                for j in 0..k {
                    a[j] = target[j].max(0.0);
                }
                // Bound multiplier for an active j is g_j − ν; all must be
                // non-negative at the optimum.
                let gradient = gradient_of(q, &a);
                let worst = (0..k)
                    .filter(|&j| active[j])
                    .min_by(|&x, &y| (gradient[x] - nu).total_cmp(&(gradient[y] - nu)));
                match worst {
                    Some(j) if gradient[j] - nu < -1e-10 => {
                        active[j] = false;
                    }
                    _ => {
                        let residual = kkt_residual(q, &a);
                        if residual <= KKT_TOL {
                            return Ok(a);
                        }
                        return Err(Error::NoConvergence {
                            iterations: MAX_SOLVER_ITERS,
                            residual,
                        });
                    }
                }
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_SOLVER_ITERS,
        residual: kkt_residual(q, &a),
    })
}

/// Largest step in [0, 1] from `current` toward `target` that keeps the
/// coordinate non-negative.
fn step_limit(current: f64, target: f64) -> f64 {
    if current <= 0.0 {
        0.0
    } else {
        current / (current - target)
    }
}

/// Solve the stationarity system on the free coordinates:
/// `2 Q_FF a_F = ν 𝟙`, `Σ a_F = 1`; zeros elsewhere.
fn equality_solve(q: &DMatrix<f64>, free: &[usize]) -> Result<(Vec<f64>, f64)> {
    let nf = free.len();
    let mut kkt = DMatrix::zeros(nf + 1, nf + 1);
    for (fi, &i) in free.iter().enumerate() {
        for (fj, &j) in free.iter().enumerate() {
            kkt[(fi, fj)] = 2.0 * q[(i, j)];
        }
        kkt[(fi, nf)] = -1.0;
        kkt[(nf, fi)] = 1.0;
    }
    let mut rhs = DVector::zeros(nf + 1);
    rhs[nf] = 1.0;
    let solution = kkt.lu().solve(&rhs).ok_or_else(|| {
        Error::InternalConsistency(
            "singular stationarity system despite Gram regularization".into(),
        )
    })?;
    let mut target = vec![0.0; q.nrows()];
    for (fi, &i) in free.iter().enumerate() {
        target[i] = solution[fi];
    }
    Ok((target, solution[nf]))
}

fn gradient_of(q: &DMatrix<f64>, a: &[f64]) -> Vec<f64> {
    (0..q.nrows())
        .map(|j| 2.0 * (0..q.ncols()).map(|l| q[(j, l)] * a[l]).sum::<f64>())
        .collect()
}

/// First-order optimality residual on the simplex: feasibility violations
/// plus the spread of the gradient over the support (every supported
/// coordinate must share the minimal gradient value).
fn kkt_residual(q: &DMatrix<f64>, a: &[f64]) -> f64 {
    let gradient = gradient_of(q, a);
    let nu = gradient.iter().copied().fold(f64::INFINITY, f64::min);
    let sum_violation = (a.iter().sum::<f64>() - 1.0).abs();
    let negativity = a.iter().copied().fold(0.0f64, |acc, v| acc.max(-v));
    let support_spread = a
        .iter()
        .zip(&gradient)
        .filter(|(&w, _)| w > 1e-12)
        .map(|(_, &g)| (g - nu).abs())
        .fold(0.0f64, f64::max);
    sum_violation.max(negativity).max(support_spread)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn feature_matrix_validates_shape_and_finiteness() {
        assert!(FeatureMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(FeatureMatrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
        assert!(FeatureMatrix::new(0, 2, vec![]).is_err());
        assert!(FeatureMatrix::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn knn_on_collinear_points_picks_the_closer_side() {
        let features = fm(&[&[0.0], &[1.0], &[10.0]]);
        let found = knn_search(&features, 1, 1).unwrap();
        assert_eq!(found.indices(), &[0]);
        assert!((found.distances()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn knn_reports_a_duplicate_of_the_query_first_at_distance_zero() {
        let features = fm(&[&[2.0, 3.0], &[5.0, 1.0], &[2.0, 3.0], &[2.1, 3.0]]);
        let found = knn_search(&features, 0, 2).unwrap();
        assert_eq!(found.indices(), &[2, 3]);
        assert_eq!(found.distances()[0], 0.0);
    }

    #[test]
    fn knn_breaks_ties_toward_the_lower_index() {
        let features = fm(&[&[0.0], &[1.0], &[-1.0], &[1.0]]);
        let found = knn_search(&features, 0, 2).unwrap();
        assert_eq!(found.indices(), &[1, 2], "equidistant rows must resolve by index");
    }

    #[test]
    fn knn_rejects_k_of_the_full_row_count() {
        let features = fm(&[&[0.0], &[1.0]]);
        assert!(knn_search(&features, 0, 2).is_err());
        assert!(knn_search(&features, 5, 1).is_err());
    }

    #[test]
    fn knn_among_candidates_respects_the_candidate_set() {
        let features = fm(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let found = knn_search_among(&features, 0, 2, &[2, 3]).unwrap();
        assert_eq!(found.indices(), &[2, 3]);
        // The query in the candidate list is skipped, shrinking the pool.
        assert!(knn_search_among(&features, 0, 2, &[0, 1]).is_err());
    }

    #[test]
    fn llc_puts_all_weight_on_an_exactly_matching_neighbour() {
        let x = [1.0, 2.0];
        let b0 = [4.0, 0.0];
        let b1 = [1.0, 2.0];
        let b2 = [0.0, 7.0];
        let coding = llc_solve(&x, &[&b0, &b1, &b2], 0.0, 1.0).unwrap();
        assert!(coding.get(1) > 1.0 - 1e-6, "weights were {:?}", coding.weights());
        assert!(coding.get(0) < 1e-6);
        assert!(coding.get(2) < 1e-6);
    }

    #[test]
    fn llc_midpoint_of_two_neighbours_splits_evenly() {
        let x = [0.5, 0.5];
        let b0 = [0.0, 0.0];
        let b1 = [1.0, 1.0];
        let coding = llc_solve(&x, &[&b0, &b1], 0.0, 1.0).unwrap();
        assert!((coding.get(0) - 0.5).abs() < 1e-9, "weights were {:?}", coding.weights());
        assert!((coding.get(1) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn llc_with_a_single_neighbour_returns_weight_one() {
        let coding = llc_solve(&[3.0, 1.0], &[&[0.0, 0.0]], 0.0, 1.0).unwrap();
        assert_eq!(coding.weights(), &[1.0]);
    }

    #[test]
    fn llc_handles_duplicate_neighbour_columns() {
        let x = [1.0, 0.0];
        let b = [0.0, 0.0];
        let coding = llc_solve(&x, &[&b, &b, &b], 0.0, 1.0).unwrap();
        let sum: f64 = coding.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-7);
        assert!(coding.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn llc_rejects_invalid_inputs() {
        let x = [1.0, 0.0];
        let b = [0.0, f64::NAN];
        assert!(llc_solve(&x, &[&b], 0.0, 1.0).is_err());
        let b = [0.0];
        assert!(llc_solve(&x, &[&b], 0.0, 1.0).is_err());
        let b = [0.0, 1.0];
        assert!(llc_solve(&x, &[&b], -1.0, 1.0).is_err());
        assert!(llc_solve(&x, &[&b], 0.0, 0.0).is_err());
        assert!(llc_solve(&[f64::NAN, 0.0], &[&b], 0.0, 1.0).is_err());
        assert!(llc_solve(&x, &[], 0.0, 1.0).is_err());
    }

    #[test]
    fn locality_penalty_shifts_weight_toward_nearer_neighbours() {
        // x sits at the midpoint geometrically, but the adaptor penalizes
        // the farther column once lambda > 0 and the columns differ in
        // distance.
        let x = [0.0, 0.0];
        let near = [0.5, 0.0];
        let far = [-2.0, 0.0];
        let unpenalized = llc_solve(&x, &[&near, &far], 0.0, 1.0).unwrap();
        let penalized = llc_solve(&x, &[&near, &far], 5.0, 1.0).unwrap();
        assert!(
            penalized.get(0) > unpenalized.get(0),
            "lambda should favour the near column: {:?} vs {:?}",
            penalized.weights(),
            unpenalized.weights()
        );
    }

    #[test]
    fn similarity_row_composes_knn_and_llc() {
        let features = fm(&[
            &[0.0, 0.0],
            &[0.1, 0.0],
            &[0.0, 0.1],
            &[5.0, 5.0],
            &[6.0, 5.0],
        ]);
        let (neighbors, coding) = similarity_row(&features, 0, 2, 0.0, 1.0).unwrap();
        assert_eq!(neighbors.indices(), &[1, 2]);
        let columns: Vec<&[f64]> = neighbors.indices().iter().map(|&j| features.row(j)).collect();
        let direct = llc_solve(features.row(0), &columns, 0.0, 1.0).unwrap();
        assert_eq!(coding.weights(), direct.weights());
        let sum: f64 = coding.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-7);
    }

    #[test]
    fn similarity_row_inside_a_tight_cluster_concentrates_weight() {
        let features = fm(&[
            &[0.0, 0.0],
            &[0.01, 0.0],
            &[0.0, 0.02],
            &[4.0, 4.0],
            &[4.1, 3.9],
            &[3.9, 4.2],
        ]);
        let (_, coding) = similarity_row(&features, 0, 4, 0.0, 1.0).unwrap();
        let max = coding.weights().iter().cloned().fold(0.0f64, f64::max);
        assert!(max > 0.25, "expected concentration above 1/K, weights {:?}", coding.weights());
    }

    #[test]
    fn coding_vector_validates_entries() {
        assert!(CodingVector::new(vec![]).is_err());
        assert!(CodingVector::new(vec![0.5, 0.4]).is_err());
        assert!(CodingVector::new(vec![1.5, -0.5]).is_err());
        assert!(CodingVector::new(vec![0.25; 4]).is_ok());
    }
}
