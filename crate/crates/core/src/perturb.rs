//! Linear perturbations `f + π`, the genericity and stability experiments,
//! and tracking of the persistent corank-2 point of the 4→4 example.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::build_atlas;
use crate::diagnostics::{certify_corank_on_atlas, corank_at, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg::{combinations, left_null_space, null_space, singular_values};
use crate::problem::{Evaluation, MultiObjective};
use crate::solver::SolverConfig;

/// A linear map `π: ℝⁿ → ℝᵐ` stored as an `m × n` coefficient matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPerturbation {
    pub coefficients: Vec<Vec<f64>>,
    pub seed: u64,
    pub scale: f64,
}

impl LinearPerturbation {
    /// Entries i.i.d. uniform on `[−scale, scale]`. The unit draw depends on
    /// the seed only, so for a fixed seed the perturbation scales linearly.
    pub fn sample(m: usize, n: usize, seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coefficients = (0..m)
            .map(|_| (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect())
            .collect();
        Self { coefficients, seed, scale }
    }

    pub fn zero(m: usize, n: usize) -> Self {
        Self { coefficients: vec![vec![0.0; n]; m], seed: 0, scale: 0.0 }
    }

    pub fn from_matrix(pi: &DMatrix<f64>) -> Self {
        Self { coefficients: crate::linalg::matrix_to_rows(pi), seed: 0, scale: pi.amax() }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        crate::linalg::matrix_from_rows(&self.coefficients).unwrap_or_else(|| DMatrix::zeros(0, 0))
    }
}

/// `x ↦ f(x) + π x`. Hessians are those of `f`.
pub struct PerturbedProblem<P> {
    base: P,
    pi: DMatrix<f64>,
}

pub fn perturb_problem<P: MultiObjective>(base: P, pi: &LinearPerturbation) -> Result<PerturbedProblem<P>> {
    let mat = pi.matrix();
    if mat.shape() != (base.num_objectives(), base.source_dim()) {
        return Err(Error::DimensionMismatch(format!(
            "perturbation is {}x{}, problem needs {}x{}",
            mat.nrows(),
            mat.ncols(),
            base.num_objectives(),
            base.source_dim()
        )));
    }
    Ok(PerturbedProblem { base, pi: mat })
}

impl<P: MultiObjective> PerturbedProblem<P> {
    pub fn base(&self) -> &P {
        &self.base
    }
}

impl<P: MultiObjective> MultiObjective for PerturbedProblem<P> {
    fn source_dim(&self) -> usize {
        self.base.source_dim()
    }
    fn num_objectives(&self) -> usize {
        self.base.num_objectives()
    }
    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        let mut ev = self.base.evaluate(x);
        ev.values += &self.pi * x;
        ev.gradients += &self.pi;
        ev
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenericityTrial {
    pub seed: u64,
    /// Max corank over the atlas at each tolerance, in input order.
    pub max_corank: Vec<usize>,
    pub min_relative_gap: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenericityReport {
    pub scale: f64,
    pub resolution: u32,
    pub tolerances: Vec<f64>,
    /// Trials with an atlas point of corank ≥ 2 at the first tolerance.
    pub trials_with_corank2: usize,
    /// Whether every trial reached the same corank verdict at every tolerance.
    pub tolerances_agree: bool,
    pub trials: Vec<GenericityTrial>,
}

/// Draws `trials` perturbations (seeds `seed, seed+1, …`), builds the atlas
/// of each perturbed problem and counts trials with a corank-2 point.
pub fn genericity_experiment(
    p: &dyn MultiObjective,
    trials: usize,
    scale: f64,
    resolution: u32,
    tolerances: &[f64],
    seed: u64,
    cfg: &SolverConfig,
) -> Result<GenericityReport> {
    if trials == 0 {
        return Err(Error::InvalidProblem("trials must be at least 1".into()));
    }
    if tolerances.is_empty() {
        return Err(Error::InvalidProblem("at least one rank tolerance is required".into()));
    }
    let (m, n) = (p.num_objectives(), p.source_dim());
    let results: Vec<Result<GenericityTrial>> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k);
            let pi = LinearPerturbation::sample(m, n, s, scale);
            let q = perturb_problem(p, &pi)?;
            let atlas = build_atlas(&q, resolution, cfg)?;
            let certs: Vec<_> = tolerances.iter().map(|&t| certify_corank_on_atlas(&atlas, t)).collect();
            Ok(GenericityTrial {
                seed: s,
                max_corank: certs.iter().map(|c| c.max_corank).collect(),
                min_relative_gap: certs[0].min_relative_gap,
                failures: atlas.failures.len(),
            })
        })
        .collect();
    let trials: Vec<GenericityTrial> = results.into_iter().collect::<Result<_>>()?;
    let trials_with_corank2 = trials.iter().filter(|t| t.max_corank[0] >= 2).count();
    let tolerances_agree = trials
        .iter()
        .all(|t| t.max_corank.iter().all(|&c| (c >= 2) == (t.max_corank[0] >= 2)));
    Ok(GenericityReport {
        scale,
        resolution,
        tolerances: tolerances.to_vec(),
        trials_with_corank2,
        tolerances_agree,
        trials,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub max_iter: usize,
    /// Target for the Frobenius norm of the Schur complement `E`.
    pub tol: f64,
    pub rank_tol: f64,
    pub initial_point: Option<Vec<f64>>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { max_iter: 50, tol: 1e-12, rank_tol: DEFAULT_RANK_TOL, initial_point: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackerReport {
    pub x_hat: Vec<f64>,
    pub e_norm: f64,
    pub iterations: usize,
    pub corank: usize,
    pub singular_values: Vec<f64>,
    /// Orthonormal basis of `{v : Σ v_i ∇(f + π)_i = 0}`, one vector per entry.
    pub cokernel_basis: Vec<Vec<f64>>,
    pub meets_simplex_interior: bool,
    /// Normalized strictly positive cokernel element maximizing its smallest
    /// coordinate, when one exists.
    pub interior_witness: Option<Vec<f64>>,
}

/// Transposed Jacobian (rows are variables, columns are objectives) split
/// into 2×2 blocks `(A B; C D)`.
fn blocks(mt: &DMatrix<f64>) -> [DMatrix<f64>; 4] {
    [
        mt.view((0, 0), (2, 2)).into_owned(),
        mt.view((0, 2), (2, 2)).into_owned(),
        mt.view((2, 0), (2, 2)).into_owned(),
        mt.view((2, 2), (2, 2)).into_owned(),
    ]
}

/// The Schur complement `E(x, π) = A − B D⁻¹ C` of the transposed Jacobian
/// of `f + π` at `x`, and its partial derivatives `∂E/∂x_k`.
pub fn schur_complement(p: &dyn MultiObjective, x: &DVector<f64>) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    if p.source_dim() != 4 || p.num_objectives() != 4 {
        return Err(Error::DimensionMismatch("the corank-2 tracker needs n = m = 4".into()));
    }
    let ev = p.evaluate(x);
    let mt = ev.gradients.transpose();
    let [a, b, c, d] = blocks(&mt);
    let dsv = singular_values(&d);
    if dsv[1] <= 1e-12 * dsv[0].max(1.0) {
        return Err(Error::DBlockSingular);
    }
    let d_inv = d.try_inverse().ok_or(Error::DBlockSingular)?;
    let dinv_c = &d_inv * &c;
    let b_dinv = &b * &d_inv;
    let e = &a - &b * &dinv_c;
    let partials = (0..4)
        .map(|k| {
            // ∂Mᵀ[j][i]/∂x_k = H(f_i)[j][k]
            let dm = DMatrix::from_fn(4, 4, |j, i| ev.hessians[i][(j, k)]);
            let [da, db, dc, dd] = blocks(&dm);
            da - &db * &dinv_c + &b_dinv * dd * &dinv_c - &b_dinv * dc
        })
        .collect();
    Ok((e, partials))
}

/// Largest `t` with `v ≥ t` componentwise over `v` in the span of `basis`
/// normalized by `Σ v_i = 1`, found by enumerating the vertices of the
/// linear program. Returns `(v, t)`; `None` when the span is orthogonal to
/// `(1, …, 1)` or empty.
pub fn simplex_interior_witness(basis: &DMatrix<f64>) -> Option<(Vec<f64>, f64)> {
    let (m, k) = basis.shape();
    if k == 0 {
        return None;
    }
    let sums = basis.row_sum().transpose();
    if sums.norm() <= 1e-12 {
        return None;
    }
    let v0 = basis * (&sums / sums.norm_squared());
    let directions = basis * null_space(&DMatrix::from_row_slice(1, k, sums.as_slice()), 1e-12);
    let free = directions.ncols();
    let mut best: Option<(Vec<f64>, f64)> = None;
    // Unknowns (β, t); constraint i reads v0_i + D_i β − t ≥ 0.
    for active in combinations(m, free + 1) {
        let lhs = DMatrix::from_fn(free + 1, free + 1, |r, c| {
            if c < free {
                directions[(active[r], c)]
            } else {
                -1.0
            }
        });
        let rhs = DVector::from_fn(free + 1, |r, _| -v0[active[r]]);
        let Some(sol) = lhs.lu().solve(&rhs) else { continue };
        let t = sol[free];
        let v = &v0 + &directions * sol.rows(0, free);
        if v.iter().all(|&vi| vi - t >= -1e-12) && best.as_ref().is_none_or(|b| t > b.1) {
            best = Some((v.iter().copied().collect(), t));
        }
    }
    best
}

/// Newton-solves `E(x, π) = 0` from `x = 0`, then certifies corank 2 and
/// tests whether the cokernel meets the open simplex.
pub fn corank2_tracker(
    p: &dyn MultiObjective,
    pi: &LinearPerturbation,
    cfg: &TrackerConfig,
) -> Result<TrackerReport> {
    let q = perturb_problem(p, pi)?;
    let mut x = match &cfg.initial_point {
        Some(x0) => DVector::from_column_slice(x0),
        None => DVector::zeros(p.source_dim()),
    };
    let mut iterations = 0;
    let mut e_norm;
    loop {
        let (e, partials) = schur_complement(&q, &x)?;
        e_norm = e.norm();
        if e_norm <= cfg.tol {
            break;
        }
        if iterations == cfg.max_iter {
            return Err(Error::NewtonFailed { iterations, residual: e_norm });
        }
        let jac = DMatrix::from_fn(4, 4, |r, k| partials[k][(r / 2, r % 2)]);
        let rhs = DVector::from_fn(4, |r, _| -e[(r / 2, r % 2)]);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(Error::NewtonFailed { iterations, residual: e_norm })?;
        x += step;
        iterations += 1;
    }
    let rank = corank_at(&q, &x, cfg.rank_tol);
    let cokernel = left_null_space(&q.jacobian(&x), cfg.rank_tol);
    let witness = simplex_interior_witness(&cokernel);
    let meets = witness.as_ref().is_some_and(|(_, t)| *t > 1e-12);
    Ok(TrackerReport {
        x_hat: x.iter().copied().collect(),
        e_norm,
        iterations,
        corank: rank.corank,
        singular_values: rank.singular_values,
        cokernel_basis: cokernel.column_iter().map(|c| c.iter().copied().collect()).collect(),
        meets_simplex_interior: meets,
        interior_witness: witness.filter(|(_, t)| *t > 1e-12).map(|(v, _)| v),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackerTrial {
    pub seed: u64,
    pub report: Option<TrackerReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackerExperiment {
    pub scale: f64,
    /// Trials where a corank-2 Pareto point was located.
    pub persistent: usize,
    pub trials: Vec<TrackerTrial>,
}

/// Runs [`corank2_tracker`] under `trials` seeded perturbations.
pub fn tracker_experiment(
    p: &dyn MultiObjective,
    trials: usize,
    scale: f64,
    seed: u64,
    cfg: &TrackerConfig,
) -> TrackerExperiment {
    let (m, n) = (p.num_objectives(), p.source_dim());
    let trials: Vec<TrackerTrial> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k);
            let pi = LinearPerturbation::sample(m, n, s, scale);
            match corank2_tracker(p, &pi, cfg) {
                Ok(r) => TrackerTrial { seed: s, report: Some(r), error: None },
                Err(e) => TrackerTrial { seed: s, report: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let persistent = trials
        .iter()
        .filter(|t| t.report.as_ref().is_some_and(|r| r.corank == 2 && r.meets_simplex_interior))
        .count();
    TrackerExperiment { scale, persistent, trials }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityRow {
    pub scale: f64,
    /// `max_w ‖Γ(w, π) − Γ(w, 0)‖` over the grid.
    pub max_displacement: f64,
    pub argmax_node: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub seed: u64,
    pub resolution: u32,
    pub rows: Vec<StabilityRow>,
    /// Displacements are non-increasing along the (descending) scales.
    pub monotone: bool,
}

/// For each scale, perturbs by `scale · U` with `U` drawn once from `seed`,
/// and measures the largest solution displacement over the grid.
pub fn stability_experiment(
    p: &dyn MultiObjective,
    scales: &[f64],
    resolution: u32,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<StabilityReport> {
    if scales.iter().any(|s| s.is_nan() || *s < 0.0 || s.is_infinite()) || scales.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidProblem("scales must be non-negative and descending".into()));
    }
    let base = build_atlas(p, resolution, cfg)?;
    let (m, n) = (p.num_objectives(), p.source_dim());
    let rows = scales
        .iter()
        .map(|&scale| {
            let pi = LinearPerturbation::sample(m, n, seed, scale);
            let q = perturb_problem(p, &pi)?;
            let atlas = build_atlas(&q, resolution, cfg)?;
            let mut row = StabilityRow { scale, max_displacement: 0.0, argmax_node: None };
            for (node, pt) in atlas.solved() {
                let Some(b) = &base.points[node] else { continue };
                let d = (pt.x_vec() - b.x_vec()).norm();
                if d > row.max_displacement || row.argmax_node.is_none() {
                    row.max_displacement = row.max_displacement.max(d);
                    row.argmax_node = Some(node);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows.windows(2).all(|w| w[1].max_displacement <= w[0].max_displacement);
    Ok(StabilityReport { seed, resolution, rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dvec, subspace_distance};
    use crate::problem::{build_problem, check_strong_convexity, FamilySpec, PointSampler};
    use crate::solver::{scalarize, Weight};

    #[test]
    fn zero_perturbation_is_identity() {
        let p = build_problem(FamilySpec::Example32).unwrap();
        let q = perturb_problem(&p, &LinearPerturbation::zero(3, 3)).unwrap();
        for x in (PointSampler { radius: 2.0, seed: 1 }).sample(3, 10) {
            assert_eq!(p.evaluate(&x), q.evaluate(&x));
        }
    }

    #[test]
    fn epsilon_z_perturbation_reproduces_example31_perturbed() {
        let eps = 0.37;
        let p = build_problem(FamilySpec::Example31).unwrap();
        let mut pi = DMatrix::zeros(3, 3);
        pi[(0, 2)] = eps;
        let q = perturb_problem(&p, &LinearPerturbation::from_matrix(&pi)).unwrap();
        let h = build_problem(FamilySpec::Example31Perturbed { epsilon: eps }).unwrap();
        for x in (PointSampler { radius: 2.0, seed: 2 }).sample(3, 10) {
            let (a, b) = (q.evaluate(&x), h.evaluate(&x));
            assert!((a.values - b.values).amax() < 1e-14);
            assert!((a.gradients - b.gradients).amax() < 1e-14);
        }
    }

    #[test]
    fn perturbation_keeps_convexity_certificate() {
        let p = build_problem(FamilySpec::Example32).unwrap();
        let q = perturb_problem(&p, &LinearPerturbation::sample(3, 3, 4, 5.0)).unwrap();
        let s = PointSampler { radius: 3.0, seed: 8 };
        let (a, b) = (check_strong_convexity(&p, &s, 100).unwrap(), check_strong_convexity(&q, &s, 100).unwrap());
        assert_eq!(a.beta_min, b.beta_min);
    }

    #[test]
    fn sampling_is_reproducible_and_linear_in_scale() {
        let a = LinearPerturbation::sample(3, 4, 42, 0.1);
        let b = LinearPerturbation::sample(3, 4, 42, 0.1);
        assert_eq!(a, b);
        let c = LinearPerturbation::sample(3, 4, 42, 1.0);
        for (ra, rc) in a.coefficients.iter().zip(&c.coefficients) {
            for (x, y) in ra.iter().zip(rc) {
                assert!(x.abs() <= 0.1 && (x - 0.1 * y).abs() < 1e-16);
            }
        }
        assert!(perturb_problem(build_problem(FamilySpec::Example31).unwrap(), &LinearPerturbation::zero(2, 3)).is_err());
    }

    #[test]
    fn schur_partials_at_origin() {
        let g = build_problem(FamilySpec::RemarkG).unwrap();
        let (e, partials) = schur_complement(&g, &DVector::zeros(4)).unwrap();
        assert_eq!(e.amax(), 0.0);
        let expected = [
            [4.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 2.0, 4.0],
            [0.0, 0.0, 2.0, 1.0],
            [1.0, 2.0, 0.0, 0.0],
        ];
        for (k, want) in expected.iter().enumerate() {
            assert_eq!(partials[k], DMatrix::from_row_slice(2, 2, want), "∂E/∂x{}", k + 1);
        }
    }

    #[test]
    fn tracker_at_zero_perturbation() {
        let g = build_problem(FamilySpec::RemarkG).unwrap();
        let r = corank2_tracker(&g, &LinearPerturbation::zero(4, 4), &TrackerConfig::default()).unwrap();
        assert_eq!(r.x_hat, vec![0.0; 4]);
        assert_eq!(r.corank, 2);
        let basis = DMatrix::from_fn(4, r.cokernel_basis.len(), |i, j| r.cokernel_basis[j][i]);
        let expected = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(subspace_distance(&basis, &expected) <= 1e-10);
        let w = r.interior_witness.unwrap();
        assert!(w.iter().all(|v| (v - 0.25).abs() < 1e-12), "{w:?}");
    }

    #[test]
    fn tracker_follows_small_perturbations() {
        let g = build_problem(FamilySpec::RemarkG).unwrap();
        for seed in 0..5 {
            let pi = LinearPerturbation::sample(4, 4, seed, 1e-3);
            let r = corank2_tracker(&g, &pi, &TrackerConfig::default()).unwrap();
            assert!(r.e_norm <= 1e-10);
            assert!(dvec(&r.x_hat).norm() < 1e-2);
            let q = perturb_problem(&g, &pi).unwrap();
            assert_eq!(corank_at(&q, &dvec(&r.x_hat), DEFAULT_RANK_TOL).corank, 2);
            assert!(r.meets_simplex_interior);
            // The witness weight makes x̂ a scalarized minimizer of g + π.
            let w = Weight::new(r.interior_witness.clone().unwrap()).unwrap_or_else(|_| {
                let v = r.interior_witness.clone().unwrap();
                let s: f64 = v.iter().sum();
                Weight::new(v.iter().map(|x| x / s).collect()).unwrap()
            });
            let pt = scalarize(&q, &w, &SolverConfig::default()).unwrap();
            assert!((pt.x_vec() - dvec(&r.x_hat)).amax() < 1e-8);
        }
    }

    #[test]
    fn interior_witness_one_dimensional() {
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 1.0]);
        let (v, t) = simplex_interior_witness(&b).unwrap();
        assert!((v[1] - 0.5).abs() < 1e-14 && (t - 0.25).abs() < 1e-14);
        let b = DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 0.0]);
        assert!(simplex_interior_witness(&b).is_none());
        let b = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 3.0]);
        assert!(simplex_interior_witness(&b).unwrap().1 < 0.0);
    }

    #[test]
    fn stability_with_zero_scale() {
        let p = build_problem(FamilySpec::Example32).unwrap();
        let rep = stability_experiment(&p, &[0.0], 4, 1, &SolverConfig::default()).unwrap();
        assert_eq!(rep.rows[0].max_displacement, 0.0);
        assert!(stability_experiment(&p, &[0.01, 0.1], 4, 1, &SolverConfig::default()).is_err());
    }

    #[test]
    fn distance_squared_displacement_matches_closed_form() {
        let points = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 3.0]];
        let p = build_problem(FamilySpec::DistanceSquared { points: points.clone() }).unwrap();
        let pi = LinearPerturbation::sample(3, 2, 9, 0.5);
        let q = perturb_problem(&p, &pi).unwrap();
        let pim = pi.matrix();
        for w in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0], [0.0, 0.4, 0.6]] {
            let pt = scalarize(&q, &Weight::new(w.to_vec()).unwrap(), &SolverConfig::default()).unwrap();
            // 2x − 2Σ w_i p_i + πᵀw = 0
            let wv = dvec(&w);
            let mut x = -0.5 * pim.transpose() * &wv;
            for (pnt, wi) in points.iter().zip(&w) {
                x += *wi * dvec(pnt);
            }
            assert!((pt.x_vec() - x).amax() <= 1e-8);
        }
    }
}
