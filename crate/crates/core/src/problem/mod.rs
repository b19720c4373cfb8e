//! Objective mappings `f = (f_1, …, f_m): ℝⁿ → ℝᵐ`.
//!
//! Everything downstream consumes the [`MultiObjective`] trait. The concrete
//! [`ObjectiveProblem`] wraps one of the built-in [`FamilySpec`]s; the other
//! implementors here are structural transforms (sub-problems, target and
//! source transforms) used to exercise invariance properties.

mod family;
mod format;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use family::FamilySpec;
pub use format::{parse_problem, ridge_from_csv, serialize_problem, ProblemDocument};

use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use family::Family;

/// Values, Jacobian (row `i` is `∇f_i`) and Hessians at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub values: DVector<f64>,
    pub gradients: DMatrix<f64>,
    pub hessians: Vec<DMatrix<f64>>,
}

impl Evaluation {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            values: DVector::zeros(m),
            gradients: DMatrix::zeros(m, n),
            hessians: vec![DMatrix::zeros(n, n); m],
        }
    }

    fn from_parts<const N: usize>(
        values: Vec<f64>,
        grads: &[[f64; N]],
        hessians: Vec<DMatrix<f64>>,
    ) -> Self {
        Self {
            values: DVector::from_vec(values),
            gradients: DMatrix::from_fn(grads.len(), N, |i, j| grads[i][j]),
            hessians,
        }
    }

    /// `Σ w_i ∇f_i`.
    pub fn weighted_gradient(&self, w: &[f64]) -> DVector<f64> {
        self.gradients.tr_mul(&DVector::from_column_slice(w))
    }

    /// `Σ w_i H(f_i)`.
    pub fn weighted_hessian(&self, w: &[f64]) -> DMatrix<f64> {
        let n = self.gradients.ncols();
        let mut h = DMatrix::zeros(n, n);
        for (wi, hi) in w.iter().zip(&self.hessians) {
            if *wi != 0.0 {
                h += *wi * hi;
            }
        }
        h
    }
}

/// A C² mapping `ℝⁿ → ℝᵐ` with analytic first and second derivatives.
///
/// Evaluation must be pure; implementors are shared across worker threads.
pub trait MultiObjective: Send + Sync {
    fn source_dim(&self) -> usize;
    fn num_objectives(&self) -> usize;
    fn evaluate(&self, x: &DVector<f64>) -> Evaluation;

    fn values(&self, x: &DVector<f64>) -> DVector<f64> {
        self.evaluate(x).values
    }

    /// `m × n` Jacobian at `x`.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.evaluate(x).gradients
    }
}

impl<T: MultiObjective + ?Sized> MultiObjective for &T {
    fn source_dim(&self) -> usize {
        (**self).source_dim()
    }
    fn num_objectives(&self) -> usize {
        (**self).num_objectives()
    }
    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        (**self).evaluate(x)
    }
}

/// A built-in family instantiated with validated parameters.
#[derive(Debug, Clone)]
pub struct ObjectiveProblem {
    spec: FamilySpec,
    family: Family,
    n: usize,
    m: usize,
}

/// Validates `spec` and compiles it into an evaluable problem.
pub fn build_problem(spec: FamilySpec) -> Result<ObjectiveProblem> {
    let family = Family::compile(&spec)?;
    let (n, m) = family.dims();
    Ok(ObjectiveProblem { spec, family, n, m })
}

impl ObjectiveProblem {
    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }
}

impl MultiObjective for ObjectiveProblem {
    fn source_dim(&self) -> usize {
        self.n
    }
    fn num_objectives(&self) -> usize {
        self.m
    }
    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        debug_assert_eq!(x.len(), self.n);
        self.family.evaluate(x)
    }
}

/// The sub-problem `f_I = (f_{i_1}, …, f_{i_k})`.
pub struct SubProblem<P> {
    base: P,
    indices: Vec<usize>,
}

impl<P: MultiObjective> SubProblem<P> {
    pub fn new(base: P, indices: Vec<usize>) -> Result<Self> {
        let m = base.num_objectives();
        if indices.is_empty() {
            return Err(Error::InvalidWeight("face must be non-empty".into()));
        }
        if indices.iter().any(|&i| i >= m) || !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidWeight(format!(
                "face {indices:?} is not a strictly increasing subset of 0..{m}"
            )));
        }
        Ok(Self { base, indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl<P: MultiObjective> MultiObjective for SubProblem<P> {
    fn source_dim(&self) -> usize {
        self.base.source_dim()
    }
    fn num_objectives(&self) -> usize {
        self.indices.len()
    }
    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        let full = self.base.evaluate(x);
        Evaluation {
            values: DVector::from_iterator(self.indices.len(), self.indices.iter().map(|&i| full.values[i])),
            gradients: full.gradients.select_rows(&self.indices),
            hessians: self.indices.iter().map(|&i| full.hessians[i].clone()).collect(),
        }
    }
}

/// `x ↦ T f(x)` for a fixed `m' × m` matrix `T`.
pub struct TargetTransform<P> {
    base: P,
    transform: DMatrix<f64>,
}

impl<P: MultiObjective> TargetTransform<P> {
    pub fn new(base: P, transform: DMatrix<f64>) -> Result<Self> {
        if transform.ncols() != base.num_objectives() {
            return Err(Error::DimensionMismatch(format!(
                "target transform has {} columns for {} objectives",
                transform.ncols(),
                base.num_objectives()
            )));
        }
        Ok(Self { base, transform })
    }

    /// Reorders objectives: output `i` is input `order[i]`.
    pub fn permutation(base: P, order: &[usize]) -> Result<Self> {
        let m = base.num_objectives();
        let t = DMatrix::from_fn(order.len(), m, |i, j| if order[i] == j { 1.0 } else { 0.0 });
        Self::new(base, t)
    }

    /// Replaces `f_m` by `f_m + α f_i`.
    pub fn add_to_last(base: P, source: usize, alpha: f64) -> Result<Self> {
        let m = base.num_objectives();
        let mut t = DMatrix::identity(m, m);
        t[(m - 1, source)] += alpha;
        Self::new(base, t)
    }
}

impl<P: MultiObjective> MultiObjective for TargetTransform<P> {
    fn source_dim(&self) -> usize {
        self.base.source_dim()
    }
    fn num_objectives(&self) -> usize {
        self.transform.nrows()
    }
    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        let full = self.base.evaluate(x);
        let n = self.source_dim();
        let hessians = (0..self.transform.nrows())
            .map(|r| {
                let mut h = DMatrix::zeros(n, n);
                for (c, hc) in full.hessians.iter().enumerate() {
                    let t = self.transform[(r, c)];
                    if t != 0.0 {
                        h += t * hc;
                    }
                }
                h
            })
            .collect();
        Evaluation {
            values: &self.transform * &full.values,
            gradients: &self.transform * &full.gradients,
            hessians,
        }
    }
}

/// `x ↦ f(L x + t)` for an invertible `L`.
pub struct SourceTransform<P> {
    base: P,
    linear: DMatrix<f64>,
    offset: DVector<f64>,
}

impl<P: MultiObjective> SourceTransform<P> {
    pub fn new(base: P, linear: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let n = base.source_dim();
        if linear.shape() != (n, n) || offset.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "source transform must be {n}x{n} with offset of length {n}"
            )));
        }
        Ok(Self { base, linear, offset })
    }
}

impl<P: MultiObjective> MultiObjective for SourceTransform<P> {
    fn source_dim(&self) -> usize {
        self.base.source_dim()
    }
    fn num_objectives(&self) -> usize {
        self.base.num_objectives()
    }
    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        let y = &self.linear * x + &self.offset;
        let inner = self.base.evaluate(&y);
        let lt = self.linear.transpose();
        Evaluation {
            values: inner.values,
            gradients: &inner.gradients * &self.linear,
            hessians: inner.hessians.iter().map(|h| &lt * h * &self.linear).collect(),
        }
    }
}

/// Gaussian point sampler `x ~ N(center, radius² I)` with a fixed seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSampler {
    pub radius: f64,
    pub seed: u64,
}

impl Default for PointSampler {
    fn default() -> Self {
        Self { radius: 1.0, seed: 0 }
    }
}

impl PointSampler {
    pub fn sample(&self, n: usize, count: usize) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..count)
            .map(|_| {
                DVector::from_fn(n, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    self.radius * z
                })
            })
            .collect()
    }
}

/// Sampled lower bound on the Hessian spectrum. Passing is evidence, not a
/// proof, of strong convexity: only the sampled ball is inspected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub beta_min: f64,
    pub passed: bool,
    pub samples: usize,
    pub radius: f64,
    /// Point and objective index realizing `beta_min`.
    pub witness_point: Vec<f64>,
    pub witness_objective: usize,
}

pub const DEFAULT_CONVEXITY_SAMPLES: usize = 1000;

pub fn check_strong_convexity(
    p: &dyn MultiObjective,
    sampler: &PointSampler,
    count: usize,
) -> Result<ConvexityCertificate> {
    if count == 0 {
        return Err(Error::InvalidProblem("sample count must be at least 1".into()));
    }
    let mut best = (f64::INFINITY, Vec::new(), 0);
    for x in sampler.sample(p.source_dim(), count) {
        let ev = p.evaluate(&x);
        for (i, h) in ev.hessians.iter().enumerate() {
            let sym = 0.5 * (h + h.transpose());
            let lo = min_eigenvalue(&sym);
            if lo < best.0 {
                best = (lo, x.iter().copied().collect(), i);
            }
        }
    }
    Ok(ConvexityCertificate {
        beta_min: best.0,
        passed: best.0 > 0.0,
        samples: count,
        radius: sampler.radius,
        witness_point: best.1,
        witness_objective: best.2,
    })
}

/// Named fixtures available without a problem file.
pub mod builtin {
    use super::*;

    pub const NAMES: &[&str] = &[
        "example31",
        "example31_perturbed",
        "example32",
        "remark_g",
        "location",
        "ridge",
    ];

    /// Three demand points in general position in ℝ².
    pub fn location_triangle() -> FamilySpec {
        FamilySpec::DistanceSquared {
            points: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }

    /// Seeded 20×5 regression instance with `μ = 0.1`.
    pub fn ridge_instance(seed: u64, mu: f64) -> FamilySpec {
        let (x, y) = ridge_data(seed, 20, 5);
        FamilySpec::RidgePair { x, y, mu }
    }

    /// Gaussian design with a fixed coefficient vector and 0.1-scale noise.
    pub fn ridge_data(seed: u64, rows: usize, cols: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..cols).map(|j| [1.0, -2.0, 0.5, 0.0, 3.0][j % 5]).collect();
        let mut x = Vec::with_capacity(rows);
        let mut y = Vec::with_capacity(rows);
        for _ in 0..rows {
            let row: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut rng)).collect();
            let noise: f64 = StandardNormal.sample(&mut rng);
            y.push(row.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.1 * noise);
            x.push(row);
        }
        (x, y)
    }

    /// Resolves a fixture name. `epsilon` applies to `example31_perturbed`.
    pub fn by_name(name: &str, epsilon: f64) -> Result<FamilySpec> {
        Ok(match name {
            "example31" => FamilySpec::Example31,
            "example31_perturbed" => FamilySpec::Example31Perturbed { epsilon },
            "example32" => FamilySpec::Example32,
            "remark_g" => FamilySpec::RemarkG,
            "location" => location_triangle(),
            "ridge" => ridge_instance(7, 0.1),
            other => {
                return Err(Error::InvalidProblem(format!(
                    "unknown builtin '{other}' (expected one of {})",
                    NAMES.join(", ")
                )))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dvec;

    fn fd_check(p: &dyn MultiObjective, x: &DVector<f64>) -> (f64, f64) {
        let h = 1e-5;
        let ev = p.evaluate(x);
        let n = p.source_dim();
        let mut grad_err = 0.0_f64;
        let mut hess_err = 0.0_f64;
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let (ep, em) = (p.evaluate(&xp), p.evaluate(&xm));
            for i in 0..p.num_objectives() {
                let fd = (ep.values[i] - em.values[i]) / (2.0 * h);
                let an = ev.gradients[(i, k)];
                grad_err = grad_err.max((fd - an).abs() / an.abs().max(1.0));
                for j in 0..n {
                    let fd = (ep.gradients[(i, j)] - em.gradients[(i, j)]) / (2.0 * h);
                    let an = ev.hessians[i][(j, k)];
                    hess_err = hess_err.max((fd - an).abs() / an.abs().max(1.0));
                }
            }
        }
        (grad_err, hess_err)
    }

    fn all_fixtures() -> Vec<FamilySpec> {
        vec![
            FamilySpec::Example31,
            FamilySpec::Example31Perturbed { epsilon: 0.3 },
            FamilySpec::Example32,
            FamilySpec::RemarkG,
            builtin::location_triangle(),
            builtin::ridge_instance(3, 0.1),
            FamilySpec::GenericQuadratic {
                q: vec![vec![vec![2.0, 0.5], vec![0.5, 1.0]], vec![vec![1.0, 0.0], vec![0.0, 3.0]]],
                b: vec![vec![1.0, -1.0], vec![0.0, 2.0]],
                c: vec![0.0, 1.0],
            },
            FamilySpec::Phenotypic {
                matrices: vec![vec![vec![2.0, 0.3], vec![0.3, 1.0]], vec![vec![1.0, 0.0], vec![0.0, 0.5]]],
                points: vec![vec![0.0, 1.0], vec![2.0, -1.0]],
            },
        ]
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for spec in all_fixtures() {
            let p = build_problem(spec.clone()).unwrap();
            for x in (PointSampler { radius: 2.0, seed: 11 }).sample(p.source_dim(), 100) {
                let (g, h) = fd_check(&p, &x);
                assert!(g <= 1e-6, "{}: gradient error {g:.2e}", spec.name());
                assert!(h <= 1e-6, "{}: hessian error {h:.2e}", spec.name());
                for hi in p.evaluate(&x).hessians {
                    assert!(crate::linalg::symmetry_defect(&hi) <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn example31_at_origin() {
        let p = build_problem(FamilySpec::Example31).unwrap();
        let ev = p.evaluate(&DVector::zeros(3));
        assert_eq!(ev.values.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(ev.gradients.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0]);
        assert_eq!(ev.gradients.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 0.0]);
        assert_eq!(ev.gradients.row(2).iter().copied().collect::<Vec<_>>(), vec![-1.0, -1.0, 0.0]);
    }

    #[test]
    fn distance_squared_at_its_point() {
        let p = build_problem(FamilySpec::DistanceSquared { points: vec![vec![0.0, 0.0]] }).unwrap();
        let ev = p.evaluate(&DVector::zeros(2));
        assert_eq!(ev.values[0], 0.0);
        assert_eq!(ev.gradients.amax(), 0.0);
        assert_eq!(ev.hessians[0], DMatrix::from_diagonal_element(2, 2, 2.0));
    }

    #[test]
    fn remark_g_jacobian_at_origin() {
        let p = build_problem(FamilySpec::RemarkG).unwrap();
        let j = p.jacobian(&DVector::zeros(4));
        // Rows are objectives: the x₁,x₂ columns vanish, the x₃,x₄ block is (−I; I).
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, -1.0, 0.0,
            0.0, 0.0, 0.0, -1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ]);
        assert_eq!(j, expected);
    }

    #[test]
    fn rejects_bad_parameters() {
        let indefinite = FamilySpec::GenericQuadratic {
            q: vec![vec![vec![1.0, 0.0], vec![0.0, -1.0]]],
            b: vec![vec![0.0, 0.0]],
            c: vec![0.0],
        };
        assert!(matches!(build_problem(indefinite), Err(Error::InvalidProblem(_))));
        let ridge = FamilySpec::RidgePair { x: vec![vec![1.0]], y: vec![1.0], mu: 0.0 };
        let err = build_problem(ridge).unwrap_err().to_string();
        assert!(err.contains("μ must be positive"), "{err}");
        let ragged = FamilySpec::DistanceSquared { points: vec![vec![0.0, 0.0], vec![1.0]] };
        assert!(matches!(build_problem(ragged), Err(Error::DimensionMismatch(_))));
        let nonsym = FamilySpec::Phenotypic {
            matrices: vec![vec![vec![1.0, 0.5], vec![0.0, 1.0]]],
            points: vec![vec![0.0, 0.0]],
        };
        assert!(build_problem(nonsym).is_err());
    }

    #[test]
    fn convexity_certificates() {
        let iso = FamilySpec::GenericQuadratic {
            q: vec![vec![vec![2.0, 0.0], vec![0.0, 2.0]]; 2],
            b: vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            c: vec![0.0, 0.0],
        };
        let cert =
            check_strong_convexity(&build_problem(iso).unwrap(), &PointSampler::default(), 50).unwrap();
        assert!((cert.beta_min - 2.0).abs() < 1e-12 && cert.passed);

        // H(f₁) = H(f₂) = 2I, H(f₃) = diag(2, 4, 2).
        let cert = check_strong_convexity(
            &build_problem(FamilySpec::Example31).unwrap(),
            &PointSampler::default(),
            DEFAULT_CONVEXITY_SAMPLES,
        )
        .unwrap();
        assert!(cert.beta_min >= 2.0 - 1e-12);

        // Bypass validation to exercise the failure path.
        let bad = ObjectiveProblem {
            spec: FamilySpec::Example31,
            family: Family::Quadratic {
                q: vec![DMatrix::from_diagonal(&dvec(&[1.0, -1.0]))],
                b: vec![DVector::zeros(2)],
                c: vec![0.0],
            },
            n: 2,
            m: 1,
        };
        let cert = check_strong_convexity(&bad, &PointSampler::default(), 10).unwrap();
        assert!(!cert.passed);
        assert_eq!(cert.beta_min, -1.0);
        assert_eq!(cert.witness_point.len(), 2);
    }

    #[test]
    fn affine_source_transform_keeps_certificate_positive() {
        let base = build_problem(FamilySpec::Example32).unwrap();
        let l = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.0, 2.0, 0.0, 0.3, 0.0, 1.5]);
        let t = SourceTransform::new(&base, l, dvec(&[0.2, -1.0, 3.0])).unwrap();
        let cert = check_strong_convexity(&t, &PointSampler { radius: 3.0, seed: 5 }, 200).unwrap();
        assert!(cert.passed && cert.beta_min > 0.0);
        for x in (PointSampler { radius: 1.0, seed: 9 }).sample(3, 20) {
            let (g, h) = fd_check(&t, &x);
            assert!(g < 1e-6 && h < 1e-6);
        }
    }

    #[test]
    fn subproblem_selects_objectives() {
        let p = build_problem(FamilySpec::Example31).unwrap();
        let sub = SubProblem::new(&p, vec![0, 2]).unwrap();
        let x = dvec(&[0.3, -0.2, 1.0]);
        let (full, part) = (p.evaluate(&x), sub.evaluate(&x));
        assert_eq!(part.values[1], full.values[2]);
        assert_eq!(part.gradients.row(1), full.gradients.row(2));
        assert!(SubProblem::new(&p, vec![]).is_err());
        assert!(SubProblem::new(&p, vec![2, 1]).is_err());
    }
}
