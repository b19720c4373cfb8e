//! Ready-made pipelines: multiobjective location, phenotypic divergence and
//! the ridge regularization path.
//!
//! The untransformed objectives here are norms (`‖x − p_i‖`,
//! `‖A_i(x − p_i)‖`), which are not differentiable. All solving happens on
//! their squares; squaring preserves the Pareto order on `[0, ∞)ᵐ`, which
//! [`pareto_less`] and [`square_transform`] make testable.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::atlas::{build_atlas, face_consistency, injectivity_scan, FaceConsistencyReport, InjectivityReport, ParetoAtlas, DEFAULT_COLLAPSE_TOL};
use crate::diagnostics::{certify_corank_on_atlas, CorankCertificate};
use crate::error::{Error, Result};
use crate::linalg::{combinations, matrix_from_rows, numerical_rank, singular_values, spd_solve};
use crate::problem::{build_problem, FamilySpec};
use crate::solver::{scalarize, SolverConfig, Weight};

/// Strict Pareto order: `a ≤ b` componentwise with at least one strict.
pub fn pareto_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// `T(y) = (y_1², …, y_m²)`.
pub fn square_transform(y: &[f64]) -> Vec<f64> {
    y.iter().map(|v| v * v).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocationInstance {
    pub points: Vec<Vec<f64>>,
}

impl LocationInstance {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidProblem("at least one demand point is required".into()));
        }
        FamilySpec::DistanceSquared { points: points.clone() }.dimensions()?;
        Ok(Self { points })
    }

    /// Affine independence of the demand points.
    pub fn general_position(&self) -> bool {
        let m = self.points.len();
        if m == 1 {
            return true;
        }
        let n = self.points[0].len();
        let diffs = DMatrix::from_fn(n, m - 1, |r, c| self.points[c + 1][r] - self.points[0][r]);
        numerical_rank(&singular_values(&diffs), 1e-10) == m - 1
    }

    pub fn spec(&self) -> FamilySpec {
        FamilySpec::DistanceSquared { points: self.points.clone() }
    }
}

/// Euclidean distance from `x` to the convex hull of `points`, by projecting
/// onto the affine hull of every subset and keeping projections with
/// non-negative barycentric coordinates. Exact, but exponential in the
/// number of points.
pub fn hull_distance(points: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    let m = points.len();
    if m == 0 || m > 16 {
        return Err(Error::InvalidProblem(format!("hull test supports 1..=16 points, got {m}")));
    }
    let xv = DVector::from_column_slice(x);
    let mut best = f64::INFINITY;
    for k in 1..=m {
        for subset in combinations(m, k) {
            let base = DVector::from_column_slice(&points[subset[0]]);
            let (coords, proj) = if k == 1 {
                (vec![1.0], base.clone())
            } else {
                let dirs = DMatrix::from_fn(x.len(), k - 1, |r, c| points[subset[c + 1]][r] - base[r]);
                let Ok(mu) = dirs.clone().svd(true, true).solve(&(&xv - &base), 1e-12) else { continue };
                let lead = 1.0 - mu.sum();
                let mut coords = vec![lead];
                coords.extend(mu.iter());
                (coords, &base + dirs * mu)
            };
            if coords.iter().all(|&c| c >= -1e-12) {
                best = best.min((&xv - proj).norm());
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocationReport {
    pub atlas: ParetoAtlas,
    pub general_position: bool,
    /// `max ‖x*(w) − Σ w_i p_i‖` over the grid.
    pub max_barycentric_error: f64,
    pub max_hull_distance: f64,
    /// Fraction of atlas points within 1e-9 of the hull.
    pub hull_membership: f64,
    pub corank: CorankCertificate,
}

pub const HULL_TOL: f64 = 1e-9;

pub fn location_pareto_set(inst: &LocationInstance, resolution: u32, cfg: &SolverConfig) -> Result<LocationReport> {
    let p = build_problem(inst.spec())?;
    let atlas = build_atlas(&p, resolution, cfg)?;
    let mut max_bary = 0.0_f64;
    let mut max_hull = 0.0_f64;
    let mut inside = 0usize;
    for (_, pt) in atlas.solved() {
        let n = pt.x.len();
        let bary: Vec<f64> = (0..n)
            .map(|k| pt.w.iter().zip(&inst.points).map(|(w, q)| w * q[k]).sum())
            .collect();
        max_bary = max_bary.max(pt.x.iter().zip(&bary).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let d = hull_distance(&inst.points, &pt.x)?;
        max_hull = max_hull.max(d);
        if d <= HULL_TOL {
            inside += 1;
        }
    }
    let solved = atlas.summary.solved.max(1);
    let corank = certify_corank_on_atlas(&atlas, cfg.rank_tol);
    Ok(LocationReport {
        general_position: inst.general_position(),
        max_barycentric_error: max_bary,
        max_hull_distance: max_hull,
        hull_membership: inside as f64 / solved as f64,
        corank,
        atlas,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhenotypicReport {
    pub atlas: ParetoAtlas,
    pub corank: CorankCertificate,
    /// Weak simpliciality: faces of the atlas agree with sub-problem solves.
    pub faces: FaceConsistencyReport,
    pub injectivity: InjectivityReport,
    /// `Some(pass)` only when the corank hypothesis holds on the sample.
    pub simplicial: Option<bool>,
}

pub fn phenotypic_pareto_set(
    matrices: Vec<Vec<Vec<f64>>>,
    points: Vec<Vec<f64>>,
    resolution: u32,
    cfg: &SolverConfig,
) -> Result<PhenotypicReport> {
    let p = build_problem(FamilySpec::Phenotypic { matrices, points })?;
    let atlas = build_atlas(&p, resolution, cfg)?;
    let corank = certify_corank_on_atlas(&atlas, cfg.rank_tol);
    let faces = face_consistency(&p, &atlas, cfg);
    let injectivity = injectivity_scan(&atlas, DEFAULT_COLLAPSE_TOL);
    let simplicial = corank.passed.then_some(faces.passed && injectivity.injective);
    Ok(PhenotypicReport { atlas, corank, faces, injectivity, simplicial })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeInstance {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub mu: f64,
}

impl RidgeInstance {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, mu: f64) -> Result<Self> {
        FamilySpec::RidgePair { x: x.clone(), y: y.clone(), mu }.dimensions()?;
        Ok(Self { x, y, mu })
    }

    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        match spec {
            FamilySpec::RidgePair { x, y, mu } => Self::new(x.clone(), y.clone(), *mu),
            other => Err(Error::InvalidProblem(format!("expected ridge_pair, got {}", other.name()))),
        }
    }

    pub fn spec(&self) -> FamilySpec {
        FamilySpec::RidgePair { x: self.x.clone(), y: self.y.clone(), mu: self.mu }
    }

    /// Columns centered and scaled to unit sample standard deviation, the
    /// response centered. Constant columns are only centered.
    pub fn standardized(&self) -> Self {
        let rows = self.x.len() as f64;
        let cols = self.x[0].len();
        let mut x = self.x.clone();
        for j in 0..cols {
            let mean = self.x.iter().map(|r| r[j]).sum::<f64>() / rows;
            let var = self.x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (rows - 1.0).max(1.0);
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for r in x.iter_mut() {
                r[j] = (r[j] - mean) / sd;
            }
        }
        let ymean = self.y.iter().sum::<f64>() / rows;
        let y = self.y.iter().map(|v| v - ymean).collect();
        Self { x, y, mu: self.mu }
    }

    /// Solves `(XᵀX + λI) θ = Xᵀy`.
    pub fn closed_form(&self, lambda: f64) -> Result<DVector<f64>> {
        let x = matrix_from_rows(&self.x).ok_or_else(|| Error::DimensionMismatch("ragged x".into()))?;
        let mut lhs = x.transpose() * &x;
        for k in 0..lhs.nrows() {
            lhs[(k, k)] += lambda;
        }
        let rhs = x.transpose() * DVector::from_column_slice(&self.y);
        spd_solve(&lhs, &rhs).ok_or(Error::SingularMixedHessian)
    }
}

/// `λ(w) = μ + w₂/w₁`, infinite at the `w₁ = 0` vertex.
pub fn ridge_lambda(mu: f64, w1: f64, w2: f64) -> f64 {
    if w1 == 0.0 {
        f64::INFINITY
    } else {
        mu + w2 / w1.max(f64::EPSILON)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeRow {
    pub w1: f64,
    pub w2: f64,
    pub lambda: f64,
    pub theta: Vec<f64>,
    /// KKT residual of the scalarized solve.
    pub residual: f64,
    /// `‖θ − θ_closed‖ / max(‖θ_closed‖, 1e-300)`; zero at the `w₁ = 0` vertex.
    pub oracle_rel_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgePath {
    pub mu: f64,
    pub rows: Vec<RidgeRow>,
    pub max_oracle_rel_error: f64,
}

/// Sweeps `w = (k/r, 1 − k/r)` for `k = r, …, 0`. Each interior weight is
/// solved by the scalarizer and checked against the closed-form ridge
/// solution at `λ(w)`; the `w₁ = 0` vertex is `θ = 0`, `λ = ∞`.
pub fn ridge_path(inst: &RidgeInstance, resolution: u32, cfg: &SolverConfig) -> Result<RidgePath> {
    if resolution == 0 {
        return Err(Error::InvalidWeight("grid resolution must be at least 1".into()));
    }
    let p = build_problem(inst.spec())?;
    let r = resolution as f64;
    let mut rows = Vec::with_capacity(resolution as usize + 1);
    for k in (0..=resolution).rev() {
        let w1 = k as f64 / r;
        let w2 = (resolution - k) as f64 / r;
        let lambda = ridge_lambda(inst.mu, w1, w2);
        if k == 0 {
            rows.push(RidgeRow {
                w1,
                w2,
                lambda,
                theta: vec![0.0; inst.x[0].len()],
                residual: 0.0,
                oracle_rel_error: 0.0,
            });
            continue;
        }
        let pt = scalarize(&p, &Weight::new(vec![w1, w2])?, cfg)?;
        let oracle = inst.closed_form(lambda)?;
        let err = (pt.x_vec() - &oracle).norm() / oracle.norm().max(1e-300);
        rows.push(RidgeRow { w1, w2, lambda, theta: pt.x, residual: pt.kkt_residual, oracle_rel_error: err });
    }
    let max_err = rows.iter().map(|r| r.oracle_rel_error).fold(0.0, f64::max);
    Ok(RidgePath { mu: inst.mu, rows, max_oracle_rel_error: max_err })
}

impl RidgePath {
    /// Columns `w1,w2,lambda,theta_1..theta_p,residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let p = self.rows.first().map_or(0, |r| r.theta.len());
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["w1".to_string(), "w2".into(), "lambda".into()];
        header.extend((1..=p).map(|i| format!("theta_{i}")));
        header.push("residual".into());
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![format!("{}", row.w1), format!("{}", row.w2), format!("{}", row.lambda)];
            rec.extend(row.theta.iter().map(|v| format!("{v:e}")));
            rec.push(format!("{:e}", row.residual));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
