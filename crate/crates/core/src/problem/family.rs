//! Built-in objective families and their analytic derivatives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Evaluation;
use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, min_eigenvalue, symmetry_defect};

/// Serializable description of a problem family and its parameters.
///
/// Matrices are stored row-major as nested arrays so the JSON form is
/// readable by hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `f_i(x) = ½ xᵀ Q_i x + b_iᵀ x + c_i`.
    GenericQuadratic {
        q: Vec<Vec<Vec<f64>>>,
        b: Vec<Vec<f64>>,
        c: Vec<f64>,
    },
    /// Three quadratics on ℝ³ whose Pareto set contains a corank-2 point.
    Example31,
    /// `Example31` with `ε·z` added to the first objective.
    Example31Perturbed { epsilon: f64 },
    /// Three quadratics on ℝ³ with degenerate minimizer layout but no
    /// corank-2 Pareto point.
    Example32,
    /// The 4→4 map `G = (g₁ − x₃, g₂ − x₄, g₁ + x₃, g₂ + x₄)` whose corank-2
    /// Pareto point survives small linear perturbations.
    RemarkG,
    /// `f_i(x) = ‖x − p_i‖²`.
    DistanceSquared { points: Vec<Vec<f64>> },
    /// `f_i(x) = ‖A_i (x − p_i)‖²` with symmetric positive definite `A_i`.
    Phenotypic {
        matrices: Vec<Vec<Vec<f64>>>,
        points: Vec<Vec<f64>>,
    },
    /// `(‖Xθ − y‖² + μ‖θ‖², ‖θ‖²)`.
    RidgePair {
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        mu: f64,
    },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::GenericQuadratic { .. } => "generic_quadratic",
            FamilySpec::Example31 => "example31",
            FamilySpec::Example31Perturbed { .. } => "example31_perturbed",
            FamilySpec::Example32 => "example32",
            FamilySpec::RemarkG => "remark_g",
            FamilySpec::DistanceSquared { .. } => "distance_squared",
            FamilySpec::Phenotypic { .. } => "phenotypic",
            FamilySpec::RidgePair { .. } => "ridge_pair",
        }
    }

    /// `(n, m)` implied by the parameters, after validating them.
    pub fn dimensions(&self) -> Result<(usize, usize)> {
        Ok(Family::compile(self)?.dims())
    }
}

/// Compiled family with nalgebra storage.
#[derive(Debug, Clone)]
pub(crate) enum Family {
    Quadratic {
        q: Vec<DMatrix<f64>>,
        b: Vec<DVector<f64>>,
        c: Vec<f64>,
    },
    Example31 {
        epsilon: f64,
    },
    Example32,
    RemarkG,
    DistanceSquared {
        points: Vec<DVector<f64>>,
    },
    Phenotypic {
        /// `A_iᵀ A_i`, cached.
        gram: Vec<DMatrix<f64>>,
        matrices: Vec<DMatrix<f64>>,
        points: Vec<DVector<f64>>,
    },
    Ridge {
        x: DMatrix<f64>,
        y: DVector<f64>,
        mu: f64,
        gram: DMatrix<f64>,
    },
}

fn square(rows: &[Vec<f64>], what: &str, n: usize) -> Result<DMatrix<f64>> {
    let a = matrix_from_rows(rows)
        .ok_or_else(|| Error::DimensionMismatch(format!("{what} has ragged rows")))?;
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {n}x{n}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a)
}

fn check_spd(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if symmetry_defect(a) > 1e-12 {
        return Err(Error::InvalidProblem(format!("{what} is not symmetric")));
    }
    let lo = min_eigenvalue(a);
    if lo.is_nan() || lo <= 0.0 {
        return Err(Error::InvalidProblem(format!(
            "{what} is not positive definite (min eigenvalue {lo:.3e})"
        )));
    }
    Ok(())
}

fn points_of(points: &[Vec<f64>], what: &str) -> Result<Vec<DVector<f64>>> {
    let n = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidProblem(format!("{what} must be non-empty")))?;
    if n == 0 {
        return Err(Error::InvalidProblem(format!("{what} has zero-length points")));
    }
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if p.len() != n {
                Err(Error::DimensionMismatch(format!(
                    "{what}[{i}] has length {}, expected {n}",
                    p.len()
                )))
            } else {
                Ok(DVector::from_column_slice(p))
            }
        })
        .collect()
}

impl Family {
    pub(crate) fn compile(spec: &FamilySpec) -> Result<Self> {
        match spec {
            FamilySpec::GenericQuadratic { q, b, c } => {
                let m = q.len();
                if m == 0 {
                    return Err(Error::InvalidProblem("q must hold at least one matrix".into()));
                }
                if b.len() != m || c.len() != m {
                    return Err(Error::DimensionMismatch(format!(
                        "q has {m} objectives but b has {} and c has {}",
                        b.len(),
                        c.len()
                    )));
                }
                let n = q[0].len();
                if n == 0 {
                    return Err(Error::InvalidProblem("q[0] is empty".into()));
                }
                let mut qs = Vec::with_capacity(m);
                let mut bs = Vec::with_capacity(m);
                for i in 0..m {
                    let qi = square(&q[i], &format!("q[{i}]"), n)?;
                    check_spd(&qi, &format!("q[{i}]"))?;
                    if b[i].len() != n {
                        return Err(Error::DimensionMismatch(format!(
                            "b[{i}] has length {}, expected {n}",
                            b[i].len()
                        )));
                    }
                    qs.push(qi);
                    bs.push(DVector::from_column_slice(&b[i]));
                }
                Ok(Family::Quadratic { q: qs, b: bs, c: c.clone() })
            }
            FamilySpec::Example31 => Ok(Family::Example31 { epsilon: 0.0 }),
            FamilySpec::Example31Perturbed { epsilon } => {
                if *epsilon == 0.0 || !epsilon.is_finite() {
                    return Err(Error::InvalidProblem("epsilon must be finite and non-zero".into()));
                }
                Ok(Family::Example31 { epsilon: *epsilon })
            }
            FamilySpec::Example32 => Ok(Family::Example32),
            FamilySpec::RemarkG => Ok(Family::RemarkG),
            FamilySpec::DistanceSquared { points } => Ok(Family::DistanceSquared {
                points: points_of(points, "points")?,
            }),
            FamilySpec::Phenotypic { matrices, points } => {
                let pts = points_of(points, "points")?;
                if matrices.len() != pts.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} matrices for {} points",
                        matrices.len(),
                        pts.len()
                    )));
                }
                let n = pts[0].len();
                let mut mats = Vec::with_capacity(pts.len());
                for (i, a) in matrices.iter().enumerate() {
                    let a = square(a, &format!("matrices[{i}]"), n)?;
                    check_spd(&a, &format!("matrices[{i}]"))?;
                    mats.push(a);
                }
                let gram = mats.iter().map(|a| a.transpose() * a).collect();
                Ok(Family::Phenotypic { gram, matrices: mats, points: pts })
            }
            FamilySpec::RidgePair { x, y, mu } => {
                if mu.is_nan() || *mu <= 0.0 || mu.is_infinite() {
                    return Err(Error::InvalidProblem(format!("μ must be positive (got {mu})")));
                }
                let xm = matrix_from_rows(x)
                    .ok_or_else(|| Error::DimensionMismatch("x has ragged rows".into()))?;
                if xm.nrows() == 0 || xm.ncols() == 0 {
                    return Err(Error::InvalidProblem("x must be non-empty".into()));
                }
                if xm.nrows() != y.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "x has {} rows but y has length {}",
                        xm.nrows(),
                        y.len()
                    )));
                }
                let gram = xm.transpose() * &xm;
                Ok(Family::Ridge { x: xm, y: DVector::from_column_slice(y), mu: *mu, gram })
            }
        }
    }

    pub(crate) fn dims(&self) -> (usize, usize) {
        match self {
            Family::Quadratic { q, .. } => (q[0].nrows(), q.len()),
            Family::Example31 { .. } | Family::Example32 => (3, 3),
            Family::RemarkG => (4, 4),
            Family::DistanceSquared { points } => (points[0].len(), points.len()),
            Family::Phenotypic { points, .. } => (points[0].len(), points.len()),
            Family::Ridge { x, .. } => (x.ncols(), 2),
        }
    }

    pub(crate) fn evaluate(&self, p: &DVector<f64>) -> Evaluation {
        match self {
            Family::Quadratic { q, b, c } => {
                let n = p.len();
                let mut ev = Evaluation::zeros(n, q.len());
                for i in 0..q.len() {
                    let qx = &q[i] * p;
                    ev.values[i] = 0.5 * p.dot(&qx) + b[i].dot(p) + c[i];
                    ev.gradients.row_mut(i).copy_from(&(qx + &b[i]).transpose());
                    ev.hessians[i].copy_from(&q[i]);
                }
                ev
            }
            Family::Example31 { epsilon } => {
                let (x, y, z) = (p[0], p[1], p[2]);
                let r2 = x * x + y * y + z * z;
                let values = vec![
                    r2 + epsilon * z,
                    x + y + r2,
                    -(x + y) + x * x + 2.0 * y * y + z * z,
                ];
                let grads = [
                    [2.0 * x, 2.0 * y, 2.0 * z + epsilon],
                    [1.0 + 2.0 * x, 1.0 + 2.0 * y, 2.0 * z],
                    [-1.0 + 2.0 * x, -1.0 + 4.0 * y, 2.0 * z],
                ];
                let hessians = vec![
                    DMatrix::from_diagonal_element(3, 3, 2.0),
                    DMatrix::from_diagonal_element(3, 3, 2.0),
                    DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 4.0, 2.0])),
                ];
                Evaluation::from_parts(values, &grads, hessians)
            }
            Family::Example32 => {
                let (x, y, z) = (p[0], p[1], p[2]);
                let values = vec![
                    x * x + (x - y).powi(2) + z * z,
                    2.0 * (x - 1.0).powi(2) + (x - y - 1.0).powi(2) + z * z,
                    (x - 2.0).powi(2) + (x + y - 2.0).powi(2) + z * z,
                ];
                let grads = [
                    [4.0 * x - 2.0 * y, -2.0 * x + 2.0 * y, 2.0 * z],
                    [6.0 * x - 2.0 * y - 6.0, -2.0 * x + 2.0 * y + 2.0, 2.0 * z],
                    [4.0 * x + 2.0 * y - 8.0, 2.0 * x + 2.0 * y - 4.0, 2.0 * z],
                ];
                let hessians = vec![
                    DMatrix::from_row_slice(3, 3, &[4.0, -2.0, 0.0, -2.0, 2.0, 0.0, 0.0, 0.0, 2.0]),
                    DMatrix::from_row_slice(3, 3, &[6.0, -2.0, 0.0, -2.0, 2.0, 0.0, 0.0, 0.0, 2.0]),
                    DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.0, 2.0, 2.0, 0.0, 0.0, 0.0, 2.0]),
                ];
                Evaluation::from_parts(values, &grads, hessians)
            }
            Family::RemarkG => {
                let (x1, x2, x3, x4) = (p[0], p[1], p[2], p[3]);
                let tail = x3 * x3 + x4 * x4;
                let g1 = x1 * x1 + x3 * x2 + 0.5 * (x2 * x2 + x4 * x1) + tail;
                let g2 = x2 * x2 + x4 * x1 + 0.5 * (x1 * x1 + x3 * x2) + tail;
                let dg1 = [2.0 * x1 + 0.5 * x4, x3 + x2, x2 + 2.0 * x3, 0.5 * x1 + 2.0 * x4];
                let dg2 = [x4 + x1, 2.0 * x2 + 0.5 * x3, 0.5 * x2 + 2.0 * x3, x1 + 2.0 * x4];
                let shift = |g: [f64; 4], k: usize, s: f64| {
                    let mut g = g;
                    g[k] += s;
                    g
                };
                let values = vec![g1 - x3, g2 - x4, g1 + x3, g2 + x4];
                let grads = [
                    shift(dg1, 2, -1.0),
                    shift(dg2, 3, -1.0),
                    shift(dg1, 2, 1.0),
                    shift(dg2, 3, 1.0),
                ];
                let h1 = DMatrix::from_row_slice(
                    4,
                    4,
                    &[2.0, 0.0, 0.0, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.5, 0.0, 0.0, 2.0],
                );
                let h2 = DMatrix::from_row_slice(
                    4,
                    4,
                    &[1.0, 0.0, 0.0, 1.0, 0.0, 2.0, 0.5, 0.0, 0.0, 0.5, 2.0, 0.0, 1.0, 0.0, 0.0, 2.0],
                );
                Evaluation::from_parts(values, &grads, vec![h1.clone(), h2.clone(), h1, h2])
            }
            Family::DistanceSquared { points } => {
                let n = p.len();
                let mut ev = Evaluation::zeros(n, points.len());
                for (i, q) in points.iter().enumerate() {
                    let d = p - q;
                    ev.values[i] = d.norm_squared();
                    ev.gradients.row_mut(i).copy_from(&(2.0 * d).transpose());
                    ev.hessians[i].fill_with_identity();
                    ev.hessians[i] *= 2.0;
                }
                ev
            }
            Family::Phenotypic { gram, matrices, points } => {
                let n = p.len();
                let mut ev = Evaluation::zeros(n, points.len());
                for i in 0..points.len() {
                    let d = p - &points[i];
                    ev.values[i] = (&matrices[i] * &d).norm_squared();
                    ev.gradients
                        .row_mut(i)
                        .copy_from(&(2.0 * (&gram[i] * &d)).transpose());
                    ev.hessians[i].copy_from(&(2.0 * &gram[i]));
                }
                ev
            }
            Family::Ridge { x, y, mu, gram } => {
                let n = p.len();
                let mut ev = Evaluation::zeros(n, 2);
                let resid = x * p - y;
                let theta2 = p.norm_squared();
                ev.values[0] = resid.norm_squared() + mu * theta2;
                ev.values[1] = theta2;
                let g1 = 2.0 * (x.transpose() * &resid) + 2.0 * *mu * p;
                ev.gradients.row_mut(0).copy_from(&g1.transpose());
                ev.gradients.row_mut(1).copy_from(&(2.0 * p).transpose());
                let mut h1 = 2.0 * gram;
                for k in 0..n {
                    h1[(k, k)] += 2.0 * mu;
                }
                ev.hessians[0] = h1;
                ev.hessians[1] = DMatrix::from_diagonal_element(n, n, 2.0);
                ev
            }
        }
    }
}
