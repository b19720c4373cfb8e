//! Corank and fold diagnostics along the sampled Pareto set.
//!
//! Corank follows the `S_k` convention `min(n, m) − rank(df_x)`, with rank
//! counted as singular values above `τ·σmax`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::atlas::ParetoAtlas;
use crate::error::{Error, Result};
use crate::linalg::{combinations as subsets, null_space, numerical_rank, range_basis, singular_values};
use crate::problem::MultiObjective;
use crate::solver::ParetoPoint;

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub corank: usize,
    pub tolerance: f64,
}

pub fn rank_from_singular_values(singular_values: Vec<f64>, tau: f64) -> RankReport {
    let rank = numerical_rank(&singular_values, tau);
    RankReport { corank: singular_values.len() - rank, rank, singular_values, tolerance: tau }
}

/// Rank report of an `m × n` Jacobian; there are `min(n, m)` singular values.
pub fn rank_report(jacobian: &DMatrix<f64>, tau: f64) -> RankReport {
    rank_from_singular_values(singular_values(jacobian), tau)
}

pub fn corank_at(p: &dyn MultiObjective, x: &DVector<f64>, tau: f64) -> RankReport {
    rank_report(&p.jacobian(x), tau)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorankWitness {
    pub node: usize,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub corank: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorankCertificate {
    pub max_corank: usize,
    pub tolerance: f64,
    /// Nodes with corank ≥ 2.
    pub witnesses: Vec<CorankWitness>,
    /// Smallest `σ_{rank}/σmax` over corank-≤1 points: the margin to a
    /// corank jump. Reported, not asserted.
    pub min_relative_gap: f64,
    /// `true` iff every solved node has corank ≤ 1.
    pub passed: bool,
}

/// Re-thresholds the stored Jacobian spectra of every atlas point at `tau`.
pub fn certify_corank_on_atlas(atlas: &ParetoAtlas, tau: f64) -> CorankCertificate {
    let mut max_corank = 0;
    let mut witnesses = Vec::new();
    let mut min_gap = f64::INFINITY;
    for (node, pt) in atlas.solved() {
        let report = rank_from_singular_values(pt.jacobian_sv.clone(), tau);
        max_corank = max_corank.max(report.corank);
        if report.corank >= 2 {
            witnesses.push(CorankWitness {
                node,
                w: pt.w.clone(),
                x: pt.x.clone(),
                corank: report.corank,
                singular_values: report.singular_values,
            });
        } else if report.rank > 0 {
            let smax = report.singular_values[0];
            min_gap = min_gap.min(report.singular_values[report.rank - 1] / smax);
        }
    }
    CorankCertificate { max_corank, tolerance: tau, witnesses, min_relative_gap: min_gap, passed: max_corank <= 1 }
}

/// Rank of the `n × (m−1)` matrix with columns `∇f_i − ∇f_m`.
pub fn difference_matrix_rank(p: &dyn MultiObjective, pt: &ParetoPoint, tau: f64) -> usize {
    let j = p.jacobian(&pt.x_vec());
    let (m, n) = j.shape();
    if m < 2 {
        return 0;
    }
    let d = DMatrix::from_fn(n, m - 1, |r, c| j[(c, r)] - j[(m - 1, r)]);
    numerical_rank(&singular_values(&d), tau)
}

/// `max |⟨w/‖w‖, u⟩|` over an orthonormal basis `u` of `img(df_x)`. Zero
/// exactly when the image lies in `⟨w⟩⊥`.
pub fn image_weight_alignment(p: &dyn MultiObjective, pt: &ParetoPoint, tau: f64) -> f64 {
    let j = p.jacobian(&pt.x_vec());
    let w = DVector::from_column_slice(&pt.w);
    let w = &w / w.norm();
    let img = range_basis(&j, tau);
    img.column_iter().map(|u| u.dot(&w).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub lambda_jacobian_rank: usize,
    /// Orthonormal basis of `ker df_x`, one vector per entry.
    pub kernel_df_basis: Vec<Vec<f64>>,
    /// Orthonormal basis of `ker (dλ_f)_x`.
    pub kernel_dlambda_basis: Vec<Vec<f64>>,
    pub direct_sum: bool,
    pub is_fold: bool,
    /// Variables in pivoted order: the regular minor uses the first `m − 1`.
    pub variable_order: Vec<usize>,
    /// Objectives in pivoted order.
    pub objective_order: Vec<usize>,
    /// Smallest singular value of the chosen leading minor.
    pub minor_sigma_min: f64,
}

/// Pivoting that makes the leading `(m−1) × (m−1)` minor of the Jacobian
/// regular, plus the λ_f minors built from it.
#[derive(Debug, Clone)]
pub struct MinorLayout {
    pub variables: Vec<usize>,
    pub objectives: Vec<usize>,
    pub sigma_min: f64,
}

fn complete(chosen: &[usize], total: usize) -> Vec<usize> {
    let mut order = chosen.to_vec();
    order.extend((0..total).filter(|i| !chosen.contains(i)));
    order
}

/// Chooses objective and variable subsets of size `m − 1` maximizing the
/// smallest singular value of the corresponding block of the Jacobian.
/// Objectives are permuted only when no variable permutation alone works.
pub fn choose_minor(jacobian: &DMatrix<f64>, tau: f64) -> Result<MinorLayout> {
    let (m, n) = jacobian.shape();
    let k = m - 1;
    let smax = singular_values(jacobian).first().copied().unwrap_or(0.0);
    let score = |objs: &[usize], vars: &[usize]| -> f64 {
        if k == 0 {
            return f64::INFINITY;
        }
        let block = DMatrix::from_fn(k, k, |r, c| jacobian[(objs[r], vars[c])]);
        singular_values(&block).last().copied().unwrap_or(0.0)
    };
    let regular = |s: f64| k == 0 || (smax > 0.0 && s > tau * smax);

    let leading: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for vars in subsets(n, k) {
        let s = score(&leading, &vars);
        if best.as_ref().is_none_or(|b| s > b.0) {
            best = Some((s, leading.clone(), vars));
        }
    }
    if !best.as_ref().is_some_and(|b| regular(b.0)) {
        for objs in subsets(m, k) {
            for vars in subsets(n, k) {
                let s = score(&objs, &vars);
                if best.as_ref().is_none_or(|b| s > b.0) {
                    best = Some((s, objs.clone(), vars));
                }
            }
        }
    }
    match best {
        Some((s, objs, vars)) if regular(s) => Ok(MinorLayout {
            variables: complete(&vars, n),
            objectives: complete(&objs, m),
            sigma_min: s,
        }),
        _ => Err(Error::NoRegularMinor),
    }
}

/// The `m × m` matrix whose determinant is `J_i`: rows are the first
/// `m − 1` pivoted variables and variable `m − 1 + i`, columns the pivoted
/// objectives, entries `∂f_c/∂x_r`.
fn minor_matrix(jacobian: &DMatrix<f64>, layout: &MinorLayout, i: usize) -> (DMatrix<f64>, Vec<usize>) {
    let m = jacobian.nrows();
    let mut rows: Vec<usize> = layout.variables[..m - 1].to_vec();
    rows.push(layout.variables[m - 1 + i]);
    let mat = DMatrix::from_fn(m, m, |r, c| jacobian[(layout.objectives[c], rows[r])]);
    (mat, rows)
}

fn cofactors(a: &DMatrix<f64>) -> DMatrix<f64> {
    let k = a.nrows();
    if k == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(k, k, |r, c| {
        let minor = a.clone().remove_row(r).remove_column(c);
        let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

/// `λ_f(x) = (J_1(x), …, J_{n−m+1}(x))` for a fixed pivot layout.
pub fn lambda_values(p: &dyn MultiObjective, x: &DVector<f64>, layout: &MinorLayout) -> DVector<f64> {
    let jac = p.jacobian(x);
    let (m, n) = jac.shape();
    DVector::from_fn(n - m + 1, |i, _| minor_matrix(&jac, layout, i).0.determinant())
}

/// `(dλ_f)_x` by expanding each determinant derivative in cofactors; only
/// Hessians are needed since `J_i` involves first partials only.
pub fn lambda_jacobian(p: &dyn MultiObjective, x: &DVector<f64>, layout: &MinorLayout) -> DMatrix<f64> {
    let ev = p.evaluate(x);
    let (m, n) = ev.gradients.shape();
    let mut out = DMatrix::zeros(n - m + 1, n);
    for i in 0..n - m + 1 {
        let (mat, rows) = minor_matrix(&ev.gradients, layout, i);
        let cof = cofactors(&mat);
        for k in 0..n {
            let mut acc = 0.0;
            for r in 0..m {
                for c in 0..m {
                    acc += cof[(r, c)] * ev.hessians[layout.objectives[c]][(rows[r], k)];
                }
            }
            out[(i, k)] = acc;
        }
    }
    out
}

/// Central-difference `(dλ_f)_x`, for cross-checking [`lambda_jacobian`].
pub fn lambda_jacobian_fd(p: &dyn MultiObjective, x: &DVector<f64>, layout: &MinorLayout, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let cols: Vec<DVector<f64>> = (0..n)
        .map(|k| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            (lambda_values(p, &xp, layout) - lambda_values(p, &xm, layout)) / (2.0 * h)
        })
        .collect();
    DMatrix::from_columns(&cols)
}

fn columns(basis: &DMatrix<f64>) -> Vec<Vec<f64>> {
    basis.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Fold test at a corank-1 critical point with `n ≥ m`:
/// `rank (dλ_f)_x = n − m + 1` and `ker (dλ_f)_x ⊕ ker df_x = ℝⁿ`.
pub fn fold_check(p: &dyn MultiObjective, x: &DVector<f64>, tau: f64) -> Result<FoldReport> {
    let (n, m) = (p.source_dim(), p.num_objectives());
    if n < m {
        return Err(Error::DimensionMismatch(format!("fold criterion needs n ≥ m (n = {n}, m = {m})")));
    }
    let jac = p.jacobian(x);
    let report = rank_report(&jac, tau);
    if report.corank != 1 {
        return Err(Error::NotCorankOne(report.corank));
    }
    let layout = choose_minor(&jac, tau)?;
    let dlambda = lambda_jacobian(p, x, &layout);
    let lambda_rank = numerical_rank(&singular_values(&dlambda), tau);
    let ker_lambda = null_space(&dlambda, tau);
    let ker_df = null_space(&jac, tau);
    let direct_sum = ker_lambda.ncols() + ker_df.ncols() == n && {
        let joined = DMatrix::from_fn(n, n, |r, c| {
            if c < ker_lambda.ncols() {
                ker_lambda[(r, c)]
            } else {
                ker_df[(r, c - ker_lambda.ncols())]
            }
        });
        numerical_rank(&singular_values(&joined), tau) == n
    };
    Ok(FoldReport {
        lambda_jacobian_rank: lambda_rank,
        kernel_df_basis: columns(&ker_df),
        kernel_dlambda_basis: columns(&ker_lambda),
        direct_sum,
        is_fold: lambda_rank == n - m + 1 && direct_sum,
        variable_order: layout.variables,
        objective_order: layout.objectives,
        minor_sigma_min: layout.sigma_min,
    })
}
