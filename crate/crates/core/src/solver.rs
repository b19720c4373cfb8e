//! Weighted-sum scalarization by damped Newton.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{rank_report, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg::spd_solve;
use crate::problem::{MultiObjective, SubProblem};

const SIMPLEX_TOL: f64 = 1e-12;

/// A point of the standard simplex, optionally confined to a face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    coords: Vec<f64>,
    face: Vec<usize>,
}

impl Weight {
    /// Weight whose face is its support.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let face = (0..coords.len()).filter(|&i| coords[i] > 0.0).collect();
        Self::on_face(coords, face)
    }

    /// Weight constrained to vanish outside `face`.
    pub fn on_face(coords: Vec<f64>, mut face: Vec<usize>) -> Result<Self> {
        let m = coords.len();
        if m == 0 {
            return Err(Error::InvalidWeight("weight must have at least one coordinate".into()));
        }
        face.sort_unstable();
        face.dedup();
        if face.iter().any(|&i| i >= m) {
            return Err(Error::InvalidWeight(format!("face {face:?} out of range for m = {m}")));
        }
        if let Some(v) = coords.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidWeight(format!("coordinate {v} is negative or not finite")));
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidWeight(format!("coordinates sum to {sum}, not 1")));
        }
        if let Some(i) = (0..m).find(|i| coords[*i] != 0.0 && face.binary_search(i).is_err()) {
            return Err(Error::InvalidWeight(format!("w[{i}] is non-zero outside face {face:?}")));
        }
        Ok(Self { coords, face })
    }

    pub fn vertex(m: usize, i: usize) -> Self {
        let mut c = vec![0.0; m];
        c[i] = 1.0;
        Self { coords: c, face: vec![i] }
    }

    pub fn barycenter(m: usize) -> Self {
        Self { coords: vec![1.0 / m as f64; m], face: (0..m).collect() }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn face(&self) -> &[usize] {
        &self.face
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Chart coordinates `z = (w_1, …, w_{m−1})`.
    pub fn chart(&self) -> &[f64] {
        &self.coords[..self.coords.len() - 1]
    }

    /// Coordinates of the indices in `face`, in order.
    pub fn restrict(&self, face: &[usize]) -> Vec<f64> {
        face.iter().map(|&i| self.coords[i]).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative gradient tolerance; the effective tolerance is this times
    /// `max(1, ‖Σ w_i ∇f_i(x₀)‖)`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub shrink: f64,
    /// Start point; the origin when `None`.
    pub initial_point: Option<Vec<f64>>,
    /// Rank tolerance for the corank stored on each [`ParetoPoint`].
    pub rank_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iter: 200,
            armijo_c: 1e-4,
            shrink: 0.5,
            initial_point: None,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::InvalidProblem("grad_tol must be positive and max_iter at least 1".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0 && self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidProblem("Armijo parameters must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn with_initial_point(&self, x0: Vec<f64>) -> Self {
        Self { initial_point: Some(x0), ..self.clone() }
    }
}

/// A converged scalarized minimizer and its first-order data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub w: Vec<f64>,
    pub face: Vec<usize>,
    pub x: Vec<f64>,
    pub fx: Vec<f64>,
    /// `‖Σ w_i ∇f_i(x)‖`.
    pub kkt_residual: f64,
    /// Effective gradient tolerance the solve was held to.
    pub grad_tol: f64,
    pub iterations: usize,
    /// Singular values of the `m × n` Jacobian, descending.
    pub jacobian_sv: Vec<f64>,
    pub corank: usize,
}

impl ParetoPoint {
    pub fn x_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }
}

/// Raw Newton result for arbitrary non-negative weights.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: DVector<f64>,
    pub residual: f64,
    pub grad_tol: f64,
    pub iterations: usize,
    /// Scalarized objective at every accepted iterate, starting with `x₀`.
    pub trace: Vec<f64>,
}

/// Minimizes `Σ weights_i f_i` by Newton steps on the mixed Hessian with
/// Armijo backtracking. `weights` need not sum to one.
pub fn minimize_weighted(
    p: &dyn MultiObjective,
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<NewtonOutcome> {
    cfg.validate()?;
    let n = p.source_dim();
    if weights.len() != p.num_objectives() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} objectives",
            weights.len(),
            p.num_objectives()
        )));
    }
    let mut x = match &cfg.initial_point {
        Some(x0) if x0.len() == n => DVector::from_column_slice(x0),
        Some(x0) => {
            return Err(Error::DimensionMismatch(format!(
                "initial point has length {}, expected {n}",
                x0.len()
            )))
        }
        None => DVector::zeros(n),
    };
    let wv = DVector::from_column_slice(weights);
    let phi = |x: &DVector<f64>| p.values(x).dot(&wv);

    let mut ev = p.evaluate(&x);
    let mut g = ev.weighted_gradient(weights);
    let tol = cfg.grad_tol * g.norm().max(1.0);
    let mut value = ev.values.dot(&wv);
    let mut trace = vec![value];
    let mut best = (g.norm(), x.clone());

    for iter in 0..cfg.max_iter {
        let gnorm = g.norm();
        if gnorm < best.0 {
            best = (gnorm, x.clone());
        }
        if gnorm <= tol {
            return Ok(NewtonOutcome { x, residual: gnorm, grad_tol: tol, iterations: iter, trace });
        }
        let h = ev.weighted_hessian(weights);
        let d = spd_solve(&h, &(-&g))
            .ok_or_else(|| Error::SingularNewtonSystem { x: x.iter().copied().collect() })?;
        let slope = g.dot(&d);

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let xt = &x + t * &d;
            let vt = phi(&xt);
            if vt <= value + cfg.armijo_c * t * slope {
                accepted = Some((xt, vt));
                break;
            }
            t *= cfg.shrink;
        }
        // Backtracking only stalls when the decrease is below rounding of φ;
        // the full Newton step is then the best available move.
        let (xn, vn) = accepted.unwrap_or_else(|| {
            let xt = &x + &d;
            let vt = phi(&xt);
            (xt, vt)
        });
        x = xn;
        value = vn;
        trace.push(value);
        ev = p.evaluate(&x);
        g = ev.weighted_gradient(weights);
    }
    let gnorm = g.norm();
    if gnorm <= tol {
        return Ok(NewtonOutcome { x, residual: gnorm, grad_tol: tol, iterations: cfg.max_iter, trace });
    }
    if gnorm < best.0 {
        best = (gnorm, x);
    }
    Err(Error::MaxIterExceeded {
        iterations: cfg.max_iter,
        residual: best.0,
        best: best.1.iter().copied().collect(),
    })
}

fn pareto_point(p: &dyn MultiObjective, w: &Weight, out: NewtonOutcome, rank_tol: f64) -> ParetoPoint {
    let ev = p.evaluate(&out.x);
    let report = rank_report(&ev.gradients, rank_tol);
    ParetoPoint {
        w: w.coords().to_vec(),
        face: w.face().to_vec(),
        x: out.x.iter().copied().collect(),
        fx: ev.values.iter().copied().collect(),
        kkt_residual: ev.weighted_gradient(w.coords()).norm(),
        grad_tol: out.grad_tol,
        iterations: out.iterations,
        jacobian_sv: report.singular_values,
        corank: report.corank,
    }
}

/// `x*(w) = argmin Σ w_i f_i` with KKT residual and Jacobian spectrum.
pub fn scalarize(p: &dyn MultiObjective, w: &Weight, cfg: &SolverConfig) -> Result<ParetoPoint> {
    if w.dim() != p.num_objectives() {
        return Err(Error::DimensionMismatch(format!(
            "weight has {} coordinates for {} objectives",
            w.dim(),
            p.num_objectives()
        )));
    }
    let out = minimize_weighted(p, w.coords(), cfg)?;
    Ok(pareto_point(p, w, out, cfg.rank_tol))
}

/// Solves the sub-problem `f_I` with the weight restricted to `face` and
/// reports the result against the full problem.
pub fn subproblem_solve(
    p: &dyn MultiObjective,
    face: &[usize],
    w: &Weight,
    cfg: &SolverConfig,
) -> Result<ParetoPoint> {
    let w = Weight::on_face(w.coords().to_vec(), face.to_vec())?;
    if w.dim() != p.num_objectives() {
        return Err(Error::DimensionMismatch("weight and problem disagree on m".into()));
    }
    let sub = SubProblem::new(p, w.face().to_vec())?;
    let out = minimize_weighted(&sub, &w.restrict(w.face()), cfg)?;
    Ok(pareto_point(p, &w, out, cfg.rank_tol))
}

/// Jacobian `∂x̃*/∂z` in the chart `z = (w_1, …, w_{m−1})`:
/// column `j` is `−A (∇f_j − ∇f_m)` with `A = (Σ w_i H(f_i))⁻¹`.
pub fn x_star_derivative(p: &dyn MultiObjective, pt: &ParetoPoint) -> Result<DMatrix<f64>> {
    let m = p.num_objectives();
    x_star_derivative_chart(p, pt, m - 1)
}

/// As [`x_star_derivative`] but in the chart that eliminates coordinate
/// `eliminated` instead of the last one; columns follow the remaining
/// coordinates in increasing order.
pub fn x_star_derivative_chart(
    p: &dyn MultiObjective,
    pt: &ParetoPoint,
    eliminated: usize,
) -> Result<DMatrix<f64>> {
    let (n, m) = (p.source_dim(), p.num_objectives());
    if eliminated >= m || pt.w.len() != m || pt.x.len() != n {
        return Err(Error::DimensionMismatch("point does not match problem".into()));
    }
    let ev = p.evaluate(&pt.x_vec());
    let h = ev.weighted_hessian(&pt.w);
    let chol = h.cholesky().ok_or(Error::SingularMixedHessian)?;
    let free: Vec<usize> = (0..m).filter(|&j| j != eliminated).collect();
    let diffs = DMatrix::from_fn(n, free.len(), |r, c| {
        ev.gradients[(free[c], r)] - ev.gradients[(eliminated, r)]
    });
    Ok(-chol.solve(&diffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dvec;
    use crate::problem::{build_problem, builtin, FamilySpec, PointSampler};
    use proptest::prelude::*;

    fn ex31() -> crate::ObjectiveProblem {
        build_problem(FamilySpec::Example31).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn weight_validation() {
        assert!(Weight::new(vec![0.5, 0.5, 0.0]).is_ok());
        assert!(Weight::new(vec![0.5, 0.6]).is_err());
        assert!(Weight::new(vec![1.5, -0.5]).is_err());
        assert!(Weight::on_face(vec![0.5, 0.5, 0.0], vec![0]).is_err());
        let w = Weight::new(vec![0.2, 0.0, 0.8]).unwrap();
        assert_eq!(w.face(), &[0, 2]);
        assert_eq!(w.chart(), &[0.2, 0.0]);
    }

    #[test]
    fn example31_vertex_and_edge() {
        let p = ex31();
        let cfg = SolverConfig::default();
        let pt = scalarize(&p, &Weight::vertex(3, 0), &cfg).unwrap();
        assert!(close(&pt.x, &[0.0, 0.0, 0.0], 1e-12));
        let pt = scalarize(&p, &Weight::new(vec![0.5, 0.5, 0.0]).unwrap(), &cfg).unwrap();
        assert!(close(&pt.x, &[-0.25, -0.25, 0.0], 1e-12), "{:?}", pt.x);
        assert!(pt.kkt_residual <= pt.grad_tol);
    }

    /// Stationarity of Σ w_i ‖x − p_i‖² solved as a plain linear system.
    fn distance_oracle(points: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
        let n = points[0].len();
        let total: f64 = w.iter().sum();
        let a = DMatrix::from_diagonal_element(n, n, 2.0 * total);
        let mut rhs = DVector::zeros(n);
        for (p, wi) in points.iter().zip(w) {
            rhs += 2.0 * *wi * dvec(p);
        }
        a.lu().solve(&rhs).unwrap().iter().copied().collect()
    }

    #[test]
    fn distance_squared_matches_linear_oracle() {
        let points = vec![vec![1.0, 2.0, 0.0], vec![-3.0, 0.5, 1.0], vec![0.0, 0.0, 4.0], vec![2.0, -1.0, -1.0]];
        let p = build_problem(FamilySpec::DistanceSquared { points: points.clone() }).unwrap();
        let w = Weight::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let pt = scalarize(&p, &w, &SolverConfig::default()).unwrap();
        assert!(close(&pt.x, &distance_oracle(&points, w.coords()), 1e-10));
        // Segment between the first two points.
        for t in [0.0, 0.25, 0.9, 1.0] {
            let w = Weight::new(vec![t, 1.0 - t, 0.0, 0.0]).unwrap();
            let pt = subproblem_solve(&p, &[0, 1], &w, &SolverConfig::default()).unwrap();
            let expect: Vec<f64> = (0..3).map(|k| t * points[0][k] + (1.0 - t) * points[1][k]).collect();
            assert!(close(&pt.x, &expect, 1e-10));
        }
    }

    #[test]
    fn subproblem_vertices() {
        let pt = subproblem_solve(&ex31(), &[0], &Weight::vertex(3, 0), &SolverConfig::default()).unwrap();
        assert!(close(&pt.x, &[0.0; 3], 1e-12));
        let ridge = build_problem(builtin::ridge_instance(1, 0.1)).unwrap();
        let pt = subproblem_solve(&ridge, &[1], &Weight::vertex(2, 1), &SolverConfig::default()).unwrap();
        assert!(close(&pt.x, &[0.0; 5], 1e-12));
    }

    #[test]
    fn derivative_at_first_vertex() {
        let p = ex31();
        let pt = scalarize(&p, &Weight::vertex(3, 0), &SolverConfig::default()).unwrap();
        // Closed form differentiated in (w₂, w₃) at the origin of that chart.
        let d = x_star_derivative_chart(&p, &pt, 0).unwrap();
        let expect = DMatrix::from_row_slice(3, 2, &[-0.5, 0.5, -0.5, 0.5, 0.0, 0.0]);
        assert!((d - &expect).amax() < 1e-12);
        // Same closed form in the default chart z = (w₁, w₂).
        let d = x_star_derivative(&p, &pt).unwrap();
        let expect = DMatrix::from_row_slice(3, 2, &[-0.5, -1.0, -0.5, -1.0, 0.0, 0.0]);
        assert!((d - &expect).amax() < 1e-12);
    }

    #[test]
    fn derivative_single_objective_is_empty() {
        let p = build_problem(FamilySpec::GenericQuadratic {
            q: vec![vec![vec![2.0, 0.0], vec![0.0, 1.0]]],
            b: vec![vec![1.0, 1.0]],
            c: vec![0.0],
        })
        .unwrap();
        let pt = scalarize(&p, &Weight::vertex(1, 0), &SolverConfig::default()).unwrap();
        assert_eq!(x_star_derivative(&p, &pt).unwrap().shape(), (2, 0));
    }

    fn fd_derivative(p: &dyn MultiObjective, w: &[f64], h: f64) -> DMatrix<f64> {
        let m = w.len();
        let n = p.source_dim();
        let cfg = SolverConfig { grad_tol: 1e-14, ..Default::default() };
        let mut out = DMatrix::zeros(n, m - 1);
        for j in 0..m - 1 {
            let shifted = |s: f64| {
                let mut c = w.to_vec();
                c[j] += s;
                c[m - 1] -= s;
                minimize_weighted(p, &c, &cfg).unwrap().x
            };
            out.set_column(j, &((shifted(h) - shifted(-h)) / (2.0 * h)));
        }
        out
    }

    #[test]
    fn derivative_matches_finite_differences_example32() {
        let p = build_problem(FamilySpec::Example32).unwrap();
        for w in [[0.3, 0.3, 0.4], [0.2, 0.5, 0.3], [0.6, 0.1, 0.3]] {
            let pt = scalarize(&p, &Weight::new(w.to_vec()).unwrap(), &SolverConfig::default()).unwrap();
            let an = x_star_derivative(&p, &pt).unwrap();
            let fd = fd_derivative(&p, &w, 1e-5);
            let rel = (&an - &fd).amax() / an.amax().max(1.0);
            assert!(rel <= 1e-6, "rel error {rel:.2e}");
        }
    }

    #[test]
    fn warm_start_independence_and_descent() {
        let p = build_problem(FamilySpec::Example32).unwrap();
        let w = Weight::new(vec![0.2, 0.3, 0.5]).unwrap();
        let base = scalarize(&p, &w, &SolverConfig::default()).unwrap();
        for x0 in (PointSampler { radius: 10.0, seed: 3 }).sample(3, 20) {
            let cfg = SolverConfig::default().with_initial_point(x0.iter().copied().collect());
            let out = minimize_weighted(&p, w.coords(), &cfg).unwrap();
            let tol = 10.0 * out.grad_tol.max(base.grad_tol);
            assert!((out.x.clone() - base.x_vec()).amax() <= tol);
            let slack = 1e-12 * out.trace[0].abs().max(1.0);
            assert!(out.trace.windows(2).all(|v| v[1] <= v[0] + slack), "{:?}", out.trace);
        }
    }

    #[test]
    fn singular_mixed_hessian_is_reported() {
        // Negated strongly convex quadratic: the mixed Hessian is negative definite.
        let p = build_problem(FamilySpec::GenericQuadratic {
            q: vec![vec![vec![1.0]]],
            b: vec![vec![1.0]],
            c: vec![0.0],
        })
        .unwrap();
        let neg = crate::problem::TargetTransform::new(&p, DMatrix::from_element(1, 1, -1.0)).unwrap();
        let err = minimize_weighted(&neg, &[1.0], &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::SingularNewtonSystem { .. }));
    }

    #[test]
    fn non_converging_solve_reports_best_iterate() {
        let p = build_problem(FamilySpec::Example32).unwrap();
        let cfg = SolverConfig { max_iter: 1, initial_point: Some(vec![50.0, 50.0, 50.0]), grad_tol: 1e-300, ..Default::default() };
        match scalarize(&p, &Weight::barycenter(3), &cfg) {
            Err(Error::MaxIterExceeded { best, residual, .. }) => {
                assert_eq!(best.len(), 3);
                assert!(residual.is_finite());
            }
            other => panic!("expected MaxIterExceeded, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn positive_rescaling_keeps_minimizer(a in 0.01..1.0f64, b in 0.01..1.0f64, c in 0.01..1.0f64, s in 0.1..50.0f64) {
            let p = build_problem(FamilySpec::Example32).unwrap();
            let total = a + b + c;
            let w = [a / total, b / total, c / total];
            let scaled: Vec<f64> = w.iter().map(|v| v * s).collect();
            let cfg = SolverConfig::default();
            let x1 = minimize_weighted(&p, &w, &cfg).unwrap();
            let x2 = minimize_weighted(&p, &scaled, &cfg).unwrap();
            prop_assert!((x1.x - x2.x).amax() <= 10.0 * 1e-10 * s.max(1.0));
        }
    }
}
