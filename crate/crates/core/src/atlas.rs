//! Barycentric simplex grids and the face-stratified Pareto atlas.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::MultiObjective;
use crate::solver::{scalarize, subproblem_solve, ParetoPoint, SolverConfig, Weight};

/// Absolute tolerance on objective values for dominance comparisons.
pub const DOMINANCE_TOL: f64 = 1e-9;

/// All weights `k / r` with non-negative integer `k` summing to `r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GridShape")]
pub struct SimplexGrid {
    pub m: usize,
    pub resolution: u32,
    /// Integer lattice coordinates, lexicographically descending.
    pub lattice: Vec<Vec<u32>>,
    /// Support `{i : w_i > 0}` of each node.
    pub faces: Vec<Vec<usize>>,
    #[serde(skip)]
    index: HashMap<Vec<u32>, usize>,
}

#[derive(Deserialize)]
struct GridShape {
    m: usize,
    resolution: u32,
}

impl TryFrom<GridShape> for SimplexGrid {
    type Error = Error;

    fn try_from(g: GridShape) -> Result<Self> {
        Self::new(g.m, g.resolution)
    }
}

impl SimplexGrid {
    pub fn new(m: usize, resolution: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidWeight("simplex grid needs m ≥ 1".into()));
        }
        if resolution == 0 {
            return Err(Error::InvalidWeight("grid resolution must be at least 1".into()));
        }
        let mut lattice = Vec::new();
        let mut cur = vec![0u32; m];
        fn fill(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            let m = cur.len();
            if pos == m - 1 {
                cur[pos] = left;
                out.push(cur.clone());
                return;
            }
            for k in (0..=left).rev() {
                cur[pos] = k;
                fill(pos + 1, left - k, cur, out);
            }
        }
        fill(0, resolution, &mut cur, &mut lattice);
        let faces = lattice
            .iter()
            .map(|k| (0..m).filter(|&i| k[i] > 0).collect())
            .collect();
        let index = lattice.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Ok(Self { m, resolution, lattice, faces, index })
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn weight(&self, node: usize) -> Weight {
        let r = self.resolution as f64;
        let coords = self.lattice[node].iter().map(|&k| k as f64 / r).collect();
        Weight::on_face(coords, self.faces[node].clone()).expect("lattice weights lie on the simplex")
    }

    pub fn node_of(&self, lattice: &[u32]) -> Option<usize> {
        self.index.get(lattice).copied()
    }

    /// Nodes one unit move away, in increasing node order.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let k = &self.lattice[node];
        let mut out = Vec::new();
        for i in 0..self.m {
            if k[i] == 0 {
                continue;
            }
            for j in 0..self.m {
                if i != j {
                    let mut next = k.clone();
                    next[i] -= 1;
                    next[j] += 1;
                    out.push(self.index[&next]);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Undirected edges `(a, b)` with `a < b`.
    pub fn adjacency(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for a in 0..self.len() {
            for b in self.neighbors(a) {
                if a < b {
                    edges.push((a, b));
                }
            }
        }
        edges
    }

    /// Number of unit moves between two nodes.
    pub fn lattice_distance(&self, a: usize, b: usize) -> u32 {
        let d: u32 = self.lattice[a]
            .iter()
            .zip(&self.lattice[b])
            .map(|(x, y)| x.abs_diff(*y))
            .sum();
        d / 2
    }

    /// Nodes lying in the closed face `Δ_I`.
    pub fn nodes_on_face(&self, face: &[usize]) -> Vec<usize> {
        (0..self.len())
            .filter(|&n| self.faces[n].iter().all(|i| face.contains(i)))
            .collect()
    }

    /// Node closest to the barycenter; ties go to the lower node index.
    pub fn center_node(&self) -> usize {
        let c = self.resolution as f64 / self.m as f64;
        let dist = |n: usize| -> f64 { self.lattice[n].iter().map(|&k| (k as f64 - c).powi(2)).sum() };
        (0..self.len())
            .min_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)))
            .expect("grid is non-empty")
    }

    /// Breadth-first levels from the center node. Each entry is
    /// `(node, parent)`; the parent lies on the previous level.
    pub fn bfs_levels(&self) -> Vec<Vec<(usize, Option<usize>)>> {
        let start = self.center_node();
        let mut seen = vec![false; self.len()];
        seen[start] = true;
        let mut levels = vec![vec![(start, None)]];
        let mut queue = VecDeque::from([start]);
        let mut depth = vec![0usize; self.len()];
        while let Some(node) = queue.pop_front() {
            for nb in self.neighbors(node) {
                if !seen[nb] {
                    seen[nb] = true;
                    depth[nb] = depth[node] + 1;
                    if levels.len() <= depth[nb] {
                        levels.push(Vec::new());
                    }
                    levels[depth[nb]].push((nb, Some(node)));
                    queue.push_back(nb);
                }
            }
        }
        levels
    }
}

/// All non-empty subsets of `0..m`, smallest first.
pub fn all_faces(m: usize) -> Vec<Vec<usize>> {
    let mut faces: Vec<Vec<usize>> = (1u64..(1u64 << m))
        .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    faces.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    faces
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeFailure {
    pub node: usize,
    pub w: Vec<f64>,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtlasSummary {
    pub nodes: usize,
    pub solved: usize,
    pub max_kkt_residual: f64,
    /// `max kkt_residual / grad_tol`; at most 1 when every solve converged.
    pub max_kkt_ratio: f64,
    pub corank_histogram: BTreeMap<usize, usize>,
    /// Smallest distance between solutions of distinct nodes.
    pub min_pairwise_distance: f64,
    /// Largest distance between solutions of adjacent nodes.
    pub max_adjacent_distance: f64,
}

/// The scalarization map sampled on a [`SimplexGrid`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParetoAtlas {
    pub n: usize,
    pub grid: SimplexGrid,
    /// One slot per grid node; `None` where the solve failed.
    pub points: Vec<Option<ParetoPoint>>,
    pub failures: Vec<NodeFailure>,
    pub adjacency: Vec<(usize, usize)>,
    pub summary: AtlasSummary,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Solves every grid node, warm-starting each from its BFS parent. Nodes of
/// one BFS level are solved in parallel.
pub fn build_atlas(p: &dyn MultiObjective, resolution: u32, cfg: &SolverConfig) -> Result<ParetoAtlas> {
    cfg.validate()?;
    let grid = SimplexGrid::new(p.num_objectives(), resolution)?;
    let mut points: Vec<Option<ParetoPoint>> = vec![None; grid.len()];
    let mut errors: Vec<Option<String>> = vec![None; grid.len()];
    for level in grid.bfs_levels() {
        let solved: Vec<(usize, std::result::Result<ParetoPoint, String>)> = level
            .par_iter()
            .map(|&(node, parent)| {
                let start = parent.and_then(|q| points[q].as_ref()).map(|pt| pt.x.clone());
                let local = match start {
                    Some(x0) => cfg.with_initial_point(x0),
                    None => cfg.clone(),
                };
                (node, scalarize(p, &grid.weight(node), &local).map_err(|e| e.to_string()))
            })
            .collect();
        for (node, res) in solved {
            match res {
                Ok(pt) => points[node] = Some(pt),
                Err(e) => errors[node] = Some(e),
            }
        }
    }
    let failures = errors
        .into_iter()
        .enumerate()
        .filter_map(|(node, e)| {
            e.map(|error| NodeFailure { node, w: grid.weight(node).coords().to_vec(), error })
        })
        .collect();
    let adjacency = grid.adjacency();
    let summary = summarize(&grid, &points, &adjacency);
    Ok(ParetoAtlas { n: p.source_dim(), grid, points, failures, adjacency, summary })
}

fn summarize(grid: &SimplexGrid, points: &[Option<ParetoPoint>], adjacency: &[(usize, usize)]) -> AtlasSummary {
    let solved: Vec<&ParetoPoint> = points.iter().flatten().collect();
    let mut hist = BTreeMap::new();
    for pt in &solved {
        *hist.entry(pt.corank).or_insert(0) += 1;
    }
    let min_pairwise = (0..solved.len())
        .into_par_iter()
        .map(|a| {
            ((a + 1)..solved.len())
                .map(|b| distance(&solved[a].x, &solved[b].x))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let max_adjacent = adjacency
        .iter()
        .filter_map(|&(a, b)| Some(distance(&points[a].as_ref()?.x, &points[b].as_ref()?.x)))
        .fold(0.0, f64::max);
    AtlasSummary {
        nodes: grid.len(),
        solved: solved.len(),
        max_kkt_residual: solved.iter().map(|p| p.kkt_residual).fold(0.0, f64::max),
        max_kkt_ratio: solved.iter().map(|p| p.kkt_residual / p.grad_tol).fold(0.0, f64::max),
        corank_histogram: hist,
        min_pairwise_distance: min_pairwise,
        max_adjacent_distance: max_adjacent,
    }
}

impl ParetoAtlas {
    /// `(node, point)` for every solved node.
    pub fn solved(&self) -> impl Iterator<Item = (usize, &ParetoPoint)> {
        self.points.iter().enumerate().filter_map(|(i, p)| p.as_ref().map(|p| (i, p)))
    }

    pub fn max_grad_tol(&self) -> f64 {
        self.solved().map(|(_, p)| p.grad_tol).fold(0.0, f64::max)
    }

    /// Node pairs `(a, b)` where `f(x_a)` dominates `f(x_b)` beyond `tol`.
    pub fn dominance_violations(&self, tol: f64) -> Vec<(usize, usize)> {
        let solved: Vec<(usize, &ParetoPoint)> = self.solved().collect();
        solved
            .par_iter()
            .flat_map_iter(|&(a, pa)| {
                solved.iter().filter_map(move |&(b, pb)| {
                    let weakly = pa.fx.iter().zip(&pb.fx).all(|(u, v)| *u <= *v + tol);
                    let strictly = pa.fx.iter().zip(&pb.fx).any(|(u, v)| *u < *v - tol);
                    (a != b && weakly && strictly).then_some((a, b))
                })
            })
            .collect()
    }

    /// One row per node: weights, solution, objective values, residual,
    /// corank and face tag (`;`-separated 0-based indices).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let m = self.grid.m;
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = vec!["node".into()];
        header.extend((1..=m).map(|i| format!("w{i}")));
        header.extend((1..=self.n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("f{i}")));
        header.extend(["residual", "corank", "face", "status"].map(String::from));
        wtr.write_record(&header)?;
        for node in 0..self.grid.len() {
            let w = self.grid.weight(node);
            let face = self.grid.faces[node].iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
            let mut row: Vec<String> = vec![node.to_string()];
            row.extend(w.coords().iter().map(|v| format!("{v}")));
            match &self.points[node] {
                Some(pt) => {
                    row.extend(pt.x.iter().map(|v| format!("{v:e}")));
                    row.extend(pt.fx.iter().map(|v| format!("{v:e}")));
                    row.push(format!("{:e}", pt.kkt_residual));
                    row.push(pt.corank.to_string());
                    row.push(face);
                    row.push("ok".into());
                }
                None => {
                    row.extend(std::iter::repeat_n(String::new(), self.n + m + 2));
                    row.push(face);
                    row.push("failed".into());
                }
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaceDiscrepancy {
    pub face: Vec<usize>,
    pub nodes: usize,
    pub max_discrepancy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaceConsistencyReport {
    pub faces: Vec<FaceDiscrepancy>,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub failures: usize,
    pub passed: bool,
}

/// Re-solves every node of every face `Δ_I` through the sub-problem `f_I`
/// from a cold start and compares with the atlas solution.
pub fn face_consistency(p: &dyn MultiObjective, atlas: &ParetoAtlas, cfg: &SolverConfig) -> FaceConsistencyReport {
    let faces = all_faces(atlas.grid.m);
    let cold = SolverConfig { initial_point: None, ..cfg.clone() };
    let tolerance = 10.0 * atlas.max_grad_tol().max(cfg.grad_tol);
    let per_face: Vec<(FaceDiscrepancy, usize)> = faces
        .par_iter()
        .map(|face| {
            let mut worst = 0.0_f64;
            let mut failures = 0;
            let nodes = atlas.grid.nodes_on_face(face);
            for &node in &nodes {
                let Some(pt) = &atlas.points[node] else { continue };
                match subproblem_solve(p, face, &atlas.grid.weight(node), &cold) {
                    Ok(sub) => {
                        let d = sub.x.iter().zip(&pt.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                        worst = worst.max(d);
                    }
                    Err(_) => failures += 1,
                }
            }
            (FaceDiscrepancy { face: face.clone(), nodes: nodes.len(), max_discrepancy: worst }, failures)
        })
        .collect();
    let failures: usize = per_face.iter().map(|(_, f)| f).sum();
    let faces: Vec<FaceDiscrepancy> = per_face.into_iter().map(|(f, _)| f).collect();
    let max_discrepancy = faces.iter().map(|f| f.max_discrepancy).fold(0.0, f64::max);
    FaceConsistencyReport {
        passed: failures == 0 && max_discrepancy <= tolerance,
        faces,
        max_discrepancy,
        tolerance,
        failures,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollapsedPair {
    pub a: usize,
    pub b: usize,
    pub lattice_distance: u32,
    pub x_distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub injective: bool,
    pub collapse_tol: f64,
    pub collapsed_pairs: Vec<CollapsedPair>,
}

pub const DEFAULT_COLLAPSE_TOL: f64 = 1e-6;

/// Flags node pairs more than two grid steps apart whose solutions lie
/// within `collapse_tol` of each other.
pub fn injectivity_scan(atlas: &ParetoAtlas, collapse_tol: f64) -> InjectivityReport {
    let solved: Vec<(usize, &ParetoPoint)> = atlas.solved().collect();
    let collapsed_pairs: Vec<CollapsedPair> = (0..solved.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let (a, pa) = solved[i];
            solved[i + 1..].iter().filter_map(move |&(b, pb)| {
                let steps = atlas.grid.lattice_distance(a, b);
                let d = distance(&pa.x, &pb.x);
                (steps > 2 && d <= collapse_tol).then_some(CollapsedPair {
                    a,
                    b,
                    lattice_distance: steps,
                    x_distance: d,
                })
            })
        })
        .collect();
    InjectivityReport { injective: collapsed_pairs.is_empty(), collapse_tol, collapsed_pairs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_problem, FamilySpec};

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn grid_counts_and_faces() {
        for (m, r) in [(1usize, 3u32), (2, 5), (3, 10), (4, 6)] {
            let g = SimplexGrid::new(m, r).unwrap();
            assert_eq!(g.len() as u64, binomial(r as u64 + m as u64 - 1, m as u64 - 1));
            for face in all_faces(m) {
                assert!(!g.nodes_on_face(&face).is_empty());
            }
            for node in 0..g.len() {
                let w = g.weight(node);
                assert!((w.coords().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                assert_eq!(w.face(), g.faces[node].as_slice());
            }
            let levels = g.bfs_levels();
            assert_eq!(levels.iter().map(Vec::len).sum::<usize>(), g.len());
        }
        assert!(SimplexGrid::new(3, 0).is_err());
    }

    #[test]
    fn adjacency_is_one_step() {
        let g = SimplexGrid::new(3, 4).unwrap();
        for (a, b) in g.adjacency() {
            assert_eq!(g.lattice_distance(a, b), 1);
        }
    }

    #[test]
    fn single_objective_atlas() {
        let p = build_problem(FamilySpec::DistanceSquared { points: vec![vec![3.0, -1.0]] }).unwrap();
        let atlas = build_atlas(&p, 4, &SolverConfig::default()).unwrap();
        assert_eq!(atlas.points.len(), 1);
        let x = &atlas.points[0].as_ref().unwrap().x;
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_export_has_row_per_node() {
        let p = build_problem(FamilySpec::Example32).unwrap();
        let atlas = build_atlas(&p, 3, &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        atlas.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + atlas.grid.len());
        assert!(text.starts_with("node,w1,w2,w3,x1,x2,x3,f1,f2,f3,residual,corank,face,status"));
    }
}
