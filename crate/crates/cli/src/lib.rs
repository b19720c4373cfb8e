//! Argument model and command runners for the `simplicial` binary.
//!
//! Exit codes: 0 pass, 1 certificate failure, 2 input error, 3 numerical
//! failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use simplicial::apps::{location_pareto_set, ridge_path, LocationInstance, RidgeInstance, HULL_TOL};
use simplicial::atlas::{build_atlas, face_consistency, injectivity_scan, ParetoAtlas, DEFAULT_COLLAPSE_TOL};
use simplicial::diagnostics::{certify_corank_on_atlas, DEFAULT_RANK_TOL};
use simplicial::perturb::{genericity_experiment, stability_experiment, tracker_experiment, TrackerConfig};
use simplicial::problem::{builtin, parse_problem, ridge_from_csv, serialize_problem};
use simplicial::{build_problem, scalarize, Error, FamilySpec, MultiObjective, SolverConfig, Weight};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CERTIFICATE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "simplicial", version, about = "Pareto sets of strongly convex multiobjective problems")]
pub struct Cli {
    /// Worker threads for the parallel parts; all cores when unset.
    #[arg(long, global = true, env = "SIMPLICIAL_THREADS")]
    pub threads: Option<usize>,

    /// Print a machine-readable run report instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the scalarized problem at one or more weights.
    Solve(SolveArgs),
    /// Sample the Pareto set on a simplex grid and export it.
    Atlas(AtlasArgs),
    /// Certify corank ≤ 1, face consistency and injectivity on a grid.
    Verify(VerifyArgs),
    /// Genericity, stability or corank-2 tracking under linear perturbations.
    Perturb(PerturbArgs),
    /// Ridge regularization path from a CSV data file.
    Ridge(RidgeArgs),
    /// Pareto set of a squared-distance location problem.
    Locate(LocateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    /// Problem JSON file.
    #[arg(required_unless_present = "builtin")]
    pub problem: Option<PathBuf>,
    /// Built-in fixture: example31, example31_perturbed, example32, remark_g, location, ridge.
    #[arg(long, conflicts_with = "problem")]
    pub builtin: Option<String>,
    /// ε for example31_perturbed.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Relative gradient tolerance of the Newton solver.
    #[arg(long, default_value_t = 1e-10)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Relative singular-value threshold for rank decisions.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub tau: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig { grad_tol: self.grad_tol, max_iter: self.max_iter, rank_tol: self.tau, ..SolverConfig::default() }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated weights on the simplex; repeat for several points.
    #[arg(long = "w", required = true, value_parser = parse_list)]
    pub weights: Vec<Vec<f64>>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AtlasArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Grid subdivisions per edge.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub resolution: u32,
    /// Directory receiving atlas.csv and atlas.json.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub resolution: u32,
    /// Distance below which far-apart grid nodes count as collapsed.
    #[arg(long, default_value_t = DEFAULT_COLLAPSE_TOL)]
    pub collapse_tol: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Entries of π are drawn uniformly from [−scale, scale].
    #[arg(long, default_value_t = 0.1)]
    pub scale: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub resolution: u32,
    /// Rank tolerances compared by the genericity experiment.
    #[arg(long, value_delimiter = ',', default_value = "1e-7,1e-8,1e-9")]
    pub tolerances: Vec<f64>,
    /// Locate corank-2 Pareto points directly (four variables, four objectives).
    #[arg(long, conflicts_with = "stability")]
    pub track: bool,
    /// Measure solution displacement over descending perturbation scales.
    #[arg(long)]
    pub stability: bool,
    #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3")]
    pub scales: Vec<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RidgeArgs {
    /// CSV with a header row; the last column is the response.
    #[arg(required_unless_present = "builtin")]
    pub data: Option<PathBuf>,
    /// Use a built-in ridge fixture instead of a CSV file.
    #[arg(long, conflicts_with = "data")]
    pub builtin: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub resolution: u32,
    /// Center and scale the columns before fitting.
    #[arg(long)]
    pub standardize: bool,
    /// Path CSV destination; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Largest accepted relative deviation from the closed-form solution.
    #[arg(long, default_value_t = 1e-8)]
    pub oracle_tol: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LocateArgs {
    /// Problem JSON file with a distance_squared family.
    #[arg(required_unless_present_any = ["builtin", "points"])]
    pub problem: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["problem", "points"])]
    pub builtin: Option<String>,
    /// Demand points as `x,y;x,y;…`.
    #[arg(long, conflicts_with = "problem", value_parser = parse_points)]
    pub points: Option<PointList>,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub resolution: u32,
    #[command(flatten)]
    pub solver: SolverArgs,
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

/// Demand points parsed from one `--points` value.
#[derive(Debug, Clone, Serialize)]
pub struct PointList(pub Vec<Vec<f64>>);

fn parse_points(s: &str) -> Result<PointList, String> {
    s.split(';').map(parse_list).collect::<Result<_, _>>().map(PointList)
}

/// Machine-readable outcome of one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of the canonical problem document and the numeric flags.
    pub inputs_digest: String,
    pub tolerances: BTreeMap<String, f64>,
    pub summary: Value,
    pub outputs: Vec<PathBuf>,
    pub exit_status: i32,
}

/// A failed command: exit code plus message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionMismatch(_)
            | Error::InvalidProblem(_)
            | Error::InvalidWeight(_)
            | Error::Parse(_)
            | Error::Io(_) => EXIT_INPUT,
            _ => EXIT_NUMERICAL,
        };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INPUT, message: message.into() }
}

/// Text lines for humans plus the structured report.
pub struct Outcome {
    pub report: RunReport,
    pub text: Vec<String>,
}

fn load_problem(args: &ProblemArgs) -> Result<FamilySpec, Failure> {
    match (&args.builtin, &args.problem) {
        (Some(name), _) => Ok(builtin::by_name(name, args.epsilon)?),
        (None, Some(path)) => read_problem(path),
        (None, None) => Err(input_error("a problem file or --builtin is required")),
    }
}

fn read_problem(path: &Path) -> Result<FamilySpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    parse_problem(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn digest<T: Serialize>(spec: &FamilySpec, params: &T) -> Result<String, Failure> {
    let mut h = Sha256::new();
    h.update(serialize_problem(spec)?.as_bytes());
    h.update(b"\n");
    h.update(serde_json::to_vec(params).map_err(|e| input_error(e.to_string()))?);
    Ok(hex::encode(h.finalize()))
}

fn tolerances(solver: &SolverArgs) -> BTreeMap<String, f64> {
    BTreeMap::from([("grad_tol".to_string(), solver.grad_tol), ("rank_tol".to_string(), solver.tau)])
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.12}")).collect();
    format!("[{}]", parts.join(", "))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

pub fn cmd_solve(args: &SolveArgs) -> Result<Outcome, Failure> {
    let spec = load_problem(&args.problem)?;
    let p = build_problem(spec.clone())?;
    let cfg = args.solver.config();
    cfg.validate()?;
    let mut points = Vec::new();
    let mut text = Vec::new();
    for w in &args.weights {
        if w.len() != p.num_objectives() {
            return Err(input_error(format!("weight has {} entries, problem has {} objectives", w.len(), p.num_objectives())));
        }
        let pt = scalarize(&p, &Weight::new(w.clone())?, &cfg)?;
        text.push(format!("w = {}", fmt_vec(&pt.w)));
        text.push(format!("  x = {}", fmt_vec(&pt.x)));
        text.push(format!("  f(x) = {}", fmt_vec(&pt.fx)));
        text.push(format!("  kkt_residual = {:.3e} (tolerance {:.3e})", pt.kkt_residual, pt.grad_tol));
        text.push(format!("  corank = {}", pt.corank));
        points.push(pt);
    }
    Ok(Outcome {
        report: RunReport {
            command: "solve".into(),
            inputs_digest: digest(&spec, args)?,
            tolerances: tolerances(&args.solver),
            summary: json!({ "points": points }),
            outputs: vec![],
            exit_status: EXIT_PASS,
        },
        text,
    })
}

struct Diagnosis {
    atlas: ParetoAtlas,
    summary: Value,
    text: Vec<String>,
    passed: bool,
}

fn diagnose(p: &dyn MultiObjective, resolution: u32, collapse_tol: f64, solver: &SolverArgs) -> Result<Diagnosis, Failure> {
    let cfg = solver.config();
    cfg.validate()?;
    let atlas = build_atlas(p, resolution, &cfg)?;
    let corank = certify_corank_on_atlas(&atlas, solver.tau);
    let faces = face_consistency(p, &atlas, &cfg);
    let injectivity = injectivity_scan(&atlas, collapse_tol);
    let dominance = atlas.dominance_violations(simplicial::atlas::DOMINANCE_TOL);
    let passed = atlas.failures.is_empty() && corank.passed && faces.passed && injectivity.injective;
    let s = &atlas.summary;
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let text = vec![
        format!("nodes: {} solved: {} (resolution {resolution})", s.nodes, s.solved),
        format!("max KKT residual: {:.3e} (ratio to tolerance {:.3e})", s.max_kkt_residual, s.max_kkt_ratio),
        format!("corank histogram: {:?}", s.corank_histogram),
        format!("max corank: {} at tau {:e}: {}", corank.max_corank, corank.tolerance, verdict(corank.passed)),
        format!(
            "face consistency: max discrepancy {:.3e} (tolerance {:.3e}): {}",
            faces.max_discrepancy, faces.tolerance, verdict(faces.passed)
        ),
        format!(
            "injectivity: {} collapsed pairs at {:e}: {}",
            injectivity.collapsed_pairs.len(),
            collapse_tol,
            if injectivity.injective { "injective" } else { "NOT injective" }
        ),
        format!("dominated pairs: {}", dominance.len()),
        format!("simplicial certificate: {}", verdict(passed)),
    ];
    let summary = json!({
        "atlas": s,
        "node_failures": atlas.failures,
        "corank": corank,
        "face_consistency": faces,
        "injectivity": injectivity,
        "dominated_pairs": dominance,
        "simplicial": passed,
    });
    Ok(Diagnosis { atlas, summary, text, passed })
}

pub fn cmd_atlas(args: &AtlasArgs) -> Result<Outcome, Failure> {
    let spec = load_problem(&args.problem)?;
    let p = build_problem(spec.clone())?;
    let d = diagnose(&p, args.resolution, DEFAULT_COLLAPSE_TOL, &args.solver)?;
    let mut text = d.text;
    let mut outputs = Vec::new();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))?;
        let csv_path = dir.join("atlas.csv");
        let mut buf = Vec::new();
        d.atlas.write_csv(&mut buf)?;
        write_file(&csv_path, &buf)?;
        let json_path = dir.join("atlas.json");
        let doc = json!({ "atlas": d.atlas, "diagnostics": d.summary });
        write_file(&json_path, serde_json::to_string_pretty(&doc).expect("serializable").as_bytes())?;
        text.push(format!("wrote {} and {}", csv_path.display(), json_path.display()));
        outputs = vec![csv_path, json_path];
    }
    Ok(Outcome {
        report: RunReport {
            command: "atlas".into(),
            inputs_digest: digest(&spec, args)?,
            tolerances: tolerances(&args.solver),
            summary: d.summary,
            outputs,
            exit_status: EXIT_PASS,
        },
        text,
    })
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Outcome, Failure> {
    let spec = load_problem(&args.problem)?;
    let p = build_problem(spec.clone())?;
    let d = diagnose(&p, args.resolution, args.collapse_tol, &args.solver)?;
    if !d.atlas.failures.is_empty() {
        return Err(Failure {
            code: EXIT_NUMERICAL,
            message: format!("{} grid nodes failed to solve; first: {}", d.atlas.failures.len(), d.atlas.failures[0].error),
        });
    }
    let mut text = d.text;
    if !d.passed {
        text.push("witnesses:".into());
        for w in d.summary["corank"]["witnesses"].as_array().into_iter().flatten().take(10) {
            text.push(format!("  corank {} at node {} w = {} x = {} sigma = {}", w["corank"], w["node"], w["w"], w["x"], w["singular_values"]));
        }
        for c in d.summary["injectivity"]["collapsed_pairs"].as_array().into_iter().flatten().take(10) {
            text.push(format!("  collapsed nodes {} and {} ({} steps apart, distance {})", c["a"], c["b"], c["lattice_distance"], c["x_distance"]));
        }
        let tol = d.summary["face_consistency"]["tolerance"].as_f64().unwrap_or(0.0);
        for f in d.summary["face_consistency"]["faces"].as_array().into_iter().flatten() {
            if f["max_discrepancy"].as_f64().unwrap_or(0.0) > tol {
                text.push(format!("  face {} disagrees with its sub-problem by {}", f["face"], f["max_discrepancy"]));
            }
        }
    }
    let mut tol = tolerances(&args.solver);
    tol.insert("collapse_tol".into(), args.collapse_tol);
    Ok(Outcome {
        report: RunReport {
            command: "verify".into(),
            inputs_digest: digest(&spec, args)?,
            tolerances: tol,
            summary: d.summary,
            outputs: vec![],
            exit_status: if d.passed { EXIT_PASS } else { EXIT_CERTIFICATE },
        },
        text,
    })
}

pub fn cmd_perturb(args: &PerturbArgs) -> Result<Outcome, Failure> {
    let spec = load_problem(&args.problem)?;
    let p = build_problem(spec.clone())?;
    let cfg = args.solver.config();
    cfg.validate()?;
    if !(args.scale >= 0.0 && args.scale.is_finite()) {
        return Err(input_error("--scale must be non-negative"));
    }
    let mut tol = tolerances(&args.solver);
    let (summary, text, passed) = if args.track {
        if p.source_dim() != 4 || p.num_objectives() != 4 {
            return Err(input_error("--track needs four variables and four objectives"));
        }
        let tcfg = TrackerConfig { rank_tol: args.solver.tau, ..TrackerConfig::default() };
        tol.insert("tracker_tol".into(), tcfg.tol);
        let exp = tracker_experiment(&p, args.trials, args.scale, args.seed, &tcfg);
        let mut text = vec![format!(
            "corank-2 Pareto point persists in {} of {} trials at scale {:e}",
            exp.persistent,
            exp.trials.len(),
            args.scale
        )];
        for t in &exp.trials {
            text.push(match (&t.report, &t.error) {
                (Some(r), _) => format!(
                    "  seed {}: x = {} |E| = {:.2e} corank {} interior {}",
                    t.seed,
                    fmt_vec(&r.x_hat),
                    r.e_norm,
                    r.corank,
                    r.meets_simplex_interior
                ),
                (None, e) => format!("  seed {}: failed: {}", t.seed, e.as_deref().unwrap_or("unknown")),
            });
        }
        let passed = exp.persistent == exp.trials.len();
        (json!(exp), text, passed)
    } else if args.stability {
        let rep = stability_experiment(&p, &args.scales, args.resolution, args.seed, &cfg)?;
        let mut text: Vec<String> = rep
            .rows
            .iter()
            .map(|r| format!("scale {:e}: max displacement {:.3e}", r.scale, r.max_displacement))
            .collect();
        text.push(format!("monotone: {}", rep.monotone));
        let passed = rep.monotone;
        (json!(rep), text, passed)
    } else {
        if args.tolerances.is_empty() {
            return Err(input_error("--tolerances must list at least one value"));
        }
        let rep = genericity_experiment(&p, args.trials, args.scale, args.resolution, &args.tolerances, args.seed, &cfg)?;
        let text = vec![
            format!(
                "{} of {} perturbed trials have a corank-2 point (scale {:e}, resolution {})",
                rep.trials_with_corank2,
                rep.trials.len(),
                args.scale,
                args.resolution
            ),
            format!("tolerances {:?} agree: {}", rep.tolerances, rep.tolerances_agree),
        ];
        let passed = rep.trials_with_corank2 == 0 && rep.tolerances_agree;
        (json!(rep), text, passed)
    };
    tol.insert("scale".into(), args.scale);
    Ok(Outcome {
        report: RunReport {
            command: "perturb".into(),
            inputs_digest: digest(&spec, args)?,
            tolerances: tol,
            summary,
            outputs: vec![],
            exit_status: if passed { EXIT_PASS } else { EXIT_CERTIFICATE },
        },
        text,
    })
}

pub fn cmd_ridge(args: &RidgeArgs) -> Result<Outcome, Failure> {
    let spec = match (&args.builtin, &args.data) {
        (Some(name), _) => match builtin::by_name(name, 0.0)? {
            FamilySpec::RidgePair { x, y, .. } => FamilySpec::RidgePair { x, y, mu: args.mu },
            other => return Err(input_error(format!("builtin '{}' is not a ridge problem", other.name()))),
        },
        (None, Some(path)) => {
            let file = fs::File::open(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            ridge_from_csv(file, args.mu)?
        }
        (None, None) => return Err(input_error("a CSV file or --builtin is required")),
    };
    let mut inst = RidgeInstance::from_spec(&spec)?;
    if args.standardize {
        inst = inst.standardized();
    }
    let cfg = args.solver.config();
    cfg.validate()?;
    let path = ridge_path(&inst, args.resolution, &cfg)?;
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    let mut outputs = Vec::new();
    let mut text = Vec::new();
    match &args.out {
        Some(out) => {
            write_file(out, &buf)?;
            outputs.push(out.clone());
            text.push(format!("wrote {} path rows to {}", path.rows.len(), out.display()));
        }
        None => text.push(String::from_utf8(buf).expect("utf-8 csv").trim_end().to_string()),
    }
    let passed = path.max_oracle_rel_error <= args.oracle_tol;
    text.push(format!(
        "max relative deviation from normal equations: {:.3e} (tolerance {:e})",
        path.max_oracle_rel_error, args.oracle_tol
    ));
    let mut tol = tolerances(&args.solver);
    tol.insert("oracle_tol".into(), args.oracle_tol);
    Ok(Outcome {
        report: RunReport {
            command: "ridge".into(),
            inputs_digest: digest(&inst.spec(), args)?,
            tolerances: tol,
            summary: json!(path),
            outputs,
            exit_status: if passed { EXIT_PASS } else { EXIT_CERTIFICATE },
        },
        text,
    })
}

pub fn cmd_locate(args: &LocateArgs) -> Result<Outcome, Failure> {
    let spec = match (&args.points, &args.builtin, &args.problem) {
        (Some(points), _, _) => FamilySpec::DistanceSquared { points: points.0.clone() },
        (None, Some(name), _) => builtin::by_name(name, 0.0)?,
        (None, None, Some(path)) => read_problem(path)?,
        _ => return Err(input_error("a problem file, --builtin or --points is required")),
    };
    let FamilySpec::DistanceSquared { points } = &spec else {
        return Err(input_error(format!("locate needs a distance_squared problem, got {}", spec.name())));
    };
    let inst = LocationInstance::new(points.clone())?;
    let cfg = args.solver.config();
    cfg.validate()?;
    let rep = location_pareto_set(&inst, args.resolution, &cfg)?;
    let oracle_ok = rep.max_barycentric_error <= 1e-8 && rep.hull_membership == 1.0;
    let passed = oracle_ok && (!rep.general_position || rep.corank.passed);
    let text = vec![
        format!("general position: {}", rep.general_position),
        format!("max deviation from barycentric oracle: {:.3e}", rep.max_barycentric_error),
        format!("hull membership: {:.1}% (max distance {:.3e}, tolerance {:e})", 100.0 * rep.hull_membership, rep.max_hull_distance, HULL_TOL),
        format!("max corank: {}", rep.corank.max_corank),
    ];
    let summary = json!({
        "general_position": rep.general_position,
        "max_barycentric_error": rep.max_barycentric_error,
        "max_hull_distance": rep.max_hull_distance,
        "hull_membership": rep.hull_membership,
        "corank": rep.corank,
        "atlas": rep.atlas.summary,
    });
    Ok(Outcome {
        report: RunReport {
            command: "locate".into(),
            inputs_digest: digest(&spec, args)?,
            tolerances: tolerances(&args.solver),
            summary,
            outputs: vec![],
            exit_status: if passed { EXIT_PASS } else { EXIT_CERTIFICATE },
        },
        text,
    })
}

pub fn dispatch(command: &Command) -> Result<Outcome, Failure> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::Atlas(a) => cmd_atlas(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Ridge(a) => cmd_ridge(a),
        Command::Locate(a) => cmd_locate(a),
    }
}

/// Parses `args`, runs the command, prints, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: thread count must be at least 1");
            return EXIT_INPUT;
        }
        // Fails only if the pool was already configured in this process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match dispatch(&cli.command) {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.report).expect("serializable report"));
            } else {
                for line in &out.text {
                    println!("{line}");
                }
            }
            out.report.exit_status
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
