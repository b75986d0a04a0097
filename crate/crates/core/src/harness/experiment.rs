//! Experiment orchestration: shared initialization, one run per method,
//! trace files, distance-to-optimum series and a JSON summary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::baselines::{mu_step, nd_driver, solver_driver, Method};
use crate::error::{NmfError, Result};
use crate::fpa::{
    extend_rank, fpa_nd, heuristic_step_sizes, nd_batch, ConvergenceTrace, FpaState, NdOptions, PrimalConstraint, Side,
    SolveConfig,
};
use crate::harness::io::{fmt_f64, load_matrix, MatrixFormat};
use crate::harness::trace_file::TraceFile;
use crate::kl::{kl_divergence, kl_objective, NdProblem};
use crate::matrix::{DenseMatrix, Role};
use crate::random::{random_init, synth_matrix, RandomSeed, DEFAULT_INIT_OFFSET};
use crate::spectral::spectral_norm_or_estimate;

pub const ACCESS_ACCOUNTING: &str = "one MU or ADMM iteration = 1 data access; \
one FPA outer iteration (W block then H block, iter_nd steps each) = iter_nd data accesses; \
one FPA step on a convex ND problem = 1 data access";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `W` fixed to the reference factor, estimate `H`.
    #[serde(rename = "nd_fix_W")]
    NdFixW,
    /// `H` fixed to the reference factor, estimate `W`.
    #[serde(rename = "nd_fix_H")]
    NdFixH,
    Nmf,
    WarmRestart,
    /// Column-normalized data against fixed normalized topics, with each
    /// column of `H` constrained to the simplex. FPA only.
    Topic,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::NdFixW => "nd_fix_W",
            ProblemKind::NdFixH => "nd_fix_H",
            ProblemKind::Nmf => "nmf",
            ProblemKind::WarmRestart => "warm_restart",
            ProblemKind::Topic => "topic",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = NmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nd_fix_w" => Ok(ProblemKind::NdFixW),
            "nd_fix_h" => Ok(ProblemKind::NdFixH),
            "nmf" => Ok(ProblemKind::Nmf),
            "warm_restart" | "warm" => Ok(ProblemKind::WarmRestart),
            "topic" => Ok(ProblemKind::Topic),
            other => Err(NmfError::Config(format!("unknown problem '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub methods: Vec<Method>,
    pub problem: ProblemKind,
    /// Ignored when `input` is given; the file's shape is used instead.
    pub n: usize,
    pub m: usize,
    pub r: usize,
    /// Rank after growth (warm restart only).
    pub r2: Option<usize>,
    pub seed: u64,
    pub cfg: SolveConfig,
    /// ADMM penalty candidates; ADMM runs once per value.
    pub rho: Vec<f64>,
    pub input: Option<PathBuf>,
    pub input_format: MatrixFormat,
    pub output_dir: PathBuf,
    /// Bounds of the uniform synthetic data.
    pub synth_range: (f64, f64),
    /// Value of the new `W` columns in a warm restart.
    pub pad_c: f64,
    /// Budget of the second warm-restart phase; defaults to `cfg`'s.
    pub phase2_budget: Option<u64>,
    /// MU iterations (and FPA steps) of the reference solve for ND problems.
    pub reference_iters: u64,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, problem: ProblemKind, n: usize, m: usize, r: usize, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            methods: match problem {
                ProblemKind::Topic => vec![Method::Fpa],
                _ => Method::ALL.to_vec(),
            },
            problem,
            n,
            m,
            r,
            r2: None,
            seed: 0,
            cfg: SolveConfig::default(),
            rho: vec![1.0],
            input: None,
            input_format: MatrixFormat::DelimitedText,
            output_dir: output_dir.into(),
            synth_range: (0.0, 750.0),
            pad_c: 0.0,
            phase2_budget: None,
            reference_iters: 5000,
        }
    }

    /// Checks everything that does not depend on the data file.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NmfError::Config(msg));
        self.cfg.validate()?;
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("invalid experiment name '{}'", self.name));
        }
        if self.methods.is_empty() {
            return bad("no methods requested".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return bad(format!("method {m} listed twice"));
            }
        }
        if self.input.is_none() && (self.n == 0 || self.m == 0) {
            return bad("dimensions must be positive".into());
        }
        if self.r == 0 {
            return bad("rank must be positive".into());
        }
        if self.methods.contains(&Method::Admm) {
            if self.rho.is_empty() {
                return bad("ADMM requires at least one rho".into());
            }
            if let Some(r) = self.rho.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
                return bad(format!("rho must be positive, got {r}"));
            }
        }
        match (self.problem, self.r2) {
            (ProblemKind::WarmRestart, None) => return bad("warm restart needs r2".into()),
            (ProblemKind::WarmRestart, Some(r2)) if r2 <= self.r => {
                return bad(format!("r2 = {r2} must exceed r = {}", self.r));
            }
            _ => {}
        }
        if !(self.pad_c >= 0.0 && self.pad_c.is_finite()) {
            return bad(format!("pad_c must be >= 0, got {}", self.pad_c));
        }
        if self.phase2_budget == Some(0) {
            return bad("phase-2 budget must be positive".into());
        }
        if self.problem == ProblemKind::Topic && self.methods.iter().any(|&m| m != Method::Fpa) {
            return bad("the topic problem is solved by FPA only".into());
        }
        if matches!(self.problem, ProblemKind::NdFixW | ProblemKind::NdFixH | ProblemKind::Topic) && self.reference_iters == 0 {
            return bad("reference_iters must be positive".into());
        }
        Ok(())
    }

    fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        if self.r > n.min(m) {
            return Err(NmfError::Config(format!("rank {} exceeds min(n, m) = {}", self.r, n.min(m))));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ReferenceSummary {
    /// `D(V || W* H*)` after the MU reference run.
    pub mu_value: f64,
    /// Final primal of the long FPA run on the same convex problem.
    pub fpa_value: f64,
    pub p_star: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunSummary {
    pub label: String,
    pub method: Method,
    pub rho: Option<f64>,
    /// Primal value of the last trace row.
    pub final_objective: f64,
    pub final_gap: Option<f64>,
    pub data_accesses: u64,
    pub wall_seconds: f64,
    pub trace_file: String,
    pub distance_file: Option<String>,
    /// Warm restart: objective at the end of phase one and right after padding.
    pub phase1_objective: Option<f64>,
    pub restart_objective: Option<f64>,
    pub repairs: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub problem: ProblemKind,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub r2: Option<usize>,
    pub seed: u64,
    pub init_sha256: String,
    pub access_accounting: String,
    pub iter_nd: usize,
    pub budget: u64,
    /// `None` when gap stopping is off.
    pub gap_tol: Option<f64>,
    pub reference: Option<ReferenceSummary>,
    pub runs: Vec<RunSummary>,
    pub total_wall_seconds: f64,
}

impl ExperimentReport {
    pub fn run(&self, label: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.label == label)
    }
}

/// SHA-256 over the shapes and little-endian bytes of `W0` then `H0`.
pub fn init_hash(w0: &DenseMatrix, h0: &DenseMatrix) -> String {
    let mut hasher = Sha256::new();
    for m in [w0, h0] {
        hasher.update((m.rows() as u64).to_le_bytes());
        hasher.update((m.cols() as u64).to_le_bytes());
        for v in m.as_slice() {
            hasher.update(v.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

/// Files written so far; removed again unless the experiment succeeds.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            done: false,
        })
    }

    fn write(&mut self, file: &str, contents: &str) -> Result<String> {
        let path = self.dir.join(file);
        self.written.push(path.clone());
        fs::write(&path, contents)?;
        Ok(file.to_string())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

struct Run {
    label: String,
    method: Method,
    rho: Option<f64>,
}

fn planned_runs(spec: &ExperimentSpec) -> Vec<Run> {
    let mut runs = Vec::new();
    for &method in &spec.methods {
        if method == Method::Admm {
            for &rho in &spec.rho {
                let label = if spec.rho.len() == 1 {
                    "admm".to_string()
                } else {
                    format!("admm_rho{rho}")
                };
                runs.push(Run {
                    label,
                    method,
                    rho: Some(rho),
                });
            }
        } else {
            runs.push(Run {
                label: method.name().to_string(),
                method,
                rho: None,
            });
        }
    }
    runs
}

fn seed_offset(seed: u64, k: u64) -> RandomSeed {
    RandomSeed(seed.wrapping_add(k))
}

/// Runs the experiment and writes its outputs into `spec.output_dir`:
/// `<label>.csv` per run, `<label>_distance.csv` for ND problems, and
/// `summary.json`. On error every file written so far is removed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let v = match &spec.input {
        Some(path) => load_matrix(path, spec.input_format, Role::Data)?,
        None => synth_matrix(spec.n, spec.m, spec.synth_range.0, spec.synth_range.1, RandomSeed(spec.seed))?,
    };
    let (n, m) = v.shape();
    spec.check_dims(n, m)?;
    let (w0, h0) = random_init(n, m, spec.r, DEFAULT_INIT_OFFSET, seed_offset(spec.seed, 1))?;
    let hash = init_hash(&w0, &h0);

    let mut out = Outputs::open(&spec.output_dir)?;
    let mut report = ExperimentReport {
        name: spec.name.clone(),
        problem: spec.problem,
        n,
        m,
        r: spec.r,
        r2: spec.r2,
        seed: spec.seed,
        init_sha256: hash.clone(),
        access_accounting: ACCESS_ACCOUNTING.to_string(),
        iter_nd: spec.cfg.iter_nd,
        budget: spec.cfg.max_data_access,
        gap_tol: spec.cfg.gap_stopping().then_some(spec.cfg.gap_tol),
        reference: None,
        runs: Vec::new(),
        total_wall_seconds: 0.0,
    };

    let base_header = |run: &Run| -> Vec<(String, String)> {
        let mut h = vec![
            ("experiment".to_string(), spec.name.clone()),
            ("method".into(), run.method.name().into()),
            ("label".into(), run.label.clone()),
            ("problem".into(), spec.problem.name().into()),
            ("n".into(), n.to_string()),
            ("m".into(), m.to_string()),
            ("r".into(), spec.r.to_string()),
        ];
        if let Some(r2) = spec.r2 {
            h.push(("r2".into(), r2.to_string()));
        }
        h.push(("seed".into(), spec.seed.to_string()));
        if let Some(p) = &spec.input {
            h.push(("input".into(), p.display().to_string()));
        }
        h.push(("init_sha256".into(), hash.clone()));
        h.push(("iter_nd".into(), spec.cfg.iter_nd.to_string()));
        h.push(("budget".into(), spec.cfg.max_data_access.to_string()));
        h.push(("gap_tol".into(), spec.cfg.gap_tol.to_string()));
        h.push(("trace_stride".into(), spec.cfg.trace_stride.to_string()));
        if let Some(rho) = run.rho {
            h.push(("rho".into(), rho.to_string()));
        }
        h.push(("access_accounting".into(), ACCESS_ACCOUNTING.into()));
        h
    };

    match spec.problem {
        ProblemKind::Nmf => {
            for run in planned_runs(spec) {
                let res = solver_driver(run.method, &v, &w0, &h0, &spec.cfg, run.rho)?;
                let file = TraceFile::new(base_header(&run), &res.trace);
                let name = out.write(&format!("{}.csv", run.label), &file.render())?;
                report.runs.push(summarize(&run, &res.trace, name, None));
            }
        }
        ProblemKind::NdFixW | ProblemKind::NdFixH => {
            let side = if spec.problem == ProblemKind::NdFixW { Side::FixW } else { Side::FixH };
            let (w_star, h_star) = mu_reference(&v, &w0, &h0, spec.reference_iters)?;
            let (fixed, init) = match side {
                Side::FixW => (&w_star, &h0),
                Side::FixH => (&h_star, &w0),
            };
            let mu_value = kl_divergence(&v, &w_star.matmul(&h_star)?)?;
            let long_cfg = SolveConfig {
                max_data_access: spec.reference_iters,
                gap_tol: f64::INFINITY,
                record_trace: false,
                ..spec.cfg.clone()
            };
            let (_, long) = nd_batch(&v, fixed, init, side, &long_cfg)?;
            let fpa_value = long.certificate.primal_value;
            let p_star = mu_value.min(fpa_value);
            report.reference = Some(ReferenceSummary {
                mu_value,
                fpa_value,
                p_star,
                iterations: spec.reference_iters,
            });
            for run in planned_runs(spec) {
                let (_, trace) = nd_driver(run.method, &v, fixed, init, side, &spec.cfg, run.rho)?;
                let mut header = base_header(&run);
                header.push(("p_star".into(), fmt_f64(p_star)));
                let file = TraceFile::new(header.clone(), &trace);
                let name = out.write(&format!("{}.csv", run.label), &file.render())?;
                let dist = out.write(&format!("{}_distance.csv", run.label), &distance_csv(&header, &trace, p_star))?;
                report.runs.push(summarize(&run, &trace, name, Some(dist)));
            }
        }
        ProblemKind::WarmRestart => {
            let r2 = spec.r2.expect("validated");
            let cfg2 = SolveConfig {
                max_data_access: spec.phase2_budget.unwrap_or(spec.cfg.max_data_access),
                ..spec.cfg.clone()
            };
            for run in planned_runs(spec) {
                let first = solver_driver(run.method, &v, &w0, &h0, &spec.cfg, run.rho)?;
                let phase1_end = first.trace.last().expect("traces are never empty").clone();
                let (w1, h1) = extend_rank(&first.w, &first.h, r2, spec.pad_c, seed_offset(spec.seed, 2))?;
                let restart = kl_objective(&v, &w1.matmul(&h1)?)?;
                let second = solver_driver(run.method, &v, &w1, &h1, &cfg2, run.rho)?;

                // the second phase's row 0 is the restart point, reported in the header
                let mut tail = ConvergenceTrace::new();
                for rec in &second.trace.records()[1..] {
                    tail.push(rec.clone())?;
                }
                let mut trace = first.trace.clone();
                trace.extend_shifted(&tail, phase1_end.data_access, phase1_end.wall_seconds)?;

                let mut header = base_header(&run);
                header.push(("pad_c".into(), spec.pad_c.to_string()));
                header.push(("phase2_budget".into(), cfg2.max_data_access.to_string()));
                header.push(("restart_access".into(), phase1_end.data_access.to_string()));
                header.push(("restart_objective".into(), fmt_f64(restart)));
                let file = TraceFile::new(header, &trace);
                let name = out.write(&format!("{}.csv", run.label), &file.render())?;
                let mut s = summarize(&run, &trace, name, None);
                s.phase1_objective = Some(phase1_end.primal);
                s.restart_objective = Some(restart);
                report.runs.push(s);
            }
        }
        ProblemKind::Topic => {
            let (w_star, _) = mu_reference(&v, &w0, &h0, spec.reference_iters)?;
            let topics = normalize_columns(&w_star)?;
            let docs = normalize_columns(&v)?;
            let prob = NdProblem::new(docs, topics)?;
            let steps = heuristic_step_sizes(&prob, spectral_norm_or_estimate(prob.k())?)?;
            let x0 = DenseMatrix::filled(spec.r, m, 1.0 / spec.r as f64);
            let state = FpaState::from_primal(&prob, x0)?;
            let opts = NdOptions {
                max_iter: spec.cfg.max_data_access as usize,
                gap_tol: spec.cfg.gap_tol,
                trace_stride: if spec.cfg.record_trace { spec.cfg.trace_stride } else { 0 },
                constraint: PrimalConstraint::Simplex,
            };
            let res = fpa_nd(&prob, state.x, state.y, &steps, opts)?;
            let run = &planned_runs(spec)[0];
            let mut header = base_header(run);
            header.push(("constraint".into(), "simplex".into()));
            let file = TraceFile::new(header, &res.trace);
            let name = out.write(&format!("{}.csv", run.label), &file.render())?;
            report.runs.push(summarize(run, &res.trace, name, None));
        }
    }

    report.total_wall_seconds = report.runs.iter().map(|r| r.wall_seconds).sum();
    out.write("summary.json", &serde_json::to_string_pretty(&report)?)?;
    out.done = true;
    Ok(report)
}

fn summarize(run: &Run, trace: &ConvergenceTrace, trace_file: String, distance_file: Option<String>) -> RunSummary {
    let last = trace.last().expect("traces are never empty");
    RunSummary {
        label: run.label.clone(),
        method: run.method,
        rho: run.rho,
        final_objective: last.primal,
        final_gap: last.gap,
        data_accesses: last.data_access,
        wall_seconds: last.wall_seconds,
        trace_file,
        distance_file,
        phase1_objective: None,
        restart_objective: None,
        repairs: trace.repairs().len(),
    }
}

/// `iters` MU steps on the full problem from `(W0, H0)`.
fn mu_reference(v: &DenseMatrix, w0: &DenseMatrix, h0: &DenseMatrix, iters: u64) -> Result<(DenseMatrix, DenseMatrix)> {
    let (mut w, mut h) = (w0.clone(), h0.clone());
    for _ in 0..iters {
        (w, h) = mu_step(v, &w, &h)?;
    }
    Ok((w, h))
}

fn normalize_columns(a: &DenseMatrix) -> Result<DenseMatrix> {
    let sums = a.col_sums();
    if let Some(col) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(NmfError::EmptyDataColumn { col });
    }
    let c = a.cols();
    Ok(DenseMatrix::from_fn(a.rows(), c, |i, j| a.get(i, j) / sums[j]))
}

/// `data_access,primal_minus_pstar,pstar_minus_dual` rows.
fn distance_csv(header: &[(String, String)], trace: &ConvergenceTrace, p_star: f64) -> String {
    let mut s = String::new();
    for (k, v) in header {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    s.push_str("data_access,primal_minus_pstar,pstar_minus_dual\n");
    for r in trace.records() {
        let dual = r.dual.map(|d| fmt_f64(p_star - d)).unwrap_or_default();
        s.push_str(&format!("{},{},{}\n", r.data_access, fmt_f64(r.primal - p_star), dual));
    }
    s
}
