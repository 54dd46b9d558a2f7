use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use zivr::dataio::{gen_classification, gen_survival, parse_libsvm, ClassificationParams, KNOWN_DATASETS};
use zivr::problems::CompositeProblem;
use zivr::solver::presets::Regime;
use zivr::solver::{run, MetricSchedule, RunConfig, Trace};
use zivr::verification::{reference_solve, run_battery, BatteryOptions, Fault, ReferenceOptions};
use zivr::ZoError;

use crate::config::{
    load_problem, resolve_solver, ExperimentConfig, QuadraticFile, ResolvedProblem, RunRecord, DATA_DIR_VAR,
};

pub const MANIFEST: &str = "manifest.toml";
pub const SUMMARY: &str = "summary.csv";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Configuration and input problems exit with 2, divergence with 3,
/// anything else with 1.
impl From<ZoError> for CliError {
    fn from(e: ZoError) -> Self {
        let code = match e {
            ZoError::Schema(_) | ZoError::Parameter(_) | ZoError::Input(_) | ZoError::Parse { .. } => 2,
            ZoError::Divergence { .. } => 3,
            _ => 1,
        };
        Self::new(code, e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(1, format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn reference_value(p: &CompositeProblem, regime: Regime, given: Option<f64>, tol: f64) -> Result<Option<f64>, CliError> {
    if given.is_some() {
        return Ok(given);
    }
    if let Some(opt) = p.known_optimum() {
        return Ok(Some(opt.value));
    }
    if regime == Regime::NonConvex || !p.has_reference_gradient() {
        return Ok(None);
    }
    let sol = reference_solve(p, None, ReferenceOptions { tol, max_iter: 500_000 })?;
    if !sol.converged {
        eprintln!(
            "warning: reference solve stopped after {} iterations at {:.3e} (tolerance {tol:.1e})",
            sol.iterations, sol.stationarity
        );
    }
    Ok(Some(sol.value))
}

struct Job {
    solver: usize,
    seed: u64,
}

pub fn cmd_run(config: &Path, output: Option<&Path>, threads: Option<usize>) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(config)?;
    let lp = load_problem(&cfg.problem)?;
    let resolved: Vec<_> = cfg
        .solvers
        .iter()
        .enumerate()
        .map(|(k, sc)| resolve_solver(&lp, &cfg.problem, sc, k))
        .collect::<Result<_, _>>()?;
    let p = &lp.problem;
    let h_star = reference_value(p, lp.regime, cfg.problem.reference_value, cfg.problem.reference_tol)?;

    let out_dir = output.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.run.output));
    fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;

    let jobs: Vec<Job> = (0..resolved.len())
        .flat_map(|solver| cfg.run.seeds.iter().map(move |&seed| Job { solver, seed }))
        .collect();
    let run_one = |job: &Job| -> Result<RunRecord, CliError> {
        let rs = &resolved[job.solver];
        let mut rc = RunConfig::new(rs.spec.clone(), cfg.run.budget, job.seed);
        if let Some(c) = cfg.run.metric_every_calls {
            rc.metrics = MetricSchedule::EveryCalls(c);
        }
        if let Some(k) = cfg.run.metric_every_iters {
            rc.metrics = MetricSchedule::EveryIters(k);
        }
        rc.reference_value = h_star;
        rc.record_wall_time = cfg.run.record_wall_time;
        rc.max_iterations = cfg.run.max_iterations;
        if let Some(t) = cfg.run.divergence_threshold {
            rc.divergence_threshold = t;
        }
        let file = format!("{}_seed{}.csv", rs.label, job.seed);
        let path = out_dir.join(&file);
        let mut record = RunRecord {
            label: rs.label.clone(),
            solver: rs.spec.name(),
            seed: job.seed,
            file,
            status: "ok".into(),
            alpha: rs.alpha,
            beta: rs.beta,
            beta_ratio: rs.beta_ratio,
            sigma: rs.sigma,
            nu: rs.nu,
            iterations: 0,
            oracle_calls: 0,
            final_objective: f64::NAN,
            final_gap: None,
            wall_ms: 0.0,
            message: None,
        };
        let trace: Trace = match run(p, &rc) {
            Ok(out) => {
                record.iterations = out.summary.iterations;
                record.oracle_calls = out.summary.oracle_calls;
                record.final_objective = out.summary.final_objective;
                record.final_gap = out.summary.final_gap;
                record.wall_ms = out.summary.wall_ms;
                out.trace
            }
            Err(fail) => {
                record.status = match fail.error {
                    ZoError::Divergence { .. } => "diverged".into(),
                    _ => "failed".into(),
                };
                record.message = Some(fail.error.to_string());
                record.iterations = fail.iterations;
                record.oracle_calls = fail.oracle_calls;
                if let Some(last) = fail.trace.last() {
                    record.final_objective = last.objective;
                    record.final_gap = last.gap;
                }
                fail.trace
            }
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        write_file(&path, &buf)?;
        Ok(record)
    };

    let records: Vec<Result<RunRecord, CliError>> = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| CliError::new(1, format!("thread pool: {e}")))?
            .install(|| jobs.par_iter().map(run_one).collect()),
        None => jobs.par_iter().map(run_one).collect(),
    };
    let records: Vec<RunRecord> = records.into_iter().collect::<Result<_, _>>()?;

    // pin every derived value so that the manifest reruns bit for bit
    let pinned: Vec<_> = resolved.iter().zip(&cfg.solvers).map(|(rs, sc)| rs.pinned(sc)).collect();
    cfg.solvers = pinned;
    cfg.problem.reference_value = h_star;
    cfg.resolved = Some(ResolvedProblem {
        name: p.name().to_string(),
        n: p.n(),
        d: p.d(),
        smoothness: p.smoothness(),
        strong_convexity: p.strong_convexity(),
        regime: lp.regime.as_str().to_string(),
        reference_value: h_star,
        dataset_path: lp.dataset_path.clone(),
        dataset_checksum: lp.dataset_checksum.clone(),
    });
    cfg.runs = records.clone();
    let manifest = cfg.to_toml()?;
    write_file(&out_dir.join(MANIFEST), manifest.as_bytes())?;

    for r in &records {
        let gap = r.final_gap.map_or_else(|| "-".to_string(), |g| format!("{g:.6e}"));
        println!(
            "{:<24} seed {:<4} {:<8} calls {:<10} iters {:<10} objective {:.10e} gap {gap}",
            r.label, r.seed, r.status, r.oracle_calls, r.iterations, r.final_objective
        );
    }
    println!("wrote {} traces and {} to {}", records.len(), MANIFEST, out_dir.display());

    if let Some(r) = records.iter().find(|r| r.status == "diverged") {
        return Err(CliError::new(3, format!("{} (seed {}) diverged: {}", r.label, r.seed, r.message.clone().unwrap_or_default())));
    }
    if let Some(r) = records.iter().find(|r| r.status != "ok") {
        return Err(CliError::new(1, format!("{} (seed {}) failed: {}", r.label, r.seed, r.message.clone().unwrap_or_default())));
    }
    Ok(())
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub seed: u64,
    pub status: String,
    pub iterations: u64,
    pub oracle_calls: u64,
    pub final_objective: f64,
    pub final_gap: Option<f64>,
    pub final_grad_map_norm: Option<f64>,
    pub wall_ms: f64,
    /// First `oracle_calls` at which the metric drops to each threshold.
    pub reached: Vec<Option<u64>>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// The thresholded metric is the gap when the trace has one, else the
/// squared gradient-mapping norm.
pub fn summarize(dir: &Path, thresholds: &[f64]) -> Result<Vec<SummaryRow>, CliError> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath)
        .map_err(|e| CliError::new(2, format!("missing or unreadable manifest {}: {e}", mpath.display())))?;
    let manifest = ExperimentConfig::from_toml(&text)?;
    if manifest.runs.is_empty() {
        return Err(CliError::new(2, format!("{} lists no runs", mpath.display())));
    }
    let mut rows = Vec::new();
    for r in &manifest.runs {
        let tpath = dir.join(&r.file);
        let file = fs::File::open(&tpath).map_err(|e| CliError::new(2, format!("{}: {e}", tpath.display())))?;
        let trace = Trace::read_csv(file)?;
        let last = trace.last().ok_or_else(|| CliError::new(2, format!("{} is empty", tpath.display())))?;
        let metric = |row: &zivr::solver::TraceRow| row.gap.or(row.grad_map_norm.map(|g| g * g));
        let reached = thresholds
            .iter()
            .map(|t| trace.rows.iter().find(|row| metric(row).is_some_and(|m| m <= *t)).map(|row| row.oracle_calls))
            .collect();
        rows.push(SummaryRow {
            label: r.label.clone(),
            seed: r.seed,
            status: r.status.clone(),
            iterations: last.iter,
            oracle_calls: last.oracle_calls,
            final_objective: last.objective,
            final_gap: last.gap,
            final_grad_map_norm: last.grad_map_norm,
            wall_ms: r.wall_ms,
            reached,
        });
    }
    Ok(rows)
}

pub fn cmd_compare(dir: &Path, thresholds: &[f64]) -> Result<(), CliError> {
    let rows = summarize(dir, thresholds)?;
    let mut header = vec![
        "label".to_string(),
        "seed".into(),
        "status".into(),
        "iterations".into(),
        "oracle_calls".into(),
        "final_objective".into(),
        "final_gap".into(),
        "final_grad_map_norm".into(),
        "wall_ms".into(),
    ];
    header.extend(thresholds.iter().map(|t| format!("calls_to_{t:e}")));
    let spath = dir.join(SUMMARY);
    let mut wr = csv::Writer::from_path(&spath).map_err(|e| CliError::new(1, format!("{}: {e}", spath.display())))?;
    wr.write_record(&header).map_err(|e| CliError::new(1, e.to_string()))?;
    println!("{}", header.join("  "));
    for r in &rows {
        let mut rec = vec![
            r.label.clone(),
            r.seed.to_string(),
            r.status.clone(),
            r.iterations.to_string(),
            r.oracle_calls.to_string(),
            r.final_objective.to_string(),
            fmt_opt(r.final_gap),
            fmt_opt(r.final_grad_map_norm),
            r.wall_ms.to_string(),
        ];
        rec.extend(r.reached.iter().map(|c| c.map_or_else(|| "not reached".to_string(), |c| c.to_string())));
        wr.write_record(&rec).map_err(|e| CliError::new(1, e.to_string()))?;
        let shown: Vec<String> = rec.iter().map(|s| if s.is_empty() { "-".into() } else { s.clone() }).collect();
        println!("{}", shown.join("  "));
    }
    wr.flush().map_err(|e| CliError::new(1, e.to_string()))?;
    println!("wrote {}", spath.display());
    Ok(())
}

pub fn cmd_verify(samples: Option<u64>, seed: Option<u64>, csv_out: Option<&Path>, sigma_scale: Option<f64>) -> Result<(), CliError> {
    let mut opts = BatteryOptions::default();
    if let Some(s) = samples {
        opts.samples = s;
    }
    if let Some(s) = seed {
        opts.seed = s;
    }
    opts.fault = sigma_scale.map(Fault::SigmaScale);
    let start = std::time::Instant::now();
    let results = run_battery(&opts);
    for c in &results {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    println!(
        "{} checks, {} failed, {:.1} s (k_sigma = {} per component, no multiplicity correction)",
        results.len(),
        failed.len(),
        start.elapsed().as_secs_f64(),
        opts.k_sigma
    );
    if let Some(path) = csv_out {
        let mut wr = csv::Writer::from_path(path).map_err(|e| CliError::new(1, format!("{}: {e}", path.display())))?;
        let res: csv::Result<()> = (|| {
            wr.write_record(["check", "pass", "samples", "worst_z", "k_sigma", "detail"])?;
            for c in &results {
                let (samples, z, k) = match &c.report {
                    Some(r) => (r.samples.to_string(), r.worst_z.to_string(), r.k_sigma.to_string()),
                    None => (String::new(), String::new(), String::new()),
                };
                wr.write_record([c.name.as_str(), if c.pass { "true" } else { "false" }, &samples, &z, &k, &c.detail])?;
            }
            wr.flush()?;
            Ok(())
        })();
        res.map_err(|e| CliError::new(1, e.to_string()))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(1, format!("failed checks: {}", failed.join(", "))))
    }
}

#[derive(Serialize)]
struct SurvivalMeta {
    kind: &'static str,
    n: usize,
    d: usize,
    sparsity: f64,
    censor_rate: f64,
    seed: u64,
    coefficients: Vec<f64>,
}

#[derive(Serialize)]
struct ClassificationMeta {
    kind: &'static str,
    n: usize,
    d: usize,
    nnz_per_row: usize,
    binary: bool,
    label_noise: f64,
    unit_rows: bool,
    seed: u64,
    checksum: String,
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.toml");
    PathBuf::from(s)
}

fn to_toml<T: Serialize>(v: &T) -> Result<String, CliError> {
    toml::to_string(v).map_err(|e| CliError::new(1, e.to_string()))
}

pub enum GenKind {
    Survival { n: usize, d: usize, sparsity: f64, censor_rate: f64 },
    Quadratic { n: usize, d: usize, cond: f64 },
    Classification { params: ClassificationParams },
}

pub fn cmd_gen_data(kind: GenKind, seed: u64, out: &Path) -> Result<(), CliError> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    match kind {
        GenKind::Survival { n, d, sparsity, censor_rate } => {
            let g = gen_survival(n, d, sparsity, censor_rate, seed)?;
            let mut buf = Vec::new();
            g.data.write_csv(&mut buf)?;
            write_file(out, &buf)?;
            let meta = SurvivalMeta { kind: "survival", n, d, sparsity, censor_rate, seed, coefficients: g.coefficients };
            write_file(&sidecar(out), to_toml(&meta)?.as_bytes())?;
            println!("wrote {} subjects x {} features to {}", n, d, out.display());
        }
        GenKind::Quadratic { n, d, cond } => {
            let q = QuadraticFile::generate(n, d, cond, seed)?;
            write_file(out, to_toml(&q)?.as_bytes())?;
            println!("wrote quadratic n = {n}, d = {d}, h(x*) = {} to {}", q.value, out.display());
        }
        GenKind::Classification { params } => {
            let ds = gen_classification(&params)?;
            let mut buf = Vec::new();
            ds.write_libsvm(&mut buf)?;
            write_file(out, &buf)?;
            let meta = ClassificationMeta {
                kind: "classification",
                n: params.n,
                d: params.d,
                nnz_per_row: params.nnz_per_row,
                binary: params.binary,
                label_noise: params.label_noise,
                unit_rows: params.unit_rows,
                seed: params.seed,
                checksum: format!("{:016x}", ds.checksum()),
            };
            write_file(&sidecar(out), to_toml(&meta)?.as_bytes())?;
            println!("wrote {} rows x {} features to {}", ds.n(), ds.dim(), out.display());
        }
    }
    Ok(())
}

pub fn cmd_datasets(check: bool) -> Result<(), CliError> {
    let dir = std::env::var(DATA_DIR_VAR).ok();
    match &dir {
        Some(d) => println!("{DATA_DIR_VAR} = {d}"),
        None => println!("{DATA_DIR_VAR} is not set"),
    }
    for (name, url) in KNOWN_DATASETS {
        let path = dir.as_ref().map(|d| Path::new(d).join(name));
        let found = path.as_ref().is_some_and(|p| p.is_file());
        let mut line = format!("{name:<6} {} {url}", if found { "found  " } else { "missing" });
        if let (true, true, Some(p)) = (check, found, &path) {
            let file = fs::File::open(p).map_err(|e| io_err(p, e))?;
            let ds = parse_libsvm(std::io::BufReader::new(file))?;
            line.push_str(&format!("  n = {}, d = {}", ds.n(), ds.dim()));
        }
        println!("{line}");
    }
    std::io::stdout().flush().ok();
    Ok(())
}
