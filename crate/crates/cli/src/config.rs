//! Experiment configuration (TOML) and its resolution into solver specs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use zivr::baselines::{FullBatchParams, StepSchedule, VanillaParams, ZpsvrgParams};
use zivr::dataio::{gen_classification, parse_libsvm, ClassificationParams, SparseDataset, SurvivalDataset};
use zivr::estimators::DirectionScheme;
use zivr::problems::{
    make_cox_elastic_net, make_logistic_elastic_net, make_sigmoid_loss, synthetic_quadratic_components,
    CompositeProblem, QuadraticComponents,
};
use zivr::proximal::ProxSpec;
use zivr::sampling::{sigma_nu, SamplerConfig, SketchBasis, Variant};
use zivr::solver::presets::{preset_alpha, preset_beta, Regime};
use zivr::solver::{BetaSchedule, JacobianInit, MemEffParams, SolverSpec, ZivrParams};
use zivr::{Result, ZoError};

pub const DATA_DIR_VAR: &str = "ZIVR_DATA_DIR";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub run: RunSection,
    #[serde(default, rename = "solver")]
    pub solvers: Vec<SolverConfig>,
    /// Written into manifests only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<ResolvedProblem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Logistic,
    Sigmoid,
    Cox,
    Quadratic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// LIBSVM file (logistic, sigmoid), survival CSV (cox) or quadratic TOML
    /// from `gen-data`. Relative paths are looked up under `ZIVR_DATA_DIR`
    /// first. Without a dataset the data are generated from the fields below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    /// `a9a_like` selects the a9a-shaped classification generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cond: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nnz_per_row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censor_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    #[serde(default = "default_reg")]
    pub mu: f64,
    #[serde(default = "default_reg")]
    pub lambda: f64,
    /// Per-feature max-abs scaling of LIBSVM data.
    #[serde(default)]
    pub normalize: bool,
    /// Feature dimension override (upward only) for LIBSVM data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// `strongly_convex`, `convex` or `nonconvex`; inferred when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    /// Target accuracy fed to the smoothing-radius presets.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// `h(x*)`; computed by a reference solve for convex problems when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_value: Option<f64>,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
}

fn default_reg() -> f64 {
    1e-4
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_reference_tol() -> f64 {
    1e-10
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_output() -> String {
    "out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub budget: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_every_calls: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_every_iters: Option<u64>,
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Zivr,
    VanillaZo,
    FullBatchZo,
    Zpsvrg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Impl1,
    Impl2,
    Impl3,
    Memeff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisName {
    Coordinate,
    Orthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Coordinate,
    Spherical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    Zero,
    Warm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Constant,
    InvSqrt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    /// Step size; for `inv_sqrt` schedules the initial step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Geometric decay of the smoothing radius; 1 keeps it constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sketch_basis: Option<BasisName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<SchemeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
}

/// Problem constants recorded in a manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ResolvedProblem {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub regime: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_checksum: Option<String>,
}

/// One (solver, seed) run in a manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub label: String,
    pub solver: String,
    pub seed: u64,
    pub file: String,
    pub status: String,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    pub iterations: u64,
    pub oracle_calls: u64,
    pub final_objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_gap: Option<f64>,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

fn schema(msg: impl Into<String>) -> ZoError {
    ZoError::Schema(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ZoError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ZoError::Schema(format!("cannot serialize configuration: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(schema("solver: at least one [[solver]] table is required"));
        }
        if self.run.budget == 0 {
            return Err(schema("run.budget: must be > 0"));
        }
        if self.run.seeds.is_empty() {
            return Err(schema("run.seeds: at least one seed is required"));
        }
        if self.run.metric_every_calls.is_some() && self.run.metric_every_iters.is_some() {
            return Err(schema("run: set at most one of metric_every_calls and metric_every_iters"));
        }
        if self.run.metric_every_calls == Some(0) || self.run.metric_every_iters == Some(0) {
            return Err(schema("run: metric interval must be >= 1"));
        }
        let mut seen = std::collections::HashSet::new();
        for (k, s) in self.solvers.iter().enumerate() {
            let label = s.label_or_default();
            if !seen.insert(label.clone()) {
                return Err(schema(format!("solver[{k}].label: duplicate label `{label}`")));
            }
            if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return Err(schema(format!("solver[{k}].label: `{label}` must be [A-Za-z0-9._-]+")));
            }
            if s.kind != SolverKind::Zivr && (s.variant.is_some() || s.r.is_some() || s.blocks.is_some()) {
                return Err(schema(format!("solver[{k}]: variant, r and blocks apply to zivr only")));
            }
            if s.kind == SolverKind::Zivr && s.r == Some(0) {
                return Err(schema(format!("solver[{k}].r: must be >= 1")));
            }
        }
        if let Some(path) = &self.problem.dataset {
            resolve_data_path(path)?;
        }
        Ok(())
    }
}

impl SolverConfig {
    pub fn label_or_default(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.kind {
            SolverKind::Zivr => {
                let v = match self.variant.unwrap_or(VariantName::Impl1) {
                    VariantName::Impl1 => "impl1",
                    VariantName::Impl2 => "impl2",
                    VariantName::Impl3 => "impl3",
                    VariantName::Memeff => "memeff",
                };
                format!("zivr_{v}_R{}", self.r.unwrap_or(1))
            }
            SolverKind::VanillaZo => "vanilla_zo".into(),
            SolverKind::FullBatchZo => "full_batch_zo".into(),
            SolverKind::Zpsvrg => "zpsvrg".into(),
        }
    }
}

/// Absolute and existing paths are used as is; relative paths are tried
/// under `ZIVR_DATA_DIR` and then the working directory.
pub fn resolve_data_path(path: &str) -> Result<PathBuf> {
    let p = Path::new(path);
    let mut tried = Vec::new();
    if p.is_relative() {
        if let Ok(dir) = std::env::var(DATA_DIR_VAR) {
            let cand = Path::new(&dir).join(p);
            if cand.is_file() {
                return Ok(cand);
            }
            tried.push(cand);
        }
    }
    if p.is_file() {
        return Ok(p.to_path_buf());
    }
    tried.push(p.to_path_buf());
    let tried: Vec<String> = tried.iter().map(|t| t.display().to_string()).collect();
    Err(ZoError::Input(format!("problem.dataset: file not found (tried {})", tried.join(", "))))
}

/// Serialized synthetic quadratic written by `gen-data quadratic`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticFile {
    pub n: usize,
    pub d: usize,
    pub cond: f64,
    pub seed: u64,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub x_star: Vec<f64>,
    pub value: f64,
    /// Row-major `d x d` blocks.
    pub matrices: Vec<Vec<f64>>,
    pub centers: Vec<Vec<f64>>,
}

impl QuadraticFile {
    pub fn generate(n: usize, d: usize, cond: f64, seed: u64) -> Result<Self> {
        let comps = synthetic_quadratic_components(n, d, cond, seed)?;
        let p = zivr::problems::make_synthetic_quadratic(n, d, cond, seed)?;
        let opt = p
            .known_optimum()
            .ok_or_else(|| ZoError::Evaluation("synthetic quadratic has no recorded optimum".into()))?;
        Ok(Self {
            n,
            d,
            cond,
            seed,
            smoothness: p.smoothness(),
            strong_convexity: p.strong_convexity(),
            x_star: opt.x.clone(),
            value: opt.value,
            matrices: (0..n).map(|i| comps.matrix_entries(i).to_vec()).collect(),
            centers: (0..n).map(|i| comps.center(i).to_vec()).collect(),
        })
    }

    fn into_problem(self, psi: ProxSpec) -> Result<CompositeProblem> {
        QuadraticComponents::new(self.matrices, self.centers)?.into_problem_with_constants(
            psi,
            self.smoothness,
            self.strong_convexity,
        )
    }
}

/// A built problem plus provenance for the manifest.
pub struct LoadedProblem {
    pub problem: CompositeProblem,
    pub regime: Regime,
    pub dataset_path: Option<String>,
    pub dataset_checksum: Option<String>,
}

fn need<T: Copy>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| schema(format!("problem.{field}: required for synthetic data")))
}

fn load_libsvm(pc: &ProblemConfig) -> Result<(SparseDataset, Option<String>)> {
    let (mut ds, path) = match &pc.dataset {
        Some(path) => {
            let full = resolve_data_path(path)?;
            let file = fs::File::open(&full)
                .map_err(|e| ZoError::Input(format!("cannot open {}: {e}", full.display())))?;
            (parse_libsvm(std::io::BufReader::new(file))?, Some(full.display().to_string()))
        }
        None => {
            let params = match pc.preset.as_deref() {
                Some("a9a_like") => ClassificationParams::a9a_like(pc.data_seed.unwrap_or(0)),
                Some(other) => return Err(schema(format!("problem.preset: unknown preset `{other}`"))),
                None => {
                    let d = need(pc.d, "d")?;
                    ClassificationParams {
                        n: need(pc.n, "n")?,
                        d,
                        nnz_per_row: pc.nnz_per_row.unwrap_or(d),
                        binary: false,
                        label_noise: 0.1,
                        unit_rows: true,
                        seed: pc.data_seed.unwrap_or(0),
                    }
                }
            };
            (gen_classification(&params)?, None)
        }
    };
    if let Some(dim) = pc.dim {
        ds = ds.with_dim(dim)?;
    }
    if pc.normalize {
        ds.normalize_max_abs();
    }
    Ok((ds, path))
}

pub fn load_problem(pc: &ProblemConfig) -> Result<LoadedProblem> {
    let psi = if pc.lambda == 0.0 { ProxSpec::Zero } else { ProxSpec::l1(pc.lambda)? };
    let (problem, path, checksum) = match pc.kind {
        ProblemKind::Logistic | ProblemKind::Sigmoid => {
            let (ds, path) = load_libsvm(pc)?;
            let checksum = format!("{:016x}", ds.checksum());
            let ds = Arc::new(ds);
            let p = if pc.kind == ProblemKind::Logistic {
                make_logistic_elastic_net(ds, pc.mu, pc.lambda)?
            } else {
                make_sigmoid_loss(ds, pc.mu, pc.lambda)?
            };
            (p, path, Some(checksum))
        }
        ProblemKind::Cox => {
            let (ds, path) = match &pc.dataset {
                Some(path) => {
                    let full = resolve_data_path(path)?;
                    let file = fs::File::open(&full)
                        .map_err(|e| ZoError::Input(format!("cannot open {}: {e}", full.display())))?;
                    (SurvivalDataset::read_csv(file)?, Some(full.display().to_string()))
                }
                None => {
                    let g = zivr::dataio::gen_survival(
                        need(pc.n, "n")?,
                        need(pc.d, "d")?,
                        pc.sparsity.unwrap_or(0.1),
                        pc.censor_rate.unwrap_or(0.3),
                        pc.data_seed.unwrap_or(0),
                    )?;
                    (g.data, None)
                }
            };
            (make_cox_elastic_net(Arc::new(ds), pc.mu, pc.lambda)?, path, None)
        }
        ProblemKind::Quadratic => {
            let (file, path) = match &pc.dataset {
                Some(path) => {
                    let full = resolve_data_path(path)?;
                    let text = fs::read_to_string(&full)
                        .map_err(|e| ZoError::Input(format!("cannot read {}: {e}", full.display())))?;
                    let q: QuadraticFile = toml::from_str(&text)
                        .map_err(|e| ZoError::Schema(format!("{}: {e}", full.display())))?;
                    (q, Some(full.display().to_string()))
                }
                None => (
                    QuadraticFile::generate(
                        need(pc.n, "n")?,
                        need(pc.d, "d")?,
                        pc.cond.unwrap_or(100.0),
                        pc.data_seed.unwrap_or(0),
                    )?,
                    None,
                ),
            };
            (file.into_problem(psi)?, path, None)
        }
    };
    let regime = match &pc.regime {
        Some(r) => Regime::parse(r).map_err(|e| schema(format!("problem.regime: {e}")))?,
        None if pc.kind == ProblemKind::Sigmoid => Regime::NonConvex,
        None if problem.strong_convexity() > 0.0 => Regime::StronglyConvex,
        None => Regime::Convex,
    };
    Ok(LoadedProblem { problem, regime, dataset_path: path, dataset_checksum: checksum })
}

/// A solver with every default filled in.
#[derive(Debug, Clone)]
pub struct ResolvedSolver {
    pub label: String,
    pub spec: SolverSpec,
    pub alpha: f64,
    pub beta: f64,
    pub beta_ratio: Option<f64>,
    pub sigma: Option<f64>,
    pub nu: Option<f64>,
}

impl ResolvedSolver {
    /// The solver table with resolved values pinned, for the manifest.
    pub fn pinned(&self, sc: &SolverConfig) -> SolverConfig {
        let mut out = sc.clone();
        out.label = Some(self.label.clone());
        out.alpha = Some(self.alpha);
        out.beta = Some(self.beta);
        out.beta_ratio = self.beta_ratio;
        out
    }
}

fn scheme(s: Option<SchemeName>) -> DirectionScheme {
    match s.unwrap_or(SchemeName::Coordinate) {
        SchemeName::Coordinate => DirectionScheme::Coordinate,
        SchemeName::Spherical => DirectionScheme::Spherical,
    }
}

pub fn resolve_solver(
    lp: &LoadedProblem,
    pc: &ProblemConfig,
    sc: &SolverConfig,
    index: usize,
) -> Result<ResolvedSolver> {
    let p = &lp.problem;
    let (n, d, l, mu) = (p.n(), p.d(), p.smoothness(), p.strong_convexity());
    let field = |f: &str| format!("solver[{index}].{f}");
    let wrap = |f: &str, e: ZoError| schema(format!("{}: {e}", field(f)));
    let label = sc.label_or_default();
    match sc.kind {
        SolverKind::Zivr => {
            let r = sc.r.unwrap_or(1);
            let variant = match sc.variant.unwrap_or(VariantName::Impl1) {
                VariantName::Impl1 => Variant::Impl1,
                VariantName::Impl2 => Variant::Impl2,
                VariantName::Impl3 => Variant::Impl3,
                VariantName::Memeff => Variant::MemEff {
                    blocks: sc.blocks.ok_or_else(|| schema(format!("{}: required for memeff", field("blocks"))))?,
                },
            };
            let basis = match sc.sketch_basis.unwrap_or(BasisName::Coordinate) {
                BasisName::Coordinate => SketchBasis::Coordinate,
                BasisName::Orthogonal => SketchBasis::FreshOrthogonal,
            };
            let sampler = SamplerConfig::new(variant, r, n, d)
                .and_then(|c| c.with_sketch_basis(basis))
                .and_then(|c| c.with_correction_scheme(scheme(sc.directions)))
                .map_err(|e| wrap("variant", e))?;
            let sn = sigma_nu(&sampler);
            let alpha = match sc.alpha {
                Some(a) => a,
                None => preset_alpha(lp.regime, r, d, l, sn.sigma).map_err(|e| wrap("alpha", e))?,
            };
            let beta = match sc.beta {
                Some(b) => b,
                None => preset_beta(lp.regime, n, r, d, l, mu, pc.epsilon).map_err(|e| wrap("beta", e))?,
            };
            let beta_ratio = match (sc.beta_ratio, lp.regime) {
                (Some(q), _) => Some(q),
                (None, Regime::Convex) => Some(0.999),
                (None, _) => None,
            };
            let schedule = match beta_ratio {
                Some(ratio) if ratio != 1.0 => BetaSchedule::Geometric { beta0: beta, ratio },
                _ => BetaSchedule::Constant(beta),
            };
            let spec = if let Variant::MemEff { .. } = variant {
                if sc.init.is_some() {
                    return Err(schema(format!("{}: memeff always starts from a full sweep", field("init"))));
                }
                SolverSpec::MemEff(MemEffParams { sampler, alpha, beta: schedule })
            } else {
                let init = match sc.init.unwrap_or(InitName::Zero) {
                    InitName::Zero => JacobianInit::Zero,
                    InitName::Warm => JacobianInit::Warm,
                };
                SolverSpec::Zivr { params: ZivrParams { sampler, alpha, beta: schedule }, init }
            };
            spec.validate(p).map_err(|e| wrap("kind", e))?;
            Ok(ResolvedSolver { label, spec, alpha, beta, beta_ratio, sigma: Some(sn.sigma), nu: Some(sn.nu) })
        }
        kind => {
            if sc.beta_ratio.is_some_and(|q| q != 1.0) {
                return Err(schema(format!("{}: baselines use a constant smoothing radius", field("beta_ratio"))));
            }
            let beta = match sc.beta {
                Some(b) => b,
                None => preset_beta(lp.regime, n, 1, d, l, mu, pc.epsilon).map_err(|e| wrap("beta", e))?,
            };
            let (spec, alpha) = match kind {
                SolverKind::VanillaZo => {
                    let mut v = VanillaParams::defaults(p, beta);
                    let a0 = sc.alpha.unwrap_or(v.step.initial());
                    v.step = match sc.schedule.unwrap_or(ScheduleName::InvSqrt) {
                        ScheduleName::Constant => StepSchedule::Constant(a0),
                        ScheduleName::InvSqrt => StepSchedule::InvSqrt(a0),
                    };
                    v.scheme = scheme(sc.directions);
                    (SolverSpec::VanillaZo(v), a0)
                }
                SolverKind::FullBatchZo => {
                    let mut f = FullBatchParams::defaults(p, beta);
                    if let Some(a) = sc.alpha {
                        f.alpha = a;
                    }
                    let a = f.alpha;
                    (SolverSpec::FullBatchZo(f), a)
                }
                _ => {
                    let mut z = ZpsvrgParams::defaults(p, beta);
                    if let Some(a) = sc.alpha {
                        z.alpha = a;
                    }
                    if let Some(m) = sc.epoch_len {
                        z.epoch_len = m;
                    }
                    if let Some(b) = sc.batch {
                        z.batch = b;
                    }
                    z.scheme = scheme(sc.directions);
                    let a = z.alpha;
                    (SolverSpec::Zpsvrg(z), a)
                }
            };
            spec.validate(p).map_err(|e| wrap("kind", e))?;
            Ok(ResolvedSolver { label, spec, alpha, beta, beta_ratio: None, sigma: None, nu: None })
        }
    }
}
