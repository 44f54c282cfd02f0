//! Experiment configuration, shipped presets and the generate / train /
//! predict / analyze stages operating on a run directory.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::basis::{make_basis, Basis, BasisKind, PhysicalDomain};
use crate::dataset::{add_noise, generate_pairs, sample_modal_box, BoxSpec, PairDataset};
use crate::error::{EvoError, Result};
use crate::prediction::{
    exact_modal_trajectory, galerkin_trajectory, mode_error, prop31_check_with_norm, rollout,
    theorem_bound_check, ErrorReport, ProbeSet, Prop31Report, ReferenceRun, Trajectory,
    TrajectoryKind,
};
use crate::resnet::{Activation, Architecture, ResNetModel};
use crate::solvers::{FineGrid, ModalEvolver, PdeKind, PdeSpec, SolverConfig};
use crate::training::{evaluate, train_with, LossHistory, TrainConfig, TrainHooks};

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATA_FILE: &str = "data.mevd";
pub const MODEL_FILE: &str = "model.mevm";
pub const LOSS_FILE: &str = "loss.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const REPORT_FILE: &str = "report.json";
pub const PROP31_FILE: &str = "prop31.json";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const ERRORS_FILE: &str = "errors.csv";
const LOCK_FILE: &str = ".lock";

pub fn trajectory_file(kind: TrajectoryKind) -> &'static str {
    match kind {
        TrajectoryKind::Predicted => "trajectory_predicted.csv",
        TrajectoryKind::OptimalProjection => "trajectory_optimal.csv",
        TrajectoryKind::Galerkin => "trajectory_galerkin.csv",
        TrajectoryKind::ExactModal => "trajectory_exact_modal.csv",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Paper,
    Desk,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Paper => "paper",
            Scale::Desk => "desk",
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = EvoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            _ => Err(EvoError::Config(format!(
                "unknown scale {s:?} (expected paper or desk)"
            ))),
        }
    }
}

pub const PRESET_NAMES: [&str; 7] = [
    "ex1-advection",
    "ex2-diffusion",
    "ex2-diffusion-noisy",
    "ex3-burgers-sig0.5",
    "ex3-burgers-sig0.1",
    "ex4-inviscid-burgers",
    "ex5-advdiff2d",
];

macro_rules! presets {
    ($($name:literal),*) => {
        fn preset_source(name: &str, scale: Scale) -> Option<&'static str> {
            match (name, scale) {
                $(
                    ($name, Scale::Paper) => Some(include_str!(concat!("../presets/", $name, ".paper.json"))),
                    ($name, Scale::Desk) => Some(include_str!(concat!("../presets/", $name, ".desk.json"))),
                )*
                _ => None,
            }
        }
    };
}

presets!(
    "ex1-advection",
    "ex2-diffusion",
    "ex2-diffusion-noisy",
    "ex3-burgers-sig0.5",
    "ex3-burgers-sig0.1",
    "ex4-inviscid-burgers",
    "ex5-advdiff2d"
);

/// Closed-form initial conditions available to presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedInitialCondition {
    /// `exp(sin x) / 2`
    HalfExpSin,
    /// `(x/pi) (5 - 4x/pi - 7(x/pi)^2 + 6(x/pi)^3)`
    Quartic,
    /// `-sin x`
    NegSin,
    /// `(2/5) exp((sin x - cos y) / 2)`
    #[serde(rename = "exp-sin-cos-2d")]
    ExpSinCos2d,
}

impl NamedInitialCondition {
    pub fn dim(self) -> usize {
        match self {
            NamedInitialCondition::ExpSinCos2d => 2,
            _ => 1,
        }
    }

    pub fn eval(self, p: &[f64]) -> f64 {
        use std::f64::consts::PI;
        match self {
            NamedInitialCondition::HalfExpSin => 0.5 * p[0].sin().exp(),
            NamedInitialCondition::Quartic => {
                let s = p[0] / PI;
                s * (5.0 - 4.0 * s - 7.0 * s * s + 6.0 * s * s * s)
            }
            NamedInitialCondition::NegSin => -p[0].sin(),
            NamedInitialCondition::ExpSinCos2d => 0.4 * ((p[0].sin() - p[1].cos()) / 2.0).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCondition {
    Named(NamedInitialCondition),
    Coefficients { coefficients: Vec<f64> },
}

impl InitialCondition {
    /// Values of `u0` on the fine grid.
    pub fn fine_values(&self, basis: &Basis, fine: &FineGrid) -> Result<Vec<f64>> {
        match self {
            InitialCondition::Named(ic) => {
                if ic.dim() != basis.domain().dim() {
                    return Err(EvoError::Config(format!(
                        "initial condition {ic:?} is {}D but the domain is {}D",
                        ic.dim(),
                        basis.domain().dim()
                    )));
                }
                Ok(fine.sample(|p| ic.eval(p)))
            }
            InitialCondition::Coefficients { coefficients } => {
                if coefficients.len() != basis.n() {
                    return Err(EvoError::Config(format!(
                        "initial coefficient vector has {} entries, the basis has {}",
                        coefficients.len(),
                        basis.n()
                    )));
                }
                Ok(fine.lift(coefficients))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub domain: PhysicalDomain,
    pub kind: BasisKind,
    /// Maximum wavenumber (real-trig), number of modes (sine) or 25 (tensor-trig-2d).
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub delta: f64,
    pub samples: usize,
    #[serde(rename = "box")]
    pub sampling_box: BoxSpec,
    /// Relative multiplicative noise level.
    #[serde(default)]
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub blocks: usize,
    pub depth: usize,
    pub width: usize,
    #[serde(default)]
    pub activation: Activation,
    pub seed: u64,
    #[serde(default = "one")]
    pub init_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionConfig {
    pub initial_condition: InitialCondition,
    /// Final time; must be a multiple of the lag.
    pub horizon: f64,
    /// Times at which predicted and true fields are written.
    #[serde(default)]
    pub field_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Number of box samples in the probe set.
    pub probes: usize,
    pub probe_seed: u64,
    /// Last step at which the bound is checked (all steps if absent).
    pub bound_horizon: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            probes: 10_000,
            probe_seed: 0,
            bound_horizon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    pub basis: BasisConfig,
    pub pde: PdeSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub training: TrainConfig,
    pub prediction: PredictionConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

/// Seeds used by a run, as recorded in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub data: u64,
    pub init: u64,
    pub shuffle: u64,
    pub probe: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| EvoError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| EvoError::Config(format!("{}: {e}", path.display())))?;
        parse_with_overrides(&text, overrides).map_err(|e| match e {
            EvoError::Config(m) => EvoError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn preset(name: &str, scale: Scale, overrides: &[String]) -> Result<Self> {
        let text = preset_source(name, scale).ok_or_else(|| {
            EvoError::Config(format!(
                "unknown preset {name:?}; available: {}",
                PRESET_NAMES.join(", ")
            ))
        })?;
        parse_with_overrides(text, overrides).map_err(|e| match e {
            EvoError::Config(m) => {
                EvoError::Config(format!("preset {name} ({}): {m}", scale.as_str()))
            }
            e => e,
        })
    }

    /// Derives every seed from one value: data `s`, init `s+1`, shuffle `s+2`, probes `s+3`.
    pub fn set_seed(&mut self, s: u64) {
        self.data.seed = s;
        self.network.seed = s.wrapping_add(1);
        self.training.shuffle_seed = s.wrapping_add(2);
        self.analysis.probe_seed = s.wrapping_add(3);
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            data: self.data.seed,
            init: self.network.seed,
            shuffle: self.training.shuffle_seed,
            probe: self.analysis.probe_seed,
        }
    }

    pub fn build_basis(&self) -> Result<Basis> {
        make_basis(self.basis.domain.clone(), self.basis.kind, self.basis.size)
    }

    pub fn architecture(&self, n: usize) -> Architecture {
        Architecture {
            n,
            blocks: self.network.blocks,
            depth: self.network.depth,
            width: self.network.width,
            activation: self.network.activation,
        }
    }

    /// Number of lag steps up to the prediction horizon.
    pub fn steps(&self) -> Result<usize> {
        let r = self.prediction.horizon / self.data.delta;
        if !(r >= 0.0) || (r - r.round()).abs() > 1e-9 * r.max(1.0) {
            return Err(EvoError::Config(format!(
                "prediction.horizon {} is not a multiple of data.delta {}",
                self.prediction.horizon, self.data.delta
            )));
        }
        Ok(r.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: EvoError| match e {
            EvoError::Config(m) => EvoError::Config(m),
            e => EvoError::Config(e.to_string()),
        };
        let basis = self.build_basis().map_err(cfg_err)?;
        let b = self.data.sampling_box.resolve(&basis).map_err(cfg_err)?;
        if b.dim() != basis.n() {
            return Err(EvoError::Config(format!(
                "box has dimension {}, basis has {}",
                b.dim(),
                basis.n()
            )));
        }
        self.pde.validate().map_err(cfg_err)?;
        if self.pde.dim() != basis.domain().dim() {
            return Err(EvoError::Config(format!(
                "pde is {}D, basis domain is {}D",
                self.pde.dim(),
                basis.domain().dim()
            )));
        }
        self.solver.validate().map_err(cfg_err)?;
        if !(self.data.delta > 0.0 && self.data.delta.is_finite()) {
            return Err(EvoError::Config(format!(
                "data.delta must be positive, got {}",
                self.data.delta
            )));
        }
        if self.data.samples == 0 {
            return Err(EvoError::Config("data.samples must be positive".into()));
        }
        if !(self.data.noise >= 0.0 && self.data.noise < 1.0) {
            return Err(EvoError::Config(format!(
                "data.noise must lie in [0, 1), got {}",
                self.data.noise
            )));
        }
        self.architecture(basis.n()).validate().map_err(cfg_err)?;
        self.training.validate(self.data.samples).map_err(cfg_err)?;
        self.steps()?;
        if let InitialCondition::Coefficients { coefficients } = &self.prediction.initial_condition
        {
            if coefficients.len() != basis.n() {
                return Err(EvoError::Config(format!(
                    "prediction.initial_condition has {} coefficients, basis has {}",
                    coefficients.len(),
                    basis.n()
                )));
            }
        }
        if let InitialCondition::Named(ic) = &self.prediction.initial_condition {
            if ic.dim() != basis.domain().dim() {
                return Err(EvoError::Config(format!(
                    "initial condition {ic:?} does not match the domain dimension"
                )));
            }
        }
        if self.analysis.probes == 0 {
            return Err(EvoError::Config("analysis.probes must be positive".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }
}

fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    // parse from the text first so that schema errors carry line numbers
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| EvoError::Config(e.to_string()))?;
    if overrides.is_empty() {
        cfg.validate()?;
        return Ok(cfg);
    }
    let mut value = serde_json::to_value(&cfg)?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| {
        EvoError::Config(format!("after applying --set {}: {e}", overrides.join(" ")))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies `a.b.c=VALUE`; numeric segments index arrays and the value is read
/// as JSON, falling back to a plain string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| EvoError::Config(format!("override {assignment:?} is not KEY=VALUE")))?;
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(EvoError::Config(format!("bad override key {path:?}")));
    }
    let mut node = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), new);
                    return Ok(());
                }
                map.entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    EvoError::Config(format!("{path}: {seg:?} is not an array index"))
                })?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    EvoError::Config(format!("{path}: index {idx} out of range (length {len})"))
                })?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                slot
            }
            Value::Null => {
                *node = Value::Object(Default::default());
                let Value::Object(map) = node else {
                    unreachable!()
                };
                if last {
                    map.insert(seg.to_string(), new);
                    return Ok(());
                }
                map.entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            _ => {
                return Err(EvoError::Config(format!(
                    "{path}: {} is a scalar",
                    segments[..i].join(".")
                )))
            }
        };
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Hash of the loss values only; the wall-clock column is left out.
pub fn loss_hash(h: &LossHistory) -> String {
    let mut d = Sha256::new();
    for x in &h.train {
        d.update(x.to_le_bytes());
    }
    if let Some(v) = &h.validation {
        for x in v {
            d.update(x.to_le_bytes());
        }
    }
    hex::encode(d.finalize())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub scale: Option<Scale>,
    pub version: String,
    pub config_sha256: String,
    pub seeds: Option<Seeds>,
    pub solver: Option<SolverConfig>,
    /// Output file name to sha256; `loss.csv` is hashed without its timing column.
    pub outputs: BTreeMap<String, String>,
    pub stages: Vec<String>,
    pub rerun: Vec<String>,
}

impl Manifest {
    fn record(&mut self, stage: &str, outputs: impl IntoIterator<Item = (String, String)>) {
        self.stages.retain(|s| s != stage);
        self.stages.push(stage.to_string());
        self.outputs.extend(outputs);
    }
}

/// An output directory held for the duration of one command.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Creates the directory if needed and takes its lock file.
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(EvoError::Config(format!(
                    "{} is locked by another command (remove {} if stale)",
                    root.display(),
                    lock.display()
                )))
            }
            Err(e) => return Err(e.into()),
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// The config saved by an earlier stage.
    pub fn saved_config(&self) -> Result<ExperimentConfig> {
        let p = self.path(CONFIG_FILE);
        if !p.exists() {
            return Err(EvoError::Config(format!(
                "{} has no {CONFIG_FILE}; pass --config or --preset",
                self.root.display()
            )));
        }
        ExperimentConfig::load(&p, &[])
    }

    fn require(&self, names: &[&str]) -> Result<()> {
        let missing: Vec<&str> = names
            .iter()
            .copied()
            .filter(|n| !self.path(n).exists())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(EvoError::Config(format!(
                "missing inputs in {}: {}",
                self.root.display(),
                missing.join(", ")
            )))
        }
    }

    fn manifest(&self, cfg: &ExperimentConfig) -> Result<Manifest> {
        let p = self.path(MANIFEST_FILE);
        let hash = cfg.hash()?;
        let mut m = if p.exists() {
            let m: Manifest = serde_json::from_str(&fs::read_to_string(&p)?)?;
            if m.config_sha256 == hash {
                m
            } else {
                Manifest::default()
            }
        } else {
            Manifest::default()
        };
        m.name = cfg.name.clone();
        m.scale = cfg.scale;
        m.version = env!("CARGO_PKG_VERSION").to_string();
        m.config_sha256 = hash;
        m.seeds = Some(cfg.seeds());
        m.solver = Some(cfg.solver.clone());
        m.rerun = ["generate", "train", "predict", "analyze"]
            .iter()
            .map(|s| format!("pde-evolve {s} --config {CONFIG_FILE} --out ."))
            .collect();
        Ok(m)
    }

    fn save_manifest(&self, m: &Manifest) -> Result<()> {
        fs::write(self.path(MANIFEST_FILE), serde_json::to_string_pretty(m)?)?;
        Ok(())
    }

    fn save_config(&self, cfg: &ExperimentConfig) -> Result<()> {
        fs::write(self.path(CONFIG_FILE), cfg.to_json()?)?;
        Ok(())
    }

    fn hashes(&self, names: &[&str]) -> Result<Vec<(String, String)>> {
        names
            .iter()
            .filter(|n| self.path(n).exists())
            .map(|n| Ok((n.to_string(), file_sha256(&self.path(n))?)))
            .collect()
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_FILE));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub samples: usize,
    pub seconds: f64,
    pub sha256: String,
}

pub fn build_dataset(cfg: &ExperimentConfig) -> Result<PairDataset> {
    let basis = cfg.build_basis()?;
    let b = cfg.data.sampling_box.resolve(&basis)?;
    let samples = sample_modal_box(&basis, &b, cfg.data.samples, cfg.data.seed)?;
    let ds = generate_pairs(&basis, &samples, cfg.data.delta, &cfg.pde, &cfg.solver)?;
    if cfg.data.noise > 0.0 {
        add_noise(&ds, cfg.data.noise, cfg.data.seed)
    } else {
        Ok(ds)
    }
}

pub fn run_generate(cfg: &ExperimentConfig, dir: &RunDir) -> Result<GenerateSummary> {
    let start = Instant::now();
    let ds = build_dataset(cfg)?;
    dir.save_config(cfg)?;
    ds.save(&dir.path(DATA_FILE))?;
    let mut m = dir.manifest(cfg)?;
    let hashes = dir.hashes(&[DATA_FILE])?;
    let sha256 = hashes[0].1.clone();
    m.record("generate", hashes);
    dir.save_manifest(&m)?;
    Ok(GenerateSummary {
        samples: ds.len(),
        seconds: start.elapsed().as_secs_f64(),
        sha256,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub epochs: usize,
    pub final_loss: f64,
    pub seconds: f64,
}

pub fn run_train(
    cfg: &ExperimentConfig,
    dir: &RunDir,
    resume: bool,
    progress: Option<fn(usize, f64)>,
) -> Result<TrainSummary> {
    dir.require(&[DATA_FILE])?;
    let start = Instant::now();
    let ds = PairDataset::load(&dir.path(DATA_FILE))?;
    let basis = cfg.build_basis()?;
    if ds.n() != basis.n() {
        return Err(EvoError::Config(format!(
            "dataset has n = {} but the configured basis has n = {}",
            ds.n(),
            basis.n()
        )));
    }
    if (ds.delta() - cfg.data.delta).abs() > 1e-12 * cfg.data.delta {
        return Err(EvoError::Config(format!(
            "dataset lag {} differs from data.delta {}",
            ds.delta(),
            cfg.data.delta
        )));
    }
    let model = ResNetModel::init(
        cfg.architecture(basis.n()),
        cfg.network.seed,
        cfg.network.init_scale,
    )?;
    let checkpoints = cfg.training.checkpoint_every > 0 || resume;
    let hooks = TrainHooks {
        checkpoint_dir: checkpoints.then(|| dir.path(CHECKPOINT_DIR)),
        resume,
        progress,
    };
    let (model, history) = train_with(&model, &ds, &cfg.training, &hooks)?;
    let final_loss = evaluate(&model, &ds)?;
    dir.save_config(cfg)?;
    model.save(&dir.path(MODEL_FILE))?;
    history.save_csv(&dir.path(LOSS_FILE))?;
    let mut m = dir.manifest(cfg)?;
    let mut hashes = dir.hashes(&[MODEL_FILE])?;
    hashes.push((LOSS_FILE.to_string(), loss_hash(&history)));
    m.record("train", hashes);
    dir.save_manifest(&m)?;
    Ok(TrainSummary {
        epochs: history.len(),
        final_loss,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictSummary {
    pub steps: usize,
    /// Relative field error at the final step.
    pub final_rel_error: Option<f64>,
    pub seconds: f64,
}

fn reference_for(cfg: &ExperimentConfig, basis: &Basis) -> Result<ReferenceRun> {
    let fine = FineGrid::for_pde(basis, &cfg.pde, &cfg.solver)?;
    let u0 = cfg.prediction.initial_condition.fine_values(basis, &fine)?;
    ReferenceRun::compute(
        basis,
        &cfg.pde,
        &cfg.solver,
        u0,
        cfg.data.delta,
        cfg.steps()?,
    )
}

fn load_model(cfg: &ExperimentConfig, dir: &RunDir, basis: &Basis) -> Result<ResNetModel> {
    let model = ResNetModel::load(&dir.path(MODEL_FILE))?;
    if model.n() != basis.n() {
        return Err(EvoError::Config(format!(
            "model width n = {} does not match the basis (n = {})",
            model.n(),
            basis.n()
        )));
    }
    let _ = cfg;
    Ok(model)
}

fn field_file(t: f64, what: &str) -> String {
    format!("fields/t{t:.4}_{what}.csv")
}

pub fn run_predict(cfg: &ExperimentConfig, dir: &RunDir) -> Result<PredictSummary> {
    dir.require(&[MODEL_FILE])?;
    let start = Instant::now();
    let basis = cfg.build_basis()?;
    let model = load_model(cfg, dir, &basis)?;
    let reference = reference_for(cfg, &basis)?;
    let steps = reference.steps();
    let predicted = rollout(
        &model,
        reference.initial_coefficients(),
        cfg.data.delta,
        steps,
    )?;

    let mut written = vec![
        trajectory_file(TrajectoryKind::Predicted).to_string(),
        trajectory_file(TrajectoryKind::OptimalProjection).to_string(),
    ];
    predicted.save_csv(&dir.path(&written[0]))?;
    reference.optimal.save_csv(&dir.path(&written[1]))?;
    if let Some(extra) = extra_reference(cfg, &basis, &reference)? {
        let name = trajectory_file(extra.kind).to_string();
        extra.save_csv(&dir.path(&name))?;
        written.push(name);
    }

    if !cfg.prediction.field_times.is_empty() {
        fs::create_dir_all(dir.path("fields"))?;
    }
    for &t in &cfg.prediction.field_times {
        let k = (t / cfg.data.delta).round();
        if !(k >= 0.0) || k as usize > steps {
            return Err(EvoError::Config(format!(
                "field time {t} lies outside [0, {}]",
                cfg.prediction.horizon
            )));
        }
        let k = k as usize;
        let t = k as f64 * cfg.data.delta;
        let fine = &reference.fine;
        for (what, values) in [
            ("predicted", fine.lift(&predicted.states[k])),
            ("optimal", fine.lift(&reference.optimal.states[k])),
            ("true", reference.fields[k].clone()),
        ] {
            let name = field_file(t, what);
            fine.field(values)?.save_csv(&dir.path(&name))?;
            written.push(name);
        }
    }

    let final_rel_error = reference
        .field_errors(&predicted)?
        .last()
        .copied()
        .flatten();
    let mut m = dir.manifest(cfg)?;
    let names: Vec<&str> = written.iter().map(String::as_str).collect();
    m.record("predict", dir.hashes(&names)?);
    dir.save_config(cfg)?;
    dir.save_manifest(&m)?;
    Ok(PredictSummary {
        steps,
        final_rel_error,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Galerkin trajectory for Burgers, exact-modal iteration for linear problems.
fn extra_reference(
    cfg: &ExperimentConfig,
    basis: &Basis,
    reference: &ReferenceRun,
) -> Result<Option<Trajectory>> {
    let v0 = reference.initial_coefficients();
    let steps = reference.steps();
    if cfg.pde.kind == PdeKind::Burgers1d {
        match galerkin_trajectory(basis, &cfg.pde, v0, cfg.data.delta, steps) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.is_numeric() => Ok(None),
            Err(e) => Err(e),
        }
    } else {
        let ev = ModalEvolver::new(basis, &cfg.pde, cfg.data.delta, &cfg.solver)?;
        Ok(Some(exact_modal_trajectory(&ev, v0, steps)?))
    }
}

/// Per-mode time-averaged deviation from the optimal projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub predicted: Vec<f64>,
    /// Galerkin or exact-modal trajectory, whichever the run produced.
    pub reference_kind: Option<TrajectoryKind>,
    pub reference: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub report: ErrorReport,
    pub prop31: Prop31Report,
    pub modes: ModeComparison,
}

pub fn run_analyze(cfg: &ExperimentConfig, dir: &RunDir) -> Result<AnalysisOutput> {
    let pred_file = trajectory_file(TrajectoryKind::Predicted);
    dir.require(&[MODEL_FILE, pred_file])?;
    let basis = cfg.build_basis()?;
    let model = load_model(cfg, dir, &basis)?;
    let mut predicted = Trajectory::load_csv(&dir.path(pred_file), TrajectoryKind::Predicted)?;
    if predicted.len() == 1 {
        predicted.delta = cfg.data.delta;
    }
    if predicted.n() != basis.n() {
        return Err(EvoError::Config(format!(
            "{pred_file} has {} modes, basis has {}",
            predicted.n(),
            basis.n()
        )));
    }
    let reference = reference_for(cfg, &basis)?;
    let evolver = ModalEvolver::new(&basis, &cfg.pde, cfg.data.delta, &cfg.solver)?;
    let b = cfg.data.sampling_box.resolve(&basis)?;
    let probes = ProbeSet::from_box(
        &b,
        cfg.analysis.probes,
        cfg.analysis.probe_seed,
        &reference.optimal.states,
        "optimal-projection states of the reference trajectory",
    );
    let horizon = cfg.analysis.bound_horizon.unwrap_or(reference.steps());
    let report = theorem_bound_check(&model, &evolver, &reference, &predicted, &probes, horizon)?;
    let prop31 = prop31_check_with_norm(&evolver, &reference, report.norm_pe, 1e-10)?;

    let extra_name = if cfg.pde.kind == PdeKind::Burgers1d {
        TrajectoryKind::Galerkin
    } else {
        TrajectoryKind::ExactModal
    };
    let extra_path = dir.path(trajectory_file(extra_name));
    let extra = if extra_path.exists() {
        let mut t = Trajectory::load_csv(&extra_path, extra_name)?;
        t.delta = cfg.data.delta;
        Some(t)
    } else {
        None
    };
    let n = basis.n();
    let modes = ModeComparison {
        predicted: (0..n)
            .map(|i| mode_error(&predicted, &reference.optimal, i..i + 1))
            .collect(),
        reference_kind: extra.as_ref().map(|t| t.kind),
        reference: extra.as_ref().map(|t| {
            (0..n)
                .map(|i| mode_error(t, &reference.optimal, i..i + 1))
                .collect()
        }),
    };

    report.save(&dir.path(REPORT_FILE))?;
    fs::write(
        dir.path(PROP31_FILE),
        serde_json::to_string_pretty(&prop31)?,
    )?;
    fs::write(
        dir.path(COMPARISON_FILE),
        serde_json::to_string_pretty(&modes)?,
    )?;
    write_error_table(&report, &dir.path(ERRORS_FILE))?;
    fs::create_dir_all(dir.path("coefficients"))?;
    let mut written = vec![
        REPORT_FILE.to_string(),
        PROP31_FILE.to_string(),
        COMPARISON_FILE.to_string(),
        ERRORS_FILE.to_string(),
    ];
    for i in 0..n {
        let name = format!("coefficients/mode_{}.csv", i + 1);
        write_mode_table(
            i,
            &predicted,
            &reference.optimal,
            extra.as_ref(),
            &dir.path(&name),
        )?;
        written.push(name);
    }
    let mut m = dir.manifest(cfg)?;
    let names: Vec<&str> = written.iter().map(String::as_str).collect();
    m.record("analyze", dir.hashes(&names)?);
    dir.save_manifest(&m)?;
    Ok(AnalysisOutput {
        report,
        prop31,
        modes,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| format!("{v:e}"))
}

fn write_error_table(r: &ErrorReport, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "t,rel_err_field,rel_err_coeff,coeff_err,field_err,eps_proj,bound_rhs,bound_rhs_field"
    )?;
    for k in 0..r.times.len() {
        writeln!(
            w,
            "{},{},{},{:e},{:e},{:e},{:e},{:e}",
            r.times[k],
            opt(r.rel_err_field[k]),
            opt(r.rel_err_coeff[k]),
            r.coeff_err[k],
            r.field_err[k],
            r.eps_proj[k],
            r.bound_rhs[k],
            r.bound_rhs_field[k]
        )?;
    }
    w.flush()?;
    Ok(())
}

fn write_mode_table(
    i: usize,
    pred: &Trajectory,
    optimal: &Trajectory,
    extra: Option<&Trajectory>,
    path: &Path,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match extra {
        Some(e) => writeln!(w, "t,predicted,optimal,{}", kind_column(e.kind))?,
        None => writeln!(w, "t,predicted,optimal")?,
    }
    for (k, t) in pred.times().iter().enumerate() {
        write!(w, "{t},{:e},{:e}", pred.states[k][i], optimal.states[k][i])?;
        if let Some(e) = extra {
            write!(w, ",{:e}", e.states[k][i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn kind_column(kind: TrajectoryKind) -> &'static str {
    match kind {
        TrajectoryKind::Predicted => "predicted",
        TrajectoryKind::OptimalProjection => "optimal",
        TrajectoryKind::Galerkin => "galerkin",
        TrajectoryKind::ExactModal => "exact_modal",
    }
}
