//! Experiment configuration: `{task, net: {widths}, loss, optimizer, seeds, eps_list}`
//! plus optional per-command sections. Parsing reports the JSON path of the
//! offending field; [`ExperimentConfig::validate`] does the same for values.

use std::path::Path;

use lipcert_core::data::{gaussian_mixture_task, linear_pair_task, noisy_gaussians, random_label_task, separable_blobs, two_moons, LabeledDataset};
use lipcert_core::geometry::{sdf_grid_dataset, snowflake_ring, SNOWFLAKE_BBOX};
use lipcert_core::losses::LossSpec;
use lipcert_core::optim::{OptimizerCfg, OptimizerKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "TaskFields")]
pub enum TaskConfig {
    TwoMoons {
        train_size: usize,
        test_size: usize,
        noise: f64,
        #[serde(default)]
        data_seed: u64,
    },
    NoisyGaussians {
        train_size: usize,
        test_size: usize,
        #[serde(default)]
        data_seed: u64,
    },
    SeparableBlobs {
        train_size: usize,
        test_size: usize,
        #[serde(default)]
        data_seed: u64,
    },
    GaussianMixture {
        train_size: usize,
        test_size: usize,
        #[serde(default)]
        data_seed: u64,
    },
    /// Train and test are the same points.
    RandomLabels {
        size: usize,
        min_sep: f64,
        #[serde(default)]
        data_seed: u64,
    },
    /// Signed-distance grid of the snowflake ring; train and test coincide.
    Snowflake { iterations: usize, resolution: usize },
    LinearPair,
}

impl TaskConfig {
    fn validate(&self) -> Result<(), CliError> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(CliError::invalid(format!("task.{field}"), "must be at least 1"))
            } else {
                Ok(())
            }
        };
        match *self {
            TaskConfig::TwoMoons { train_size, test_size, noise, .. } => {
                positive("train_size", train_size)?;
                positive("test_size", test_size)?;
                if !(noise >= 0.0 && noise.is_finite()) {
                    return Err(CliError::invalid("task.noise", "must be a finite non-negative number"));
                }
            }
            TaskConfig::NoisyGaussians { train_size, test_size, .. }
            | TaskConfig::SeparableBlobs { train_size, test_size, .. }
            | TaskConfig::GaussianMixture { train_size, test_size, .. } => {
                positive("train_size", train_size)?;
                positive("test_size", test_size)?;
            }
            TaskConfig::RandomLabels { size, min_sep, .. } => {
                if size < 2 {
                    return Err(CliError::invalid("task.size", "must be at least 2"));
                }
                if !(min_sep > 0.0 && min_sep.is_finite()) {
                    return Err(CliError::invalid("task.min_sep", "must be positive"));
                }
            }
            TaskConfig::Snowflake { iterations, resolution } => {
                if iterations > 8 {
                    return Err(CliError::invalid("task.iterations", "at most 8"));
                }
                if resolution < 2 {
                    return Err(CliError::invalid("task.resolution", "must be at least 2"));
                }
            }
            TaskConfig::LinearPair => {}
        }
        Ok(())
    }

    /// `(train, test)`; the test split uses `data_seed + 1`.
    pub fn datasets(&self) -> Result<(LabeledDataset, LabeledDataset), CliError> {
        let pair = |a: LabeledDataset, b: LabeledDataset| Ok((a, b));
        match *self {
            TaskConfig::TwoMoons {
                train_size,
                test_size,
                noise,
                data_seed,
            } => pair(two_moons(train_size, noise, data_seed), two_moons(test_size, noise, data_seed + 1)),
            TaskConfig::NoisyGaussians {
                train_size,
                test_size,
                data_seed,
            } => pair(noisy_gaussians(train_size, data_seed), noisy_gaussians(test_size, data_seed + 1)),
            TaskConfig::SeparableBlobs {
                train_size,
                test_size,
                data_seed,
            } => pair(separable_blobs(train_size, data_seed), separable_blobs(test_size, data_seed + 1)),
            TaskConfig::GaussianMixture {
                train_size,
                test_size,
                data_seed,
            } => pair(gaussian_mixture_task(train_size, data_seed), gaussian_mixture_task(test_size, data_seed + 1)),
            TaskConfig::RandomLabels { size, min_sep, data_seed } => {
                let d = random_label_task(size, min_sep, data_seed)?;
                pair(d.clone(), d)
            }
            TaskConfig::Snowflake { iterations, resolution } => {
                let (b, lab) = snowflake_ring(iterations)?;
                let d = sdf_grid_dataset(&b, &lab, resolution, SNOWFLAKE_BBOX)?;
                pair(d.clone(), d)
            }
            TaskConfig::LinearPair => pair(linear_pair_task(), linear_pair_task()),
        }
    }
}

/// Flat view of a tagged section, so parse errors keep the inner field path.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFields {
    kind: TaskKind,
    train_size: Option<usize>,
    test_size: Option<usize>,
    noise: Option<f64>,
    data_seed: Option<u64>,
    size: Option<usize>,
    min_sep: Option<f64>,
    iterations: Option<usize>,
    resolution: Option<usize>,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum TaskKind {
    TwoMoons,
    NoisyGaussians,
    SeparableBlobs,
    GaussianMixture,
    RandomLabels,
    Snowflake,
    LinearPair,
}

fn need<T>(v: Option<T>, field: &str, kind: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("`{field}` is required for kind {kind}"))
}

/// Rejects fields that were given but do not belong to `kind`.
fn only(given: &[(&str, bool)], allowed: &[&str], kind: &str) -> Result<(), String> {
    match given.iter().find(|(name, present)| *present && !allowed.contains(name)) {
        Some((name, _)) => Err(format!("`{name}` does not apply to kind {kind}")),
        None => Ok(()),
    }
}

impl TryFrom<TaskFields> for TaskConfig {
    type Error = String;

    fn try_from(f: TaskFields) -> Result<Self, String> {
        let given = [
            ("train_size", f.train_size.is_some()),
            ("test_size", f.test_size.is_some()),
            ("noise", f.noise.is_some()),
            ("data_seed", f.data_seed.is_some()),
            ("size", f.size.is_some()),
            ("min_sep", f.min_sep.is_some()),
            ("iterations", f.iterations.is_some()),
            ("resolution", f.resolution.is_some()),
        ];
        let data_seed = f.data_seed.unwrap_or(0);
        let sized = |kind: &str| -> Result<(usize, usize), String> {
            only(&given, &["train_size", "test_size", "data_seed"], kind)?;
            Ok((need(f.train_size, "train_size", kind)?, need(f.test_size, "test_size", kind)?))
        };
        Ok(match f.kind {
            TaskKind::TwoMoons => {
                let kind = "two_moons";
                only(&given, &["train_size", "test_size", "noise", "data_seed"], kind)?;
                TaskConfig::TwoMoons {
                    train_size: need(f.train_size, "train_size", kind)?,
                    test_size: need(f.test_size, "test_size", kind)?,
                    noise: need(f.noise, "noise", kind)?,
                    data_seed,
                }
            }
            TaskKind::NoisyGaussians => {
                let (train_size, test_size) = sized("noisy_gaussians")?;
                TaskConfig::NoisyGaussians { train_size, test_size, data_seed }
            }
            TaskKind::SeparableBlobs => {
                let (train_size, test_size) = sized("separable_blobs")?;
                TaskConfig::SeparableBlobs { train_size, test_size, data_seed }
            }
            TaskKind::GaussianMixture => {
                let (train_size, test_size) = sized("gaussian_mixture")?;
                TaskConfig::GaussianMixture { train_size, test_size, data_seed }
            }
            TaskKind::RandomLabels => {
                let kind = "random_labels";
                only(&given, &["size", "min_sep", "data_seed"], kind)?;
                TaskConfig::RandomLabels {
                    size: need(f.size, "size", kind)?,
                    min_sep: need(f.min_sep, "min_sep", kind)?,
                    data_seed,
                }
            }
            TaskKind::Snowflake => {
                let kind = "snowflake";
                only(&given, &["iterations", "resolution"], kind)?;
                TaskConfig::Snowflake {
                    iterations: need(f.iterations, "iterations", kind)?,
                    resolution: need(f.resolution, "resolution", kind)?,
                }
            }
            TaskKind::LinearPair => {
                only(&given, &[], "linear_pair")?;
                TaskConfig::LinearPair
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    /// Hidden widths; input and output widths come from the task.
    pub widths: Vec<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { widths: vec![64, 64, 64] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "LossFields")]
pub enum LossConfig {
    Bce { tau: f64 },
    Cce { tau: f64 },
    Hinge { m: f64 },
    Wasserstein,
    Hkr { alpha: f64, m: f64 },
    MulticlassHkr { alpha: f64, m: f64 },
}

impl LossConfig {
    pub fn spec(&self) -> LossSpec {
        match *self {
            LossConfig::Bce { tau } => LossSpec::BceTau { tau },
            LossConfig::Cce { tau } => LossSpec::CceTau { tau },
            LossConfig::Hinge { m } => LossSpec::HingeM { m },
            LossConfig::Wasserstein => LossSpec::Wass,
            LossConfig::Hkr { alpha, m } => LossSpec::Hkr { alpha, m },
            LossConfig::MulticlassHkr { alpha, m } => LossSpec::MulticlassHkr { alpha, m },
        }
    }

    fn validate(&self, field: &str) -> Result<(), CliError> {
        self.spec().validate().map_err(|e| CliError::invalid(field, e))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LossFields {
    kind: LossKind,
    tau: Option<f64>,
    alpha: Option<f64>,
    m: Option<f64>,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum LossKind {
    Bce,
    Cce,
    Hinge,
    Wasserstein,
    Hkr,
    MulticlassHkr,
}

impl TryFrom<LossFields> for LossConfig {
    type Error = String;

    fn try_from(f: LossFields) -> Result<Self, String> {
        let given = [("tau", f.tau.is_some()), ("alpha", f.alpha.is_some()), ("m", f.m.is_some())];
        let with = |kind: &str, allowed: &[&str]| only(&given, allowed, kind).map(|_| kind.to_string());
        Ok(match f.kind {
            LossKind::Bce => LossConfig::Bce {
                tau: need(f.tau, "tau", &with("bce", &["tau"])?)?,
            },
            LossKind::Cce => LossConfig::Cce {
                tau: need(f.tau, "tau", &with("cce", &["tau"])?)?,
            },
            LossKind::Hinge => LossConfig::Hinge {
                m: need(f.m, "m", &with("hinge", &["m"])?)?,
            },
            LossKind::Wasserstein => {
                with("wasserstein", &[])?;
                LossConfig::Wasserstein
            }
            LossKind::Hkr => {
                let kind = with("hkr", &["alpha", "m"])?;
                LossConfig::Hkr {
                    alpha: need(f.alpha, "alpha", &kind)?,
                    m: need(f.m, "m", &kind)?,
                }
            }
            LossKind::MulticlassHkr => {
                let kind = with("multiclass_hkr", &["alpha", "m"])?;
                LossConfig::MulticlassHkr {
                    alpha: need(f.alpha, "alpha", &kind)?,
                    m: need(f.m, "m", &kind)?,
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "adam")]
    pub kind: OptimizerName,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps_hat")]
    pub eps_hat: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

fn adam() -> OptimizerName {
    OptimizerName::Adam
}
fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps_hat() -> f64 {
    1e-8
}
fn default_epochs() -> usize {
    100
}
fn default_batch() -> usize {
    64
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: adam(),
            lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps_hat: default_eps_hat(),
            momentum: 0.0,
            epochs: default_epochs(),
            batch_size: default_batch(),
        }
    }
}

impl OptimizerConfig {
    pub fn kind(&self) -> OptimizerKind {
        match self.kind {
            OptimizerName::Adam => OptimizerKind::Adam {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps_hat: self.eps_hat,
            },
            OptimizerName::Sgd => OptimizerKind::Sgd {
                lr: self.lr,
                momentum: self.momentum,
            },
        }
    }

    pub fn cfg(&self, seed: u64) -> OptimizerCfg {
        OptimizerCfg {
            kind: self.kind(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(CliError::invalid("optimizer.lr", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(CliError::invalid("optimizer.batch_size", "must be at least 1"));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2), ("momentum", self.momentum)] {
            if !(0.0..1.0).contains(&v) {
                return Err(CliError::invalid(format!("optimizer.{name}"), "must lie in [0, 1)"));
            }
        }
        if !(self.eps_hat > 0.0 && self.eps_hat.is_finite()) {
            return Err(CliError::invalid("optimizer.eps_hat", "must be positive"));
        }
        self.cfg(0).validate().map_err(|e| CliError::invalid("optimizer", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencySection {
    pub fractions: Vec<f64>,
    pub taus: Vec<f64>,
    #[serde(default)]
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceSection {
    #[serde(default = "default_linear_steps")]
    pub linear_steps: usize,
    #[serde(default = "default_linear_lr")]
    pub linear_lr: f64,
}

fn default_linear_steps() -> usize {
    5000
}
fn default_linear_lr() -> f64 {
    0.1
}

impl Default for DivergenceSection {
    fn default() -> Self {
        Self {
            linear_steps: default_linear_steps(),
            linear_lr: default_linear_lr(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdfSection {
    /// Defaults to one grid cell (bbox side / resolution).
    pub stop_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgdSection {
    #[serde(default = "default_pgd_steps")]
    pub steps: usize,
    #[serde(default = "default_pgd_restarts")]
    pub restarts: usize,
    /// Step size as a multiple of `eps / steps`.
    #[serde(default = "default_pgd_step_factor")]
    pub step_factor: f64,
}

fn default_pgd_steps() -> usize {
    200
}
fn default_pgd_restarts() -> usize {
    3
}
fn default_pgd_step_factor() -> f64 {
    2.5
}

impl Default for PgdSection {
    fn default() -> Self {
        Self {
            steps: default_pgd_steps(),
            restarts: default_pgd_restarts(),
            step_factor: default_pgd_step_factor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub loss: Option<LossConfig>,
    /// Loss grid for `pareto`.
    #[serde(default)]
    pub grid: Vec<LossConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub consistency: Option<ConsistencySection>,
    #[serde(default)]
    pub divergence: Option<DivergenceSection>,
    #[serde(default)]
    pub sdf: Option<SdfSection>,
    #[serde(default)]
    pub pgd: Option<PgdSection>,
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub widths: Option<Vec<usize>>,
    pub eps_list: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::invalid(if path == "." { "config".to_string() } else { path }, e.into_inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::invalid("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seeds = vec![s];
        }
        if let Some(e) = o.epochs {
            self.optimizer.epochs = e;
        }
        if let Some(lr) = o.lr {
            self.optimizer.lr = lr;
        }
        if let Some(b) = o.batch_size {
            self.optimizer.batch_size = b;
        }
        if let Some(w) = &o.widths {
            self.net.widths = w.clone();
        }
        if let Some(e) = &o.eps_list {
            self.eps_list = e.clone();
        }
    }

    /// Checks every value, independent of which command will run.
    pub fn validate(&self) -> Result<(), CliError> {
        self.task.validate()?;
        if let Some(i) = self.net.widths.iter().position(|&w| w == 0 || w % 2 == 1) {
            return Err(CliError::invalid(format!("net.widths[{i}]"), "GroupSort2 needs positive even widths"));
        }
        if let Some(l) = &self.loss {
            l.validate("loss")?;
        }
        for (i, l) in self.grid.iter().enumerate() {
            l.validate(&format!("grid[{i}]"))?;
        }
        self.optimizer.validate()?;
        if self.seeds.is_empty() {
            return Err(CliError::invalid("seeds", "at least one seed is required"));
        }
        if let Some(i) = self.eps_list.iter().position(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(CliError::invalid(format!("eps_list[{i}]"), "must be finite and non-negative"));
        }
        if let Some(c) = &self.consistency {
            if c.fractions.is_empty() {
                return Err(CliError::invalid("consistency.fractions", "must not be empty"));
            }
            if let Some(i) = c.fractions.iter().position(|f| !(*f > 0.0 && *f <= 1.0)) {
                return Err(CliError::invalid(format!("consistency.fractions[{i}]"), "must lie in (0, 1]"));
            }
            if c.taus.is_empty() {
                return Err(CliError::invalid("consistency.taus", "must not be empty"));
            }
            if let Some(i) = c.taus.iter().position(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(CliError::invalid(format!("consistency.taus[{i}]"), "must be positive"));
            }
        }
        if let Some(d) = &self.divergence {
            if !(d.linear_lr > 0.0 && d.linear_lr.is_finite()) {
                return Err(CliError::invalid("divergence.linear_lr", "must be positive"));
            }
        }
        if let Some(SdfSection { stop_mae: Some(m) }) = &self.sdf {
            if !(*m > 0.0 && m.is_finite()) {
                return Err(CliError::invalid("sdf.stop_mae", "must be positive"));
            }
        }
        if let Some(p) = &self.pgd {
            if p.steps == 0 || p.restarts == 0 {
                return Err(CliError::invalid("pgd", "steps and restarts must be at least 1"));
            }
            if !(p.step_factor > 0.0 && p.step_factor.is_finite()) {
                return Err(CliError::invalid("pgd.step_factor", "must be positive"));
            }
        }
        Ok(())
    }

    /// The single training loss, required by `train`.
    pub fn require_loss(&self) -> Result<LossSpec, CliError> {
        self.loss.map(|l| l.spec()).ok_or_else(|| CliError::invalid("loss", "required by this command"))
    }
}
