//! Experiment drivers: each builds its data, trains one or more networks and
//! returns plain result structs. Independent runs go through an [`Executor`]
//! so the std crate can run them in parallel; results always come back in
//! input order.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{linear_pair_task, separable_blobs, GaussianMixtureTask, LabeledDataset, Labels};
use crate::error::{Error, Result};
use crate::geometry::{snowflake_ring, sdf_grid_dataset, Point, SNOWFLAKE_BBOX};
use crate::linalg::Matrix;
use crate::losses::LossSpec;
use crate::model::Model;
use crate::net::{Activation, Constraint, DenseLayer, Layer, LipNet, Mode, NetSpec};
use crate::optim::{Optimizer, OptimizerCfg, OptimizerKind};
use crate::robustness::{average_certificate, robust_accuracy, RobustnessMode};
use crate::seeded_rng;
use crate::train::{evaluate, train, train_objective, Objective, TrainHistory};
use crate::transport::{kr_dual_estimate, DiscreteDist};

/// Maps a function over independent work items, preserving order.
pub trait Executor {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send;
}

/// Runs items one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}

/// Median of a non-empty slice (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn output_dim(data: &LabeledDataset) -> usize {
    match &data.labels {
        Labels::Binary(_) => 1,
        Labels::Classes { num_classes, .. } => *num_classes,
    }
}

/// Fresh constrained network for `data`, initialized from `seed`.
pub fn constrained_net_for(data: &LabeledDataset, hidden: &[usize], seed: u64) -> Result<LipNet> {
    LipNet::init(&NetSpec::constrained(data.dim(), hidden, output_dim(data)), &mut seeded_rng(seed))
}

// ---------------------------------------------------------------- divergence

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceConfig {
    /// Full-batch steps for the affine model on the two-point task.
    pub linear_steps: usize,
    pub linear_optimizer: OptimizerKind,
    /// Epochs for the network runs on separable blobs.
    pub net_epochs: usize,
    pub hidden: Vec<usize>,
    pub net_optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        Self {
            linear_steps: 5000,
            linear_optimizer: OptimizerKind::adam(0.1),
            net_epochs: 200,
            hidden: vec![32, 32],
            net_optimizer: OptimizerKind::adam(1e-2),
            seed: 0,
        }
    }
}

/// Parameters of the affine model `f(x) = Wx + b` after every step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearTrace {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub linear: LinearTrace,
    pub unconstrained: TrainHistory,
    pub constrained: TrainHistory,
}

/// BCE on separable data: the affine model and an unconstrained network keep
/// growing their weights, the constrained control stays 1-Lipschitz.
pub fn divergence_experiment(cfg: &DivergenceConfig) -> Result<DivergenceReport> {
    let pair = linear_pair_task();
    let bce = LossSpec::BceTau { tau: 1.0 };
    let affine = DenseLayer::new(Matrix::new(1, 1, vec![0.1])?, vec![0.0], Constraint::Unconstrained)?;
    let mut linear = LipNet::new(vec![Layer::Dense(affine)], Mode::Unconstrained)?;
    let mut trace = LinearTrace::default();
    let opt = OptimizerCfg {
        kind: cfg.linear_optimizer,
        epochs: cfg.linear_steps,
        batch_size: pair.len(),
        seed: cfg.seed,
    };
    train_objective(&mut linear, &pair, &Objective::Loss(bce), &opt, &pair, |rec, net| {
        let d = net.dense_layers().next().expect("one layer");
        trace.weight.push(d.weights.get(0, 0));
        trace.bias.push(d.bias[0]);
        trace.loss.push(rec.train_loss);
        true
    })?;

    let data = separable_blobs(200, cfg.seed);
    let opt = OptimizerCfg {
        kind: cfg.net_optimizer,
        epochs: cfg.net_epochs,
        batch_size: data.len(),
        seed: cfg.seed,
    };
    let spec = NetSpec::unconstrained(2, &cfg.hidden, 1, Activation::Relu);
    let mut free = LipNet::init(&spec, &mut seeded_rng(cfg.seed))?;
    let unconstrained = train(&mut free, &data, &bce, &opt, &data)?;
    let mut control = constrained_net_for(&data, &cfg.hidden, cfg.seed)?;
    let constrained = train(&mut control, &data, &bce, &opt, &data)?;
    Ok(DivergenceReport {
        linear: trace,
        unconstrained,
        constrained,
    })
}

// --------------------------------------------------------------- consistency

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyConfig {
    pub fractions: Vec<f64>,
    pub taus: Vec<f64>,
    pub seeds: Vec<u64>,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerCfg,
    /// Also train an unconstrained ReLU network with BCE (τ = 1) per fraction.
    pub baseline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyRow {
    pub fraction: f64,
    pub train_size: usize,
    pub tau: f64,
    pub seed: u64,
    pub constrained: bool,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

impl ConsistencyRow {
    pub fn loss_gap(&self) -> f64 {
        self.test_loss - self.train_loss
    }

    pub fn accuracy_gap(&self) -> f64 {
        self.train_accuracy - self.test_accuracy
    }
}

/// Train/test gaps on growing prefixes of a seeded shuffle of `base`.
/// Rows come in (fraction, [baseline,] τ, seed) order.
pub fn consistency_experiment<E: Executor>(
    base: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &ConsistencyConfig,
    exec: &E,
) -> Result<Vec<ConsistencyRow>> {
    if cfg.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::InvalidArgument("fractions must lie in (0, 1]".into()));
    }
    let mut jobs = Vec::new();
    for &fraction in &cfg.fractions {
        for &seed in &cfg.seeds {
            if cfg.baseline {
                jobs.push((fraction, 1.0, seed, false));
            }
        }
        for &tau in &cfg.taus {
            for &seed in &cfg.seeds {
                jobs.push((fraction, tau, seed, true));
            }
        }
    }
    exec.map(jobs, |(fraction, tau, seed, constrained)| {
        let subset = base.fraction(fraction, seed)?;
        let mut net = if constrained {
            constrained_net_for(&subset, &cfg.hidden, seed)?
        } else {
            let spec = NetSpec::unconstrained(subset.dim(), &cfg.hidden, 1, Activation::Relu);
            LipNet::init(&spec, &mut seeded_rng(seed))?
        };
        let loss = LossSpec::BceTau { tau };
        let opt = OptimizerCfg { seed, ..cfg.optimizer };
        train(&mut net, &subset, &loss, &opt, test)?;
        let tr = evaluate(&net, &subset, &Objective::Loss(loss))?;
        let te = evaluate(&net, test, &Objective::Loss(loss))?;
        Ok(ConsistencyRow {
            fraction,
            train_size: subset.len(),
            tau,
            seed,
            constrained,
            train_loss: tr.loss,
            test_loss: te.loss,
            train_accuracy: tr.accuracy,
            test_accuracy: te.accuracy,
        })
    })
    .into_iter()
    .collect()
}

// -------------------------------------------------------------------- pareto

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerCfg,
    pub seeds: Vec<u64>,
    pub eps_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoRow {
    pub loss: LossSpec,
    pub seed: u64,
    pub clean_accuracy: f64,
    /// Certified robust accuracy at each configured ε.
    pub robust_accuracy: Vec<f64>,
    /// MCR for scalar outputs, MMCR for logit vectors.
    pub mcr: f64,
    pub average_certificate: f64,
}

/// Median of each column over the seeds of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSummary {
    pub loss: LossSpec,
    pub clean_accuracy: f64,
    pub robust_accuracy: Vec<f64>,
    pub mcr: f64,
    pub average_certificate: f64,
}

/// One constrained run per (loss, seed), in grid order. Multiclass losses
/// train a two-logit network on the two-class view of binary data.
pub fn pareto_sweep<E: Executor>(
    train_data: &LabeledDataset,
    test_data: &LabeledDataset,
    grid: &[LossSpec],
    cfg: &SweepConfig,
    exec: &E,
) -> Result<Vec<ParetoRow>> {
    if grid.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("pareto sweep needs a loss grid and seeds".into()));
    }
    for l in grid {
        l.validate()?;
    }
    let jobs: Vec<(LossSpec, u64)> = grid.iter().flat_map(|&l| cfg.seeds.iter().map(move |&s| (l, s))).collect();
    exec.map(jobs, |(loss, seed)| {
        let (tr, te) = if loss.is_multiclass() {
            (train_data.to_two_class()?, test_data.to_two_class()?)
        } else {
            (train_data.clone(), test_data.clone())
        };
        let mut net = constrained_net_for(&tr, &cfg.hidden, seed)?;
        let opt = OptimizerCfg { seed, ..cfg.optimizer };
        train(&mut net, &tr, &loss, &opt, &te)?;
        let ev = evaluate(&net, &te, &Objective::Loss(loss))?;
        let robust = cfg
            .eps_list
            .iter()
            .map(|&eps| robust_accuracy(&net, &te, eps, RobustnessMode::Certified))
            .collect::<Result<Vec<_>>>()?;
        Ok(ParetoRow {
            loss,
            seed,
            clean_accuracy: ev.accuracy,
            robust_accuracy: robust,
            mcr: ev.mcr,
            average_certificate: average_certificate(&net, &te),
        })
    })
    .into_iter()
    .collect()
}

/// Collapses the per-seed rows of [`pareto_sweep`] to one row per grid point.
pub fn summarize_pareto(rows: &[ParetoRow]) -> Vec<ParetoSummary> {
    let mut out: Vec<ParetoSummary> = Vec::new();
    let mut seen: Vec<LossSpec> = Vec::new();
    for r in rows {
        if seen.contains(&r.loss) {
            continue;
        }
        seen.push(r.loss);
        let group: Vec<&ParetoRow> = rows.iter().filter(|o| o.loss == r.loss).collect();
        let col = |f: &dyn Fn(&ParetoRow) -> f64| median(&group.iter().map(|g| f(g)).collect::<Vec<_>>());
        out.push(ParetoSummary {
            loss: r.loss,
            clean_accuracy: col(&|g| g.clean_accuracy),
            robust_accuracy: (0..r.robust_accuracy.len()).map(|i| col(&|g| g.robust_accuracy[i])).collect(),
            mcr: col(&|g| g.mcr),
            average_certificate: col(&|g| g.average_certificate),
        });
    }
    out
}

// ------------------------------------------------------------------- tau fit

#[derive(Debug, Clone, PartialEq)]
pub struct TauFitConfig {
    pub tau: f64,
    pub samples: usize,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerCfg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauFitResult {
    pub tau: f64,
    pub seed: u64,
    pub train_accuracy: f64,
    /// Network output at each minority-mode center and that mode's own label.
    pub minority: Vec<(Point, f64, f64)>,
}

impl TauFitResult {
    /// Every minority center is classified as its own class.
    pub fn fits_minority(&self) -> bool {
        self.minority.iter().all(|&(_, f, y)| f * y > 0.0)
    }

    /// Every minority center is classified as the surrounding majority class.
    pub fn smooths_minority(&self) -> bool {
        self.minority.iter().all(|&(_, f, y)| f * y < 0.0)
    }
}

/// BCE at temperature τ on the two-mode Gaussian mixture task.
pub fn tau_fit_experiment(cfg: &TauFitConfig, seed: u64) -> Result<TauFitResult> {
    let task = GaussianMixtureTask::default();
    let data = task.sample(cfg.samples, seed);
    let mut net = constrained_net_for(&data, &cfg.hidden, seed)?;
    let loss = LossSpec::BceTau { tau: cfg.tau };
    let opt = OptimizerCfg { seed, ..cfg.optimizer };
    let history = train(&mut net, &data, &loss, &opt, &data)?;
    let minority = task
        .minority_centers()
        .iter()
        .map(|&(c, y)| (c, net.evaluate(&c)[0], y))
        .collect();
    Ok(TauFitResult {
        tau: cfg.tau,
        seed,
        train_accuracy: history.last().map_or(f64::NAN, |r| r.train_accuracy),
        minority,
    })
}

// ------------------------------------------------------------- KR potential

#[derive(Debug, Clone, PartialEq)]
pub struct KrConfig {
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub max_steps: usize,
    /// Stop as soon as the dual value reaches this.
    pub target: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrResult {
    /// The potential with the largest dual value seen.
    pub net: LipNet,
    pub dual: f64,
    pub steps: usize,
    /// Dual value after every step.
    pub trace: Vec<f64>,
}

/// Maximizes `E_P f − E_Q f` over constrained potentials by full-batch ascent.
pub fn train_kr_potential(p: &DiscreteDist, q: &DiscreteDist, cfg: &KrConfig) -> Result<KrResult> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidArgument("P and Q live in different spaces".into()));
    }
    let dim = p.dim();
    let spec = NetSpec::constrained(dim, &cfg.hidden, 1);
    let mut net = LipNet::init(&spec, &mut seeded_rng(cfg.seed))?;
    let (np, nq) = (p.len(), q.len());
    let mut rows = Vec::with_capacity((np + nq) * dim);
    rows.extend_from_slice(p.atoms().data());
    rows.extend_from_slice(q.atoms().data());
    let x = Matrix::new(np + nq, dim, rows)?;
    // d(−E_P f + E_Q f)/df at every atom.
    let mut up = Vec::with_capacity(np + nq);
    up.extend(p.weights().iter().map(|w| -w));
    up.extend(q.weights().iter().copied());
    let upstream = Matrix::new(np + nq, 1, up)?;
    let mut optimizer = Optimizer::new(cfg.optimizer, &net);
    let mut best = (kr_dual_estimate(&net, p, q)?, net.clone());
    let mut trace = Vec::new();
    let mut steps = 0;
    while steps < cfg.max_steps {
        if cfg.target.is_some_and(|t| best.0 >= t) {
            break;
        }
        let grads = net.backward(&x, &upstream)?;
        optimizer.step(&mut net, &grads);
        net.project();
        steps += 1;
        let f = net.forward(&x)?;
        let dual: f64 = (0..np).map(|i| p.weights()[i] * f.get(i, 0)).sum::<f64>()
            - (0..nq).map(|j| q.weights()[j] * f.get(np + j, 0)).sum::<f64>();
        trace.push(dual);
        if dual > best.0 {
            best = (dual, net.clone());
        }
    }
    Ok(KrResult {
        dual: best.0,
        net: best.1,
        steps,
        trace,
    })
}

// ------------------------------------------------------------- random labels

#[derive(Debug, Clone, PartialEq)]
pub struct RandomLabelConfig {
    pub n: usize,
    pub min_sep: f64,
    pub margin: f64,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerCfg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomLabelResult {
    pub train_accuracy: f64,
    /// Fraction of points correctly classified with certificate ≥ margin.
    pub certified_fraction: f64,
    pub history: TrainHistory,
}

/// Hinge training on well-separated points with uniformly random labels.
/// Stops once the hinge loss vanishes, i.e. every point has margin ≥ `margin`.
pub fn random_label_experiment(cfg: &RandomLabelConfig, seed: u64) -> Result<RandomLabelResult> {
    let data = crate::data::random_label_task(cfg.n, cfg.min_sep, seed)?;
    let mut net = constrained_net_for(&data, &cfg.hidden, seed)?;
    let opt = OptimizerCfg { seed, ..cfg.optimizer };
    let loss = LossSpec::HingeM { m: cfg.margin };
    let history = train_objective(&mut net, &data, &Objective::Loss(loss), &opt, &data, |rec, _| {
        rec.train_loss > 0.0
    })?;
    let certified_fraction = robust_accuracy(&net, &data, cfg.margin, RobustnessMode::Certified)?;
    Ok(RandomLabelResult {
        train_accuracy: history.last().map_or(0.0, |r| r.train_accuracy),
        certified_fraction,
        history,
    })
}

// ------------------------------------------------------------------ SDF fit

#[derive(Debug, Clone, PartialEq)]
pub struct SdfFitConfig {
    pub iterations: usize,
    pub resolution: usize,
    pub bbox: (Point, Point),
    pub hidden: Vec<usize>,
    /// Stop once the grid MAE falls below this.
    pub stop_mae: f64,
    pub optimizer: OptimizerCfg,
}

impl Default for SdfFitConfig {
    fn default() -> Self {
        Self {
            iterations: 4,
            resolution: 100,
            bbox: SNOWFLAKE_BBOX,
            hidden: vec![64, 64, 64],
            stop_mae: 0.024,
            optimizer: OptimizerCfg {
                kind: OptimizerKind::adam(1e-3),
                epochs: 200,
                batch_size: 64,
                seed: 0,
            },
        }
    }
}

impl SdfFitConfig {
    /// One grid cell: the bbox side divided by the resolution.
    pub fn pixel(&self) -> f64 {
        (self.bbox.1[0] - self.bbox.0[0]) / self.resolution as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdfFitResult {
    pub net: LipNet,
    pub final_mae: f64,
    pub best_mae: f64,
    pub epochs: usize,
    /// False when the epoch budget ran out before `stop_mae` was reached.
    pub reached: bool,
    pub history: TrainHistory,
    pub mae_trace: Vec<f64>,
}

/// Mean absolute error of a scalar network against the dataset targets.
pub fn grid_mae(net: &LipNet, data: &LabeledDataset) -> Result<f64> {
    let targets = data
        .targets
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("dataset has no regression targets".into()))?;
    let out = net.forward(&data.points)?;
    Ok(out.data().iter().zip(targets).map(|(a, b)| libm::fabs(a - b)).sum::<f64>() / targets.len() as f64)
}

/// MSE regression of a constrained network onto the snowflake-ring SDF grid.
pub fn sdf_fit_experiment(cfg: &SdfFitConfig, seed: u64) -> Result<SdfFitResult> {
    if !(cfg.stop_mae > 0.0) {
        return Err(Error::InvalidArgument("stop_mae must be positive".into()));
    }
    let (boundary, labeler) = snowflake_ring(cfg.iterations)?;
    let data = sdf_grid_dataset(&boundary, &labeler, cfg.resolution, cfg.bbox)?;
    let mut net = constrained_net_for(&data, &cfg.hidden, seed)?;
    let opt = OptimizerCfg { seed, ..cfg.optimizer };
    let mut mae_trace = Vec::new();
    let mut reached = false;
    let history = train_objective(&mut net, &data, &Objective::Mse, &opt, &data, |_, net| {
        let mae = grid_mae(net, &data).unwrap_or(f64::INFINITY);
        mae_trace.push(mae);
        reached = mae < cfg.stop_mae;
        !reached
    })?;
    let final_mae = grid_mae(&net, &data)?;
    let best_mae = mae_trace.iter().copied().fold(final_mae, f64::min);
    Ok(SdfFitResult {
        net,
        final_mae,
        best_mae,
        epochs: history.len(),
        reached,
        history,
        mae_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn sequential_keeps_order() {
        assert_eq!(Sequential.map(vec![1, 2, 3], |x| x * 10), vec![10, 20, 30]);
    }

    #[test]
    fn infinite_stop_mae_returns_after_one_epoch() {
        let cfg = SdfFitConfig {
            iterations: 1,
            resolution: 10,
            hidden: vec![8],
            stop_mae: f64::INFINITY,
            ..SdfFitConfig::default()
        };
        let r = sdf_fit_experiment(&cfg, 0).unwrap();
        assert_eq!(r.epochs, 1);
        assert!(r.reached);
    }

    #[test]
    fn pareto_single_point_grid() {
        let d = separable_blobs(20, 0);
        let cfg = SweepConfig {
            hidden: vec![4],
            optimizer: OptimizerCfg {
                epochs: 2,
                batch_size: 10,
                ..OptimizerCfg::default()
            },
            seeds: vec![0],
            eps_list: vec![0.1],
        };
        let rows = pareto_sweep(&d, &d, &[LossSpec::Wass], &cfg, &Sequential).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(summarize_pareto(&rows).len(), 1);
    }
}
