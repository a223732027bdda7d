//! The projected mini-batch training loop.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{sign, LabeledDataset, Labels};
use crate::error::{shape_err, Error, Result};
use crate::linalg::Matrix;
use crate::losses::{mse, LossSpec};
use crate::net::{LipNet, Mode};
use crate::optim::{Optimizer, OptimizerCfg};
use crate::robustness::argmax;

/// What the network is fitted to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// A classification loss on the dataset labels.
    Loss(LossSpec),
    /// Mean squared error on the dataset regression targets.
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub eval_loss: f64,
    pub eval_accuracy: f64,
    /// Mean certifiable robustness on the eval set (MMCR for class labels).
    pub mcr: f64,
    pub max_spectral_norm: f64,
    pub lipschitz_upper_bound: f64,
}

/// One record per completed epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Loss, accuracy and mean margin of `net` on a whole dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub mcr: f64,
}

fn margins(logits: &Matrix, labels: &Labels) -> (f64, f64) {
    let n = logits.rows() as f64;
    let (mut correct, mut margin) = (0usize, 0.0);
    match labels {
        Labels::Binary(ys) => {
            for (i, &y) in ys.iter().enumerate() {
                let f = logits.get(i, 0);
                if sign(f) == y {
                    correct += 1;
                }
                margin += y * f;
            }
        }
        Labels::Classes { classes, .. } => {
            for (i, &k) in classes.iter().enumerate() {
                let row = logits.row(i);
                if argmax(row) == k {
                    correct += 1;
                }
                margin += row[k] - row[crate::losses::top_competitor(row, k)];
            }
        }
    }
    (correct as f64 / n, margin / n)
}

fn objective_batch(objective: &Objective, logits: &Matrix, data: &LabeledDataset) -> Result<(f64, Matrix)> {
    match objective {
        Objective::Loss(spec) => spec.batch(logits, &data.labels),
        Objective::Mse => {
            let targets = data
                .targets
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("regression needs targets".into()))?;
            if logits.cols() != 1 {
                return Err(shape_err("scalar output", format!("{} outputs", logits.cols())));
            }
            let (v, g) = mse(logits.data(), targets);
            Ok((v, Matrix::new(g.len(), 1, g)?))
        }
    }
}

pub fn evaluate(net: &LipNet, data: &LabeledDataset, objective: &Objective) -> Result<Evaluation> {
    let logits = net.forward(&data.points)?;
    let (loss, _) = objective_batch(objective, &logits, data)?;
    let (accuracy, mcr) = margins(&logits, &data.labels);
    Ok(Evaluation { loss, accuracy, mcr })
}

fn check_shapes(net: &LipNet, data: &LabeledDataset, objective: &Objective) -> Result<()> {
    if data.dim() != net.input_dim() {
        return Err(shape_err(format!("inputs of width {}", net.input_dim()), format!("{}", data.dim())));
    }
    let want = match (&data.labels, objective) {
        (_, Objective::Mse) | (Labels::Binary(_), _) => 1,
        (Labels::Classes { num_classes, .. }, _) => *num_classes,
    };
    if net.output_dim() != want {
        return Err(shape_err(format!("{want} outputs"), format!("{}", net.output_dim())));
    }
    Ok(())
}

/// Trains with a classification loss and evaluates on `eval` after every epoch.
pub fn train(
    net: &mut LipNet,
    data: &LabeledDataset,
    loss: &LossSpec,
    opt: &OptimizerCfg,
    eval: &LabeledDataset,
) -> Result<TrainHistory> {
    train_objective(net, data, &Objective::Loss(*loss), opt, eval, |_, _| true)
}

/// Mini-batch training with a seeded shuffle per epoch. Constrained networks
/// are projected back onto their constraint set after every update.
/// `on_epoch` sees each record and the current network; returning `false`
/// stops training after that epoch.
pub fn train_objective(
    net: &mut LipNet,
    data: &LabeledDataset,
    objective: &Objective,
    opt: &OptimizerCfg,
    eval: &LabeledDataset,
    mut on_epoch: impl FnMut(&EpochRecord, &LipNet) -> bool,
) -> Result<TrainHistory> {
    opt.validate()?;
    if let Objective::Loss(spec) = objective {
        spec.validate()?;
    }
    check_shapes(net, data, objective)?;
    check_shapes(net, eval, objective)?;
    let mut history = TrainHistory::default();
    let mut optimizer = Optimizer::new(opt.kind, net);
    for epoch in 0..opt.epochs {
        let order = data.shuffled_indices(opt.seed.wrapping_add(epoch as u64).wrapping_mul(0x2545_F491_4F6C_DD1D));
        for chunk in order.chunks(opt.batch_size) {
            let batch = data.select(chunk);
            let logits = net.forward(&batch.points)?;
            let (value, upstream) = objective_batch(objective, &logits, &batch)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            let grads = net.backward(&batch.points, &upstream)?;
            optimizer.step(net, &grads);
            if net.mode() == Mode::Constrained {
                net.project();
            }
        }
        let tr = evaluate(net, data, objective)?;
        let ev = evaluate(net, eval, objective)?;
        if !tr.loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let record = EpochRecord {
            epoch,
            train_loss: tr.loss,
            train_accuracy: tr.accuracy,
            eval_loss: ev.loss,
            eval_accuracy: ev.accuracy,
            mcr: ev.mcr,
            max_spectral_norm: net.max_spectral_norm(),
            lipschitz_upper_bound: net.lipschitz_upper_bound(),
        };
        history.records.push(record);
        if !on_epoch(&record, net) {
            break;
        }
    }
    Ok(history)
}
