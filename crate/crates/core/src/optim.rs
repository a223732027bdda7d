//! First-order optimizers over the dense parameters of a [`LipNet`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::net::{GradientBundle, LipNet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd { lr: f64, momentum: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps_hat: f64 },
}

impl OptimizerKind {
    /// Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε̂ = 1e-8`.
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        OptimizerKind::Sgd { lr, momentum: 0.0 }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerKind::Sgd { lr, .. } | OptimizerKind::Adam { lr, .. } => lr,
        }
    }
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerCfg {
    pub kind: OptimizerKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl OptimizerCfg {
    pub fn validate(&self) -> Result<()> {
        let lr = self.kind.lr();
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        match self.kind {
            OptimizerKind::Sgd { momentum, .. } if !(0.0..1.0).contains(&momentum) => {
                Err(Error::InvalidArgument(format!("momentum must lie in [0, 1), got {momentum}")))
            }
            OptimizerKind::Adam { beta1, beta2, eps_hat, .. }
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps_hat > 0.0) =>
            {
                Err(Error::InvalidArgument("Adam needs betas in [0, 1) and eps_hat > 0".into()))
            }
            _ => Ok(()),
        }
    }
}

impl Default for OptimizerCfg {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::default(),
            epochs: 100,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Optimizer state; one buffer pair per weight matrix and per bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, net: &LipNet) -> Self {
        let shapes: Vec<usize> = net
            .dense_layers()
            .flat_map(|d| [d.weights.data().len(), d.bias.len()])
            .collect();
        let zeros = || shapes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        Self {
            kind,
            first: zeros(),
            second: zeros(),
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One descent step along `grads` (gradients of the loss).
    pub fn step(&mut self, net: &mut LipNet, grads: &GradientBundle) {
        self.t += 1;
        let t = self.t as f64;
        let kind = self.kind;
        let mut slot = 0;
        for (d, g) in net.dense_layers_mut().zip(&grads.dense) {
            for (params, grad) in [
                (d.weights.data_mut(), g.d_weights.data()),
                (d.bias.as_mut_slice(), g.d_bias.as_slice()),
            ] {
                let m = &mut self.first[slot];
                let v = &mut self.second[slot];
                match kind {
                    OptimizerKind::Sgd { lr, momentum } => {
                        for ((p, gi), mi) in params.iter_mut().zip(grad).zip(m.iter_mut()) {
                            *mi = momentum * *mi + gi;
                            *p -= lr * *mi;
                        }
                    }
                    OptimizerKind::Adam {
                        lr,
                        beta1,
                        beta2,
                        eps_hat,
                    } => {
                        let c1 = 1.0 - libm::pow(beta1, t);
                        let c2 = 1.0 - libm::pow(beta2, t);
                        for (((p, gi), mi), vi) in params.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                            *mi = beta1 * *mi + (1.0 - beta1) * gi;
                            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                            *p -= lr * (*mi / c1) / (libm::sqrt(*vi / c2) + eps_hat);
                        }
                    }
                }
                slot += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::net::{Constraint, DenseGrad, DenseLayer, Layer, Mode};

    fn scalar_net(w: f64) -> LipNet {
        let d = DenseLayer::new(Matrix::new(1, 1, vec![w]).unwrap(), vec![0.0], Constraint::Unconstrained).unwrap();
        LipNet::new(vec![Layer::Dense(d)], Mode::Unconstrained).unwrap()
    }

    fn grad(gw: f64) -> GradientBundle {
        GradientBundle {
            dense: vec![DenseGrad {
                d_weights: Matrix::new(1, 1, vec![gw]).unwrap(),
                d_bias: vec![0.0],
            }],
            input_grad: Matrix::zeros(1, 1),
        }
    }

    fn weight(net: &LipNet) -> f64 {
        net.dense_layers().next().unwrap().weights.get(0, 0)
    }

    #[test]
    fn sgd_step() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::new(OptimizerKind::sgd(0.5), &net);
        opt.step(&mut net, &grad(2.0));
        assert_eq!(weight(&net), 0.0);
    }

    #[test]
    fn adam_first_step_is_lr() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::new(OptimizerKind::adam(0.1), &net);
        opt.step(&mut net, &grad(-3.0));
        assert!((weight(&net) - 1.1).abs() < 1e-8);
    }

    #[test]
    fn validation() {
        let mut cfg = OptimizerCfg::default();
        assert!(cfg.validate().is_ok());
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        cfg.batch_size = 1;
        cfg.kind = OptimizerKind::sgd(0.0);
        assert!(cfg.validate().is_err());
    }
}
