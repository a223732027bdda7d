//! Loss functions on logits together with their exact derivatives.
//!
//! Binary losses take a scalar logit and a label in `{-1, +1}`; multiclass
//! losses take the full logit vector and the index of the true class.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::data::Labels;
use crate::error::{shape_err, Error, Result};
use crate::linalg::Matrix;

/// Loss family and hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    BceTau { tau: f64 },
    CceTau { tau: f64 },
    HingeM { m: f64 },
    Wass,
    Hkr { alpha: f64, m: f64 },
    MulticlassHkr { alpha: f64, m: f64 },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LossSpec::BceTau { tau } | LossSpec::CceTau { tau } => tau > 0.0 && tau.is_finite(),
            LossSpec::HingeM { m } => m > 0.0 && m.is_finite(),
            LossSpec::Wass => true,
            LossSpec::Hkr { alpha, m } | LossSpec::MulticlassHkr { alpha, m } => {
                alpha >= 0.0 && alpha.is_finite() && m > 0.0 && m.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid loss hyper-parameters: {self:?}")))
        }
    }

    /// True for losses that read class indices and a K-dimensional output.
    pub fn is_multiclass(&self) -> bool {
        matches!(self, LossSpec::CceTau { .. } | LossSpec::MulticlassHkr { .. })
    }

    /// Mean loss over the batch and its gradient with respect to the logits
    /// (already divided by the batch size).
    pub fn batch(&self, logits: &Matrix, labels: &Labels) -> Result<(f64, Matrix)> {
        self.validate()?;
        let n = logits.rows();
        if labels.len() != n {
            return Err(shape_err(format!("{n} labels"), format!("{}", labels.len())));
        }
        let mut grad = Matrix::zeros(n, logits.cols());
        let mut total = 0.0;
        match labels {
            Labels::Binary(ys) => {
                if self.is_multiclass() {
                    return Err(Error::InvalidArgument("multiclass loss given binary labels".into()));
                }
                if logits.cols() != 1 {
                    return Err(shape_err("one logit per example", format!("{}", logits.cols())));
                }
                for (i, &y) in ys.iter().enumerate() {
                    let (v, d) = self.binary(logits.get(i, 0), y);
                    total += v;
                    grad.set(i, 0, d / n as f64);
                }
            }
            Labels::Classes { classes, .. } => {
                if !self.is_multiclass() {
                    return Err(Error::InvalidArgument("binary loss given class labels".into()));
                }
                for (i, &k) in classes.iter().enumerate() {
                    let (v, d) = self.multiclass(logits.row(i), k)?;
                    total += v;
                    for (g, dv) in grad.row_mut(i).iter_mut().zip(d) {
                        *g = dv / n as f64;
                    }
                }
            }
        }
        Ok((total / n as f64, grad))
    }

    fn binary(&self, logit: f64, y: f64) -> (f64, f64) {
        match *self {
            LossSpec::BceTau { tau } => bce_tau(logit, y, tau),
            LossSpec::HingeM { m } => hinge_m(logit, y, m),
            LossSpec::Wass => wass_loss(logit, y),
            LossSpec::Hkr { alpha, m } => hkr(logit, y, alpha, m),
            LossSpec::CceTau { .. } | LossSpec::MulticlassHkr { .. } => unreachable!("checked by caller"),
        }
    }

    fn multiclass(&self, logits: &[f64], k: usize) -> Result<(f64, Vec<f64>)> {
        match *self {
            LossSpec::CceTau { tau } => cce_tau(logits, k, tau),
            LossSpec::MulticlassHkr { alpha, m } => multiclass_hkr(logits, k, alpha, m),
            _ => unreachable!("checked by caller"),
        }
    }
}

/// `log(1 + e^{-z})` without overflow.
#[inline]
pub fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        libm::log1p(libm::exp(-z))
    } else {
        -z + libm::log1p(libm::exp(z))
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `−log σ(y·τ·logit)` and its derivative in the logit.
pub fn bce_tau(logit: f64, y: f64, tau: f64) -> (f64, f64) {
    let z = y * (tau * logit);
    (softplus_neg(z), -y * tau * sigmoid(-z))
}

/// `max(0, m − y·logit)`; the subgradient at the kink is 0.
pub fn hinge_m(logit: f64, y: f64, m: f64) -> (f64, f64) {
    let slack = m - y * logit;
    if slack > 0.0 {
        (slack, -y)
    } else {
        (0.0, 0.0)
    }
}

pub fn wass_loss(logit: f64, y: f64) -> (f64, f64) {
    (-y * logit, -y)
}

/// `−y·logit + α·max(0, m − y·logit)`.
pub fn hkr(logit: f64, y: f64, alpha: f64, m: f64) -> (f64, f64) {
    let (w, dw) = wass_loss(logit, y);
    if alpha == 0.0 {
        return (w, dw);
    }
    let (h, dh) = hinge_m(logit, y, m);
    (w + alpha * h, dw + alpha * dh)
}

fn check_class(logits: &[f64], k: usize) -> Result<()> {
    if k >= logits.len() {
        return Err(Error::BadClassIndex {
            index: k,
            classes: logits.len(),
        });
    }
    if logits.len() < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    Ok(())
}

/// Largest competitor of class `k`; lowest index wins ties.
pub fn top_competitor(logits: &[f64], k: usize) -> usize {
    let mut best = if k == 0 { 1 } else { 0 };
    for (i, &v) in logits.iter().enumerate() {
        if i != k && v > logits[best] {
            best = i;
        }
    }
    best
}

/// `R = f_k − max_{i≠k} f_i`, loss `−R + α·max(0, m − R)`.
pub fn multiclass_hkr(logits: &[f64], k: usize, alpha: f64, m: f64) -> Result<(f64, Vec<f64>)> {
    check_class(logits, k)?;
    let j = top_competitor(logits, k);
    let r = logits[k] - logits[j];
    let hinge = m - r;
    let (value, d_r) = if hinge > 0.0 {
        (-r + alpha * hinge, -1.0 - alpha)
    } else {
        (-r, -1.0)
    };
    let mut grad = vec![0.0; logits.len()];
    grad[k] = d_r;
    grad[j] = -d_r;
    Ok((value, grad))
}

/// `−log softmax(τ·logits)_k` with max subtraction.
pub fn cce_tau(logits: &[f64], k: usize, tau: f64) -> Result<(f64, Vec<f64>)> {
    check_class(logits, k)?;
    let scaled: Vec<f64> = logits.iter().map(|&l| tau * l).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|&s| libm::exp(s - max)).collect();
    let sum: f64 = exps.iter().sum();
    let value = libm::log(sum) + max - scaled[k];
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, &e)| tau * (e / sum - if i == k { 1.0 } else { 0.0 }))
        .collect();
    Ok((value, grad))
}

/// Mean squared error and its gradient (divided by the batch size).
pub fn mse(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len().max(1) as f64;
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            total += d * d;
            2.0 * d / n
        })
        .collect();
    (total / n, grad)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `(4/τ)(E[BCE_τ] − log 2) + (E_P f − E_Q f)`, which vanishes as `τ → 0`.
///
/// The expectation weights both classes equally.
pub fn small_tau_limit_check(f_p: &[f64], f_q: &[f64], tau: f64) -> f64 {
    let bce_p = mean(&f_p.iter().map(|&f| bce_tau(f, 1.0, tau).0).collect::<Vec<_>>());
    let bce_q = mean(&f_q.iter().map(|&f| bce_tau(f, -1.0, tau).0).collect::<Vec<_>>());
    let expected = 0.5 * (bce_p + bce_q);
    (4.0 / tau) * (expected - LN_2) + (mean(f_p) - mean(f_q))
}
