//! Robustness certificates, certified-robustness statistics and the L2-PGD
//! attack used to audit them.
//!
//! A 1-Lipschitz scalar model cannot change sign within `|f(x)|` of `x`; a
//! 1-Lipschitz vector model cannot change its arg-max within half the gap
//! between its two largest logits.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{sign, LabeledDataset, Labels};
use crate::error::{shape_err, Error, Result};
use crate::linalg::norm;
use crate::losses::{sigmoid, top_competitor};
use crate::model::Model;
use crate::seeded_rng;

/// Binary labels are `±1`, multiclass labels are class indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Sign(f64),
    Class(usize),
}

impl Label {
    pub fn from_dataset(labels: &Labels, i: usize) -> Label {
        match labels {
            Labels::Binary(ys) => Label::Sign(ys[i]),
            Labels::Classes { classes, .. } => Label::Class(classes[i]),
        }
    }
}

/// Arg-max with the lowest index winning ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Prediction from raw outputs: `sign` for one output, arg-max otherwise.
pub fn predict(outputs: &[f64]) -> Label {
    if outputs.len() == 1 {
        Label::Sign(sign(outputs[0]))
    } else {
        Label::Class(argmax(outputs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub point: Vec<f64>,
    pub predicted: Label,
    pub radius: f64,
}

/// `radius = |f(x)|`, `predicted = sign f(x)`.
pub fn binary_certificate<M: Model + ?Sized>(model: &M, x: &[f64]) -> Result<Certificate> {
    if !model.is_one_lipschitz() {
        return Err(Error::UnconstrainedNet);
    }
    if model.output_dim() != 1 {
        return Err(shape_err("scalar output", alloc::format!("{} outputs", model.output_dim())));
    }
    let f = model.evaluate(x)[0];
    Ok(Certificate {
        point: x.to_vec(),
        predicted: Label::Sign(sign(f)),
        radius: libm::fabs(f),
    })
}

/// `max(0, (f_k − second largest) / 2)` for the predicted class `k`.
pub fn multiclass_certificate(logits: &[f64], k: usize) -> Result<f64> {
    if k >= logits.len() || logits.len() < 2 {
        return Err(Error::BadClassIndex {
            index: k,
            classes: logits.len(),
        });
    }
    let j = top_competitor(logits, k);
    if logits[j] > logits[k] {
        return Err(Error::NotArgmax(k));
    }
    Ok(((logits[k] - logits[j]) / 2.0).max(0.0))
}

/// Certificate of either kind, depending on the output dimension.
pub fn certificate<M: Model + ?Sized>(model: &M, x: &[f64]) -> Result<Certificate> {
    if model.output_dim() == 1 {
        return binary_certificate(model, x);
    }
    if !model.is_one_lipschitz() {
        return Err(Error::UnconstrainedNet);
    }
    let logits = model.evaluate(x);
    let k = argmax(&logits);
    Ok(Certificate {
        point: x.to_vec(),
        predicted: Label::Class(k),
        radius: multiclass_certificate(&logits, k)?,
    })
}

fn binary_labels(data: &LabeledDataset) -> Result<&[f64]> {
    match &data.labels {
        Labels::Binary(ys) => Ok(ys),
        Labels::Classes { .. } => Err(Error::InvalidArgument("expected ±1 labels".into())),
    }
}

/// Mean certifiable robustness: the sample mean of `y·f(x)`.
pub fn mcr<M: Model + ?Sized>(model: &M, data: &LabeledDataset) -> Result<f64> {
    let ys = binary_labels(data)?;
    let total: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| y * model.evaluate(data.point(i))[0])
        .sum();
    Ok(total / data.len() as f64)
}

/// The two terms of the MCR: mean radius over correctly classified points
/// minus mean radius over misclassified ones (both averaged over the whole
/// sample). Their difference equals [`mcr`].
pub fn mcr_terms<M: Model + ?Sized>(model: &M, data: &LabeledDataset) -> Result<(f64, f64)> {
    let ys = binary_labels(data)?;
    let n = data.len() as f64;
    let (mut good, mut bad) = (0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let f = model.evaluate(data.point(i))[0];
        if y * f > 0.0 {
            good += libm::fabs(f);
        } else if y * f < 0.0 {
            bad += libm::fabs(f);
        }
    }
    Ok((good / n, bad / n))
}

/// Multiclass mean certifiable robustness: mean of `f_k − max_{i≠k} f_i`.
pub fn mmcr<M: Model + ?Sized>(model: &M, data: &LabeledDataset) -> Result<f64> {
    let Labels::Classes { classes, num_classes } = &data.labels else {
        return Err(Error::InvalidArgument("expected class labels".into()));
    };
    if model.output_dim() != *num_classes {
        return Err(shape_err(
            alloc::format!("{num_classes} outputs"),
            alloc::format!("{}", model.output_dim()),
        ));
    }
    let total: f64 = classes
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let l = model.evaluate(data.point(i));
            l[k] - l[top_competitor(&l, k)]
        })
        .sum();
    Ok(total / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub found: bool,
    /// Smallest successful perturbation, or the last iterate when none succeeded.
    pub perturbation: Vec<f64>,
    pub norm: f64,
    pub steps_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgdConfig {
    pub steps: usize,
    pub step_size: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl PgdConfig {
    /// 200 steps of size `2.5·eps/200`, three restarts (the first from `x`).
    pub fn for_eps(eps: f64) -> Self {
        Self {
            steps: 200,
            step_size: 2.5 * eps / 200.0,
            restarts: 3,
            seed: 0,
        }
    }
}

/// L2-PGD with a single start at `x`.
pub fn pgd_l2<M: Model + ?Sized>(model: &M, x: &[f64], y: Label, eps: f64, steps: usize, step_size: f64) -> AttackResult {
    let cfg = PgdConfig {
        steps,
        step_size,
        restarts: 1,
        seed: 0,
    };
    pgd_l2_with(model, x, y, eps, &cfg)
}

/// Gradient of the attacker's objective (the loss of label `y`).
fn ascent_direction<M: Model + ?Sized>(model: &M, z: &[f64], y: Label) -> Vec<f64> {
    match y {
        Label::Sign(s) => model.input_gradient(z, &[-s]),
        Label::Class(k) => {
            let logits = model.evaluate(z);
            let j = top_competitor(&logits, k);
            let mut up = vec![0.0; logits.len()];
            up[k] = -1.0;
            up[j] = 1.0;
            model.input_gradient(z, &up)
        }
    }
}

fn project_ball(delta: &mut [f64], eps: f64) {
    let n = norm(delta);
    if n > eps {
        delta.iter_mut().for_each(|d| *d *= eps / n);
    }
}

/// Normalized-gradient ascent on the loss of `y`, projected on the L2 ball of
/// radius `eps`. Restart `r > 0` starts from a uniform point of the ball drawn
/// from its own seed, so restarts can run in any order.
pub fn pgd_l2_with<M: Model + ?Sized>(model: &M, x: &[f64], y: Label, eps: f64, cfg: &PgdConfig) -> AttackResult {
    let reference = predict(&model.evaluate(x));
    let dim = x.len();
    let mut best: Option<Vec<f64>> = None;
    let mut last = vec![0.0; dim];
    let mut steps_used = 0;
    let flips = |delta: &[f64]| {
        let z: Vec<f64> = x.iter().zip(delta).map(|(a, d)| a + d).collect();
        predict(&model.evaluate(&z)) != reference
    };
    let record = |delta: &[f64], best: &mut Option<Vec<f64>>| {
        if best.as_ref().is_none_or(|b| norm(delta) < norm(b)) {
            *best = Some(delta.to_vec());
        }
    };
    if eps > 0.0 {
        for r in 0..cfg.restarts.max(1) {
            let mut delta = vec![0.0; dim];
            if r > 0 {
                let mut rng = seeded_rng(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r as u64));
                for d in delta.iter_mut() {
                    *d = StandardNormal.sample(&mut rng);
                }
                let n = norm(&delta);
                let radius = eps * libm::pow(rng.random::<f64>(), 1.0 / dim as f64);
                if n > 0.0 {
                    delta.iter_mut().for_each(|d| *d *= radius / n);
                }
                if flips(&delta) {
                    record(&delta, &mut best);
                }
            }
            for _ in 0..cfg.steps {
                steps_used += 1;
                let z: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
                let g = ascent_direction(model, &z, y);
                let gn = norm(&g);
                if !(gn > 0.0) {
                    break;
                }
                for (d, gi) in delta.iter_mut().zip(&g) {
                    *d += cfg.step_size * gi / gn;
                }
                project_ball(&mut delta, eps);
                if flips(&delta) {
                    record(&delta, &mut best);
                }
            }
            last = delta;
        }
    }
    match best {
        Some(p) => AttackResult {
            found: true,
            norm: norm(&p),
            perturbation: p,
            steps_used,
        },
        None => AttackResult {
            found: false,
            norm: norm(&last),
            perturbation: last,
            steps_used,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobustnessMode {
    /// Correct and certified at radius `eps`.
    Certified,
    /// Correct and not flipped by PGD at budget `eps`.
    Empirical,
}

fn is_correct(outputs: &[f64], label: Label) -> bool {
    predict(outputs) == label
}

/// Clean accuracy.
pub fn accuracy<M: Model + ?Sized>(model: &M, data: &LabeledDataset) -> f64 {
    let correct = (0..data.len())
        .filter(|&i| is_correct(&model.evaluate(data.point(i)), Label::from_dataset(&data.labels, i)))
        .count();
    correct as f64 / data.len() as f64
}

fn radius_of(outputs: &[f64]) -> f64 {
    if outputs.len() == 1 {
        libm::fabs(outputs[0])
    } else {
        let k = argmax(outputs);
        multiclass_certificate(outputs, k).unwrap_or(0.0)
    }
}

/// Robust accuracy with the default PGD settings for `eps`.
pub fn robust_accuracy<M: Model + ?Sized>(model: &M, data: &LabeledDataset, eps: f64, mode: RobustnessMode) -> Result<f64> {
    robust_accuracy_with(model, data, eps, mode, &PgdConfig::for_eps(eps))
}

pub fn robust_accuracy_with<M: Model + ?Sized>(
    model: &M,
    data: &LabeledDataset,
    eps: f64,
    mode: RobustnessMode,
    pgd: &PgdConfig,
) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument("eps must be non-negative".into()));
    }
    if mode == RobustnessMode::Certified && !model.is_one_lipschitz() {
        return Err(Error::UnconstrainedNet);
    }
    let mut robust = 0usize;
    for i in 0..data.len() {
        let x = data.point(i);
        let label = Label::from_dataset(&data.labels, i);
        let outputs = model.evaluate(x);
        if !is_correct(&outputs, label) {
            continue;
        }
        let ok = match mode {
            RobustnessMode::Certified => radius_of(&outputs) >= eps,
            RobustnessMode::Empirical => eps == 0.0 || !pgd_l2_with(model, x, label, eps, pgd).found,
        };
        if ok {
            robust += 1;
        }
    }
    Ok(robust as f64 / data.len() as f64)
}

/// Average certificate over the sample, counted as 0 on misclassified points.
pub fn average_certificate<M: Model + ?Sized>(model: &M, data: &LabeledDataset) -> f64 {
    let total: f64 = (0..data.len())
        .map(|i| {
            let outputs = model.evaluate(data.point(i));
            if is_correct(&outputs, Label::from_dataset(&data.labels, i)) {
                radius_of(&outputs)
            } else {
                0.0
            }
        })
        .sum();
    total / data.len() as f64
}

/// One row of a per-point evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub point_id: usize,
    pub label: Label,
    pub prediction: Label,
    pub logits: Vec<f64>,
    pub certificate: f64,
    pub pgd_found: bool,
    pub pgd_norm: f64,
}

/// Logits, certificate and a PGD audit at budget `eps` for every point.
pub fn evaluation_report<M: Model + ?Sized>(model: &M, data: &LabeledDataset, eps: f64, pgd: &PgdConfig) -> Vec<PointReport> {
    (0..data.len())
        .map(|i| {
            let x = data.point(i);
            let logits = model.evaluate(x);
            let prediction = predict(&logits);
            let attack = pgd_l2_with(model, x, prediction, eps, pgd);
            PointReport {
                point_id: i,
                label: Label::from_dataset(&data.labels, i),
                prediction,
                certificate: radius_of(&logits),
                logits,
                pgd_found: attack.found,
                pgd_norm: attack.norm,
            }
        })
        .collect()
}

fn balance_gap(f_p: &[f64], f_q: &[f64], t: f64) -> f64 {
    let zp = f_p.iter().map(|&f| sigmoid(-(f - t))).sum::<f64>() / f_p.len() as f64;
    let zq = f_q.iter().map(|&f| sigmoid(f - t)).sum::<f64>() / f_q.len() as f64;
    zp - zq
}

/// `Z^p(T) − Z^q(T)`: false-negative mass on P minus false-positive mass on Q
/// for the shifted classifier `f − T`. Strictly increasing in `T`.
pub fn balance_gap_values(f_p: &[f64], f_q: &[f64], t: f64) -> f64 {
    balance_gap(f_p, f_q, t)
}

/// Bisection for the bias `T` that equalizes both error masses.
pub fn balance_bias_values(f_p: &[f64], f_q: &[f64], tol: f64) -> Result<f64> {
    if f_p.is_empty() || f_q.is_empty() {
        return Err(Error::InvalidArgument("both samples must be non-empty".into()));
    }
    let (mut lo, mut hi) = f_p
        .iter()
        .chain(f_q)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &f| (a.min(f), b.max(f)));
    lo -= 1.0;
    hi += 1.0;
    let mut width = hi - lo;
    let mut expansions = 0;
    while balance_gap(f_p, f_q, lo) > 0.0 || balance_gap(f_p, f_q, hi) < 0.0 {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::NoBracket);
        }
        width *= 2.0;
        lo -= width;
        hi += width;
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let g = balance_gap(f_p, f_q, mid);
        if libm::fabs(g) <= tol || mid <= lo || mid >= hi {
            break;
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(mid)
}

/// [`balance_bias_values`] on the outputs of a scalar model.
pub fn balance_bias<M: Model + ?Sized>(model: &M, p: &[Vec<f64>], q: &[Vec<f64>], tol: f64) -> Result<f64> {
    let f_p: Vec<f64> = p.iter().map(|x| model.evaluate(x)[0]).collect();
    let f_q: Vec<f64> = q.iter().map(|x| model.evaluate(x)[0]).collect();
    balance_bias_values(&f_p, &f_q, tol)
}
