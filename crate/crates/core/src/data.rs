//! Labeled point sets and the synthetic tasks used by the experiments.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{shape_err, Error, Result};
use crate::linalg::Matrix;
use crate::{seeded_rng, Rng};

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// Values in `{-1.0, +1.0}`.
    Binary(Vec<f64>),
    Classes { classes: Vec<usize>, num_classes: usize },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Binary(v) => v.len(),
            Labels::Classes { classes, .. } => classes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Labels {
        match self {
            Labels::Binary(v) => Labels::Binary(idx.iter().map(|&i| v[i]).collect()),
            Labels::Classes { classes, num_classes } => Labels::Classes {
                classes: idx.iter().map(|&i| classes[i]).collect(),
                num_classes: *num_classes,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Labels::Binary(v) => {
                if let Some(bad) = v.iter().find(|&&y| y != 1.0 && y != -1.0) {
                    return Err(Error::InvalidArgument(format!("binary label {bad} is not ±1")));
                }
            }
            Labels::Classes { classes, num_classes } => {
                if *num_classes < 2 {
                    return Err(Error::InvalidArgument("need at least two classes".into()));
                }
                if let Some(&bad) = classes.iter().find(|&&k| k >= *num_classes) {
                    return Err(Error::BadClassIndex {
                        index: bad,
                        classes: *num_classes,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Sign convention shared by every accuracy count: `sign(0) = +1`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Points (one per row) with labels and optional regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub points: Matrix,
    pub labels: Labels,
    pub targets: Option<Vec<f64>>,
}

impl LabeledDataset {
    pub fn new(points: Matrix, labels: Labels, targets: Option<Vec<f64>>) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::InvalidArgument("dataset must be non-empty".into()));
        }
        if labels.len() != points.rows() {
            return Err(shape_err(format!("{} labels", points.rows()), format!("{}", labels.len())));
        }
        if let Some(t) = &targets {
            if t.len() != points.rows() {
                return Err(shape_err(format!("{} targets", points.rows()), format!("{}", t.len())));
            }
        }
        labels.validate()?;
        Ok(Self {
            points,
            labels,
            targets,
        })
    }

    pub fn binary(points: Matrix, labels: Vec<f64>) -> Result<Self> {
        Self::new(points, Labels::Binary(labels), None)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn select(&self, idx: &[usize]) -> LabeledDataset {
        let points = Matrix::from_fn(idx.len(), self.dim(), |r, c| self.points.get(idx[r], c));
        LabeledDataset {
            points,
            labels: self.labels.select(idx),
            targets: self.targets.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect()),
        }
    }

    /// Indices `0..len` in a seeded random order.
    pub fn shuffled_indices(&self, seed: u64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seeded_rng(seed));
        idx
    }

    /// Deterministic prefix of a seeded shuffle holding `fraction` of the points.
    pub fn fraction(&self, fraction: f64, seed: u64) -> Result<LabeledDataset> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("fraction {fraction} outside (0, 1]")));
        }
        let n = (libm::round(self.len() as f64 * fraction) as usize).clamp(1, self.len());
        let idx = self.shuffled_indices(seed);
        Ok(self.select(&idx[..n]))
    }

    /// `+1 → class 0`, `−1 → class 1`, so that `f₀ − f₁` plays the binary logit.
    pub fn to_two_class(&self) -> Result<LabeledDataset> {
        match &self.labels {
            Labels::Binary(ys) => Ok(LabeledDataset {
                points: self.points.clone(),
                labels: Labels::Classes {
                    classes: ys.iter().map(|&y| if y > 0.0 { 0 } else { 1 }).collect(),
                    num_classes: 2,
                },
                targets: self.targets.clone(),
            }),
            Labels::Classes { .. } => Err(Error::InvalidArgument("labels are already class indices".into())),
        }
    }

    /// Splits a binary dataset into its `+1` (P) and `−1` (Q) points.
    #[allow(clippy::type_complexity)]
    pub fn split_by_label(&self) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let Labels::Binary(ys) = &self.labels else {
            return Err(Error::InvalidArgument("expected binary labels".into()));
        };
        let mut p = Vec::new();
        let mut q = Vec::new();
        for (i, &y) in ys.iter().enumerate() {
            if y > 0.0 {
                p.push(self.point(i).to_vec());
            } else {
                q.push(self.point(i).to_vec());
            }
        }
        Ok((p, q))
    }

    /// Largest pairwise distance between points (quadratic scan).
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(dist(self.point(i), self.point(j)));
            }
        }
        best
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

fn normal(rng: &mut Rng, mean: f64, std: f64) -> f64 {
    Normal::new(mean, std).expect("positive std").sample(rng)
}

/// One mixture component of the two-mode task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode2d {
    pub center: [f64; 2],
    pub std: f64,
    pub weight: f64,
}

/// Two-class task where each class is a 0.9/0.1 Gaussian mixture and each
/// minority mode sits inside the other class's majority half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureTask {
    pub positive: [Mode2d; 2],
    pub negative: [Mode2d; 2],
}

impl Default for GaussianMixtureTask {
    fn default() -> Self {
        Self {
            positive: [
                Mode2d { center: [-1.0, 0.0], std: 0.3, weight: 0.9 },
                Mode2d { center: [1.0, 1.0], std: 0.15, weight: 0.1 },
            ],
            negative: [
                Mode2d { center: [1.0, 0.0], std: 0.3, weight: 0.9 },
                Mode2d { center: [-1.0, -1.0], std: 0.15, weight: 0.1 },
            ],
        }
    }
}

impl GaussianMixtureTask {
    /// `n` points, exactly half per class (the extra point goes to `+1`),
    /// interleaved by label. The chosen mode index is returned per point.
    pub fn sample_with_modes(&self, n: usize, seed: u64) -> (LabeledDataset, Vec<usize>) {
        let mut rng = seeded_rng(seed);
        let mut data = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        let mut modes = Vec::with_capacity(n);
        for i in 0..n {
            let (y, mixture) = if i % 2 == 0 {
                (1.0, &self.positive)
            } else {
                (-1.0, &self.negative)
            };
            let u: f64 = rng.random();
            let which = if u < mixture[0].weight { 0 } else { 1 };
            let m = mixture[which];
            data.push(normal(&mut rng, m.center[0], m.std));
            data.push(normal(&mut rng, m.center[1], m.std));
            labels.push(y);
            modes.push(which);
        }
        let points = Matrix::new(n, 2, data).expect("finite samples");
        (LabeledDataset::binary(points, labels).expect("valid labels"), modes)
    }

    pub fn sample(&self, n: usize, seed: u64) -> LabeledDataset {
        self.sample_with_modes(n, seed).0
    }

    /// Centers of the 0.1-weight modes with the label of their own class.
    pub fn minority_centers(&self) -> [([f64; 2], f64); 2] {
        [(self.positive[1].center, 1.0), (self.negative[1].center, -1.0)]
    }
}

/// 2D binary task: two modes of weights 0.9 and 0.1 per class.
pub fn gaussian_mixture_task(n: usize, seed: u64) -> LabeledDataset {
    GaussianMixtureTask::default().sample(n, seed)
}

/// The two-point task `{(−1, −1), (+1, +1)}` in one dimension.
pub fn linear_pair_task() -> LabeledDataset {
    let points = Matrix::new(2, 1, vec![-1.0, 1.0]).expect("finite");
    LabeledDataset::binary(points, vec![-1.0, 1.0]).expect("valid labels")
}

/// Interleaving half circles; outer moon `+1`, inner moon `−1`.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> LabeledDataset {
    let mut rng = seeded_rng(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t: f64 = rng.random::<f64>() * PI;
        let (x, y, label) = if i % 2 == 0 {
            (libm::cos(t), libm::sin(t), 1.0)
        } else {
            (1.0 - libm::cos(t), 0.5 - libm::sin(t), -1.0)
        };
        let (nx, ny) = if noise > 0.0 {
            (normal(&mut rng, 0.0, noise), normal(&mut rng, 0.0, noise))
        } else {
            (0.0, 0.0)
        };
        data.push(x + nx);
        data.push(y + ny);
        labels.push(label);
    }
    LabeledDataset::binary(Matrix::new(n, 2, data).expect("finite"), labels).expect("valid labels")
}

/// Two Gaussian blobs at `(±1.5, 0)` truncated to radius 1, hence separated
/// by a margin of at least 1.
pub fn separable_blobs(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = seeded_rng(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (cx, label) = if i % 2 == 0 { (1.5, 1.0) } else { (-1.5, -1.0) };
        loop {
            let dx = normal(&mut rng, 0.0, 0.4);
            let dy = normal(&mut rng, 0.0, 0.4);
            if dx * dx + dy * dy <= 1.0 {
                data.push(cx + dx);
                data.push(dy);
                break;
            }
        }
        labels.push(label);
    }
    LabeledDataset::binary(Matrix::new(n, 2, data).expect("finite"), labels).expect("valid labels")
}

/// Overlapping Gaussian classes with label noise, for generalization-gap
/// measurements: centers `(±0.5, 0)`, unit-free std 0.6, 10% flipped labels.
pub fn noisy_gaussians(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = seeded_rng(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label: f64 = if i % 2 == 0 { 1.0 } else { -1.0 };
        data.push(normal(&mut rng, 0.5 * label, 0.6));
        data.push(normal(&mut rng, 0.0, 0.6));
        let flip = rng.random::<f64>() < 0.1;
        labels.push(if flip { -label } else { label });
    }
    LabeledDataset::binary(Matrix::new(n, 2, data).expect("finite"), labels).expect("valid labels")
}

/// `n` points in the unit square with pairwise distance at least `min_sep`
/// and i.i.d. uniform ±1 labels.
///
/// Gives up with [`Error::Unsatisfiable`] after `1000·n` rejected draws.
pub fn random_label_task(n: usize, min_sep: f64, seed: u64) -> Result<LabeledDataset> {
    if n < 2 || !(min_sep > 0.0) {
        return Err(Error::InvalidArgument("random_label_task needs n >= 2 and min_sep > 0".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(n);
    let budget = 1000 * n;
    let mut rejected = 0;
    let sep2 = min_sep * min_sep;
    while pts.len() < n {
        let c = [rng.random::<f64>(), rng.random::<f64>()];
        let ok = pts.iter().all(|p| {
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            dx * dx + dy * dy >= sep2
        });
        if ok {
            pts.push(c);
        } else {
            rejected += 1;
            if rejected > budget {
                return Err(Error::Unsatisfiable {
                    placed: pts.len(),
                    requested: n,
                });
            }
        }
    }
    let labels = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let points = Matrix::new(n, 2, pts.iter().flat_map(|p| p.iter().copied()).collect())?;
    LabeledDataset::binary(points, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_pair() {
        let d = linear_pair_task();
        assert_eq!(d.len(), 2);
        let Labels::Binary(ys) = &d.labels else { panic!() };
        for (i, y) in ys.iter().enumerate() {
            assert_eq!(d.point(i)[0], *y);
        }
    }

    #[test]
    fn mixture_balance_and_weights() {
        let task = GaussianMixtureTask::default();
        let (d, modes) = task.sample_with_modes(10_000, 5);
        let Labels::Binary(ys) = &d.labels else { panic!() };
        let pos = ys.iter().filter(|&&y| y > 0.0).count() as f64 / 1e4;
        assert!((pos - 0.5).abs() <= 1e-2);
        let minority = modes.iter().filter(|&&m| m == 1).count() as f64 / 1e4;
        // 9:1 within a generous 4-sigma sampling band
        assert!((minority - 0.1).abs() < 0.012, "{minority}");
        assert_eq!(task.sample(10_000, 5), d);
    }

    #[test]
    fn random_labels_respect_separation() {
        let d = random_label_task(40, 0.08, 2).unwrap();
        for i in 0..d.len() {
            for j in i + 1..d.len() {
                assert!(dist(d.point(i), d.point(j)) >= 0.08);
            }
        }
    }

    #[test]
    fn random_labels_report_infeasible_packings() {
        // 200 disjoint disks of radius 0.1 cannot fit around the unit square
        assert!(matches!(
            random_label_task(200, 0.2, 0),
            Err(Error::Unsatisfiable { requested: 200, .. })
        ));
    }

    #[test]
    fn fraction_is_prefix_of_seeded_shuffle() {
        let d = two_moons(100, 0.1, 1);
        let a = d.fraction(0.3, 9).unwrap();
        let b = d.fraction(0.3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 30);
        assert!(d.fraction(0.0, 1).is_err());
        let idx = d.shuffled_indices(9);
        assert_eq!(a.point(0), d.point(idx[0]));
    }

    #[test]
    fn blobs_are_separated() {
        let d = separable_blobs(200, 4);
        let (p, q) = d.split_by_label().unwrap();
        for a in &p {
            for b in &q {
                assert!(dist(a, b) >= 1.0);
            }
        }
    }

    #[test]
    fn rejects_bad_labels() {
        let pts = Matrix::zeros(2, 1);
        assert!(LabeledDataset::binary(pts.clone(), vec![1.0, 0.0]).is_err());
        let classes = Labels::Classes { classes: vec![0, 3], num_classes: 3 };
        assert!(LabeledDataset::new(pts, classes, None).is_err());
    }
}
