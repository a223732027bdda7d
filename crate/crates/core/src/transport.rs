//! Wasserstein-1 oracles and the Kantorovich-Rubinstein dual estimate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::linalg::Matrix;
use crate::model::Model;

use rand_distr::{Distribution, StandardNormal};

/// Weighted atoms in `Rⁿ` (one per row of `atoms`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    atoms: Matrix,
    weights: Vec<f64>,
}

/// Largest number of atoms accepted by [`w1_exact_assignment`].
pub const MAX_ASSIGNMENT_ATOMS: usize = 64;

impl DiscreteDist {
    pub fn new(atoms: Matrix, weights: Vec<f64>) -> Result<Self> {
        if atoms.rows() == 0 {
            return Err(Error::InvalidArgument("distribution has no atoms".into()));
        }
        if weights.len() != atoms.rows() {
            return Err(shape_err(format!("{} weights", atoms.rows()), format!("{}", weights.len())));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights })
    }

    pub fn uniform(atoms: Matrix) -> Result<Self> {
        let n = atoms.rows();
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    /// Uniform distribution over scalar atoms.
    pub fn uniform_1d(values: &[f64]) -> Result<Self> {
        Self::uniform(Matrix::new(values.len(), 1, values.to_vec())?)
    }

    pub fn atoms(&self) -> &Matrix {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        self.atoms.row(i)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms.cols()
    }

    fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - u).abs() <= 1e-12)
    }

    /// Weighted mean of `f` over the atoms.
    pub fn expectation(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * f(self.atom(i))).sum()
    }
}

/// `∫ |F_P(t) − F_Q(t)| dt` over the merged support, exact for step CDFs.
/// Equal-size uniform inputs use the sorted matching `mean |p₍ᵢ₎ − q₍ᵢ₎|`,
/// which is the same quantity without accumulating CDF rounding.
pub fn w1_exact_1d(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(shape_err("scalar atoms", format!("dimensions {} and {}", p.dim(), q.dim())));
    }
    if p.len() == q.len() && p.is_uniform() && q.is_uniform() {
        let mut a = p.atoms.data().to_vec();
        let mut b = q.atoms.data().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let total: f64 = a.iter().zip(&b).map(|(x, y)| libm::fabs(x - y)).sum();
        return Ok(total / a.len() as f64);
    }
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(p.len() + q.len());
    events.extend(p.atoms.data().iter().zip(&p.weights).map(|(&x, &w)| (x, w)));
    events.extend(q.atoms.data().iter().zip(&q.weights).map(|(&x, &w)| (x, -w)));
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for i in 0..events.len() {
        diff += events[i].1;
        if let Some(next) = events.get(i + 1) {
            total += libm::fabs(diff) * (next.0 - events[i].0);
        }
    }
    Ok(total)
}

/// Minimum-cost perfect matching on a square cost matrix (shortest augmenting
/// paths with potentials, `O(N³)`). Returns `assignment[row] = col`.
pub fn hungarian(cost: &Matrix) -> Result<Vec<usize>> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(shape_err("square cost matrix", format!("{}x{}", n, cost.cols())));
    }
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// Exact W1 between uniform distributions with the same number of atoms
/// (at most [`MAX_ASSIGNMENT_ATOMS`]) under the euclidean cost.
pub fn w1_exact_assignment(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    if p.len() != q.len() || p.len() > MAX_ASSIGNMENT_ATOMS || !p.is_uniform() || !q.is_uniform() {
        return Err(Error::UnsupportedWeights);
    }
    if p.dim() != q.dim() {
        return Err(shape_err(format!("dimension {}", p.dim()), format!("{}", q.dim())));
    }
    let n = p.len();
    let cost = Matrix::from_fn(n, n, |i, j| crate::data::dist(p.atom(i), q.atom(j)));
    let assignment = hungarian(&cost)?;
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
    Ok(total / n as f64)
}

/// `E_P f − E_Q f` for a 1-Lipschitz scalar potential.
pub fn kr_dual_estimate<M: Model + ?Sized>(model: &M, p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    if !model.is_one_lipschitz() {
        return Err(Error::UnconstrainedNet);
    }
    if model.output_dim() != 1 || model.input_dim() != p.dim() || p.dim() != q.dim() {
        return Err(shape_err(
            format!("scalar potential on R^{}", p.dim()),
            format!("R^{} -> R^{}", model.input_dim(), model.output_dim()),
        ));
    }
    Ok(p.expectation(|x| model.evaluate(x)[0]) - q.expectation(|x| model.evaluate(x)[0]))
}

/// `P = (1/n) Σ δ_{4(i−1)}`, `Q = (1/n) Σ δ_{4i−1}`; `W1(P, Q) = 3`.
pub fn pathological_diracs(n: usize) -> Result<(DiscreteDist, DiscreteDist)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let p: Vec<f64> = (1..=n).map(|i| 4.0 * (i as f64 - 1.0)).collect();
    let q: Vec<f64> = (1..=n).map(|i| 4.0 * i as f64 - 1.0).collect();
    Ok((DiscreteDist::uniform_1d(&p)?, DiscreteDist::uniform_1d(&q)?))
}

/// Two uniform clouds of `n` standard-normal atoms in `R^dim`; `Q` is shifted
/// by a random vector of length `shift`.
pub fn gaussian_pair(n: usize, dim: usize, shift: f64, seed: u64) -> Result<(DiscreteDist, DiscreteDist)> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidArgument("need at least one atom and one dimension".into()));
    }
    let mut rng = crate::seeded_rng(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut dir: Vec<f64> = (0..dim).map(|_| normal()).collect();
    let len = crate::linalg::norm(&dir);
    dir.iter_mut().for_each(|d| *d *= shift / len);
    let p = Matrix::from_fn(n, dim, |_, _| normal());
    let q = Matrix::from_fn(n, dim, |_, j| normal() + dir[j]);
    Ok((DiscreteDist::uniform(p)?, DiscreteDist::uniform(q)?))
}

/// Best classifier `+1 iff f > T` (P is the positive class) over every
/// threshold: below all values, between consecutive distinct values, above
/// all values. Accuracy counts points; ties go to the smaller `T`.
pub fn best_threshold_accuracy(f_p: &[f64], f_q: &[f64]) -> Result<(f64, f64)> {
    if f_p.is_empty() || f_q.is_empty() {
        return Err(Error::InvalidArgument("both value lists must be non-empty".into()));
    }
    let mut merged: Vec<(f64, bool)> = f_p.iter().map(|&f| (f, true)).chain(f_q.iter().map(|&f| (f, false))).collect();
    if merged.iter().any(|(f, _)| !f.is_finite()) {
        return Err(Error::InvalidArgument("values must be finite".into()));
    }
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = merged.len() as f64;
    // Threshold below everything: all predicted positive.
    let mut correct = f_p.len();
    let mut best_t = merged[0].0 - 1.0;
    let mut best = correct;
    let mut i = 0;
    while i < merged.len() {
        let v = merged[i].0;
        while i < merged.len() && merged[i].0 == v {
            if merged[i].1 {
                correct -= 1;
            } else {
                correct += 1;
            }
            i += 1;
        }
        let t = match merged.get(i) {
            Some(next) => 0.5 * (v + next.0),
            None => v + 1.0,
        };
        if correct > best {
            best = correct;
            best_t = t;
        }
    }
    Ok((best_t, best as f64 / total))
}

/// `((1/m)ⁿ, (3/m)ⁿ) · vol(X)/vol(B)`: bounds on the `m`-packing number of `X`.
pub fn packing_bounds(m: f64, n: u32, vol_x: f64, vol_ball: f64) -> Result<(f64, f64)> {
    if !(m > 0.0) || !(vol_x > 0.0) || !(vol_ball > 0.0) || n == 0 {
        return Err(Error::InvalidArgument("m, n and both volumes must be positive".into()));
    }
    let ratio = vol_x / vol_ball;
    let n = n as f64;
    Ok((libm::pow(1.0 / m, n) * ratio, libm::pow(3.0 / m, n) * ratio))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_d_examples() {
        let a = DiscreteDist::uniform_1d(&[0.0]).unwrap();
        let b = DiscreteDist::uniform_1d(&[3.0]).unwrap();
        assert_eq!(w1_exact_1d(&a, &b).unwrap(), 3.0);
        assert_eq!(w1_exact_1d(&a, &a).unwrap(), 0.0);
        let (p, q) = pathological_diracs(20).unwrap();
        assert_eq!(w1_exact_1d(&p, &q).unwrap(), 3.0);
    }

    #[test]
    fn one_d_general_weights() {
        let p = DiscreteDist::new(Matrix::new(2, 1, vec![0.0, 1.0]).unwrap(), vec![0.25, 0.75]).unwrap();
        let q = DiscreteDist::uniform_1d(&[1.0]).unwrap();
        assert!((w1_exact_1d(&p, &q).unwrap() - 0.25).abs() < 1e-15);
        let two = DiscreteDist::uniform_1d(&[0.0, 1.0]).unwrap();
        let mid = DiscreteDist::uniform_1d(&[0.5]).unwrap();
        assert!((w1_exact_1d(&two, &mid).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn assignment_examples() {
        let p = DiscreteDist::uniform(Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap()).unwrap();
        let q = DiscreteDist::uniform(Matrix::from_rows(&[[0.0, 1.0], [1.0, 1.0]]).unwrap()).unwrap();
        assert!((w1_exact_assignment(&p, &q).unwrap() - 1.0).abs() < 1e-15);
        let swapped = DiscreteDist::uniform(Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(w1_exact_assignment(&p, &swapped).unwrap(), 0.0);
    }

    #[test]
    fn assignment_rejects_general_weights() {
        let p = DiscreteDist::new(Matrix::from_rows(&[[0.0], [1.0]]).unwrap(), vec![0.25, 0.75]).unwrap();
        assert_eq!(w1_exact_assignment(&p, &p), Err(Error::UnsupportedWeights));
        let big = DiscreteDist::uniform_1d(&[0.0; 65]).unwrap();
        assert_eq!(w1_exact_assignment(&big, &big), Err(Error::UnsupportedWeights));
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(DiscreteDist::new(Matrix::from_rows(&[[0.0], [1.0]]).unwrap(), vec![0.5, 0.6]).is_err());
        assert!(DiscreteDist::new(Matrix::from_rows(&[[0.0], [1.0]]).unwrap(), vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let (t, acc) = best_threshold_accuracy(&[2.0, 3.0], &[0.0, 1.0]).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(t, 1.5);
        let (_, acc) = best_threshold_accuracy(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(acc, 0.5);
    }

    #[test]
    fn threshold_ties_prefer_smaller() {
        // All thresholds give 0.5; the smallest one is below every value.
        let (t, _) = best_threshold_accuracy(&[1.0], &[1.0]).unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn packing_examples() {
        assert_eq!(packing_bounds(1.0, 3, 2.0, 2.0).unwrap(), (1.0, 27.0));
        let (lo, _) = packing_bounds(0.1, 2, 1.0, core::f64::consts::PI).unwrap();
        assert!((lo - 100.0 / core::f64::consts::PI).abs() < 1e-12);
        assert!(packing_bounds(0.0, 2, 1.0, 1.0).is_err());
    }
}
