//! Dense row-major matrices and the spectral machinery that keeps layers
//! 1-Lipschitz: power iteration for the largest singular value and the
//! first-order Björck iteration towards the nearest orthogonal matrix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{shape_err, Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err(
                format!("{} entries for {}x{}", rows * cols, rows, cols),
                format!("{} entries", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(shape_err(format!("rows of width {cols}"), format!("row of width {}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Builds a matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(shape_err(
                format!("inner dimension {}", self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_bt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(shape_err(
                format!("{} columns", self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for r in 0..self.rows {
            let a = self.row(r);
            for c in 0..other.rows {
                out.data[r * other.rows + c] = dot(a, other.row(c));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn matmul_at(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(shape_err(
                format!("{} rows", self.rows),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &bv) in out_row.iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        Ok(out)
    }

    /// `self · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ · y`.
    pub fn mul_t_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o += yr * w;
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest absolute entry difference; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Result of [`power_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub sigma: f64,
    pub left_vec: Vec<f64>,
    pub right_vec: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Deterministic, non-degenerate starting vector.
fn start_vector(len: usize, salt: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 1.0 + 0.5 * libm::sin((i * 7 + salt * 13 + 1) as f64))
        .collect()
}

/// Largest singular value by alternating `W v` / `Wᵀ u` products.
///
/// `converged` is set once two successive estimates differ by less than `tol`.
pub fn power_iteration(w: &Matrix, max_iters: usize, tol: f64) -> Result<SpectralEstimate> {
    if w.data.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    if max_iters == 0 || !(tol > 0.0) {
        return Err(Error::InvalidArgument("power iteration needs max_iters >= 1 and tol > 0".into()));
    }
    let mut v = start_vector(w.cols, 0);
    normalize(&mut v);
    let mut u = w.mul_vec(&v);
    let mut salt = 1;
    // a start vector in the null space would stall; reseed until it does not
    while normalize(&mut u) == 0.0 {
        v = start_vector(w.cols, salt);
        if salt < w.cols {
            v[salt] += 10.0;
        }
        normalize(&mut v);
        u = w.mul_vec(&v);
        salt += 1;
        if salt > w.cols + 2 {
            return Err(Error::ZeroMatrix);
        }
    }
    let mut sigma = 0.0;
    let mut converged = false;
    let mut iterations_used = 0;
    for it in 1..=max_iters {
        iterations_used = it;
        v = w.mul_t_vec(&u);
        let s = normalize(&mut v);
        u = w.mul_vec(&v);
        normalize(&mut u);
        let done = libm::fabs(s - sigma) < tol;
        sigma = s;
        if done {
            converged = true;
            break;
        }
    }
    Ok(SpectralEstimate {
        sigma,
        left_vec: u,
        right_vec: v,
        iterations_used,
        converged,
    })
}

/// Gram matrix of the smaller dimension: `WᵀW` when tall, `WWᵀ` when wide.
fn small_gram(w: &Matrix) -> Matrix {
    if w.rows >= w.cols {
        w.matmul_at(w).expect("gram shapes")
    } else {
        w.matmul_bt(w).expect("gram shapes")
    }
}

fn gram_residual(g: &Matrix) -> f64 {
    let n = g.rows;
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            let d = g.get(r, c) - if r == c { 1.0 } else { 0.0 };
            acc += d * d;
        }
    }
    libm::sqrt(acc)
}

/// `‖GᵀG − I‖_F` with `G = W` when `rows >= cols`, otherwise `G = Wᵀ`.
pub fn orthogonality_residual(w: &Matrix) -> f64 {
    gram_residual(&small_gram(w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Orthogonalized {
    pub matrix: Matrix,
    pub iterations: usize,
    pub residual: f64,
    /// False when the iteration budget ran out before `residual < tol`.
    pub converged: bool,
}

pub const DEFAULT_BJORCK_ITERS: usize = 30;
pub const DEFAULT_BJORCK_TOL: f64 = 1e-7;
const PRESCALE_SLACK: f64 = 1e-3;

/// First-order Björck iteration `Q ← Q(3I − QᵀQ)/2` (or `(3I − QQᵀ)Q/2` for
/// wide matrices). The input must already have spectral norm at most one.
pub fn bjorck_orthogonalize(w: &Matrix, iters: usize, tol: f64) -> Result<Orthogonalized> {
    if iters == 0 {
        return Err(Error::InvalidArgument("bjorck needs at least one iteration".into()));
    }
    if w.frobenius_norm() > 1.0 + PRESCALE_SLACK {
        let est = power_iteration(w, 1000, 1e-13)?;
        if est.sigma > 1.0 + PRESCALE_SLACK {
            return Err(Error::NotPreScaled { norm: est.sigma });
        }
    }
    Ok(bjorck_unchecked(w.clone(), iters, tol))
}

pub(crate) fn bjorck_unchecked(mut q: Matrix, iters: usize, tol: f64) -> Orthogonalized {
    let tall = q.rows >= q.cols;
    let mut iterations = 0;
    loop {
        let g = small_gram(&q);
        let residual = gram_residual(&g);
        if residual < tol || iterations == iters {
            return Orthogonalized {
                matrix: q,
                iterations,
                residual,
                converged: residual < tol,
            };
        }
        let correction = if tall { q.matmul(&g) } else { g.matmul(&q) }.expect("gram shapes");
        for (qv, cv) in q.data.iter_mut().zip(correction.data) {
            *qv = 1.5 * *qv - 0.5 * cv;
        }
        iterations += 1;
    }
}

/// Spectral pre-scaling followed by Björck, the projection used by
/// orthogonal layers. Returns the orthogonalized matrix and its residual.
pub fn project_orthogonal(w: &Matrix, power_iters: usize, iters: usize, tol: f64) -> Orthogonalized {
    let scaled = match power_iteration(w, power_iters.max(10), 1e-9) {
        Ok(est) => w.scaled(1.0 / est.sigma),
        Err(_) => partial_identity(w.rows, w.cols),
    };
    bjorck_unchecked(scaled, iters, tol)
}

/// `W / max(1, ‖W‖₂)`.
pub fn project_spectral(w: &Matrix, power_iters: usize) -> Matrix {
    match power_iteration(w, power_iters.max(10), 1e-12) {
        Ok(est) if est.sigma > 1.0 => w.scaled(1.0 / est.sigma),
        _ => w.clone(),
    }
}

/// Rectangular identity: ones on the leading diagonal.
pub fn partial_identity(rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |r, c| if r == c { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation(theta: f64) -> Matrix {
        let (s, c) = (libm::sin(theta), libm::cos(theta));
        Matrix::from_rows(&[[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]).unwrap()
    }

    #[test]
    fn power_iteration_on_simple_matrices() {
        let est = power_iteration(&Matrix::identity(2), 100, 1e-12).unwrap();
        assert!((est.sigma - 1.0).abs() < 1e-12);
        let est = power_iteration(&Matrix::from_diag(&[3.0, 1.0]), 200, 1e-14).unwrap();
        assert!((est.sigma - 3.0).abs() < 1e-12);
        assert!((norm(&est.left_vec) - 1.0).abs() < 1e-12);
        assert!((norm(&est.right_vec) - 1.0).abs() < 1e-12);
        assert!(est.converged);
    }

    #[test]
    fn power_iteration_rejects_zero() {
        assert_eq!(power_iteration(&Matrix::zeros(2, 3), 10, 1e-9), Err(Error::ZeroMatrix));
    }

    #[test]
    fn power_iteration_escapes_null_start() {
        // first start vector is orthogonal to the only non-zero row
        let v = start_vector(2, 0);
        let w = Matrix::from_rows(&[[v[1], -v[0]]]).unwrap();
        let est = power_iteration(&w, 50, 1e-14).unwrap();
        assert!((est.sigma - norm(&v)).abs() < 1e-12);
    }

    #[test]
    fn residual_examples() {
        assert_eq!(orthogonality_residual(&Matrix::identity(4)), 0.0);
        assert!((orthogonality_residual(&Matrix::from_diag(&[2.0, 1.0])) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn bjorck_fixed_points() {
        let r = rotation(0.7);
        let out = bjorck_orthogonalize(&r, 30, 1e-12).unwrap();
        assert!(out.matrix.max_abs_diff(&r) < 1e-12);
        let out = bjorck_orthogonalize(&Matrix::from_diag(&[0.5, 0.5]), 60, 1e-12).unwrap();
        assert!(out.matrix.max_abs_diff(&Matrix::identity(2)) < 1e-12);
        assert!(out.converged);
    }

    #[test]
    fn bjorck_rejects_unscaled_input() {
        let err = bjorck_orthogonalize(&Matrix::from_diag(&[2.0, 1.0]), 30, 1e-7).unwrap_err();
        assert!(matches!(err, Error::NotPreScaled { .. }));
    }

    #[test]
    fn bjorck_wide_and_tall() {
        let wide = Matrix::from_rows(&[[0.3, 0.2, 0.1], [0.0, 0.4, -0.2]]).unwrap();
        let out = project_orthogonal(&wide, 50, 100, 1e-12);
        let g = out.matrix.matmul_bt(&out.matrix).unwrap();
        assert!(g.max_abs_diff(&Matrix::identity(2)) < 1e-11);
        let tall = wide.transpose();
        let out = project_orthogonal(&tall, 50, 100, 1e-12);
        let g = out.matrix.matmul_at(&out.matrix).unwrap();
        assert!(g.max_abs_diff(&Matrix::identity(2)) < 1e-11);
    }

    #[test]
    fn products_agree() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0, -1.0, 0.5], [2.0, 0.0, 1.0]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.max_abs_diff(&a.matmul_bt(&b.transpose()).unwrap()), 0.0);
        assert_eq!(ab.max_abs_diff(&a.transpose().matmul_at(&b).unwrap()), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 7.0, 11.0]);
        assert_eq!(a.mul_t_vec(&[1.0, 0.0, 1.0]), vec![6.0, 8.0]);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn constructor_checks_length() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::new(1, 1, vec![f64::NAN]).is_err());
    }
}
