//! Feed-forward networks built from constrained dense layers and GroupSort2.
//!
//! Gradients are written out by hand (reverse mode over the layer list). In
//! constrained mode every dense layer is projected back onto its constraint
//! set after each parameter update, so the composed map stays 1-Lipschitz.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{shape_err, Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::Model;
use crate::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Orthonormal rows (wide) or columns (tall).
    Orthogonal,
    /// Spectral norm at most one.
    SpectralNormOnly,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Constrained,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    GroupSort2,
    /// Only meant for unconstrained baselines.
    Relu,
}

/// Affine layer `x ↦ Wx + b` with `W` of shape `fan_out × fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub constraint: Constraint,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, constraint: Constraint) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(shape_err(
                format!("bias of length {}", weights.rows()),
                format!("length {}", bias.len()),
            ));
        }
        Ok(Self {
            weights,
            bias,
            constraint,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    GroupSort2,
    Relu,
}

/// Sorts each consecutive pair into `(min, max)`.
pub fn groupsort2(x: &[f64]) -> Result<Vec<f64>> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::OddWidth(x.len()));
    }
    let mut out = x.to_vec();
    groupsort2_in_place(&mut out);
    Ok(out)
}

fn groupsort2_in_place(x: &mut [f64]) {
    for pair in x.chunks_exact_mut(2) {
        if pair[0] > pair[1] {
            pair.swap(0, 1);
        }
    }
}

/// Tuning knobs for [`LipNet::project_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub power_iters: usize,
    pub bjorck_iters: usize,
    pub bjorck_tol: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        // badly conditioned random inits need more than the 30 iterations
        // that suffice once the weights sit near the orthogonal set
        Self {
            power_iters: 30,
            bjorck_iters: 100,
            bjorck_tol: 1e-9,
        }
    }
}

/// Architecture description used to build a fresh network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub mode: Mode,
    pub activation: Activation,
}

impl NetSpec {
    pub fn constrained(input_dim: usize, hidden: &[usize], output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            output_dim,
            mode: Mode::Constrained,
            activation: Activation::GroupSort2,
        }
    }

    pub fn unconstrained(input_dim: usize, hidden: &[usize], output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            output_dim,
            mode: Mode::Unconstrained,
            activation,
        }
    }
}

/// Per dense layer parameter gradients, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub d_weights: Matrix,
    pub d_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub dense: Vec<DenseGrad>,
    /// One row per batch element.
    pub input_grad: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipNet {
    layers: Vec<Layer>,
    mode: Mode,
}

impl LipNet {
    /// Validates width chaining and the mode/constraint pairing.
    pub fn new(layers: Vec<Layer>, mode: Mode) -> Result<Self> {
        let mut width: Option<usize> = None;
        let mut seen_dense = false;
        for (i, layer) in layers.iter().enumerate() {
            match layer {
                Layer::Dense(d) => {
                    if let Some(w) = width {
                        if w != d.fan_in() {
                            return Err(shape_err(
                                format!("layer {i} fan_in {w}"),
                                format!("fan_in {}", d.fan_in()),
                            ));
                        }
                    }
                    if mode == Mode::Constrained && d.constraint == Constraint::Unconstrained {
                        return Err(Error::InvalidArgument(format!(
                            "layer {i} is unconstrained inside a constrained network"
                        )));
                    }
                    width = Some(d.fan_out());
                    seen_dense = true;
                }
                Layer::GroupSort2 => {
                    if let Some(w) = width {
                        if w % 2 != 0 {
                            return Err(Error::OddWidth(w));
                        }
                    }
                }
                Layer::Relu => {}
            }
        }
        if !seen_dense {
            return Err(Error::InvalidArgument("network needs at least one dense layer".into()));
        }
        Ok(Self { layers, mode })
    }

    /// Gaussian init scaled by `1/√fan_in`, then one projection.
    ///
    /// Hidden layers are orthogonal and the last layer is only
    /// spectrally normalized in constrained mode.
    pub fn init(spec: &NetSpec, rng: &mut Rng) -> Result<Self> {
        let mut widths = vec![spec.input_dim];
        widths.extend_from_slice(&spec.hidden);
        widths.push(spec.output_dim);
        let n_dense = widths.len() - 1;
        let mut layers = Vec::new();
        for i in 0..n_dense {
            let (fan_in, fan_out) = (widths[i], widths[i + 1]);
            let scale = 1.0 / libm::sqrt(fan_in as f64);
            let weights = Matrix::from_fn(fan_out, fan_in, |_, _| {
                let z: f64 = rng.sample(StandardNormal);
                z * scale
            });
            let constraint = match spec.mode {
                Mode::Unconstrained => Constraint::Unconstrained,
                Mode::Constrained if i + 1 == n_dense => Constraint::SpectralNormOnly,
                Mode::Constrained => Constraint::Orthogonal,
            };
            layers.push(Layer::Dense(DenseLayer::new(weights, vec![0.0; fan_out], constraint)?));
            if i + 1 < n_dense {
                layers.push(match spec.activation {
                    Activation::GroupSort2 => Layer::GroupSort2,
                    Activation::Relu => Layer::Relu,
                });
            }
        }
        let mut net = Self::new(layers, spec.mode)?;
        net.project();
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dense_layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Dense(d) => Some(d),
            _ => None,
        })
    }

    pub fn dense_layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.layers.iter_mut().filter_map(|l| match l {
            Layer::Dense(d) => Some(d),
            _ => None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.dense_layers().next().map_or(0, DenseLayer::fan_in)
    }

    pub fn output_dim(&self) -> usize {
        self.dense_layers().last().map_or(0, DenseLayer::fan_out)
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.dense_layers().map(|d| d.weights.data().len() + d.bias.len()).sum()
    }

    /// Applies the layers to a batch (one row per example).
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = apply_layer(layer, h);
        }
        Ok(h)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(shape_err(
                format!("input width {}", self.input_dim()),
                format!("{}x{}", x.rows(), x.cols()),
            ));
        }
        Ok(())
    }

    /// Exact reverse-mode gradients of `Σ_batch ⟨upstream, f(x)⟩`.
    ///
    /// GroupSort ties take the identity branch of the subdifferential.
    pub fn backward(&self, x: &Matrix, upstream: &Matrix) -> Result<GradientBundle> {
        self.check_input(x)?;
        if upstream.rows() != x.rows() || upstream.cols() != self.output_dim() {
            return Err(shape_err(
                format!("upstream {}x{}", x.rows(), self.output_dim()),
                format!("{}x{}", upstream.rows(), upstream.cols()),
            ));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let next = apply_layer(layer, h.clone());
            inputs.push(h);
            h = next;
        }
        let mut grad = upstream.clone();
        let mut dense = Vec::new();
        for (layer, input) in self.layers.iter().zip(&inputs).rev() {
            match layer {
                Layer::Dense(d) => {
                    let d_weights = grad.matmul_at(input)?;
                    let mut d_bias = vec![0.0; d.fan_out()];
                    for r in 0..grad.rows() {
                        for (b, g) in d_bias.iter_mut().zip(grad.row(r)) {
                            *b += g;
                        }
                    }
                    grad = grad.matmul(&d.weights)?;
                    dense.push(DenseGrad { d_weights, d_bias });
                }
                Layer::GroupSort2 => {
                    for r in 0..grad.rows() {
                        let xin = input.row(r);
                        let g = grad.row_mut(r);
                        for (pair, gp) in xin.chunks_exact(2).zip(g.chunks_exact_mut(2)) {
                            if pair[0] > pair[1] {
                                gp.swap(0, 1);
                            }
                        }
                    }
                }
                Layer::Relu => {
                    for (g, &v) in grad.data_mut().iter_mut().zip(input.data()) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
            }
        }
        dense.reverse();
        Ok(GradientBundle {
            dense,
            input_grad: grad,
        })
    }

    /// Restores every layer constraint with the default projection settings.
    pub fn project(&mut self) {
        self.project_with(&ProjectionConfig::default());
    }

    pub fn project_with(&mut self, cfg: &ProjectionConfig) {
        for d in self.dense_layers_mut() {
            match d.constraint {
                Constraint::Orthogonal => {
                    d.weights =
                        linalg::project_orthogonal(&d.weights, cfg.power_iters, cfg.bjorck_iters, cfg.bjorck_tol)
                            .matrix;
                }
                Constraint::SpectralNormOnly => {
                    d.weights = linalg::project_spectral(&d.weights, cfg.power_iters.max(100));
                }
                Constraint::Unconstrained => {}
            }
        }
    }

    /// `‖∇ₓ f(x)‖` for a scalar-output network.
    pub fn input_gradient_norm(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(shape_err("scalar output", format!("{} outputs", self.output_dim())));
        }
        let xm = Matrix::new(1, x.len(), x.to_vec())?;
        let g = self.backward(&xm, &Matrix::new(1, 1, vec![1.0])?)?;
        Ok(linalg::norm(g.input_grad.row(0)))
    }

    /// Product of per-layer spectral norms; activations contribute 1.
    pub fn lipschitz_upper_bound(&self) -> f64 {
        self.dense_layers().map(|d| layer_spectral_norm(&d.weights)).product()
    }

    /// Largest per-layer spectral norm.
    pub fn max_spectral_norm(&self) -> f64 {
        self.dense_layers()
            .map(|d| layer_spectral_norm(&d.weights))
            .fold(0.0, f64::max)
    }

    /// Largest orthogonality residual over the orthogonal layers.
    pub fn max_orthogonality_residual(&self) -> f64 {
        self.dense_layers()
            .filter(|d| d.constraint == Constraint::Orthogonal)
            .map(|d| linalg::orthogonality_residual(&d.weights))
            .fold(0.0, f64::max)
    }

    /// Adds `scale · grads` to the parameters (no projection).
    pub fn apply_update(&mut self, step: &GradientBundle, scale: f64) {
        for (d, g) in self.dense_layers_mut().zip(&step.dense) {
            for (w, dw) in d.weights.data_mut().iter_mut().zip(g.d_weights.data()) {
                *w += scale * dw;
            }
            for (b, db) in d.bias.iter_mut().zip(&g.d_bias) {
                *b += scale * db;
            }
        }
    }
}

fn layer_spectral_norm(w: &Matrix) -> f64 {
    linalg::power_iteration(w, 500, 1e-13).map_or(0.0, |e| e.sigma)
}

fn apply_layer(layer: &Layer, h: Matrix) -> Matrix {
    match layer {
        Layer::Dense(d) => {
            let mut out = h.matmul_bt(&d.weights).expect("checked widths");
            for r in 0..out.rows() {
                for (o, b) in out.row_mut(r).iter_mut().zip(&d.bias) {
                    *o += b;
                }
            }
            out
        }
        Layer::GroupSort2 => {
            let mut h = h;
            for r in 0..h.rows() {
                groupsort2_in_place(h.row_mut(r));
            }
            h
        }
        Layer::Relu => {
            let mut h = h;
            h.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            h
        }
    }
}

impl Model for LipNet {
    fn input_dim(&self) -> usize {
        LipNet::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        LipNet::output_dim(self)
    }

    fn is_one_lipschitz(&self) -> bool {
        self.mode == Mode::Constrained
    }

    fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let xm = Matrix::new(1, x.len(), x.to_vec()).expect("finite input");
        self.forward(&xm).expect("input width").into_data()
    }

    fn input_gradient(&self, x: &[f64], upstream: &[f64]) -> Vec<f64> {
        let xm = Matrix::new(1, x.len(), x.to_vec()).expect("finite input");
        let up = Matrix::new(1, upstream.len(), upstream.to_vec()).expect("finite upstream");
        self.backward(&xm, &up).expect("shapes").input_grad.into_data()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn single_dense(w: Matrix, constraint: Constraint, mode: Mode) -> LipNet {
        let b = vec![0.0; w.rows()];
        LipNet::new(vec![Layer::Dense(DenseLayer::new(w, b, constraint).unwrap())], mode).unwrap()
    }

    #[test]
    fn groupsort_examples() {
        assert_eq!(groupsort2(&[3.0, 1.0]).unwrap(), vec![1.0, 3.0]);
        assert_eq!(groupsort2(&[1.0, 3.0, 2.0, 5.0]).unwrap(), vec![1.0, 3.0, 2.0, 5.0]);
        assert_eq!(groupsort2(&[1.0, 2.0, 3.0]), Err(Error::OddWidth(3)));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = single_dense(Matrix::identity(3), Constraint::Orthogonal, Mode::Constrained);
        let x = Matrix::from_rows(&[[1.0, -2.0, 0.5]]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = single_dense(Matrix::identity(3), Constraint::Orthogonal, Mode::Constrained);
        assert!(matches!(
            net.forward(&Matrix::zeros(1, 2)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn linear_input_gradient_is_w_transpose_upstream() {
        let w = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [0.5, -1.0]]).unwrap();
        let net = single_dense(w.clone(), Constraint::Unconstrained, Mode::Unconstrained);
        let up = [1.0, -1.0, 2.0];
        let g = net.input_gradient(&[0.3, 0.7], &up);
        assert_eq!(g, w.mul_t_vec(&up));
    }

    #[test]
    fn unit_linear_gradient_norm() {
        let net = single_dense(Matrix::from_rows(&[[0.6, 0.8]]).unwrap(), Constraint::SpectralNormOnly, Mode::Constrained);
        assert!((net.input_gradient_norm(&[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let mut net = single_dense(Matrix::identity(3).scaled(2.0), Constraint::Orthogonal, Mode::Constrained);
        net.project();
        let w = &net.dense_layers().next().unwrap().weights;
        assert!(w.max_abs_diff(&Matrix::identity(3)) < 1e-10);

        let spec = NetSpec::constrained(4, &[8, 8], 1);
        let mut net = LipNet::init(&spec, &mut seeded_rng(3)).unwrap();
        let before = net.clone();
        net.project();
        for (a, b) in net.dense_layers().zip(before.dense_layers()) {
            assert!(a.weights.max_abs_diff(&b.weights) < 1e-10);
        }
    }

    #[test]
    fn unconstrained_layers_untouched_by_projection() {
        let w = Matrix::identity(2).scaled(5.0);
        let mut net = single_dense(w.clone(), Constraint::Unconstrained, Mode::Unconstrained);
        net.project();
        assert_eq!(net.dense_layers().next().unwrap().weights, w);
    }

    #[test]
    fn constrained_mode_rejects_free_layers() {
        let d = DenseLayer::new(Matrix::identity(2), vec![0.0; 2], Constraint::Unconstrained).unwrap();
        assert!(LipNet::new(vec![Layer::Dense(d)], Mode::Constrained).is_err());
    }

    #[test]
    fn width_chain_is_checked() {
        let a = DenseLayer::new(Matrix::zeros(4, 2), vec![0.0; 4], Constraint::Orthogonal).unwrap();
        let b = DenseLayer::new(Matrix::zeros(1, 3), vec![0.0; 1], Constraint::Orthogonal).unwrap();
        assert!(LipNet::new(vec![Layer::Dense(a.clone()), Layer::Dense(b)], Mode::Constrained).is_err());
        let c = DenseLayer::new(Matrix::zeros(1, 3), vec![0.0; 1], Constraint::Orthogonal).unwrap();
        let odd = DenseLayer::new(Matrix::zeros(3, 2), vec![0.0; 3], Constraint::Orthogonal).unwrap();
        assert_eq!(
            LipNet::new(vec![Layer::Dense(odd), Layer::GroupSort2, Layer::Dense(c)], Mode::Constrained),
            Err(Error::OddWidth(3))
        );
    }

    #[test]
    fn spectral_bound_of_diagonal() {
        let net = single_dense(Matrix::from_diag(&[3.0, 1.0]), Constraint::Unconstrained, Mode::Unconstrained);
        assert!((net.lipschitz_upper_bound() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn init_is_on_constraint_set() {
        let spec = NetSpec::constrained(2, &[16, 16, 16], 3);
        let net = LipNet::init(&spec, &mut seeded_rng(11)).unwrap();
        assert!(net.max_orthogonality_residual() < 1e-6);
        assert!(net.lipschitz_upper_bound() <= 1.0 + 1e-6);
        assert_eq!(net.output_dim(), 3);
        assert_eq!(net.parameter_count(), 16 * 2 + 16 + 2 * (16 * 16 + 16) + 3 * 16 + 3);
    }
}
