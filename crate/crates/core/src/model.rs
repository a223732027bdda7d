use alloc::vec::Vec;

/// A differentiable map `Rⁿ → Rᴷ` evaluated one point at a time.
///
/// Robustness metrics and attacks are written against this trait so the same
/// code audits trained networks and exact geometric oracles.
pub trait Model {
    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    /// True when the map is guaranteed 1-Lipschitz in the euclidean norm.
    fn is_one_lipschitz(&self) -> bool;

    fn evaluate(&self, x: &[f64]) -> Vec<f64>;

    /// Gradient of `⟨upstream, f(x)⟩` with respect to `x`.
    fn input_gradient(&self, x: &[f64], upstream: &[f64]) -> Vec<f64>;
}

impl<M: Model + ?Sized> Model for &M {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn is_one_lipschitz(&self) -> bool {
        (**self).is_one_lipschitz()
    }
    fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        (**self).evaluate(x)
    }
    fn input_gradient(&self, x: &[f64], upstream: &[f64]) -> Vec<f64> {
        (**self).input_gradient(x, upstream)
    }
}
