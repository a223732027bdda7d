use lipcert_core::experiments::Executor;
use rayon::prelude::*;

/// Runs independent items on the rayon pool; results keep input order, so
/// output is identical to [`lipcert_core::experiments::Sequential`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_par_iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lipcert_core::experiments::Sequential;

    #[test]
    fn matches_sequential_order() {
        let items: Vec<u64> = (0..200).collect();
        let f = |x: u64| x.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 7;
        assert_eq!(Rayon.map(items.clone(), f), Sequential.map(items, f));
    }
}
