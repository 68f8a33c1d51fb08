//! Sequential or rayon-backed iteration over independent work items.

use serde::Serialize;

/// Execution strategy for data-parallel loops. `Parallel` silently runs
/// sequentially when the crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Parallelism {
    #[default]
    Sequential,
    Parallel,
}

impl Parallelism {
    /// Whether work actually fans out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Self::Parallel
    }

    /// `items.iter().map(f).collect()`, in input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Self::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Like [`map`](Self::map) for fallible work; returns the first error in input order.
    pub fn try_map<T, R, E, F>(self, items: &[T], f: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_strategies_agree() {
        let v: Vec<u64> = (0..10_000).collect();
        let a = Parallelism::Sequential.map(&v, |x| x * x);
        let b = Parallelism::Parallel.map(&v, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(a[9_999], 9_999 * 9_999);
    }

    #[test]
    fn try_map_reports_first_error() {
        let v = [1, 2, -3, 4, -5];
        let r: Result<Vec<i32>, i32> =
            Parallelism::Parallel.try_map(&v, |&x| if x < 0 { Err(x) } else { Ok(x) });
        assert_eq!(r, Err(-3));
    }

    #[test]
    fn sequential_is_never_parallel() {
        assert!(!Parallelism::Sequential.is_parallel());
        assert_eq!(
            Parallelism::Parallel.is_parallel(),
            cfg!(feature = "parallel")
        );
    }
}
