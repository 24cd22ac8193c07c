//! Sequential/parallel dispatch for the data-parallel loops.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs on
//! the rayon global pool. Without it, `Parallel` degrades to the sequential
//! path. Both paths visit indices in a fixed order for reductions and produce
//! bit-identical results.

/// How a data-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// True when this execution mode will actually use worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub(crate) fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Maps `f` over `0..n` and folds with an associative `combine`.
///
/// `combine` must be associative for the parallel and sequential results to
/// agree; callers use index tie-breaks so it is also insensitive to grouping.
pub(crate) fn map_reduce<T, F, C>(n: u64, exec: Execution, identity: T, f: F, combine: C) -> T
where
    T: Send + Sync + Clone,
    F: Fn(u64) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| identity.clone(), &combine);
    }
    let _ = exec;
    (0..n).map(f).fold(identity, combine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_keeps_order() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let v = map_indexed(1000, exec, |i| i * 3);
            assert!(v.iter().enumerate().all(|(i, &x)| x == i * 3));
        }
    }

    #[test]
    fn map_reduce_agrees_across_modes() {
        let pick = |a: (i64, u64), b: (i64, u64)| {
            if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
                a
            } else {
                b
            }
        };
        let score = |i: u64| (((i * 7919) % 113) as i64, i);
        let s = map_reduce(
            50_000,
            Execution::Sequential,
            (i64::MIN, u64::MAX),
            score,
            pick,
        );
        let p = map_reduce(
            50_000,
            Execution::Parallel,
            (i64::MIN, u64::MAX),
            score,
            pick,
        );
        assert_eq!(s, p);
        assert_eq!(s.0, 112);
    }
}
