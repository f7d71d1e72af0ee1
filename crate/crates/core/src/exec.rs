//! Execution policy for batch APIs.
//!
//! Every batch operation takes an [`Exec`] and returns results in input order,
//! so the choice of policy (and the worker count) never changes an output.

use std::ops::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Data-parallel on the current rayon pool. Falls back to sequential when
    /// the crate is built without the `parallel` feature.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps `f` over an index range, preserving order.
    pub fn map_range<R, F>(self, range: Range<u64>, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return range.into_par_iter().map(f).collect();
        }
        range.map(f).collect()
    }
}

/// Runs `f` with at most `workers` threads for [`Exec::Parallel`] batches.
///
/// `workers == 0` means the default pool. Without the `parallel` feature the
/// closure simply runs on the calling thread.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool construction");
        return pool.install(f);
    }
    let _ = workers;
    f()
}

/// Splits `0..len` into contiguous chunks of at most `chunk` elements.
pub fn chunks(len: u64, chunk: u64) -> Vec<Range<u64>> {
    let chunk = chunk.max(1);
    let mut out = Vec::with_capacity(len.div_ceil(chunk) as usize);
    let mut start = 0;
    while start < len {
        let end = (start + chunk).min(len);
        out.push(start..end);
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_policies_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = Exec::Sequential.map(&xs, |x| x * x);
        let b = Exec::Parallel.map(&xs, |x| x * x);
        assert_eq!(a, b);
        let c = with_workers(3, || Exec::Parallel.map_range(0..1000, |x| x * x));
        assert_eq!(a, c);
    }

    #[test]
    fn chunking_covers_range() {
        let cs = chunks(10, 3);
        assert_eq!(cs, vec![0..3, 3..6, 6..9, 9..10]);
        assert!(chunks(0, 3).is_empty());
    }
}
