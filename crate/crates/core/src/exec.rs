//! Data-parallel execution with a sequential fallback.
//!
//! Every batch loop in the crate (corpus generation, kernel rows, sweeps,
//! closed-loop boards) goes through [`Execution`]. With the `parallel`
//! feature disabled, `Execution::Parallel` degrades to the sequential path.
//! Results are always returned in input order, so reductions over them are
//! deterministic regardless of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this build can actually run work on multiple threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Fills `out` in chunks of `chunk` elements; `f` receives the chunk index.
    pub fn fill_chunks<T, F>(self, out: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
            return;
        }
        out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&xs, |x| x * x);
        let par = Execution::Parallel.map(&xs, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(Execution::Sequential.map_range(17, |i| i + 1), Execution::Parallel.map_range(17, |i| i + 1));
    }

    #[test]
    fn chunked_fill_matches() {
        let mut a = vec![0usize; 103];
        let mut b = vec![0usize; 103];
        Execution::Sequential.fill_chunks(&mut a, 10, |ci, c| {
            for (k, v) in c.iter_mut().enumerate() {
                *v = ci * 10 + k;
            }
        });
        Execution::Parallel.fill_chunks(&mut b, 10, |ci, c| {
            for (k, v) in c.iter_mut().enumerate() {
                *v = ci * 10 + k;
            }
        });
        assert_eq!(a, b);
        assert_eq!(a[102], 102);
    }
}
