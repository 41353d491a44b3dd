//! Execution strategy for the data-parallel kernels.
//!
//! Every kernel partitions its output into disjoint chunks (one per
//! sample-channel plane) and each chunk is accumulated in a fixed order, so
//! sequential and parallel execution produce bit-identical results.

/// How a kernel distributes its independent output chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, and falls
    /// back to [`Execution::Sequential`] otherwise.
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

/// Below this many multiply-adds per call, thread dispatch costs more than it saves.
pub(crate) const PARALLEL_MIN_WORK: usize = 1 << 15;

impl Execution {
    pub(crate) fn for_work(self, work: usize) -> Self {
        if work < PARALLEL_MIN_WORK {
            Execution::Sequential
        } else {
            self
        }
    }

    /// Apply `f(index, chunk)` to consecutive `chunk_len`-sized chunks of `data`.
    pub(crate) fn for_each_chunk<T, F>(self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Send + Sync,
    {
        if chunk_len == 0 {
            return;
        }
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                data.par_chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
            }
            _ => data.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c)),
        }
    }
}
