//! Bounded worker pool for per-frame, per-pair and per-window work items.
//!
//! With the `parallel` feature the work runs on a dedicated rayon pool of
//! `parallelism` threads; without it, or with `parallelism == 1`, items run
//! in order on the calling thread. Results always come back in item order.

use crate::error::Result;

pub struct Executor {
    threads: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("threads", &self.threads).finish()
    }
}

impl Executor {
    /// `parallelism == 0` uses every available core.
    pub fn new(parallelism: usize) -> Result<Self> {
        let threads = if parallelism == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            parallelism
        };
        #[cfg(feature = "parallel")]
        {
            let pool = if threads > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build()
                        .map_err(|e| crate::Error::InvalidParam(format!("cannot start {threads} worker threads: {e}")))?,
                )
            } else {
                None
            };
            Ok(Executor { threads, pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            // built without the `parallel` feature: always sequential
            let _ = threads;
            Ok(Executor { threads: 1 })
        }
    }

    pub fn sequential() -> Self {
        Executor {
            threads: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Apply `f` to every index in `0..n`.
    pub fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }

    /// Like [`Executor::map`], stopping at the first error in item order.
    pub fn try_map<R, F>(&self, n: usize, f: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(usize) -> Result<R> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}
