//! Execution strategy for data-parallel loops.
//!
//! Every combinator here splits work the same way in both modes (fixed
//! chunk boundaries, in-order reduction), so switching between parallel and
//! sequential execution never changes a result bit.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Applies `f` to every item, keeping input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
        }
    }

    /// Same as [`Exec::map`] but passes the item index as well.
    pub fn map_indexed<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items
                .par_iter()
                .enumerate()
                .map(|(i, t)| f(i, t))
                .collect(),
        }
    }

    /// Folds fixed-size chunks independently, then reduces the per-chunk
    /// accumulators left to right.
    pub fn fold_chunks<T, A, I, F, R>(
        self,
        items: &[T],
        chunk: usize,
        init: I,
        fold: F,
        reduce: R,
    ) -> A
    where
        T: Sync,
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(&mut A, usize, &T) + Sync + Send,
        R: Fn(&mut A, A),
    {
        let chunk = chunk.max(1);
        let run = |(ci, c): (usize, &[T])| {
            let mut acc = init();
            for (j, t) in c.iter().enumerate() {
                fold(&mut acc, ci * chunk + j, t);
            }
            acc
        };
        let parts: Vec<A> = match self {
            Exec::Sequential => items.chunks(chunk).enumerate().map(run).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items
                .par_chunks(chunk)
                .enumerate()
                .map(run)
                .collect(),
        };
        let mut parts = parts.into_iter();
        let mut total = match parts.next() {
            Some(p) => p,
            None => return init(),
        };
        for p in parts {
            reduce(&mut total, p);
        }
        total
    }
}
