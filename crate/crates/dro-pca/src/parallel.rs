//! Batch helpers: rayon-backed with the default `parallel` feature,
//! plain loops without it. Outputs keep input order either way, so results
//! are identical across both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `inputs`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn run_batch<T, U, F>(inputs: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    inputs.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch<T, U, F>(inputs: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    inputs.into_iter().map(f).collect()
}

/// Always-sequential twin of [`run_batch`], kept for benchmarking the
/// parallel speedup from the same binary.
pub fn run_batch_sequential<T, U, F>(inputs: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    inputs.into_iter().map(f).collect()
}
