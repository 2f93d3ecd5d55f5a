//! Data-parallel map helpers. With the `parallel` feature the work fans out
//! over rayon; without it the same call sites run sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, preserving index order in the output.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`map_indexed`], kept unconditionally so callers and
/// benches can compare both paths.
pub(crate) fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Runs `f` over mutable per-index slices carved out of `rows`.
pub(crate) fn for_each_slice<T, F>(rows: Vec<(usize, &mut [T])>, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        rows.into_par_iter().for_each(|(i, s)| f(i, s));
    }
    #[cfg(not(feature = "parallel"))]
    {
        rows.into_iter().for_each(|(i, s)| f(i, s));
    }
}

pub(crate) fn for_each_slice_seq<T, F>(rows: Vec<(usize, &mut [T])>, f: F)
where
    F: Fn(usize, &mut [T]),
{
    rows.into_iter().for_each(|(i, s)| f(i, s));
}
