//! Switchable data-parallel execution.
//!
//! With the `parallel` feature (on by default) the helpers fan work out
//! through rayon; without the feature they compile to plain loops. A
//! runtime switch forces the sequential path even in parallel builds so
//! benchmarks can compare both on one binary. Callers only hand these
//! helpers pure, order-independent work.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::diffpoly::DiffPoly;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces all helpers onto the sequential path when `on` is true.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

/// True when either the feature is off or sequential mode is forced.
pub fn is_sequential() -> bool {
    if cfg!(not(feature = "parallel")) {
        return true;
    }
    FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Maps `f` over `items`, preserving order.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !is_sequential() {
        return items.par_iter().map(&f).collect();
    }
    items.iter().map(&f).collect()
}

/// Maps `f` over `items` and sums the resulting polynomials.
pub fn map_sum<T, F>(items: &[T], f: F) -> DiffPoly
where
    T: Sync,
    F: Fn(&T) -> DiffPoly + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !is_sequential() {
        return items.par_iter().map(&f).reduce(DiffPoly::zero, |a, b| a + b);
    }
    items.iter().map(&f).sum()
}
