//! Parallel map and timing hooks.

use alloc::vec::Vec;

/// Maps `f` over `items`, in parallel when the `std` feature is on.
/// Output order always matches input order.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "std"))]
    {
        items.iter().map(f).collect()
    }
}

/// Monotonic clock in seconds. The default reports zero everywhere.
pub trait Clock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Clock that never advances.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {}
