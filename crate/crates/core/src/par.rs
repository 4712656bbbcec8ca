//! Order-preserving data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) [`map`] runs on the rayon pool;
//! without it, or through [`map_sequential`], items are processed in order on
//! the calling thread. Results always come back in input order.

/// Maps `f` over `items`, in parallel when the `parallel` feature is enabled.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

pub fn map_sequential<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Runs `f` with at most `threads` workers. `None` keeps the global pool.
///
/// Without the `parallel` feature this simply calls `f`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            return pool.install(f);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    f()
}

/// True when [`map`] dispatches to rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let ys = map(&xs, |x| x * x);
        assert_eq!(ys, map_sequential(&xs, |x| x * x));
        assert_eq!(ys[999], 999 * 999);
    }

    #[test]
    fn thread_cap_runs_closure() {
        let total: u64 = with_threads(Some(2), || map(&[1u64, 2, 3], |x| x + 1).iter().sum());
        assert_eq!(total, 9);
    }
}
