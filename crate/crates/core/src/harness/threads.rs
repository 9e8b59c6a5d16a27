use rayon::prelude::*;

use crate::error::{invalid, Result};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "GPSCALE_THREADS";

/// Value of `GPSCALE_THREADS`, or the number of available cores when unset.
pub fn configured_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn thread_pool() -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(configured_threads()?)
        .build()
        .map_err(|e| invalid(format!("cannot start thread pool: {e}")))
}

/// Applies `f` to every item on the configured pool; results keep input order.
pub fn parallel_map<T, R, F>(items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    Ok(thread_pool()?.install(|| items.into_par_iter().map(f).collect()))
}
