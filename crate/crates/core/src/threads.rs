//! Worker-count configuration.

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "UHDGOF_THREADS";

/// Parsed value of [`THREADS_ENV`]; `None` when unset, empty or not a
/// positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// Sizes the global pool from [`THREADS_ENV`]. Returns the thread count in
/// effect; a pool that already exists is left alone.
pub fn init_thread_pool() -> usize {
    if let Some(n) = threads_from_env() {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("global thread pool already initialized");
        }
    }
    rayon::current_num_threads()
}
