//! Shared formatting and concurrency helpers.

use std::sync::OnceLock;

/// Optional dedicated pool sized by `CASCADE_BRANCH_THREADS`; `None` means
/// use the default rayon pool.
fn thread_pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        std::env::var("CASCADE_BRANCH_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .map(|n| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .expect("worker thread pool")
            })
    })
    .as_ref()
}

/// Runs `f` inside the capped pool when `CASCADE_BRANCH_THREADS` is set.
pub(crate) fn run_parallel<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match thread_pool() {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Format `x` with `dp` decimal places, rounding halves away from zero.
///
/// Report columns reproduce printed reference tables, which round 4.28125
/// to 4.2813; the standard formatter's round-half-even would give 4.2812.
pub(crate) fn fmt_dp(x: f64, dp: usize) -> String {
    let scale = 10f64.powi(dp as i32);
    let rounded = (x * scale).round() / scale;
    // -0.0 prints as "-0.0000"; normalize.
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:.dp$}")
}

/// `steps` evenly spaced values over `[lo, hi]`, endpoints included.
pub(crate) fn lin_space(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    assert!(steps >= 2, "lin_space needs at least 2 steps");
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}
