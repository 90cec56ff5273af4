//! Seeded Monte-Carlo experiments over the quantization schemes.
//!
//! Trial `t` draws its channel from stream `(seed, CHANNEL, t)` and, for
//! fresh codebooks, its codebook from `(seed, CODEBOOK, t)`. Trials run in
//! parallel and are reduced in trial order, so output is independent of the
//! thread count.

mod config;
mod report;
mod sweep;
mod validate;

pub use config::{parse_bits, parse_schemes, CodebookPolicy, ExperimentConfig, Scenario, Scheme};
pub use report::{
    aggregate, emit_csv, format_csv, predict, run_cdma_sweep, run_complexity_profile, run_mimo_sweep, ResultRow,
    CSV_HEADER,
};
pub use sweep::{simulate, simulate_cdma, simulate_mimo, Outcome, SweepData};
pub use validate::{conditional_overlap_samples, overlap_trials, summarize_overlap, OverlapSummary, OverlapTrial};

use crate::error::{Error, Result};

/// Environment variable capping worker threads (0 or unset = one per core).
pub const THREADS_ENV: &str = "FBQ_THREADS";

/// Configures the global worker pool from [`THREADS_ENV`].
pub fn init_thread_pool() -> Result<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}
