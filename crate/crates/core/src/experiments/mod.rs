pub mod cv;
pub mod risk;
pub mod synthetic;

pub use cv::{fold_assignment, kfold_cv, CvReport, SelectionRule};
pub use risk::{risk_scaling_study, RiskRow, RiskSettings};
pub use synthetic::{generate_synthetic, SyntheticSpec, SYNTHETIC_P, SYNTHETIC_Q};

/// Runs `f` on a rayon pool capped by `CRAM_THREADS` when it is set.
pub fn with_thread_limit<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var("CRAM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0);
    match threads.and_then(|t| rayon::ThreadPoolBuilder::new().num_threads(t).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}
