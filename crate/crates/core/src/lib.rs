//! Contrastive structured anomaly detection for Gaussian graphical models.
//!
//! A foreground precision matrix is estimated by an L1-penalized maximum
//! likelihood that shrinks toward a known background precision rather than
//! toward zero, so the sparse difference exposes structural change. The
//! crate bundles the ADMM solver, a synthetic-model simulator, edge-level
//! evaluation and a sliding-window monitor.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod io;
pub mod monitor;
pub mod numerics;
pub mod simulator;

pub use dataset::Dataset;
pub use error::{CsadError, Result};
pub use estimator::{solve, AdmmConfig, SolveReport};
pub use evaluation::{EdgeSet, Method, SweepRecord};
pub use numerics::SymMatrix;

/// Runs `f` on a dedicated rayon pool with `workers` threads, or on the
/// global pool when `workers` is `None`.
pub fn with_workers<T, F>(workers: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(CsadError::InvalidConfig("workers must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CsadError::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
