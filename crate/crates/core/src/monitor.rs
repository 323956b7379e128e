//! Two-phase monitoring: fit a background precision once from clean history,
//! then score fixed-size windows of new observations against it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CsadError, Result};
use crate::estimator::{empirical_covariance, solve, AdmmConfig};
use crate::evaluation::{detected_change_edges, EdgeSet, Method, DEFAULT_EDGE_THRESHOLD};
use crate::numerics::SymMatrix;

pub const DEFAULT_WINDOW_SIZE: usize = 500;
pub const DEFAULT_FLAG_MIN_EDGES: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub window_size: usize,
    pub stride: usize,
    /// Per-window penalty; overrides `admm.lambda`.
    pub lambda: f64,
    pub admm: AdmmConfig,
    pub edge_threshold: f64,
    /// A window is flagged once it reports at least this many change edges.
    pub flag_min_edges: usize,
    /// Centered covariance, applied to background fit and windows alike.
    pub center: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        let admm = AdmmConfig::default();
        MonitorConfig {
            window_size: DEFAULT_WINDOW_SIZE,
            stride: DEFAULT_WINDOW_SIZE,
            lambda: admm.lambda,
            admm,
            edge_threshold: DEFAULT_EDGE_THRESHOLD,
            flag_min_edges: DEFAULT_FLAG_MIN_EDGES,
            center: false,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(CsadError::InvalidConfig("window_size must be >= 2".into()));
        }
        if self.stride < 1 {
            return Err(CsadError::InvalidConfig("stride must be >= 1".into()));
        }
        if !(self.edge_threshold >= 0.0 && self.edge_threshold.is_finite()) {
            return Err(CsadError::InvalidConfig("edge_threshold must be finite and >= 0".into()));
        }
        self.window_admm().validate()
    }

    fn window_admm(&self) -> AdmmConfig {
        self.admm.with_lambda(self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub window_index: usize,
    pub start_row: usize,
    /// Exclusive.
    pub end_row: usize,
    pub detected_edges: EdgeSet,
    pub flagged: bool,
    pub converged: bool,
    pub iterations: usize,
}

/// Number of full windows: `floor((n_rows − window_size)/stride) + 1`, or 0
/// when the stream is shorter than one window.
pub fn window_count(n_rows: usize, window_size: usize, stride: usize) -> usize {
    if n_rows < window_size || stride == 0 {
        0
    } else {
        (n_rows - window_size) / stride + 1
    }
}

/// Background precision from anomaly-free data: the sparse Z iterate of a
/// graphical-lasso solve (Θ_b = 0) at penalty `lambda_b`.
pub fn fit_background(data: &Dataset, lambda_b: f64, config: &AdmmConfig, center: bool) -> Result<SymMatrix> {
    if data.n_rows() < 2 {
        return Err(CsadError::InvalidConfig("background fit needs at least 2 rows".into()));
    }
    let s = empirical_covariance(data, center)?;
    let report = solve(&s, &SymMatrix::zeros(s.dim()), &config.with_lambda(lambda_b))?;
    if !report.converged {
        return Err(CsadError::NotConverged {
            iterations: report.iterations,
        });
    }
    Ok(report.z_hat)
}

/// Scores one window `[start, start + window_size)` of `stream`.
pub fn score_window(
    stream: &Dataset,
    theta_b: &SymMatrix,
    config: &MonitorConfig,
    window_index: usize,
) -> Result<WindowReport> {
    let start_row = window_index * config.stride;
    let end_row = start_row + config.window_size;
    let window = stream.slice_rows(start_row, end_row)?;
    let s = empirical_covariance(&window, config.center)?;
    let report = solve(&s, theta_b, &config.window_admm())?;
    let detected_edges = detected_change_edges(&report, theta_b, Method::Csad, config.edge_threshold)?;
    Ok(WindowReport {
        window_index,
        start_row,
        end_row,
        flagged: detected_edges.len() >= config.flag_min_edges,
        detected_edges,
        converged: report.converged,
        iterations: report.iterations,
    })
}

/// Slides full windows over `stream` at offsets `0, stride, 2·stride, …`;
/// trailing partial windows are dropped. Windows are solved on the current
/// rayon pool and returned in window order.
pub fn run_monitor(stream: &Dataset, theta_b: &SymMatrix, config: &MonitorConfig) -> Result<Vec<WindowReport>> {
    config.validate()?;
    if stream.n_cols() != theta_b.dim() {
        return Err(CsadError::DimensionMismatch {
            expected: theta_b.dim(),
            found: stream.n_cols(),
        });
    }
    if stream.n_rows() < config.window_size {
        return Err(CsadError::InvalidConfig(format!(
            "stream has {} rows, fewer than window_size {}",
            stream.n_rows(),
            config.window_size
        )));
    }
    let count = window_count(stream.n_rows(), config.window_size, config.stride);
    (0..count)
        .into_par_iter()
        .map(|k| score_window(stream, theta_b, config, k))
        .collect()
}
