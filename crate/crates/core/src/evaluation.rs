//! Edge-level scoring of detected structural change and the CSAD/BSAD
//! λ-sweep.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::Dataset;
use crate::error::{CsadError, Result};
use crate::estimator::{empirical_covariance, solve, AdmmConfig, SolveReport};
use crate::numerics::SymMatrix;
use crate::simulator::GgmScenario;

pub const DEFAULT_EDGE_THRESHOLD: f64 = 1e-6;

/// Unordered node pairs `{i, j}` with `i ≠ j`, stored as `(min, max)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeSet {
    pairs: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `{i, j}`; self-loops are ignored and reported as `false`.
    pub fn insert(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        self.pairs.insert((i.min(j), i.max(j)))
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut set = EdgeSet::new();
        for (i, j) in pairs {
            set.insert(i, j);
        }
        set
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i.min(j), i.max(j)))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs in ascending `(i, j)` order with `i < j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn intersection_len(&self, other: &EdgeSet) -> usize {
        self.pairs.intersection(&other.pairs).count()
    }

    /// Largest node index mentioned, if any.
    pub fn max_node(&self) -> Option<usize> {
        self.pairs.iter().map(|&(_, j)| j).max()
    }
}

impl Serialize for EdgeSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.pairs.iter().map(|&(i, j)| [i, j]))
    }
}

impl<'de> Deserialize<'de> for EdgeSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: Vec<[usize; 2]> = Vec::deserialize(d)?;
        if let Some(bad) = raw.iter().find(|e| e[0] == e[1]) {
            return Err(serde::de::Error::custom(format!("self-loop [{}, {}]", bad[0], bad[1])));
        }
        Ok(EdgeSet::from_pairs(raw.into_iter().map(|[i, j]| (i, j))))
    }
}

/// `{ {i,j} : i < j, |mᵢⱼ| > threshold }`.
pub fn edge_set(m: &SymMatrix, threshold: f64) -> EdgeSet {
    let p = m.dim();
    let mut set = EdgeSet::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if m.get(i, j).abs() > threshold {
                set.insert(i, j);
            }
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Contrastive: penalized toward a learned background precision.
    #[serde(rename = "CSAD")]
    Csad,
    /// Baseline: plain graphical lasso on the foreground data.
    #[serde(rename = "BSAD")]
    Bsad,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Csad => "CSAD",
            Method::Bsad => "BSAD",
        })
    }
}

/// Change edges reported by a solve.
///
/// CSAD reads the support of `z_hat − Θ_b`. BSAD reads the support of
/// `z_hat` itself; its solve ran against a zero background, so every
/// foreground edge counts as a detection.
pub fn detected_change_edges(
    report: &SolveReport,
    theta_b: &SymMatrix,
    method: Method,
    threshold: f64,
) -> Result<EdgeSet> {
    report.z_hat.check_same_dim(theta_b)?;
    Ok(match method {
        Method::Csad => edge_set(&(&report.z_hat - theta_b), threshold),
        Method::Bsad => edge_set(&report.z_hat, threshold),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Confusion counts of `detected` against `truth`.
///
/// An empty detection set has precision 1.0; an empty truth set has
/// recall 1.0.
pub fn precision_recall(detected: &EdgeSet, truth: &EdgeSet) -> PrecisionRecall {
    let tp = detected.intersection_len(truth);
    let fp = detected.len() - tp;
    let fn_ = truth.len() - tp;
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    PrecisionRecall {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        tp,
        fp,
        fn_,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub lambda: f64,
    pub method: Method,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub edge_threshold: f64,
    pub center: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            edge_threshold: DEFAULT_EDGE_THRESHOLD,
            center: false,
        }
    }
}

/// Scores CSAD (against `theta_b`) and BSAD (against zero) at every λ in
/// `grid`. Output is ordered by (grid position, method) regardless of how
/// the solves were scheduled.
///
/// Solves run on the current rayon pool; wrap the call in
/// [`crate::with_workers`] to bound parallelism.
pub fn lambda_sweep(
    scenario: &GgmScenario,
    fg_data: &Dataset,
    theta_b: &SymMatrix,
    grid: &[f64],
    config: &AdmmConfig,
    options: &SweepOptions,
) -> Result<Vec<SweepRecord>> {
    if grid.is_empty() {
        return Err(CsadError::InvalidConfig("lambda grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(CsadError::InvalidConfig(format!("invalid lambda {bad}")));
    }
    config.validate()?;
    let s = empirical_covariance(fg_data, options.center)?;
    s.check_same_dim(theta_b)?;
    if scenario.p != s.dim() {
        return Err(CsadError::DimensionMismatch {
            expected: scenario.p,
            found: s.dim(),
        });
    }
    let zero = SymMatrix::zeros(s.dim());

    let jobs: Vec<(f64, Method)> = grid
        .iter()
        .flat_map(|&l| [(l, Method::Csad), (l, Method::Bsad)])
        .collect();

    jobs.par_iter()
        .map(|&(lambda, method)| {
            let background = match method {
                Method::Csad => theta_b,
                Method::Bsad => &zero,
            };
            let report = solve(&s, background, &config.with_lambda(lambda))?;
            let detected = detected_change_edges(&report, background, method, options.edge_threshold)?;
            let pr = precision_recall(&detected, &scenario.true_change_edges);
            Ok(SweepRecord {
                lambda,
                method,
                tp: pr.tp,
                fp: pr.fp,
                fn_: pr.fn_,
                precision: pr.precision,
                recall: pr.recall,
                iterations: report.iterations,
                converged: report.converged,
            })
        })
        .collect()
}

/// Mean precision/recall per (λ, method) over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRecord {
    pub lambda: f64,
    pub method: Method,
    pub precision: f64,
    pub recall: f64,
    pub runs: usize,
    pub converged_runs: usize,
}

/// Averages sweeps that share one grid. Records are matched by position,
/// so every run must have the same (λ, method) sequence.
pub fn mean_over_runs(runs: &[Vec<SweepRecord>]) -> Result<Vec<MeanRecord>> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    for run in runs {
        if run.len() != first.len()
            || run
                .iter()
                .zip(first)
                .any(|(a, b)| a.lambda != b.lambda || a.method != b.method)
        {
            return Err(CsadError::InvalidConfig("sweeps do not share a grid".into()));
        }
    }
    let k = runs.len() as f64;
    Ok(first
        .iter()
        .enumerate()
        .map(|(idx, head)| {
            let column = runs.iter().map(|r| &r[idx]);
            MeanRecord {
                lambda: head.lambda,
                method: head.method,
                precision: column.clone().map(|r| r.precision).sum::<f64>() / k,
                recall: column.clone().map(|r| r.recall).sum::<f64>() / k,
                runs: runs.len(),
                converged_runs: column.filter(|r| r.converged).count(),
            }
        })
        .collect())
}

/// `count` values from `min` to `max` inclusive, geometric when `log`.
pub fn lambda_grid(min: f64, max: f64, count: usize, log: bool) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(CsadError::InvalidConfig("grid count must be >= 1".into()));
    }
    if !(min.is_finite() && max.is_finite() && min >= 0.0 && max >= min) {
        return Err(CsadError::InvalidConfig(format!("bad grid range [{min}, {max}]")));
    }
    if log && min <= 0.0 {
        return Err(CsadError::InvalidConfig("log grid needs min > 0".into()));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let steps = (count - 1) as f64;
    Ok((0..count)
        .map(|k| {
            let t = k as f64 / steps;
            if k == count - 1 {
                max
            } else if log {
                (min.ln() + t * (max.ln() - min.ln())).exp()
            } else {
                min + t * (max - min)
            }
        })
        .collect())
}
