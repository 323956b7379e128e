//! Synthetic sparse Gaussian graphical models.
//!
//! A scenario is a background precision `P_b`, a sparse change `P_δ` and the
//! foreground `P_f = P_b + P_δ`, all generated from one 64-bit seed.
//!
//! Randomness comes from ChaCha8 with one stream per artifact: the seed picks
//! the key and [`stream`] constants pick the ChaCha stream id, so each
//! matrix and dataset draws from an independent, platform-stable sequence.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CsadError, Result};
use crate::evaluation::{edge_set, EdgeSet};
use crate::numerics::{cholesky, sym_eig, SymMatrix};

pub const DEFAULT_MIN_EIG: f64 = 0.1;
/// Off-diagonal magnitudes are drawn from `[MIN_EDGE_WEIGHT, MAX_EDGE_WEIGHT]`.
pub const MIN_EDGE_WEIGHT: f64 = 0.2;
pub const MAX_EDGE_WEIGHT: f64 = 1.0;

/// ChaCha stream ids for the artifacts of a scenario.
pub mod stream {
    pub const BACKGROUND_PRECISION: u64 = 0;
    pub const CHANGE_PRECISION: u64 = 1;
    pub const BACKGROUND_SAMPLES: u64 = 2;
    pub const FOREGROUND_SAMPLES: u64 = 3;
    /// Free for callers that need further independent draws.
    pub const AUXILIARY: u64 = 4;
}

/// Generator keyed by `seed` on ChaCha stream `stream_id`.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

#[derive(Debug, Clone)]
pub struct GgmScenario {
    pub p: usize,
    pub p_b: SymMatrix,
    pub p_delta: SymMatrix,
    pub p_f: SymMatrix,
    /// Off-diagonal support of `p_delta`.
    pub true_change_edges: EdgeSet,
    pub seed: u64,
    pub bg_density: f64,
    pub delta_density: f64,
}

fn check_density(density: f64) -> Result<()> {
    if (0.0..=1.0).contains(&density) {
        Ok(())
    } else {
        Err(CsadError::InvalidConfig(format!(
            "density must lie in [0, 1], got {density}"
        )))
    }
}

/// Sparse positive-definite matrix with Erdős–Rényi off-diagonal support.
///
/// Each pair `i < j` carries an edge with probability `density`; its weight
/// is uniform in ±[0.2, 1]. The zero-diagonal result is then shifted by
/// `(|λ_min| + min_eig)·I` whenever `λ_min < min_eig`.
pub fn gen_sparse_pd(p: usize, density: f64, seed: u64, min_eig: f64) -> Result<SymMatrix> {
    gen_sparse_pd_from(&mut stream_rng(seed, stream::BACKGROUND_PRECISION), p, density, min_eig)
}

pub fn gen_sparse_pd_from<R: Rng>(rng: &mut R, p: usize, density: f64, min_eig: f64) -> Result<SymMatrix> {
    if p == 0 {
        return Err(CsadError::InvalidConfig("p must be >= 1".into()));
    }
    check_density(density)?;
    if !(min_eig > 0.0 && min_eig.is_finite()) {
        return Err(CsadError::InvalidConfig("min_eig must be finite and > 0".into()));
    }
    let mut m = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random::<f64>() < density {
                let magnitude = rng.random_range(MIN_EDGE_WEIGHT..=MAX_EDGE_WEIGHT);
                let w = if rng.random_bool(0.5) { magnitude } else { -magnitude };
                m[(i, j)] = w;
                m[(j, i)] = w;
            }
        }
    }
    let m = SymMatrix::new(m)?;
    let lambda_min = sym_eig(&m)?.min_eigenvalue();
    if lambda_min >= min_eig {
        return Ok(m);
    }
    let shift = lambda_min.abs() + min_eig;
    SymMatrix::new(m.as_matrix() + DMatrix::<f64>::identity(p, p) * shift)
}

/// `P_f = P_b + P_δ`, verified positive definite.
pub fn compose_foreground(p_b: &SymMatrix, p_delta: &SymMatrix) -> Result<SymMatrix> {
    p_b.check_same_dim(p_delta)?;
    let p_f = p_b + p_delta;
    cholesky(&p_f)?;
    Ok(p_f)
}

/// `n` zero-mean draws from `N(0, precision⁻¹)`.
///
/// With `precision = L Lᵀ`, each row is `L⁻ᵀ z` for standard normal `z`; the
/// covariance is never formed.
pub fn sample_mvn(precision: &SymMatrix, n: usize, seed: u64) -> Result<Dataset> {
    sample_mvn_from(&mut stream_rng(seed, stream::BACKGROUND_SAMPLES), precision, n)
}

pub fn sample_mvn_from<R: Rng>(rng: &mut R, precision: &SymMatrix, n: usize) -> Result<Dataset> {
    if n == 0 {
        return Err(CsadError::InvalidConfig("sample count must be >= 1".into()));
    }
    let l = cholesky(precision)?;
    let p = precision.dim();
    let mut out = DMatrix::<f64>::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let x = l.solve_transpose(&z)?;
        for (j, v) in x.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Dataset::new(out)
}

/// Builds a full scenario using [`DEFAULT_MIN_EIG`] for both matrices.
pub fn make_scenario(p: usize, bg_density: f64, delta_density: f64, seed: u64) -> Result<GgmScenario> {
    if p < 2 {
        return Err(CsadError::InvalidConfig("scenario needs p >= 2".into()));
    }
    check_density(bg_density)?;
    check_density(delta_density)?;
    let p_b = gen_sparse_pd_from(
        &mut stream_rng(seed, stream::BACKGROUND_PRECISION),
        p,
        bg_density,
        DEFAULT_MIN_EIG,
    )?;
    let p_delta = if delta_density == 0.0 {
        SymMatrix::zeros(p)
    } else {
        gen_sparse_pd_from(
            &mut stream_rng(seed, stream::CHANGE_PRECISION),
            p,
            delta_density,
            DEFAULT_MIN_EIG,
        )?
    };
    let p_f = compose_foreground(&p_b, &p_delta)?;
    let true_change_edges = edge_set(&p_delta, 0.0);
    Ok(GgmScenario {
        p,
        p_b,
        p_delta,
        p_f,
        true_change_edges,
        seed,
        bg_density,
        delta_density,
    })
}

impl GgmScenario {
    pub fn sample_background(&self, n: usize) -> Result<Dataset> {
        sample_mvn_from(&mut stream_rng(self.seed, stream::BACKGROUND_SAMPLES), &self.p_b, n)
    }

    pub fn sample_foreground(&self, n: usize) -> Result<Dataset> {
        sample_mvn_from(&mut stream_rng(self.seed, stream::FOREGROUND_SAMPLES), &self.p_f, n)
    }

    pub fn metadata(&self) -> ScenarioMetadata {
        ScenarioMetadata {
            p: self.p,
            bg_density: self.bg_density,
            delta_density: self.delta_density,
            seed: self.seed,
            min_eig: DEFAULT_MIN_EIG,
            true_change_edges: self.true_change_edges.clone(),
        }
    }
}

/// JSON-facing description of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetadata {
    pub p: usize,
    pub bg_density: f64,
    pub delta_density: f64,
    pub seed: u64,
    pub min_eig: f64,
    pub true_change_edges: EdgeSet,
}
