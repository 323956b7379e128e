//! ADMM solver for the contrastive graphical lasso
//!
//! ```text
//! minimize  trace(S Θ) − log det Θ + λ ‖Θ − Θ_b‖₁   over Θ ≻ 0
//! ```
//!
//! split as Θ = Z with scaled dual U. Each iteration performs a spectral
//! Θ-step, an elementwise soft-threshold Z-step around Θ_b, and a dual
//! ascent step on U. With Θ_b = 0 this is the ordinary graphical lasso.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CsadError, Result};
use crate::numerics::{frobenius_norm, soft_threshold, spd_inverse, sym_eig, SymMatrix};

pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_RHO: f64 = 1.0;
pub const DEFAULT_EPS_ABS: f64 = 1e-4;
pub const DEFAULT_EPS_REL: f64 = 1e-2;
pub const DEFAULT_MAX_ITERATIONS: usize = 5000;
pub const DEFAULT_KKT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// L1 weight on Θ − Θ_b.
    pub lambda: f64,
    /// Augmented-Lagrangian penalty, fixed for the whole run.
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iterations: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            lambda: DEFAULT_LAMBDA,
            rho: DEFAULT_RHO,
            eps_abs: DEFAULT_EPS_ABS,
            eps_rel: DEFAULT_EPS_REL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl AdmmConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CsadError::InvalidConfig(msg.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho must be finite and > 0");
        }
        if !(self.eps_abs > 0.0 && self.eps_abs.is_finite()) {
            return bad("eps_abs must be finite and > 0");
        }
        if !(self.eps_rel > 0.0 && self.eps_rel.is_finite()) {
            return bad("eps_rel must be finite and > 0");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be >= 1");
        }
        Ok(())
    }
}

/// Iterates and residuals after one full Θ/Z/U sweep.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub theta: SymMatrix,
    pub z: SymMatrix,
    /// Scaled dual variable.
    pub u: SymMatrix,
    pub iteration: usize,
    /// ‖Θ − Z‖_F
    pub primal_residual: f64,
    /// ‖ρ(Z − Z_old)‖_F
    pub dual_residual: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
}

impl AdmmState {
    fn initial(p: usize) -> Self {
        AdmmState {
            theta: SymMatrix::zeros(p),
            z: SymMatrix::zeros(p),
            u: SymMatrix::zeros(p),
            iteration: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            eps_primal: 0.0,
            eps_dual: 0.0,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.primal_residual <= self.eps_primal && self.dual_residual <= self.eps_dual
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Dense positive-definite iterate from the spectral step.
    pub theta_hat: SymMatrix,
    /// Sparse iterate; `z_hat − Θ_b` has exact zeros.
    pub z_hat: SymMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub residual_trace: Vec<ResidualPoint>,
}

impl SolveReport {
    pub fn final_residuals(&self) -> Option<&ResidualPoint> {
        self.residual_trace.last()
    }
}

/// What an observer sees after each iteration of [`solve_observed`].
pub struct IterationView<'a> {
    pub state: &'a AdmmState,
    /// Right-hand side `ρ(Zⁿ − Uⁿ) − S` the Θ-step was solved against.
    pub theta_rhs: &'a SymMatrix,
    /// Eigenvalues of the new Θ (the diagonal of Θ̃).
    pub theta_eigenvalues: &'a DVector<f64>,
}

/// Sample second-moment matrix with 1/n normalization.
///
/// With `center = false` the data are treated as zero-mean: `S = XᵀX / n`.
/// With `center = true` the column means are removed first.
pub fn empirical_covariance(data: &Dataset, center: bool) -> Result<SymMatrix> {
    if data.is_empty() {
        return Err(CsadError::EmptyDataset);
    }
    let n = data.n_rows() as f64;
    let x = data.as_matrix();
    let gram = if center {
        let mut xc = x.clone();
        for mut col in xc.column_iter_mut() {
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
        }
        xc.tr_mul(&xc)
    } else {
        x.tr_mul(x)
    };
    Ok(SymMatrix::symmetrized(gram / n))
}

/// Closed-form Θ minimizer with its eigenvalues.
fn theta_step(s: &SymMatrix, z: &SymMatrix, u: &SymMatrix, rho: f64) -> Result<(SymMatrix, SymMatrix, DVector<f64>)> {
    s.check_same_dim(z)?;
    s.check_same_dim(u)?;
    let rhs = &(&z.scale(rho) - &u.scale(rho)) - s;
    let eig = sym_eig(&rhs)?;
    let theta_tilde = eig.eigenvalues.map(|l| {
        let root = (l * l + 4.0 * rho).sqrt();
        // Positive root of ρθ² − lθ − 1 = 0; the second form avoids
        // cancellation when l is large and negative.
        if l >= 0.0 {
            (l + root) / (2.0 * rho)
        } else {
            2.0 / (root - l)
        }
    });
    debug_assert!(
        theta_tilde.iter().all(|&t| t > 0.0),
        "theta update produced a non-positive eigenvalue"
    );
    let theta = eig.compose_with(&theta_tilde);
    Ok((theta, rhs, theta_tilde))
}

/// Θ-step: the minimizer of `trace(SΘ) − log det Θ + (ρ/2)‖Θ − Z + U‖²_F`.
///
/// Diagonalizes `ρ(Z − U) − S = Q Λ Qᵀ` and maps each eigenvalue `l` to the
/// positive root of `ρθ − 1/θ = l`.
pub fn theta_update(s: &SymMatrix, z: &SymMatrix, u: &SymMatrix, rho: f64) -> Result<SymMatrix> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(CsadError::InvalidConfig("rho must be > 0".into()));
    }
    theta_step(s, z, u, rho).map(|(theta, _, _)| theta)
}

/// Z-step: `Z = Θ_b + S_{λ/ρ}(Θ + U − Θ_b)`, the exact proximal point of
/// `λ‖Z − Θ_b‖₁` around `Θ + U`.
pub fn z_update(
    theta: &SymMatrix,
    u: &SymMatrix,
    theta_b: &SymMatrix,
    lambda: f64,
    rho: f64,
) -> Result<SymMatrix> {
    theta.check_same_dim(u)?;
    theta.check_same_dim(theta_b)?;
    let kappa = lambda / rho;
    let shifted = theta + u;
    shifted.zip_map(theta_b, |a, b| b + soft_threshold(a - b, kappa))
}

/// Scaled dual ascent: `U ← Θ − Z + U_prev`.
pub fn u_update(theta: &SymMatrix, z: &SymMatrix, u_prev: &SymMatrix) -> Result<SymMatrix> {
    theta.check_same_dim(z)?;
    theta.check_same_dim(u_prev)?;
    Ok(&(theta - z) + u_prev)
}

/// `(eps_primal, eps_dual)` scaled by the current iterates, with `p` the
/// matrix dimension.
pub fn stopping_tolerances(state: &AdmmState, config: &AdmmConfig, p: usize) -> (f64, f64) {
    let base = p as f64 * config.eps_abs;
    let eps_primal = base + config.eps_rel * frobenius_norm(&state.theta).max(frobenius_norm(&state.z));
    let eps_dual = base + config.eps_rel * config.rho * frobenius_norm(&state.u);
    (eps_primal, eps_dual)
}

pub fn solve(s: &SymMatrix, theta_b: &SymMatrix, config: &AdmmConfig) -> Result<SolveReport> {
    solve_observed(s, theta_b, config, |_| {})
}

/// [`solve`] with a callback invoked after every iteration.
pub fn solve_observed(
    s: &SymMatrix,
    theta_b: &SymMatrix,
    config: &AdmmConfig,
    mut observer: impl FnMut(&IterationView<'_>),
) -> Result<SolveReport> {
    config.validate()?;
    s.check_same_dim(theta_b)?;
    let p = s.dim();
    let rho = config.rho;

    let mut state = AdmmState::initial(p);
    let mut trace = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iterations {
        let (theta, rhs, theta_tilde) = theta_step(s, &state.z, &state.u, rho)?;
        let z = z_update(&theta, &state.u, theta_b, config.lambda, rho)?;
        let u = u_update(&theta, &z, &state.u)?;

        state.primal_residual = frobenius_norm(&(&theta - &z));
        state.dual_residual = rho * frobenius_norm(&(&z - &state.z));
        state.theta = theta;
        state.z = z;
        state.u = u;
        state.iteration = iteration;
        let (eps_primal, eps_dual) = stopping_tolerances(&state, config, p);
        state.eps_primal = eps_primal;
        state.eps_dual = eps_dual;

        trace.push(ResidualPoint {
            iteration,
            primal: state.primal_residual,
            dual: state.dual_residual,
            eps_primal,
            eps_dual,
        });
        observer(&IterationView {
            state: &state,
            theta_rhs: &rhs,
            theta_eigenvalues: &theta_tilde,
        });

        if state.is_converged() {
            converged = true;
            break;
        }
    }

    Ok(SolveReport {
        theta_hat: state.theta,
        z_hat: state.z,
        iterations: state.iteration,
        converged,
        residual_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktViolation {
    pub row: usize,
    pub col: usize,
    /// `true` when `ẑᵢⱼ = Θ_b,ᵢⱼ` (subgradient interval condition).
    pub at_background: bool,
    /// Amount by which the condition exceeds zero (before `tol`).
    pub excess: f64,
}

#[derive(Debug, Clone)]
pub struct KktReport {
    pub passed: bool,
    pub max_excess: f64,
    pub violations: Vec<KktViolation>,
}

/// Checks the subgradient optimality conditions `0 ∈ S − Θ⁻¹ + λ ∂‖Θ − Θ_b‖₁`.
///
/// The support pattern comes from `z_hat`, the gradient from `theta_hat`.
/// The inverse is taken through a Cholesky factorization, independently of
/// the spectral path the solver uses.
pub fn kkt_check(
    theta_hat: &SymMatrix,
    z_hat: &SymMatrix,
    s: &SymMatrix,
    theta_b: &SymMatrix,
    lambda: f64,
    tol: f64,
) -> Result<KktReport> {
    theta_hat.check_same_dim(z_hat)?;
    theta_hat.check_same_dim(s)?;
    theta_hat.check_same_dim(theta_b)?;
    let inv = spd_inverse(theta_hat)?;
    let p = theta_hat.dim();
    let mut violations = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    for i in 0..p {
        for j in 0..p {
            let grad = s.get(i, j) - inv.get(i, j);
            let diff = z_hat.get(i, j) - theta_b.get(i, j);
            let at_background = diff == 0.0;
            let excess = if at_background {
                grad.abs() - lambda
            } else {
                (grad + lambda * diff.signum()).abs()
            };
            max_excess = max_excess.max(excess);
            if excess > tol {
                violations.push(KktViolation {
                    row: i,
                    col: j,
                    at_background,
                    excess,
                });
            }
        }
    }
    Ok(KktReport {
        passed: violations.is_empty(),
        max_excess,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn scalar(v: f64) -> SymMatrix {
        SymMatrix::from_row_slice(1, &[v]).unwrap()
    }

    #[test]
    fn covariance_examples() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let s = empirical_covariance(&d, false).unwrap();
        assert_eq!(s.to_rows(), vec![vec![1.0, 2.0], vec![2.0, 4.0]]);

        let d = Dataset::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let s = empirical_covariance(&d, false).unwrap();
        assert_eq!(s.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);

        let d = Dataset::from_rows(&[vec![3.0, -1.0], vec![3.0, -1.0], vec![3.0, -1.0]]).unwrap();
        let s = empirical_covariance(&d, true).unwrap();
        assert_eq!(s.max_abs(), 0.0);

        let empty = Dataset::from_rows(&[]).unwrap();
        assert!(matches!(empirical_covariance(&empty, false), Err(CsadError::EmptyDataset)));
    }

    #[test]
    fn theta_update_scalar_cases() {
        // eigenvalue −1, ρ = 1
        let t = theta_update(&scalar(1.0), &scalar(0.0), &scalar(0.0), 1.0).unwrap().get(0, 0);
        assert!((t - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!((t - 1.0 / t + 1.0).abs() < 1e-12);

        // eigenvalue 3, ρ = 2: ρ(z − u) − s = 2·1.5 − 0 = 3
        let t = theta_update(&scalar(0.0), &scalar(1.5), &scalar(0.0), 2.0).unwrap().get(0, 0);
        assert!((t - (3.0 + 17f64.sqrt()) / 4.0).abs() < 1e-14);
        assert!((2.0 * t - 1.0 / t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn theta_update_zero_rhs_is_identity() {
        let s = SymMatrix::from_row_slice(2, &[1.0, 0.3, 0.3, 2.0]).unwrap();
        let theta = theta_update(&s, &s, &SymMatrix::zeros(2), 1.0).unwrap();
        assert!((theta.as_matrix() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn theta_update_stays_positive_for_very_negative_spectrum() {
        let theta = theta_update(&scalar(1e9), &scalar(0.0), &scalar(0.0), 1.0).unwrap();
        let t = theta.get(0, 0);
        assert!(t > 0.0);
        assert!((t - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn z_update_examples() {
        let theta = scalar(1.0);
        let z = z_update(&theta, &scalar(0.0), &scalar(0.0), 0.4, 1.0).unwrap();
        assert!((z.get(0, 0) - 0.6).abs() < 1e-15);

        let z = z_update(&scalar(2.0), &scalar(0.1), &scalar(2.0), 1.0, 2.0).unwrap();
        assert_eq!(z.get(0, 0), 2.0);

        let theta = SymMatrix::from_row_slice(2, &[1.0, -0.3, -0.3, 2.0]).unwrap();
        let u = SymMatrix::from_row_slice(2, &[0.25, 0.5, 0.5, -1.0]).unwrap();
        let z = z_update(&theta, &u, &SymMatrix::identity(2), 0.0, 1.0).unwrap();
        assert_eq!(z, &theta + &u);
    }

    #[test]
    fn u_update_examples() {
        let id = SymMatrix::identity(2);
        assert_eq!(u_update(&id, &id, &SymMatrix::zeros(2)).unwrap().max_abs(), 0.0);
        assert_eq!(u_update(&id, &SymMatrix::zeros(2), &SymMatrix::zeros(2)).unwrap(), id);
        let z = SymMatrix::from_diagonal(&[0.5, 0.5]).unwrap();
        let up = SymMatrix::from_diagonal(&[0.1, 0.1]).unwrap();
        let u = u_update(&id, &z, &up).unwrap();
        assert!((u.get(0, 0) - 0.6).abs() < 1e-15 && (u.get(1, 1) - 0.6).abs() < 1e-15);
        assert_eq!(u.get(0, 1), 0.0);
        assert!(u_update(&id, &SymMatrix::zeros(3), &up).is_err());
    }

    #[test]
    fn tolerance_examples() {
        let cfg = AdmmConfig::default();
        let state = AdmmState::initial(100);
        let (ep, ed) = stopping_tolerances(&state, &cfg, 100);
        assert!((ep - 0.01).abs() < 1e-15 && (ed - 0.01).abs() < 1e-15);

        // ‖Θ‖_F = 10, ‖Z‖_F = 5
        let mut state = AdmmState::initial(4);
        state.theta = SymMatrix::from_diagonal(&[5.0, 5.0, 5.0, 5.0]).unwrap();
        state.z = SymMatrix::from_diagonal(&[2.5, 2.5, 2.5, 2.5]).unwrap();
        let (ep, _) = stopping_tolerances(&state, &cfg, 100);
        assert!((ep - 0.11).abs() < 1e-12);

        // ρ = 2, ‖U‖_F = 3
        let mut state = AdmmState::initial(1);
        state.u = scalar(3.0);
        let cfg = AdmmConfig { rho: 2.0, ..cfg };
        let (_, ed) = stopping_tolerances(&state, &cfg, 10);
        assert!((ed - 0.061).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(AdmmConfig::default().validate().is_ok());
        for cfg in [
            AdmmConfig { rho: 0.0, ..Default::default() },
            AdmmConfig { lambda: -1.0, ..Default::default() },
            AdmmConfig { eps_abs: 0.0, ..Default::default() },
            AdmmConfig { eps_rel: f64::NAN, ..Default::default() },
            AdmmConfig { max_iterations: 0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn solve_hits_max_iterations_without_error() {
        let s = SymMatrix::from_row_slice(2, &[1.0, 0.5, 0.5, 1.0]).unwrap();
        let cfg = AdmmConfig { max_iterations: 2, lambda: 0.05, ..Default::default() };
        let report = solve(&s, &SymMatrix::zeros(2), &cfg).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 2);
        assert_eq!(report.residual_trace.len(), 2);
    }

    #[test]
    fn kkt_accepts_exact_inverse_at_zero_lambda() {
        let s = SymMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let theta = spd_inverse(&s).unwrap();
        let r = kkt_check(&theta, &theta, &s, &SymMatrix::identity(2), 0.0, 1e-9).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn kkt_rejects_singular() {
        let z = SymMatrix::zeros(2);
        assert!(kkt_check(&z, &z, &z, &z, 0.1, 1e-3).is_err());
    }

    /// Objective of the Z-subproblem.
    fn z_objective(z: &SymMatrix, theta: &SymMatrix, u: &SymMatrix, tb: &SymMatrix, lambda: f64, rho: f64) -> f64 {
        let l1: f64 = (z - tb).as_matrix().iter().map(|v| v.abs()).sum();
        let r = &(theta - z) + u;
        lambda * l1 + 0.5 * rho * frobenius_norm(&r).powi(2)
    }

    fn sym(p: usize, v: &[f64]) -> SymMatrix {
        let m = DMatrix::from_row_slice(p, p, v);
        SymMatrix::symmetrized(&m + m.transpose())
    }

    proptest! {
        #[test]
        fn z_update_is_exact_prox(
            vals in proptest::collection::vec(-2.0f64..2.0, 27),
            lambda in 0.0f64..1.0,
            rho in 0.2f64..3.0,
        ) {
            let theta = sym(3, &vals[0..9]);
            let u = sym(3, &vals[9..18]);
            let tb = sym(3, &vals[18..27]);
            let z = z_update(&theta, &u, &tb, lambda, rho).unwrap();
            let best = z_objective(&z, &theta, &u, &tb, lambda, rho);
            for i in 0..3 {
                for j in 0..3 {
                    for eps in [1e-4, -1e-4] {
                        let mut m = z.as_matrix().clone();
                        m[(i, j)] += eps;
                        if i != j {
                            m[(j, i)] += eps;
                        }
                        let perturbed = SymMatrix::new(m).unwrap();
                        prop_assert!(z_objective(&perturbed, &theta, &u, &tb, lambda, rho) >= best - 1e-12);
                    }
                }
            }
        }

        #[test]
        fn theta_update_satisfies_stationarity(
            vals in proptest::collection::vec(-2.0f64..2.0, 32),
            rho in 0.1f64..5.0,
        ) {
            let s = {
                let b = DMatrix::from_row_slice(4, 4, &vals[0..16]);
                SymMatrix::symmetrized(&b * b.transpose())
            };
            let z = sym(4, &vals[16..32]);
            let u = SymMatrix::zeros(4);
            let theta = theta_update(&s, &z, &u, rho).unwrap();
            let inv = spd_inverse(&theta).unwrap();
            let lhs = &theta.scale(rho) - &inv;
            let rhs = &z.scale(rho) - &s;
            prop_assert!((&lhs - &rhs).max_abs() <= 1e-8);
            prop_assert_eq!(theta.as_matrix().clone(), theta.as_matrix().transpose());
        }
    }
}
