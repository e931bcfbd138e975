//! Probably-approximately-correct size bounds for the outer ellipsoid, and the
//! intermediate concentration bounds used to validate them statistically.
//!
//! All piecewise branch conditions of the form `δ >= c·e^{-(nd)²}` are
//! evaluated as `ln δ >= ln c − (nd)²`, since `e^{-(nd)²}` underflows for
//! `nd >= 28`.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::eoa::ext_real;
use crate::error::{Result, SpsError};
use crate::linalg::sym_spectral_norm;
use crate::problem::ExtendedProblem;

/// Singular-value ratio under which a regressor matrix counts as rank deficient.
pub const RANK_RTOL: f64 = 1e-10;

/// Everything the size bound depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacBoundInputs {
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    pub m: usize,
    pub q: usize,
    /// Subgaussian proxy of the noise (not its square).
    pub sigma: f64,
    pub lambda: f64,
    /// Norm bound on the true parameter.
    pub ell: f64,
    pub kappa: f64,
    pub rho: f64,
    pub lambda_min_r_tilde: f64,
}

impl PacBoundInputs {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SpsError::DomainError(msg));
        if self.n == 0 || self.d == 0 {
            return fail("n and d must be positive".into());
        }
        check_delta(self.delta)?;
        if self.q == 0 || self.q >= self.m {
            return fail(format!("need m > q >= 1, got m={}, q={}", self.m, self.q));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return fail(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return fail(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.ell >= 0.0) || !self.ell.is_finite() {
            return fail(format!("ell must be >= 0, got {}", self.ell));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return fail(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return fail(format!("rho must lie in (0, 1], got {}", self.rho));
        }
        if self.lambda > 0.0 && !(self.lambda_min_r_tilde > 0.0) {
            return fail(format!(
                "lambda_min(R~) must be positive when lambda > 0, got {}",
                self.lambda_min_r_tilde
            ));
        }
        Ok(())
    }

    /// Confidence budget per perturbation, `δ / (m − q)`.
    pub fn split_delta(&self) -> f64 {
        self.delta / (self.m - self.q) as f64
    }

    /// Regularisation-free variant (`λ = 0`).
    pub fn without_regularization(&self) -> Self {
        Self {
            lambda: 0.0,
            ..*self
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SpsError::DomainError(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// `ln δ >= ln c − (nd)²`.
fn upper_branch(delta: f64, c: f64, n: usize, d: usize) -> bool {
    let nd = n as f64 * d as f64;
    delta.ln() >= c.ln() - nd * nd
}

/// Coherence of a regressor matrix and the matching `κ` for a given `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    /// `(n/d) max_t ‖U_Φ̃ᵀ e_t‖²`.
    pub mu: f64,
    pub rho: f64,
    /// `μ n^{ρ−1}`, so that `μ = κ n^{1−ρ}` holds with equality.
    pub kappa_empirical: f64,
}

pub fn coherence(regressors: &DMatrix<f64>, rho: f64) -> Result<Coherence> {
    let (n, d) = regressors.shape();
    if n < d || d == 0 {
        return Err(SpsError::DimensionMismatch(format!(
            "coherence needs n >= d >= 1, got n={n}, d={d}"
        )));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(SpsError::DomainError(format!("rho must lie in (0, 1], got {rho}")));
    }
    let u = left_singular_basis(regressors)?;
    let max_row = u
        .row_iter()
        .map(|r| r.norm_squared())
        .fold(0.0, f64::max);
    let mu = n as f64 / d as f64 * max_row;
    Ok(Coherence {
        mu,
        rho,
        kappa_empirical: mu * (n as f64).powf(rho - 1.0),
    })
}

/// Thin left singular factor `U_Φ̃` (n x d).
fn left_singular_basis(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = SVD::try_new(x.clone(), true, false, f64::EPSILON, 10_000)
        .ok_or_else(|| SpsError::NumericalFailure("SVD did not converge".into()))?;
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin < RANK_RTOL * smax {
        return Err(SpsError::RankDeficient(if smax > 0.0 { smin / smax } else { 0.0 }));
    }
    svd.u
        .ok_or_else(|| SpsError::NumericalFailure("SVD did not return U".into()))
}

/// `f(δ)` without the domain check on `δ`.
fn f_formula(delta: f64, n: usize, d: usize, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let log_term = (4.0 / delta).ln();
    if upper_branch(delta, 4.0, n, d) {
        2.0 * d as f64 * s2 * (8.0 * log_term.sqrt() + 1.0)
    } else {
        2.0 * s2 * (8.0 * log_term + d as f64)
    }
}

/// Noise term of the size bound.
pub fn f_delta(delta: f64, n: usize, d: usize, sigma: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(f_formula(delta, n, d, sigma))
}

fn g_formula(delta: f64, d: usize, kappa: f64) -> f64 {
    (4.0 * d as f64 / delta).ln() * 2.0 * kappa * d as f64
}

/// Excitation term `g(δ) = 2κd ln(4d/δ)`.
pub fn g_delta(delta: f64, d: usize, kappa: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(kappa > 0.0) {
        return Err(SpsError::DomainError(format!("kappa must be positive, got {kappa}")));
    }
    Ok(g_formula(delta, d, kappa))
}

/// `⌈g(δ/(m−q))^{1/ρ}⌉`.
pub fn min_sample_size(inputs: &PacBoundInputs) -> Result<u64> {
    inputs.validate()?;
    let g = g_delta(inputs.split_delta(), inputs.d, inputs.kappa)?;
    Ok(g.powf(1.0 / inputs.rho).ceil() as u64)
}

/// High-probability upper bound on `sup ‖θ − θ̂‖²_R̄` over the outer ellipsoid.
pub fn theorem2_bound(inputs: &PacBoundInputs) -> Result<f64> {
    inputs.validate()?;
    let split = inputs.split_delta();
    let f = f_delta(split, inputs.n, inputs.d, inputs.sigma)?;
    let g = g_delta(split, inputs.d, inputs.kappa)?;
    let n = inputs.n as f64;
    let root_n = n.powf(inputs.rho / 2.0);
    let root_g = g.sqrt();
    if root_n <= root_g {
        return Err(SpsError::SampleTooSmall {
            n: inputs.n,
            min_n: min_sample_size(inputs)?,
        });
    }
    let reg = if inputs.lambda > 0.0 {
        2.0 * inputs.lambda / inputs.lambda_min_r_tilde
    } else {
        0.0
    };
    let noise = f + 2.0 * inputs.lambda * inputs.ell * inputs.ell * inputs.d as f64;
    Ok(noise * (root_n * (1.0 + reg) + root_g) / (n * (root_n - root_g)))
}

fn check_common(kappa: f64, d: usize, n: usize, rho: f64) -> Result<()> {
    if !(kappa > 0.0) || d == 0 || n == 0 || !(rho > 0.0 && rho <= 1.0) {
        return Err(SpsError::DomainError(format!(
            "need kappa > 0, d >= 1, n >= 1, rho in (0, 1]; got kappa={kappa}, d={d}, n={n}, rho={rho}"
        )));
    }
    Ok(())
}

/// High-probability bound on `‖K̃‖₂`.
pub fn lemma1_bound(delta: f64, kappa: f64, d: usize, n: usize, rho: f64) -> Result<f64> {
    check_delta(delta)?;
    check_common(kappa, d, n, rho)?;
    Ok((2.0 * kappa * d as f64 * (2.0 * d as f64 / delta).ln() / (n as f64).powf(rho)).sqrt())
}

/// High-probability bound on `(1 + ‖K‖₂)/(1 − ‖K‖₂)`; `+∞` when the
/// `‖K̃‖₂` bound reaches 1.
pub fn lemma2_ratio_bound(
    delta: f64,
    kappa: f64,
    d: usize,
    n: usize,
    rho: f64,
    lambda: f64,
    lambda_min_r_tilde: f64,
) -> Result<f64> {
    let beta = lemma1_bound(delta, kappa, d, n, rho)?;
    if !(lambda >= 0.0) {
        return Err(SpsError::DomainError(format!("lambda must be >= 0, got {lambda}")));
    }
    if beta >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let reg = if lambda > 0.0 {
        if !(lambda_min_r_tilde > 0.0) {
            return Err(SpsError::DomainError(
                "lambda_min(R~) must be positive when lambda > 0".into(),
            ));
        }
        2.0 * lambda / lambda_min_r_tilde
    } else {
        0.0
    };
    Ok((1.0 + beta + reg) / (1.0 - beta))
}

fn lemma3_formula(delta: f64, n: usize, d: usize, sigma: f64, lambda: f64, theta_sq: f64) -> f64 {
    let s2 = sigma * sigma;
    let log_term = (2.0 / delta).ln();
    let noise = if upper_branch(delta, 2.0, n, d) {
        2.0 * d as f64 * s2 * (8.0 * log_term.sqrt() + 1.0)
    } else {
        2.0 * s2 * (8.0 * log_term + d as f64)
    };
    (noise + 2.0 * lambda * theta_sq * d as f64) / n as f64
}

/// High-probability bound on `|wᵀMw|/n` for a projection `M` of rank <= d.
pub fn lemma3_bound(
    delta: f64,
    n: usize,
    d: usize,
    sigma: f64,
    lambda: f64,
    theta_star_norm_sq: f64,
) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 || d == 0 || !(sigma > 0.0) || !(lambda >= 0.0) || !(theta_star_norm_sq >= 0.0) {
        return Err(SpsError::DomainError(format!(
            "need n, d >= 1, sigma > 0, lambda >= 0, |theta*|^2 >= 0; got n={n}, d={d}, sigma={sigma}, lambda={lambda}, |theta*|^2={theta_star_norm_sq}"
        )));
    }
    Ok(lemma3_formula(delta, n, d, sigma, lambda, theta_star_norm_sq))
}

/// `K = Φ_QᵀD₁Φ_Q` (thin QR of the stacked `Φ`) and `K̃ = U_Φ̃ᵀD̃₁U_Φ̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct KDiagnostics {
    pub k: DMatrix<f64>,
    pub k_tilde: DMatrix<f64>,
    pub k_norm: f64,
    pub k_tilde_norm: f64,
}

/// `signs` are the `n` perturbation signs; the `d` regularisation rows keep +1.
pub fn compute_k(ep: &ExtendedProblem, signs: &[i8]) -> Result<KDiagnostics> {
    let n = ep.n();
    if signs.len() != n {
        return Err(SpsError::DimensionMismatch(format!(
            "{} signs for n = {n}",
            signs.len()
        )));
    }
    let phi_q = ep.phi().clone().qr().q();
    let check = phi_q.tr_mul(&phi_q) - DMatrix::identity(ep.d(), ep.d());
    if check.norm() > 1e-8 {
        return Err(SpsError::RankDeficient(0.0));
    }
    let u = left_singular_basis(ep.data().regressors())?;

    let weighted = |basis: &DMatrix<f64>, rows: usize| {
        let mut scaled = basis.clone();
        for (t, &s) in signs.iter().enumerate().take(rows.min(n)) {
            scaled.row_mut(t).scale_mut(f64::from(s));
        }
        basis.tr_mul(&scaled)
    };
    let k = weighted(&phi_q, n);
    let k_tilde = weighted(&u, n);
    Ok(KDiagnostics {
        k_norm: sym_spectral_norm(&k)?,
        k_tilde_norm: sym_spectral_norm(&k_tilde)?,
        k,
        k_tilde,
    })
}

/// Bound evaluation with its full input echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: PacBoundInputs,
    pub split_delta: f64,
    pub f: f64,
    pub g: f64,
    pub min_sample_size: u64,
    #[serde(with = "ext_real")]
    pub theorem2_bound: f64,
    /// The same bound with `λ = 0`.
    #[serde(with = "ext_real")]
    pub theorem2_bound_unregularized: f64,
    pub lemma1_bound: f64,
    #[serde(with = "ext_real")]
    pub lemma2_ratio_bound: f64,
    pub lemma3_bound: f64,
}

impl BoundReport {
    /// Fails with [`SpsError::SampleTooSmall`] below the minimum sample size.
    pub fn evaluate(inputs: &PacBoundInputs) -> Result<Self> {
        inputs.validate()?;
        let split = inputs.split_delta();
        let theorem2 = theorem2_bound(inputs)?;
        Ok(Self {
            inputs: *inputs,
            split_delta: split,
            f: f_delta(split, inputs.n, inputs.d, inputs.sigma)?,
            g: g_delta(split, inputs.d, inputs.kappa)?,
            min_sample_size: min_sample_size(inputs)?,
            theorem2_bound: theorem2,
            theorem2_bound_unregularized: theorem2_bound(&inputs.without_regularization())?,
            lemma1_bound: lemma1_bound(inputs.delta, inputs.kappa, inputs.d, inputs.n, inputs.rho)?,
            lemma2_ratio_bound: lemma2_ratio_bound(
                inputs.delta,
                inputs.kappa,
                inputs.d,
                inputs.n,
                inputs.rho,
                inputs.lambda,
                inputs.lambda_min_r_tilde,
            )?,
            lemma3_bound: lemma3_bound(
                inputs.delta,
                inputs.n,
                inputs.d,
                inputs.sigma,
                inputs.lambda,
                inputs.ell * inputs.ell,
            )?,
        })
    }
}
