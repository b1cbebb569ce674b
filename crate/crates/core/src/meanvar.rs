//! Mean-variance quantities for the identical-asset portfolio.
//!
//! Residual wealth sits in a zero-return risk-free asset, so weights need
//! not sum to one. Negative weights are allowed here.

use crate::corrmat::{CorrelationMatrix, InverseCorrelationMatrix};
use crate::error::{Error, Result};

/// Fractions of wealth invested in each asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights {
    fractions: Vec<f64>,
}

impl PortfolioWeights {
    pub fn new(fractions: Vec<f64>) -> Self {
        Self { fractions }
    }

    pub fn even(m: usize, each: f64) -> Self {
        Self::new(vec![each; m])
    }

    pub fn zeros(m: usize) -> Self {
        Self::new(vec![0.0; m])
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.fractions.iter().sum()
    }

    pub fn is_long_only(&self) -> bool {
        self.fractions.iter().all(|&f| f >= 0.0)
    }
}

/// `M` assets sharing mean return `mu` and standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdenticalAssetParams {
    mu: f64,
    sigma: f64,
    m: usize,
}

impl IdenticalAssetParams {
    pub fn new(mu: f64, sigma: f64, m: usize) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 || !mu.is_finite() {
            return Err(Error::Domain(format!(
                "need finite mu and sigma > 0, got mu = {mu}, sigma = {sigma}"
            )));
        }
        if m == 0 {
            return Err(Error::InputShape("asset count must be at least 1".into()));
        }
        Ok(Self { mu, sigma, m })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

/// Expected return `R_P = Σ fᵢμᵢ` and variance `V_P = Σ fᵢfⱼCᵢⱼσᵢσⱼ`.
pub fn portfolio_moments(
    f: &PortfolioWeights,
    mu: &[f64],
    sigma: &[f64],
    c: &CorrelationMatrix,
) -> Result<(f64, f64)> {
    let m = c.dim();
    if f.len() != m || mu.len() != m || sigma.len() != m {
        return Err(Error::InputShape(format!(
            "dimension mismatch: {} weights, {} means, {} deviations, {m}x{m} correlations",
            f.len(),
            mu.len(),
            sigma.len()
        )));
    }
    let fr = f.fractions();
    let r_p = fr.iter().zip(mu).map(|(f, m)| f * m).sum();
    let scaled: Vec<f64> = fr.iter().zip(sigma).map(|(f, s)| f * s).collect();
    let mut v_p = 0.0;
    for i in 0..m {
        for j in 0..m {
            v_p += scaled[i] * scaled[j] * c.get(i, j);
        }
    }
    Ok((r_p, v_p))
}

fn check_identical(params: &IdenticalAssetParams, cinv: &InverseCorrelationMatrix) -> Result<f64> {
    if params.m() != cinv.dim() {
        return Err(Error::InputShape(format!(
            "{} assets but a {}x{} inverse correlation matrix",
            params.m(),
            cinv.dim(),
            cinv.dim()
        )));
    }
    if params.mu() == 0.0 {
        return Err(Error::Domain("mean return must be nonzero".into()));
    }
    let s = cinv.total();
    if s.is_nan() || s <= 0.0 {
        return Err(Error::Domain(format!(
            "sum of inverse correlations is {s}, need > 0"
        )));
    }
    Ok(s)
}

/// Minimal variance `σ²R_P² / (μ² Σᵢⱼ(C⁻¹)ᵢⱼ)` at target return `r_p`.
pub fn minimal_variance_identical(
    r_p: f64,
    params: &IdenticalAssetParams,
    cinv: &InverseCorrelationMatrix,
) -> Result<f64> {
    let s = check_identical(params, cinv)?;
    let (mu, sigma) = (params.mu(), params.sigma());
    Ok(sigma * sigma * r_p * r_p / (mu * mu * s))
}

/// Minimizer behind [`minimal_variance_identical`]: `f = R_P/(μS) · C⁻¹1`.
pub fn mv_optimal_weights(
    r_p: f64,
    params: &IdenticalAssetParams,
    cinv: &InverseCorrelationMatrix,
) -> Result<PortfolioWeights> {
    let s = check_identical(params, cinv)?;
    let scale = r_p / (params.mu() * s);
    Ok(PortfolioWeights::new(
        cinv.row_sums().into_iter().map(|r| scale * r).collect(),
    ))
}
