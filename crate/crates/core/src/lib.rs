//! Effective portfolio size: how many uncorrelated assets a correlated
//! portfolio is worth.
//!
//! For `M` identical assets with correlation matrix `C`, both the
//! Mean-variance optimum and the first-order Kelly optimum behave like a
//! portfolio of `m_ef = Σᵢⱼ (C⁻¹)ᵢⱼ` uncorrelated assets. This crate
//! computes that number and its cheaper estimates, checks the Kelly
//! approximation against exact maximization on a correlated binary-asset
//! model, and runs the empirical pipelines on daily price data.
//!
//! Modules:
//! - [`corrmat`]: Pearson estimation, validation, inversion, closed forms.
//! - [`effsize`]: exact, uniform, even-investment, sector and variance-ratio estimates.
//! - [`meanvar`]: Mean-variance moments and optimum for identical assets.
//! - [`kelly`]: growth rate, exact and first-order Kelly solvers, mis-estimation.
//! - [`binmodel`]: hidden-asset model of correlated ±1 returns.
//! - [`marketdata`]: price files, returns, sliding windows, random subsets.

pub mod binmodel;
pub mod corrmat;
pub mod effsize;
pub mod error;
pub mod format;
pub mod kelly;
pub mod marketdata;
pub mod meanvar;
mod search;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use nalgebra;
