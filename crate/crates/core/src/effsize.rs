//! Effective portfolio size and its estimates.
//!
//! The exact value is the sum of all entries of `C⁻¹`. Cheaper estimates
//! replace `C` by its average off-diagonal correlation (even investment),
//! by a block-averaged sector matrix, or by the ratio of average stock
//! variance to index variance.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::corrmat::{
    invert, symmetric_inverse, CorrelationMatrix, InverseCorrelationMatrix, ReturnSeries,
};
use crate::error::{Error, Result};
use crate::meanvar::PortfolioWeights;

/// `Σᵢⱼ (C⁻¹)ᵢⱼ`.
pub fn m_ef_exact(cinv: &InverseCorrelationMatrix) -> f64 {
    cinv.total()
}

/// `M / (1 + (M−1)C)` for uniform correlation `C ∈ [0, 1]`.
pub fn m_ef_uniform(m: usize, c: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InputShape("asset count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Domain(format!(
            "correlation must lie in [0, 1], got {c}"
        )));
    }
    let mf = m as f64;
    Ok(mf / (1.0 + (mf - 1.0) * c))
}

/// Effective size of the even investment, `M / (1 + (M−1)⟨C⟩)`.
pub fn m_ef_even(c: &CorrelationMatrix) -> Result<f64> {
    let m = c.dim();
    let avg = c
        .mean_off_diagonal()
        .ok_or_else(|| Error::InputShape(format!("even-investment size needs M >= 2, got {m}")))?;
    let denom = 1.0 + (m as f64 - 1.0) * avg;
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "average correlation {avg} is below -1/(M-1) for M = {m}; even-investment size undefined"
        )));
    }
    Ok(m as f64 / denom)
}

/// Assignment of assets to nonempty sectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorPartition {
    assignment: Vec<usize>,
    labels: Vec<String>,
}

impl SectorPartition {
    /// One label per asset; sectors are numbered by first appearance.
    pub fn from_labels<S: AsRef<str>>(per_asset: &[S]) -> Result<Self> {
        if per_asset.is_empty() {
            return Err(Error::InputShape(
                "partition must cover at least one asset".into(),
            ));
        }
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut labels = Vec::new();
        let assignment = per_asset
            .iter()
            .map(|s| {
                let s = s.as_ref();
                *index.entry(s).or_insert_with(|| {
                    labels.push(s.to_string());
                    labels.len() - 1
                })
            })
            .collect();
        Ok(Self { assignment, labels })
    }

    /// Every asset in its own sector.
    pub fn singletons(m: usize) -> Self {
        Self {
            assignment: (0..m).collect(),
            labels: (0..m).map(|i| i.to_string()).collect(),
        }
    }

    /// Number of assets covered.
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn sector_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sector_of(&self, asset: usize) -> usize {
        self.assignment[asset]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.labels.len()];
        for &s in &self.assignment {
            sizes[s] += 1;
        }
        sizes
    }

    /// Partition of the selected assets, in the given order; sectors left
    /// without members disappear.
    pub fn restrict(&self, assets: &[usize]) -> Self {
        let labels: Vec<&str> = assets
            .iter()
            .map(|&a| self.labels[self.assignment[a]].as_str())
            .collect();
        Self::from_labels(&labels).expect("restriction of a valid partition")
    }
}

/// Block-averaged correlation matrix over sectors.
///
/// Diagonal entries average the whole intra-sector block including the
/// unit diagonal of `C`, so they are generally not 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSectorMatrix {
    entries: DMatrix<f64>,
}

impl ReducedSectorMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

pub fn reduce_to_sectors(
    c: &CorrelationMatrix,
    part: &SectorPartition,
) -> Result<ReducedSectorMatrix> {
    if part.len() != c.dim() {
        return Err(Error::InputShape(format!(
            "partition covers {} assets but the matrix has {}",
            part.len(),
            c.dim()
        )));
    }
    let n = part.sector_count();
    let mut sums = DMatrix::<f64>::zeros(n, n);
    for i in 0..c.dim() {
        let si = part.sector_of(i);
        for j in 0..c.dim() {
            sums[(si, part.sector_of(j))] += c.get(i, j);
        }
    }
    let sizes = part.sizes();
    let entries = DMatrix::from_fn(n, n, |a, b| sums[(a, b)] / (sizes[a] * sizes[b]) as f64);
    Ok(ReducedSectorMatrix { entries })
}

/// Sector-reduced estimate `Σ_IJ (C̃⁻¹)_IJ`.
pub fn m_ef_sector(c: &CorrelationMatrix, part: &SectorPartition) -> Result<f64> {
    let reduced = reduce_to_sectors(c, part)?;
    let (inv, _) = symmetric_inverse(reduced.as_matrix())?;
    Ok(inv.sum())
}

/// Mean constituent variance divided by index variance.
pub fn m_ef_variance_ratio(
    index_returns: &ReturnSeries,
    constituents: &[ReturnSeries],
) -> Result<f64> {
    Ok(variance_ratio_parts(index_returns, constituents)?.ratio())
}

/// The two variances behind [`m_ef_variance_ratio`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRatio {
    pub mean_constituent_variance: f64,
    pub index_variance: f64,
}

impl VarianceRatio {
    pub fn ratio(&self) -> f64 {
        self.mean_constituent_variance / self.index_variance
    }
}

pub fn variance_ratio_parts(
    index_returns: &ReturnSeries,
    constituents: &[ReturnSeries],
) -> Result<VarianceRatio> {
    if constituents.is_empty() {
        return Err(Error::InputShape("need at least one constituent".into()));
    }
    let t = index_returns.len();
    if let Some(s) = constituents.iter().find(|s| s.len() != t) {
        return Err(Error::InputShape(format!(
            "constituent '{}' has {} periods, index has {t}",
            s.asset_id(),
            s.len()
        )));
    }
    let index_variance = index_returns.stats().variance;
    if index_variance == 0.0 {
        return Err(Error::Domain("index returns have zero variance".into()));
    }
    let mean_constituent_variance =
        constituents.iter().map(|s| s.stats().variance).sum::<f64>() / constituents.len() as f64;
    Ok(VarianceRatio {
        mean_constituent_variance,
        index_variance,
    })
}

/// Herfindahl concentration `1 / Σ fᵢ²`; unrelated to correlations.
pub fn inverse_participation_ratio(f: &PortfolioWeights) -> Result<f64> {
    let fr = f.fractions();
    if fr.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("weights must be finite".into()));
    }
    let ss: f64 = fr.iter().map(|x| x * x).sum();
    if ss == 0.0 {
        return Err(Error::Domain("all weights are zero".into()));
    }
    Ok(1.0 / ss)
}

/// All effective-size numbers for one asset set.
#[derive(Debug, Clone, PartialEq)]
pub struct EffSizeReport {
    pub m: usize,
    pub m_exact: f64,
    /// Closed form, present only when every off-diagonal entry is the same value in `[0, 1]`.
    pub m_uniform: Option<f64>,
    pub m_even: f64,
    pub m_sector: Option<f64>,
    pub m_variance_ratio: Option<f64>,
}

impl EffSizeReport {
    pub fn compute(c: &CorrelationMatrix, sectors: Option<&SectorPartition>) -> Result<Self> {
        let cinv = invert(c)?;
        let m_uniform = c
            .uniform_value(1e-12)
            .and_then(|u| m_ef_uniform(c.dim(), u).ok());
        Ok(Self {
            m: c.dim(),
            m_exact: m_ef_exact(&cinv),
            m_uniform,
            m_even: m_ef_even(c)?,
            m_sector: sectors.map(|p| m_ef_sector(c, p)).transpose()?,
            m_variance_ratio: None,
        })
    }

    pub fn with_variance_ratio(mut self, ratio: f64) -> Self {
        self.m_variance_ratio = Some(ratio);
        self
    }
}
