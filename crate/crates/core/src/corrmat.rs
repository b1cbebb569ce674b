//! Correlation matrices: Pearson estimation, validation, inversion and the
//! closed forms for uniform and block-diagonal structure.
//!
//! Moments use the population convention (divide by `T`). Any series with
//! zero variance is treated as risk-free and is uncorrelated with everything.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Reciprocal condition number below which an inverse is rejected.
pub const RCOND_THRESHOLD: f64 = 1e-12;

const ENTRY_TOL: f64 = 1e-12;

/// Per-period simple returns of one asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    asset_id: String,
    returns: Vec<f64>,
}

impl ReturnSeries {
    /// Builds a series, requiring at least two finite returns, none below `-1`.
    ///
    /// A return of exactly `-1` is allowed: the binary model's losing outcome
    /// wipes out the stake without making wealth negative.
    pub fn new(asset_id: impl Into<String>, returns: Vec<f64>) -> Result<Self> {
        let asset_id = asset_id.into();
        if returns.len() < 2 {
            return Err(Error::InputShape(format!(
                "series '{asset_id}' needs at least 2 returns, got {}",
                returns.len()
            )));
        }
        if let Some((t, r)) = returns
            .iter()
            .enumerate()
            .find(|(_, r)| !r.is_finite() || **r < -1.0)
        {
            return Err(Error::Domain(format!(
                "series '{asset_id}' has invalid return {r} at period {t}"
            )));
        }
        Ok(Self { asset_id, returns })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn stats(&self) -> SummaryStats {
        SummaryStats::of(&self.returns)
    }
}

/// Mean, population variance and standard deviation of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub variance: f64,
    pub stdev: f64,
}

impl SummaryStats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let variance = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self {
            mean,
            variance,
            stdev: variance.sqrt(),
        }
    }
}

/// Pearson correlation of two equal-length series.
///
/// Returns 0 when either series has zero variance.
pub fn pearson(x: &ReturnSeries, y: &ReturnSeries) -> Result<f64> {
    pearson_slices(x.returns(), y.returns())
}

pub(crate) fn pearson_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InputShape(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InputShape("pearson needs at least 2 periods".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Symmetric, unit-diagonal matrix of pairwise correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Validates symmetry, unit diagonal and entries in `[-1, 1]`.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let m = entries.nrows();
        if m == 0 || entries.ncols() != m {
            return Err(Error::InputShape(format!(
                "correlation matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let mut entries = entries;
        for i in 0..m {
            let d = entries[(i, i)];
            if !d.is_finite() || (d - 1.0).abs() > ENTRY_TOL {
                return Err(Error::Domain(format!(
                    "diagonal entry {i} is {d}, expected 1"
                )));
            }
            entries[(i, i)] = 1.0;
            for j in (i + 1)..m {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::Domain(format!("entry ({i},{j}) is not finite")));
                }
                if (a - b).abs() > ENTRY_TOL {
                    return Err(Error::Domain(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                if a.abs() > 1.0 + ENTRY_TOL {
                    return Err(Error::Domain(format!(
                        "entry ({i},{j}) = {a} lies outside [-1, 1]"
                    )));
                }
                let v = a.clamp(-1.0, 1.0);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InputShape("correlation rows are ragged".into()));
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
    }

    pub fn identity(m: usize) -> Self {
        Self {
            entries: DMatrix::identity(m, m),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Mean of the `M(M-1)` strictly off-diagonal entries; `None` when `M < 2`.
    pub fn mean_off_diagonal(&self) -> Option<f64> {
        let m = self.dim();
        if m < 2 {
            return None;
        }
        let total: f64 = self.entries.iter().sum();
        Some((total - m as f64) / (m * (m - 1)) as f64)
    }

    /// All off-diagonal entries equal (to within `tol`)?
    pub fn uniform_value(&self, tol: f64) -> Option<f64> {
        let m = self.dim();
        if m < 2 {
            return Some(0.0);
        }
        let c = self.entries[(0, 1)];
        let uniform = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .all(|(i, j)| (self.entries[(i, j)] - c).abs() <= tol);
        uniform.then_some(c)
    }

    /// Principal submatrix on the given asset indices.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let k = indices.len();
        Self {
            entries: DMatrix::from_fn(k, k, |a, b| self.entries[(indices[a], indices[b])]),
        }
    }

    /// Smallest and largest eigenvalue.
    pub fn eigenvalue_range(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.entries.clone());
        let min = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let max = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    /// Positive semidefinite up to `-1e-10 * M` on the smallest eigenvalue.
    pub fn is_psd(&self) -> bool {
        self.eigenvalue_range().0 >= -1e-10 * self.dim() as f64
    }
}

/// Inverse of a correlation matrix together with conditioning diagnostics.
#[derive(Debug, Clone)]
pub struct InverseCorrelationMatrix {
    entries: DMatrix<f64>,
    source: CorrelationMatrix,
    reciprocal_condition: f64,
}

impl InverseCorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn source(&self) -> &CorrelationMatrix {
        &self.source
    }

    /// `1 / (‖C‖₁ ‖C⁻¹‖₁)`.
    pub fn reciprocal_condition(&self) -> f64 {
        self.reciprocal_condition
    }

    /// Sum of all entries, `Σᵢⱼ (C⁻¹)ᵢⱼ`.
    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// `C⁻¹·1`.
    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }

    /// `max |C·C⁻¹ − I|`.
    pub fn residual(&self) -> f64 {
        let m = self.dim();
        let prod = self.source.as_matrix() * &self.entries;
        (prod - DMatrix::<f64>::identity(m, m)).amax()
    }
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverts a symmetric matrix, Cholesky first and pivoted LU as fallback.
///
/// Returns the symmetrized inverse and the 1-norm reciprocal condition.
pub(crate) fn symmetric_inverse(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let inv = match Cholesky::new(a.clone()) {
        Some(chol) => chol.inverse(),
        None => a
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::NearSingular { rcond: 0.0 })?,
    };
    let rcond = 1.0 / (norm1(a) * norm1(&inv));
    if !rcond.is_finite() || rcond < RCOND_THRESHOLD {
        return Err(Error::NearSingular {
            rcond: if rcond.is_finite() { rcond } else { 0.0 },
        });
    }
    let sym = (&inv + inv.transpose()) * 0.5;
    Ok((sym, rcond))
}

/// Correlation matrix of a panel of equal-length series.
pub fn estimate_matrix(panel: &[ReturnSeries]) -> Result<CorrelationMatrix> {
    if panel.len() < 2 {
        return Err(Error::InputShape(format!(
            "need at least 2 series, got {}",
            panel.len()
        )));
    }
    let t = panel[0].len();
    if let Some(s) = panel.iter().find(|s| s.len() != t) {
        return Err(Error::InputShape(format!(
            "ragged panel: series '{}' has {} periods, expected {t}",
            s.asset_id(),
            s.len()
        )));
    }
    let slices: Vec<&[f64]> = panel.iter().map(|s| s.returns()).collect();
    estimate_from_slices(&slices)
}

/// Same as [`estimate_matrix`] on raw slices already checked for shape.
pub(crate) fn estimate_from_slices(series: &[&[f64]]) -> Result<CorrelationMatrix> {
    let m = series.len();
    // Standardized columns; zero-variance series become zero vectors.
    let z: Vec<Vec<f64>> = series
        .iter()
        .map(|xs| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let dev: Vec<f64> = xs.iter().map(|x| x - mean).collect();
            let ss: f64 = dev.iter().map(|d| d * d).sum();
            if ss == 0.0 {
                vec![0.0; xs.len()]
            } else {
                let norm = ss.sqrt();
                dev.into_iter().map(|d| d / norm).collect()
            }
        })
        .collect();
    let mut c = DMatrix::identity(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let r = z[i]
                .iter()
                .zip(&z[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .clamp(-1.0, 1.0);
            c[(i, j)] = r;
            c[(j, i)] = r;
        }
    }
    Ok(CorrelationMatrix { entries: c })
}

/// Numeric inverse of `C`; near-singular matrices are rejected.
pub fn invert(c: &CorrelationMatrix) -> Result<InverseCorrelationMatrix> {
    let (entries, reciprocal_condition) = symmetric_inverse(c.as_matrix())?;
    Ok(InverseCorrelationMatrix {
        entries,
        source: c.clone(),
        reciprocal_condition,
    })
}

fn check_uniform_args(m: usize, c: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::InputShape(
            "matrix dimension must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Domain(format!(
            "uniform correlation must lie in [0, 1], got {c}"
        )));
    }
    Ok(())
}

/// `M×M` matrix with unit diagonal and every off-diagonal entry equal to `c`.
pub fn uniform_matrix(m: usize, c: f64) -> Result<CorrelationMatrix> {
    check_uniform_args(m, c)?;
    Ok(CorrelationMatrix {
        entries: DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { c }),
    })
}

/// Closed-form inverse of [`uniform_matrix`]:
/// diagonal `(1+(M−2)C)/((1−C)(1+(M−1)C))`, off-diagonal `−C/((1−C)(1+(M−1)C))`.
pub fn uniform_inverse_closed_form(m: usize, c: f64) -> Result<InverseCorrelationMatrix> {
    check_uniform_args(m, c)?;
    let source = uniform_matrix(m, c)?;
    if m > 1 && c >= 1.0 {
        return Err(Error::NearSingular { rcond: 0.0 });
    }
    let mf = m as f64;
    let denom = (1.0 - c) * (1.0 + (mf - 1.0) * c);
    let diag = (1.0 + (mf - 2.0) * c) / denom;
    let off = -c / denom;
    let entries = DMatrix::from_fn(m, m, |i, j| if i == j { diag } else { off });
    let norm_c = 1.0 + (mf - 1.0) * c;
    let norm_inv = diag.abs() + (mf - 1.0) * off.abs();
    let reciprocal_condition = 1.0 / (norm_c * norm_inv);
    if reciprocal_condition < RCOND_THRESHOLD {
        return Err(Error::NearSingular {
            rcond: reciprocal_condition,
        });
    }
    Ok(InverseCorrelationMatrix {
        entries,
        source,
        reciprocal_condition,
    })
}

/// Places the blocks along the diagonal with zeros elsewhere.
pub fn block_diagonal(blocks: &[CorrelationMatrix]) -> Result<CorrelationMatrix> {
    if blocks.is_empty() {
        return Err(Error::InputShape("need at least one block".into()));
    }
    let m: usize = blocks.iter().map(|b| b.dim()).sum();
    let mut entries = DMatrix::zeros(m, m);
    let mut offset = 0;
    for b in blocks {
        let k = b.dim();
        entries
            .view_mut((offset, offset), (k, k))
            .copy_from(b.as_matrix());
        offset += k;
    }
    Ok(CorrelationMatrix { entries })
}
