//! Kelly portfolios on binary assets.
//!
//! The growth rate of a fixed-fraction strategy is `G = ⟨ln(1 + Σ fᵢRᵢ)⟩`.
//! For exchangeable assets the optimum is symmetric and `G` reduces to a
//! concave function of one fraction `f`, maximized here by golden-section
//! search followed by a Newton polish on `dG/df`. The first-order solution
//! comes from expanding `1/(1+x) ≈ 1 − x` in the optimality condition.
//!
//! The Kelly effective size matches the total invested fraction of the
//! correlated portfolio against `m·f*(m)` for `m` uncorrelated assets,
//! interpolated linearly between integer `m`.

use rayon::prelude::*;

use crate::binmodel::{build_joint, BinaryModelParams, JointBinaryDistribution, MAX_ENUMERATION};
use crate::corrmat::InverseCorrelationMatrix;
use crate::error::{Error, Result};
use crate::meanvar::PortfolioWeights;
use crate::search::golden_section_max;

/// Upper bound on the symmetric fraction is `(1 − FEASIBILITY_MARGIN)/M`.
pub const FEASIBILITY_MARGIN: f64 = 1e-9;
/// Golden-section stops when the bracket is narrower than this.
pub const BRACKET_TOL: f64 = 1e-12;

/// Tolerance for matching a target total fraction against the ends of the
/// uncorrelated curve.
const INTERP_EDGE_TOL: f64 = 1e-9;

/// Kelly criterion for an even-odds ±1 bet, `max(2p − 1, 0)`.
pub fn kelly_fraction_binary(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "win probability must lie in [0, 1], got {p}"
        )));
    }
    Ok((2.0 * p - 1.0).max(0.0))
}

/// `Σ_R P(R)·ln(1 + Σ fᵢRᵢ)` over the exact outcome table.
pub fn growth_rate(f: &PortfolioWeights, dist: &JointBinaryDistribution) -> Result<f64> {
    let m = dist.m();
    if f.len() != m {
        return Err(Error::InputShape(format!(
            "{} weights for a {m}-asset distribution",
            f.len()
        )));
    }
    let fr = f.fractions();
    let mut g = 0.0;
    for (outcome, prob) in dist.iter() {
        if prob == 0.0 {
            continue;
        }
        let wealth = 1.0
            + fr.iter()
                .enumerate()
                .map(|(i, fi)| fi * JointBinaryDistribution::asset_return(outcome, i))
                .sum::<f64>();
        if wealth <= 0.0 {
            return Err(Error::Bankruptcy { outcome, wealth });
        }
        g += prob * wealth.ln();
    }
    Ok(g)
}

/// First-order fractions with a flag telling whether any were clipped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct KellyFractions {
    pub weights: PortfolioWeights,
    pub clipped: bool,
}

/// `f* = μ·C⁻¹1 / (σ² + μ²Σᵢⱼ(C⁻¹)ᵢⱼ)` for identical assets, negatives clipped to 0.
///
/// A nonpositive mean return means abstaining: all fractions are zero.
pub fn kelly_first_order(
    mu: f64,
    sigma: f64,
    cinv: &InverseCorrelationMatrix,
) -> Result<KellyFractions> {
    let m = cinv.dim();
    if mu <= 0.0 {
        return Ok(KellyFractions {
            weights: PortfolioWeights::zeros(m),
            clipped: false,
        });
    }
    let denom = sigma * sigma + mu * mu * cinv.total();
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::Domain(format!(
            "first-order denominator is {denom}, need > 0"
        )));
    }
    let raw: Vec<f64> = cinv
        .row_sums()
        .into_iter()
        .map(|r| mu * r / denom)
        .collect();
    let clipped = raw.iter().any(|&f| f < 0.0);
    Ok(KellyFractions {
        weights: PortfolioWeights::new(raw.into_iter().map(|f| f.max(0.0)).collect()),
        clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    AnalyticFirstOrder,
    NumericExact,
}

/// Symmetric Kelly solution: every asset holds `f_star`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthResult {
    pub m: usize,
    pub f_star: f64,
    pub g_star: f64,
    pub total_fraction: f64,
    pub method: SolveMethod,
}

impl GrowthResult {
    pub fn weights(&self) -> PortfolioWeights {
        PortfolioWeights::even(self.m, self.f_star)
    }
}

/// `G(f)` for an even allocation, aggregated by number of winning assets.
#[derive(Debug, Clone)]
struct SymmetricGrowth {
    // (Σ_j R_j, probability) for each win count with positive probability.
    terms: Vec<(f64, f64)>,
}

impl SymmetricGrowth {
    fn new(dist: &JointBinaryDistribution) -> Self {
        let m = dist.m() as f64;
        let terms = dist
            .win_count_probabilities()
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(k, p)| (2.0 * k as f64 - m, p))
            .collect();
        Self { terms }
    }

    fn value(&self, f: f64) -> f64 {
        self.terms.iter().map(|(s, p)| p * (1.0 + f * s).ln()).sum()
    }

    fn slope(&self, f: f64) -> f64 {
        self.terms.iter().map(|(s, p)| p * s / (1.0 + f * s)).sum()
    }

    fn curvature(&self, f: f64) -> f64 {
        -self
            .terms
            .iter()
            .map(|(s, p)| {
                let w = 1.0 + f * s;
                p * s * s / (w * w)
            })
            .sum::<f64>()
    }
}

/// Exact symmetric Kelly optimum over `f ∈ [0, (1 − 1e−9)/M]`.
pub fn maximize_growth_symmetric(dist: &JointBinaryDistribution) -> GrowthResult {
    let m = dist.m();
    let g = SymmetricGrowth::new(dist);
    let upper = (1.0 - FEASIBILITY_MARGIN) / m as f64;

    let f_star = if g.slope(0.0) <= 0.0 {
        0.0
    } else if g.slope(upper) >= 0.0 {
        upper
    } else {
        let (lo, hi) = golden_section_max(|f| g.value(f), 0.0, upper, BRACKET_TOL);
        newton_polish(&g, 0.5 * (lo + hi), upper)
    };
    GrowthResult {
        m,
        f_star,
        g_star: g.value(f_star),
        total_fraction: m as f64 * f_star,
        method: SolveMethod::NumericExact,
    }
}

// Golden-section alone resolves f only to ~1e-9 because G is flat at the
// peak; Newton on dG/df recovers full precision.
fn newton_polish(g: &SymmetricGrowth, mut f: f64, upper: f64) -> f64 {
    for _ in 0..8 {
        let slope = g.slope(f);
        if slope == 0.0 {
            break;
        }
        let next = (f - slope / g.curvature(f)).clamp(0.0, upper);
        if g.slope(next).abs() >= slope.abs() {
            break;
        }
        f = next;
    }
    f
}

/// First-order symmetric fraction for the binary model, evaluated under the exact `G`.
///
/// Uses the uniform-correlation row sums `1/(1+(M−1)C)` directly, so `C = 1`
/// is allowed. Fails with `Bankruptcy` when the approximation invests so much
/// that the all-losses outcome is ruinous.
pub fn first_order_growth(dist: &JointBinaryDistribution) -> Result<GrowthResult> {
    let params = dist.params();
    let m = params.m();
    let mf = m as f64;
    let mu = 2.0 * params.p() - 1.0;
    let f_star = if mu <= 0.0 {
        0.0
    } else {
        let row = 1.0 / (1.0 + (mf - 1.0) * params.c());
        let sigma2 = 1.0 - mu * mu;
        mu * row / (sigma2 + mu * mu * mf * row)
    };
    let g_star = growth_rate(&PortfolioWeights::even(m, f_star), dist)?;
    Ok(GrowthResult {
        m,
        f_star,
        g_star,
        total_fraction: mf * f_star,
        method: SolveMethod::AnalyticFirstOrder,
    })
}

/// Exact optimal total fractions `F(m) = m·f*(m, id_m)` for `m = 1..=M`
/// uncorrelated binary assets.
#[derive(Debug, Clone)]
pub struct UncorrelatedTotals {
    p: f64,
    totals: Vec<f64>,
}

impl UncorrelatedTotals {
    pub fn compute(m_max: usize, p: f64) -> Result<Self> {
        if m_max > MAX_ENUMERATION {
            return Err(Error::EnumerationLimit {
                requested: m_max,
                limit: MAX_ENUMERATION,
            });
        }
        let params: Vec<BinaryModelParams> = (1..=m_max)
            .map(|m| BinaryModelParams::new(m, p, 0.0))
            .collect::<Result<_>>()?;
        let totals = params
            .into_par_iter()
            .map(|bp| build_joint(bp).map(|d| maximize_growth_symmetric(&d).total_fraction))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { p, totals })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `F(1), …, F(M)`.
    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    /// Inverts the piecewise-linear interpolant of `F` at `target`.
    pub fn effective_size(&self, target: f64) -> Result<f64> {
        let f = &self.totals;
        let (first, last) = (f[0], f[f.len() - 1]);
        if f.len() > 1 && last <= first {
            return Err(Error::Domain(format!(
                "optimal total fraction does not grow with m at p = {}; effective size undefined",
                self.p
            )));
        }
        if target < first - INTERP_EDGE_TOL {
            return Err(Error::Extrapolation {
                target,
                nearest_m: 1,
                nearest_value: first,
            });
        }
        if target > last + INTERP_EDGE_TOL {
            return Err(Error::Extrapolation {
                target,
                nearest_m: f.len(),
                nearest_value: last,
            });
        }
        if target <= first {
            return Ok(1.0);
        }
        if target >= last {
            return Ok(f.len() as f64);
        }
        let k = f
            .windows(2)
            .position(|w| target <= w[1])
            .expect("target inside range");
        let (a, b) = (f[k], f[k + 1]);
        Ok((k + 1) as f64 + (target - a) / (b - a))
    }
}

/// Kelly effective size of `M` assets with uniform correlation `C`, by
/// exact maximization and total-fraction matching.
pub fn m_ef_kelly_numeric(m: usize, p: f64, c: f64) -> Result<f64> {
    let totals = UncorrelatedTotals::compute(m, p)?;
    m_ef_kelly_with(&totals, m, c)
}

/// Same as [`m_ef_kelly_numeric`] reusing a precomputed uncorrelated curve.
pub fn m_ef_kelly_with(totals: &UncorrelatedTotals, m: usize, c: f64) -> Result<f64> {
    if totals.totals().len() < m {
        return Err(Error::InputShape(format!(
            "uncorrelated curve covers m <= {}, need {m}",
            totals.totals().len()
        )));
    }
    let dist = build_joint(BinaryModelParams::new(m, totals.p(), c)?)?;
    let target = maximize_growth_symmetric(&dist).total_fraction;
    let curve = UncorrelatedTotals {
        p: totals.p,
        totals: totals.totals[..m].to_vec(),
    };
    curve.effective_size(target)
}

/// Growth realized under the true correlation by an investor who optimized
/// for an assumed one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisestimationResult {
    pub c_true: f64,
    pub c_assumed: f64,
    pub f_assumed: f64,
    pub g_realized: f64,
}

pub fn misestimation_experiment(
    m: usize,
    p: f64,
    c_true: f64,
    c_assumed_grid: &[f64],
) -> Result<Vec<MisestimationResult>> {
    let truth = build_joint(BinaryModelParams::new(m, p, c_true)?)?;
    let assumed: Vec<BinaryModelParams> = c_assumed_grid
        .iter()
        .map(|&c| BinaryModelParams::new(m, p, c))
        .collect::<Result<_>>()?;
    assumed
        .into_par_iter()
        .map(|bp| {
            let f_assumed = maximize_growth_symmetric(&build_joint(bp)?).f_star;
            let g_realized = growth_rate(&PortfolioWeights::even(m, f_assumed), &truth)?;
            Ok(MisestimationResult {
                c_true,
                c_assumed: bp.c(),
                f_assumed,
                g_realized,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrmat::{invert, uniform_inverse_closed_form, CorrelationMatrix};
    use crate::effsize::m_ef_uniform;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn joint(m: usize, p: f64, c: f64) -> JointBinaryDistribution {
        build_joint(BinaryModelParams::new(m, p, c).unwrap()).unwrap()
    }

    #[test]
    fn binary_kelly_examples() {
        assert_eq!(kelly_fraction_binary(0.5).unwrap(), 0.0);
        assert_eq!(kelly_fraction_binary(0.75).unwrap(), 0.5);
        assert_eq!(kelly_fraction_binary(0.3).unwrap(), 0.0);
        assert!(matches!(kelly_fraction_binary(1.2), Err(Error::Domain(_))));
    }

    #[test]
    fn growth_rate_examples() {
        let d = joint(3, 0.6, 0.4);
        assert_eq!(growth_rate(&PortfolioWeights::zeros(3), &d).unwrap(), 0.0);

        let single = joint(1, 0.6, 0.0);
        let want = 0.6 * 1.2f64.ln() + 0.4 * 0.8f64.ln();
        let got = growth_rate(&PortfolioWeights::new(vec![0.2]), &single).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        assert_abs_diff_eq!(got, 0.020136, epsilon = 1e-6);

        let over = PortfolioWeights::even(3, 0.34);
        assert!(matches!(
            growth_rate(&over, &d),
            Err(Error::Bankruptcy { outcome: 0, .. })
        ));
        assert!(matches!(
            growth_rate(&PortfolioWeights::zeros(2), &d),
            Err(Error::InputShape(_))
        ));
    }

    #[test]
    fn growth_ignores_impossible_outcomes() {
        // With C = 1 only the two unanimous outcomes can happen, so a long
        // position on one asset and a short on another never goes broke.
        let d = joint(2, 0.6, 1.0);
        let hedged = PortfolioWeights::new(vec![0.9, -0.9]);
        assert_eq!(growth_rate(&hedged, &d).unwrap(), 0.0);
    }

    #[test]
    fn first_order_examples() {
        for p in [0.55, 0.6, 0.75] {
            let mu: f64 = 2.0 * p - 1.0;
            let sigma = (1.0 - mu * mu).sqrt();
            let inv = invert(&CorrelationMatrix::identity(1)).unwrap();
            let k = kelly_first_order(mu, sigma, &inv).unwrap();
            assert_abs_diff_eq!(k.weights.fractions()[0], 2.0 * p - 1.0, epsilon = 1e-15);
        }

        let (m, c, mu, sigma2) = (10, 0.2, 0.1, 0.99);
        let inv = uniform_inverse_closed_form(m, c).unwrap();
        let k = kelly_first_order(mu, f64::sqrt(sigma2), &inv).unwrap();
        let m_ef = m_ef_uniform(m, c).unwrap();
        let each = mu / ((1.0 + 9.0 * c) * (sigma2 + mu * mu * m_ef));
        for &f in k.weights.fractions() {
            assert_abs_diff_eq!(f, each, epsilon = 1e-14);
        }
        assert!((k.weights.total() - 0.3482).abs() < 5e-5);
        assert!(!k.clipped);

        for m in [1, 4, 25] {
            let inv = invert(&CorrelationMatrix::identity(m)).unwrap();
            let k = kelly_first_order(0.1, 1.0, &inv).unwrap();
            for &f in k.weights.fractions() {
                assert_abs_diff_eq!(f, 0.1 / (1.0 + 0.01 * m as f64), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn first_order_abstains_and_clips() {
        let inv = invert(&CorrelationMatrix::identity(3)).unwrap();
        let k = kelly_first_order(-0.1, 1.0, &inv).unwrap();
        assert!(k.weights.fractions().iter().all(|&f| f == 0.0));

        // Asset 0 is a near-copy of asset 1 but also tied to asset 2; its
        // C⁻¹ row sum turns negative.
        let c = CorrelationMatrix::from_rows(&[
            vec![1.0, 0.9, 0.6],
            vec![0.9, 1.0, 0.3],
            vec![0.6, 0.3, 1.0],
        ])
        .unwrap();
        let inv = invert(&c).unwrap();
        assert!(inv.row_sums().iter().any(|&r| r < 0.0));
        let k = kelly_first_order(0.1, 1.0, &inv).unwrap();
        assert!(k.clipped);
        assert!(k.weights.is_long_only());
    }

    #[test]
    fn symmetric_single_asset_is_kelly() {
        for p in [0.3, 0.5, 0.55, 0.6, 0.75] {
            let r = maximize_growth_symmetric(&joint(1, p, 0.0));
            assert!(
                (r.f_star - (2.0 * p - 1.0).max(0.0)).abs() <= 1e-8,
                "p={p}: {}",
                r.f_star
            );
            assert!(r.g_star >= 0.0);
        }
        let r = maximize_growth_symmetric(&joint(1, 0.6, 0.0));
        assert_abs_diff_eq!(r.f_star, 0.2, epsilon = 1e-14);
    }

    #[test]
    fn perfectly_correlated_assets_act_as_one() {
        let r = maximize_growth_symmetric(&joint(10, 0.6, 1.0));
        assert_abs_diff_eq!(r.total_fraction, 0.2, epsilon = 1e-10);
        assert_abs_diff_eq!(r.f_star, 0.02, epsilon = 1e-11);
    }

    #[test]
    fn small_returns_agree_with_first_order() {
        let d = joint(10, 0.55, 0.2);
        let exact = maximize_growth_symmetric(&d);
        let approx = first_order_growth(&d).unwrap();
        assert_eq!(approx.method, SolveMethod::AnalyticFirstOrder);
        assert!((exact.total_fraction - approx.total_fraction).abs() < 0.01);
        assert!((approx.total_fraction - 0.3482).abs() < 1e-4);
        assert!(exact.g_star >= approx.g_star);
    }

    #[test]
    fn interior_optimum_is_stationary() {
        for (m, p, c) in [(10, 0.55, 0.2), (6, 0.7, 0.1), (15, 0.6, 0.5)] {
            let d = joint(m, p, c);
            let r = maximize_growth_symmetric(&d);
            let g = SymmetricGrowth::new(&d);
            assert!(r.f_star > 0.0 && r.f_star < 1.0 / m as f64);
            assert!(
                g.slope(r.f_star).abs() <= 1e-9,
                "slope {}",
                g.slope(r.f_star)
            );
        }
    }

    #[test]
    fn optimum_beats_random_feasible_allocations() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (m, p, c) in [(4, 0.6, 0.3), (6, 0.55, 0.1), (3, 0.7, 0.6)] {
            let d = joint(m, p, c);
            let best = maximize_growth_symmetric(&d);
            let g_best = growth_rate(&best.weights(), &d).unwrap();
            assert!((g_best - best.g_star).abs() < 1e-14);
            for _ in 0..200 {
                // Random long-only allocations with total below 1 stay solvent.
                let raw: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
                let scale = rng.gen::<f64>() * 0.999 / raw.iter().sum::<f64>();
                let f = PortfolioWeights::new(raw.iter().map(|x| x * scale).collect());
                let g = growth_rate(&f, &d).unwrap();
                assert!(g <= g_best + 1e-10, "{g} > {g_best}");
            }
        }
    }

    #[test]
    fn effective_size_edge_cases() {
        assert_abs_diff_eq!(
            m_ef_kelly_numeric(10, 0.55, 0.0).unwrap(),
            10.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            m_ef_kelly_numeric(10, 0.55, 1.0).unwrap(),
            1.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(m_ef_kelly_numeric(1, 0.6, 0.5).unwrap(), 1.0);
        let v = m_ef_kelly_numeric(10, 0.55, 0.3).unwrap();
        assert!((v - 10.0 / 3.7).abs() < 0.15, "{v}");
        assert!(matches!(
            m_ef_kelly_numeric(21, 0.55, 0.3),
            Err(Error::EnumerationLimit { .. })
        ));
        assert!(matches!(
            m_ef_kelly_numeric(5, 0.45, 0.3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn interpolation_extrapolation_errors() {
        let t = UncorrelatedTotals::compute(5, 0.6).unwrap();
        let f = t.totals().to_vec();
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        assert!(matches!(
            t.effective_size(f[0] - 0.01),
            Err(Error::Extrapolation { nearest_m: 1, .. })
        ));
        assert!(matches!(
            t.effective_size(f[4] + 0.01),
            Err(Error::Extrapolation { nearest_m: 5, .. })
        ));
        assert_abs_diff_eq!(t.effective_size(f[2]).unwrap(), 3.0, epsilon = 1e-12);
        let mid = 0.5 * (f[1] + f[2]);
        assert_abs_diff_eq!(t.effective_size(mid).unwrap(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn misestimation_examples() {
        let grid: Vec<f64> = (0..=12).map(|k| k as f64 * 0.05).collect();
        let res = misestimation_experiment(10, 0.55, 0.2, &grid).unwrap();
        let g_star = maximize_growth_symmetric(&joint(10, 0.55, 0.2)).g_star;
        let at = |c: f64| {
            res.iter()
                .find(|r| (r.c_assumed - c).abs() < 1e-12)
                .unwrap()
                .g_realized
        };
        assert!((at(0.2) - g_star).abs() < 1e-12);
        assert!(res.iter().all(|r| r.g_realized <= g_star + 1e-12));
        assert!(at(0.0) < g_star);
        assert!(at(0.0) < 0.0, "naive investor loses: {}", at(0.0));
        assert!(at(0.05) < at(0.35));

        // Unimodal: increasing up to the truth, decreasing after.
        let peak = res
            .iter()
            .position(|r| (r.c_assumed - 0.2).abs() < 1e-12)
            .unwrap();
        assert!(res[..=peak]
            .windows(2)
            .all(|w| w[0].g_realized < w[1].g_realized));
        assert!(res[peak..]
            .windows(2)
            .all(|w| w[0].g_realized > w[1].g_realized));
    }

    #[test]
    fn misestimation_rejects_bad_grid() {
        assert!(misestimation_experiment(5, 0.55, 0.2, &[0.1, 1.5]).is_err());
    }
}
