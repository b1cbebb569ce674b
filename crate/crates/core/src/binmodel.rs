//! Exchangeable ±1 returns with uniform pairwise correlation, induced by a
//! hidden binary asset.
//!
//! The hidden asset wins with probability `p`. Given a hidden win each asset
//! wins with probability `p + (1−p)√C`; given a hidden loss each asset loses
//! with probability `1 − p + p√C`. Every asset then wins with probability
//! `p`, and any two assets have correlation `C`.
//!
//! Sampling uses ChaCha8 (`rand_chacha` 0.3) seeded through
//! `SeedableRng::seed_from_u64`, drawing the hidden outcome first and then
//! each asset in index order with `Rng::gen_bool`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corrmat::ReturnSeries;
use crate::error::{Error, Result};

/// Largest `M` for which the full `2^M` table is built.
pub const MAX_ENUMERATION: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryModelParams {
    m: usize,
    p: f64,
    c: f64,
}

impl BinaryModelParams {
    pub fn new(m: usize, p: f64, c: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InputShape("asset count must be at least 1".into()));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "win probability must lie in (0, 1), got {p}"
            )));
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Domain(format!(
                "correlation must lie in [0, 1], got {c}"
            )));
        }
        Ok(Self { m, p, c })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `P(+ᵢ | +ₕ)`.
    pub fn win_given_hidden_win(&self) -> f64 {
        self.p + (1.0 - self.p) * self.c.sqrt()
    }

    /// `P(+ᵢ | −ₕ) = 1 − P(−ᵢ | −ₕ)`.
    pub fn win_given_hidden_loss(&self) -> f64 {
        self.p * (1.0 - self.c.sqrt())
    }
}

/// Exact probability table over all `2^M` outcomes.
///
/// Outcome index bit `i` set means asset `i` returned `+1`.
#[derive(Debug, Clone)]
pub struct JointBinaryDistribution {
    params: BinaryModelParams,
    log_probs: Vec<f64>,
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

// n·ln q with the convention 0·ln 0 = 0.
fn scaled_log(n: usize, ln_q: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * ln_q
    }
}

// Neumaier-compensated sum; tables reach 2^20 terms.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + comp
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

pub fn build_joint(params: BinaryModelParams) -> Result<JointBinaryDistribution> {
    let m = params.m();
    if m > MAX_ENUMERATION {
        return Err(Error::EnumerationLimit {
            requested: m,
            limit: MAX_ENUMERATION,
        });
    }
    let (qw, ql) = (
        params.win_given_hidden_win(),
        params.win_given_hidden_loss(),
    );
    let (ln_ph, ln_qh) = (params.p().ln(), (1.0 - params.p()).ln());
    let (ln_qw, ln_qw_c) = (ln_or_neg_inf(qw), ln_or_neg_inf(1.0 - qw));
    let (ln_ql, ln_ql_c) = (ln_or_neg_inf(ql), ln_or_neg_inf(1.0 - ql));

    // Exchangeable: the probability depends on the win count only.
    let by_wins: Vec<f64> = (0..=m)
        .map(|k| {
            let up = ln_ph + scaled_log(k, ln_qw) + scaled_log(m - k, ln_qw_c);
            let down = ln_qh + scaled_log(k, ln_ql) + scaled_log(m - k, ln_ql_c);
            log_add_exp(up, down)
        })
        .collect();
    let log_probs = (0..1usize << m)
        .map(|idx| by_wins[idx.count_ones() as usize])
        .collect();
    Ok(JointBinaryDistribution { params, log_probs })
}

impl JointBinaryDistribution {
    pub fn params(&self) -> BinaryModelParams {
        self.params
    }

    pub fn m(&self) -> usize {
        self.params.m()
    }

    pub fn outcome_count(&self) -> usize {
        self.log_probs.len()
    }

    pub fn log_probability(&self, outcome: usize) -> f64 {
        self.log_probs[outcome]
    }

    pub fn probability(&self, outcome: usize) -> f64 {
        self.log_probs[outcome].exp()
    }

    /// Return of asset `i` in the given outcome.
    pub fn asset_return(outcome: usize, i: usize) -> f64 {
        if outcome >> i & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Outcomes with their probabilities.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.log_probs
            .iter()
            .enumerate()
            .map(|(i, lp)| (i, lp.exp()))
    }

    pub fn total_probability(&self) -> f64 {
        compensated_sum(self.iter().map(|(_, p)| p))
    }

    /// `P(+ᵢ)`.
    pub fn marginal_win(&self, i: usize) -> f64 {
        compensated_sum(self.iter().filter(|(o, _)| o >> i & 1 == 1).map(|(_, p)| p))
    }

    /// Pearson correlation of assets `i` and `j` under the exact table.
    pub fn pairwise_correlation(&self, i: usize, j: usize) -> f64 {
        let (mut ei, mut ej, mut eij) = (0.0, 0.0, 0.0);
        for (o, p) in self.iter() {
            let (ri, rj) = (Self::asset_return(o, i), Self::asset_return(o, j));
            ei += p * ri;
            ej += p * rj;
            eij += p * ri * rj;
        }
        let (vi, vj) = (1.0 - ei * ei, 1.0 - ej * ej);
        (eij - ei * ej) / (vi * vj).sqrt()
    }

    /// Probability of exactly `k` winners, for `k = 0..=M`.
    pub fn win_count_probabilities(&self) -> Vec<f64> {
        (0..=self.m())
            .map(|k| {
                compensated_sum(
                    self.iter()
                        .filter(|(o, _)| o.count_ones() as usize == k)
                        .map(|(_, p)| p),
                )
            })
            .collect()
    }
}

/// `n × M` matrix of sampled ±1 returns, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMatrix {
    m: usize,
    n: usize,
    data: Vec<i8>,
}

impl SampleMatrix {
    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn get(&self, t: usize, i: usize) -> i8 {
        self.data[t * self.m + i]
    }

    pub fn row(&self, t: usize) -> &[i8] {
        &self.data[t * self.m..(t + 1) * self.m]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|t| self.get(t, i) as f64).collect()
    }

    /// Columns as return series labelled `A01`, `A02`, ….
    pub fn to_return_series(&self) -> Result<Vec<ReturnSeries>> {
        let width = self.m.to_string().len().max(2);
        (0..self.m)
            .map(|i| ReturnSeries::new(format!("A{:0width$}", i + 1), self.column(i)))
            .collect()
    }
}

/// Draws `n` independent outcome vectors.
pub fn sample(params: BinaryModelParams, n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InputShape("sample size must be at least 1".into()));
    }
    let m = params.m();
    let (qw, ql) = (
        params.win_given_hidden_win(),
        params.win_given_hidden_loss(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * m);
    for _ in 0..n {
        let q = if rng.gen_bool(params.p()) { qw } else { ql };
        for _ in 0..m {
            data.push(if rng.gen_bool(q.clamp(0.0, 1.0)) {
                1
            } else {
                -1
            });
        }
    }
    Ok(SampleMatrix { m, n, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrmat::estimate_matrix;
    use approx::assert_abs_diff_eq;

    fn joint(m: usize, p: f64, c: f64) -> JointBinaryDistribution {
        build_joint(BinaryModelParams::new(m, p, c).unwrap()).unwrap()
    }

    #[test]
    fn param_validation() {
        assert!(BinaryModelParams::new(3, 0.0, 0.2).is_err());
        assert!(BinaryModelParams::new(3, 1.0, 0.2).is_err());
        assert!(BinaryModelParams::new(3, 0.5, -0.1).is_err());
        assert!(BinaryModelParams::new(0, 0.5, 0.1).is_err());
        let too_many = BinaryModelParams::new(21, 0.5, 0.1).unwrap();
        assert!(matches!(
            build_joint(too_many),
            Err(Error::EnumerationLimit { .. })
        ));
    }

    #[test]
    fn zero_correlation_is_independent() {
        let (m, p) = (4, 0.6);
        let d = joint(m, p, 0.0);
        for (o, prob) in d.iter() {
            let k = o.count_ones() as i32;
            let want = p.powi(k) * (1.0 - p).powi(m as i32 - k);
            assert_abs_diff_eq!(prob, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn full_correlation_is_two_point() {
        let (m, p) = (5, 0.55);
        let d = joint(m, p, 1.0);
        for (o, prob) in d.iter() {
            let want = if o == (1 << m) - 1 {
                p
            } else if o == 0 {
                1.0 - p
            } else {
                0.0
            };
            assert_abs_diff_eq!(prob, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_asset_table_by_hand() {
        // P(++) = p·qw² + (1−p)·ql², etc., with √0.25 = 0.5.
        let (p, c): (f64, f64) = (0.55, 0.25);
        let (qw, ql) = (p + (1.0 - p) * 0.5, p * 0.5);
        let pp = p * qw * qw + (1.0 - p) * ql * ql;
        let pm = p * qw * (1.0 - qw) + (1.0 - p) * ql * (1.0 - ql);
        let mm = p * (1.0 - qw).powi(2) + (1.0 - p) * (1.0 - ql).powi(2);
        let d = joint(2, p, c);
        assert_abs_diff_eq!(d.probability(0b11), pp, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probability(0b01), pm, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probability(0b10), pm, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probability(0b00), mm, epsilon = 1e-15);
        let marginal = pp + pm;
        assert_abs_diff_eq!(marginal, 0.55, epsilon = 1e-15);
        let cov = (pp + mm - 2.0 * pm) - (2.0 * marginal - 1.0).powi(2);
        let corr = cov / (1.0 - (2.0 * marginal - 1.0).powi(2));
        assert_abs_diff_eq!(corr, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(d.pairwise_correlation(0, 1), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn normalization_marginals_and_correlation() {
        for m in [1, 2, 3, 5, 8] {
            for p in [0.3, 0.55, 0.6, 0.7] {
                for c in [0.0, 0.25, 0.5, 0.9, 1.0] {
                    let d = joint(m, p, c);
                    assert!((d.total_probability() - 1.0).abs() <= 1e-12);
                    for i in 0..m {
                        assert!((d.marginal_win(i) - p).abs() <= 1e-12);
                    }
                    if m >= 2 {
                        assert!((d.pairwise_correlation(0, m - 1) - c).abs() <= 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn table_survives_m_twenty() {
        let d = joint(20, 0.7, 0.05);
        assert!((d.total_probability() - 1.0).abs() <= 1e-12);
        assert!(d.log_probability(0).is_finite());
    }

    #[test]
    fn exchangeable_under_swaps() {
        let d = joint(5, 0.62, 0.37);
        let swap = |o: usize, i: usize, j: usize| {
            let (bi, bj) = (o >> i & 1, o >> j & 1);
            (o & !(1 << i) & !(1 << j)) | (bj << i) | (bi << j)
        };
        for (i, j) in [(0, 1), (1, 4), (2, 3)] {
            for o in 0..d.outcome_count() {
                assert_eq!(d.log_probability(o), d.log_probability(swap(o, i, j)));
            }
        }
    }

    #[test]
    fn win_counts_sum_to_one() {
        let d = joint(6, 0.55, 0.2);
        let k = d.win_count_probabilities();
        assert_eq!(k.len(), 7);
        assert_abs_diff_eq!(k.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn perfectly_correlated_samples_are_constant_rows() {
        let s = sample(BinaryModelParams::new(6, 0.55, 1.0).unwrap(), 500, 17).unwrap();
        for t in 0..s.rows() {
            let r = s.row(t);
            assert!(r.iter().all(|&x| x == r[0]));
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let params = BinaryModelParams::new(4, 0.6, 0.3).unwrap();
        assert_eq!(
            sample(params, 100, 5).unwrap(),
            sample(params, 100, 5).unwrap()
        );
        assert_ne!(
            sample(params, 100, 5).unwrap(),
            sample(params, 100, 6).unwrap()
        );
    }

    #[test]
    fn sample_marginal_and_correlation() {
        let n = 100_000;
        let s = sample(BinaryModelParams::new(4, 0.55, 0.3).unwrap(), n, 2024).unwrap();
        for i in 0..4 {
            let wins = s.column(i).iter().filter(|&&x| x > 0.0).count() as f64 / n as f64;
            assert!((wins - 0.55).abs() < 0.005, "asset {i}: {wins}");
        }
        let c = estimate_matrix(&s.to_return_series().unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(
                        (c.get(i, j) - 0.3).abs() < 0.02,
                        "C[{i},{j}] = {}",
                        c.get(i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn sampling_matches_enumeration_in_total_variation() {
        let params = BinaryModelParams::new(3, 0.6, 0.4).unwrap();
        let n = 1_000_000;
        let s = sample(params, n, 77).unwrap();
        let mut counts = [0usize; 8];
        for t in 0..n {
            let idx = s
                .row(t)
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &r)| acc | (usize::from(r > 0) << i));
            counts[idx] += 1;
        }
        let d = build_joint(params).unwrap();
        let tv: f64 = 0.5
            * (0..8)
                .map(|o| (counts[o] as f64 / n as f64 - d.probability(o)).abs())
                .sum::<f64>();
        assert!(tv < 0.01, "total variation {tv}");
    }
}
