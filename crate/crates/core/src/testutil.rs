use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corrmat::{CorrelationMatrix, ReturnSeries};

pub fn series(id: &str, xs: &[f64]) -> ReturnSeries {
    ReturnSeries::new(id, xs.to_vec()).unwrap()
}

/// Random well-conditioned correlation matrix from a factor model.
pub fn random_correlation(m: usize, seed: u64) -> CorrelationMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = m + 2;
    let a = DMatrix::<f64>::from_fn(m, k, |_, _| rng.gen_range(-1.0..1.0));
    let mut cov = &a * a.transpose();
    for i in 0..m {
        cov[(i, i)] += 0.2;
    }
    let d: Vec<f64> = (0..m).map(|i| cov[(i, i)].sqrt()).collect();
    let c = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (d[i] * d[j])
        }
    });
    CorrelationMatrix::new(c).unwrap()
}
