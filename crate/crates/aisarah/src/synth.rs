//! Synthetic binary-classification problems for tests and the theory tools.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::data::{self, SparseDataset};
use crate::error::{Error, Result};
use crate::optim::seeded_rng as chacha;

/// Dense Gaussian features, labels from a random separating hyperplane,
/// then the standard preprocessing (unit-norm rows, appended bias).
///
/// Capped at 500 rows: these problems exist so that exhaustive checks
/// (full Gram spectra, per-sample smoothness scans) stay cheap.
pub fn gaussian_logistic(n: usize, d: usize, seed: u64) -> Result<SparseDataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig("need n >= 1 and d >= 1".into()));
    }
    if n > 500 {
        return Err(Error::InvalidConfig(format!(
            "synthetic problems are capped at 500 rows (asked for {n})"
        )));
    }
    let mut rng: ChaCha20Rng = chacha(seed);
    let hyperplane: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let margin: f64 = x.iter().zip(&hyperplane).map(|(a, b)| a * b).sum();
        labels.push(if margin >= 0.0 { 1.0 } else { -1.0 });
        rows.push(x);
    }
    // A degenerate draw can land every point on one side; flip one label so
    // the two-class invariant of the pipeline holds.
    if labels.iter().all(|&y| y == labels[0]) {
        let last = labels.len() - 1;
        labels[last] = -labels[last];
    }
    let raw = data::from_dense_rows(&rows, &labels);
    data::preprocess(&raw)
}
