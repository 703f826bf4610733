use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::brain_graph::SpectralBasis;
use crate::encoders::{fgnn_forward, init_params, ModelDims};
use crate::error::{Error, Result};
use crate::seed;
use crate::spectral::{build_filter_bank, gft, BandSet};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub k: usize,
    /// `(N, mean seconds per forward pass)`.
    pub rows: Vec<(usize, f64)>,
    /// Least-squares slope of log time against log N; `None` with fewer than two sizes.
    pub slope: Option<f64>,
}

/// Random orthonormal basis (modified Gram–Schmidt on a Gaussian matrix) with
/// sorted random eigenvalues.
fn random_basis(n: usize, rng: &mut impl Rng) -> Result<SpectralBasis> {
    let mut q = Array2::from_shape_fn((n, n), |_| rng.sample::<f64, _>(StandardNormal));
    for j in 0..n {
        for i in 0..j {
            let ci = q.column(i).to_owned();
            let dot = ci.dot(&q.column(j));
            q.column_mut(j).scaled_add(-dot, &ci);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    let mut values: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * n as f64)).collect();
    values.sort_by(f64::total_cmp);
    values[0] = 0.0;
    SpectralBasis::from_parts(values.into(), q)
}

const BATCHES: usize = 5;

/// Mean wall time of the frequency encoder forward pass at each size (best of
/// several batches of `trials` calls), with the basis built outside the timed
/// region.
pub fn scaling_probe(n_values: &[usize], k: usize, trials: usize, seed_value: u64) -> Result<ScalingTable> {
    if n_values.is_empty() || trials == 0 || k == 0 {
        return Err(Error::InvalidArgument("need at least one size, one trial and k > 0".into()));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!("sizes must be strictly ascending: {n_values:?}")));
    }
    let mut rng = seed::rng(seed_value, "scaling/inputs");
    let (_, params) = init_params(ModelDims::new(k, k), seed_value)?;
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        if n < 5 {
            return Err(Error::InvalidArgument(format!("size {n} too small for the filter bank")));
        }
        let basis = random_basis(n, &mut rng)?;
        let bank = build_filter_bank(&basis, 0.2, 0.2)?;
        let x = Array2::from_shape_fn((n, k), |_| rng.sample::<f64, _>(StandardNormal));
        let spec = gft(&x, &basis)?;
        // Warm-up pass keeps allocation effects out of the first timing.
        let mut sink = fgnn_forward(&spec, &bank, &basis, &params, BandSet::LOW_HIGH)?.z[[0, 0]];
        // Best of several batches: scheduler noise only ever adds time.
        let mut secs = f64::INFINITY;
        for _ in 0..BATCHES {
            let start = Instant::now();
            for _ in 0..trials {
                sink += fgnn_forward(&spec, &bank, &basis, &params, BandSet::LOW_HIGH)?.z[[0, 0]];
            }
            secs = secs.min(start.elapsed().as_secs_f64() / trials as f64);
        }
        std::hint::black_box(sink);
        rows.push((n, secs.max(f64::MIN_POSITIVE)));
    }
    let slope = log_log_slope(&rows);
    Ok(ScalingTable { k, rows, slope })
}

pub fn log_log_slope(rows: &[(usize, f64)]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(n, t)| ((n as f64).ln(), t.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}
