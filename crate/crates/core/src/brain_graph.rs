//! Functional-connectivity graphs: Pearson correlation, density thresholding,
//! combinatorial Laplacian and its symmetric eigendecomposition.

use std::hash::{Hash, Hasher};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Default fraction of ROI pairs kept as edges.
pub const DEFAULT_DENSITY: f64 = 0.2;

const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// A subject's brain graph: loop-free symmetric adjacency plus the
/// time-domain node features (row `i` is ROI `i`'s signal).
#[derive(Debug, Clone, PartialEq)]
pub struct BrainGraph {
    pub adjacency: Array2<f64>,
    pub features_time: Array2<f64>,
}

impl BrainGraph {
    pub fn new(adjacency: Array2<f64>, features_time: Array2<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n || features_time.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency {:?} vs features {:?}",
                adjacency.dim(),
                features_time.dim()
            )));
        }
        Ok(Self {
            adjacency,
            features_time,
        })
    }

    /// Correlation graph of a subject's series at the given edge density.
    pub fn from_series(series: &Array2<f64>, density: f64) -> Result<Self> {
        let corr = pearson_matrix(series)?;
        let adjacency = threshold_graph(&corr, density)?;
        Self::new(adjacency, series.clone())
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let n = self.n_nodes();
        let mut count = 0;
        for i in 0..n {
            for j in i + 1..n {
                if self.adjacency[[i, j]] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// `D̃^{-1/2} (A + I) D̃^{-1/2}`, the GCN propagation matrix.
    pub fn normalized_adjacency(&self) -> Array2<f64> {
        let n = self.n_nodes();
        let mut a = self.adjacency.clone();
        for i in 0..n {
            a[[i, i]] += 1.0;
        }
        let inv_sqrt: Vec<f64> = a
            .sum_axis(Axis(1))
            .iter()
            .map(|d| 1.0 / d.sqrt())
            .collect();
        for ((i, j), v) in a.indexed_iter_mut() {
            *v *= inv_sqrt[i] * inv_sqrt[j];
        }
        a
    }
}

/// Pearson correlation between every pair of rows.
pub fn pearson_matrix(series: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, d) = series.dim();
    if d < 2 {
        return Err(Error::DimensionMismatch(format!(
            "need at least 2 time points, got {d}"
        )));
    }
    let mut centered = series.clone();
    for (roi, mut row) in centered.axis_iter_mut(Axis(0)).enumerate() {
        let mean = row.sum() / d as f64;
        row.mapv_inplace(|x| x - mean);
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVariance { roi });
        }
        row.mapv_inplace(|x| x / norm);
    }
    let mut corr = centered.dot(&centered.t());
    for i in 0..n {
        corr[[i, i]] = 1.0;
        for j in i + 1..n {
            let v = corr[[i, j]].clamp(-1.0, 1.0);
            corr[[i, j]] = v;
            corr[[j, i]] = v;
        }
    }
    Ok(corr)
}

/// Number of undirected edges kept at `density` for an `n`-node graph.
pub fn edge_quota(n: usize, density: f64) -> usize {
    let pairs = n * n.saturating_sub(1) / 2;
    // floor with a guard against products like 0.2 * 45 = 8.999...
    (density * pairs as f64 + 1e-9).floor() as usize
}

/// Keep the `⌊density · N(N−1)/2⌋` strongest strictly positive correlations.
///
/// Ties at the quota boundary resolve in lexicographic `(i, j)` order. The
/// returned adjacency copies retained entries from `corr` verbatim.
pub fn threshold_graph(corr: &Array2<f64>, density: f64) -> Result<Array2<f64>> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    let n = corr.nrows();
    if corr.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "correlation matrix must be square, got {:?}",
            corr.dim()
        )));
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = corr[[i, j]];
            if v > 0.0 {
                candidates.push((v, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let quota = edge_quota(n, density);
    let mut adjacency = Array2::zeros((n, n));
    for &(v, i, j) in candidates.iter().take(quota) {
        adjacency[[i, j]] = v;
        adjacency[[j, i]] = v;
    }
    if candidates.is_empty() {
        log::warn!("no positive correlations; graph has no edges");
    }
    Ok(adjacency)
}

/// Combinatorial Laplacian `L = D − A`.
pub fn laplacian(graph: &BrainGraph) -> Array2<f64> {
    laplacian_of(graph.adjacency.view())
}

pub(crate) fn laplacian_of(adjacency: ArrayView2<f64>) -> Array2<f64> {
    let degree = adjacency.sum_axis(Axis(1));
    let mut l = adjacency.mapv(|a| -a);
    for (i, d) in degree.iter().enumerate() {
        l[[i, i]] += d;
    }
    l
}

/// Laplacian eigenbasis: ascending eigenvalues, orthonormal eigenvectors in
/// the columns of `eigenvectors`.
///
/// Each column is sign-normalized so that its largest-magnitude entry (lowest
/// index on ties) is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
    id: u64,
}

impl SpectralBasis {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Content fingerprint; spectral features carry it to detect mixing bases.
    pub fn id(&self) -> u64 {
        self.id
    }

    /// Build a basis from already-orthonormal columns; applies the ordering
    /// and sign conventions.
    pub fn from_parts(eigenvalues: Array1<f64>, eigenvectors: Array2<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.dim() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues but eigenvector matrix {:?}",
                n,
                eigenvectors.dim()
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]).then(a.cmp(&b)));
        let values = Array1::from_iter(order.iter().map(|&k| eigenvalues[k]));
        let mut vectors = Array2::zeros((n, n));
        for (dst, &src) in order.iter().enumerate() {
            let col = eigenvectors.column(src);
            // Magnitudes within rounding of the maximum count as ties.
            let max = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            let pivot = (0..n)
                .find(|&i| col[i].abs() >= max - 1e-12)
                .unwrap_or(0);
            let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
            vectors.column_mut(dst).assign(&col.mapv(|x| sign * x));
        }
        let id = fingerprint(&values, &vectors);
        Ok(Self {
            eigenvalues: values,
            eigenvectors: vectors,
            id,
        })
    }

    /// Number of eigenvalues with magnitude below `tol`.
    pub fn zero_count(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|l| l.abs() < tol).count()
    }
}

fn fingerprint(values: &Array1<f64>, vectors: &Array2<f64>) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    values.len().hash(&mut h);
    for v in values.iter().chain(vectors.iter()) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn eigendecompose(matrix: &Array2<f64>) -> Result<SpectralBasis> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix must be square, got {:?}",
            matrix.dim()
        )));
    }
    let scale = matrix.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let mut asymmetry = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            asymmetry = asymmetry.max((matrix[[i, j]] - matrix[[j, i]]).abs());
        }
    }
    if asymmetry > SYMMETRY_TOLERANCE * scale || matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotSymmetric { asymmetry });
    }

    // Row-major working copies; the rotations touch rows and columns p, q.
    let mut a: Vec<f64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            a.push(0.5 * (matrix[[i, j]] + matrix[[j, i]]));
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = JACOBI_TOLERANCE * frob.max(1.0);

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off = off_norm(&a);
        if off > tol {
            return Err(Error::NoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
                off_norm: off,
            });
        }
    }
    let eigenvalues = Array1::from_iter((0..n).map(|i| a[i * n + i]));
    let eigenvectors = Array2::from_shape_vec((n, n), v).expect("n*n buffer");
    SpectralBasis::from_parts(eigenvalues, eigenvectors)
}
