// Shared fixtures and independent reference implementations.
#![allow(dead_code)]

use brainfreq::brain_graph::{eigendecompose, laplacian, BrainGraph};
use brainfreq::encoders::{init_params, FgnnParams, ModelDims, ParamTensors};
use brainfreq::seed;
use brainfreq::spectral::BandSet;
use brainfreq::training::{backward, forward, subject_loss, ActiveEncoders, EncoderParams, LossConfig, Objective, PreparedSubject};
use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(rows: usize, cols: usize, seed_value: u64, tag: &str) -> Array2<f64> {
    let mut rng = seed::rng(seed_value, tag);
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng))
}

pub fn graph_from_gaussian(n: usize, d: usize, seed_value: u64, density: f64) -> BrainGraph {
    BrainGraph::from_series(&gaussian(n, d, seed_value, "test/series"), density).unwrap()
}

pub fn subject(n: usize, d: usize, k: usize, seed_value: u64, retained: BandSet) -> PreparedSubject {
    let graph = graph_from_gaussian(n, d, seed_value, 0.4);
    let basis = eigendecompose(&laplacian(&graph)).unwrap();
    PreparedSubject::new("s", &graph, basis, 0.25, 0.25, retained, k).unwrap()
}

/// Initialized parameters with nonzero biases so every bias gradient matters.
pub fn model(d: usize, k: usize, seed_value: u64) -> EncoderParams {
    let (tgnn, mut fgnn) = init_params(ModelDims::new(d, k), seed_value).unwrap();
    let mut rng = seed::rng(seed_value, "test/bias");
    for b in fgnn.biases.iter_mut().chain([&mut fgnn.mlp.b1, &mut fgnn.mlp.b2]) {
        b.mapv_inplace(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            0.1 * v
        });
    }
    EncoderParams { tgnn, fgnn }
}

pub fn frob(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Worst relative error between analytic and central-difference gradients,
/// with the label of the offending entry.
pub fn gradient_check(
    s: &PreparedSubject,
    params: &EncoderParams,
    cfg: LossConfig,
    objective: Objective,
    active: ActiveEncoders,
    h: f64,
) -> (f64, String) {
    let cache = forward(s, params).unwrap();
    let (_, grads) = backward(s, params, &cache, cfg, objective, active).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .named_tensors()
        .into_iter()
        .map(|(n, _, t)| (n, t.to_vec()))
        .collect();
    let mut worst = (0.0, String::new());
    let mut probe = params.clone();
    for (ti, (name, values)) in analytic.iter().enumerate() {
        for (j, &a) in values.iter().enumerate() {
            let orig = probe.tensors_mut()[ti][j];
            probe.tensors_mut()[ti][j] = orig + h;
            let up = subject_loss(s, &probe, cfg, objective, active).unwrap().total;
            probe.tensors_mut()[ti][j] = orig - h;
            let down = subject_loss(s, &probe, cfg, objective, active).unwrap().total;
            probe.tensors_mut()[ti][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-2);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{j}]: analytic {a:e}, numeric {numeric:e}"));
            }
        }
    }
    worst
}

// ---- oracles -------------------------------------------------------------

/// Pearson correlation of rows `i` and `j` by direct summation.
pub fn pcc_direct(series: &Array2<f64>, i: usize, j: usize) -> f64 {
    let d = series.ncols();
    let mut mi = 0.0;
    let mut mj = 0.0;
    for t in 0..d {
        mi += series[[i, t]];
        mj += series[[j, t]];
    }
    mi /= d as f64;
    mj /= d as f64;
    let (mut num, mut si, mut sj) = (0.0, 0.0, 0.0);
    for t in 0..d {
        let a = series[[i, t]] - mi;
        let b = series[[j, t]] - mj;
        num += a * b;
        si += a * a;
        sj += b * b;
    }
    num / (si.sqrt() * sj.sqrt())
}

/// Exhaustive pairwise AUC: P(score_pos > score_neg) + ½ P(tie).
pub fn auc_pairwise(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|c| (0..inner).map(|m| row[m] * b[m][c]).sum())
                .collect()
        })
        .collect()
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Stacked FGO by explicit recursion: `S^{0:p} = S^{0:p-1} S_p`, summing
/// `ReLU(X S^{0:p} + b_p)` for `p = 0..=P`.
pub fn fgo_recursion(x: &Array2<f64>, params: &FgnnParams) -> Array2<f64> {
    let k = x.ncols();
    let xr = to_rows(x);
    let mut prod: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut out = vec![vec![0.0; k]; x.nrows()];
    for p in 0..=params.operators.len() {
        if p > 0 {
            prod = matmul(&prod, &to_rows(&params.operators[p - 1]));
        }
        let y = matmul(&xr, &prod);
        for (r, row) in y.iter().enumerate() {
            for c in 0..k {
                out[r][c] += (row[c] + params.biases[p][c]).max(0.0);
            }
        }
    }
    Array2::from_shape_fn((x.nrows(), k), |(r, c)| out[r][c])
}

/// Elementwise `Σ(a−b)² + γ Σ((aᵀa)_{ij} − δ_ij)² + β Σ((bᵀb)_{ij} − δ_ij)²`.
pub fn consistency_oracle(a: &Array2<f64>, b: &Array2<f64>, gamma: f64, beta: f64) -> [f64; 4] {
    let (n, k) = a.dim();
    let mut align = 0.0;
    for i in 0..n {
        for j in 0..k {
            align += (a[[i, j]] - b[[i, j]]).powi(2);
        }
    }
    let gram_pen = |z: &Array2<f64>| {
        let mut s = 0.0;
        for p in 0..k {
            for q in 0..k {
                let mut g = 0.0;
                for i in 0..n {
                    g += z[[i, p]] * z[[i, q]];
                }
                if p == q {
                    g -= 1.0;
                }
                s += g * g;
            }
        }
        s
    };
    let dt = gram_pen(a);
    let df = gram_pen(b);
    [align + gamma * dt + beta * df, align, dt, df]
}

/// Dense symmetric eigendecomposition via nalgebra, ascending eigenvalues.
pub fn nalgebra_eigen(m: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = m.nrows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    let eig = nalgebra::SymmetricEigen::new(dm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Connected components of an adjacency matrix by breadth-first search.
pub fn component_count(adjacency: &Array2<f64>) -> usize {
    let n = adjacency.nrows();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if !seen[v] && adjacency[[u, v]] != 0.0 {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    count
}
