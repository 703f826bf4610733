//! The two domain encoders.
//!
//! * TGNN: a stack of symmetric-normalized GCN layers over the time-domain
//!   graph, `X ← ReLU(Â X W)` on hidden layers and linear on the last.
//! * FGNN: band selection in the spectral domain, a stack of Fourier graph
//!   operators combined as `Σ_p ReLU(X̃ S^{0:p} + b_p)` with `S⁰ = I`, the
//!   inverse transform, and a one-hidden-layer MLP applied to every node.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::brain_graph::{BrainGraph, SpectralBasis};
use crate::error::{Error, Result};
use crate::seed;
use crate::spectral::{select_components, BandSet, FilterBank, FilteredSpectrum, SpectralFeatures};

/// Layer sizes shared by both encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Input feature width (time points per ROI) and output width of both encoders.
    pub d: usize,
    /// Feature columns kept for the FGO stack.
    pub k: usize,
    pub gcn_layers: usize,
    pub gcn_width: usize,
    pub fgo_layers: usize,
    pub mlp_hidden: usize,
}

impl ModelDims {
    /// Two GCN layers of width `d`, three FGO layers, MLP hidden `max(k, d)`.
    pub fn new(d: usize, k: usize) -> Self {
        Self {
            d,
            k,
            gcn_layers: 2,
            gcn_width: d,
            fgo_layers: 3,
            mlp_hidden: k.max(d),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.gcn_layers == 0 || self.gcn_width == 0 || self.mlp_hidden == 0 {
            return Err(Error::InvalidArgument(format!("all model dimensions must be positive: {self:?}")));
        }
        if self.k > self.d {
            return Err(Error::InvalidArgument(format!(
                "k ({}) cannot exceed the feature width d ({})",
                self.k, self.d
            )));
        }
        Ok(())
    }
}

/// Read-only and mutable access to every learnable tensor, in a fixed order.
pub trait ParamTensors {
    fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.named_tensors()
            .iter()
            .all(|(_, _, t)| t.iter().all(|v| v.is_finite()))
    }
}

fn slice2(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("parameters are kept in standard layout")
}

fn slice2_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are kept in standard layout")
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("parameters are kept in standard layout")
}

fn slice1_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are kept in standard layout")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TgnnParams {
    pub weights: Vec<Array2<f64>>,
}

impl TgnnParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
        }
    }
}

impl ParamTensors for TgnnParams {
    fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        self.weights
            .iter()
            .enumerate()
            .map(|(l, w)| (format!("tgnn.w{l}"), w.shape().to_vec(), slice2(w)))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights.iter_mut().map(slice2_mut).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgnnParams {
    /// `S¹..Sᴾ`, each `K × K`. `S⁰` is the identity and is not stored.
    pub operators: Vec<Array2<f64>>,
    /// `b⁰..bᴾ`, each of length `K`.
    pub biases: Vec<Array1<f64>>,
    pub mlp: Mlp,
}

impl FgnnParams {
    pub fn k(&self) -> usize {
        self.mlp.w1.nrows()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            operators: self.operators.iter().map(|s| Array2::zeros(s.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            mlp: Mlp {
                w1: Array2::zeros(self.mlp.w1.raw_dim()),
                b1: Array1::zeros(self.mlp.b1.raw_dim()),
                w2: Array2::zeros(self.mlp.w2.raw_dim()),
                b2: Array1::zeros(self.mlp.b2.raw_dim()),
            },
        }
    }
}

impl ParamTensors for FgnnParams {
    fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (j, s) in self.operators.iter().enumerate() {
            out.push((format!("fgnn.s{}", j + 1), s.shape().to_vec(), slice2(s)));
        }
        for (p, b) in self.biases.iter().enumerate() {
            out.push((format!("fgnn.b{p}"), b.shape().to_vec(), slice1(b)));
        }
        let m = &self.mlp;
        out.push(("fgnn.mlp.w1".into(), m.w1.shape().to_vec(), slice2(&m.w1)));
        out.push(("fgnn.mlp.b1".into(), m.b1.shape().to_vec(), slice1(&m.b1)));
        out.push(("fgnn.mlp.w2".into(), m.w2.shape().to_vec(), slice2(&m.w2)));
        out.push(("fgnn.mlp.b2".into(), m.b2.shape().to_vec(), slice1(&m.b2)));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(self.operators.iter_mut().map(slice2_mut));
        out.extend(self.biases.iter_mut().map(slice1_mut));
        let m = &mut self.mlp;
        out.push(slice2_mut(&mut m.w1));
        out.push(slice1_mut(&mut m.b1));
        out.push(slice2_mut(&mut m.w2));
        out.push(slice1_mut(&mut m.b2));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Time,
    Frequency,
    Fused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    /// `N × D` node embeddings.
    pub z: Array2<f64>,
    pub domain: Domain,
}

impl Representation {
    /// Mean over nodes, the readout used by the classifier.
    pub fn mean_pool(&self) -> Array1<f64> {
        self.z.mean_axis(Axis(0)).expect("at least one node")
    }
}

fn xavier(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..=bound))
}

/// Glorot-uniform weights, zero biases, fully determined by `seed`.
pub fn init_params(dims: ModelDims, seed: u64) -> Result<(TgnnParams, FgnnParams)> {
    dims.validate()?;
    let mut rng = seed::rng(seed, "encoders/init");
    let mut weights = Vec::with_capacity(dims.gcn_layers);
    for l in 0..dims.gcn_layers {
        let fan_in = if l == 0 { dims.d } else { dims.gcn_width };
        let fan_out = if l + 1 == dims.gcn_layers { dims.d } else { dims.gcn_width };
        weights.push(xavier(&mut rng, fan_in, fan_out));
    }
    let operators = (0..dims.fgo_layers)
        .map(|_| xavier(&mut rng, dims.k, dims.k))
        .collect();
    let biases = (0..=dims.fgo_layers).map(|_| Array1::zeros(dims.k)).collect();
    let mlp = Mlp {
        w1: xavier(&mut rng, dims.k, dims.mlp_hidden),
        b1: Array1::zeros(dims.mlp_hidden),
        w2: xavier(&mut rng, dims.mlp_hidden, dims.d),
        b2: Array1::zeros(dims.d),
    };
    Ok((
        TgnnParams { weights },
        FgnnParams {
            operators,
            biases,
            mlp,
        },
    ))
}

/// Intermediates of a TGNN pass: per layer the propagated input `Â X` and the
/// pre-activation `Â X W`.
#[derive(Debug, Clone)]
pub struct TgnnCache {
    pub propagated: Vec<Array2<f64>>,
    pub preact: Vec<Array2<f64>>,
}

pub(crate) fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// TGNN forward over a precomputed propagation matrix `Â`.
pub fn tgnn_forward_cached(
    a_hat: &Array2<f64>,
    features: &Array2<f64>,
    params: &TgnnParams,
) -> Result<(Array2<f64>, TgnnCache)> {
    let n = a_hat.nrows();
    if features.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "features have {} rows, graph has {n} nodes",
            features.nrows()
        )));
    }
    let layers = params.weights.len();
    let mut h = features.clone();
    let mut cache = TgnnCache {
        propagated: Vec::with_capacity(layers),
        preact: Vec::with_capacity(layers),
    };
    for (l, w) in params.weights.iter().enumerate() {
        if h.ncols() != w.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "GCN layer {l} expects width {}, got {}",
                w.nrows(),
                h.ncols()
            )));
        }
        let p = a_hat.dot(&h);
        let q = p.dot(w);
        h = if l + 1 == layers { q.clone() } else { relu(&q) };
        cache.propagated.push(p);
        cache.preact.push(q);
    }
    Ok((h, cache))
}

/// `Z_T`: GCN stack over the time-domain graph.
pub fn tgnn_forward(graph: &BrainGraph, params: &TgnnParams) -> Result<Representation> {
    let a_hat = graph.normalized_adjacency();
    let (z, _) = tgnn_forward_cached(&a_hat, &graph.features_time, params)?;
    Ok(Representation {
        z,
        domain: Domain::Time,
    })
}

/// Intermediates of an FGNN pass after band selection.
#[derive(Debug, Clone)]
pub struct FgnnCache {
    /// `X̃_F`, `N × K`.
    pub input: Array2<f64>,
    /// `S^{0:p}` for `p = 0..=P` (`chain[0] = I`).
    pub chain: Vec<Array2<f64>>,
    /// `X̃_F S^{0:p} + b_p` for `p = 0..=P`.
    pub fgo_preact: Vec<Array2<f64>>,
    /// `U Z̃_F`.
    pub vertex: Array2<f64>,
    /// MLP hidden pre-activation.
    pub hidden_preact: Array2<f64>,
    pub hidden: Array2<f64>,
}

fn fgo_terms(xf: &Array2<f64>, params: &FgnnParams) -> Result<(Array2<f64>, Vec<Array2<f64>>, Vec<Array2<f64>>)> {
    let k = xf.ncols();
    if params.biases.len() != params.operators.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} FGO operators need {} biases, found {}",
            params.operators.len(),
            params.operators.len() + 1,
            params.biases.len()
        )));
    }
    for s in &params.operators {
        if s.dim() != (k, k) {
            return Err(Error::DimensionMismatch(format!(
                "FGO operator {:?} does not match K = {k}",
                s.dim()
            )));
        }
    }
    if params.biases.iter().any(|b| b.len() != k) {
        return Err(Error::DimensionMismatch(format!("FGO biases must have length {k}")));
    }
    let mut chain = Vec::with_capacity(params.operators.len() + 1);
    chain.push(Array2::eye(k));
    let mut preacts = Vec::with_capacity(params.biases.len());
    let mut out = Array2::zeros(xf.raw_dim());
    preacts.push(xf + &params.biases[0]);
    for (j, s) in params.operators.iter().enumerate() {
        let next = if j == 0 { s.clone() } else { chain[j].dot(s) };
        preacts.push(xf.dot(&next) + &params.biases[j + 1]);
        chain.push(next);
    }
    for t in &preacts {
        out.zip_mut_with(t, |o, &v| *o += v.max(0.0));
    }
    Ok((out, chain, preacts))
}

/// `Z̃_F = Σ_{p=0}^{P} ReLU(X̃_F S^{0:p} + b_p)` with `S^{0:0} = I`.
pub fn fgo_forward(xf: &FilteredSpectrum, params: &FgnnParams) -> Result<Array2<f64>> {
    Ok(fgo_terms(&xf.values, params)?.0)
}

/// FGNN forward from an already-filtered spectrum.
pub fn fgnn_forward_cached(
    filtered: &Array2<f64>,
    basis: &SpectralBasis,
    params: &FgnnParams,
) -> Result<(Array2<f64>, FgnnCache)> {
    if filtered.nrows() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "filtered spectrum has {} rows, basis has dimension {}",
            filtered.nrows(),
            basis.dim()
        )));
    }
    if params.mlp.w1.nrows() != filtered.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "MLP expects {} inputs, spectrum has {} columns",
            params.mlp.w1.nrows(),
            filtered.ncols()
        )));
    }
    let (z_fourier, chain, fgo_preact) = fgo_terms(filtered, params)?;
    let vertex = basis.eigenvectors.dot(&z_fourier);
    let hidden_preact = vertex.dot(&params.mlp.w1) + &params.mlp.b1;
    let hidden = relu(&hidden_preact);
    let z = hidden.dot(&params.mlp.w2) + &params.mlp.b2;
    Ok((
        z,
        FgnnCache {
            input: filtered.clone(),
            chain,
            fgo_preact,
            vertex,
            hidden_preact,
            hidden,
        },
    ))
}

/// `Z_F`: band selection, FGO stack, inverse transform, node-wise MLP.
pub fn fgnn_forward(
    spec: &SpectralFeatures,
    bank: &FilterBank,
    basis: &SpectralBasis,
    params: &FgnnParams,
    retained: BandSet,
) -> Result<Representation> {
    if spec.basis_id != basis.id() {
        return Err(Error::BasisMismatch);
    }
    let filtered = select_components(spec, bank, retained, params.k())?;
    let (z, _) = fgnn_forward_cached(&filtered.values, basis, params)?;
    Ok(Representation {
        z,
        domain: Domain::Frequency,
    })
}

/// `Z_TF = (Z_T + Z_F) / 2`.
pub fn fuse(zt: &Representation, zf: &Representation) -> Result<Representation> {
    if zt.domain != Domain::Time || zf.domain != Domain::Frequency {
        return Err(Error::InvalidArgument(format!(
            "fuse expects (time, frequency) representations, got ({:?}, {:?})",
            zt.domain, zf.domain
        )));
    }
    if zt.z.dim() != zf.z.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot fuse {:?} with {:?}",
            zt.z.dim(),
            zf.z.dim()
        )));
    }
    Ok(Representation {
        z: (&zt.z + &zf.z) * 0.5,
        domain: Domain::Fused,
    })
}
