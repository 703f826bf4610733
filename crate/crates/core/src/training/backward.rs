use ndarray::{Array2, Axis};

use crate::brain_graph::{BrainGraph, SpectralBasis};
use crate::encoders::{
    fgnn_forward_cached, tgnn_forward_cached, FgnnCache, FgnnParams, ParamTensors, TgnnCache, TgnnParams,
};
use crate::error::{Error, Result};
use crate::spectral::{build_filter_bank, gft, select_components, BandSet, FilterBank};
use crate::training::loss::{
    loss_and_grad, standardize_backward, standardize_columns, ActiveEncoders, LossConfig, LossTerms, Objective,
    StandardizeCache,
};

/// Both encoders, updated together during pretraining.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub tgnn: TgnnParams,
    pub fgnn: FgnnParams,
}

impl EncoderParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            tgnn: self.tgnn.zeros_like(),
            fgnn: self.fgnn.zeros_like(),
        }
    }
}

impl ParamTensors for EncoderParams {
    fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = self.tgnn.named_tensors();
        out.extend(self.fgnn.named_tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.tgnn.tensors_mut();
        out.extend(self.fgnn.tensors_mut());
        out
    }
}

/// Everything about a subject that stays fixed while the encoders train.
#[derive(Debug, Clone)]
pub struct PreparedSubject {
    pub id: String,
    pub a_hat: Array2<f64>,
    pub features: Array2<f64>,
    pub basis: SpectralBasis,
    pub bank: FilterBank,
    /// Band-masked spectrum truncated to `K` columns.
    pub filtered: Array2<f64>,
}

impl PreparedSubject {
    pub fn new(
        id: &str,
        graph: &BrainGraph,
        basis: SpectralBasis,
        p_low: f64,
        p_high: f64,
        retained: BandSet,
        k: usize,
    ) -> Result<Self> {
        let bank = build_filter_bank(&basis, p_low, p_high)?;
        let spec = gft(&graph.features_time, &basis)?;
        let filtered = select_components(&spec, &bank, retained, k)?.values;
        Ok(Self {
            id: id.to_string(),
            a_hat: graph.normalized_adjacency(),
            features: graph.features_time.clone(),
            basis,
            bank,
            filtered,
        })
    }
}

/// Intermediates of one subject's forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub zt: Array2<f64>,
    pub zf: Array2<f64>,
    pub tgnn: TgnnCache,
    pub fgnn: FgnnCache,
}

pub fn forward(subject: &PreparedSubject, params: &EncoderParams) -> Result<ForwardCache> {
    let (zt, tgnn) = tgnn_forward_cached(&subject.a_hat, &subject.features, &params.tgnn)?;
    let (zf, fgnn) = fgnn_forward_cached(&subject.filtered, &subject.basis, &params.fgnn)?;
    if zt.dim() != zf.dim() {
        return Err(Error::DimensionMismatch(format!(
            "encoder outputs differ: {:?} vs {:?}",
            zt.dim(),
            zf.dim()
        )));
    }
    Ok(ForwardCache { zt, zf, tgnn, fgnn })
}

/// Loss on the standardized encoder outputs, plus the gradients of that loss
/// with respect to the raw outputs.
fn standardized_loss(
    cache: &ForwardCache,
    cfg: LossConfig,
    objective: Objective,
    active: ActiveEncoders,
) -> Result<(LossTerms, Array2<f64>, Array2<f64>)> {
    let (a, sa): (Array2<f64>, StandardizeCache) = standardize_columns(&cache.zt);
    let (b, sb) = standardize_columns(&cache.zf);
    let (terms, da, db) = loss_and_grad(&a, &b, cfg, objective, active)?;
    Ok((terms, standardize_backward(&da, &sa), standardize_backward(&db, &sb)))
}

/// Objective value for one subject without gradients.
pub fn subject_loss(
    subject: &PreparedSubject,
    params: &EncoderParams,
    cfg: LossConfig,
    objective: Objective,
    active: ActiveEncoders,
) -> Result<LossTerms> {
    let cache = forward(subject, params)?;
    Ok(standardized_loss(&cache, cfg, objective, active)?.0)
}

/// Analytic gradients of the subject's standardized loss with respect to every
/// encoder parameter.
pub fn backward(
    subject: &PreparedSubject,
    params: &EncoderParams,
    cache: &ForwardCache,
    cfg: LossConfig,
    objective: Objective,
    active: ActiveEncoders,
) -> Result<(LossTerms, EncoderParams)> {
    let (terms, dzt, dzf) = standardized_loss(cache, cfg, objective, active)?;
    let mut grads = params.zeros_like();
    if active != ActiveEncoders::FreqOnly {
        tgnn_backward(&subject.a_hat, &params.tgnn, &cache.tgnn, dzt, &mut grads.tgnn);
    }
    if active != ActiveEncoders::TimeOnly {
        fgnn_backward(&subject.basis, &params.fgnn, &cache.fgnn, dzf, &mut grads.fgnn);
    }
    Ok((terms, grads))
}

fn relu_mask(grad: &mut Array2<f64>, preact: &Array2<f64>) {
    grad.zip_mut_with(preact, |g, &x| {
        if x <= 0.0 {
            *g = 0.0;
        }
    });
}

fn tgnn_backward(a_hat: &Array2<f64>, params: &TgnnParams, cache: &TgnnCache, dz: Array2<f64>, out: &mut TgnnParams) {
    let layers = params.weights.len();
    let mut dh = dz;
    for l in (0..layers).rev() {
        let mut dq = dh;
        if l + 1 != layers {
            relu_mask(&mut dq, &cache.preact[l]);
        }
        out.weights[l] = cache.propagated[l].t().dot(&dq);
        if l == 0 {
            break;
        }
        // Â is symmetric.
        dh = a_hat.dot(&dq.dot(&params.weights[l].t()));
    }
}

fn fgnn_backward(basis: &SpectralBasis, params: &FgnnParams, cache: &FgnnCache, dz: Array2<f64>, out: &mut FgnnParams) {
    let m = &params.mlp;
    out.mlp.w2 = cache.hidden.t().dot(&dz);
    out.mlp.b2 = dz.sum_axis(Axis(0));
    let mut dh = dz.dot(&m.w2.t());
    relu_mask(&mut dh, &cache.hidden_preact);
    out.mlp.w1 = cache.vertex.t().dot(&dh);
    out.mlp.b1 = dh.sum_axis(Axis(0));
    let dvertex = dh.dot(&m.w1.t());
    let dfourier = basis.eigenvectors.t().dot(&dvertex);

    // Term p is ReLU(X S^{0:p} + b_p); R_p is the gradient w.r.t. S^{0:p}.
    let depth = params.operators.len();
    let mut chain_grads = Vec::with_capacity(depth + 1);
    for p in 0..=depth {
        let mut dt = dfourier.clone();
        relu_mask(&mut dt, &cache.fgo_preact[p]);
        out.biases[p] = dt.sum_axis(Axis(0));
        chain_grads.push(cache.input.t().dot(&dt));
    }
    // S^{0:p} = S^{0:p-1} S_p, walked from the deepest product back.
    let k = cache.input.ncols();
    let mut acc = Array2::<f64>::zeros((k, k));
    for p in (1..=depth).rev() {
        acc += &chain_grads[p];
        out.operators[p - 1] = cache.chain[p - 1].t().dot(&acc);
        acc = acc.dot(&params.operators[p - 1].t());
    }
}
