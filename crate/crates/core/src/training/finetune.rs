use ndarray::{Array1, Array2, Axis};

use crate::encoders::ParamTensors;
use crate::error::{Error, Result};
use crate::training::optim::{optimizer_step, OptimConfig, OptimState};

const SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub optim: OptimConfig,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            optim: OptimConfig::default().with_learning_rate(1e-2),
        }
    }
}

/// Two-class softmax head over pooled node embeddings. Inputs are
/// standardized with statistics of the labeled training subset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    /// `D × 2`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub feature_mean: Array1<f64>,
    pub feature_scale: Array1<f64>,
}

impl ParamTensors for ClassifierHead {
    fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        vec![
            (
                "head.weight".into(),
                self.weight.shape().to_vec(),
                self.weight.as_slice().expect("standard layout"),
            ),
            (
                "head.bias".into(),
                self.bias.shape().to_vec(),
                self.bias.as_slice().expect("standard layout"),
            ),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.weight.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
}

impl ClassifierHead {
    fn standardize(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.feature_mean) / &self.feature_scale
    }

    /// Class probabilities, one row per input.
    pub fn predict_proba(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.weight.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "head expects {} features, got {}",
                self.weight.nrows(),
                features.ncols()
            )));
        }
        let mut logits = self.standardize(features).dot(&self.weight) + &self.bias;
        softmax_rows(&mut logits);
        Ok(logits)
    }

    /// Probability of class 1 for each input.
    pub fn scores(&self, features: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.predict_proba(features)?.column(1).to_vec())
    }
}

/// Stacks pooled vectors into a matrix.
pub fn stack_features(rows: &[Array1<f64>]) -> Result<Array2<f64>> {
    let d = rows.first().map(|r| r.len()).ok_or(Error::EmptyDataset)?;
    let mut out = Array2::zeros((rows.len(), d));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::DimensionMismatch(format!("feature {i} has length {}, expected {d}", r.len())));
        }
        out.row_mut(i).assign(r);
    }
    Ok(out)
}

/// Full-batch softmax cross-entropy training on the `labeled` rows of
/// `features`. The head starts at zero, so the result depends only on inputs.
pub fn finetune(features: &Array2<f64>, labels: &[u8], labeled: &[usize], cfg: &FinetuneConfig) -> Result<ClassifierHead> {
    cfg.optim.validate()?;
    if labels.len() != features.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.nrows()
        )));
    }
    if labeled.is_empty() {
        return Err(Error::SingleClass);
    }
    if let Some(&bad) = labeled.iter().find(|&&i| i >= labels.len()) {
        return Err(Error::InvalidArgument(format!("labeled index {bad} out of range")));
    }
    let y: Vec<u8> = labeled.iter().map(|&i| labels[i]).collect();
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass);
    }
    let x = features.select(Axis(0), labeled);
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let scale = x
        .var_axis(Axis(0), 0.0)
        .mapv(|v| if v.sqrt() < SCALE_FLOOR { 1.0 } else { v.sqrt() });
    let mut head = ClassifierHead {
        weight: Array2::zeros((d, 2)),
        bias: Array1::zeros(2),
        feature_mean: mean,
        feature_scale: scale,
    };
    let xs = head.standardize(&x);
    let mut onehot = Array2::zeros((y.len(), 2));
    for (i, &l) in y.iter().enumerate() {
        onehot[[i, l as usize]] = 1.0;
    }
    let mut state = OptimState::new(&head, cfg.optim);
    for _ in 0..cfg.epochs {
        let mut p = xs.dot(&head.weight) + &head.bias;
        softmax_rows(&mut p);
        let dlogits = (p - &onehot) / n;
        let grads = ClassifierHead {
            weight: xs.t().dot(&dlogits),
            bias: dlogits.sum_axis(Axis(0)),
            feature_mean: Array1::zeros(0),
            feature_scale: Array1::zeros(0),
        };
        optimizer_step(&mut head, &grads, &mut state)?;
    }
    if !head.all_finite() {
        return Err(Error::NumericFailure("classifier head became non-finite".into()));
    }
    Ok(head)
}
