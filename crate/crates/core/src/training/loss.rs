use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::encoders::Representation;
use crate::error::{Error, Result};

/// Variance floor added inside the column standard deviation.
pub const STANDARDIZE_EPS: f64 = 1e-8;

/// Weights of the two decorrelation penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Time-domain decorrelation weight.
    pub gamma: f64,
    /// Frequency-domain decorrelation weight.
    pub beta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-5,
            beta: 1e-4,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("loss.{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Loss value split into its terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    /// Alignment term (`‖Z_T − Z_F‖²` or the cosine distance).
    pub align: f64,
    /// Unweighted `‖Z_TᵀZ_T − I‖²`.
    pub decor_time: f64,
    /// Unweighted `‖Z_FᵀZ_F − I‖²`.
    pub decor_freq: f64,
}

impl LossTerms {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.align.is_finite() && self.decor_time.is_finite() && self.decor_freq.is_finite()
    }

    pub(crate) fn accumulate(&mut self, other: &LossTerms) {
        self.total += other.total;
        self.align += other.align;
        self.decor_time += other.decor_time;
        self.decor_freq += other.decor_freq;
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.total *= s;
        self.align *= s;
        self.decor_time *= s;
        self.decor_freq *= s;
    }
}

/// Pretraining objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Squared alignment plus both decorrelation penalties.
    Consistency,
    /// `Σ_i (1 − cos(a_i, b_i))` over node rows.
    Cosine,
    /// Cosine alignment plus both decorrelation penalties.
    CosineDecorrelation,
}

/// Which encoders are trained and read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveEncoders {
    Both,
    TimeOnly,
    FreqOnly,
}

fn check_pair(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "representations differ in shape: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure("non-finite value in representation".into()));
    }
    Ok(())
}

/// `‖ZᵀZ − I‖²_F` and `Z (ZᵀZ − I)`.
fn gram_penalty(z: &Array2<f64>) -> (f64, Array2<f64>) {
    let mut g = z.t().dot(z);
    for i in 0..g.nrows() {
        g[[i, i]] -= 1.0;
    }
    let value = g.iter().map(|v| v * v).sum();
    (value, z.dot(&g))
}

/// The domain-consistency loss on two (already standardized) representations.
pub fn consistency_loss(zt: &Representation, zf: &Representation, cfg: LossConfig) -> Result<LossTerms> {
    check_pair(&zt.z, &zf.z)?;
    Ok(loss_and_grad(&zt.z, &zf.z, cfg, Objective::Consistency, ActiveEncoders::Both)?.0)
}

/// Loss plus its gradient with respect to each input.
pub(crate) fn loss_and_grad(
    a: &Array2<f64>,
    b: &Array2<f64>,
    cfg: LossConfig,
    objective: Objective,
    active: ActiveEncoders,
) -> Result<(LossTerms, Array2<f64>, Array2<f64>)> {
    check_pair(a, b)?;
    let mut terms = LossTerms::default();
    let mut da = Array2::zeros(a.raw_dim());
    let mut db = Array2::zeros(b.raw_dim());

    match active {
        ActiveEncoders::TimeOnly => {
            let (v, g) = gram_penalty(a);
            terms.decor_time = v;
            terms.total = cfg.gamma * v;
            da.scaled_add(4.0 * cfg.gamma, &g);
            return Ok((terms, da, db));
        }
        ActiveEncoders::FreqOnly => {
            let (v, g) = gram_penalty(b);
            terms.decor_freq = v;
            terms.total = cfg.beta * v;
            db.scaled_add(4.0 * cfg.beta, &g);
            return Ok((terms, da, db));
        }
        ActiveEncoders::Both => {}
    }

    match objective {
        Objective::Consistency => {
            let diff = a - b;
            terms.align = diff.iter().map(|v| v * v).sum();
            da.scaled_add(2.0, &diff);
            db.scaled_add(-2.0, &diff);
        }
        Objective::Cosine | Objective::CosineDecorrelation => {
            let (value, ga, gb) = cosine_distance(a, b);
            terms.align = value;
            da += &ga;
            db += &gb;
        }
    }
    if objective != Objective::Cosine {
        let (vt, gt) = gram_penalty(a);
        let (vf, gf) = gram_penalty(b);
        terms.decor_time = vt;
        terms.decor_freq = vf;
        da.scaled_add(4.0 * cfg.gamma, &gt);
        db.scaled_add(4.0 * cfg.beta, &gf);
    }
    terms.total = terms.align + cfg.gamma * terms.decor_time + cfg.beta * terms.decor_freq;
    if !terms.is_finite() {
        return Err(Error::NumericFailure(format!("loss became non-finite: {terms:?}")));
    }
    Ok((terms, da, db))
}

const COSINE_NORM_FLOOR: f64 = 1e-12;

fn cosine_distance(a: &Array2<f64>, b: &Array2<f64>) -> (f64, Array2<f64>, Array2<f64>) {
    let mut value = 0.0;
    let mut ga = Array2::zeros(a.raw_dim());
    let mut gb = Array2::zeros(b.raw_dim());
    for (i, (ra, rb)) in a.rows().into_iter().zip(b.rows()).enumerate() {
        let na = ra.dot(&ra).sqrt().max(COSINE_NORM_FLOOR);
        let nb = rb.dot(&rb).sqrt().max(COSINE_NORM_FLOOR);
        let dot = ra.dot(&rb);
        let cos = dot / (na * nb);
        value += 1.0 - cos;
        // d(−cos)/da = −b/(|a||b|) + cos·a/|a|²
        let mut row_a = ga.row_mut(i);
        row_a.scaled_add(-1.0 / (na * nb), &rb);
        row_a.scaled_add(cos / (na * na), &ra);
        let mut row_b = gb.row_mut(i);
        row_b.scaled_add(-1.0 / (na * nb), &ra);
        row_b.scaled_add(cos / (nb * nb), &rb);
    }
    (value, ga, gb)
}

/// Column statistics kept for the standardization backward pass.
#[derive(Debug, Clone)]
pub struct StandardizeCache {
    pub normalized: Array2<f64>,
    pub sigma: Array1<f64>,
}

/// `(z − μ) / (σ √N)` per column, `σ = sqrt(var + eps)` with the biased variance.
pub fn standardize_columns(z: &Array2<f64>) -> (Array2<f64>, StandardizeCache) {
    let n = z.nrows() as f64;
    let mean = z.mean_axis(Axis(0)).expect("nonempty representation");
    let centered = z - &mean;
    let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("nonempty representation");
    let sigma = var.mapv(|v| (v + STANDARDIZE_EPS).sqrt());
    let normalized = &centered / &sigma;
    let out = &normalized / n.sqrt();
    (out, StandardizeCache { normalized, sigma })
}

/// Gradient through [`standardize_columns`].
pub fn standardize_backward(grad_out: &Array2<f64>, cache: &StandardizeCache) -> Array2<f64> {
    let n = grad_out.nrows() as f64;
    let g = grad_out / n.sqrt();
    let mean_g = g.mean_axis(Axis(0)).expect("nonempty gradient");
    let mean_gx = (&g * &cache.normalized).mean_axis(Axis(0)).expect("nonempty gradient");
    let mut out = &g - &mean_g;
    out -= &(&cache.normalized * &mean_gx);
    out / &cache.sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::Domain;
    use ndarray::array;

    fn rep(z: Array2<f64>, domain: Domain) -> Representation {
        Representation { z, domain }
    }

    #[test]
    fn orthonormal_equal_pair_is_zero() {
        let z = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let l = consistency_loss(&rep(z.clone(), Domain::Time), &rep(z, Domain::Frequency), LossConfig::default()).unwrap();
        assert_eq!(l.total, 0.0);
    }

    #[test]
    fn zero_pair_penalty_counts_dimensions() {
        let z = Array2::zeros((5, 4));
        let cfg = LossConfig { gamma: 0.3, beta: 0.7 };
        let l = consistency_loss(&rep(z.clone(), Domain::Time), &rep(z, Domain::Frequency), cfg).unwrap();
        assert!((l.total - 4.0).abs() < 1e-15);
        assert_eq!(l.decor_time, 4.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = rep(Array2::zeros((3, 2)), Domain::Time);
        let b = rep(Array2::zeros((3, 3)), Domain::Frequency);
        assert!(consistency_loss(&a, &b, LossConfig::default()).is_err());
        let mut c = Array2::zeros((3, 2));
        c[[0, 0]] = f64::NAN;
        assert!(consistency_loss(&a, &rep(c, Domain::Frequency), LossConfig::default()).is_err());
        assert!(LossConfig { gamma: -1.0, beta: 0.0 }.validate().is_err());
    }

    #[test]
    fn standardized_columns_have_unit_sum_of_squares() {
        let z = array![[1.0, 5.0], [2.0, -1.0], [4.0, 0.5], [-3.0, 2.0]];
        let (s, _) = standardize_columns(&z);
        for c in s.columns() {
            assert!(c.sum().abs() < 1e-12);
            assert!((c.dot(&c) - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn cosine_of_identical_rows_is_zero() {
        let a = array![[1.0, 2.0], [-3.0, 0.5]];
        let (t, _, _) = loss_and_grad(&a, &(&a * 2.0), LossConfig::default(), Objective::Cosine, ActiveEncoders::Both).unwrap();
        assert!(t.align.abs() < 1e-15);
        assert_eq!(t.decor_time, 0.0);
    }
}
