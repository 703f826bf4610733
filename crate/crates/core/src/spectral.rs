//! Graph Fourier transform and the low/mid/high filter bank.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::brain_graph::SpectralBasis;
use crate::error::{Error, Result};

/// Node features expressed in a Laplacian eigenbasis; row `k` pairs with
/// eigenvalue `k` of the basis identified by `basis_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFeatures {
    pub coefficients: Array2<f64>,
    pub basis_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    Mid,
    High,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Low, Band::Mid, Band::High];

    pub fn name(self) -> &'static str {
        match self {
            Band::Low => "low",
            Band::Mid => "mid",
            Band::High => "high",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "low" => Ok(Band::Low),
            "mid" => Ok(Band::Mid),
            "high" => Ok(Band::High),
            other => Err(Error::InvalidArgument(format!(
                "unknown band {other:?} (expected low, mid or high)"
            ))),
        }
    }
}

/// A set of bands, kept as three flags so it is `Copy` and ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BandSet {
    low: bool,
    mid: bool,
    high: bool,
}

impl BandSet {
    pub const ALL: BandSet = BandSet {
        low: true,
        mid: true,
        high: true,
    };
    /// Low and high bands; the mid band is dropped.
    pub const LOW_HIGH: BandSet = BandSet {
        low: true,
        mid: false,
        high: true,
    };

    pub fn only(band: Band) -> Self {
        let mut set = BandSet::default();
        set.insert(band);
        set
    }

    pub fn insert(&mut self, band: Band) {
        match band {
            Band::Low => self.low = true,
            Band::Mid => self.mid = true,
            Band::High => self.high = true,
        }
    }

    pub fn contains(&self, band: Band) -> bool {
        match band {
            Band::Low => self.low,
            Band::Mid => self.mid,
            Band::High => self.high,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.low || self.mid || self.high)
    }

    pub fn iter(&self) -> impl Iterator<Item = Band> + '_ {
        Band::ALL.into_iter().filter(|b| self.contains(*b))
    }
}

impl fmt::Display for BandSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(Band::name).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for BandSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = BandSet::default();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            set.insert(part.parse()?);
        }
        if set.is_empty() {
            return Err(Error::InvalidArgument("empty band set".into()));
        }
        Ok(set)
    }
}

/// Disjoint binary masks over eigen-indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub low_mask: Array1<f64>,
    pub mid_mask: Array1<f64>,
    pub high_mask: Array1<f64>,
    pub p_low: f64,
    pub p_high: f64,
    /// Largest eigenvalue inside the low band.
    pub lambda_low: f64,
    /// Smallest eigenvalue inside the high band.
    pub lambda_high: f64,
}

impl FilterBank {
    pub fn mask(&self, band: Band) -> &Array1<f64> {
        match band {
            Band::Low => &self.low_mask,
            Band::Mid => &self.mid_mask,
            Band::High => &self.high_mask,
        }
    }

    /// Union of the masks in `set`.
    pub fn combined_mask(&self, set: BandSet) -> Array1<f64> {
        let mut m = Array1::zeros(self.low_mask.len());
        for band in set.iter() {
            m += self.mask(band);
        }
        m
    }

    pub fn band_len(&self, band: Band) -> usize {
        self.mask(band).iter().filter(|&&x| x == 1.0).count()
    }
}

/// Spectral coefficients after band selection and feature truncation; rows
/// outside the retained bands are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSpectrum {
    pub values: Array2<f64>,
    pub retained: BandSet,
}

/// `⌈p·n⌉`, tolerant of products that land a rounding error above an integer.
pub fn ceil_quota(p: f64, n: usize) -> usize {
    ((p * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// `Uᵀ X`.
pub fn gft(features: &Array2<f64>, basis: &SpectralBasis) -> Result<SpectralFeatures> {
    if features.nrows() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "features have {} rows, basis has dimension {}",
            features.nrows(),
            basis.dim()
        )));
    }
    Ok(SpectralFeatures {
        coefficients: basis.eigenvectors.t().dot(features),
        basis_id: basis.id(),
    })
}

/// `U X_F`.
pub fn igft(spec: &SpectralFeatures, basis: &SpectralBasis) -> Result<Array2<f64>> {
    if spec.basis_id != basis.id() {
        return Err(Error::BasisMismatch);
    }
    igft_raw(&spec.coefficients, basis)
}

/// Inverse transform of an arbitrary coefficient matrix (no basis binding).
pub fn igft_raw(coefficients: &Array2<f64>, basis: &SpectralBasis) -> Result<Array2<f64>> {
    if coefficients.nrows() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "coefficients have {} rows, basis has dimension {}",
            coefficients.nrows(),
            basis.dim()
        )));
    }
    Ok(basis.eigenvectors.dot(coefficients))
}

/// Percentile filter bank: the `⌈p_low·N⌉` smallest eigen-indices form the
/// low band, the `⌈p_high·N⌉` largest the high band, the rest the mid band.
pub fn build_filter_bank(basis: &SpectralBasis, p_low: f64, p_high: f64) -> Result<FilterBank> {
    for (name, p) in [("p_low", p_low), ("p_high", p_high)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} must lie in (0, 1), got {p}"
            )));
        }
    }
    let n = basis.dim();
    let n_low = ceil_quota(p_low, n);
    let n_high = ceil_quota(p_high, n);
    if p_low + p_high > 1.0 + 1e-12 || n_low + n_high > n {
        return Err(Error::InvalidArgument(format!(
            "band quotas overlap: {n_low} low + {n_high} high > {n} eigenvalues"
        )));
    }
    let mut low = Array1::zeros(n);
    let mut mid = Array1::zeros(n);
    let mut high = Array1::zeros(n);
    for k in 0..n {
        if k < n_low {
            low[k] = 1.0;
        } else if k >= n - n_high {
            high[k] = 1.0;
        } else {
            mid[k] = 1.0;
        }
    }
    Ok(FilterBank {
        low_mask: low,
        mid_mask: mid,
        high_mask: high,
        p_low,
        p_high,
        lambda_low: basis.eigenvalues[n_low - 1],
        lambda_high: basis.eigenvalues[n - n_high],
    })
}

fn mask_rows(coefficients: &Array2<f64>, mask: &Array1<f64>) -> Array2<f64> {
    let mut out = coefficients.clone();
    for (mut row, &m) in out.rows_mut().into_iter().zip(mask.iter()) {
        if m == 0.0 {
            row.fill(0.0);
        }
    }
    out
}

/// `H_band · X_F`: zero every row outside `band`.
pub fn apply_band(spec: &SpectralFeatures, bank: &FilterBank, band: Band) -> Result<SpectralFeatures> {
    if spec.coefficients.nrows() != bank.low_mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "spectrum has {} rows, filter bank covers {}",
            spec.coefficients.nrows(),
            bank.low_mask.len()
        )));
    }
    Ok(SpectralFeatures {
        coefficients: mask_rows(&spec.coefficients, bank.mask(band)),
        basis_id: spec.basis_id,
    })
}

/// Keep the retained bands and the first `k_features` feature columns.
pub fn select_components(
    spec: &SpectralFeatures,
    bank: &FilterBank,
    retained: BandSet,
    k_features: usize,
) -> Result<FilteredSpectrum> {
    if retained.is_empty() {
        return Err(Error::InvalidArgument("retained band set is empty".into()));
    }
    let (n, d) = spec.coefficients.dim();
    if k_features == 0 || k_features > d {
        return Err(Error::InvalidArgument(format!(
            "k_features must lie in 1..={d}, got {k_features}"
        )));
    }
    if n != bank.low_mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "spectrum has {n} rows, filter bank covers {}",
            bank.low_mask.len()
        )));
    }
    let truncated = spec.coefficients.slice(s![.., ..k_features]).to_owned();
    Ok(FilteredSpectrum {
        values: mask_rows(&truncated, &bank.combined_mask(retained)),
        retained,
    })
}

/// Per-band energy `‖H_band X_F‖²_F`, in `Band::ALL` order.
pub fn band_energies(spec: &SpectralFeatures, bank: &FilterBank) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (row, k) in spec.coefficients.rows().into_iter().zip(0..) {
        let e = row.dot(&row);
        for (slot, band) in out.iter_mut().zip(Band::ALL) {
            if bank.mask(band)[k] == 1.0 {
                *slot += e;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brain_graph::{eigendecompose, laplacian_of};
    use ndarray::array;

    fn basis_with(n: usize) -> SpectralBasis {
        // path graph on n nodes
        let mut a = Array2::zeros((n, n));
        for i in 0..n - 1 {
            a[[i, i + 1]] = 1.0;
            a[[i + 1, i]] = 1.0;
        }
        eigendecompose(&laplacian_of(a.view())).unwrap()
    }

    #[test]
    fn gft_of_basis_is_identity() {
        let b = basis_with(6);
        let spec = gft(&b.eigenvectors, &b).unwrap();
        let err = (&spec.coefficients - &Array2::<f64>::eye(6)).mapv(f64::abs).sum();
        assert!(err < 1e-10);
    }

    #[test]
    fn constant_signal_lives_in_dc_row() {
        let b = basis_with(7);
        let x = Array2::from_elem((7, 3), 2.5);
        let spec = gft(&x, &b).unwrap();
        for k in 1..7 {
            assert!(spec.coefficients.row(k).iter().all(|v| v.abs() <= 1e-8));
        }
    }

    #[test]
    fn impulse_inverts_to_eigenvector() {
        let b = basis_with(5);
        let mut c = Array2::zeros((5, 2));
        c[[3, 0]] = 1.0;
        c[[3, 1]] = -2.0;
        let spec = SpectralFeatures {
            coefficients: c,
            basis_id: b.id(),
        };
        let x = igft(&spec, &b).unwrap();
        for i in 0..5 {
            assert!((x[[i, 0]] - b.eigenvectors[[i, 3]]).abs() < 1e-15);
            assert!((x[[i, 1]] + 2.0 * b.eigenvectors[[i, 3]]).abs() < 1e-15);
        }
        let zero = SpectralFeatures {
            coefficients: Array2::zeros((5, 2)),
            basis_id: b.id(),
        };
        assert_eq!(igft(&zero, &b).unwrap(), Array2::<f64>::zeros((5, 2)));
    }

    #[test]
    fn igft_rejects_foreign_basis() {
        let b5 = basis_with(5);
        let other = eigendecompose(&(Array2::<f64>::eye(5) * 2.0)).unwrap();
        let spec = gft(&Array2::ones((5, 2)), &b5).unwrap();
        assert!(matches!(igft(&spec, &other), Err(Error::BasisMismatch)));
        assert!(gft(&Array2::ones((4, 2)), &b5).is_err());
    }

    #[test]
    fn filter_bank_quotas() {
        let b = basis_with(10);
        let bank = build_filter_bank(&b, 0.2, 0.2).unwrap();
        assert_eq!(bank.low_mask, array![1., 1., 0., 0., 0., 0., 0., 0., 0., 0.]);
        assert_eq!(bank.high_mask, array![0., 0., 0., 0., 0., 0., 0., 0., 1., 1.]);
        assert_eq!(bank.mid_mask, array![0., 0., 1., 1., 1., 1., 1., 1., 0., 0.]);

        let b5 = basis_with(5);
        let bank5 = build_filter_bank(&b5, 0.2, 0.2).unwrap();
        assert_eq!(bank5.band_len(Band::Low), 1);

        let b15 = basis_with(15);
        // 0.2 * 15 rounds to 3.0000000000000004 in floating point.
        assert_eq!(build_filter_bank(&b15, 0.2, 0.2).unwrap().band_len(Band::Low), 3);
    }

    #[test]
    fn filter_bank_rejects_overlap() {
        let b = basis_with(5);
        assert!(build_filter_bank(&b, 0.6, 0.5).is_err());
        assert!(build_filter_bank(&b, 0.5, 0.5).is_err()); // 3 + 3 > 5
        assert!(build_filter_bank(&b, 0.0, 0.2).is_err());
    }

    #[test]
    fn repeated_eigenvalues_split_by_index() {
        // Identity-scaled matrix: every eigenvalue equal.
        let b = eigendecompose(&(Array2::<f64>::eye(6) * 3.0)).unwrap();
        let b1 = build_filter_bank(&b, 0.2, 0.2).unwrap();
        let b2 = build_filter_bank(&b, 0.2, 0.2).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(b1.band_len(Band::Low), 2);
        assert_eq!(b1.band_len(Band::High), 2);
    }

    #[test]
    fn bands_partition_and_are_idempotent() {
        let b = basis_with(9);
        let bank = build_filter_bank(&b, 0.3, 0.2).unwrap();
        let x = Array2::from_shape_fn((9, 4), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let spec = gft(&x, &b).unwrap();
        let mut sum = Array2::zeros((9, 4));
        for band in Band::ALL {
            let once = apply_band(&spec, &bank, band).unwrap();
            let twice = apply_band(&once, &bank, band).unwrap();
            assert_eq!(once, twice);
            sum += &once.coefficients;
        }
        assert_eq!(sum, spec.coefficients);
    }

    #[test]
    fn select_components_cases() {
        let b = basis_with(10);
        let bank = build_filter_bank(&b, 0.2, 0.2).unwrap();
        let x = Array2::from_shape_fn((10, 5), |(i, j)| (i as f64 - 4.5) * (j as f64 + 1.0));
        let spec = gft(&x, &b).unwrap();
        let all = select_components(&spec, &bank, BandSet::ALL, 5).unwrap();
        assert_eq!(all.values, spec.coefficients);

        let high = select_components(&spec, &bank, BandSet::only(Band::High), 3).unwrap();
        assert_eq!(high.values.dim(), (10, 3));
        for k in 0..8 {
            assert!(high.values.row(k).iter().all(|&v| v == 0.0));
        }
        assert!(select_components(&spec, &bank, BandSet::default(), 5).is_err());
        assert!(select_components(&spec, &bank, BandSet::ALL, 6).is_err());
    }

    #[test]
    fn band_set_parsing() {
        let set: BandSet = "low,high".parse().unwrap();
        assert_eq!(set, BandSet::LOW_HIGH);
        assert_eq!(set.to_string(), "low,high");
        assert!("".parse::<BandSet>().is_err());
        assert!("lo".parse::<BandSet>().is_err());
    }
}
