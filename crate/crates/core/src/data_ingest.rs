//! Subject time series: manifest loading and writing, the planted-spectrum
//! synthetic generator, and stratified k-fold splits.
//!
//! Manifest layout:
//!
//! ```text
//! 116,170
//! sub-0001,1,subjects/sub-0001.csv,siteA
//! sub-0002,0,subjects/sub-0002.csv
//! ```
//!
//! The header gives `n_rois,n_timepoints`. Each subject file holds one ROI per
//! line, comma-separated samples. Paths resolve relative to the manifest.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::brain_graph::{eigendecompose, laplacian_of, SpectralBasis};
use crate::error::{Error, Result};
use crate::seed;
use crate::spectral::{build_filter_bank, Band};

pub const MIN_ROIS: usize = 3;
pub const MIN_TIMEPOINTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    /// `N × D`: one row per ROI.
    pub series: Array2<f64>,
    pub label: u8,
    pub site: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    pub n_rois: usize,
    pub n_timepoints: usize,
    pub band: Band,
    pub snr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Synthetic(SyntheticSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SubjectRecord>,
    pub n_rois: usize,
    pub n_timepoints: usize,
    pub provenance: Provenance,
}

impl Dataset {
    /// Validate records and assemble a dataset.
    pub fn new(records: Vec<SubjectRecord>, provenance: Provenance) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyDataset)?;
        let (n, d) = first.series.dim();
        if n < MIN_ROIS || d < MIN_TIMEPOINTS {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_ROIS} ROIs and {MIN_TIMEPOINTS} time points, got {n}x{d}"
            )));
        }
        let mut seen = HashSet::new();
        for r in &records {
            validate_record(r, n, d)?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self {
            records,
            n_rois: n,
            n_timepoints: d,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Copy with labels replaced; series and IDs untouched.
    pub fn with_labels(&self, labels: &[u8]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} records",
                labels.len(),
                self.len()
            )));
        }
        let mut out = self.clone();
        for (r, &l) in out.records.iter_mut().zip(labels) {
            if l > 1 {
                return Err(Error::InvalidLabel {
                    id: r.id.clone(),
                    label: i64::from(l),
                });
            }
            r.label = l;
        }
        Ok(out)
    }
}

fn validate_record(r: &SubjectRecord, n: usize, d: usize) -> Result<()> {
    let (rows, cols) = r.series.dim();
    if rows != n || cols != d {
        return Err(Error::ShapeMismatch {
            id: r.id.clone(),
            expected_rows: n,
            expected_cols: d,
            rows,
            cols,
        });
    }
    if let Some(((roi, t), _)) = r.series.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            id: r.id.clone(),
            roi,
            t,
        });
    }
    if r.label > 1 {
        return Err(Error::InvalidLabel {
            id: r.id.clone(),
            label: i64::from(r.label),
        });
    }
    Ok(())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno + 1, format!("bad number {field:?}")))?;
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("expected {c} columns, found {count}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(Array2::from_shape_vec((rows, cols), data).expect("row-major buffer"))
}

/// Load a manifest and every subject file it references.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(manifest_path, 1, "missing header"))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|f| f.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(manifest_path, 1, "header must be `n_rois,n_timepoints`"))?;
    let [n, d] = dims[..] else {
        return Err(parse_err(manifest_path, 1, "header must be `n_rois,n_timepoints`"));
    };

    let mut records = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(parse_err(
                manifest_path,
                lineno + 1,
                "expected `id,label,path[,site]`",
            ));
        }
        let id = fields[0].to_string();
        let label: i64 = fields[1]
            .parse()
            .map_err(|_| parse_err(manifest_path, lineno + 1, "label is not an integer"))?;
        if !(0..=1).contains(&label) {
            return Err(Error::InvalidLabel { id, label });
        }
        let series = read_matrix(&base.join(fields[2]))?;
        let record = SubjectRecord {
            id,
            series,
            label: label as u8,
            site: fields.get(3).map(|s| s.to_string()),
        };
        validate_record(&record, n, d)?;
        records.push(record);
    }
    Dataset::new(records, Provenance::File(manifest_path.to_path_buf()))
}

/// Write `manifest.csv` plus `subjects/<id>.csv` under `dir`; returns the
/// manifest path. Values use the shortest round-trip representation.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    let subjects = dir.join("subjects");
    fs::create_dir_all(&subjects).map_err(|e| Error::io(&subjects, e))?;
    let mut manifest = format!("{},{}\n", ds.n_rois, ds.n_timepoints);
    for r in &ds.records {
        let rel = format!("subjects/{}.csv", r.id);
        let mut body = String::new();
        for row in r.series.rows() {
            let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            body.push_str(&fields.join(","));
            body.push('\n');
        }
        let path = dir.join(&rel);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        manifest.push_str(&format!("{},{},{}", r.id, r.label, rel));
        if let Some(site) = &r.site {
            manifest.push(',');
            manifest.push_str(site);
        }
        manifest.push('\n');
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Floor of the per-component spectral variance of synthetic coefficients.
const SPECTRUM_FLOOR: f64 = 9.0;
/// Extra variance on smooth components, decaying as `exp(-4 λ / λ_max)`.
const SPECTRUM_SMOOTH: f64 = 300.0;
const BASE_GRAPH_DENSITY: f64 = 0.2;
const BASE_GRAPH_ATTEMPTS: usize = 64;

/// The shared random geometric graph behind a synthetic dataset: uniform
/// points in the unit square, joined when closer than the radius that yields
/// ~20% density. Redrawn until connected (bounded attempts).
pub fn synthetic_base_graph(n_rois: usize, seed: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed, "synthetic/base-graph");
    let pairs = n_rois * (n_rois - 1) / 2;
    let quota = ((BASE_GRAPH_DENSITY * pairs as f64) + 1e-9).floor().max(1.0) as usize;
    let mut adjacency = Array2::zeros((n_rois, n_rois));
    for _ in 0..BASE_GRAPH_ATTEMPTS {
        let pts: Vec<(f64, f64)> = (0..n_rois)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let mut dists: Vec<f64> = Vec::with_capacity(pairs);
        for i in 0..n_rois {
            for j in i + 1..n_rois {
                dists.push(((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt());
            }
        }
        let mut sorted = dists.clone();
        sorted.sort_by(f64::total_cmp);
        let radius = sorted[quota - 1];
        adjacency.fill(0.0);
        let mut k = 0;
        for i in 0..n_rois {
            for j in i + 1..n_rois {
                if dists[k] <= radius {
                    adjacency[[i, j]] = 1.0;
                    adjacency[[j, i]] = 1.0;
                }
                k += 1;
            }
        }
        if is_connected(&adjacency) {
            break;
        }
    }
    adjacency
}

fn is_connected(adjacency: &Array2<f64>) -> bool {
    let n = adjacency.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if adjacency[[i, j]] != 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Per-component coefficient variance of class-0 subjects.
pub fn synthetic_spectrum(basis: &SpectralBasis) -> Vec<f64> {
    let lambda_max = basis.eigenvalues[basis.dim() - 1].max(f64::MIN_POSITIVE);
    basis
        .eigenvalues
        .iter()
        .map(|&l| SPECTRUM_FLOOR + SPECTRUM_SMOOTH * (-4.0 * l / lambda_max).exp())
        .collect()
}

/// Planted-spectrum dataset.
///
/// Coefficients in the base graph's Laplacian eigenbasis are Gaussian with a
/// smooth-decaying variance profile; class-1 subjects get `(1 + snr)` times
/// the variance inside `band` (20% quotas). Series are `U·C` plus unit
/// Gaussian noise. Labels alternate 0, 1, 0, ...
pub fn generate_synthetic(spec: SyntheticSpec) -> Result<Dataset> {
    let SyntheticSpec {
        n_subjects,
        n_rois,
        n_timepoints,
        band,
        snr,
        seed,
    } = spec;
    if n_subjects < 4 || n_subjects % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "n_subjects must be even and at least 4, got {n_subjects}"
        )));
    }
    if n_rois < 8 {
        return Err(Error::InvalidArgument(format!(
            "n_rois must be at least 8, got {n_rois}"
        )));
    }
    if n_timepoints < n_rois {
        return Err(Error::InvalidArgument(format!(
            "n_timepoints ({n_timepoints}) must be at least n_rois ({n_rois})"
        )));
    }
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::InvalidArgument(format!("snr must be positive, got {snr}")));
    }

    let adjacency = synthetic_base_graph(n_rois, seed);
    let basis = eigendecompose(&laplacian_of(adjacency.view()))?;
    let bank = build_filter_bank(&basis, 0.2, 0.2)?;
    let base_var = synthetic_spectrum(&basis);
    let mask = bank.mask(band);

    let mut rng = seed::rng(seed, "synthetic/series");
    let mut records = Vec::with_capacity(n_subjects);
    for m in 0..n_subjects {
        let label = (m % 2) as u8;
        let std: Vec<f64> = base_var
            .iter()
            .zip(mask.iter())
            .map(|(&v, &in_band)| {
                let boost = if label == 1 && in_band == 1.0 { 1.0 + snr } else { 1.0 };
                (v * boost).sqrt()
            })
            .collect();
        let coeffs = Array2::from_shape_fn((n_rois, n_timepoints), |(k, _)| {
            std[k] * rng.sample::<f64, _>(StandardNormal)
        });
        let noise = Array2::from_shape_fn((n_rois, n_timepoints), |_| {
            rng.sample::<f64, _>(StandardNormal)
        });
        records.push(SubjectRecord {
            id: format!("sub-{:04}", m + 1),
            series: basis.eigenvectors.dot(&coeffs) + noise,
            label,
            site: None,
        });
    }
    Dataset::new(records, Provenance::Synthetic(spec))
}

/// Stratified fold assignment plus the per-fold labeled subsets used for
/// fine-tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub fold_count: usize,
    /// Fold index of each record, in dataset order.
    pub folds: Vec<usize>,
    pub fold_assignments: BTreeMap<String, usize>,
    pub label_fraction: f64,
    pub seed: u64,
    /// Indices (dataset order) flagged labeled when fold `f` is held out.
    pub labeled: Vec<Vec<usize>>,
}

impl SplitPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

/// Stratified `fold_count`-way split.
///
/// Each class is shuffled and dealt round-robin, continuing the deal where
/// the previous class stopped so fold sizes differ by at most one. The
/// labeled subset of each training split has `⌈fraction · |train|⌉` records,
/// allocated across classes in proportion and drawn from a stream separate
/// from the fold deal, so changing the fraction leaves folds unchanged.
pub fn make_splits(ds: &Dataset, fold_count: usize, label_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if fold_count < 2 {
        return Err(Error::InvalidArgument(format!(
            "fold_count must be at least 2, got {fold_count}"
        )));
    }
    if !(label_fraction > 0.0 && label_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "label_fraction must lie in (0, 1], got {label_fraction}"
        )));
    }
    let labels = ds.labels();
    let by_class: [Vec<usize>; 2] = [0u8, 1].map(|c| {
        (0..labels.len()).filter(|&i| labels[i] == c).collect()
    });
    let minority = by_class.iter().map(Vec::len).min().unwrap_or(0);
    if fold_count > minority {
        return Err(Error::InvalidArgument(format!(
            "fold_count {fold_count} exceeds minority class size {minority}"
        )));
    }

    let mut fold_rng = seed::rng(seed, "splits/folds");
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for class in &by_class {
        let mut members = class.clone();
        members.shuffle(&mut fold_rng);
        for i in members {
            folds[i] = next % fold_count;
            next += 1;
        }
    }

    let mut label_rng = seed::rng(seed, "splits/labeled");
    let mut labeled = Vec::with_capacity(fold_count);
    for f in 0..fold_count {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] != f).collect();
        let total = crate::spectral::ceil_quota(label_fraction, train.len()).max(1);
        let mut per_class: [Vec<usize>; 2] = [0u8, 1].map(|c| {
            train.iter().copied().filter(|&i| labels[i] == c).collect()
        });
        let n1 = ((total as f64) * per_class[1].len() as f64 / train.len() as f64).round() as usize;
        let n1 = n1.min(per_class[1].len()).min(total);
        let n0 = (total - n1).min(per_class[0].len());
        let mut chosen = Vec::with_capacity(total);
        for (class, take) in per_class.iter_mut().zip([n0, n1]) {
            class.shuffle(&mut label_rng);
            chosen.extend_from_slice(&class[..take]);
        }
        chosen.sort_unstable();
        labeled.push(chosen);
    }

    let fold_assignments = ds
        .records
        .iter()
        .zip(&folds)
        .map(|(r, &f)| (r.id.clone(), f))
        .collect();
    Ok(SplitPlan {
        fold_count,
        folds,
        fold_assignments,
        label_fraction,
        seed,
        labeled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(seed: u64) -> Dataset {
        generate_synthetic(SyntheticSpec {
            n_subjects: 40,
            n_rois: 16,
            n_timepoints: 64,
            band: Band::High,
            snr: 2.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn synthetic_is_balanced_and_deterministic() {
        let a = synth(7);
        assert_eq!(a.labels().iter().filter(|&&l| l == 0).count(), 20);
        assert_eq!(a.labels().iter().filter(|&&l| l == 1).count(), 20);
        assert_eq!(a, synth(7));
        assert_ne!(a.records[0].series, synth(8).records[0].series);
    }

    #[test]
    fn synthetic_rejects_bad_arguments() {
        let ok = SyntheticSpec {
            n_subjects: 40,
            n_rois: 16,
            n_timepoints: 64,
            band: Band::High,
            snr: 2.0,
            seed: 1,
        };
        assert!(generate_synthetic(SyntheticSpec { snr: 0.0, ..ok }).is_err());
        assert!(generate_synthetic(SyntheticSpec { n_subjects: 5, ..ok }).is_err());
        assert!(generate_synthetic(SyntheticSpec { n_rois: 7, ..ok }).is_err());
        assert!(generate_synthetic(SyntheticSpec { n_timepoints: 10, ..ok }).is_err());
    }

    #[test]
    fn five_folds_of_forty() {
        let ds = synth(7);
        let plan = make_splits(&ds, 5, 0.2, 3).unwrap();
        let labels = ds.labels();
        for f in 0..5 {
            let test = plan.test_indices(f);
            assert_eq!(test.len(), 8);
            assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 4);
            // ⌈0.2 · 32⌉ = 7
            assert_eq!(plan.labeled[f].len(), 7);
            assert!(plan.labeled[f].iter().all(|i| !test.contains(i)));
        }
    }

    #[test]
    fn full_label_fraction_flags_all_training_records() {
        let ds = synth(7);
        let plan = make_splits(&ds, 5, 1.0, 3).unwrap();
        for f in 0..5 {
            assert_eq!(plan.labeled[f], plan.train_indices(f));
        }
    }

    #[test]
    fn fraction_does_not_move_folds() {
        let ds = synth(7);
        let a = make_splits(&ds, 5, 0.1, 3).unwrap();
        let b = make_splits(&ds, 5, 0.5, 3).unwrap();
        assert_eq!(a.folds, b.folds);
        assert_eq!(a, make_splits(&ds, 5, 0.1, 3).unwrap());
    }

    #[test]
    fn too_many_folds_is_an_error() {
        let ds = synth(7);
        assert!(make_splits(&ds, 21, 0.2, 0).is_err());
        assert!(make_splits(&ds, 1, 0.2, 0).is_err());
        assert!(make_splits(&ds, 5, 0.0, 0).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(Dataset::new(vec![], Provenance::File("x".into())), Err(Error::EmptyDataset)));
        let rec = |id: &str, rows, cols| SubjectRecord {
            id: id.into(),
            series: Array2::from_shape_fn((rows, cols), |(i, j)| (i * cols + j) as f64),
            label: 0,
            site: None,
        };
        match Dataset::new(vec![rec("a", 4, 6), rec("b", 4, 5)], Provenance::File("x".into())) {
            Err(Error::ShapeMismatch { id, .. }) => assert_eq!(id, "b"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Dataset::new(vec![rec("a", 4, 6), rec("a", 4, 6)], Provenance::File("x".into())),
            Err(Error::DuplicateId(_))
        ));
        let mut bad = rec("c", 4, 6);
        bad.series[[2, 3]] = f64::NAN;
        assert!(matches!(
            Dataset::new(vec![bad], Provenance::File("x".into())),
            Err(Error::NonFinite { roi: 2, t: 3, .. })
        ));
    }
}
