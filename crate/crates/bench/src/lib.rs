//! Fixtures shared by the benchmarks in `benches/`.

use brainfreq::brain_graph::{eigendecompose, laplacian, BrainGraph};
use brainfreq::data_ingest::{generate_synthetic, SyntheticSpec};
use brainfreq::spectral::{Band, BandSet};
use brainfreq::training::PreparedSubject;
use brainfreq::Dataset;
use ndarray::Array2;

/// Deterministic pseudo-random series without pulling in an RNG crate.
pub fn series(n: usize, d: usize, salt: u64) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |(i, t)| {
        let x = (i as u64 * 7919 + t as u64 * 104_729 + salt * 1_299_709) as f64;
        (x * 0.618_033_988_75).fract() - 0.5 + (t as f64 * 0.3 + i as f64).sin()
    })
}

pub fn graph(n: usize, d: usize) -> BrainGraph {
    BrainGraph::from_series(&series(n, d, 1), 0.2).expect("graph")
}

pub fn prepared(n: usize, d: usize) -> PreparedSubject {
    let g = graph(n, d);
    let basis = eigendecompose(&laplacian(&g)).expect("basis");
    PreparedSubject::new("bench", &g, basis, 0.2, 0.2, BandSet::LOW_HIGH, d).expect("subject")
}

pub fn dataset(subjects: usize, rois: usize, timepoints: usize) -> Dataset {
    generate_synthetic(SyntheticSpec {
        n_subjects: subjects,
        n_rois: rois,
        n_timepoints: timepoints,
        band: Band::High,
        snr: 2.0,
        seed: 7,
    })
    .expect("dataset")
}
