//! Self-supervised representation learning on functional brain graphs with
//! jointly trained time-domain and frequency-domain encoders.
//!
//! The pipeline: per-subject correlation graphs ([`brain_graph`]), their graph
//! Fourier transform and filter bank ([`spectral`]), a GCN encoder and a
//! Fourier-graph-operator encoder ([`encoders`]), label-free pretraining under
//! a domain-consistency objective followed by a classifier head
//! ([`training`]), and the evaluation protocol with ablations
//! ([`eval_harness`]).

pub mod brain_graph;
pub mod checkpoint;
pub mod config;
pub mod data_ingest;
pub mod encoders;
pub mod error;
pub mod eval_harness;
pub mod seed;
pub mod spectral;
pub mod training;

pub use brain_graph::{BrainGraph, SpectralBasis};
pub use data_ingest::{Dataset, SplitPlan, SubjectRecord, SyntheticSpec};
pub use encoders::{FgnnParams, ModelDims, Representation, TgnnParams};
pub use error::{Error, ErrorKind, Result};
pub use spectral::{Band, BandSet, FilterBank, SpectralFeatures};
