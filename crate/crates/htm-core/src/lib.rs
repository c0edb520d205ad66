//! Spatial-pooler based classification of noisy synthetic videos.
//!
//! The crate is organized around the stages of the processing flow:
//! frames are binarized by an adaptive video encoder ([`encoder`]), fed
//! through a spatial pooler ([`sp`]) that maps them to sparse column
//! activity, aggregated into per-video histograms ([`features`]) and
//! classified by a linear one-vs-rest SVM ([`svm`]). A closed-form model
//! of how signal and noise bits survive each pooler stage lives in
//! [`noise_model`], validated by its own Monte Carlo simulation.
//! [`dataset`] generates the labeled shape videos and [`pipeline`] wires
//! everything into reproducible experiments.
//!
//! Every source of randomness is an explicit 64-bit seed driving the
//! PRNG in [`rng`]; identical seeds give bit-identical results
//! regardless of thread count.

pub mod dataset;
pub mod encoder;
pub mod features;
pub mod metrics;
pub mod noise_model;
pub mod params;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod sdr;
pub mod sp;
pub mod svm;
pub mod trace;

pub use params::SpParams;
pub use sdr::SdrVector;
pub use sp::{SpOutput, SpatialPooler};
