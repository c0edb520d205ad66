//! Experiment and noise-model reports: JSON-serializable structures
//! plus aligned-text tables.
//!
//! Report JSON carries no timestamps, host paths or thread counts, so
//! a fixed seed reproduces it byte-identically.

use crate::encoder::EncoderConfig;
use crate::features::SimilarityReport;
use crate::metrics::EvalReport;
use crate::noise_model::{
    ClampedProbability, MonteCarloPropagation, PropagationExpectations, PropagationParams,
};
use crate::params::SpParams;
use crate::svm::SvmConfig;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Single,
    Multiple,
    PassThrough,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Multiple => "multiple",
            Mode::PassThrough => "pass_through",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceTraining {
    pub instance: String,
    pub epochs: usize,
    /// Whether consecutive epochs produced identical active sets;
    /// absent for plain single-pass training.
    pub stable: Option<bool>,
    pub learn_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingSummary {
    pub instances: Vec<InstanceTraining>,
    /// Total learn() calls during training; unchanged afterwards
    /// (checked), so test data never reaches learning.
    pub learn_calls_total: u64,
}

/// Evaluation of one noise level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaEval {
    pub sigma: f64,
    /// Post-binarization flipped-bit fraction against the clean
    /// encoding of the same test videos.
    pub measured_flip_rate: f64,
    pub eval: EvalReport,
    pub similarity: SimilarityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub rng_algorithm: &'static str,
    pub mode: Mode,
    pub seed: u64,
    pub dataset_seed: u64,
    pub dataset_geometry: (usize, usize),
    pub frames_per_video: usize,
    pub sp_params: SpParams,
    pub encoder: EncoderConfig,
    pub svm: SvmConfig,
    pub max_epochs: usize,
    pub feature_dim: usize,
    pub training: TrainingSummary,
    pub results: Vec<SigmaEval>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut json = serde_json::to_string_pretty(self).expect("report serializes");
        json.push('\n');
        json
    }

    /// Aligned-text tables: F1 per noise level, then per-class cosine
    /// similarity ratios per noise level.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode: {}   seed: {}", self.mode.label(), self.seed);
        let _ = writeln!(out, "feature dimension: {}", self.feature_dim);
        let _ = writeln!(out, "rng: {}", self.rng_algorithm);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<12} {:>12} {:>10}",
            "noise sigma", "flip rate", "F1"
        );
        for r in &self.results {
            let _ = writeln!(
                out,
                "{:<12} {:>12.4} {:>10.4}",
                r.sigma, r.measured_flip_rate, r.eval.weighted_f1
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "cosine similarity ratio (pooler / raw encoder)");
        let mut header = format!("{:<10}", "class");
        for r in &self.results {
            header.push_str(&format!(" {:>14}", format!("sigma={}", r.sigma)));
        }
        let _ = writeln!(out, "{header}");
        if let Some(first) = self.results.first() {
            for (slot, entry) in first.similarity.per_class.iter().enumerate() {
                let mut line = format!("{:<10}", entry.class_id);
                for r in &self.results {
                    match r.similarity.per_class.get(slot).and_then(|c| c.mean_ratio) {
                        Some(v) => line.push_str(&format!(" {:>14.4}", v)),
                        None => line.push_str(&format!(" {:>14}", "n/a")),
                    }
                }
                let _ = writeln!(out, "{line}");
            }
        }
        let mut line = format!("{:<10}", "all");
        for r in &self.results {
            match r.similarity.overall {
                Some(v) => line.push_str(&format!(" {:>14.4}", v)),
                None => line.push_str(&format!(" {:>14}", "n/a")),
            }
        }
        let _ = writeln!(out, "{line}");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageComparison {
    pub stage: &'static str,
    pub closed_form: f64,
    pub mc_mean: f64,
    pub mc_std_error: f64,
    /// |closed - mc| in standard errors; 0 when the error is 0 and the
    /// values agree exactly.
    pub z: f64,
}

/// Output of the noise-model analysis command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseModelReport {
    pub params: PropagationParams,
    pub expectations: PropagationExpectations,
    pub p_signal: ClampedProbability,
    pub p_noise: ClampedProbability,
    /// Coupled (hypergeometric-style) evaluations of the same sums,
    /// reported alongside the primary literal form.
    pub p_signal_coupled: ClampedProbability,
    pub p_noise_coupled: ClampedProbability,
    pub impact_ratio: f64,
    pub monte_carlo: MonteCarloPropagation,
    pub comparison: Vec<StageComparison>,
}

impl NoiseModelReport {
    pub fn to_json(&self) -> String {
        let mut json = serde_json::to_string_pretty(self).expect("report serializes");
        json.push('\n');
        json
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        let _ = writeln!(
            out,
            "params: n={} n_b={} s={} c={} m={} o_m={} w={} w_b={}",
            p.n, p.n_b, p.s, p.c, p.m, p.o_m, p.w, p.w_b
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<8} {:>14} {:>14} {:>14} {:>10}",
            "stage", "closed form", "mc mean", "mc std err", "z"
        );
        for row in &self.comparison {
            let _ = writeln!(
                out,
                "{:<8} {:>14.6} {:>14.6} {:>14.6} {:>10.3}",
                row.stage, row.closed_form, row.mc_mean, row.mc_std_error, row.z
            );
        }
        let _ = writeln!(out);
        let clamp_note = |p: &ClampedProbability| if p.clamped { " (clamped)" } else { "" };
        let _ = writeln!(
            out,
            "P_signal  = {:.6e}{}   [coupled: {:.6e}{}]",
            self.p_signal.value,
            clamp_note(&self.p_signal),
            self.p_signal_coupled.value,
            clamp_note(&self.p_signal_coupled),
        );
        let _ = writeln!(
            out,
            "P_noise   = {:.6e}{}   [coupled: {:.6e}{}]",
            self.p_noise.value,
            clamp_note(&self.p_noise),
            self.p_noise_coupled.value,
            clamp_note(&self.p_noise_coupled),
        );
        let _ = writeln!(
            out,
            "impact ratio (signal/noise) = {:.6}",
            self.impact_ratio
        );
        out
    }
}
