//! Experiment orchestration: encode videos, train poolers, extract
//! histogram features, train the classifier and assemble reports.
//!
//! Three modes exist. `Single` trains one pooler on all training
//! videos; `Multiple` trains one pooler per class on that class's
//! videos only and concatenates the per-pooler histograms into the
//! feature vector; `PassThrough` bypasses pooling so the encoder
//! output feeds the histograms directly, giving the classifier-only
//! baseline.
//!
//! The entire configuration is validated before any computation.
//! Video-level work runs in parallel; every parallel collection is
//! order-preserving and every random draw comes from a seed-derived
//! substream, so the degree of parallelism never changes a report.

use crate::dataset::{
    generate_video, read_manifest, read_video, read_video_header, DatasetError, DatasetManifest,
    ManifestEntry, ShapeClass, Split, Video,
};
use crate::encoder::{encode, EncodeError, EncoderConfig};
use crate::features::{
    accumulate_histogram, similarity_ratio, FeatureError, SimilarityInput, VideoHistogram,
};
use crate::metrics::{f1_report, MetricsError};
use crate::noise_model::{
    self, monte_carlo_propagation, noise_impact_ratio, propagation_expectations, NoiseModelError,
    PropagationParams,
};
use crate::params::SpParams;
use crate::report::{
    ExperimentReport, InstanceTraining, Mode, NoiseModelReport, SigmaEval, StageComparison,
    TrainingSummary,
};
use crate::rng::{mix_seed, RNG_ALGORITHM};
use crate::sdr::SdrVector;
use crate::sp::{inhibit, SpError, SpOutput, SpatialPooler};
use crate::svm::{predict, train_svm, SvmConfig, SvmError};
use crate::trace::{emit_traces, FrameRecord, HistogramRecord, Phase, RunTrace, TraceError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sp(#[from] SpError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    NoiseModel(#[from] NoiseModelError),
    #[error("missing video file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: video is {got_w}x{got_h}, manifest says {want_w}x{want_h}")]
    GeometryMismatch {
        path: PathBuf,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error(
        "sp input_size is {configured}, but encoding {w}x{h} at ratio {ratio} yields {derived}"
    )]
    InputSizeMismatch {
        configured: usize,
        derived: usize,
        w: usize,
        h: usize,
        ratio: usize,
    },
    #[error("requested sigma {0} is not present in the manifest")]
    SigmaNotInManifest(f64),
    #[error("the {0} split is empty")]
    EmptySplit(String),
    #[error("test variants at sigma {sigma} do not pair with the clean test videos")]
    UnpairedTestVariant { sigma: f64 },
    #[error("training split holds a single class; the classifier needs at least two")]
    SingleClassTrainingSet,
    #[error("output directory {0} already exists")]
    OutputDirExists(PathBuf),
    #[error("failed to build thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub manifest: PathBuf,
    pub sp: SpParams,
    pub encoder: EncoderConfig,
    pub svm: SvmConfig,
    /// Noise levels to evaluate; empty means every manifest sigma.
    /// The clean test set is always evaluated.
    #[serde(default)]
    pub sigmas: Vec<f64>,
    pub seed: u64,
    /// 0 uses the default rayon pool size.
    #[serde(default)]
    pub threads: usize,
    /// Upper bound on training epochs; 1 is the single-pass default.
    /// With more, training stops early once consecutive epochs yield
    /// identical active sets.
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
}

fn default_max_epochs() -> usize {
    1
}

struct Plan {
    manifest: DatasetManifest,
    base_dir: PathBuf,
    train: Vec<ManifestEntry>,
    /// Evaluated sigmas ascending, 0.0 first; parallel to
    /// `test_by_sigma`, whose groups are sorted by video id.
    sigmas: Vec<f64>,
    test_by_sigma: Vec<Vec<ManifestEntry>>,
}

fn preflight(config: &ExperimentConfig) -> Result<Plan, PipelineError> {
    config.sp.validate().map_err(SpError::from)?;
    config.encoder.validate()?;
    let manifest = read_manifest(&config.manifest)?;
    let base_dir = config
        .manifest
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();

    let ratio = config.encoder.reduction_ratio;
    if manifest.width % ratio != 0 {
        return Err(EncodeError::NonDivisibleDimension {
            dimension: "width",
            size: manifest.width,
            ratio,
        }
        .into());
    }
    if manifest.height % ratio != 0 {
        return Err(EncodeError::NonDivisibleDimension {
            dimension: "height",
            size: manifest.height,
            ratio,
        }
        .into());
    }
    let (rw, rh) = (manifest.width / ratio, manifest.height / ratio);
    if rw < config.encoder.block_size || rh < config.encoder.block_size {
        return Err(EncodeError::FrameSmallerThanBlock {
            width: rw,
            height: rh,
            block_size: config.encoder.block_size,
        }
        .into());
    }
    let derived = rw * rh;
    if config.sp.input_size != derived {
        return Err(PipelineError::InputSizeMismatch {
            configured: config.sp.input_size,
            derived,
            w: manifest.width,
            h: manifest.height,
            ratio,
        });
    }

    let mut sigmas: Vec<f64> = if config.sigmas.is_empty() {
        manifest.noise_sigmas.clone()
    } else {
        for &s in &config.sigmas {
            if s != 0.0 && !manifest.noise_sigmas.contains(&s) {
                return Err(PipelineError::SigmaNotInManifest(s));
            }
        }
        config.sigmas.clone()
    };
    sigmas.retain(|&s| s != 0.0);
    sigmas.sort_by(|a, b| a.partial_cmp(b).expect("sigmas are finite"));
    sigmas.dedup();
    sigmas.insert(0, 0.0);

    let mut train: Vec<ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| e.split == Split::Train)
        .cloned()
        .collect();
    train.sort_by_key(|e| e.video_id);
    if train.is_empty() {
        return Err(PipelineError::EmptySplit("train".into()));
    }
    let mut classes: Vec<u16> = train.iter().map(|e| e.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(PipelineError::SingleClassTrainingSet);
    }

    let mut test_by_sigma = Vec::with_capacity(sigmas.len());
    let clean_ids: Vec<u32> = {
        let mut ids: Vec<u32> = manifest
            .entries
            .iter()
            .filter(|e| e.split == Split::Test && e.noise_sigma == 0.0)
            .map(|e| e.video_id)
            .collect();
        ids.sort_unstable();
        ids
    };
    for &sigma in &sigmas {
        let mut group: Vec<ManifestEntry> = manifest
            .entries
            .iter()
            .filter(|e| e.split == Split::Test && e.noise_sigma == sigma)
            .cloned()
            .collect();
        group.sort_by_key(|e| e.video_id);
        if group.is_empty() {
            return Err(PipelineError::EmptySplit(format!("test (sigma {sigma})")));
        }
        let ids: Vec<u32> = group.iter().map(|e| e.video_id).collect();
        if ids != clean_ids {
            return Err(PipelineError::UnpairedTestVariant { sigma });
        }
        test_by_sigma.push(group);
    }

    // Every referenced file must exist with the manifest geometry
    // before any compute starts.
    for entry in train.iter().chain(test_by_sigma.iter().flatten()) {
        let path = base_dir.join(&entry.path);
        if !path.is_file() {
            return Err(PipelineError::MissingFile(path));
        }
        let (_, w, h, _) = read_video_header(&path)?;
        if w != manifest.width || h != manifest.height {
            return Err(PipelineError::GeometryMismatch {
                path,
                want_w: manifest.width,
                want_h: manifest.height,
                got_w: w,
                got_h: h,
            });
        }
    }

    Ok(Plan {
        manifest,
        base_dir,
        train,
        sigmas,
        test_by_sigma,
    })
}

/// An encoded video: one binary vector per frame.
struct EncodedVideo {
    video_id: u32,
    class_id: u16,
    frames: Vec<SdrVector>,
}

fn encode_entries(
    entries: &[ManifestEntry],
    base_dir: &Path,
    encoder: &EncoderConfig,
) -> Result<Vec<EncodedVideo>, PipelineError> {
    entries
        .par_iter()
        .map(|entry| {
            let video = read_video(&base_dir.join(&entry.path))?;
            let frames = video
                .frames
                .iter()
                .map(|f| encode(f, encoder))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(EncodedVideo {
                video_id: entry.video_id,
                class_id: entry.class_id,
                frames,
            })
        })
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn active_set_hash(out: &SpOutput) -> u64 {
    let mut bytes = Vec::with_capacity(out.active_columns.words().len() * 8);
    for w in out.active_columns.words() {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
    fnv1a(&bytes)
}

struct TrainedPooler {
    instance: String,
    pooler: SpatialPooler,
    records: Vec<FrameRecord>,
    epochs: usize,
    stable: Option<bool>,
}

fn train_pooler(
    mut params: SpParams,
    instance: &str,
    videos: &[&EncodedVideo],
    seed: u64,
    max_epochs: usize,
) -> Result<TrainedPooler, PipelineError> {
    params.rng_seed = seed;
    let mut pooler = SpatialPooler::new(params)?;
    let mut records = Vec::new();
    let mut frame_ordinal = 0usize;
    let mut previous: Option<Vec<u64>> = None;
    let mut stable = false;
    let mut epochs = 0;
    while epochs < max_epochs {
        let mut hashes = Vec::new();
        for video in videos {
            for input in &video.frames {
                let out = pooler.step(input)?;
                records.push(FrameRecord {
                    frame: frame_ordinal,
                    phase: Phase::Learn,
                    instance: instance.to_string(),
                    profile: pooler.profile(input, &out),
                });
                frame_ordinal += 1;
                hashes.push(active_set_hash(&out));
            }
        }
        epochs += 1;
        if previous.as_ref() == Some(&hashes) {
            stable = true;
            break;
        }
        previous = Some(hashes);
    }
    pooler.set_learn_enabled(false);
    Ok(TrainedPooler {
        instance: instance.to_string(),
        pooler,
        records,
        epochs,
        stable: (max_epochs > 1).then_some(stable),
    })
}

/// Frozen-pooler inference: overlap plus inhibition, no mutation.
fn infer(pooler: &SpatialPooler, input: &SdrVector) -> Result<SpOutput, SpError> {
    let overlaps = pooler.compute_overlaps(input)?;
    let active_columns = inhibit(&overlaps, pooler.params());
    Ok(SpOutput {
        active_columns,
        overlaps,
    })
}

/// Per-video extraction result.
struct Extracted {
    video_id: u32,
    class_id: u16,
    /// Histogram of the feature source (concatenated per pooler in
    /// Multiple mode).
    feature: Vec<f64>,
    sp_hist: VideoHistogram,
    raw_hist: VideoHistogram,
    records: Vec<(String, Vec<crate::trace::ProfileRecord>)>,
}

fn extract(
    mode: Mode,
    poolers: &[TrainedPooler],
    video: &EncodedVideo,
) -> Result<Extracted, PipelineError> {
    let raw_hist = accumulate_histogram(&video.frames)?;
    if mode == Mode::PassThrough {
        return Ok(Extracted {
            video_id: video.video_id,
            class_id: video.class_id,
            feature: raw_hist.counts.clone(),
            sp_hist: raw_hist.clone(),
            raw_hist,
            records: vec![],
        });
    }
    let mut feature = Vec::new();
    let mut sp_counts: Vec<f64> = Vec::new();
    let mut records = Vec::with_capacity(poolers.len());
    for trained in poolers {
        let mut outputs = Vec::with_capacity(video.frames.len());
        let mut profile_rows = Vec::with_capacity(video.frames.len());
        for input in &video.frames {
            let out = infer(&trained.pooler, input)?;
            profile_rows.push(trained.pooler.profile(input, &out));
            outputs.push(out.active_columns);
        }
        let hist = accumulate_histogram(&outputs)?;
        feature.extend_from_slice(&hist.counts);
        sp_counts.extend_from_slice(&hist.counts);
        records.push((trained.instance.clone(), profile_rows));
    }
    let sp_hist = VideoHistogram {
        counts: sp_counts,
        frames: video.frames.len(),
    };
    Ok(Extracted {
        video_id: video.video_id,
        class_id: video.class_id,
        feature,
        sp_hist,
        raw_hist,
        records,
    })
}

fn extract_all(
    mode: Mode,
    poolers: &[TrainedPooler],
    videos: &[EncodedVideo],
) -> Result<Vec<Extracted>, PipelineError> {
    videos
        .par_iter()
        .map(|v| extract(mode, poolers, v))
        .collect()
}

/// Mean flipped-bit fraction between paired clean and noisy encodings.
fn flip_rate(clean: &[EncodedVideo], noisy: &[EncodedVideo]) -> f64 {
    let mut flipped = 0usize;
    let mut bits = 0usize;
    for (c, n) in clean.iter().zip(noisy) {
        debug_assert_eq!(c.video_id, n.video_id);
        for (cf, nf) in c.frames.iter().zip(&n.frames) {
            flipped += cf.hamming_distance(nf).expect("equal geometry");
            bits += cf.len();
        }
    }
    if bits == 0 {
        0.0
    } else {
        flipped as f64 / bits as f64
    }
}

pub fn run_experiment(
    config: &ExperimentConfig,
) -> Result<(ExperimentReport, RunTrace), PipelineError> {
    let plan = preflight(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()?;
    pool.install(|| run_inner(config, plan))
}

fn run_inner(
    config: &ExperimentConfig,
    plan: Plan,
) -> Result<(ExperimentReport, RunTrace), PipelineError> {
    let train_encoded = encode_entries(&plan.train, &plan.base_dir, &config.encoder)?;
    let test_encoded: Vec<Vec<EncodedVideo>> = plan
        .test_by_sigma
        .iter()
        .map(|group| encode_entries(group, &plan.base_dir, &config.encoder))
        .collect::<Result<_, _>>()?;

    // Pooler training. Seeds derive from (seed, instance ordinal).
    let mut poolers: Vec<TrainedPooler> = Vec::new();
    match config.mode {
        Mode::PassThrough => {}
        Mode::Single => {
            let videos: Vec<&EncodedVideo> = train_encoded.iter().collect();
            poolers.push(train_pooler(
                config.sp.clone(),
                "single",
                &videos,
                mix_seed(config.seed, 0),
                config.max_epochs,
            )?);
        }
        Mode::Multiple => {
            let mut classes: Vec<u16> = train_encoded.iter().map(|v| v.class_id).collect();
            classes.sort_unstable();
            classes.dedup();
            poolers = classes
                .par_iter()
                .enumerate()
                .map(|(i, &class_id)| {
                    let videos: Vec<&EncodedVideo> = train_encoded
                        .iter()
                        .filter(|v| v.class_id == class_id)
                        .collect();
                    let name = ShapeClass::from_id(class_id)
                        .map(|c| c.name().to_string())
                        .unwrap_or_else(|_| format!("class{class_id}"));
                    train_pooler(
                        config.sp.clone(),
                        &name,
                        &videos,
                        mix_seed(config.seed, i as u64),
                        config.max_epochs,
                    )
                })
                .collect::<Result<_, _>>()?;
        }
    }
    let learn_calls_total: u64 = poolers.iter().map(|t| t.pooler.learn_calls()).sum();

    // Feature extraction over frozen poolers.
    let train_extracted = extract_all(config.mode, &poolers, &train_encoded)?;
    let test_extracted: Vec<Vec<Extracted>> = test_encoded
        .iter()
        .map(|group| extract_all(config.mode, &poolers, group))
        .collect::<Result<_, _>>()?;

    // Learning must not have been touched by extraction.
    let after: u64 = poolers.iter().map(|t| t.pooler.learn_calls()).sum();
    assert_eq!(
        learn_calls_total, after,
        "learn() ran while processing frozen-phase data"
    );

    // Classifier on the training features.
    let features: Vec<Vec<f64>> = train_extracted.iter().map(|e| e.feature.clone()).collect();
    let labels: Vec<usize> = train_extracted
        .iter()
        .map(|e| e.class_id as usize)
        .collect();
    let svm_config = SvmConfig {
        seed: mix_seed(config.seed, 0x5_713),
        ..config.svm.clone()
    };
    let model = train_svm(&features, &labels, &svm_config)?;

    // Per-sigma evaluation.
    let clean_slot = 0usize;
    let mut results = Vec::with_capacity(plan.sigmas.len());
    for (slot, &sigma) in plan.sigmas.iter().enumerate() {
        let group = &test_extracted[slot];
        let truth: Vec<usize> = group.iter().map(|e| e.class_id as usize).collect();
        let predictions: Vec<usize> = group
            .iter()
            .map(|e| predict(&model, &e.feature))
            .collect::<Result<_, _>>()?;
        let eval = f1_report(&truth, &predictions)?;

        let inputs: Vec<SimilarityInput> = group
            .iter()
            .zip(&test_extracted[clean_slot])
            .map(|(noisy, clean)| {
                debug_assert_eq!(noisy.video_id, clean.video_id);
                SimilarityInput {
                    class_id: noisy.class_id,
                    clean_sp: clean.sp_hist.clone(),
                    noisy_sp: noisy.sp_hist.clone(),
                    clean_raw: clean.raw_hist.clone(),
                    noisy_raw: noisy.raw_hist.clone(),
                }
            })
            .collect();
        let similarity = similarity_ratio(&inputs)?;
        results.push(SigmaEval {
            sigma,
            measured_flip_rate: flip_rate(&test_encoded[clean_slot], &test_encoded[slot]),
            eval,
            similarity,
        });
    }

    let feature_dim = train_extracted
        .first()
        .map(|e| e.feature.len())
        .unwrap_or(0);

    // Assemble the trace: training rows, then frozen-phase rows in
    // video order with per-instance frame counters.
    let mut trace = RunTrace::default();
    let mut frame_counters: BTreeMap<String, usize> = BTreeMap::new();
    for trained in &poolers {
        frame_counters.insert(trained.instance.clone(), trained.records.len());
        trace.frames.extend(trained.records.iter().cloned());
    }
    let mut push_extracted = |trace: &mut RunTrace, items: &[Extracted], phase: Phase| {
        for item in items {
            for (instance, rows) in &item.records {
                let counter = frame_counters.entry(instance.clone()).or_insert(0);
                for profile in rows {
                    trace.frames.push(FrameRecord {
                        frame: *counter,
                        phase,
                        instance: instance.clone(),
                        profile: profile.clone(),
                    });
                    *counter += 1;
                }
            }
            trace.histograms.push(HistogramRecord {
                video: item.video_id as usize,
                phase,
                class_id: item.class_id,
                values: item.feature.clone(),
            });
        }
    };
    push_extracted(&mut trace, &train_extracted, Phase::Learn);
    for group in &test_extracted {
        push_extracted(&mut trace, group, Phase::Test);
    }
    if config.mode == Mode::PassThrough {
        // No pooler; trace the encoder activity itself.
        let mut ordinal = 0usize;
        for (group, phase) in std::iter::once((&train_encoded, Phase::Learn)).chain(
            plan.sigmas
                .iter()
                .enumerate()
                .map(|(slot, _)| (&test_encoded[slot], Phase::Test)),
        ) {
            for video in group.iter() {
                for frame in &video.frames {
                    let pct = frame.sparsity().map(|s| s * 100.0).unwrap_or(0.0);
                    trace.frames.push(FrameRecord {
                        frame: ordinal,
                        phase,
                        instance: "encoder".to_string(),
                        profile: crate::trace::ProfileRecord {
                            input_active_pct: pct,
                            output_active_pct: pct,
                            inhibition_radius: 0.0,
                            overlap_min: 0.0,
                            overlap_mean: 0.0,
                            overlap_max: 0.0,
                        },
                    });
                    ordinal += 1;
                }
            }
        }
    }

    let report = ExperimentReport {
        schema_version: 1,
        rng_algorithm: RNG_ALGORITHM,
        mode: config.mode,
        seed: config.seed,
        dataset_seed: plan.manifest.seed,
        dataset_geometry: (plan.manifest.width, plan.manifest.height),
        frames_per_video: plan.manifest.frames,
        sp_params: SpParams {
            rng_seed: mix_seed(config.seed, 0),
            ..config.sp.clone()
        },
        encoder: config.encoder.clone(),
        svm: svm_config,
        max_epochs: config.max_epochs,
        feature_dim,
        training: TrainingSummary {
            instances: poolers
                .iter()
                .map(|t| InstanceTraining {
                    instance: t.instance.clone(),
                    epochs: t.epochs,
                    stable: t.stable,
                    learn_calls: t.pooler.learn_calls(),
                })
                .collect(),
            learn_calls_total,
        },
        results,
    };
    Ok((report, trace))
}

/// Writes report.json, report.txt and the trace CSVs. Everything goes
/// into a temporary sibling directory first and is renamed into place,
/// so a failed run leaves no partial `out_dir` behind.
pub fn write_outputs(
    report: &ExperimentReport,
    trace: &RunTrace,
    out_dir: &Path,
) -> Result<(), PipelineError> {
    if out_dir.exists() {
        return Err(PipelineError::OutputDirExists(out_dir.to_path_buf()));
    }
    let staging = out_dir.with_extension("tmp");
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Io { path, source }
    };
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    std::fs::create_dir_all(&staging).map_err(io_err(&staging))?;
    std::fs::write(staging.join("report.json"), report.to_json())
        .map_err(io_err(&staging.join("report.json")))?;
    std::fs::write(staging.join("report.txt"), report.to_text())
        .map_err(io_err(&staging.join("report.txt")))?;
    if !trace.is_empty() {
        emit_traces(trace, &staging)?;
    }
    std::fs::rename(&staging, out_dir).map_err(io_err(out_dir))
}

/// Closed-form analysis next to its Monte Carlo estimate.
pub fn run_noise_model(
    params: &PropagationParams,
    trials: u64,
    seed: u64,
) -> Result<NoiseModelReport, NoiseModelError> {
    let expectations = propagation_expectations(params)?;
    let p_signal = noise_model::match_probability_signal(params)?;
    let p_noise = noise_model::match_probability_noise(params)?;
    let p_signal_coupled = noise_model::match_probability_signal_coupled(params)?;
    let p_noise_coupled = noise_model::match_probability_noise_coupled(params)?;
    let impact_ratio = noise_impact_ratio(params)?;
    let monte_carlo = monte_carlo_propagation(params, trials, seed)?;
    let closed = [
        ("scm", expectations.e_scm),
        ("spm", expectations.e_spm),
        ("ncm", expectations.e_ncm),
        ("npm", expectations.e_npm),
        ("nb", expectations.e_nb),
    ];
    let comparison = closed
        .iter()
        .zip(monte_carlo.estimates())
        .map(|(&(stage, closed_form), (_, est))| StageComparison {
            stage,
            closed_form,
            mc_mean: est.mean,
            mc_std_error: est.std_error,
            z: if est.std_error == 0.0 {
                if closed_form == est.mean {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (closed_form - est.mean).abs() / est.std_error
            },
        })
        .collect();
    Ok(NoiseModelReport {
        params: *params,
        expectations,
        p_signal,
        p_noise,
        p_signal_coupled,
        p_noise_coupled,
        impact_ratio,
        monte_carlo,
        comparison,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub sigma: f64,
    pub flip_rate: f64,
}

/// Measures the post-binarization flipped-bit fraction that Gaussian
/// pixel noise of `sigma` causes on a probe set (one video per class).
pub fn measure_flip_rate(
    sigma: f64,
    width: usize,
    height: usize,
    frames: usize,
    encoder: &EncoderConfig,
    seed: u64,
) -> Result<f64, PipelineError> {
    let probes: Vec<Video> = ShapeClass::ALL
        .iter()
        .enumerate()
        .map(|(i, &class)| generate_video(class, frames, width, height, mix_seed(seed, i as u64)))
        .collect::<Result<_, _>>()?;
    let mut flipped = 0usize;
    let mut bits = 0usize;
    for video in &probes {
        let noisy = crate::dataset::add_gaussian_noise(video, sigma, mix_seed(seed, 0xF00D))?;
        for (cf, nf) in video.frames.iter().zip(&noisy.frames) {
            let a = encode(cf, encoder)?;
            let b = encode(nf, encoder)?;
            flipped += a.hamming_distance(&b).expect("same geometry");
            bits += a.len();
        }
    }
    Ok(flipped as f64 / bits as f64)
}

/// Bisects sigma until the measured flip rate hits `target` within
/// `tolerance`; returns the chosen sigma and the measurement table.
pub fn calibrate_sigma(
    target: f64,
    tolerance: f64,
    width: usize,
    height: usize,
    frames: usize,
    encoder: &EncoderConfig,
    seed: u64,
) -> Result<(f64, Vec<CalibrationRow>), PipelineError> {
    let mut table = Vec::new();
    let mut lo = 0.0f64;
    let mut hi = 64.0f64;
    let mut best = (f64::INFINITY, hi);
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        let rate = measure_flip_rate(mid, width, height, frames, encoder, seed)?;
        table.push(CalibrationRow {
            sigma: mid,
            flip_rate: rate,
        });
        let err = (rate - target).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if err <= tolerance {
            return Ok((mid, table));
        }
        if rate < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((best.1, table))
}
