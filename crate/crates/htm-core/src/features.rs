//! Per-video feature histograms and cosine-similarity measures.
//!
//! A video's feature vector is the per-bit activity fraction of its
//! frames: counts[j] = frames with bit j active / total frames. With
//! the pooler enabled the bits are column activations; in pass-through
//! mode they are raw encoder output.

use crate::sdr::SdrVector;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot build a histogram from an empty frame sequence")]
    EmptySequence,
    #[error("frame {index} has {got} bits, expected {expected}")]
    FrameLengthMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("similarity inputs have mismatched video counts")]
    MismatchedCollections,
}

/// Activity fraction per feature over one video's frames.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoHistogram {
    pub counts: Vec<f64>,
    pub frames: usize,
}

/// counts[j] = (frames with bit j set) / frames.
pub fn accumulate_histogram(outputs: &[SdrVector]) -> Result<VideoHistogram, FeatureError> {
    let first = outputs.first().ok_or(FeatureError::EmptySequence)?;
    let dim = first.len();
    let mut counts = vec![0u32; dim];
    for (index, frame) in outputs.iter().enumerate() {
        if frame.len() != dim {
            return Err(FeatureError::FrameLengthMismatch {
                index,
                expected: dim,
                got: frame.len(),
            });
        }
        for idx in frame.active_indices() {
            counts[idx] += 1;
        }
    }
    let frames = outputs.len();
    Ok(VideoHistogram {
        counts: counts.iter().map(|&c| c as f64 / frames as f64).collect(),
        frames,
    })
}

/// Cosine similarity; `None` when either norm is zero (the value is
/// undefined there and such samples are discarded, not faked).
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<Option<f64>, FeatureError> {
    if a.len() != b.len() {
        return Err(FeatureError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(None);
    }
    Ok(Some(dot / (na.sqrt() * nb.sqrt())))
}

/// One test video's four histograms: the pooler pipeline and the raw
/// encoder baseline, each on the clean and the noisy variant.
#[derive(Debug, Clone)]
pub struct SimilarityInput {
    pub class_id: u16,
    pub clean_sp: VideoHistogram,
    pub noisy_sp: VideoHistogram,
    pub clean_raw: VideoHistogram,
    pub noisy_raw: VideoHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSimilarity {
    pub class_id: u16,
    pub mean_ratio: Option<f64>,
    pub used: usize,
    pub skipped: usize,
}

/// Noise-reduction ratios: per video, cos(clean_sp, noisy_sp) divided
/// by cos(clean_raw, noisy_raw).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub per_class: Vec<ClassSimilarity>,
    pub overall: Option<f64>,
    pub used: usize,
    pub skipped: usize,
}

/// Averages the per-video ratios per class and overall. Videos where
/// either cosine is undefined or the baseline cosine is zero are
/// skipped and counted.
pub fn similarity_ratio(inputs: &[SimilarityInput]) -> Result<SimilarityReport, FeatureError> {
    let mut classes: Vec<u16> = inputs.iter().map(|i| i.class_id).collect();
    classes.sort_unstable();
    classes.dedup();

    let mut per_class: Vec<ClassSimilarity> = classes
        .iter()
        .map(|&class_id| ClassSimilarity {
            class_id,
            mean_ratio: None,
            used: 0,
            skipped: 0,
        })
        .collect();
    let mut sums: Vec<f64> = vec![0.0; classes.len()];
    let mut total_sum = 0.0;
    let mut used = 0;
    let mut skipped = 0;

    for input in inputs {
        let slot = classes
            .binary_search(&input.class_id)
            .expect("class listed");
        let sp = cosine_similarity(&input.clean_sp.counts, &input.noisy_sp.counts)?;
        let raw = cosine_similarity(&input.clean_raw.counts, &input.noisy_raw.counts)?;
        match (sp, raw) {
            (Some(sp), Some(raw)) if raw != 0.0 => {
                let ratio = sp / raw;
                sums[slot] += ratio;
                per_class[slot].used += 1;
                total_sum += ratio;
                used += 1;
            }
            _ => {
                per_class[slot].skipped += 1;
                skipped += 1;
            }
        }
    }
    for (slot, entry) in per_class.iter_mut().enumerate() {
        if entry.used > 0 {
            entry.mean_ratio = Some(sums[slot] / entry.used as f64);
        }
    }
    Ok(SimilarityReport {
        per_class,
        overall: (used > 0).then(|| total_sum / used as f64),
        used,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sdr(len: usize, ones: &[usize]) -> SdrVector {
        SdrVector::from_active(len, ones).unwrap()
    }

    #[test]
    fn histogram_hand_count() {
        let frames = vec![sdr(4, &[1, 3]), sdr(4, &[3])];
        let h = accumulate_histogram(&frames).unwrap();
        assert_eq!(h.counts, vec![0.0, 0.5, 0.0, 1.0]);
        assert_eq!(h.frames, 2);
    }

    #[test]
    fn histogram_of_zero_frames_is_zero() {
        let frames = vec![SdrVector::zeros(8); 3];
        let h = accumulate_histogram(&frames).unwrap();
        assert!(h.counts.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn histogram_dimension_follows_input() {
        let frames: Vec<SdrVector> = (0..32).map(|i| sdr(2048, &[i])).collect();
        let h = accumulate_histogram(&frames).unwrap();
        assert_eq!(h.counts.len(), 2048);
        assert_eq!(h.frames, 32);
    }

    #[test]
    fn histogram_errors() {
        assert_eq!(accumulate_histogram(&[]), Err(FeatureError::EmptySequence));
        let frames = vec![SdrVector::zeros(4), SdrVector::zeros(5)];
        assert!(matches!(
            accumulate_histogram(&frames),
            Err(FeatureError::FrameLengthMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn cosine_basics() {
        let v = vec![0.25, 0.5, 0.0];
        assert!((cosine_similarity(&v, &v).unwrap().unwrap() - 1.0).abs() < 1e-12);
        let a = vec![1.0, 0.0];
        let b = vec![0.0, 1.0];
        assert_eq!(cosine_similarity(&a, &b).unwrap(), Some(0.0));
        let z = vec![0.0, 0.0];
        assert_eq!(cosine_similarity(&z, &a).unwrap(), None);
        assert!(cosine_similarity(&a, &vec![1.0]).is_err());
    }

    fn hist(counts: Vec<f64>) -> VideoHistogram {
        VideoHistogram { frames: 1, counts }
    }

    #[test]
    fn identical_pipelines_give_unit_ratios() {
        let inputs: Vec<SimilarityInput> = (0..4)
            .map(|i| {
                let clean = hist(vec![1.0, 0.5, 0.0, 0.25]);
                let noisy = hist(vec![0.5, 0.5, 0.25, 0.0]);
                SimilarityInput {
                    class_id: i % 2,
                    clean_sp: clean.clone(),
                    noisy_sp: noisy.clone(),
                    clean_raw: clean,
                    noisy_raw: noisy,
                }
            })
            .collect();
        let report = similarity_ratio(&inputs).unwrap();
        assert_eq!(report.used, 4);
        assert_eq!(report.skipped, 0);
        assert!((report.overall.unwrap() - 1.0).abs() < 1e-12);
        for entry in &report.per_class {
            assert!((entry.mean_ratio.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn undefined_cosines_are_skipped_and_counted() {
        let ok = SimilarityInput {
            class_id: 0,
            clean_sp: hist(vec![1.0, 0.0]),
            noisy_sp: hist(vec![1.0, 1.0]),
            clean_raw: hist(vec![1.0, 0.0]),
            noisy_raw: hist(vec![1.0, 0.0]),
        };
        let zero_norm = SimilarityInput {
            class_id: 0,
            clean_sp: hist(vec![0.0, 0.0]),
            ..ok.clone()
        };
        let orthogonal_baseline = SimilarityInput {
            class_id: 1,
            clean_raw: hist(vec![1.0, 0.0]),
            noisy_raw: hist(vec![0.0, 1.0]),
            ..ok.clone()
        };
        let report = similarity_ratio(&[ok, zero_norm, orthogonal_baseline]).unwrap();
        assert_eq!(report.used, 1);
        assert_eq!(report.skipped, 2);
        assert_eq!(report.per_class[0].used, 1);
        assert_eq!(report.per_class[0].skipped, 1);
        assert_eq!(report.per_class[1].used, 0);
        assert_eq!(report.per_class[1].mean_ratio, None);
        assert_eq!(report.per_class[1].skipped, 1);
    }

    proptest! {
        #[test]
        fn cosine_is_scale_invariant(
            xs in prop::collection::vec(0.0f64..1.0, 2..32),
            alpha in 0.01f64..100.0,
            beta in 0.01f64..100.0,
        ) {
            let ys: Vec<f64> = xs.iter().rev().cloned().collect();
            let base = cosine_similarity(&xs, &ys).unwrap();
            let xs_scaled: Vec<f64> = xs.iter().map(|v| v * alpha).collect();
            let ys_scaled: Vec<f64> = ys.iter().map(|v| v * beta).collect();
            let scaled = cosine_similarity(&xs_scaled, &ys_scaled).unwrap();
            match (base, scaled) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
                (None, None) => {}
                other => prop_assert!(false, "scaling changed definedness: {other:?}"),
            }
        }

        #[test]
        fn histogram_is_permutation_equivariant(seed in any::<u64>()) {
            use crate::rng::Xoshiro256pp;
            let mut rng = Xoshiro256pp::from_seed(seed);
            let dim = 16usize;
            let frames: Vec<SdrVector> = (0..8)
                .map(|_| SdrVector::from_bits((0..dim).map(|_| rng.bernoulli(0.3))))
                .collect();
            let mut perm: Vec<usize> = (0..dim).collect();
            rng.shuffle(&mut perm);
            let permuted: Vec<SdrVector> = frames
                .iter()
                .map(|f| {
                    let mut bits = vec![false; dim];
                    for (new_idx, &old_idx) in perm.iter().enumerate() {
                        bits[new_idx] = f.get(old_idx);
                    }
                    SdrVector::from_bits(bits)
                })
                .collect();
            let h = accumulate_histogram(&frames).unwrap();
            let hp = accumulate_histogram(&permuted).unwrap();
            for (new_idx, &old_idx) in perm.iter().enumerate() {
                prop_assert_eq!(hp.counts[new_idx], h.counts[old_idx]);
            }
        }
    }
}
