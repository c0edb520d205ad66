//! The spatial pooler: columns of synapses competing to represent
//! binary input patterns.
//!
//! A step runs three stages. Overlap counts, per column, the active
//! and connected synapses; a count below `min_overlap` is forced to
//! zero, anything else is multiplied by the column's boost. Inhibition
//! is a global winner-take-all: the `winners_set_size` best columns by
//! (overlap descending, index ascending) activate, provided their
//! overlap reaches max(kth-best, 1). Learning then nudges the winning
//! columns' permanences toward the input: +increment where the input
//! bit was set, -decrement where it was not, clamped to [0, 1].
//!
//! The inhibition radius is tracked purely as a profiling statistic;
//! it never feeds back into the winner selection.
//!
//! Column initialization draws each column's synapse targets from its
//! own seeded substream, so the synapse map depends only on
//! `(rng_seed, column index)` and never on iteration order or thread
//! count.

use crate::params::{SpParams, SpParamsError};
use crate::rng::{SubsetSampler, Xoshiro256pp};
use crate::sdr::SdrVector;
use crate::trace::ProfileRecord;
use std::io::{Read, Write};
use thiserror::Error;

const SNAPSHOT_MAGIC: [u8; 4] = *b"HTMS";
const SNAPSHOT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum SpError {
    #[error(transparent)]
    Params(#[from] SpParamsError),
    #[error("input vector has {got} bits, pooler expects {expected}")]
    InputLengthMismatch { expected: usize, got: usize },
    #[error("active vector has {got} bits, pooler has {expected} columns")]
    ActiveLengthMismatch { expected: usize, got: usize },
    #[error("learning is disabled on this pooler")]
    LearningDisabled,
    #[error("snapshot io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad snapshot magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u16),
    #[error("snapshot has trailing bytes")]
    TrailingBytes,
}

/// One input connection: target bit and strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synapse {
    pub input_index: u32,
    pub permanence: f32,
}

/// A column owns a fixed set of synapses with distinct targets,
/// sorted by input index.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    synapses: Vec<Synapse>,
    boost: f64,
}

impl Column {
    pub fn synapses(&self) -> &[Synapse] {
        &self.synapses
    }

    pub fn boost(&self) -> f64 {
        self.boost
    }

    fn connected_count(&self, connected_perm: f32) -> usize {
        self.synapses
            .iter()
            .filter(|s| s.permanence >= connected_perm)
            .count()
    }
}

/// Result of one pooler step.
#[derive(Debug, Clone, PartialEq)]
pub struct SpOutput {
    /// Active columns, popcount <= winners_set_size.
    pub active_columns: SdrVector,
    /// Boosted overlap per column, zeroed below min_overlap.
    pub overlaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPooler {
    params: SpParams,
    columns: Vec<Column>,
    inhibition_radius: f64,
    learn_enabled: bool,
    learn_calls: u64,
    /// Rolling activation frequency per column; only maintained when
    /// duty-cycle boosting is enabled.
    duty_cycles: Vec<f64>,
}

impl SpatialPooler {
    /// Initializes a pooler: each column samples `synapses_per_column`
    /// distinct input bits uniformly from its own substream of
    /// `params.rng_seed`; all permanences start at `initial_perm`.
    pub fn new(params: SpParams) -> Result<Self, SpError> {
        params.validate()?;
        let initial = params.initial_perm as f32;
        let mut sampler = SubsetSampler::new(params.input_size);
        let columns = (0..params.columns)
            .map(|i| {
                let mut rng = Xoshiro256pp::from_seed_stream(params.rng_seed, i as u64);
                let mut indices = sampler.sample(&mut rng, params.synapses_per_column);
                indices.sort_unstable();
                Column {
                    synapses: indices
                        .into_iter()
                        .map(|input_index| Synapse {
                            input_index,
                            permanence: initial,
                        })
                        .collect(),
                    boost: params.boost,
                }
            })
            .collect();
        Ok(Self {
            inhibition_radius: params.initial_inhibition_radius as f64,
            learn_enabled: true,
            learn_calls: 0,
            duty_cycles: vec![0.0; params.columns],
            params,
            columns,
        })
    }

    pub fn params(&self) -> &SpParams {
        &self.params
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn inhibition_radius(&self) -> f64 {
        self.inhibition_radius
    }

    pub fn learn_enabled(&self) -> bool {
        self.learn_enabled
    }

    pub fn set_learn_enabled(&mut self, enabled: bool) {
        self.learn_enabled = enabled;
    }

    /// Number of learn() invocations so far; lets callers verify that
    /// no learning happened while processing held-out data.
    pub fn learn_calls(&self) -> u64 {
        self.learn_calls
    }

    /// Per-column boosted overlap with `input`. Pure; does not mutate
    /// the pooler.
    pub fn compute_overlaps(&self, input: &SdrVector) -> Result<Vec<f64>, SpError> {
        if input.len() != self.params.input_size {
            return Err(SpError::InputLengthMismatch {
                expected: self.params.input_size,
                got: input.len(),
            });
        }
        let connected = self.params.connected_perm as f32;
        let min_overlap = self.params.min_overlap;
        Ok(self
            .columns
            .iter()
            .map(|col| {
                let raw: usize = col
                    .synapses
                    .iter()
                    .filter(|s| s.permanence >= connected && input.get(s.input_index as usize))
                    .count();
                if raw < min_overlap {
                    0.0
                } else {
                    raw as f64 * col.boost
                }
            })
            .collect())
    }

    /// Permanence update for the winning columns, followed by the
    /// inhibition-radius profiling statistic.
    pub fn learn(&mut self, input: &SdrVector, active: &SdrVector) -> Result<(), SpError> {
        if !self.learn_enabled {
            return Err(SpError::LearningDisabled);
        }
        if input.len() != self.params.input_size {
            return Err(SpError::InputLengthMismatch {
                expected: self.params.input_size,
                got: input.len(),
            });
        }
        if active.len() != self.params.columns {
            return Err(SpError::ActiveLengthMismatch {
                expected: self.params.columns,
                got: active.len(),
            });
        }
        let inc = self.params.perm_increment as f32;
        let dec = self.params.perm_decrement as f32;
        for idx in active.active_indices() {
            for syn in &mut self.columns[idx].synapses {
                if input.get(syn.input_index as usize) {
                    syn.permanence = (syn.permanence + inc).min(1.0);
                } else {
                    syn.permanence = (syn.permanence - dec).max(0.0);
                }
            }
        }
        if self.params.duty_boosting {
            // Numenta-style recruitment of underused columns: track an
            // activation duty cycle and multiply overlaps of columns
            // below the minimum duty by up to max_boost.
            let period = (self.learn_calls + 1).min(self.params.duty_period as u64) as f64;
            let target = self.params.winners_set_size as f64 / self.params.columns as f64;
            let min_duty = self.params.min_duty_fraction * target;
            let max_boost = self.params.max_boost;
            for (i, col) in self.columns.iter_mut().enumerate() {
                let is_active = if active.get(i) { 1.0 } else { 0.0 };
                let duty = (self.duty_cycles[i] * (period - 1.0) + is_active) / period;
                self.duty_cycles[i] = duty;
                col.boost = if duty >= min_duty {
                    1.0
                } else {
                    (1.0 - max_boost) / min_duty * duty + max_boost
                };
            }
        }
        // Mean receptive-field share, rescaled to column space. A
        // profiled quantity only; global inhibition never reads it.
        let connected = self.params.connected_perm as f32;
        let s = self.params.synapses_per_column as f64;
        let scale = self.params.input_size as f64 / self.params.columns as f64;
        let mean_ratio: f64 = self
            .columns
            .iter()
            .map(|c| c.connected_count(connected) as f64 / s)
            .sum::<f64>()
            / self.params.columns as f64;
        self.inhibition_radius = mean_ratio * scale;
        self.learn_calls += 1;
        Ok(())
    }

    /// One full cycle: overlap, inhibition and (when enabled) learning.
    pub fn step(&mut self, input: &SdrVector) -> Result<SpOutput, SpError> {
        let overlaps = self.compute_overlaps(input)?;
        let active_columns = inhibit(&overlaps, &self.params);
        if self.learn_enabled {
            self.learn(input, &active_columns)?;
        }
        Ok(SpOutput {
            active_columns,
            overlaps,
        })
    }

    /// Profiling snapshot of one processed frame.
    pub fn profile(&self, input: &SdrVector, out: &SpOutput) -> ProfileRecord {
        let input_active_pct = if input.is_empty() {
            0.0
        } else {
            input.popcount() as f64 / input.len() as f64 * 100.0
        };
        let output_active_pct =
            out.active_columns.popcount() as f64 / self.params.columns as f64 * 100.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &o in &out.overlaps {
            min = min.min(o);
            max = max.max(o);
            sum += o;
        }
        let n = out.overlaps.len().max(1) as f64;
        ProfileRecord {
            input_active_pct,
            output_active_pct,
            inhibition_radius: self.inhibition_radius,
            overlap_min: if min.is_finite() { min } else { 0.0 },
            overlap_mean: sum / n,
            overlap_max: if max.is_finite() { max } else { 0.0 },
        }
    }

    /// Versioned little-endian binary snapshot.
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<(), SpError> {
        w.write_all(&SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        for v in [
            self.params.columns as u64,
            self.params.synapses_per_column as u64,
            self.params.input_size as u64,
            self.params.min_overlap as u64,
            self.params.winners_set_size as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [
            self.params.perm_increment,
            self.params.perm_decrement,
            self.params.initial_perm,
            self.params.connected_perm,
            self.params.boost,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.params.initial_inhibition_radius as u64).to_le_bytes())?;
        w.write_all(&self.params.rng_seed.to_le_bytes())?;
        w.write_all(&[self.params.duty_boosting as u8])?;
        w.write_all(&self.params.max_boost.to_le_bytes())?;
        w.write_all(&(self.params.duty_period as u64).to_le_bytes())?;
        w.write_all(&self.params.min_duty_fraction.to_le_bytes())?;
        w.write_all(&[self.learn_enabled as u8])?;
        w.write_all(&self.inhibition_radius.to_le_bytes())?;
        w.write_all(&self.learn_calls.to_le_bytes())?;
        for (col, &duty) in self.columns.iter().zip(&self.duty_cycles) {
            w.write_all(&col.boost.to_le_bytes())?;
            w.write_all(&duty.to_le_bytes())?;
            for syn in &col.synapses {
                w.write_all(&syn.input_index.to_le_bytes())?;
            }
            for syn in &col.synapses {
                w.write_all(&syn.permanence.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_snapshot(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_snapshot<R: Read>(r: &mut R) -> Result<Self, SpError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != SNAPSHOT_MAGIC {
            return Err(SpError::BadMagic(magic));
        }
        let version = read_u16(r)?;
        if version != SNAPSHOT_VERSION {
            return Err(SpError::UnsupportedVersion(version));
        }
        let columns = read_u64(r)? as usize;
        let synapses = read_u64(r)? as usize;
        let input_size = read_u64(r)? as usize;
        let min_overlap = read_u64(r)? as usize;
        let winners = read_u64(r)? as usize;
        let perm_increment = read_f64(r)?;
        let perm_decrement = read_f64(r)?;
        let initial_perm = read_f64(r)?;
        let connected_perm = read_f64(r)?;
        let boost = read_f64(r)?;
        let initial_inhibition_radius = read_u64(r)? as usize;
        let rng_seed = read_u64(r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let duty_boosting = flag[0] != 0;
        let max_boost = read_f64(r)?;
        let duty_period = read_u64(r)? as usize;
        let min_duty_fraction = read_f64(r)?;
        r.read_exact(&mut flag)?;
        let learn_enabled = flag[0] != 0;
        let inhibition_radius = read_f64(r)?;
        let learn_calls = read_u64(r)?;
        let params = SpParams {
            columns,
            synapses_per_column: synapses,
            input_size,
            min_overlap,
            winners_set_size: winners,
            perm_increment,
            perm_decrement,
            initial_perm,
            connected_perm,
            boost,
            initial_inhibition_radius,
            rng_seed,
            duty_boosting,
            max_boost,
            duty_period,
            min_duty_fraction,
        };
        params.validate()?;
        let mut cols = Vec::with_capacity(columns);
        let mut duty_cycles = Vec::with_capacity(columns);
        for _ in 0..columns {
            let boost = read_f64(r)?;
            duty_cycles.push(read_f64(r)?);
            let mut indices = Vec::with_capacity(synapses);
            for _ in 0..synapses {
                indices.push(read_u32(r)?);
            }
            let mut synapses_vec = Vec::with_capacity(synapses);
            for index in indices {
                let mut b = [0u8; 4];
                r.read_exact(&mut b)?;
                synapses_vec.push(Synapse {
                    input_index: index,
                    permanence: f32::from_le_bytes(b),
                });
            }
            cols.push(Column {
                synapses: synapses_vec,
                boost,
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(SpError::TrailingBytes);
        }
        Ok(Self {
            params,
            columns: cols,
            inhibition_radius,
            learn_enabled,
            learn_calls,
            duty_cycles,
        })
    }
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, SpError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, SpError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, SpError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, SpError> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Global winner-take-all. A column activates iff it is among the
/// first `winners_set_size` entries of the (overlap descending, index
/// ascending) order and its overlap reaches max(kth-best overlap, 1).
pub fn inhibit(overlaps: &[f64], params: &SpParams) -> SdrVector {
    let c = overlaps.len();
    let k = params.winners_set_size.min(c);
    if k == 0 {
        return SdrVector::zeros(c);
    }
    let mut order: Vec<u32> = (0..c as u32).collect();
    let better = |a: &u32, b: &u32| {
        overlaps[*b as usize]
            .partial_cmp(&overlaps[*a as usize])
            .expect("overlap values are never NaN")
            .then(a.cmp(b))
    };
    let kth = if k < c {
        order.select_nth_unstable_by(k - 1, better);
        overlaps[order[k - 1] as usize]
    } else {
        // The whole population is in the winner window; the kth-best
        // is simply the minimum.
        overlaps.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let threshold = kth.max(1.0);
    let active: Vec<usize> = order[..k]
        .iter()
        .filter(|&&i| overlaps[i as usize] >= threshold)
        .map(|&i| i as usize)
        .collect();
    SdrVector::from_active(c, &active).expect("winner indices are distinct and in range")
}
