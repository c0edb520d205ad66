//! Spatial pooler hyper-parameters, shared by the pooler itself, the
//! pipeline and the sweep tooling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpParamsError {
    #[error("{field} must be positive")]
    ZeroField { field: &'static str },
    #[error("winners_set_size {winners} exceeds columns {columns}")]
    WinnersExceedColumns { winners: usize, columns: usize },
    #[error("min_overlap {min_overlap} exceeds synapses_per_column {synapses}")]
    MinOverlapExceedsSynapses { min_overlap: usize, synapses: usize },
    #[error("synapses_per_column {synapses} exceeds input_size {input_size}")]
    SynapsesExceedInput { synapses: usize, input_size: usize },
    #[error("{field} must lie in [0, 1], got {value}")]
    UnitRange { field: &'static str, value: f64 },
    #[error("boost must be positive, got {0}")]
    NonPositiveBoost(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpParams {
    /// Number of columns (c).
    pub columns: usize,
    /// Synapses per column (s).
    pub synapses_per_column: usize,
    /// Input vector size in bits (n).
    pub input_size: usize,
    /// Overlap threshold below which a column's overlap is zeroed (o_m).
    pub min_overlap: usize,
    /// Winner-take-all set size (k).
    pub winners_set_size: usize,
    pub perm_increment: f64,
    pub perm_decrement: f64,
    pub initial_perm: f64,
    pub connected_perm: f64,
    /// Constant overlap multiplier; 1.0 leaves overlaps untouched.
    pub boost: f64,
    pub initial_inhibition_radius: usize,
    /// Seed for synapse initialization substreams.
    #[serde(default)]
    pub rng_seed: u64,
    /// Numenta-style multiplicative duty-cycle boosting during
    /// learning. Off by default; boosts stay constant then.
    #[serde(default)]
    pub duty_boosting: bool,
    /// Boost factor applied to a column whose activation duty cycle
    /// is zero; decays linearly to 1 at `min_duty_fraction` of the
    /// target density.
    #[serde(default = "default_max_boost")]
    pub max_boost: f64,
    /// Averaging window (in learn steps) of the duty-cycle estimate.
    #[serde(default = "default_duty_period")]
    pub duty_period: usize,
    /// Fraction of the target density (winners/columns) below which a
    /// column is considered underused.
    #[serde(default = "default_min_duty_fraction")]
    pub min_duty_fraction: f64,
}

fn default_max_boost() -> f64 {
    4.0
}

fn default_duty_period() -> usize {
    64
}

fn default_min_duty_fraction() -> f64 {
    0.25
}

impl SpParams {
    /// Reference configuration: 2048 columns, 64 synapses, min overlap
    /// 8, winner set 40, increments 0.1, initial permanence 0.21,
    /// connected threshold 0.2, constant boost.
    pub fn reference(input_size: usize) -> Self {
        Self {
            columns: 2048,
            synapses_per_column: 64,
            input_size,
            min_overlap: 8,
            winners_set_size: 40,
            perm_increment: 0.1,
            perm_decrement: 0.1,
            initial_perm: 0.21,
            connected_perm: 0.2,
            boost: 1.0,
            initial_inhibition_radius: 80,
            rng_seed: 0,
            duty_boosting: false,
            max_boost: default_max_boost(),
            duty_period: default_duty_period(),
            min_duty_fraction: default_min_duty_fraction(),
        }
    }

    pub fn validate(&self) -> Result<(), SpParamsError> {
        for (field, value) in [
            ("columns", self.columns),
            ("synapses_per_column", self.synapses_per_column),
            ("input_size", self.input_size),
            ("winners_set_size", self.winners_set_size),
            ("initial_inhibition_radius", self.initial_inhibition_radius),
        ] {
            if value == 0 {
                return Err(SpParamsError::ZeroField { field });
            }
        }
        if self.winners_set_size > self.columns {
            return Err(SpParamsError::WinnersExceedColumns {
                winners: self.winners_set_size,
                columns: self.columns,
            });
        }
        if self.min_overlap > self.synapses_per_column {
            return Err(SpParamsError::MinOverlapExceedsSynapses {
                min_overlap: self.min_overlap,
                synapses: self.synapses_per_column,
            });
        }
        if self.synapses_per_column > self.input_size {
            return Err(SpParamsError::SynapsesExceedInput {
                synapses: self.synapses_per_column,
                input_size: self.input_size,
            });
        }
        for (field, value) in [
            ("perm_increment", self.perm_increment),
            ("perm_decrement", self.perm_decrement),
            ("initial_perm", self.initial_perm),
            ("connected_perm", self.connected_perm),
        ] {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(SpParamsError::UnitRange { field, value });
            }
        }
        if !(self.boost > 0.0) {
            return Err(SpParamsError::NonPositiveBoost(self.boost));
        }
        if self.duty_boosting {
            if !(self.max_boost >= 1.0) {
                return Err(SpParamsError::NonPositiveBoost(self.max_boost));
            }
            if self.duty_period == 0 {
                return Err(SpParamsError::ZeroField {
                    field: "duty_period",
                });
            }
            if !(self.min_duty_fraction > 0.0 && self.min_duty_fraction <= 1.0) {
                return Err(SpParamsError::UnitRange {
                    field: "min_duty_fraction",
                    value: self.min_duty_fraction,
                });
            }
        }
        Ok(())
    }
}
