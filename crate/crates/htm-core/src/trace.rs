//! Profiling records and CSV trace emission.
//!
//! The profiler streams the quantities that make pooler behavior
//! observable: input/output activity percentages, the inhibition
//! radius and overlap statistics per frame, plus per-video feature
//! histograms. Traces are written as plain CSV for external plotting.

use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Per-frame profiling snapshot of one pooler step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRecord {
    pub input_active_pct: f64,
    pub output_active_pct: f64,
    pub inhibition_radius: f64,
    pub overlap_min: f64,
    pub overlap_mean: f64,
    pub overlap_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Learn,
    Test,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Learn => "learn",
            Phase::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameRecord {
    /// Frame ordinal within the run, per instance.
    pub frame: usize,
    pub phase: Phase,
    /// Pooler instance label ("single", a class name, or "encoder").
    pub instance: String,
    pub profile: ProfileRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramRecord {
    pub video: usize,
    pub phase: Phase,
    pub class_id: u16,
    pub values: Vec<f64>,
}

/// Full run trace, split by learning/testing phase via the per-record
/// phase column.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunTrace {
    pub frames: Vec<FrameRecord>,
    pub histograms: Vec<HistogramRecord>,
}

impl RunTrace {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty() && self.histograms.is_empty()
    }
}

fn open(dir: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf), TraceError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|source| TraceError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((BufWriter::new(file), path))
}

fn write_frame_metric(
    dir: &Path,
    name: &str,
    header: &str,
    trace: &RunTrace,
    metric: impl Fn(&FrameRecord) -> String,
) -> Result<(), TraceError> {
    let (mut w, path) = open(dir, name)?;
    let io_err = |source| TraceError::Io {
        path: path.clone(),
        source,
    };
    writeln!(w, "frame,phase,instance,{header}").map_err(io_err)?;
    for rec in &trace.frames {
        writeln!(
            w,
            "{},{},{},{}",
            rec.frame,
            rec.phase.label(),
            rec.instance,
            metric(rec)
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Writes the five trace CSV files into `dir`. One row per frame, or
/// per video for the histogram file; every file carries a header row
/// and a phase column.
pub fn emit_traces(trace: &RunTrace, dir: &Path) -> Result<(), TraceError> {
    if trace.is_empty() {
        return Err(TraceError::Empty);
    }
    write_frame_metric(dir, "active_inputs.csv", "active_input_pct", trace, |r| {
        format!("{}", r.profile.input_active_pct)
    })?;
    write_frame_metric(dir, "active_outputs.csv", "active_output_pct", trace, |r| {
        format!("{}", r.profile.output_active_pct)
    })?;
    write_frame_metric(
        dir,
        "inhibition_radius.csv",
        "inhibition_radius",
        trace,
        |r| format!("{}", r.profile.inhibition_radius),
    )?;
    write_frame_metric(
        dir,
        "overlap_stats.csv",
        "overlap_min,overlap_mean,overlap_max",
        trace,
        |r| {
            format!(
                "{},{},{}",
                r.profile.overlap_min, r.profile.overlap_mean, r.profile.overlap_max
            )
        },
    )?;

    let (mut w, path) = open(dir, "class_histograms.csv")?;
    let io_err = |source| TraceError::Io {
        path: path.clone(),
        source,
    };
    let dim = trace.histograms.first().map_or(0, |h| h.values.len());
    let mut header = String::from("video,phase,class");
    for i in 0..dim {
        header.push_str(&format!(",h{i}"));
    }
    writeln!(w, "{header}").map_err(io_err)?;
    for h in &trace.histograms {
        let mut line = format!("{},{},{}", h.video, h.phase.label(), h.class_id);
        for v in &h.values {
            line.push_str(&format!(",{v}"));
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(frame: usize, phase: Phase) -> FrameRecord {
        FrameRecord {
            frame,
            phase,
            instance: "single".to_string(),
            profile: ProfileRecord {
                input_active_pct: 10.0,
                output_active_pct: 1.953125,
                inhibition_radius: 0.9375,
                overlap_min: 0.0,
                overlap_mean: 3.25,
                overlap_max: 12.0,
            },
        }
    }

    #[test]
    fn empty_trace_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            emit_traces(&RunTrace::default(), dir.path()),
            Err(TraceError::Empty)
        ));
    }

    #[test]
    fn files_have_one_row_per_frame_and_numeric_cells() {
        let trace = RunTrace {
            frames: (0..32)
                .map(|i| record(i, if i < 16 { Phase::Learn } else { Phase::Test }))
                .collect(),
            histograms: vec![HistogramRecord {
                video: 0,
                phase: Phase::Test,
                class_id: 3,
                values: vec![0.0, 0.5, 1.0],
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        emit_traces(&trace, dir.path()).unwrap();

        for name in [
            "active_inputs.csv",
            "active_outputs.csv",
            "inhibition_radius.csv",
            "overlap_stats.csv",
        ] {
            let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
            let lines: Vec<&str> = text.lines().collect();
            assert_eq!(lines.len(), 33, "{name}: header plus one row per frame");
            let cols = lines[0].split(',').count();
            for row in &lines[1..] {
                let cells: Vec<&str> = row.split(',').collect();
                assert_eq!(cells.len(), cols, "{name}");
                assert!(cells.iter().all(|c| !c.is_empty()));
                // Everything after frame,phase,instance parses as a number.
                for cell in &cells[3..] {
                    cell.parse::<f64>().unwrap();
                }
            }
        }

        let text = std::fs::read_to_string(dir.path().join("class_histograms.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "video,phase,class,h0,h1,h2");
        assert_eq!(lines[1], "0,test,3,0,0.5,1");
    }
}
