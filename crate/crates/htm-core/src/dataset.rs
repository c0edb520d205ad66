//! Procedural generation of labeled shape videos, Gaussian noise
//! injection and the on-disk video container.
//!
//! Each video shows one centered high-contrast silhouette, white on
//! black with anti-aliased edges, under a simulated camera orbit: a
//! smooth seeded sequence of rotation, anisotropic scale
//! (foreshortening) and distance zoom. Everything is a pure function
//! of (class, seed), so datasets regenerate byte-identically.
//!
//! Container format `HTMV`, all integers little-endian: magic (4
//! bytes), u16 version = 1, u16 class id, u32 width, u32 height, u32
//! frame count, f32 noise sigma, u64 seed, then frame_count * width *
//! height raw grayscale bytes. One video per file; the manifest is a
//! JSON file listing paths, labels and splits.

use crate::encoder::GrayFrame;
use crate::rng::{mix_seed, Xoshiro256pp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

const VIDEO_MAGIC: [u8; 4] = *b"HTMV";
const VIDEO_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown shape class id {0}")]
    UnknownClass(u16),
    #[error("frame geometry must be at least 16x16, got {width}x{height}")]
    FrameTooSmall { width: usize, height: usize },
    #[error("a video needs at least one frame")]
    NoFrames,
    #[error("frame {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    MixedFrameGeometry {
        index: usize,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("videos per class must be at least 2, got {0}")]
    TooFewVideos(usize),
    #[error("train fraction must keep both splits non-empty, got {0}")]
    BadTrainFraction(f64),
    #[error("noise sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: bad magic {magic:?}")]
    BadMagic { path: PathBuf, magic: [u8; 4] },
    #[error("{path}: unsupported container version {version}")]
    UnsupportedVersion { path: PathBuf, version: u16 },
    #[error("{path}: file is truncated")]
    Truncated { path: PathBuf },
    #[error("{path}: trailing bytes after the last frame")]
    TrailingBytes { path: PathBuf },
    #[error("{path}: manifest parse error: {source}")]
    ManifestParse {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// The six shape classes used as stand-ins for the object categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Disk,
    Square,
    Triangle,
    Ring,
    Cross,
    Ellipse,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 6] = [
        ShapeClass::Disk,
        ShapeClass::Square,
        ShapeClass::Triangle,
        ShapeClass::Ring,
        ShapeClass::Cross,
        ShapeClass::Ellipse,
    ];

    pub fn id(self) -> u16 {
        match self {
            ShapeClass::Disk => 0,
            ShapeClass::Square => 1,
            ShapeClass::Triangle => 2,
            ShapeClass::Ring => 3,
            ShapeClass::Cross => 4,
            ShapeClass::Ellipse => 5,
        }
    }

    pub fn from_id(id: u16) -> Result<Self, DatasetError> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or(DatasetError::UnknownClass(id))
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Disk => "disk",
            ShapeClass::Square => "square",
            ShapeClass::Triangle => "triangle",
            ShapeClass::Ring => "ring",
            ShapeClass::Cross => "cross",
            ShapeClass::Ellipse => "ellipse",
        }
    }

    // Signed distance in unit shape space (negative inside).
    fn sdf(self, x: f64, y: f64) -> f64 {
        match self {
            ShapeClass::Disk => (x * x + y * y).sqrt() - 1.0,
            ShapeClass::Square => x.abs().max(y.abs()) - 0.8,
            ShapeClass::Triangle => {
                // Equilateral, circumradius 1, apex up; max over the
                // three edge half-planes (inradius 0.5).
                let d1 = -y - 0.5;
                let d2 = 0.866_025_403_784_438_6 * x + 0.5 * y - 0.5;
                let d3 = -0.866_025_403_784_438_6 * x + 0.5 * y - 0.5;
                d1.max(d2).max(d3)
            }
            ShapeClass::Ring => ((x * x + y * y).sqrt() - 0.75).abs() - 0.25,
            ShapeClass::Cross => {
                let horizontal = (x.abs() - 1.0).max(y.abs() - 0.3);
                let vertical = (x.abs() - 0.3).max(y.abs() - 1.0);
                horizontal.min(vertical)
            }
            ShapeClass::Ellipse => {
                let sy = 2.2 * y;
                (x * x + sy * sy).sqrt() - 1.0
            }
        }
    }
}

/// Camera-orbit and rendering envelope. The defaults match the
/// generation contract: one full rotation, foreshortening down to 0.6
/// and zoom in 0.7-1.3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    pub rotation_turns: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub zoom_min: f64,
    pub zoom_max: f64,
    /// Shape radius as a fraction of the smaller frame dimension.
    #[serde(default = "default_shape_scale")]
    pub shape_scale: f64,
    /// Width of the anti-aliased edge ramp, in pixels.
    #[serde(default = "default_edge_softness")]
    pub edge_softness: f64,
}

fn default_shape_scale() -> f64 {
    0.35
}

fn default_edge_softness() -> f64 {
    1.0
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            rotation_turns: 1.0,
            scale_min: 0.6,
            scale_max: 1.0,
            zoom_min: 0.7,
            zoom_max: 1.3,
            shape_scale: default_shape_scale(),
            edge_softness: default_edge_softness(),
        }
    }
}

impl OrbitConfig {
    /// No rotation, no foreshortening, no zoom: every frame identical.
    pub fn static_camera() -> Self {
        Self {
            rotation_turns: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
            zoom_min: 1.0,
            zoom_max: 1.0,
            ..Self::default()
        }
    }
}

/// One labeled grayscale clip plus its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub frames: Vec<GrayFrame>,
    pub class: ShapeClass,
    pub seed: u64,
    pub noise_sigma: f32,
}

impl Video {
    pub fn new(
        frames: Vec<GrayFrame>,
        class: ShapeClass,
        seed: u64,
        noise_sigma: f32,
    ) -> Result<Self, DatasetError> {
        let first = frames.first().ok_or(DatasetError::NoFrames)?;
        let (w, h) = (first.width, first.height);
        for (index, f) in frames.iter().enumerate() {
            if f.width != w || f.height != h {
                return Err(DatasetError::MixedFrameGeometry {
                    index,
                    want_w: w,
                    want_h: h,
                    got_w: f.width,
                    got_h: f.height,
                });
            }
        }
        Ok(Self {
            frames,
            class,
            seed,
            noise_sigma,
        })
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }
}

/// Renders one video with the default orbit.
pub fn generate_video(
    class: ShapeClass,
    frame_count: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Video, DatasetError> {
    generate_video_with(
        class,
        frame_count,
        width,
        height,
        seed,
        &OrbitConfig::default(),
    )
}

/// Renders one video under an explicit orbit envelope.
pub fn generate_video_with(
    class: ShapeClass,
    frame_count: usize,
    width: usize,
    height: usize,
    seed: u64,
    orbit: &OrbitConfig,
) -> Result<Video, DatasetError> {
    if width < 16 || height < 16 {
        return Err(DatasetError::FrameTooSmall { width, height });
    }
    if frame_count == 0 {
        return Err(DatasetError::NoFrames);
    }
    let mut rng = Xoshiro256pp::from_seed(seed);
    let rotation_phase = rng.next_f64() * std::f64::consts::TAU;
    let rotation_dir = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
    let scale_phase = rng.next_f64() * std::f64::consts::TAU;
    let scale_freq = 1.0 + rng.next_below(2) as f64;
    let zoom_phase = rng.next_f64() * std::f64::consts::TAU;
    let zoom_freq = 1.0 + rng.next_below(2) as f64;

    let base_radius = orbit.shape_scale * width.min(height) as f64;
    let envelope = |min: f64, max: f64, phase: f64| {
        move |t: f64| {
            let mid = 0.5 * (min + max);
            let amp = 0.5 * (max - min);
            mid + amp * (std::f64::consts::TAU * t + phase).sin()
        }
    };
    let scale_at = envelope(orbit.scale_min, orbit.scale_max, scale_phase);
    let zoom_at = envelope(orbit.zoom_min, orbit.zoom_max, zoom_phase);

    let frames = (0..frame_count)
        .map(|f| {
            let t = f as f64 / frame_count as f64;
            let angle =
                rotation_phase + rotation_dir * std::f64::consts::TAU * orbit.rotation_turns * t;
            let (sin_a, cos_a) = angle.sin_cos();
            let scale_x = scale_at(scale_freq * t);
            let zoom = zoom_at(zoom_freq * t);
            let radius = base_radius * zoom;

            let mut pixels = Vec::with_capacity(width * height);
            for py in 0..height {
                for px in 0..width {
                    let u = px as f64 + 0.5 - width as f64 / 2.0;
                    let v = py as f64 + 0.5 - height as f64 / 2.0;
                    // Inverse camera transform: unrotate, undo
                    // foreshortening along the shape's x axis, unzoom.
                    let qx = (u * cos_a + v * sin_a) / scale_x / radius;
                    let qy = (-u * sin_a + v * cos_a) / radius;
                    let d_px = class.sdf(qx, qy) * radius;
                    let val = (0.5 - d_px / orbit.edge_softness).clamp(0.0, 1.0) * 255.0;
                    pixels.push(val.round() as u8);
                }
            }
            GrayFrame {
                width,
                height,
                pixels,
            }
        })
        .collect();
    Video::new(frames, class, seed, 0.0)
}

/// Adds rounded Gaussian noise, clamped to [0, 255]. Each frame draws
/// from a substream of (seed, video seed, frame index); the sigma is
/// recorded in the returned video's metadata.
pub fn add_gaussian_noise(video: &Video, sigma: f64, seed: u64) -> Result<Video, DatasetError> {
    if sigma < 0.0 {
        return Err(DatasetError::NegativeSigma(sigma));
    }
    let base = mix_seed(seed, video.seed);
    let frames = video
        .frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let mut rng = Xoshiro256pp::from_seed_stream(base, i as u64);
            let pixels = frame
                .pixels
                .iter()
                .map(|&p| {
                    let g = (rng.next_normal() * sigma).round();
                    (p as f64 + g).clamp(0.0, 255.0) as u8
                })
                .collect();
            GrayFrame {
                width: frame.width,
                height: frame.height,
                pixels,
            }
        })
        .collect();
    Video::new(frames, video.class, video.seed, sigma as f32)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a video atomically (temp file, then rename).
pub fn write_video(video: &Video, path: &Path) -> Result<(), DatasetError> {
    let tmp = path.with_extension("htmv.tmp");
    {
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        w.write_all(&VIDEO_MAGIC).map_err(io_err(&tmp))?;
        w.write_all(&VIDEO_VERSION.to_le_bytes())
            .map_err(io_err(&tmp))?;
        w.write_all(&video.class.id().to_le_bytes())
            .map_err(io_err(&tmp))?;
        w.write_all(&(video.width() as u32).to_le_bytes())
            .map_err(io_err(&tmp))?;
        w.write_all(&(video.height() as u32).to_le_bytes())
            .map_err(io_err(&tmp))?;
        w.write_all(&(video.frames.len() as u32).to_le_bytes())
            .map_err(io_err(&tmp))?;
        w.write_all(&video.noise_sigma.to_le_bytes())
            .map_err(io_err(&tmp))?;
        w.write_all(&video.seed.to_le_bytes())
            .map_err(io_err(&tmp))?;
        for frame in &video.frames {
            w.write_all(&frame.pixels).map_err(io_err(&tmp))?;
        }
        w.flush().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Reads a video, verifying magic, version and exact length.
pub fn read_video(path: &Path) -> Result<Video, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let truncated = |_| DatasetError::Truncated {
        path: path.to_path_buf(),
    };

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != VIDEO_MAGIC {
        return Err(DatasetError::BadMagic {
            path: path.to_path_buf(),
            magic,
        });
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2).map_err(truncated)?;
    let version = u16::from_le_bytes(b2);
    if version != VIDEO_VERSION {
        return Err(DatasetError::UnsupportedVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    r.read_exact(&mut b2).map_err(truncated)?;
    let class = ShapeClass::from_id(u16::from_le_bytes(b2))?;
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(truncated)?;
    let width = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4).map_err(truncated)?;
    let height = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4).map_err(truncated)?;
    let frame_count = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4).map_err(truncated)?;
    let noise_sigma = f32::from_le_bytes(b4);
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(truncated)?;
    let seed = u64::from_le_bytes(b8);

    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let mut pixels = vec![0u8; width * height];
        r.read_exact(&mut pixels).map_err(truncated)?;
        frames.push(GrayFrame {
            width,
            height,
            pixels,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io_err(path))? != 0 {
        return Err(DatasetError::TrailingBytes {
            path: path.to_path_buf(),
        });
    }
    Video::new(frames, class, seed, noise_sigma)
}

/// Reads only the header; used for cheap pre-flight geometry checks.
pub fn read_video_header(path: &Path) -> Result<(ShapeClass, usize, usize, usize), DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let truncated = |_| DatasetError::Truncated {
        path: path.to_path_buf(),
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != VIDEO_MAGIC {
        return Err(DatasetError::BadMagic {
            path: path.to_path_buf(),
            magic,
        });
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2).map_err(truncated)?;
    let version = u16::from_le_bytes(b2);
    if version != VIDEO_VERSION {
        return Err(DatasetError::UnsupportedVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    r.read_exact(&mut b2).map_err(truncated)?;
    let class = ShapeClass::from_id(u16::from_le_bytes(b2))?;
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(truncated)?;
    let width = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4).map_err(truncated)?;
    let height = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4).map_err(truncated)?;
    let frames = u32::from_le_bytes(b4) as usize;
    Ok((class, width, height, frames))
}

/// Named frame geometries (the reduction presets).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryPreset {
    R16,
    R8,
    R4,
}

impl GeometryPreset {
    pub fn dimensions(self) -> (usize, usize) {
        match self {
            GeometryPreset::R16 => (60, 32),
            GeometryPreset::R8 => (120, 66),
            GeometryPreset::R4 => (240, 134),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "R16" => Some(GeometryPreset::R16),
            "R8" => Some(GeometryPreset::R8),
            "R4" => Some(GeometryPreset::R4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest file.
    pub path: String,
    /// Identity shared by the clean and noisy variants of one video.
    pub video_id: u32,
    pub class_id: u16,
    pub class_name: String,
    pub split: Split,
    pub noise_sigma: f64,
    pub video_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub videos_per_class: usize,
    pub train_per_class: usize,
    pub noise_sigmas: Vec<f64>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub out_dir: PathBuf,
    pub videos_per_class: usize,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub train_fraction: f64,
    pub noise_sigmas: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub orbit: Option<OrbitConfig>,
}

/// Renders the full dataset: the training split stays clean, each test
/// video is stored clean plus one noisy copy per requested sigma.
/// Returns the manifest, which is also written to
/// `out_dir/manifest.json`.
pub fn generate_dataset(config: &GenerateConfig) -> Result<DatasetManifest, DatasetError> {
    if config.videos_per_class < 2 {
        return Err(DatasetError::TooFewVideos(config.videos_per_class));
    }
    let train_per_class = (config.videos_per_class as f64 * config.train_fraction).round() as usize;
    if train_per_class == 0 || train_per_class >= config.videos_per_class {
        return Err(DatasetError::BadTrainFraction(config.train_fraction));
    }
    for &sigma in &config.noise_sigmas {
        if sigma < 0.0 {
            return Err(DatasetError::NegativeSigma(sigma));
        }
    }
    let orbit = config.orbit.clone().unwrap_or_default();

    let train_dir = config.out_dir.join("train");
    let test_dir = config.out_dir.join("test");
    fs::create_dir_all(&train_dir).map_err(io_err(&train_dir))?;
    fs::create_dir_all(&test_dir).map_err(io_err(&test_dir))?;

    let jobs: Vec<(usize, usize)> = ShapeClass::ALL
        .iter()
        .enumerate()
        .flat_map(|(ci, _)| (0..config.videos_per_class).map(move |v| (ci, v)))
        .collect();

    let entries: Vec<Vec<ManifestEntry>> = jobs
        .par_iter()
        .map(|&(ci, v)| -> Result<Vec<ManifestEntry>, DatasetError> {
            let class = ShapeClass::ALL[ci];
            let video_id = (ci * config.videos_per_class + v) as u32;
            let video_seed = mix_seed(config.seed, video_id as u64);
            let video = generate_video_with(
                class,
                config.frames,
                config.width,
                config.height,
                video_seed,
                &orbit,
            )?;
            let mut out = Vec::new();
            if v < train_per_class {
                let rel = format!("train/{}_{v:03}.htmv", class.name());
                write_video(&video, &config.out_dir.join(&rel))?;
                out.push(ManifestEntry {
                    path: rel,
                    video_id,
                    class_id: class.id(),
                    class_name: class.name().to_string(),
                    split: Split::Train,
                    noise_sigma: 0.0,
                    video_seed,
                });
            } else {
                let rel = format!("test/{}_{v:03}_clean.htmv", class.name());
                write_video(&video, &config.out_dir.join(&rel))?;
                out.push(ManifestEntry {
                    path: rel,
                    video_id,
                    class_id: class.id(),
                    class_name: class.name().to_string(),
                    split: Split::Test,
                    noise_sigma: 0.0,
                    video_seed,
                });
                for (si, &sigma) in config.noise_sigmas.iter().enumerate() {
                    let noisy =
                        add_gaussian_noise(&video, sigma, mix_seed(config.seed, 1 + si as u64))?;
                    let rel = format!("test/{}_{v:03}_s{si}.htmv", class.name());
                    write_video(&noisy, &config.out_dir.join(&rel))?;
                    out.push(ManifestEntry {
                        path: rel,
                        video_id,
                        class_id: class.id(),
                        class_name: class.name().to_string(),
                        split: Split::Test,
                        noise_sigma: sigma,
                        video_seed,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;

    let manifest = DatasetManifest {
        schema_version: 1,
        seed: config.seed,
        width: config.width,
        height: config.height,
        frames: config.frames,
        videos_per_class: config.videos_per_class,
        train_per_class,
        noise_sigmas: config.noise_sigmas.clone(),
        entries: entries.into_iter().flatten().collect(),
    };
    write_manifest(&manifest, &config.out_dir.join("manifest.json"))?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), DatasetError> {
    let tmp = path.with_extension("json.tmp");
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&tmp, json).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| DatasetError::ManifestParse {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn video_has_requested_geometry() {
        let v = generate_video(ShapeClass::Disk, 32, 240, 134, 1).unwrap();
        assert_eq!(v.frames.len(), 32);
        assert_eq!((v.width(), v.height()), (240, 134));
    }

    #[test]
    fn static_camera_repeats_the_first_frame() {
        let v = generate_video_with(
            ShapeClass::Cross,
            8,
            64,
            64,
            5,
            &OrbitConfig::static_camera(),
        )
        .unwrap();
        for f in &v.frames[1..] {
            assert_eq!(f, &v.frames[0]);
        }
    }

    #[test]
    fn same_seed_renders_identical_videos() {
        let a = generate_video(ShapeClass::Triangle, 16, 60, 32, 99).unwrap();
        let b = generate_video(ShapeClass::Triangle, 16, 60, 32, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_video(ShapeClass::Triangle, 16, 60, 32, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shapes_render_distinct_silhouettes() {
        let mut signatures = Vec::new();
        for class in ShapeClass::ALL {
            let v =
                generate_video_with(class, 1, 64, 64, 7, &OrbitConfig::static_camera()).unwrap();
            let on = v.frames[0].pixels.iter().filter(|&&p| p > 128).count();
            assert!(on > 100, "{} renders almost nothing", class.name());
            signatures.push(v.frames[0].pixels.clone());
        }
        for i in 0..signatures.len() {
            for j in i + 1..signatures.len() {
                assert_ne!(signatures[i], signatures[j]);
            }
        }
    }

    #[test]
    fn rejects_small_frames_and_unknown_classes() {
        assert!(matches!(
            generate_video(ShapeClass::Disk, 4, 8, 32, 0),
            Err(DatasetError::FrameTooSmall { .. })
        ));
        assert!(matches!(
            ShapeClass::from_id(6),
            Err(DatasetError::UnknownClass(6))
        ));
    }

    #[test]
    fn zero_sigma_noise_is_identity() {
        let v = generate_video(ShapeClass::Ring, 4, 60, 32, 3).unwrap();
        let noisy = add_gaussian_noise(&v, 0.0, 17).unwrap();
        assert_eq!(noisy.frames, v.frames);
        assert_eq!(noisy.noise_sigma, 0.0);
    }

    #[test]
    fn noise_statistics_match_sigma_on_interior_gray_levels() {
        // Std of (noisy - clean) over pixels with clean value in
        // [32, 223], where clamping cannot bite, within 5% of sigma.
        let sigma = 12.0;
        let v = generate_video(ShapeClass::Disk, 32, 240, 134, 21).unwrap();
        let noisy = add_gaussian_noise(&v, sigma, 4).unwrap();
        let mut diffs = Vec::new();
        for (cf, nf) in v.frames.iter().zip(&noisy.frames) {
            for (&c, &n) in cf.pixels.iter().zip(&nf.pixels) {
                if (32..=223).contains(&c) {
                    diffs.push(n as f64 - c as f64);
                }
            }
        }
        assert!(
            diffs.len() > 2000,
            "need interior samples, got {}",
            diffs.len()
        );
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var =
            diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (diffs.len() - 1) as f64;
        let std = var.sqrt();
        assert!(
            (std - sigma).abs() / sigma < 0.05,
            "measured std {std} vs sigma {sigma}"
        );
    }

    #[test]
    fn container_roundtrip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.htmv");
        let v = generate_video(ShapeClass::Ellipse, 4, 60, 32, 9).unwrap();
        let noisy = add_gaussian_noise(&v, 4.25, 2).unwrap();
        write_video(&noisy, &path).unwrap();
        let back = read_video(&path).unwrap();
        assert_eq!(back, noisy);
        let (class, w, h, frames) = read_video_header(&path).unwrap();
        assert_eq!((class, w, h, frames), (ShapeClass::Ellipse, 60, 32, 4));
    }

    #[test]
    fn container_rejects_corruption_with_distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.htmv");
        let v = generate_video(ShapeClass::Disk, 2, 16, 16, 1).unwrap();
        write_video(&v, &path).unwrap();
        let bytes = fs::read(&path).unwrap();

        let foreign = dir.path().join("foreign.htmv");
        let mut corrupt = bytes.clone();
        corrupt[..4].copy_from_slice(b"RIFF");
        fs::write(&foreign, &corrupt).unwrap();
        assert!(matches!(
            read_video(&foreign),
            Err(DatasetError::BadMagic { .. })
        ));

        let truncated = dir.path().join("short.htmv");
        fs::write(&truncated, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(
            read_video(&truncated),
            Err(DatasetError::Truncated { .. })
        ));

        let versioned = dir.path().join("vers.htmv");
        let mut corrupt = bytes.clone();
        corrupt[4] = 99;
        fs::write(&versioned, &corrupt).unwrap();
        assert!(matches!(
            read_video(&versioned),
            Err(DatasetError::UnsupportedVersion { version: 99, .. })
        ));

        let trailing = dir.path().join("long.htmv");
        let mut corrupt = bytes;
        corrupt.push(0);
        fs::write(&trailing, &corrupt).unwrap();
        assert!(matches!(
            read_video(&trailing),
            Err(DatasetError::TrailingBytes { .. })
        ));
    }

    fn desk_config(dir: &Path, seed: u64) -> GenerateConfig {
        GenerateConfig {
            out_dir: dir.to_path_buf(),
            videos_per_class: 10,
            frames: 4,
            width: 60,
            height: 32,
            train_fraction: 0.8,
            noise_sigmas: vec![4.25],
            seed,
            orbit: None,
        }
    }

    #[test]
    fn dataset_split_arithmetic_and_balance() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_dataset(&desk_config(dir.path(), 11)).unwrap();
        // 6 classes x 10 videos, 80/20: 48 train, 12 test per noise level.
        let train: Vec<_> = manifest
            .entries
            .iter()
            .filter(|e| e.split == Split::Train)
            .collect();
        let test_clean: Vec<_> = manifest
            .entries
            .iter()
            .filter(|e| e.split == Split::Test && e.noise_sigma == 0.0)
            .collect();
        let test_noisy: Vec<_> = manifest
            .entries
            .iter()
            .filter(|e| e.split == Split::Test && e.noise_sigma > 0.0)
            .collect();
        assert_eq!(train.len(), 48);
        assert_eq!(test_clean.len(), 12);
        assert_eq!(test_noisy.len(), 12);
        for class in ShapeClass::ALL {
            assert_eq!(train.iter().filter(|e| e.class_id == class.id()).count(), 8);
            assert_eq!(
                test_clean
                    .iter()
                    .filter(|e| e.class_id == class.id())
                    .count(),
                2
            );
        }
        // Disjoint splits: no video id appears in both.
        for t in &train {
            assert!(test_clean.iter().all(|e| e.video_id != t.video_id));
        }
        // Every referenced file exists.
        for e in &manifest.entries {
            assert!(dir.path().join(&e.path).is_file(), "{}", e.path);
        }
    }

    #[test]
    fn manifest_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_dataset(&desk_config(dir.path(), 5)).unwrap();
        let back = read_manifest(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn generation_is_byte_identical_per_seed() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = generate_dataset(&desk_config(dir_a.path(), 7)).unwrap();
        let b = generate_dataset(&desk_config(dir_b.path(), 7)).unwrap();
        assert_eq!(a.entries.len(), b.entries.len());
        for (ea, eb) in a.entries.iter().zip(&b.entries) {
            assert_eq!(ea.path, eb.path);
            let bytes_a = fs::read(dir_a.path().join(&ea.path)).unwrap();
            let bytes_b = fs::read(dir_b.path().join(&eb.path)).unwrap();
            assert_eq!(bytes_a, bytes_b, "{}", ea.path);
        }
    }

    #[test]
    fn config_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = desk_config(dir.path(), 1);
        cfg.videos_per_class = 1;
        assert!(matches!(
            generate_dataset(&cfg),
            Err(DatasetError::TooFewVideos(1))
        ));
        let mut cfg = desk_config(dir.path(), 1);
        cfg.train_fraction = 1.0;
        assert!(matches!(
            generate_dataset(&cfg),
            Err(DatasetError::BadTrainFraction(_))
        ));
        let mut cfg = desk_config(dir.path(), 1);
        cfg.noise_sigmas = vec![-1.0];
        assert!(matches!(
            generate_dataset(&cfg),
            Err(DatasetError::NegativeSigma(_))
        ));
    }
}
