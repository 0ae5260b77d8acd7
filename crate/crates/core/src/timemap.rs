//! Per-pixel invasion-time map and its colour rendering.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{segment_frame, BinaryFrame, GrayFrame, ImageSeries};

/// Raw encoding of [`TimeValue::Solid`].
pub const SOLID: u32 = 0;
/// Raw encoding of [`TimeValue::Never`].
pub const NEVER: u32 = u32::MAX;

/// Invasion time of one pixel. The derived ordering is
/// `Solid < Frame(1) < Frame(2) < … < Never`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeValue {
    Solid,
    Frame(u32),
    Never,
}

impl TimeValue {
    #[inline]
    pub fn from_raw(raw: u32) -> Self {
        match raw {
            SOLID => TimeValue::Solid,
            NEVER => TimeValue::Never,
            t => TimeValue::Frame(t),
        }
    }

    #[inline]
    pub fn to_raw(self) -> u32 {
        match self {
            TimeValue::Solid => SOLID,
            TimeValue::Never => NEVER,
            TimeValue::Frame(t) => t,
        }
    }

    pub fn frame(self) -> Option<u32> {
        match self {
            TimeValue::Frame(t) => Some(t),
            _ => None,
        }
    }
}

#[inline]
pub(crate) fn is_frame(raw: u32) -> bool {
    raw != SOLID && raw != NEVER
}

/// Grid of invasion times. Values are stored in their raw `u32` encoding, so
/// the numeric order of the raw values coincides with the [`TimeValue`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMap {
    pub width: usize,
    pub height: usize,
    pub frame_period: f64,
    /// Index of the last folded frame (`T`).
    pub last_frame: u32,
    data: Vec<u32>,
}

impl TimeMap {
    pub fn from_raw(
        width: usize,
        height: usize,
        frame_period: f64,
        last_frame: u32,
        data: Vec<u32>,
    ) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Invalid(format!(
                "time map has {} cells, expected {}",
                data.len(),
                width * height
            )));
        }
        Ok(TimeMap {
            width,
            height,
            frame_period,
            last_frame,
            data,
        })
    }

    pub fn from_values(
        width: usize,
        height: usize,
        frame_period: f64,
        values: &[TimeValue],
    ) -> Result<Self> {
        let data: Vec<u32> = values.iter().map(|v| v.to_raw()).collect();
        let last = data.iter().copied().filter(|&r| is_frame(r)).max().unwrap_or(0);
        Self::from_raw(width, height, frame_period, last, data)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> TimeValue {
        TimeValue::from_raw(self.data[y * self.width + x])
    }

    #[inline]
    pub fn raw_at(&self, idx: usize) -> u32 {
        self.data[idx]
    }

    pub fn raw(&self) -> &[u32] {
        &self.data
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    pub fn values(&self) -> impl Iterator<Item = TimeValue> + '_ {
        self.data.iter().map(|&r| TimeValue::from_raw(r))
    }

    /// Number of pixels holding a frame time.
    pub fn invaded_pixels(&self) -> usize {
        self.data.iter().filter(|&&r| is_frame(r)).count()
    }

    /// Updates the map with the segmentation of frame `tau`.
    pub fn fold(&mut self, frame: &BinaryFrame, tau: u32) -> Result<()> {
        self.check_fold(frame.width, frame.height, tau)?;
        self.data
            .par_chunks_mut(self.width)
            .zip(frame.dark.par_chunks(self.width))
            .for_each(|(row, dark)| {
                for (m, &d) in row.iter_mut().zip(dark) {
                    if d {
                        *m = (*m).min(tau);
                    }
                }
            });
        self.last_frame = tau;
        Ok(())
    }

    /// Segments and folds a grayscale frame in one pass.
    pub fn fold_gray(&mut self, frame: &GrayFrame, beta: f64, tau: u32) -> Result<()> {
        self.check_fold(frame.width, frame.height, tau)?;
        let beta = beta as f32;
        self.data
            .par_chunks_mut(self.width)
            .zip(frame.data.par_chunks(self.width))
            .for_each(|(row, intensity)| {
                for (m, &v) in row.iter_mut().zip(intensity) {
                    let candidate = if v <= beta { tau } else { NEVER };
                    *m = (*m).min(candidate);
                }
            });
        self.last_frame = tau;
        Ok(())
    }

    fn check_fold(&self, width: usize, height: usize, tau: u32) -> Result<()> {
        if (width, height) != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                found: (width, height),
            });
        }
        if tau <= self.last_frame || tau == NEVER {
            return Err(Error::FrameOrder {
                tau,
                last: self.last_frame,
            });
        }
        Ok(())
    }
}

/// `SOLID` where the first frame is DARK, `NEVER` elsewhere.
pub fn init_time_map(first: &BinaryFrame, frame_period: f64) -> TimeMap {
    TimeMap {
        width: first.width,
        height: first.height,
        frame_period,
        last_frame: 0,
        data: first
            .dark
            .iter()
            .map(|&d| if d { SOLID } else { NEVER })
            .collect(),
    }
}

pub fn fold_frame(prev: &TimeMap, frame: &BinaryFrame, tau: u32) -> Result<TimeMap> {
    let mut next = prev.clone();
    next.fold(frame, tau)?;
    Ok(next)
}

/// Streaming time-map construction: push frames `0, 1, …, T` in order.
#[derive(Debug)]
pub struct TimeMapBuilder {
    beta: f64,
    frame_period: f64,
    map: Option<TimeMap>,
}

impl TimeMapBuilder {
    pub fn new(beta: f64, frame_period: f64) -> Self {
        TimeMapBuilder {
            beta,
            frame_period,
            map: None,
        }
    }

    pub fn push(&mut self, frame: &GrayFrame) -> Result<()> {
        match &mut self.map {
            None => {
                self.map = Some(init_time_map(
                    &segment_frame(frame, self.beta),
                    self.frame_period,
                ))
            }
            Some(map) => {
                let tau = map.last_frame + 1;
                map.fold_gray(frame, self.beta, tau)?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<TimeMap> {
        self.map
            .ok_or_else(|| Error::Invalid("no frames were pushed".into()))
    }
}

pub fn build_time_map(series: &ImageSeries, beta: f64) -> Result<TimeMap> {
    let mut builder = TimeMapBuilder::new(beta, series.frame_period);
    for frame in &series.frames {
        builder.push(frame)?;
    }
    builder.finish()
}

/// Length of one colour period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Frames(u32),
    /// Converted to frames with the dataset's frame period so that one
    /// period covers the same physical time across datasets.
    Seconds(f64),
    /// Non-periodic: the map spans the whole series once.
    Infinite,
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Frames(n) => write!(f, "{n}"),
            Period::Seconds(s) => write!(f, "{s}s"),
            Period::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Period::Infinite);
        }
        if let Some(sec) = s.strip_suffix('s') {
            return sec
                .parse()
                .map(Period::Seconds)
                .map_err(|_| Error::Config(format!("bad colour period `{s}`")));
        }
        s.parse()
            .map(Period::Frames)
            .map_err(|_| Error::Config(format!("bad colour period `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColormapSpec {
    pub name: String,
    pub period: Period,
}

impl Default for ColormapSpec {
    fn default() -> Self {
        ColormapSpec {
            name: "hsv".into(),
            period: Period::Frames(20),
        }
    }
}

impl ColormapSpec {
    pub fn validate(&self) -> Result<()> {
        Colormap::by_name(&self.name)?;
        match self.period {
            Period::Frames(n) if n < 2 => {
                Err(Error::Config("colour period must span at least 2 frames".into()))
            }
            Period::Seconds(s) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::Config("colour period in seconds must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Period length in frames, or `None` for the non-periodic mode.
    pub fn period_frames(&self, frame_period: f64) -> Option<u32> {
        match self.period {
            Period::Frames(n) => Some(n.max(2)),
            Period::Seconds(s) => Some(((s / frame_period).round() as u32).max(2)),
            Period::Infinite => None,
        }
    }
}

/// Piecewise-linear colour map through evenly spaced anchors.
#[derive(Debug, Clone, Copy)]
pub struct Colormap {
    anchors: &'static [[u8; 3]],
    cyclic: bool,
}

const HSV: &[[u8; 3]] = &[
    [255, 0, 0],
    [255, 255, 0],
    [0, 255, 0],
    [0, 255, 255],
    [0, 0, 255],
    [255, 0, 255],
    [255, 0, 0],
];
const VIRIDIS: &[[u8; 3]] = &[
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
];
// Stays clear of black and white, which mark solid and undisplaced pixels.
const GRAY: &[[u8; 3]] = &[[40, 40, 40], [215, 215, 215]];

impl Colormap {
    pub const NAMES: &'static [&'static str] = &["hsv", "viridis", "gray"];

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "hsv" => Ok(Colormap { anchors: HSV, cyclic: true }),
            "viridis" => Ok(Colormap { anchors: VIRIDIS, cyclic: false }),
            "gray" | "grey" => Ok(Colormap { anchors: GRAY, cyclic: false }),
            other => Err(Error::Config(format!(
                "unknown colormap `{other}` (available: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn sample(&self, t: f64) -> [u8; 3] {
        let t = t.clamp(0.0, 1.0);
        let segments = (self.anchors.len() - 1) as f64;
        let pos = t * segments;
        let i = (pos.floor() as usize).min(self.anchors.len() - 2);
        let frac = pos - i as f64;
        let (a, b) = (self.anchors[i], self.anchors[i + 1]);
        let mut out = [0u8; 3];
        for c in 0..3 {
            out[c] = (a[c] as f64 + (b[c] as f64 - a[c] as f64) * frac).round() as u8;
        }
        out
    }

    /// `n` distinct colours for a period of `n` frames.
    pub fn palette(&self, n: u32) -> Vec<[u8; 3]> {
        let denom = if self.cyclic { n as f64 } else { (n - 1).max(1) as f64 };
        (0..n).map(|k| self.sample(k as f64 / denom)).collect()
    }
}

pub const SOLID_COLOR: [u8; 3] = [0, 0, 0];
pub const NEVER_COLOR: [u8; 3] = [255, 255, 255];
pub const HIGHLIGHT_COLOR: [u8; 3] = [255, 0, 0];

/// Colour of a single time value under `spec`.
pub fn color_of(value: TimeValue, cmap: &Colormap, period: Option<u32>, palette: &[[u8; 3]], last_frame: u32) -> [u8; 3] {
    match value {
        TimeValue::Solid => SOLID_COLOR,
        TimeValue::Never => NEVER_COLOR,
        TimeValue::Frame(t) => match period {
            Some(p) => palette[(t % p) as usize],
            None => {
                let span = last_frame.max(2) - 1;
                cmap.sample((t.saturating_sub(1)) as f64 / span as f64)
            }
        },
    }
}

/// Renders solid pixels black, undisplaced pixels white and frame times
/// through the (periodic) colour map; pixels of the `highlight` frame are
/// painted in [`HIGHLIGHT_COLOR`].
pub fn render_time_map(map: &TimeMap, spec: &ColormapSpec, highlight: Option<u32>) -> Result<RgbImage> {
    spec.validate()?;
    let cmap = Colormap::by_name(&spec.name)?;
    let period = spec.period_frames(map.frame_period);
    let palette = period.map(|p| cmap.palette(p)).unwrap_or_default();
    let mut img = RgbImage::new(map.width as u32, map.height as u32);
    for (px, &raw) in img.pixels_mut().zip(map.raw()) {
        let color = if highlight.is_some_and(|h| is_frame(raw) && raw == h) {
            HIGHLIGHT_COLOR
        } else {
            color_of(TimeValue::from_raw(raw), &cmap, period, &palette, map.last_frame)
        };
        *px = Rgb(color);
    }
    Ok(img)
}

/// JSON sidecar of the binary time-map export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeMapSidecar {
    pub width: usize,
    pub height: usize,
    pub frame_period: f64,
    pub last_frame: u32,
    pub solid_sentinel: u32,
    pub never_sentinel: u32,
}

/// Little-endian `u32` grid preceded by an 8-byte `(width, height)` header.
pub fn encode_time_map(map: &TimeMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * map.data.len());
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    for &v in &map.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_time_map(bytes: &[u8], sidecar: &TimeMapSidecar) -> Result<TimeMap> {
    if bytes.len() < 8 {
        return Err(Error::Invalid("time map file shorter than its header".into()));
    }
    let width = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if (width, height) != (sidecar.width, sidecar.height) {
        return Err(Error::DimensionMismatch {
            expected: (sidecar.width, sidecar.height),
            found: (width, height),
        });
    }
    let body = &bytes[8..];
    if body.len() != 4 * width * height {
        return Err(Error::Invalid("time map body size does not match header".into()));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    TimeMap::from_raw(width, height, sidecar.frame_period, sidecar.last_frame, data)
}

pub fn sidecar_of(map: &TimeMap) -> TimeMapSidecar {
    TimeMapSidecar {
        width: map.width,
        height: map.height,
        frame_period: map.frame_period,
        last_frame: map.last_frame,
        solid_sentinel: SOLID,
        never_sentinel: NEVER,
    }
}

pub fn write_time_map(map: &TimeMap, bin_path: &Path, json_path: &Path) -> Result<()> {
    let mut f = fs::File::create(bin_path).map_err(|e| Error::io(bin_path, e))?;
    f.write_all(&encode_time_map(map))
        .map_err(|e| Error::io(bin_path, e))?;
    let json = serde_json::to_string_pretty(&sidecar_of(map))?;
    fs::write(json_path, json).map_err(|e| Error::io(json_path, e))
}

pub fn read_time_map(bin_path: &Path, json_path: &Path) -> Result<TimeMap> {
    let text = fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    let sidecar: TimeMapSidecar = serde_json::from_str(&text)?;
    let bytes = fs::read(bin_path).map_err(|e| Error::io(bin_path, e))?;
    decode_time_map(&bytes, &sidecar)
}

impl PartialOrd for TimeMap {
    /// Pointwise order; `None` when the maps are incomparable.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if (self.width, self.height) != (other.width, other.height) {
            return None;
        }
        let mut result = Ordering::Equal;
        for (a, b) in self.data.iter().zip(&other.data) {
            match (a.cmp(b), result) {
                (Ordering::Equal, _) => {}
                (o, Ordering::Equal) => result = o,
                (o, r) if o != r => return None,
                _ => {}
            }
        }
        Some(result)
    }
}
