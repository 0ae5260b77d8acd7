//! Loading, validating and thresholding the input image series.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Rect;
use crate::timemap::ColormapSpec;

/// File extensions accepted as frames.
pub const FRAME_EXTENSIONS: &[&str] = &["png", "tif", "tiff", "pgm", "pnm", "ppm"];

/// Optional file listing frame filenames, one per line, in temporal order.
pub const FRAME_MANIFEST: &str = "frames.txt";

/// Largest absolute drop of the DARK fraction between two frames that is
/// still treated as segmentation noise.
pub const RETREAT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    /// Intensity threshold; a pixel is DARK iff its intensity is `<= threshold_beta`.
    pub threshold_beta: f64,
    /// Fronts with fewer pixels than this are quantized.
    pub gamma: u32,
    pub inlet_region: Rect,
    pub outlet_region: Rect,
    /// Seconds per frame.
    pub frame_period: f64,
    /// Out/in velocity ratio from which a node counts as a jump.
    pub jump_ratio: f64,
    pub colormap: ColormapSpec,
}

impl DatasetConfig {
    pub const DEFAULT_BETA: f64 = 0.5;
    pub const DEFAULT_GAMMA: u32 = 100;
    pub const DEFAULT_JUMP_RATIO: f64 = 5.0;

    pub fn new(inlet_region: Rect, outlet_region: Rect) -> Self {
        DatasetConfig {
            name: "dataset".to_string(),
            threshold_beta: Self::DEFAULT_BETA,
            gamma: Self::DEFAULT_GAMMA,
            inlet_region,
            outlet_region,
            frame_period: 1.0,
            jump_ratio: Self::DEFAULT_JUMP_RATIO,
            colormap: ColormapSpec::default(),
        }
    }

    /// Checks the invariants that do not depend on the image size.
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_beta > 0.0 && self.threshold_beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1), got {}",
                self.threshold_beta
            )));
        }
        if self.gamma < 1 {
            return Err(Error::Config("gamma must be at least 1".into()));
        }
        if !(self.frame_period > 0.0 && self.frame_period.is_finite()) {
            return Err(Error::Config(format!(
                "frame_period must be positive, got {}",
                self.frame_period
            )));
        }
        if self.jump_ratio.is_nan() || self.jump_ratio <= 1.0 {
            return Err(Error::Config(format!(
                "jump_ratio must exceed 1, got {}",
                self.jump_ratio
            )));
        }
        if self.inlet_region.area() == 0 || self.outlet_region.area() == 0 {
            return Err(Error::Config("inlet and outlet regions must be non-empty".into()));
        }
        if self.inlet_region.intersects(&self.outlet_region) {
            return Err(Error::Config("inlet_region and outlet_region overlap".into()));
        }
        self.colormap.validate()
    }

    /// Checks that both regions lie inside a `width × height` image.
    pub fn validate_bounds(&self, width: usize, height: usize) -> Result<()> {
        for (name, r) in [("inlet_region", &self.inlet_region), ("outlet_region", &self.outlet_region)] {
            if !r.fits_within(width, height) {
                return Err(Error::Config(format!("{name} out of bounds")));
            }
        }
        Ok(())
    }

    /// Parses the `key = value` configuration format. Lines starting with `#`
    /// are comments; rectangles are written as `x,y,w,h`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = DatasetConfig::new(Rect::new(0, 0, 0, 0), Rect::new(0, 0, 0, 0));
        let mut seen_inlet = false;
        let mut seen_outlet = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "inlet" | "inlet_region" => seen_inlet = true,
                "outlet" | "outlet_region" => seen_outlet = true,
                _ => {}
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, strip_prefix(e))))?;
        }
        if !seen_inlet || !seen_outlet {
            return Err(Error::Config("both inlet and outlet must be configured".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one configuration key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
        }
        match key {
            "name" => self.name = value.to_string(),
            "beta" | "threshold_beta" => self.threshold_beta = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "inlet" | "inlet_region" => self.inlet_region = value.parse()?,
            "outlet" | "outlet_region" => self.outlet_region = value.parse()?,
            "frame_period" => self.frame_period = num(key, value)?,
            "jump_ratio" => self.jump_ratio = num(key, value)?,
            "colormap" => self.colormap.name = value.to_string(),
            "period_frames" => self.colormap.period = value.parse()?,
            "period_seconds" => {
                self.colormap.period = crate::timemap::Period::Seconds(num(key, value)?)
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Renders the configuration in the same format [`DatasetConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("name = {}\n", self.name));
        s.push_str(&format!("beta = {}\n", self.threshold_beta));
        s.push_str(&format!("gamma = {}\n", self.gamma));
        s.push_str(&format!("inlet = {}\n", self.inlet_region));
        s.push_str(&format!("outlet = {}\n", self.outlet_region));
        s.push_str(&format!("frame_period = {}\n", self.frame_period));
        s.push_str(&format!("jump_ratio = {}\n", self.jump_ratio));
        s.push_str(&format!("colormap = {}\n", self.colormap.name));
        match self.colormap.period {
            crate::timemap::Period::Seconds(sec) => s.push_str(&format!("period_seconds = {sec}\n")),
            p => s.push_str(&format!("period_frames = {p}\n")),
        }
        s
    }
}

fn strip_prefix(e: Error) -> String {
    let msg = e.to_string();
    msg.strip_prefix("invalid configuration: ")
        .map(str::to_string)
        .unwrap_or(msg)
}

/// One grayscale frame with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Invalid(format!(
                "frame data has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(GrayFrame { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        GrayFrame {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Mean over `factor × factor` blocks; edge blocks may be smaller.
    pub fn downsample(&self, factor: usize) -> GrayFrame {
        let f = factor.max(1);
        let (w, h) = (self.width.div_ceil(f), self.height.div_ceil(f));
        let mut sum = vec![0.0f64; w * h];
        let mut count = vec![0u32; w * h];
        for y in 0..self.height {
            for x in 0..self.width {
                let k = (y / f) * w + x / f;
                sum[k] += self.data[y * self.width + x] as f64;
                count[k] += 1;
            }
        }
        GrayFrame {
            width: w,
            height: h,
            data: sum.iter().zip(&count).map(|(s, &c)| (s / c as f64) as f32).collect(),
        }
    }

    pub fn to_luma8(&self) -> ImageBuffer<Luma<u8>, Vec<u8>> {
        let raw = self
            .data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer size matches dimensions")
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_luma8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Decode {
                    path: path.to_path_buf(),
                    message: other.to_string(),
                },
            })
    }
}

/// Ordered grayscale frames `τ = 0..=T` of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSeries {
    pub frames: Vec<GrayFrame>,
    pub width: usize,
    pub height: usize,
    pub frame_period: f64,
}

impl ImageSeries {
    pub fn new(frames: Vec<GrayFrame>, frame_period: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Invalid("a series needs at least two frames".into()))?;
        if frames.len() < 2 {
            return Err(Error::Invalid("a series needs at least two frames".into()));
        }
        let (width, height) = (first.width, first.height);
        for f in &frames {
            if (f.width, f.height) != (width, height) {
                return Err(Error::DimensionMismatch {
                    expected: (width, height),
                    found: (f.width, f.height),
                });
            }
        }
        Ok(ImageSeries {
            frames,
            width,
            height,
            frame_period,
        })
    }

    /// Index of the last frame, `T`.
    pub fn last_frame(&self) -> u32 {
        (self.frames.len() - 1) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFrame {
    pub width: usize,
    pub height: usize,
    /// `true` = DARK (invading fluid or solid), `false` = LIGHT.
    pub dark: Vec<bool>,
}

impl BinaryFrame {
    pub fn is_dark(&self, x: usize, y: usize) -> bool {
        self.dark[y * self.width + x]
    }

    /// DARK as 0.0, LIGHT as 1.0.
    pub fn to_gray(&self) -> GrayFrame {
        GrayFrame {
            width: self.width,
            height: self.height,
            data: self.dark.iter().map(|&d| if d { 0.0 } else { 1.0 }).collect(),
        }
    }

    pub fn dark_fraction(&self) -> f64 {
        if self.dark.is_empty() {
            return 0.0;
        }
        self.dark.iter().filter(|&&d| d).count() as f64 / self.dark.len() as f64
    }
}

pub fn segment_frame(frame: &GrayFrame, beta: f64) -> BinaryFrame {
    let beta = beta as f32;
    BinaryFrame {
        width: frame.width,
        height: frame.height,
        dark: frame.data.iter().map(|&v| v <= beta).collect(),
    }
}

/// Lists the frame files of `dir` in temporal order.
///
/// A `frames.txt` manifest, when present, fixes the order; otherwise all
/// files with a known image extension are sorted by name.
pub fn list_frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let manifest = dir.join(FRAME_MANIFEST);
    let paths = if manifest.is_file() {
        let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| dir.join(l))
            .collect()
    } else {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|e| e.to_str())
                        .map(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                        .unwrap_or(false)
            })
            .collect();
        paths.sort();
        paths
    };
    if paths.len() < 2 {
        return Err(Error::Invalid(format!(
            "{}: need at least 2 frames, found {}",
            dir.display(),
            paths.len()
        )));
    }
    Ok(paths)
}

/// Decodes one image file to luminance in `[0, 1]`. Colour images are
/// converted to luma; 16-bit data keeps its full precision.
pub fn load_frame(path: &Path) -> Result<GrayFrame> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    let luma = img.to_luma16();
    let (w, h) = luma.dimensions();
    let data = luma
        .into_raw()
        .into_iter()
        .map(|v| v as f32 / u16::MAX as f32)
        .collect();
    Ok(GrayFrame {
        width: w as usize,
        height: h as usize,
        data,
    })
}

pub fn load_series(dir: &Path, config: &DatasetConfig) -> Result<ImageSeries> {
    let paths = list_frame_paths(dir)?;
    let frames = paths
        .par_iter()
        .map(|p| load_frame(p))
        .collect::<Result<Vec<_>>>()?;
    ImageSeries::new(frames, config.frame_period)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
    /// Frame the finding refers to, if any.
    pub frame: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    /// Fraction of DARK pixels per frame.
    pub dark_fraction: Vec<f64>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }
}

/// Incremental form of [`validate_series`] so that frames can be streamed.
#[derive(Debug)]
pub struct SeriesValidator<'a> {
    config: &'a DatasetConfig,
    report: ValidationReport,
    frames_seen: u32,
}

impl<'a> SeriesValidator<'a> {
    pub fn new(config: &'a DatasetConfig, width: usize, height: usize) -> Self {
        let mut report = ValidationReport::default();
        for (name, r) in [("inlet_region", &config.inlet_region), ("outlet_region", &config.outlet_region)] {
            if !r.fits_within(width, height) {
                report.findings.push(Finding {
                    severity: Severity::Error,
                    message: format!("{name} out of bounds"),
                    frame: None,
                });
            }
        }
        if config.inlet_region.intersects(&config.outlet_region) {
            report.findings.push(Finding {
                severity: Severity::Error,
                message: "inlet_region and outlet_region overlap".into(),
                frame: None,
            });
        }
        SeriesValidator {
            config,
            report,
            frames_seen: 0,
        }
    }

    pub fn push(&mut self, frame: &BinaryFrame) {
        let tau = self.frames_seen;
        let fraction = frame.dark_fraction();
        if tau == 0 {
            if frame.dark.iter().all(|&d| d) {
                self.report.findings.push(Finding {
                    severity: Severity::Error,
                    message: "first frame has no LIGHT pixels".into(),
                    frame: Some(0),
                });
            }
            let inlet = &self.config.inlet_region;
            if inlet.fits_within(frame.width, frame.height) {
                let mut dark = 0usize;
                for y in inlet.y..inlet.y + inlet.h {
                    for x in inlet.x..inlet.x + inlet.w {
                        dark += frame.is_dark(x, y) as usize;
                    }
                }
                if dark * 2 > inlet.area() {
                    self.report.findings.push(Finding {
                        severity: Severity::Warning,
                        message: "inlet region mostly DARK in first frame; invading fluid may already be present and will be treated as solid".into(),
                        frame: Some(0),
                    });
                }
            }
        } else if let Some(&prev) = self.report.dark_fraction.last() {
            if prev - fraction > RETREAT_TOLERANCE {
                self.report.findings.push(Finding {
                    severity: Severity::Warning,
                    message: format!(
                        "possible fluid retreat: DARK fraction drops from {prev:.3} to {fraction:.3}"
                    ),
                    frame: Some(tau),
                });
            }
        }
        self.report.dark_fraction.push(fraction);
        self.frames_seen += 1;
    }

    pub fn finish(self) -> ValidationReport {
        self.report
    }
}

pub fn validate_series(series: &ImageSeries, config: &DatasetConfig) -> ValidationReport {
    let mut v = SeriesValidator::new(config, series.width, series.height);
    for frame in &series.frames {
        v.push(&segment_frame(frame, config.threshold_beta));
    }
    v.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> DatasetConfig {
        DatasetConfig::new(Rect::new(0, 0, 1, 4), Rect::new(3, 0, 1, 4))
    }

    #[test]
    fn downsample_averages_blocks() {
        let f = GrayFrame::new(3, 2, vec![0.0, 1.0, 0.5, 1.0, 0.0, 0.25]).unwrap();
        let d = f.downsample(2);
        assert_eq!((d.width, d.height), (2, 1));
        assert_eq!(d.data, vec![0.5, 0.375]);
        assert_eq!(f.downsample(1), f);
    }

    #[test]
    fn segment_examples() {
        let all_light = GrayFrame::filled(3, 2, 1.0);
        assert!(segment_frame(&all_light, 0.5).dark.iter().all(|d| !d));
        let all_dark = GrayFrame::filled(3, 2, 0.0);
        assert!(segment_frame(&all_dark, 0.5).dark.iter().all(|&d| d));
        let f = GrayFrame::new(3, 1, vec![0.2, 0.6, 0.9]).unwrap();
        assert_eq!(segment_frame(&f, 0.7).dark, vec![true, true, false]);
    }

    #[test]
    fn threshold_is_inclusive() {
        let f = GrayFrame::new(2, 1, vec![0.5, 0.50001]).unwrap();
        assert_eq!(segment_frame(&f, 0.5).dark, vec![true, false]);
    }

    proptest! {
        #[test]
        fn segment_idempotent(data in proptest::collection::vec(0.0f32..=1.0, 12), beta in 0.01f64..0.99) {
            let f = GrayFrame::new(4, 3, data).unwrap();
            let once = segment_frame(&f, beta);
            let twice = segment_frame(&once.to_gray(), beta);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn segment_is_pointwise(data in proptest::collection::vec(0.0f32..=1.0, 12), beta in 0.01f64..0.99, shift in 0usize..12) {
            let f = GrayFrame::new(12, 1, data.clone()).unwrap();
            let mut rotated = data;
            rotated.rotate_left(shift);
            let g = GrayFrame::new(12, 1, rotated).unwrap();
            let mut expected = segment_frame(&f, beta).dark;
            expected.rotate_left(shift);
            prop_assert_eq!(segment_frame(&g, beta).dark, expected);
        }
    }

    #[test]
    fn config_roundtrip_text() {
        let mut c = cfg();
        c.gamma = 42;
        c.threshold_beta = 0.3;
        let parsed = DatasetConfig::parse(&c.to_text()).unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn config_rejects_bad_values() {
        let base = "inlet = 0,0,1,1\noutlet = 2,0,1,1\n";
        assert!(DatasetConfig::parse(base).is_ok());
        assert!(DatasetConfig::parse(&format!("{base}beta = 1.0\n")).is_err());
        assert!(DatasetConfig::parse(&format!("{base}beta = 0\n")).is_err());
        assert!(DatasetConfig::parse(&format!("{base}gamma = 0\n")).is_err());
        assert!(DatasetConfig::parse(&format!("{base}frame_period = 0\n")).is_err());
        assert!(DatasetConfig::parse(&format!("{base}jump_ratio = 1\n")).is_err());
        assert!(DatasetConfig::parse(&format!("{base}bogus = 1\n")).is_err());
        assert!(DatasetConfig::parse("inlet = 0,0,1,1\n").is_err());
        assert!(DatasetConfig::parse("inlet = 0,0,2,2\noutlet = 1,1,2,2\n").is_err());
    }

    #[test]
    fn validate_flags_out_of_bounds_inlet() {
        let mut c = cfg();
        c.inlet_region = Rect::new(10, 0, 2, 2);
        let series = ImageSeries::new(vec![GrayFrame::filled(4, 4, 1.0); 2], 1.0).unwrap();
        let report = validate_series(&series, &c);
        assert!(report
            .findings
            .iter()
            .any(|f| f.severity == Severity::Error && f.message == "inlet_region out of bounds"));
    }

    #[test]
    fn validate_clean_series_is_empty() {
        let mut frames = Vec::new();
        for tau in 0..4 {
            let mut data = vec![1.0f32; 16];
            for y in 0..4 {
                for x in 0..tau.min(4) {
                    data[y * 4 + x] = 0.0;
                }
            }
            frames.push(GrayFrame::new(4, 4, data).unwrap());
        }
        let series = ImageSeries::new(frames, 1.0).unwrap();
        let report = validate_series(&series, &cfg());
        assert!(report.is_empty(), "{:?}", report.findings);
        assert_eq!(report.dark_fraction, vec![0.0, 0.25, 0.5, 0.75]);
    }

    #[test]
    fn validate_flags_empty_first_frame() {
        let series = ImageSeries::new(vec![GrayFrame::filled(4, 4, 0.0); 2], 1.0).unwrap();
        let report = validate_series(&series, &cfg());
        assert!(report.has_errors());
        assert!(report.findings.iter().any(|f| f.message == "first frame has no LIGHT pixels"));
    }

    #[test]
    fn series_dimension_mismatch() {
        let err = ImageSeries::new(
            vec![GrayFrame::filled(4, 4, 1.0), GrayFrame::filled(5, 5, 1.0)],
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn load_series_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            GrayFrame::filled(4, 4, 1.0)
                .save_png(&dir.path().join(format!("f{i:03}.png")))
                .unwrap();
        }
        let series = load_series(dir.path(), &cfg()).unwrap();
        assert_eq!(series.last_frame(), 2);
        assert!(series.frames.iter().all(|f| f.data.iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn load_series_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_series(&dir.path().join("missing"), &cfg()),
            Err(Error::Io { .. })
        ));
        GrayFrame::filled(4, 4, 1.0).save_png(&dir.path().join("a.png")).unwrap();
        GrayFrame::filled(5, 5, 1.0).save_png(&dir.path().join("b.png")).unwrap();
        assert!(matches!(
            load_series(dir.path(), &cfg()),
            Err(Error::DimensionMismatch { .. })
        ));
        fs::write(dir.path().join("c.png"), b"not an image").unwrap();
        fs::remove_file(dir.path().join("b.png")).unwrap();
        assert!(matches!(load_series(dir.path(), &cfg()), Err(Error::Decode { .. })));
    }

    #[test]
    fn manifest_overrides_order() {
        let dir = tempfile::tempdir().unwrap();
        GrayFrame::filled(2, 2, 1.0).save_png(&dir.path().join("a.png")).unwrap();
        GrayFrame::filled(2, 2, 0.0).save_png(&dir.path().join("b.png")).unwrap();
        fs::write(dir.path().join(FRAME_MANIFEST), "b.png\na.png\n").unwrap();
        let series = load_series(dir.path(), &cfg()).unwrap();
        assert_eq!(series.frames[0].data[0], 0.0);
        assert_eq!(series.frames[1].data[0], 1.0);
    }

    #[test]
    fn sixteen_bit_precision() {
        let dir = tempfile::tempdir().unwrap();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(2, 1, vec![0u16, 32768]).unwrap();
        let p = dir.path().join("x.png");
        img.save(&p).unwrap();
        let f = load_frame(&p).unwrap();
        assert_eq!(f.data[0], 0.0);
        assert!((f.data[1] - 32768.0 / 65535.0).abs() < 1e-7);
    }
}
