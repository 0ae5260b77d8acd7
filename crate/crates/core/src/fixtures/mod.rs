//! Synthetic experiment series with known answers.
//!
//! Every fixture is built from an arrival-time grid chosen by construction;
//! frames are rendered from it, and the grid itself (plus the expected graph
//! features) is written next to the frames as the ground truth.

pub mod random;

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Rect;
use crate::ingestion::{DatasetConfig, GrayFrame, ImageSeries};
use crate::timemap::{write_time_map, TimeMap, NEVER, SOLID};

pub const CONFIG_FILE: &str = "config.txt";
pub const TRUTH_FILE: &str = "truth.json";
pub const TRUTH_MAP_BIN: &str = "truth_timemap.bin";
pub const TRUTH_MAP_JSON: &str = "truth_timemap.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrainShape {
    Circular,
    Octagonal,
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    StraightChannel,
    YMerge,
    DeadEnd,
    WideSplit,
    PinnedJump,
    RetreatingBlob,
    SubPixelNoise,
    GridPorous(GrainShape),
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 10] = [
        FixtureKind::StraightChannel,
        FixtureKind::YMerge,
        FixtureKind::DeadEnd,
        FixtureKind::WideSplit,
        FixtureKind::PinnedJump,
        FixtureKind::RetreatingBlob,
        FixtureKind::SubPixelNoise,
        FixtureKind::GridPorous(GrainShape::Circular),
        FixtureKind::GridPorous(GrainShape::Octagonal),
        FixtureKind::GridPorous(GrainShape::Triangular),
    ];
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FixtureKind::StraightChannel => "straight-channel",
            FixtureKind::YMerge => "y-merge",
            FixtureKind::DeadEnd => "dead-end",
            FixtureKind::WideSplit => "wide-split",
            FixtureKind::PinnedJump => "pinned-jump",
            FixtureKind::RetreatingBlob => "retreating-blob",
            FixtureKind::SubPixelNoise => "sub-pixel-noise",
            FixtureKind::GridPorous(GrainShape::Circular) => "grid-porous:circular",
            FixtureKind::GridPorous(GrainShape::Octagonal) => "grid-porous:octagonal",
            FixtureKind::GridPorous(GrainShape::Triangular) => "grid-porous:triangular",
        };
        f.write_str(s)
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "straight-channel" => FixtureKind::StraightChannel,
            "y-merge" => FixtureKind::YMerge,
            "dead-end" => FixtureKind::DeadEnd,
            "wide-split" => FixtureKind::WideSplit,
            "pinned-jump" => FixtureKind::PinnedJump,
            "retreating-blob" => FixtureKind::RetreatingBlob,
            "sub-pixel-noise" => FixtureKind::SubPixelNoise,
            "grid-porous" | "grid-porous:circular" => FixtureKind::GridPorous(GrainShape::Circular),
            "grid-porous:octagonal" => FixtureKind::GridPorous(GrainShape::Octagonal),
            "grid-porous:triangular" => FixtureKind::GridPorous(GrainShape::Triangular),
            _ => return Err(Error::Config(format!("unknown fixture kind `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureParams {
    pub seed: u64,
    /// Seconds per frame written into the fixture config.
    pub frame_period: f64,
    /// Image size of the grid-porous fixtures.
    pub width: usize,
    pub height: usize,
    /// Last frame index of the grid-porous fixtures.
    pub frames: u32,
}

impl Default for FixtureParams {
    fn default() -> Self {
        FixtureParams {
            seed: 1,
            frame_period: 1.0,
            width: 320,
            height: 200,
            frames: 90,
        }
    }
}

/// What the generator knows about a fixture by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GroundTruth {
    pub kind: String,
    pub width: usize,
    pub height: usize,
    pub last_frame: u32,
    /// First frame in which invading fluid touches the outlet region.
    pub breakthrough_frame: Option<u32>,
    /// Frame times of the fronts along the main channel, inlet to outlet.
    pub main_channel_frames: Option<Vec<u32>>,
    /// Number of nodes with two or more incoming edges.
    pub merge_nodes: Option<usize>,
    /// Number of sinks that are not on the main channel.
    pub off_path_sinks: Option<usize>,
    /// Frame times of fronts whose outgoing velocity jumps.
    pub jump_frames: Vec<u32>,
    /// Frames in which part of the invading fluid withdraws.
    pub retreat_frames: Vec<u32>,
    /// Advance of a straight front per frame, in pixels.
    pub advance_px_per_frame: Option<f64>,
    /// Frame time of a front that splits into diverging fingers.
    pub split_frame: Option<u32>,
    /// Whether the fixed displacement graph is expected to contain a cycle
    /// when edge directions are ignored.
    pub undirected_loop: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub kind: FixtureKind,
    pub config: DatasetConfig,
    /// Ground-truth time map the frames are rendered from.
    pub truth_map: TimeMap,
    pub truth: GroundTruth,
    seed: u64,
    /// Pixels that turn LIGHT again from the given frame on.
    retreat: Option<(u32, Vec<bool>)>,
}

impl Fixture {
    pub fn width(&self) -> usize {
        self.truth_map.width
    }

    pub fn height(&self) -> usize {
        self.truth_map.height
    }

    pub fn last_frame(&self) -> u32 {
        self.truth_map.last_frame
    }

    /// Renders frame `tau`: solid and invaded pixels dark, pore space light,
    /// with a seeded texture that stays on the right side of the threshold.
    pub fn frame(&self, tau: u32) -> GrayFrame {
        let raw = self.truth_map.raw();
        let data = raw
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let retreated = matches!(&self.retreat, Some((from, mask)) if tau >= *from && mask[i]);
                let dark = t == SOLID || (t != NEVER && t <= tau && !retreated);
                let u = texture(self.seed, i as u64, tau) as f32;
                if dark {
                    0.05 + 0.25 * u
                } else {
                    0.7 + 0.25 * u
                }
            })
            .collect();
        GrayFrame {
            width: self.width(),
            height: self.height(),
            data,
        }
    }

    pub fn series(&self) -> ImageSeries {
        let frames = (0..=self.last_frame()).map(|t| self.frame(t)).collect();
        ImageSeries::new(frames, self.config.frame_period).expect("fixtures have at least two frames")
    }

    /// Writes frames `frame_0000.png …`, the config and the ground truth into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for tau in 0..=self.last_frame() {
            self.frame(tau).save_png(&dir.join(frame_file_name(tau)))?;
        }
        let cfg = dir.join(CONFIG_FILE);
        fs::write(&cfg, self.config.to_text()).map_err(|e| Error::io(&cfg, e))?;
        let truth = dir.join(TRUTH_FILE);
        let json = serde_json::to_string_pretty(&self.truth)?;
        fs::write(&truth, json).map_err(|e| Error::io(&truth, e))?;
        write_time_map(&self.truth_map, &dir.join(TRUTH_MAP_BIN), &dir.join(TRUTH_MAP_JSON))
    }
}

pub fn frame_file_name(tau: u32) -> String {
    format!("frame_{tau:04}.png")
}

/// Uniform value in `[0, 1)` from a position/frame hash (SplitMix64).
fn texture(seed: u64, i: u64, tau: u32) -> f64 {
    let mut z = seed
        .wrapping_add(i.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((tau as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

pub fn generate_fixture(kind: FixtureKind, params: &FixtureParams) -> Result<Fixture> {
    if !(params.frame_period > 0.0 && params.frame_period.is_finite()) {
        return Err(Error::Config("fixture frame_period must be positive".into()));
    }
    let mut fx = match kind {
        FixtureKind::StraightChannel => straight_channel(),
        FixtureKind::YMerge => y_merge(),
        FixtureKind::DeadEnd => dead_end(),
        FixtureKind::WideSplit => wide_split(),
        FixtureKind::PinnedJump => pinned_jump(),
        FixtureKind::RetreatingBlob => retreating_blob(),
        FixtureKind::SubPixelNoise => sub_pixel_noise(params.seed),
        FixtureKind::GridPorous(shape) => grid_porous(shape, params)?,
    };
    fx.seed = params.seed;
    fx.config.frame_period = params.frame_period;
    fx.truth_map.frame_period = params.frame_period;
    fx.config.name = kind.to_string();
    fx.truth.kind = kind.to_string();
    fx.truth.width = fx.width();
    fx.truth.height = fx.height();
    fx.truth.last_frame = fx.last_frame();
    fx.config.validate()?;
    fx.config.validate_bounds(fx.width(), fx.height())?;
    Ok(fx)
}

/// Arrival grid under construction: everything SOLID until carved out.
struct Canvas {
    w: usize,
    h: usize,
    t: Vec<u32>,
}

impl Canvas {
    fn solid(w: usize, h: usize) -> Self {
        Canvas { w, h, t: vec![SOLID; w * h] }
    }

    fn fill(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, f: impl Fn(usize, usize) -> u32) {
        for y in y0..y1 {
            for x in x0..x1 {
                self.t[y * self.w + x] = f(x, y);
            }
        }
    }

    fn finish(self, kind: FixtureKind, last_frame: u32, config: DatasetConfig, truth: GroundTruth) -> Fixture {
        let truth_map = TimeMap::from_raw(self.w, self.h, config.frame_period, last_frame, self.t)
            .expect("canvas size matches");
        Fixture {
            kind,
            config,
            truth_map,
            truth,
            seed: 0,
            retreat: None,
        }
    }
}

fn config(inlet: Rect, outlet: Rect, gamma: u32) -> DatasetConfig {
    let mut c = DatasetConfig::new(inlet, outlet);
    c.gamma = gamma;
    c
}

/// 68×32 corridor between solid walls; the fluid advances 4 px per frame
/// and touches the outlet at frame 17.
fn straight_channel() -> Fixture {
    let (w, h) = (68, 32);
    let mut c = Canvas::solid(w, h);
    c.fill(0, 3, w, 29, |x, _| 1 + (x / 4) as u32);
    let truth = GroundTruth {
        breakthrough_frame: Some(17),
        main_channel_frames: Some((1..=17).collect()),
        merge_nodes: Some(0),
        off_path_sinks: Some(0),
        advance_px_per_frame: Some(4.0),
        undirected_loop: Some(false),
        ..Default::default()
    };
    c.finish(FixtureKind::StraightChannel, 20, config(Rect::new(0, 0, 4, 32), Rect::new(64, 0, 4, 32), 100), truth)
}

/// Two equal corridors that flood a vertical junction block in the same
/// frame, followed by a single exit corridor.
fn y_merge() -> Fixture {
    let (w, h) = (96, 64);
    let mut c = Canvas::solid(w, h);
    c.fill(0, 8, 48, 20, |x, _| 1 + (x / 4) as u32);
    c.fill(0, 44, 48, 56, |x, _| 1 + (x / 4) as u32);
    c.fill(48, 8, 60, 56, |_, _| 13);
    c.fill(60, 26, 96, 38, |x, _| 14 + ((x - 60) / 4) as u32);
    let truth = GroundTruth {
        breakthrough_frame: Some(22),
        merge_nodes: Some(1),
        off_path_sinks: Some(0),
        undirected_loop: Some(false),
        ..Default::default()
    };
    c.finish(FixtureKind::YMerge, 24, config(Rect::new(0, 0, 4, 64), Rect::new(92, 0, 4, 64), 32), truth)
}

/// A main corridor and a slower side branch. The side branch reaches the
/// connector below the main corridor after it has already been flooded from
/// above, so its last front has nowhere to go.
fn dead_end() -> Fixture {
    let (w, h) = (96, 48);
    let mut c = Canvas::solid(w, h);
    // Main corridor, 4 px per frame.
    c.fill(0, 8, 96, 20, |x, _| 1 + (x / 4) as u32);
    // Connector flooded from the main corridor in frame 15.
    c.fill(48, 20, 54, 32, |_, _| 15);
    // Side branch, 3 px per frame; reaches the connector in frame 16.
    c.fill(0, 32, 54, 44, |x, _| 1 + (x / 3) as u32);
    let truth = GroundTruth {
        breakthrough_frame: Some(24),
        main_channel_frames: Some((1..=24).collect()),
        off_path_sinks: Some(1),
        ..Default::default()
    };
    c.finish(FixtureKind::DeadEnd, 26, config(Rect::new(0, 0, 3, 48), Rect::new(92, 0, 4, 48), 32), truth)
}

/// A feeder opens into a wide front that splits into two fingers at its far
/// ends; the centroid of the wide front lies far from either finger.
fn wide_split() -> Fixture {
    let (w, h) = (100, 32);
    let mut c = Canvas::solid(w, h);
    c.fill(46, 0, 54, 8, |_, _| 1);
    c.fill(0, 8, 100, 12, |_, _| 2);
    c.fill(0, 12, 4, 24, |_, _| 3);
    c.fill(96, 12, 100, 24, |_, _| 3);
    // Open pore space ahead of both fingers, never reached.
    c.fill(0, 24, 4, 28, |_, _| NEVER);
    c.fill(96, 24, 100, 28, |_, _| NEVER);
    let truth = GroundTruth {
        breakthrough_frame: Some(3),
        split_frame: Some(2),
        merge_nodes: Some(0),
        ..Default::default()
    };
    c.finish(FixtureKind::WideSplit, 4, config(Rect::new(40, 0, 20, 2), Rect::new(96, 12, 4, 12), 32), truth)
}

/// The interface advances 2 px per frame, stays pinned for five frames, then
/// bursts 40 px in one frame and resumes its normal pace.
fn pinned_jump() -> Fixture {
    let (w, h) = (96, 24);
    let mut c = Canvas::solid(w, h);
    c.fill(0, 4, w, 20, |x, _| match x {
        0..=9 => 1 + (x / 2) as u32,
        10..=49 => 11,
        _ => 12 + ((x - 50) / 2) as u32,
    });
    let truth = GroundTruth {
        breakthrough_frame: Some(34),
        jump_frames: vec![11],
        merge_nodes: Some(0),
        undirected_loop: Some(false),
        ..Default::default()
    };
    c.finish(FixtureKind::PinnedJump, 36, config(Rect::new(0, 0, 2, 24), Rect::new(92, 0, 4, 24), 16), truth)
}

/// A disk grows from the left edge, then a quarter of it withdraws.
fn retreating_blob() -> Fixture {
    let (w, h) = (64, 64);
    let mut c = Canvas::solid(w, h);
    let (cx, cy) = (0.0f64, 32.0f64);
    c.fill(0, 0, w, h, |x, y| {
        let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
        let tau = 1 + (r / 8.0) as u32;
        if tau <= 6 {
            tau
        } else {
            NEVER
        }
    });
    let mask: Vec<bool> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            c.t[i] != NEVER && y < 32 && r >= 24.0
        })
        .collect();
    let truth = GroundTruth {
        retreat_frames: vec![8],
        ..Default::default()
    };
    let mut fx = c.finish(FixtureKind::RetreatingBlob, 10, config(Rect::new(0, 24, 2, 16), Rect::new(60, 0, 4, 64), 16), truth);
    fx.retreat = Some((8, mask));
    fx
}

/// Interface moving a third of a pixel per frame: each column is reached at
/// one of three random frames, shattering the raw map into tiny fronts.
fn sub_pixel_noise(seed: u64) -> Fixture {
    let (w, h) = (64, 48);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut c = Canvas::solid(w, h);
    let jitter: Vec<u32> = (0..w * h).map(|_| rng.random_range(0..3)).collect();
    c.fill(0, 0, w, h, |x, y| 1 + 3 * x as u32 + jitter[y * w + x]);
    let last = 3 * w as u32 + 2;
    let truth = GroundTruth {
        breakthrough_frame: Some(3 * (w as u32 - 4) + 1),
        ..Default::default()
    };
    c.finish(FixtureKind::SubPixelNoise, last, config(Rect::new(0, 0, 2, 48), Rect::new(60, 0, 4, 48), 100), truth)
}

/// Regular lattice of grains; arrival times from a shortest-path sweep
/// through the pore space with seeded, spatially correlated resistance.
fn grid_porous(shape: GrainShape, p: &FixtureParams) -> Result<Fixture> {
    let (w, h) = (p.width, p.height);
    if w < 40 || h < 40 || p.frames < 4 {
        return Err(Error::Config("grid-porous fixtures need at least 40×40 pixels and 4 frames".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let spacing = 20.0f64;
    let radius = 7.0f64;
    let mut solid = vec![false; w * h];
    let rows = (h as f64 / spacing).ceil() as i64 + 1;
    let cols = (w as f64 / spacing).ceil() as i64 + 1;
    for gy in 0..rows {
        for gx in 0..cols {
            let offset = if shape == GrainShape::Triangular && gy % 2 == 1 { spacing / 2.0 } else { 0.0 };
            let cx = gx as f64 * spacing + offset + spacing / 2.0 + rng.random_range(-1.5..1.5);
            let cy = gy as f64 * spacing + spacing / 2.0 + rng.random_range(-1.5..1.5);
            let r = radius + rng.random_range(-1.0..1.0);
            let x0 = (cx - r - 1.0).max(0.0) as usize;
            let y0 = (cy - r - 1.0).max(0.0) as usize;
            let x1 = ((cx + r + 2.0) as usize).min(w);
            let y1 = ((cy + r + 2.0) as usize).min(h);
            for y in y0..y1 {
                for x in x0..x1 {
                    let dx = x as f64 - cx;
                    let dy = y as f64 - cy;
                    let inside = match shape {
                        GrainShape::Circular => dx * dx + dy * dy <= r * r,
                        GrainShape::Octagonal => {
                            dx.abs() <= r && dy.abs() <= r && dx.abs() + dy.abs() <= 1.35 * r
                        }
                        // Triangle pointing toward the outlet.
                        GrainShape::Triangular => dx >= -r && dx <= r && dy.abs() <= (r - dx) * 0.6,
                    };
                    if inside {
                        solid[y * w + x] = true;
                    }
                }
            }
        }
    }
    // Keep the inlet and outlet columns open.
    for y in 0..h {
        for x in (0..3).chain(w - 3..w) {
            solid[y * w + x] = false;
        }
    }

    let cell = 10usize;
    let (cw, ch) = (w.div_ceil(cell), h.div_ceil(cell));
    let coarse: Vec<f64> = (0..cw * ch).map(|_| rng.random_range(1.0..4.0)).collect();
    let cost: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            coarse[(y / cell) * cw + x / cell] * rng.random_range(0.8..1.2)
        })
        .collect();

    let dist = sweep(w, h, &solid, &cost);
    // Scale so the fastest path crosses the domain in about 80 % of the frames.
    let outlet_best = (0..h)
        .map(|y| dist[y * w + w - 1])
        .fold(f64::INFINITY, f64::min);
    let per_frame = outlet_best / (0.8 * p.frames as f64);
    let t: Vec<u32> = (0..w * h)
        .map(|i| {
            if solid[i] {
                SOLID
            } else if !dist[i].is_finite() {
                NEVER
            } else {
                let tau = 1 + (dist[i] / per_frame) as u64;
                if tau > p.frames as u64 {
                    NEVER
                } else {
                    tau as u32
                }
            }
        })
        .collect();
    let outlet = Rect::new(w - 4, 0, 4, h);
    let breakthrough = (0..h)
        .flat_map(|y| (w - 4..w).map(move |x| y * w + x))
        .map(|i| t[i])
        .filter(|&v| v != SOLID && v != NEVER)
        .min();
    let truth = GroundTruth {
        breakthrough_frame: breakthrough,
        undirected_loop: (shape == GrainShape::Triangular).then_some(true),
        ..Default::default()
    };
    let canvas = Canvas { w, h, t };
    Ok(canvas.finish(FixtureKind::GridPorous(shape), p.frames, config(Rect::new(0, 0, 3, h), outlet, 100), truth))
}

/// Dijkstra from the left column over 8-connected pore pixels.
pub(crate) fn sweep(w: usize, h: usize, solid: &[bool], cost: &[f64]) -> Vec<f64> {
    struct Key(f64);
    impl PartialEq for Key {
        fn eq(&self, o: &Self) -> bool {
            self.cmp(o).is_eq()
        }
    }
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Key {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&o.0)
        }
    }
    let mut dist = vec![f64::INFINITY; w * h];
    let mut heap = BinaryHeap::new();
    for y in 0..h {
        let i = y * w;
        if !solid[i] {
            dist[i] = 0.0;
            heap.push(Reverse((Key(0.0), i)));
        }
    }
    while let Some(Reverse((Key(d), i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if solid[j] {
                    continue;
                }
                let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                let nd = d + step * 0.5 * (cost[i] + cost[j]);
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Reverse((Key(nd), j)));
                }
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{load_series, validate_series};
    use crate::timemap::build_time_map;

    #[test]
    fn kinds_round_trip_through_text() {
        for k in FixtureKind::ALL {
            assert_eq!(k.to_string().parse::<FixtureKind>().unwrap(), k);
        }
        assert!("spiral".parse::<FixtureKind>().is_err());
    }

    #[test]
    fn frames_rebuild_the_truth_map() {
        let p = FixtureParams { width: 120, height: 80, frames: 30, ..Default::default() };
        for k in FixtureKind::ALL {
            let fx = generate_fixture(k, &p).unwrap();
            let map = build_time_map(&fx.series(), fx.config.threshold_beta).unwrap();
            assert_eq!(map, fx.truth_map, "{k}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let p = FixtureParams { width: 80, height: 60, frames: 20, seed: 9, ..Default::default() };
        let k = FixtureKind::GridPorous(GrainShape::Octagonal);
        let a = generate_fixture(k, &p).unwrap();
        let b = generate_fixture(k, &p).unwrap();
        assert_eq!(a.truth_map, b.truth_map);
        assert_eq!(a.frame(5), b.frame(5));
    }

    #[test]
    fn straight_channel_breaks_through_at_17() {
        let fx = generate_fixture(FixtureKind::StraightChannel, &FixtureParams::default()).unwrap();
        let outlet = fx.config.outlet_region;
        let first = (outlet.y..outlet.y + outlet.h)
            .flat_map(|y| (outlet.x..outlet.x + outlet.w).map(move |x| (x, y)))
            .filter_map(|(x, y)| fx.truth_map.get(x, y).frame())
            .min();
        assert_eq!(first, Some(17));
    }

    #[test]
    fn retreat_is_visible_to_validation() {
        let fx = generate_fixture(FixtureKind::RetreatingBlob, &FixtureParams::default()).unwrap();
        let report = validate_series(&fx.series(), &fx.config);
        let frames: Vec<u32> = report
            .findings
            .iter()
            .filter(|f| f.message.contains("retreat"))
            .filter_map(|f| f.frame)
            .collect();
        assert_eq!(frames, fx.truth.retreat_frames);
    }

    #[test]
    fn written_fixture_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let fx = generate_fixture(FixtureKind::YMerge, &FixtureParams::default()).unwrap();
        fx.write(dir.path()).unwrap();
        let cfg = DatasetConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
        assert_eq!(cfg, fx.config);
        let series = load_series(dir.path(), &cfg).unwrap();
        assert_eq!(build_time_map(&series, cfg.threshold_beta).unwrap(), fx.truth_map);
        let truth: GroundTruth =
            serde_json::from_str(&fs::read_to_string(dir.path().join(TRUTH_FILE)).unwrap()).unwrap();
        assert_eq!(truth.merge_nodes, Some(1));
    }
}
