//! Flow fronts: maximal 8-connected regions of equal invasion time.

mod hausdorff;
mod quantize;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{for_each_neighbor8, Rect};
use crate::timemap::{is_frame, TimeMap, NEVER, SOLID};

pub use hausdorff::{directed_hausdorff, hausdorff, InterfaceSet};
pub use quantize::{quantize_small_fronts, Quantized};

/// Label of solid pixels.
pub const SOLID_LABEL: u32 = 0;
/// Label of pixels never reached by the invading fluid.
pub const NEVER_LABEL: u32 = u32::MAX;

/// Per-pixel front labels; fronts are numbered densely `1..=count` in raster
/// order of their first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontLabelMap {
    pub width: usize,
    pub height: usize,
    pub count: u32,
    labels: Vec<u32>,
}

impl FrontLabelMap {
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Row-major pixel indices of every front, indexed by `label - 1`.
    pub fn pixels_by_front(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count as usize];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != SOLID_LABEL && l != NEVER_LABEL {
                out[(l - 1) as usize].push(i);
            }
        }
        out
    }

    /// Labels of all fronts with at least one pixel inside `rect`.
    pub fn fronts_in(&self, rect: &Rect) -> std::collections::BTreeSet<u32> {
        let mut out = std::collections::BTreeSet::new();
        let x1 = (rect.x + rect.w).min(self.width);
        let y1 = (rect.y + rect.h).min(self.height);
        for y in rect.y.min(y1)..y1 {
            for &l in &self.labels[y * self.width + rect.x.min(x1)..y * self.width + x1] {
                if l != SOLID_LABEL && l != NEVER_LABEL {
                    out.insert(l);
                }
            }
        }
        out
    }

    /// Unordered pairs `(a, b)`, `a < b`, of 8-adjacent fronts.
    pub fn adjacent_pairs(&self) -> std::collections::BTreeSet<(u32, u32)> {
        let mut pairs = std::collections::BTreeSet::new();
        let (w, h) = (self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let a = self.labels[y * w + x];
                if a == SOLID_LABEL || a == NEVER_LABEL {
                    continue;
                }
                // Forward half of the neighbourhood is enough for unordered pairs.
                for (dx, dy) in [(1isize, 0isize), (-1, 1), (0, 1), (1, 1)] {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let b = self.labels[ny as usize * w + nx as usize];
                    if b != a && b != SOLID_LABEL && b != NEVER_LABEL {
                        pairs.insert((a.min(b), a.max(b)));
                    }
                }
            }
        }
        pairs
    }
}

/// A flow front and its metrics. Lengths and areas are pixel counts, the
/// velocity is in pixels per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowFront {
    pub label: u32,
    pub time: u32,
    pub area: u64,
    /// Mean pixel coordinate `(x, y)`.
    pub centroid: (f64, f64),
    pub ff_interface_len: u64,
    pub fs_interface_len: u64,
    pub bbox: Rect,
    pub velocity: f64,
}

/// Labels the maximal 8-connected equal-time regions of `map` and computes
/// their geometric metrics. Velocities are left at zero; see
/// [`compute_front_metrics`].
pub fn extract_fronts(map: &TimeMap) -> (FrontLabelMap, Vec<FlowFront>) {
    let labels = label_fronts(map);
    let fronts = geometric_metrics(&labels, map);
    (labels, fronts)
}

pub(crate) fn label_fronts(map: &TimeMap) -> FrontLabelMap {
    let (w, h) = (map.width, map.height);
    let raw = map.raw();
    let mut labels: Vec<u32> = raw
        .iter()
        .map(|&r| match r {
            SOLID => SOLID_LABEL,
            NEVER => NEVER_LABEL,
            // Unlabelled frame pixel.
            _ => NEVER_LABEL - 1,
        })
        .collect();
    let unlabelled = NEVER_LABEL - 1;
    let mut next = 0u32;
    let mut stack: Vec<usize> = Vec::new();
    for start in 0..raw.len() {
        if labels[start] != unlabelled {
            continue;
        }
        next += 1;
        let t = raw[start];
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for_each_neighbor8(i % w, i / w, w, h, |nx, ny| {
                let j = ny * w + nx;
                if labels[j] == unlabelled && raw[j] == t {
                    labels[j] = next;
                    stack.push(j);
                }
            });
        }
    }
    FrontLabelMap {
        width: w,
        height: h,
        count: next,
        labels,
    }
}

fn geometric_metrics(labels: &FrontLabelMap, map: &TimeMap) -> Vec<FlowFront> {
    let (w, h) = (map.width, map.height);
    let raw = map.raw();
    let n = labels.count as usize;
    let mut area = vec![0u64; n];
    let mut sum = vec![(0u64, 0u64); n];
    let mut bounds = vec![(usize::MAX, usize::MAX, 0usize, 0usize); n];
    let mut ff = vec![0u64; n];
    let mut fs = vec![0u64; n];
    let mut time = vec![0u32; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let l = labels.labels[i];
            if l == SOLID_LABEL || l == NEVER_LABEL {
                continue;
            }
            let k = (l - 1) as usize;
            let t = raw[i];
            time[k] = t;
            area[k] += 1;
            sum[k].0 += x as u64;
            sum[k].1 += y as u64;
            let b = &mut bounds[k];
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
            let (mut later, mut solid) = (false, false);
            for_each_neighbor8(x, y, w, h, |nx, ny| {
                let r = raw[ny * w + nx];
                later |= r > t;
                solid |= r == SOLID;
            });
            ff[k] += later as u64;
            fs[k] += solid as u64;
        }
    }
    (0..n)
        .map(|k| {
            let b = bounds[k];
            FlowFront {
                label: k as u32 + 1,
                time: time[k],
                area: area[k],
                centroid: (
                    sum[k].0 as f64 / area[k] as f64,
                    sum[k].1 as f64 / area[k] as f64,
                ),
                ff_interface_len: ff[k],
                fs_interface_len: fs[k],
                bbox: Rect::new(b.0, b.1, b.2 - b.0 + 1, b.3 - b.1 + 1),
                velocity: 0.0,
            }
        })
        .collect()
}

/// Interfaces of one front: its leading edge (pixels with a later or NEVER
/// neighbour) and the previous interface (earlier-time pixels touching it).
#[derive(Debug, Clone, Default)]
pub struct FrontInterfaces {
    pub leading: Vec<usize>,
    pub previous: Vec<usize>,
}

/// Leading and previous interfaces for every front, indexed by `label - 1`.
pub fn front_interfaces(labels: &FrontLabelMap, map: &TimeMap) -> Vec<FrontInterfaces> {
    let (w, h) = (map.width, map.height);
    let raw = map.raw();
    let mut out = vec![FrontInterfaces::default(); labels.count as usize];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let l = labels.labels[i];
            if l == SOLID_LABEL || l == NEVER_LABEL {
                continue;
            }
            let t = raw[i];
            let entry = &mut out[(l - 1) as usize];
            let mut later = false;
            for_each_neighbor8(x, y, w, h, |nx, ny| {
                let j = ny * w + nx;
                let r = raw[j];
                later |= r > t;
                if is_frame(r) && r < t {
                    entry.previous.push(j);
                }
            });
            if later {
                entry.leading.push(i);
            }
        }
    }
    out.par_iter_mut().for_each(|f| {
        f.previous.sort_unstable();
        f.previous.dedup();
    });
    out
}

/// Geometric metrics plus the front velocity: the Hausdorff distance between
/// the previous interface and the front's leading edge, per frame period.
///
/// A front without a leading edge (it filled a closed pocket) measures to its
/// whole pixel set; a front without a previous interface (a source) measures
/// from its whole pixel set.
pub fn compute_front_metrics(labels: &FrontLabelMap, map: &TimeMap, frame_period: f64) -> Vec<FlowFront> {
    let mut fronts = geometric_metrics(labels, map);
    let interfaces = front_interfaces(labels, map);
    let pixels = labels.pixels_by_front();
    let w = map.width;
    fronts
        .par_iter_mut()
        .zip(interfaces.par_iter().zip(pixels.par_iter()))
        .for_each(|(front, (iface, own))| {
            let own_set = || InterfaceSet::from_indices(own.iter().copied(), w);
            let leading = if iface.leading.is_empty() {
                own_set()
            } else {
                InterfaceSet::from_indices(iface.leading.iter().copied(), w)
            };
            let previous = if iface.previous.is_empty() {
                own_set()
            } else {
                InterfaceSet::from_indices(iface.previous.iter().copied(), w)
            };
            front.velocity = hausdorff(&previous, &leading).unwrap_or(0.0) / frame_period;
        });
    fronts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timemap::TimeValue::{self, *};

    fn tm(w: usize, h: usize, v: &[TimeValue]) -> TimeMap {
        TimeMap::from_values(w, h, 1.0, v).unwrap()
    }

    #[test]
    fn row_of_distinct_times() {
        let m = tm(5, 1, &[Frame(1), Frame(2), Frame(3), Frame(4), Frame(5)]);
        let (labels, fronts) = extract_fronts(&m);
        assert_eq!(labels.count, 5);
        assert!(fronts.iter().all(|f| f.area == 1));
        assert_eq!(fronts.iter().map(|f| f.time).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn uniform_map_is_one_front() {
        let mut v = vec![Frame(1); 12];
        v[5] = Solid;
        let (labels, fronts) = extract_fronts(&tm(4, 3, &v));
        assert_eq!(labels.count, 1);
        assert_eq!(fronts[0].area, 11);
        assert_eq!(labels.get(1, 1), SOLID_LABEL);
    }

    #[test]
    fn solid_wall_separates_equal_times() {
        let v = [Frame(2), Solid, Frame(2), Frame(2), Solid, Frame(2)];
        let (labels, fronts) = extract_fronts(&tm(3, 2, &v));
        assert_eq!(labels.count, 2);
        assert!(fronts.iter().all(|f| f.time == 2 && f.area == 2));
    }

    #[test]
    fn diagonal_pixels_connect() {
        let v = [Frame(3), Never, Never, Frame(3)];
        let (labels, _) = extract_fronts(&tm(2, 2, &v));
        assert_eq!(labels.count, 1);
        assert_eq!(labels.get(1, 0), NEVER_LABEL);
    }

    #[test]
    fn square_front_metrics() {
        let mut v = vec![Never; 16];
        for (x, y) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            v[y * 4 + x] = Frame(1);
        }
        let (_, fronts) = extract_fronts(&tm(4, 4, &v));
        let f = &fronts[0];
        assert_eq!(f.area, 4);
        assert_eq!(f.centroid, (0.5, 0.5));
        assert_eq!(f.bbox, Rect::new(0, 0, 2, 2));
        assert_eq!(f.ff_interface_len, 3);
        assert_eq!(f.fs_interface_len, 0);
    }

    #[test]
    fn enclosed_pixel_interfaces() {
        #[rustfmt::skip]
        let v = [
            Solid, Solid,    Solid,
            Solid, Frame(1), Frame(2),
            Solid, Solid,    Solid,
        ];
        let (_, fronts) = extract_fronts(&tm(3, 3, &v));
        let f = fronts.iter().find(|f| f.time == 1).unwrap();
        assert_eq!(f.ff_interface_len, 1);
        assert_eq!(f.fs_interface_len, 1);
    }

    #[test]
    fn partition_covers_invaded_pixels() {
        let v: Vec<_> = (0..30).map(|i| match i % 7 { 0 => Solid, 6 => Never, k => Frame(k as u32 % 3 + 1) }).collect();
        let m = tm(6, 5, &v);
        let (_, fronts) = extract_fronts(&m);
        assert_eq!(fronts.iter().map(|f| f.area).sum::<u64>() as usize, m.invaded_pixels());
        for f in &fronts {
            assert!(f.ff_interface_len <= f.area && f.fs_interface_len <= f.area);
            let (cx, cy) = f.centroid;
            assert!(cx >= f.bbox.x as f64 && cx <= (f.bbox.x + f.bbox.w - 1) as f64);
            assert!(cy >= f.bbox.y as f64 && cy <= (f.bbox.y + f.bbox.h - 1) as f64);
        }
    }

    /// Channel of height 4 whose front advances `step` px per frame.
    fn channel(step: usize, frames: usize) -> TimeMap {
        let w = step * frames;
        let mut v = Vec::new();
        for _ in 0..4 {
            for x in 0..w {
                v.push(Frame((x / step) as u32 + 1));
            }
        }
        TimeMap::from_values(w, 4, 0.5, &v).unwrap()
    }

    #[test]
    fn velocity_of_straight_advance() {
        let m = channel(3, 5);
        let (labels, _) = extract_fronts(&m);
        let fronts = compute_front_metrics(&labels, &m, m.frame_period);
        // Interior fronts: previous interface three columns behind the leading edge.
        for f in fronts.iter().filter(|f| f.time > 1 && f.time < 5) {
            assert_eq!(f.velocity, 3.0 / 0.5, "front at {}", f.time);
        }
    }

    #[test]
    fn velocity_oracle_brute_force() {
        let m = channel(3, 4);
        let (labels, _) = extract_fronts(&m);
        let fronts = compute_front_metrics(&labels, &m, 1.0);
        let f = fronts.iter().find(|f| f.time == 2).unwrap();
        // Previous interface: column 2; leading edge: column 5.
        let prev: Vec<(f64, f64)> = (0..4).map(|y| (2.0, y as f64)).collect();
        let lead: Vec<(f64, f64)> = (0..4).map(|y| (5.0, y as f64)).collect();
        let d = |a: &[(f64, f64)], b: &[(f64, f64)]| {
            a.iter()
                .map(|p| b.iter().map(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        assert_eq!(f.velocity, d(&prev, &lead).max(d(&lead, &prev)));
    }

    #[test]
    fn fronts_in_region_and_adjacency() {
        let m = tm(3, 1, &[Frame(1), Frame(2), Frame(3)]);
        let (labels, _) = extract_fronts(&m);
        assert_eq!(labels.fronts_in(&Rect::new(2, 0, 1, 1)).into_iter().collect::<Vec<_>>(), vec![3]);
        assert_eq!(labels.adjacent_pairs().into_iter().collect::<Vec<_>>(), vec![(1, 2), (2, 3)]);
    }
}
