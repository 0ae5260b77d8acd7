//! Restricted quantization: merges fronts smaller than `gamma` by coarsening
//! their times in ranges of `2^i` while keeping them at or above every
//! earlier large neighbour.

use super::{extract_fronts, FlowFront, FrontLabelMap, NEVER_LABEL, SOLID_LABEL};
use crate::grid::for_each_neighbor8;
use crate::timemap::{TimeMap, NEVER};

#[derive(Debug, Clone)]
pub struct Quantized {
    pub map: TimeMap,
    pub labels: FrontLabelMap,
    pub fronts: Vec<FlowFront>,
    /// Number of quantization rounds that adjusted at least one front.
    pub iterations: u32,
}

/// Quantizes every front with fewer than `gamma` pixels.
///
/// In round `i` each small front with time `t` moves to `t − (t mod 2^i)`,
/// clamped from below by the latest adjacent large front not later than
/// `t`. Fronts driven to zero become NEVER. After each round the map is
/// relabelled so equal-time neighbours merge; rounds continue until every
/// front has at least `gamma` pixels. Pixels of large fronts never change.
pub fn quantize_small_fronts(
    map: &TimeMap,
    labels: &FrontLabelMap,
    fronts: &[FlowFront],
    gamma: u32,
) -> Quantized {
    let gamma = gamma.max(1) as u64;
    let mut map = map.clone();
    let mut labels = labels.clone();
    let mut fronts = fronts.to_vec();
    let (w, h) = (map.width, map.height);
    let mut iterations = 0;
    let mut range: u64 = 1;
    loop {
        let small: Vec<bool> = fronts.iter().map(|f| f.area < gamma).collect();
        if !small.iter().any(|&s| s) {
            break;
        }
        range *= 2;

        // Latest large neighbour time not after the front's own time.
        let mut bound = vec![0u32; fronts.len()];
        let lab = labels.labels();
        for y in 0..h {
            for x in 0..w {
                let l = lab[y * w + x];
                if l == SOLID_LABEL || l == NEVER_LABEL || !small[(l - 1) as usize] {
                    continue;
                }
                let k = (l - 1) as usize;
                let t = fronts[k].time;
                for_each_neighbor8(x, y, w, h, |nx, ny| {
                    let m = lab[ny * w + nx];
                    if m != l && m != SOLID_LABEL && m != NEVER_LABEL {
                        let nb = &fronts[(m - 1) as usize];
                        if nb.area >= gamma && nb.time <= t && nb.time > bound[k] {
                            bound[k] = nb.time;
                        }
                    }
                });
            }
        }

        let mut order: Vec<usize> = (0..fronts.len()).filter(|&k| small[k]).collect();
        order.sort_by_key(|&k| (fronts[k].time, fronts[k].label));
        let mut new_time: Vec<u32> = fronts.iter().map(|f| f.time).collect();
        for k in order {
            let t = fronts[k].time as u64;
            let quantized = (t - t % range).max(bound[k] as u64) as u32;
            new_time[k] = if quantized == 0 { NEVER } else { quantized };
        }

        let raw = map.raw_mut();
        for (r, &l) in raw.iter_mut().zip(labels.labels()) {
            if l != SOLID_LABEL && l != NEVER_LABEL && small[(l - 1) as usize] {
                *r = new_time[(l - 1) as usize];
            }
        }
        iterations += 1;
        let (l, f) = extract_fronts(&map);
        labels = l;
        fronts = f;
    }
    Quantized {
        map,
        labels,
        fronts,
        iterations,
    }
}
