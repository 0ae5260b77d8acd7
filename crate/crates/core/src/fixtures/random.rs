//! Seeded random inputs for property and acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fronts::FlowFront;
use crate::graph::{DisplacementGraph, Edge, GraphDocument, Node};
use crate::grid::Rect;
use crate::ingestion::GrayFrame;
use crate::timemap::{TimeMap, NEVER, SOLID};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapParams {
    pub width: usize,
    pub height: usize,
    /// Last frame; arrival times are spread over `1..=frames`.
    pub frames: u32,
    /// Probability of a solid pixel.
    pub solid: f64,
    /// Probability of a pore pixel that is never reached.
    pub never: f64,
    /// Probability of a pixel whose time is replaced by a random frame.
    pub noise: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        MapParams {
            width: 32,
            height: 24,
            frames: 20,
            solid: 0.15,
            never: 0.02,
            noise: 0.03,
        }
    }
}

/// Invasion-like time map: arrival by a shortest-path sweep from the left
/// edge through random resistance, with solid grains, unreached pores and
/// salt noise.
pub fn random_time_map(seed: u64, p: &MapParams) -> TimeMap {
    let (w, h) = (p.width.max(1), p.height.max(1));
    let frames = p.frames.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let solid: Vec<bool> = (0..w * h)
        .map(|i| i % w != 0 && rng.random_bool(p.solid.clamp(0.0, 1.0)))
        .collect();
    let cost: Vec<f64> = (0..w * h).map(|_| rng.random_range(1.0..3.0)).collect();
    let dist = super::sweep(w, h, &solid, &cost);
    let far = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0f64, f64::max);
    let per_frame = (far / frames as f64).max(1e-9);
    let data = (0..w * h)
        .map(|i| {
            if solid[i] {
                return SOLID;
            }
            if !dist[i].is_finite() || rng.random_bool(p.never.clamp(0.0, 1.0)) {
                return NEVER;
            }
            if rng.random_bool(p.noise.clamp(0.0, 1.0)) {
                return rng.random_range(1..=frames);
            }
            (1 + (dist[i] / per_frame) as u32).min(frames)
        })
        .collect();
    TimeMap::from_raw(w, h, 1.0, frames, data).expect("sizes match")
}

/// Frames `0..=frames` of independent random DARK/LIGHT pixels, with
/// intensities well away from the 0.5 threshold. Fluid may appear and
/// disappear arbitrarily.
pub fn random_series(seed: u64, width: usize, height: usize, frames: u32, p_dark: f64) -> Vec<GrayFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..=frames)
        .map(|_| GrayFrame {
            width,
            height,
            data: (0..width * height)
                .map(|_| {
                    if rng.random_bool(p_dark) {
                        rng.random_range(0.0..0.4)
                    } else {
                        rng.random_range(0.6..=1.0)
                    }
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DagParams {
    pub nodes: usize,
    /// Probability that a node gets a predecessor from an earlier frame.
    pub tree_edge: f64,
    /// Probability of each additional forward edge.
    pub extra_edge: f64,
    /// Areas are drawn from `1..=max_area`; small values produce ties.
    pub max_area: u64,
}

impl Default for DagParams {
    fn default() -> Self {
        DagParams {
            nodes: 12,
            tree_edge: 0.9,
            extra_edge: 0.2,
            max_area: 20,
        }
    }
}

/// Random displacement graph whose edges all go forward in time. Node ids
/// are `1..=n`; edges carry random positive velocities.
pub fn random_dag(seed: u64, p: &DagParams) -> DisplacementGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.nodes.max(1);
    let mut time = 1u32;
    let mut nodes = Vec::with_capacity(n);
    for id in 1..=n as u32 {
        if id > 1 {
            time += rng.random_range(0..=2);
        }
        let x = rng.random_range(0.0..100.0);
        let y = rng.random_range(0.0..100.0);
        let area = rng.random_range(1..=p.max_area.max(1));
        nodes.push(Node {
            id,
            position: (x, y),
            chain: None,
            front: FlowFront {
                label: id,
                time,
                area,
                centroid: (x, y),
                ff_interface_len: rng.random_range(0..=area),
                fs_interface_len: rng.random_range(0..=area),
                bbox: Rect::new(x as usize, y as usize, 1, 1),
                velocity: rng.random_range(0.0..10.0),
            },
        });
    }
    let mut pairs = Vec::new();
    for b in 0..n {
        let earlier: Vec<usize> = (0..b).filter(|&a| nodes[a].front.time < nodes[b].front.time).collect();
        if !earlier.is_empty() && rng.random_bool(p.tree_edge) {
            pairs.push((earlier[rng.random_range(0..earlier.len())], b));
        }
        for &a in &earlier {
            if !pairs.contains(&(a, b)) && rng.random_bool(p.extra_edge) {
                pairs.push((a, b));
            }
        }
    }
    let edges: Vec<Edge> = pairs
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let d = rng.random_range(0.5..20.0);
            let delta_t = (nodes[b].front.time - nodes[a].front.time) as f64;
            Edge {
                id: i as u32,
                src: nodes[a].id,
                dst: nodes[b].id,
                d_forward: Some(d),
                d_backward: Some(d),
                delta_t,
                velocity: d / delta_t,
                chain: None,
            }
        })
        .collect();
    let spatial = pairs.iter().map(|&(a, b)| (nodes[a].id, nodes[b].id)).collect();
    DisplacementGraph::try_from(GraphDocument {
        frame_period: 1.0,
        next_edge_id: edges.len() as u32,
        nodes,
        edges,
        spatial_adjacency: spatial,
    })
    .expect("generated graph is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_are_seeded() {
        let p = MapParams::default();
        assert_eq!(random_time_map(3, &p), random_time_map(3, &p));
        assert_ne!(random_time_map(3, &p), random_time_map(4, &p));
    }

    #[test]
    fn dags_go_forward_in_time() {
        for seed in 0..50 {
            let g = random_dag(seed, &DagParams::default());
            assert!(g.is_temporal_dag());
            assert_eq!(g.node_count(), 12);
        }
    }
}
