//! Breakthrough-graph layout: the main channel pinned on a horizontal line,
//! everything else placed by a ForceAtlas2-style integrator.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DisplacementGraph, MainChannel, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub iterations: u32,
    /// Repulsion constant; `None` scales it to the channel spacing.
    pub repulsion: Option<f64>,
    pub attraction: f64,
    /// Pull of components without channel nodes toward the channel.
    pub gravity: f64,
    /// Global speed tolerance of the adaptive step.
    pub tolerance: f64,
    /// Barnes–Hut opening angle, used once the graph has more than
    /// `exact_limit` nodes.
    pub theta: f64,
    /// Largest node count for exact pairwise repulsion.
    pub exact_limit: usize,
    pub seed: u64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            iterations: 1000,
            repulsion: None,
            attraction: 1.0,
            gravity: 0.05,
            tolerance: 1.0,
            theta: 1.2,
            exact_limit: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    pub positions: BTreeMap<NodeId, (f64, f64)>,
    pub pinned: BTreeSet<NodeId>,
}

/// Pins the channel nodes at `x_k = Σ |c_i − c_{i−1}|` (centroid distances
/// along the channel), `y = 0`, and relaxes all other nodes from their
/// centroids with linear attraction along edges and degree-scaled
/// repulsion `k (deg_a + 1)(deg_b + 1) / d`.
pub fn layout_breakthrough(graph: &DisplacementGraph, channel: &MainChannel, params: &LayoutParams) -> Result<LayoutResult> {
    if channel.nodes.is_empty() {
        return Err(Error::EmptyChannel);
    }
    for n in &channel.nodes {
        if !graph.contains(*n) {
            return Err(Error::Invalid(format!("channel node {n} is not in the graph")));
        }
    }
    let ids: Vec<NodeId> = graph.node_ids().collect();
    let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let centroid = |n: NodeId| graph.node(n).unwrap().position;

    let mut pos = vec![(0.0f64, 0.0f64); ids.len()];
    let mut fixed = vec![false; ids.len()];
    let mut x = 0.0f64;
    let mut prev = centroid(channel.nodes[0]);
    for (k, &n) in channel.nodes.iter().enumerate() {
        let c = centroid(n);
        if k > 0 {
            x += ((c.0 - prev.0).powi(2) + (c.1 - prev.1).powi(2)).sqrt();
        }
        prev = c;
        pos[index[&n]] = (x, 0.0);
        fixed[index[&n]] = true;
    }
    let spacing = if channel.nodes.len() > 1 {
        (x / (channel.nodes.len() - 1) as f64).max(1.0)
    } else {
        10.0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let origin = centroid(channel.nodes[0]);
    for (i, &n) in ids.iter().enumerate() {
        if !fixed[i] {
            let c = centroid(n);
            let jitter = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            pos[i] = (c.0 - origin.0 + jitter.0, c.1 - origin.1 + jitter.1);
        }
    }

    let edges: Vec<(usize, usize)> = graph.edges().map(|e| (index[&e.src], index[&e.dst])).collect();
    let mass: Vec<f64> = ids
        .iter()
        .map(|&n| (graph.in_degree(n) + graph.out_degree(n)) as f64 + 1.0)
        .collect();

    // Components that contain no channel node get pulled toward the channel.
    let component = components(ids.len(), &edges);
    let anchored: BTreeSet<usize> = (0..ids.len()).filter(|&i| fixed[i]).map(|i| component[i]).collect();
    let floating: Vec<bool> = (0..ids.len()).map(|i| !anchored.contains(&component[i])).collect();
    let center = (x / 2.0, 0.0);

    let kr = params.repulsion.unwrap_or(spacing * spacing / 4.0);
    let ka = params.attraction;
    let mut force = vec![(0.0f64, 0.0f64); ids.len()];
    let mut old_force = vec![(0.0f64, 0.0f64); ids.len()];
    let mut speed = 1.0f64;

    for _ in 0..params.iterations {
        std::mem::swap(&mut force, &mut old_force);
        force.iter_mut().for_each(|f| *f = (0.0, 0.0));

        if ids.len() <= params.exact_limit {
            for a in 0..ids.len() {
                for b in a + 1..ids.len() {
                    let mut dx = pos[a].0 - pos[b].0;
                    let mut dy = pos[a].1 - pos[b].1;
                    let mut d2 = dx * dx + dy * dy;
                    if d2 < 1e-12 {
                        dx = rng.random::<f64>() - 0.5;
                        dy = rng.random::<f64>() - 0.5;
                        d2 = dx * dx + dy * dy;
                    }
                    let f = kr * mass[a] * mass[b] / d2;
                    force[a].0 += dx * f;
                    force[a].1 += dy * f;
                    force[b].0 -= dx * f;
                    force[b].1 -= dy * f;
                }
            }
        } else {
            let tree = QuadTree::build(&pos, &mass);
            force
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, f)| *f = tree.repulsion(i, &pos, &mass, kr, params.theta));
        }
        for &(a, b) in &edges {
            let dx = pos[b].0 - pos[a].0;
            let dy = pos[b].1 - pos[a].1;
            force[a].0 += ka * dx;
            force[a].1 += ka * dy;
            force[b].0 -= ka * dx;
            force[b].1 -= ka * dy;
        }
        for i in 0..ids.len() {
            if floating[i] {
                // Linear in distance so far-off components always come back.
                force[i].0 += params.gravity * mass[i] * (center.0 - pos[i].0);
                force[i].1 += params.gravity * mass[i] * (center.1 - pos[i].1);
            }
        }

        // Adaptive global speed from swinging versus traction.
        let (mut swing, mut traction) = (0.0f64, 0.0f64);
        for i in 0..ids.len() {
            if fixed[i] {
                continue;
            }
            let s = ((force[i].0 - old_force[i].0).powi(2) + (force[i].1 - old_force[i].1).powi(2)).sqrt();
            let t = ((force[i].0 + old_force[i].0).powi(2) + (force[i].1 + old_force[i].1).powi(2)).sqrt() / 2.0;
            swing += mass[i] * s;
            traction += mass[i] * t;
        }
        if swing > 0.0 {
            speed = (params.tolerance * traction / swing).min(1.5 * speed).max(1e-6);
        }
        let mut moved = false;
        for i in 0..ids.len() {
            if fixed[i] {
                continue;
            }
            let s = ((force[i].0 - old_force[i].0).powi(2) + (force[i].1 - old_force[i].1).powi(2)).sqrt();
            let norm = (force[i].0.powi(2) + force[i].1.powi(2)).sqrt();
            if norm == 0.0 {
                continue;
            }
            let mut factor = 0.1 * speed / (1.0 + (speed * s).sqrt());
            // Limit a single step to a fraction of the channel spacing.
            factor = factor.min(0.5 * spacing / norm);
            pos[i].0 += force[i].0 * factor;
            pos[i].1 += force[i].1 * factor;
            moved = true;
        }
        if !moved {
            break;
        }
    }

    Ok(LayoutResult {
        positions: ids.iter().enumerate().map(|(i, &n)| (n, pos[i])).collect(),
        pinned: channel.nodes.iter().copied().collect(),
    })
}

/// Quadtree over node positions with per-cell mass and centre of mass.
struct QuadTree {
    cells: Vec<Cell>,
}

struct Cell {
    mass: f64,
    com: (f64, f64),
    corner: (f64, f64),
    size: f64,
    children: Vec<usize>,
    bodies: Vec<usize>,
}

impl QuadTree {
    const MAX_DEPTH: u32 = 24;

    fn build(pos: &[(f64, f64)], mass: &[f64]) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pos {
            x0 = x0.min(p.0);
            y0 = y0.min(p.1);
            x1 = x1.max(p.0);
            y1 = y1.max(p.1);
        }
        let size = (x1 - x0).max(y1 - y0).max(1e-9);
        let mut tree = QuadTree { cells: Vec::new() };
        tree.add((0..pos.len()).collect(), (x0, y0), size, 0, pos, mass);
        tree
    }

    fn add(&mut self, bodies: Vec<usize>, corner: (f64, f64), size: f64, depth: u32, pos: &[(f64, f64)], mass: &[f64]) -> usize {
        let m: f64 = bodies.iter().map(|&i| mass[i]).sum();
        let com = bodies.iter().fold((0.0, 0.0), |(x, y), &i| (x + mass[i] * pos[i].0, y + mass[i] * pos[i].1));
        let id = self.cells.len();
        self.cells.push(Cell {
            mass: m,
            com: (com.0 / m, com.1 / m),
            corner,
            size,
            children: Vec::new(),
            bodies: Vec::new(),
        });
        if bodies.len() <= 1 || depth >= Self::MAX_DEPTH {
            self.cells[id].bodies = bodies;
            return id;
        }
        let half = size / 2.0;
        let mut quadrants: [Vec<usize>; 4] = Default::default();
        for i in bodies {
            let qx = usize::from(pos[i].0 >= corner.0 + half);
            let qy = usize::from(pos[i].1 >= corner.1 + half);
            quadrants[qy * 2 + qx].push(i);
        }
        let mut children = Vec::new();
        for (q, part) in quadrants.into_iter().enumerate() {
            if !part.is_empty() {
                let c = (corner.0 + half * (q % 2) as f64, corner.1 + half * (q / 2) as f64);
                children.push(self.add(part, c, half, depth + 1, pos, mass));
            }
        }
        self.cells[id].children = children;
        id
    }

    /// Repulsive force on body `i`; cells with `size / d < theta` act as
    /// one body at their centre of mass.
    fn repulsion(&self, i: usize, pos: &[(f64, f64)], mass: &[f64], kr: f64, theta: f64) -> (f64, f64) {
        let (mut fx, mut fy) = (0.0, 0.0);
        let mut push = |dx: f64, dy: f64, m: f64| {
            let d2 = dx * dx + dy * dy;
            if d2 >= 1e-12 {
                let f = kr * mass[i] * m / d2;
                fx += dx * f;
                fy += dy * f;
            }
        };
        let mut stack = vec![0];
        while let Some(c) = stack.pop() {
            let cell = &self.cells[c];
            if cell.children.is_empty() {
                for &j in cell.bodies.iter().filter(|&&j| j != i) {
                    push(pos[i].0 - pos[j].0, pos[i].1 - pos[j].1, mass[j]);
                }
                continue;
            }
            let (dx, dy) = (pos[i].0 - cell.com.0, pos[i].1 - cell.com.1);
            let d = (dx * dx + dy * dy).sqrt();
            let inside = (0.0..=cell.size).contains(&(pos[i].0 - cell.corner.0))
                && (0.0..=cell.size).contains(&(pos[i].1 - cell.corner.1));
            if !inside && cell.size / d < theta {
                push(dx, dy, cell.mass);
            } else {
                stack.extend(&cell.children);
            }
        }
        (fx, fy)
    }
}

fn components(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

/// Out-degree class used to colour nodes by branching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutDegreeClass {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "4+")]
    FourOrMore,
}

impl OutDegreeClass {
    pub fn from_degree(d: usize) -> Self {
        match d {
            0 => OutDegreeClass::Zero,
            1 => OutDegreeClass::One,
            2 => OutDegreeClass::Two,
            3 => OutDegreeClass::Three,
            _ => OutDegreeClass::FourOrMore,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OutDegreeClass::Zero => "0",
            OutDegreeClass::One => "1",
            OutDegreeClass::Two => "2",
            OutDegreeClass::Three => "3",
            OutDegreeClass::FourOrMore => "4+",
        }
    }
}

pub fn color_by_out_degree(graph: &DisplacementGraph) -> BTreeMap<NodeId, OutDegreeClass> {
    graph
        .node_ids()
        .map(|n| (n, OutDegreeClass::from_degree(graph.out_degree(n))))
        .collect()
}
