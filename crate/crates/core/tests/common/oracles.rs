//! Brute-force reference implementations used to check the pipeline.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use porograph::graph::{DisplacementGraph, Edge, Node, NodeId, SimplifyMode, SimplifyOptions};
use porograph::ingestion::GrayFrame;
use porograph::timemap::{TimeMap, NEVER, SOLID};

const NB8: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

fn neighbours(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    NB8.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h).then_some((nx as usize, ny as usize))
    })
}

fn is_time(t: u32) -> bool {
    t != SOLID && t != NEVER
}

/// Per pixel: SOLID if DARK in frame 0, else the first frame where it is
/// DARK, else NEVER.
pub fn first_dark(frames: &[GrayFrame], beta: f64) -> Vec<u32> {
    let n = frames[0].data.len();
    (0..n)
        .map(|i| match frames.iter().position(|f| f.data[i] as f64 <= beta) {
            Some(0) => SOLID,
            Some(t) => t as u32,
            None => NEVER,
        })
        .collect()
}

/// Labels of 8-connected equal-time regions, numbered by first pixel in
/// raster order; 0 for SOLID and u32::MAX for NEVER.
pub fn flood_labels(map: &TimeMap) -> Vec<u32> {
    let (w, h) = (map.width, map.height);
    let raw = map.raw();
    let mut labels = vec![0u32; w * h];
    let mut next = 1;
    for start in 0..w * h {
        let t = raw[start];
        if !is_time(t) {
            labels[start] = if t == NEVER { u32::MAX } else { 0 };
            continue;
        }
        if labels[start] != 0 {
            continue;
        }
        labels[start] = next;
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for (nx, ny) in neighbours(p % w, p / w, w, h) {
                let q = ny * w + nx;
                if raw[q] == t && labels[q] == 0 {
                    labels[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    labels
}

/// Unordered pairs of distinct front labels that touch at some pixel.
pub fn touching_fronts(labels: &[u32], w: usize, h: usize) -> BTreeSet<(u32, u32)> {
    let mut out = BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            let a = labels[y * w + x];
            if a == 0 || a == u32::MAX {
                continue;
            }
            for (nx, ny) in neighbours(x, y, w, h) {
                let b = labels[ny * w + nx];
                if b != 0 && b != u32::MAX && a < b {
                    out.insert((a, b));
                }
            }
        }
    }
    out
}

/// Edges `i → j` for every touching `i` whose time is the latest time below
/// `t_j` among the fronts touching `j`.
pub fn local_max_edges(times: &BTreeMap<u32, u32>, touching: &BTreeSet<(u32, u32)>) -> BTreeSet<(u32, u32)> {
    let mut out = BTreeSet::new();
    for (&j, &tj) in times {
        let earlier: Vec<u32> = touching
            .iter()
            .filter_map(|&(a, b)| if a == j { Some(b) } else if b == j { Some(a) } else { None })
            .filter(|i| times[i] < tj)
            .collect();
        if let Some(best) = earlier.iter().map(|i| times[i]).max() {
            out.extend(earlier.iter().filter(|i| times[i] == best).map(|&i| (i, j)));
        }
    }
    out
}

/// Checks the quantized map against the original one. Returns the first
/// violation found.
pub fn check_quantization(orig: &TimeMap, quantized: &TimeMap, gamma: u32) -> Result<(), String> {
    let (w, h) = (orig.width, orig.height);
    let labels = flood_labels(orig);
    let mut area: BTreeMap<u32, u64> = BTreeMap::new();
    for &l in &labels {
        *area.entry(l).or_default() += 1;
    }
    let large = |l: u32| l != 0 && l != u32::MAX && area[&l] >= gamma as u64;
    // Latest large neighbour of each small front not after its own time.
    let mut bound: BTreeMap<u32, u32> = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == 0 || l == u32::MAX || large(l) {
                continue;
            }
            let t = orig.raw()[y * w + x];
            let b = bound.entry(l).or_default();
            for (nx, ny) in neighbours(x, y, w, h) {
                let m = labels[ny * w + nx];
                let tm = orig.raw()[ny * w + nx];
                if m != l && large(m) && tm <= t {
                    *b = (*b).max(tm);
                }
            }
        }
    }
    for i in 0..w * h {
        let (before, after, l) = (orig.raw()[i], quantized.raw()[i], labels[i]);
        if !is_time(before) || large(l) {
            if before != after {
                return Err(format!("pixel {i} outside small fronts changed {before} -> {after}"));
            }
            continue;
        }
        if after == SOLID {
            return Err(format!("pixel {i} became solid"));
        }
        let b = bound.get(&l).copied().unwrap_or(0);
        if after == NEVER {
            if b != 0 {
                return Err(format!("pixel {i} dropped to NEVER despite large neighbour at {b}"));
            }
        } else if after > before || after < b {
            return Err(format!("pixel {i}: {before} -> {after}, bound {b}"));
        }
    }
    let q_labels = flood_labels(quantized);
    let mut q_area: BTreeMap<u32, u64> = BTreeMap::new();
    for &l in &q_labels {
        if l != 0 && l != u32::MAX {
            *q_area.entry(l).or_default() += 1;
        }
    }
    if let Some((l, a)) = q_area.iter().find(|(_, &a)| a < gamma as u64) {
        return Err(format!("front {l} has {a} < {gamma} pixels"));
    }
    Ok(())
}

/// First violated fix invariant, if any.
pub fn fix_violation(g: &DisplacementGraph, inlet: &BTreeSet<NodeId>) -> Option<String> {
    for n in g.nodes() {
        let (i, o) = (g.in_degree(n.id), g.out_degree(n.id));
        if i == 0 && o == 0 {
            return Some(format!("node {} is isolated", n.id));
        }
        if i == 0 && !inlet.contains(&n.id) {
            return Some(format!("source {} outside the inlet", n.id));
        }
        if o == 0 && i > 0 {
            if let Some(m) = g.spatial_neighbors(n.id).find(|&m| g.node(m).is_some_and(|x| x.time() > n.time())) {
                return Some(format!("sink {} touches later node {m}", n.id));
            }
        }
    }
    None
}

/// All source-to-target paths by depth-first enumeration; returns the
/// largest area and, among ties, the smallest id sequence.
pub fn best_path(g: &DisplacementGraph, target: NodeId) -> Option<(u64, Vec<NodeId>)> {
    fn walk(g: &DisplacementGraph, n: NodeId, target: NodeId, path: &mut Vec<NodeId>, best: &mut Option<(u64, Vec<NodeId>)>) {
        path.push(n);
        if n == target {
            let area: u64 = path.iter().map(|&m| g.node(m).unwrap().area()).sum();
            let better = match best {
                None => true,
                Some((a, p)) => area > *a || (area == *a && path < p),
            };
            if better {
                *best = Some((area, path.clone()));
            }
        } else {
            for m in g.successors(n).collect::<Vec<_>>() {
                walk(g, m, target, path, best);
            }
        }
        path.pop();
    }
    let mut best = None;
    for s in g.sources() {
        walk(g, s, target, &mut Vec::new(), &mut best);
    }
    best
}

/// Nodes reachable from each node by directed paths of length at least one.
pub fn reachability(g: &DisplacementGraph) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
    g.node_ids()
        .map(|s| {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<NodeId> = g.successors(s).collect();
            while let Some(n) = stack.pop() {
                if seen.insert(n) {
                    stack.extend(g.successors(n));
                }
            }
            (s, seen)
        })
        .collect()
}

/// Rebuilds the original nodes and edges from a simplified graph's chain
/// metadata.
pub fn expand(g: &DisplacementGraph) -> (BTreeMap<NodeId, Node>, BTreeMap<u32, Edge>) {
    let mut nodes = BTreeMap::new();
    let mut edges = BTreeMap::new();
    let mut chain_end: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for n in g.nodes() {
        match &n.chain {
            Some(c) => {
                chain_end.insert(n.id, c.nodes.last().unwrap().id);
                nodes.extend(c.nodes.iter().map(|m| (m.id, m.clone())));
                edges.extend(c.edges.iter().map(|e| (e.id, e.clone())));
            }
            None => {
                nodes.insert(n.id, n.clone());
            }
        }
    }
    for e in g.edges() {
        match &e.chain {
            Some(c) => {
                nodes.extend(c.nodes.iter().map(|m| (m.id, m.clone())));
                edges.extend(c.edges.iter().map(|e| (e.id, e.clone())));
            }
            None => {
                let mut e = e.clone();
                if let Some(&end) = chain_end.get(&e.src) {
                    e.src = end;
                }
                edges.insert(e.id, e);
            }
        }
    }
    (nodes, edges)
}

/// Checks a simplified graph against its original.
pub fn check_simplification(orig: &DisplacementGraph, simp: &DisplacementGraph, opts: &SimplifyOptions) -> Result<(), String> {
    let r0 = reachability(orig);
    let r1 = reachability(simp);
    for a in simp.node_ids() {
        if !orig.contains(a) {
            return Err(format!("node {a} is new"));
        }
        for b in simp.node_ids() {
            if r0[&a].contains(&b) != r1[&a].contains(&b) {
                return Err(format!("reachability {a} -> {b} changed"));
            }
        }
    }
    let removable = |n: NodeId| {
        simp.in_degree(n) == 1
            && simp.out_degree(n) == 1
            && !opts.keep_nodes.contains(&n)
            && opts.keep_frame != Some(simp.node(n).unwrap().time())
    };
    for n in simp.node_ids().filter(|&n| removable(n)) {
        let combined = simp.node(n).unwrap().chain.is_some();
        if opts.mode == Some(SimplifyMode::Remove) || !combined {
            return Err(format!("trivial node {n} survived"));
        }
    }
    let (nodes, edges) = expand(simp);
    let orig_nodes: BTreeMap<NodeId, Node> = orig.nodes().map(|n| (n.id, n.clone())).collect();
    let orig_edges: BTreeMap<u32, Edge> = orig.edges().map(|e| (e.id, e.clone())).collect();
    if nodes != orig_nodes {
        return Err("expanded nodes differ from the original".into());
    }
    if edges != orig_edges {
        return Err("expanded edges differ from the original".into());
    }
    Ok(())
}

pub fn all_pairs_directed(a: &[(i32, i32)], b: &[(i32, i32)]) -> f64 {
    a.iter()
        .map(|&(ax, ay)| {
            b.iter()
                .map(|&(bx, by)| (((ax - bx) as f64).powi(2) + ((ay - by) as f64).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
