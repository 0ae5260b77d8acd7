//! The displacement graph: one node per flow front, edges along the
//! temporal succession of spatially adjacent fronts.

mod channel;
mod fixes;
mod metrics;
mod simplify;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fronts::{directed_hausdorff, front_interfaces, FlowFront, FrontInterfaces, FrontLabelMap, InterfaceSet};
use crate::grid::for_each_neighbor8;
use crate::timemap::TimeMap;

pub use channel::{Breakthrough, MainChannel};
pub use fixes::{FixStage, FixTrace, StageCounts};
pub use metrics::{frame_metrics, FrameMetrics};
pub use simplify::{SimplifyMode, SimplifyOptions};

pub type NodeId = u32;
pub type EdgeId = u32;

/// Original nodes and edges folded into a simplified node or edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub front: FlowFront,
    /// Spatial embedding, the front centroid in pixels.
    pub position: (f64, f64),
    /// Set on nodes that represent a combined chain.
    pub chain: Option<Chain>,
}

impl Node {
    pub fn time(&self) -> u32 {
        self.front.time
    }

    pub fn area(&self) -> u64 {
        self.front.area
    }

    /// The original, non-simplified fronts this node stands for.
    pub fn original_fronts(&self) -> Vec<&FlowFront> {
        match &self.chain {
            Some(c) => c.nodes.iter().flat_map(|n| n.original_fronts()).collect(),
            None => vec![&self.front],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Forward distance from the crossed interface to the successor's leading edge.
    pub d_forward: Option<f64>,
    /// Backward distance from the crossed interface to the previous interface.
    pub d_backward: Option<f64>,
    /// Time between the two fronts in seconds.
    pub delta_t: f64,
    /// Pixels per second.
    pub velocity: f64,
    /// Set on edges that replace a removed chain.
    pub chain: Option<Chain>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Isolated,
    Source,
    Sink,
    /// One incoming and one outgoing edge.
    Trivial,
    /// Two or more incoming edges.
    Merge,
    /// One incoming and two or more outgoing edges.
    Split,
}

impl NodeKind {
    pub fn from_degrees(indeg: usize, outdeg: usize) -> Self {
        match (indeg, outdeg) {
            (0, 0) => NodeKind::Isolated,
            (0, _) => NodeKind::Source,
            (_, 0) => NodeKind::Sink,
            (1, 1) => NodeKind::Trivial,
            (i, _) if i >= 2 => NodeKind::Merge,
            _ => NodeKind::Split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GraphDocument", try_from = "GraphDocument")]
pub struct DisplacementGraph {
    pub frame_period: f64,
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<EdgeId, Edge>,
    out_edges: BTreeMap<NodeId, BTreeSet<EdgeId>>,
    in_edges: BTreeMap<NodeId, BTreeSet<EdgeId>>,
    /// Spatial 8-adjacency between the fronts of the original nodes.
    spatial: BTreeMap<NodeId, BTreeSet<NodeId>>,
    next_edge: EdgeId,
}

/// Flat, serializable form of [`DisplacementGraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub frame_period: f64,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub spatial_adjacency: Vec<(NodeId, NodeId)>,
    pub next_edge_id: EdgeId,
}

impl From<DisplacementGraph> for GraphDocument {
    fn from(g: DisplacementGraph) -> Self {
        let spatial_adjacency = g
            .spatial
            .iter()
            .flat_map(|(&a, nbs)| nbs.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect();
        GraphDocument {
            frame_period: g.frame_period,
            nodes: g.nodes.into_values().collect(),
            edges: g.edges.into_values().collect(),
            spatial_adjacency,
            next_edge_id: g.next_edge,
        }
    }
}

impl TryFrom<GraphDocument> for DisplacementGraph {
    type Error = Error;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        let mut g = DisplacementGraph::empty(doc.frame_period);
        for n in doc.nodes {
            g.insert_node(n);
        }
        for (a, b) in doc.spatial_adjacency {
            g.add_spatial(a, b);
        }
        for e in doc.edges {
            if !g.nodes.contains_key(&e.src) || !g.nodes.contains_key(&e.dst) {
                return Err(Error::Invalid(format!(
                    "edge {} references a missing node",
                    e.id
                )));
            }
            g.insert_edge(e);
        }
        g.next_edge = g.next_edge.max(doc.next_edge_id);
        Ok(g)
    }
}

impl DisplacementGraph {
    pub fn empty(frame_period: f64) -> Self {
        DisplacementGraph {
            frame_period,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            out_edges: BTreeMap::new(),
            in_edges: BTreeMap::new(),
            spatial: BTreeMap::new(),
            next_edge: 0,
        }
    }

    /// One node per front (id = front label) with the given spatial
    /// adjacency and no edges.
    pub fn from_fronts(
        fronts: &[FlowFront],
        adjacency: impl IntoIterator<Item = (NodeId, NodeId)>,
        frame_period: f64,
    ) -> Self {
        let mut g = DisplacementGraph::empty(frame_period);
        for f in fronts {
            g.insert_node(Node {
                id: f.label,
                position: f.centroid,
                front: f.clone(),
                chain: None,
            });
        }
        for (a, b) in adjacency {
            g.add_spatial(a, b);
        }
        g
    }

    fn insert_node(&mut self, node: Node) {
        let id = node.id;
        self.nodes.insert(id, node);
        self.out_edges.entry(id).or_default();
        self.in_edges.entry(id).or_default();
    }

    fn add_spatial(&mut self, a: NodeId, b: NodeId) {
        if a != b {
            self.spatial.entry(a).or_default().insert(b);
            self.spatial.entry(b).or_default().insert(a);
        }
    }

    fn insert_edge(&mut self, edge: Edge) {
        self.next_edge = self.next_edge.max(edge.id + 1);
        self.out_edges.entry(edge.src).or_default().insert(edge.id);
        self.in_edges.entry(edge.dst).or_default().insert(edge.id);
        self.edges.insert(edge.id, edge);
    }

    /// Adds an edge without metrics and returns its id.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId) -> EdgeId {
        let id = self.next_edge;
        self.insert_edge(Edge {
            id,
            src,
            dst,
            d_forward: None,
            d_backward: None,
            delta_t: 0.0,
            velocity: 0.0,
            chain: None,
        });
        id
    }

    fn remove_edge(&mut self, id: EdgeId) -> Option<Edge> {
        let e = self.edges.remove(&id)?;
        if let Some(s) = self.out_edges.get_mut(&e.src) {
            s.remove(&id);
        }
        if let Some(s) = self.in_edges.get_mut(&e.dst) {
            s.remove(&id);
        }
        Some(e)
    }

    /// Removes a node with its incident edges. Spatial adjacency is kept so
    /// that it still describes the original fronts.
    pub fn remove_node(&mut self, id: NodeId) -> Option<Node> {
        let node = self.nodes.remove(&id)?;
        let incident: Vec<EdgeId> = self
            .out_edges
            .remove(&id)
            .into_iter()
            .chain(self.in_edges.remove(&id))
            .flatten()
            .collect();
        for e in incident {
            self.remove_edge(e);
        }
        Some(node)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut Node> {
        self.nodes.get_mut(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        self.out_edges
            .get(&id)
            .into_iter()
            .flatten()
            .map(|e| &self.edges[e])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        self.in_edges
            .get(&id)
            .into_iter()
            .flatten()
            .map(|e| &self.edges[e])
    }

    pub fn in_degree(&self, id: NodeId) -> usize {
        self.in_edges.get(&id).map_or(0, |s| s.len())
    }

    pub fn out_degree(&self, id: NodeId) -> usize {
        self.out_edges.get(&id).map_or(0, |s| s.len())
    }

    pub fn successors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_edges(id).map(|e| e.dst)
    }

    pub fn predecessors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_edges(id).map(|e| e.src)
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        NodeKind::from_degrees(self.in_degree(id), self.out_degree(id))
    }

    /// Spatially adjacent fronts of `id`, whether or not they are still in the graph.
    pub fn spatial_neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.spatial.get(&id).into_iter().flatten().copied()
    }

    pub fn sources(&self) -> Vec<NodeId> {
        self.node_ids().filter(|&n| self.in_degree(n) == 0).collect()
    }

    pub fn sinks(&self) -> Vec<NodeId> {
        self.node_ids().filter(|&n| self.out_degree(n) == 0).collect()
    }

    /// Kahn order with ties broken by node id; `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let mut indeg: BTreeMap<NodeId, usize> = self.node_ids().map(|n| (n, self.in_degree(n))).collect();
        let mut ready: BTreeSet<NodeId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for s in self.successors(n) {
                let d = indeg.get_mut(&s).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(s);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// Every edge goes strictly forward in time.
    pub fn is_temporal_dag(&self) -> bool {
        self.edges
            .values()
            .all(|e| self.nodes[&e.src].time() < self.nodes[&e.dst].time())
            && self.topological_order().is_some()
    }

    /// Creates the edges of the displacement graph: each node receives an
    /// edge from every spatial neighbour whose time is the largest time
    /// below its own. A front arriving after a junction was flooded thus
    /// gets no outgoing edge there.
    pub fn connect_local_maxima(&mut self) {
        let ids: Vec<NodeId> = self.node_ids().collect();
        for j in ids {
            let tj = self.nodes[&j].time();
            let earlier: Vec<(u32, NodeId)> = self
                .spatial_neighbors(j)
                .filter_map(|i| self.nodes.get(&i).map(|n| (n.time(), i)))
                .filter(|&(t, _)| t < tj)
                .collect();
            if let Some(&(best, _)) = earlier.iter().max_by_key(|(t, _)| *t) {
                let mut srcs: Vec<NodeId> = earlier.iter().filter(|(t, _)| *t == best).map(|&(_, i)| i).collect();
                srcs.sort_unstable();
                for i in srcs {
                    self.add_edge(i, j);
                }
            }
        }
    }

    /// Node ids whose edges go to or from `id`.
    pub fn neighbors(&self, id: NodeId) -> BTreeSet<NodeId> {
        self.successors(id).chain(self.predecessors(id)).collect()
    }
}

/// Builds the unfixed graph: nodes at front centroids, edges by the
/// local-maximum rule, edge velocities from the interface distances.
pub fn build_graph(labels: &FrontLabelMap, fronts: &[FlowFront], map: &TimeMap) -> DisplacementGraph {
    let mut g = DisplacementGraph::from_fronts(fronts, labels.adjacent_pairs(), map.frame_period);
    g.connect_local_maxima();
    let geometry = EdgeGeometry::new(labels, map);
    g.assign_edge_velocities(&geometry);
    g
}

/// Per-front pixel sets and interfaces used by edge velocities.
pub struct EdgeGeometry<'a> {
    labels: &'a FrontLabelMap,
    map: &'a TimeMap,
    pixels: Vec<Vec<usize>>,
    interfaces: Vec<FrontInterfaces>,
}

impl<'a> EdgeGeometry<'a> {
    pub fn new(labels: &'a FrontLabelMap, map: &'a TimeMap) -> Self {
        EdgeGeometry {
            labels,
            map,
            pixels: labels.pixels_by_front(),
            interfaces: front_interfaces(labels, map),
        }
    }

    fn front_pixels(&self, label: NodeId) -> Result<&[usize]> {
        self.pixels
            .get((label as usize).wrapping_sub(1))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Invalid(format!("no front with label {label}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeVelocity {
    pub d_forward: f64,
    pub d_backward: Option<f64>,
    pub delta_t: f64,
    pub velocity: f64,
}

/// Velocity along the edge `src → dst` between two adjacent fronts.
///
/// The crossed interface Γ (pixels of `src` touching `dst`) is measured
/// forward to the leading edge of `dst` and backward to the interface `src`
/// advanced from; the mean of both distances over the time difference is
/// the velocity. Sources have no backward interface and use the forward
/// distance alone.
pub fn edge_velocity(src: NodeId, dst: NodeId, geometry: &EdgeGeometry<'_>) -> Result<EdgeVelocity> {
    let (labels, map) = (geometry.labels, geometry.map);
    let w = map.width;
    let a_pixels = geometry.front_pixels(src)?;
    let b_pixels = geometry.front_pixels(dst)?;
    let (Some(&a0), Some(&b0)) = (a_pixels.first(), b_pixels.first()) else {
        return Err(Error::EmptySet);
    };
    let (ta, tb) = (map.raw_at(a0), map.raw_at(b0));
    if ta >= tb {
        return Err(Error::Invalid(format!("edge {src} → {dst} does not go forward in time")));
    }
    let crossed: Vec<usize> = a_pixels
        .iter()
        .copied()
        .filter(|&i| {
            let mut touches = false;
            for_each_neighbor8(i % w, i / w, w, map.height, |x, y| {
                touches |= labels.get(x, y) == dst;
            });
            touches
        })
        .collect();
    if crossed.is_empty() {
        return Err(Error::Invalid(format!("fronts {src} and {dst} are not adjacent")));
    }
    let gamma = InterfaceSet::from_indices(crossed, w);
    let leading = &geometry.interfaces[(dst - 1) as usize].leading;
    // A successor without a leading edge filled a closed pocket; measure how
    // far its pixels reach beyond the crossed interface instead.
    let d_forward = if leading.is_empty() {
        directed_hausdorff(&InterfaceSet::from_indices(b_pixels.iter().copied(), w), &gamma)?
    } else {
        directed_hausdorff(&gamma, &InterfaceSet::from_indices(leading.iter().copied(), w))?
    };
    let previous = &geometry.interfaces[(src - 1) as usize].previous;
    let d_backward = if previous.is_empty() {
        None
    } else {
        Some(directed_hausdorff(&gamma, &InterfaceSet::from_indices(previous.iter().copied(), w))?)
    };
    let delta_t = (tb - ta) as f64 * map.frame_period;
    let velocity = match d_backward {
        Some(b) => (d_forward + b) / (2.0 * delta_t),
        None => d_forward / delta_t,
    };
    Ok(EdgeVelocity {
        d_forward,
        d_backward,
        delta_t,
        velocity,
    })
}

impl DisplacementGraph {
    pub fn assign_edge_velocities(&mut self, geometry: &EdgeGeometry<'_>) {
        let pairs: Vec<(EdgeId, NodeId, NodeId)> = self.edges.values().map(|e| (e.id, e.src, e.dst)).collect();
        let results: Vec<(EdgeId, Option<EdgeVelocity>)> = pairs
            .par_iter()
            .map(|&(id, s, d)| (id, edge_velocity(s, d, geometry).ok()))
            .collect();
        for (id, v) in results {
            if let (Some(e), Some(v)) = (self.edges.get_mut(&id), v) {
                e.d_forward = Some(v.d_forward);
                e.d_backward = v.d_backward;
                e.delta_t = v.delta_t;
                e.velocity = v.velocity;
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::fronts::extract_fronts;
    use crate::grid::Rect;
    use crate::timemap::TimeValue::{self, *};

    pub(crate) fn front(label: u32, time: u32, area: u64) -> FlowFront {
        FlowFront {
            label,
            time,
            area,
            centroid: (label as f64, time as f64),
            ff_interface_len: 0,
            fs_interface_len: 0,
            bbox: Rect::new(0, 0, 1, 1),
            velocity: 0.0,
        }
    }

    /// Graph with the given `(id, time, area)` nodes, spatial adjacency and edges.
    pub(crate) fn graph(nodes: &[(u32, u32, u64)], spatial: &[(u32, u32)], edges: &[(u32, u32)]) -> DisplacementGraph {
        let fronts: Vec<_> = nodes.iter().map(|&(l, t, a)| front(l, t, a)).collect();
        let mut g = DisplacementGraph::from_fronts(&fronts, spatial.iter().copied(), 1.0);
        for &(a, b) in edges {
            let id = g.add_edge(a, b);
            let e = g.edges.get_mut(&id).unwrap();
            e.velocity = 1.0;
            e.delta_t = 1.0;
        }
        g
    }

    #[test]
    fn local_maximum_rule() {
        let mut g = graph(&[(1, 5, 1), (2, 8, 1), (3, 9, 1)], &[(1, 3), (2, 3)], &[]);
        g.connect_local_maxima();
        let e: Vec<_> = g.edges().map(|e| (e.src, e.dst)).collect();
        assert_eq!(e, vec![(2, 3)]);
    }

    #[test]
    fn equal_time_neighbours_both_connect() {
        let mut g = graph(&[(1, 4, 1), (2, 4, 1), (3, 5, 1)], &[(1, 3), (2, 3)], &[]);
        g.connect_local_maxima();
        assert_eq!(g.in_degree(3), 2);
        assert_eq!(g.kind(3), NodeKind::Sink);
        assert_eq!(g.kind(1), NodeKind::Source);
    }

    #[test]
    fn node_kinds() {
        assert_eq!(NodeKind::from_degrees(0, 0), NodeKind::Isolated);
        assert_eq!(NodeKind::from_degrees(1, 1), NodeKind::Trivial);
        assert_eq!(NodeKind::from_degrees(2, 1), NodeKind::Merge);
        assert_eq!(NodeKind::from_degrees(1, 3), NodeKind::Split);
    }

    #[test]
    fn remove_node_drops_incident_edges() {
        let mut g = graph(&[(1, 1, 1), (2, 2, 1), (3, 3, 1)], &[], &[(1, 2), (2, 3)]);
        g.remove_node(2);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.out_degree(1), 0);
        assert_eq!(g.topological_order().unwrap(), vec![1, 3]);
    }

    #[test]
    fn json_roundtrip() {
        let g = graph(&[(1, 1, 3), (2, 2, 4)], &[(1, 2)], &[(1, 2)]);
        let text = serde_json::to_string(&g).unwrap();
        let back: DisplacementGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }

    fn band_map(step: usize, frames: usize, height: usize, period: f64) -> TimeMap {
        let w = step * frames;
        let v: Vec<TimeValue> = (0..height).flat_map(|_| (0..w).map(move |x| Frame((x / step) as u32 + 1))).collect();
        TimeMap::from_values(w, height, period, &v).unwrap()
    }

    #[test]
    fn straight_channel_edge_velocity() {
        let m = band_map(4, 5, 6, 0.5);
        let (labels, fronts) = extract_fronts(&m);
        let g = build_graph(&labels, &fronts, &m);
        assert_eq!(g.edge_count(), 4);
        for e in g.edges() {
            if g.in_degree(e.src) > 0 {
                assert_eq!(e.d_forward, Some(4.0));
                assert_eq!(e.d_backward, Some(4.0));
                assert_eq!(e.velocity, 4.0 / 0.5);
            } else {
                // Source: forward distance only.
                assert_eq!(e.d_backward, None);
                assert_eq!(e.velocity, 4.0 / 0.5);
            }
        }
    }

    #[test]
    fn velocity_scales_with_time_difference() {
        let m1 = band_map(4, 3, 4, 1.0);
        let mut raw = m1.raw().to_vec();
        for r in raw.iter_mut() {
            if *r >= 2 {
                *r += 1;
            }
        }
        let m2 = TimeMap::from_raw(m1.width, m1.height, 1.0, 4, raw).unwrap();
        let v = |m: &TimeMap| {
            let (labels, _) = extract_fronts(m);
            let geo = EdgeGeometry::new(&labels, m);
            edge_velocity(1, 2, &geo).unwrap()
        };
        let (a, b) = (v(&m1), v(&m2));
        assert_eq!(b.delta_t, 2.0 * a.delta_t);
        assert_eq!(b.velocity, a.velocity / 2.0);
    }

    #[test]
    fn edge_velocity_rejects_non_adjacent() {
        let m = band_map(2, 4, 2, 1.0);
        let (labels, _) = extract_fronts(&m);
        let geo = EdgeGeometry::new(&labels, &m);
        assert!(edge_velocity(1, 3, &geo).is_err());
        assert!(edge_velocity(2, 1, &geo).is_err());
    }
}
