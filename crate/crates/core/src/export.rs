//! Writers for graphs, metric tables and the viewer bundle.
//!
//! JSON is the canonical graph format and reads back into an identical
//! graph; GraphML and DOT drop the chain metadata of simplified graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event};
use quick_xml::Writer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fronts::FlowFront;
use crate::graph::{Breakthrough, DisplacementGraph, Edge, FrameMetrics, GraphDocument, Node, NodeId, NodeKind};
use crate::grid::Rect;
use crate::ingestion::{DatasetConfig, GrayFrame};
use crate::layout::{LayoutResult, OutDegreeClass};
use crate::timemap::{encode_time_map, render_time_map, sidecar_of, TimeMap};

pub const GRAPHML_NS: &str = "http://graphml.graphdrawing.org/xmlns";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Json,
    GraphMl,
    Dot,
}

impl GraphFormat {
    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Json => "json",
            GraphFormat::GraphMl => "graphml",
            GraphFormat::Dot => "dot",
        }
    }
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(GraphFormat::Json),
            "graphml" => Ok(GraphFormat::GraphMl),
            "dot" => Ok(GraphFormat::Dot),
            _ => Err(Error::Config(format!("unknown graph format `{s}`"))),
        }
    }
}

/// Analysis results attached to exported nodes.
#[derive(Debug, Clone, Copy, Default)]
pub struct Annotations<'a> {
    pub layout: Option<&'a LayoutResult>,
    pub breakthrough: Option<Breakthrough>,
    pub main_channel: &'a [NodeId],
    pub jumps: Option<&'a BTreeSet<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedNode {
    #[serde(flatten)]
    pub node: Node,
    pub kind: NodeKind,
    pub out_degree: OutDegreeClass,
    /// Layout position in pixel units, absent without a layout.
    pub layout: Option<(f64, f64)>,
    pub pinned: bool,
    pub main_channel: bool,
    pub jump: bool,
}

/// Contents of `graph.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub frame_period: f64,
    pub layout_present: bool,
    pub breakthrough: Option<Breakthrough>,
    pub main_channel: Vec<NodeId>,
    pub nodes: Vec<ExportedNode>,
    pub edges: Vec<Edge>,
    pub spatial_adjacency: Vec<(NodeId, NodeId)>,
    pub next_edge_id: u32,
}

impl GraphFile {
    pub fn new(graph: &DisplacementGraph, ann: &Annotations<'_>) -> Self {
        let doc: GraphDocument = graph.clone().into();
        let channel: BTreeSet<NodeId> = ann.main_channel.iter().copied().collect();
        let nodes = doc
            .nodes
            .into_iter()
            .map(|node| {
                let id = node.id;
                ExportedNode {
                    kind: graph.kind(id),
                    out_degree: OutDegreeClass::from_degree(graph.out_degree(id)),
                    layout: ann.layout.and_then(|l| l.positions.get(&id).copied()),
                    pinned: ann.layout.is_some_and(|l| l.pinned.contains(&id)),
                    main_channel: channel.contains(&id),
                    jump: ann.jumps.is_some_and(|j| j.contains(&id)),
                    node,
                }
            })
            .collect();
        GraphFile {
            frame_period: doc.frame_period,
            layout_present: ann.layout.is_some(),
            breakthrough: ann.breakthrough,
            main_channel: ann.main_channel.to_vec(),
            nodes,
            edges: doc.edges,
            spatial_adjacency: doc.spatial_adjacency,
            next_edge_id: doc.next_edge_id,
        }
    }

    pub fn graph(&self) -> Result<DisplacementGraph> {
        DisplacementGraph::try_from(GraphDocument {
            frame_period: self.frame_period,
            nodes: self.nodes.iter().map(|n| n.node.clone()).collect(),
            edges: self.edges.clone(),
            spatial_adjacency: self.spatial_adjacency.clone(),
            next_edge_id: self.next_edge_id,
        })
    }

    pub fn layout(&self) -> Option<LayoutResult> {
        if !self.layout_present {
            return None;
        }
        Some(LayoutResult {
            positions: self.nodes.iter().filter_map(|n| n.layout.map(|p| (n.node.id, p))).collect(),
            pinned: self.nodes.iter().filter(|n| n.pinned).map(|n| n.node.id).collect(),
        })
    }
}

pub fn graph_to_json(graph: &DisplacementGraph, ann: &Annotations<'_>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&GraphFile::new(graph, ann))?)
}

/// Reads a `graph.json` back into the graph and, if present, its layout.
pub fn graph_from_json(text: &str) -> Result<(DisplacementGraph, Option<LayoutResult>)> {
    let file: GraphFile = serde_json::from_str(text)?;
    Ok((file.graph()?, file.layout()))
}

const NODE_KEYS: &[(&str, &str)] = &[
    ("time", "int"),
    ("time_s", "double"),
    ("area", "long"),
    ("centroid_x", "double"),
    ("centroid_y", "double"),
    ("ff_interface", "long"),
    ("fs_interface", "long"),
    ("bbox", "string"),
    ("velocity", "double"),
    ("kind", "string"),
    ("out_degree", "string"),
    ("layout_x", "double"),
    ("layout_y", "double"),
    ("pinned", "boolean"),
    ("main_channel", "boolean"),
    ("jump", "boolean"),
];

const EDGE_KEYS: &[(&str, &str)] = &[
    ("d_forward", "double"),
    ("d_backward", "double"),
    ("delta_t", "double"),
    ("velocity", "double"),
];

fn xml_err(e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("xml: {e}"))
}

pub fn graph_to_graphml(graph: &DisplacementGraph, ann: &Annotations<'_>) -> Result<String> {
    let file = GraphFile::new(graph, ann);
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    let mut ev = |e: Event<'_>| w.write_event(e).map_err(xml_err);
    ev(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))?;
    ev(Event::Start(BytesStart::new("graphml").with_attributes([
        ("xmlns", GRAPHML_NS),
        ("xmlns:xsi", "http://www.w3.org/2001/XMLSchema-instance"),
        (
            "xsi:schemaLocation",
            "http://graphml.graphdrawing.org/xmlns http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd",
        ),
    ])))?;
    for (domain, keys, prefix) in [("node", NODE_KEYS, "n_"), ("edge", EDGE_KEYS, "e_")] {
        for (name, ty) in keys {
            let id = format!("{prefix}{name}");
            ev(Event::Empty(BytesStart::new("key").with_attributes([
                ("id", id.as_str()),
                ("for", domain),
                ("attr.name", name),
                ("attr.type", ty),
            ])))?;
        }
    }
    ev(Event::Start(
        BytesStart::new("graph").with_attributes([("id", "G"), ("edgedefault", "directed")]),
    ))?;
    for n in &file.nodes {
        let f = &n.node.front;
        let id = format!("n{}", n.node.id);
        ev(Event::Start(BytesStart::new("node").with_attributes([("id", id.as_str())])))?;
        let mut data = vec![
            ("n_time", f.time.to_string()),
            ("n_time_s", (f.time as f64 * file.frame_period).to_string()),
            ("n_area", n.node.area().to_string()),
            ("n_centroid_x", n.node.position.0.to_string()),
            ("n_centroid_y", n.node.position.1.to_string()),
            ("n_ff_interface", f.ff_interface_len.to_string()),
            ("n_fs_interface", f.fs_interface_len.to_string()),
            ("n_bbox", f.bbox.to_string()),
            ("n_velocity", f.velocity.to_string()),
            ("n_kind", format!("{:?}", n.kind).to_lowercase()),
            ("n_out_degree", n.out_degree.label().to_string()),
        ];
        if let Some((x, y)) = n.layout {
            data.push(("n_layout_x", x.to_string()));
            data.push(("n_layout_y", y.to_string()));
        }
        data.push(("n_pinned", n.pinned.to_string()));
        data.push(("n_main_channel", n.main_channel.to_string()));
        data.push(("n_jump", n.jump.to_string()));
        for (key, value) in &data {
            ev(Event::Start(BytesStart::new("data").with_attributes([("key", *key)])))?;
            ev(Event::Text(BytesText::new(value)))?;
            ev(Event::End(BytesEnd::new("data")))?;
        }
        ev(Event::End(BytesEnd::new("node")))?;
    }
    for e in &file.edges {
        let (id, src, dst) = (format!("e{}", e.id), format!("n{}", e.src), format!("n{}", e.dst));
        ev(Event::Start(BytesStart::new("edge").with_attributes([
            ("id", id.as_str()),
            ("source", src.as_str()),
            ("target", dst.as_str()),
        ])))?;
        let mut data = Vec::new();
        if let Some(d) = e.d_forward {
            data.push(("e_d_forward", d.to_string()));
        }
        if let Some(d) = e.d_backward {
            data.push(("e_d_backward", d.to_string()));
        }
        data.push(("e_delta_t", e.delta_t.to_string()));
        data.push(("e_velocity", e.velocity.to_string()));
        for (key, value) in &data {
            ev(Event::Start(BytesStart::new("data").with_attributes([("key", *key)])))?;
            ev(Event::Text(BytesText::new(value)))?;
            ev(Event::End(BytesEnd::new("data")))?;
        }
        ev(Event::End(BytesEnd::new("edge")))?;
    }
    ev(Event::End(BytesEnd::new("graph")))?;
    ev(Event::End(BytesEnd::new("graphml")))?;
    String::from_utf8(w.into_inner()).map_err(xml_err)
}

pub fn graph_to_dot(graph: &DisplacementGraph, ann: &Annotations<'_>) -> String {
    let file = GraphFile::new(graph, ann);
    let mut s = String::from("digraph displacement {\n  node [shape=circle];\n");
    for n in &file.nodes {
        let (x, y) = n.layout.unwrap_or(n.node.position);
        // DOT's y axis points up.
        let _ = writeln!(
            s,
            "  n{} [label=\"{}\", time={}, area={}, velocity={}, out_degree=\"{}\", pos=\"{},{}\"{}];",
            n.node.id,
            n.node.id,
            n.node.time(),
            n.node.area(),
            n.node.front.velocity,
            n.out_degree.label(),
            x,
            -y,
            if n.main_channel { ", color=red" } else { "" },
        );
    }
    for e in &file.edges {
        let _ = writeln!(
            s,
            "  n{} -> n{} [delta_t={}, velocity={}];",
            e.src, e.dst, e.delta_t, e.velocity
        );
    }
    s.push_str("}\n");
    s
}

pub fn graph_to_string(graph: &DisplacementGraph, ann: &Annotations<'_>, format: GraphFormat) -> Result<String> {
    match format {
        GraphFormat::Json => graph_to_json(graph, ann),
        GraphFormat::GraphMl => graph_to_graphml(graph, ann),
        GraphFormat::Dot => Ok(graph_to_dot(graph, ann)),
    }
}

pub fn export_graph(graph: &DisplacementGraph, ann: &Annotations<'_>, format: GraphFormat, path: &Path) -> Result<()> {
    let text = graph_to_string(graph, ann, format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Structural checks of a GraphML document: root element and namespace,
/// declared keys with valid domains and types, unique node ids, edge
/// endpoints that exist, and data elements that reference declared keys of
/// the right domain.
pub fn check_graphml(text: &str) -> Result<()> {
    use quick_xml::Reader;
    let bad = |m: String| Error::Invalid(format!("graphml: {m}"));
    let mut reader = Reader::from_str(text);
    let mut keys: BTreeMap<String, String> = BTreeMap::new();
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::new();
    let mut stack: Vec<String> = Vec::new();
    let mut root_seen = false;
    loop {
        let event = reader.read_event().map_err(xml_err)?;
        let (start, empty) = match &event {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            Event::End(_) => {
                stack.pop();
                continue;
            }
            Event::Eof => break,
            _ => continue,
        };
        let Some(e) = start else { continue };
        let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let mut attrs = BTreeMap::new();
        for a in e.attributes() {
            let a = a.map_err(xml_err)?;
            attrs.insert(
                String::from_utf8_lossy(a.key.as_ref()).into_owned(),
                a.unescape_value().map_err(xml_err)?.into_owned(),
            );
        }
        let parent = stack.last().cloned();
        match name.as_str() {
            "graphml" => {
                if parent.is_some() || root_seen {
                    return Err(bad("graphml must be the single root".into()));
                }
                root_seen = true;
                if attrs.get("xmlns").map(String::as_str) != Some(GRAPHML_NS) {
                    return Err(bad("missing GraphML namespace".into()));
                }
            }
            "key" => {
                if parent.as_deref() != Some("graphml") {
                    return Err(bad("key outside graphml".into()));
                }
                let id = attrs.get("id").ok_or_else(|| bad("key without id".into()))?;
                let domain = attrs.get("for").cloned().unwrap_or_else(|| "all".into());
                if !["graph", "node", "edge", "all"].contains(&domain.as_str()) {
                    return Err(bad(format!("key {id} has invalid domain {domain}")));
                }
                if let Some(ty) = attrs.get("attr.type") {
                    if !["boolean", "int", "long", "float", "double", "string"].contains(&ty.as_str()) {
                        return Err(bad(format!("key {id} has invalid type {ty}")));
                    }
                }
                if keys.insert(id.clone(), domain).is_some() {
                    return Err(bad(format!("duplicate key {id}")));
                }
            }
            "graph" => {
                if parent.as_deref() != Some("graphml") {
                    return Err(bad("graph outside graphml".into()));
                }
                match attrs.get("edgedefault").map(String::as_str) {
                    Some("directed") | Some("undirected") => {}
                    _ => return Err(bad("graph needs edgedefault".into())),
                }
            }
            "node" => {
                if parent.as_deref() != Some("graph") {
                    return Err(bad("node outside graph".into()));
                }
                let id = attrs.get("id").ok_or_else(|| bad("node without id".into()))?;
                if !nodes.insert(id.clone()) {
                    return Err(bad(format!("duplicate node id {id}")));
                }
            }
            "edge" => {
                if parent.as_deref() != Some("graph") {
                    return Err(bad("edge outside graph".into()));
                }
                let s = attrs.get("source").ok_or_else(|| bad("edge without source".into()))?;
                let t = attrs.get("target").ok_or_else(|| bad("edge without target".into()))?;
                edges.push((s.clone(), t.clone()));
            }
            "data" => {
                let key = attrs.get("key").ok_or_else(|| bad("data without key".into()))?;
                let domain = keys.get(key).ok_or_else(|| bad(format!("undeclared key {key}")))?;
                let owner = parent.clone().unwrap_or_default();
                if domain != "all" && *domain != owner {
                    return Err(bad(format!("key {key} used on {owner}")));
                }
            }
            other => return Err(bad(format!("unexpected element {other}"))),
        }
        if !empty {
            stack.push(name);
        }
    }
    if !root_seen {
        return Err(bad("no graphml root".into()));
    }
    for (s, t) in edges {
        if !nodes.contains(&s) || !nodes.contains(&t) {
            return Err(bad(format!("edge {s} -> {t} references a missing node")));
        }
    }
    Ok(())
}

pub const METRICS_HEADER: &str = "frame,time_s,area_px,velocity_px_s,ff_interface_px,fs_interface_px,fingers";

pub fn metrics_to_csv(rows: &[FrameMetrics]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(METRICS_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
}

pub fn metrics_from_csv(text: &str) -> Result<Vec<FrameMetrics>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != METRICS_HEADER {
        return Err(Error::Invalid(format!("unexpected metrics header `{}`", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn export_metrics_csv(rows: &[FrameMetrics], path: &Path) -> Result<()> {
    fs::write(path, metrics_to_csv(rows)?).map_err(|e| Error::io(path, e))
}

/// One row of `fronts.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub label: u32,
    pub time: u32,
    pub area: u64,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub ff_len: u64,
    pub fs_len: u64,
    pub bbox_x: usize,
    pub bbox_y: usize,
    pub bbox_w: usize,
    pub bbox_h: usize,
    pub velocity: f64,
}

impl From<&FlowFront> for FrontRow {
    fn from(f: &FlowFront) -> Self {
        FrontRow {
            label: f.label,
            time: f.time,
            area: f.area,
            centroid_x: f.centroid.0,
            centroid_y: f.centroid.1,
            ff_len: f.ff_interface_len,
            fs_len: f.fs_interface_len,
            bbox_x: f.bbox.x,
            bbox_y: f.bbox.y,
            bbox_w: f.bbox.w,
            bbox_h: f.bbox.h,
            velocity: f.velocity,
        }
    }
}

pub fn fronts_to_csv(fronts: &[FlowFront]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for f in fronts {
        w.serialize(FrontRow::from(f))?;
    }
    if fronts.is_empty() {
        // Serde writes the header with the first row only.
        w.write_record([
            "label", "time", "area", "centroid_x", "centroid_y", "ff_len", "fs_len", "bbox_x", "bbox_y",
            "bbox_w", "bbox_h", "velocity",
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
}

pub fn fronts_from_csv(text: &str) -> Result<Vec<FrontRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFile {
    pub path: String,
    pub role: String,
    pub sha256: String,
    pub bytes: u64,
}

/// `manifest.json` of a viewer bundle. Contains no timestamps so identical
/// runs produce identical bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dataset: String,
    pub width: usize,
    pub height: usize,
    /// Last frame index `T`; metrics cover frames `1..=T`.
    pub last_frame: u32,
    pub frame_period: f64,
    pub breakthrough_frame: Option<u32>,
    pub breakthrough_node: Option<NodeId>,
    pub inlet_region: Rect,
    pub outlet_region: Rect,
    pub layout_present: bool,
    pub simplification: String,
    pub colormap: String,
    pub colormap_period_frames: Option<u32>,
    pub highlight_frame: Option<u32>,
    /// Downsampled original frames under `frames/`, if bundled.
    #[serde(default)]
    pub frames: Option<FramesEntry>,
    pub files: Vec<BundleFile>,
}

/// Frames `0..count` stored as `frames/frame_NNNN.png`, each `factor` times
/// smaller than the input in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramesEntry {
    pub factor: u32,
    pub width: usize,
    pub height: usize,
    pub count: u32,
}

pub fn bundle_frame_path(tau: u32) -> String {
    format!("frames/frame_{tau:04}.png")
}

/// Downsampled copies of the original frames for the viewer background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameImages {
    pub factor: u32,
    pub width: usize,
    pub height: usize,
    /// PNG bytes of frames `0..=T`.
    pub png: Vec<Vec<u8>>,
}

impl FrameImages {
    /// Box-averages each frame by `factor` and encodes it as 8-bit PNG.
    pub fn encode(frames: impl IntoIterator<Item = Result<GrayFrame>>, factor: u32) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("frame downsampling factor must be at least 1".into()));
        }
        let mut out = FrameImages { factor, width: 0, height: 0, png: Vec::new() };
        for frame in frames {
            let small = frame?.downsample(factor as usize);
            (out.width, out.height) = (small.width, small.height);
            let mut buf = std::io::Cursor::new(Vec::new());
            small
                .to_luma8()
                .write_to(&mut buf, image::ImageFormat::Png)
                .map_err(|e| Error::Invalid(format!("png encoding: {e}")))?;
            out.png.push(buf.into_inner());
        }
        Ok(out)
    }
}

/// Everything the viewer bundle is made of.
#[derive(Debug, Clone, Copy)]
pub struct BundleInputs<'a> {
    pub config: &'a DatasetConfig,
    /// Raw (unquantized) time map; rendered and exported as is.
    pub time_map: &'a TimeMap,
    /// Graph shown by the viewer (usually simplified).
    pub graph: &'a DisplacementGraph,
    /// Fixed, non-simplified graph.
    pub full_graph: &'a DisplacementGraph,
    pub annotations: Annotations<'a>,
    /// Annotations for the full graph (no layout).
    pub full_annotations: Annotations<'a>,
    pub metrics: &'a [FrameMetrics],
    pub fronts: &'a [FlowFront],
    pub simplification: &'a str,
    pub highlight_frame: Option<u32>,
    pub frames: Option<&'a FrameImages>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn png_bytes(img: &image::RgbImage) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::Invalid(format!("png encoding: {e}")))?;
    Ok(out.into_inner())
}

/// Writes the bundle into a sibling temporary directory and moves it to
/// `out_dir` once every file is complete. An existing `out_dir` is replaced
/// only if it is empty or holds a previous bundle.
pub fn export_bundle(inputs: &BundleInputs<'_>, out_dir: &Path) -> Result<Manifest> {
    let cfg = inputs.config;
    let map = inputs.time_map;
    let owned: Vec<(&str, &str, Vec<u8>)> = vec![
        ("graph.json", "graph", graph_to_json(inputs.graph, &inputs.annotations)?.into_bytes()),
        (
            "graph_full.json",
            "graph-full",
            graph_to_json(inputs.full_graph, &inputs.full_annotations)?.into_bytes(),
        ),
        ("frames.csv", "frame-metrics", metrics_to_csv(inputs.metrics)?.into_bytes()),
        ("fronts.csv", "fronts", fronts_to_csv(inputs.fronts)?.into_bytes()),
        (
            "timemap.png",
            "timemap-image",
            png_bytes(&render_time_map(map, &cfg.colormap, inputs.highlight_frame)?)?,
        ),
        ("timemap.bin", "timemap", encode_time_map(map)),
        ("timemap.json", "timemap-sidecar", serde_json::to_string_pretty(&sidecar_of(map))?.into_bytes()),
    ];
    let mut files: Vec<(String, &str, &[u8])> = owned.iter().map(|(p, r, b)| (p.to_string(), *r, b.as_slice())).collect();
    if let Some(f) = inputs.frames {
        files.extend(f.png.iter().enumerate().map(|(tau, b)| (bundle_frame_path(tau as u32), "frame", b.as_slice())));
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        dataset: cfg.name.clone(),
        width: map.width,
        height: map.height,
        last_frame: map.last_frame,
        frame_period: map.frame_period,
        breakthrough_frame: inputs.annotations.breakthrough.map(|b| b.frame),
        breakthrough_node: inputs.annotations.breakthrough.map(|b| b.node),
        inlet_region: cfg.inlet_region,
        outlet_region: cfg.outlet_region,
        layout_present: inputs.annotations.layout.is_some(),
        simplification: inputs.simplification.to_string(),
        colormap: cfg.colormap.name.clone(),
        colormap_period_frames: cfg.colormap.period_frames(map.frame_period),
        highlight_frame: inputs.highlight_frame,
        frames: inputs.frames.map(|f| FramesEntry {
            factor: f.factor,
            width: f.width,
            height: f.height,
            count: f.png.len() as u32,
        }),
        files: files
            .iter()
            .map(|(path, role, bytes)| BundleFile {
                path: path.to_string(),
                role: role.to_string(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            })
            .collect(),
    };

    let tmp = staging_dir(out_dir)?;
    let result = (|| -> Result<()> {
        fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        if inputs.frames.is_some() {
            fs::create_dir_all(tmp.join("frames")).map_err(|e| Error::io(&tmp, e))?;
        }
        for (path, _, bytes) in &files {
            let p = tmp.join(path);
            let mut f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            f.write_all(bytes).map_err(|e| Error::io(&p, e))?;
        }
        let p = tmp.join(MANIFEST_FILE);
        fs::write(&p, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&p, e))?;
        replace_dir(&tmp, out_dir)
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result.map(|()| manifest)
}

fn staging_dir(out_dir: &Path) -> Result<PathBuf> {
    let name = out_dir
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("{} is not a directory name", out_dir.display())))?;
    let parent = out_dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let tmp = parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    Ok(tmp)
}

fn replace_dir(tmp: &Path, out_dir: &Path) -> Result<()> {
    if out_dir.exists() {
        let empty = fs::read_dir(out_dir).map_err(|e| Error::io(out_dir, e))?.next().is_none();
        if !empty && !out_dir.join(MANIFEST_FILE).is_file() {
            return Err(Error::Bundle(format!(
                "{} exists and is not a bundle; refusing to replace it",
                out_dir.display()
            )));
        }
        fs::remove_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    }
    fs::rename(tmp, out_dir).map_err(|e| Error::io(out_dir, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let p = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Checks every listed file against its hash and the cross-file frame
/// ranges; returns the manifest on success.
pub fn verify_bundle(dir: &Path) -> Result<Manifest> {
    let manifest = read_manifest(dir)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Bundle(format!("unsupported manifest version {}", manifest.version)));
    }
    let mut contents = BTreeMap::new();
    for f in &manifest.files {
        if f.path.contains("..") || Path::new(&f.path).is_absolute() {
            return Err(Error::Bundle(format!("file path {} leaves the bundle", f.path)));
        }
        let p = dir.join(&f.path);
        let bytes = fs::read(&p).map_err(|_| Error::Bundle(format!("missing file {}", f.path)))?;
        if sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
            return Err(Error::Bundle(format!("hash mismatch for {}", f.path)));
        }
        contents.insert(f.path.as_str(), bytes);
    }
    let text = |name: &str| -> Result<String> {
        let b = contents.get(name).ok_or_else(|| Error::Bundle(format!("manifest lacks {name}")))?;
        String::from_utf8(b.clone()).map_err(|_| Error::Bundle(format!("{name} is not UTF-8")))
    };
    let rows = metrics_from_csv(&text("frames.csv")?)?;
    let frames: Vec<u32> = rows.iter().map(|r| r.frame).collect();
    if frames != (1..=manifest.last_frame).collect::<Vec<_>>() {
        return Err(Error::Bundle("frames.csv does not cover frames 1..=T".into()));
    }
    let graph: GraphFile = serde_json::from_str(&text("graph.json")?)?;
    if graph.layout_present != manifest.layout_present {
        return Err(Error::Bundle("layout flag differs between manifest and graph".into()));
    }
    if let Some(n) = graph.nodes.iter().find(|n| n.node.time() > manifest.last_frame) {
        return Err(Error::Bundle(format!("node {} lies after the last frame", n.node.id)));
    }
    if let Some(f) = &manifest.frames {
        if f.count != manifest.last_frame + 1 {
            return Err(Error::Bundle(format!("{} bundled frames for frames 0..={}", f.count, manifest.last_frame)));
        }
        for tau in 0..f.count {
            let path = bundle_frame_path(tau);
            let bytes = contents.get(path.as_str()).ok_or_else(|| Error::Bundle(format!("manifest lacks {path}")))?;
            let dims = image::ImageReader::new(std::io::Cursor::new(bytes))
                .with_guessed_format()
                .ok()
                .and_then(|r| r.into_dimensions().ok());
            if dims != Some((f.width as u32, f.height as u32)) {
                return Err(Error::Bundle(format!("{path} is not a {}x{} image", f.width, f.height)));
            }
        }
    }
    for row in fronts_from_csv(&text("fronts.csv")?)? {
        if row.time == 0 || row.time > manifest.last_frame {
            return Err(Error::Bundle(format!("front {} has frame {} out of range", row.label, row.time)));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::graph;

    fn sample() -> DisplacementGraph {
        let mut g = graph(&[(1, 1, 10), (2, 2, 20)], &[(1, 2)], &[(1, 2)]);
        let n = g.node_mut(2).unwrap();
        n.position = (0.1 + 0.2, 1.0 / 3.0);
        n.front.velocity = std::f64::consts::PI;
        g
    }

    #[test]
    fn empty_graph_exports() {
        let g = DisplacementGraph::empty(1.0);
        let ann = Annotations::default();
        let (back, layout) = graph_from_json(&graph_to_json(&g, &ann).unwrap()).unwrap();
        assert_eq!(back, g);
        assert!(layout.is_none());
        check_graphml(&graph_to_graphml(&g, &ann).unwrap()).unwrap();
        assert!(graph_to_dot(&g, &ann).starts_with("digraph"));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let g = sample();
        let layout = LayoutResult {
            positions: [(1, (0.0, 0.0)), (2, (0.1 + 0.2, -1.0 / 3.0))].into_iter().collect(),
            pinned: [1].into_iter().collect(),
        };
        let ann = Annotations {
            layout: Some(&layout),
            main_channel: &[1, 2],
            ..Default::default()
        };
        let (back, l2) = graph_from_json(&graph_to_json(&g, &ann).unwrap()).unwrap();
        assert_eq!(back, g);
        assert_eq!(l2, Some(layout));
    }

    #[test]
    fn graphml_is_well_formed() {
        let g = sample();
        let text = graph_to_graphml(&g, &Annotations::default()).unwrap();
        check_graphml(&text).unwrap();
        assert!(text.contains("edgedefault=\"directed\""));
        let broken = text.replace("target=\"n2\"", "target=\"n9\"");
        assert!(check_graphml(&broken).is_err());
        let undeclared = text.replacen("key=\"n_time\"", "key=\"n_nope\"", 1);
        assert!(check_graphml(&undeclared).is_err());
    }

    fn rows(n: u32) -> Vec<FrameMetrics> {
        (1..=n)
            .map(|frame| FrameMetrics {
                frame,
                time_s: frame as f64 * 0.1,
                area_px: if frame == 2 { 0 } else { 100 + frame as u64 },
                velocity_px_s: 1.0 / 3.0 * frame as f64,
                ff_interface_px: 7,
                fs_interface_px: 1_000_000,
                fingers: frame,
            })
            .collect()
    }

    #[test]
    fn metrics_csv_layout_and_round_trip() {
        let r = rows(3);
        let text = metrics_to_csv(&r).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
        assert!(text.contains("2,0.2,0,"), "{text}");
        assert!(!text.contains("1,000,000"));
        assert_eq!(metrics_from_csv(&text).unwrap(), r);
    }

    #[test]
    fn fronts_csv_round_trip() {
        let g = sample();
        let fronts: Vec<FlowFront> = g.nodes().map(|n| n.front.clone()).collect();
        let back = fronts_from_csv(&fronts_to_csv(&fronts).unwrap()).unwrap();
        assert_eq!(back, fronts.iter().map(FrontRow::from).collect::<Vec<_>>());
        assert_eq!(fronts_to_csv(&[]).unwrap().lines().count(), 1);
    }

    fn write_sample_bundle(dir: &Path, with_layout: bool) -> Manifest {
        write_sample_bundle_with(dir, with_layout, None)
    }

    fn write_sample_bundle_with(dir: &Path, with_layout: bool, frames: Option<&FrameImages>) -> Manifest {
        let g = sample();
        let layout = LayoutResult {
            positions: [(1, (0.0, 0.0)), (2, (5.0, 0.0))].into_iter().collect(),
            pinned: [1, 2].into_iter().collect(),
        };
        let cfg = DatasetConfig::new(Rect::new(0, 0, 1, 2), Rect::new(2, 0, 1, 2));
        let map = TimeMap::from_raw(3, 2, 1.0, 2, vec![1, 2, 2, 1, 2, 2]).unwrap();
        let metrics = rows(2);
        let fronts: Vec<FlowFront> = g.nodes().map(|n| n.front.clone()).collect();
        let ann = Annotations {
            layout: with_layout.then_some(&layout),
            breakthrough: Some(Breakthrough { frame: 2, node: 2 }),
            main_channel: &[1, 2],
            jumps: None,
        };
        let inputs = BundleInputs {
            config: &cfg,
            time_map: &map,
            graph: &g,
            full_graph: &g,
            annotations: ann,
            full_annotations: Annotations { layout: None, ..ann },
            metrics: &metrics,
            fronts: &fronts,
            simplification: "off",
            highlight_frame: None,
            frames,
        };
        export_bundle(&inputs, dir).unwrap()
    }

    #[test]
    fn bundle_verifies_and_detects_tampering() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("bundle");
        let m = write_sample_bundle(&dir, true);
        assert!(m.layout_present);
        assert_eq!(verify_bundle(&dir).unwrap(), m);
        for f in &m.files {
            assert!(dir.join(&f.path).is_file());
        }
        fs::write(dir.join("fronts.csv"), "label\n").unwrap();
        assert!(matches!(verify_bundle(&dir), Err(Error::Bundle(_))));
    }

    #[test]
    fn bundled_frames_are_listed_and_checked() {
        let frames = (0..=2).map(|t| Ok(GrayFrame::filled(3, 2, t as f32 / 2.0)));
        let images = FrameImages::encode(frames, 2).unwrap();
        assert_eq!((images.width, images.height, images.png.len()), (2, 1, 3));
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("bundle");
        let m = write_sample_bundle_with(&dir, true, Some(&images));
        assert_eq!(m.frames, Some(FramesEntry { factor: 2, width: 2, height: 1, count: 3 }));
        assert_eq!(m.files.iter().filter(|f| f.role == "frame").count(), 3);
        assert!(dir.join("frames/frame_0002.png").is_file());
        verify_bundle(&dir).unwrap();

        let mut short = images.clone();
        short.png.pop();
        write_sample_bundle_with(&dir, true, Some(&short));
        assert!(matches!(verify_bundle(&dir), Err(Error::Bundle(_))));
        assert!(FrameImages::encode(std::iter::empty(), 0).is_err());
    }

    #[test]
    fn bundle_without_layout_says_so() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("bundle");
        let m = write_sample_bundle(&dir, false);
        assert!(!m.layout_present);
        let (_, layout) = graph_from_json(&fs::read_to_string(dir.join("graph.json")).unwrap()).unwrap();
        assert!(layout.is_none());
        verify_bundle(&dir).unwrap();
    }

    #[test]
    fn bundles_are_reproducible_and_replaceable() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("bundle");
        let a = write_sample_bundle(&dir, true);
        let b = write_sample_bundle(&dir, true);
        assert_eq!(a, b);
        let leftovers: Vec<_> = fs::read_dir(tmp.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn refuses_to_replace_foreign_directory() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("precious.txt"), "keep").unwrap();
        let g = sample();
        let cfg = DatasetConfig::new(Rect::new(0, 0, 1, 2), Rect::new(2, 0, 1, 2));
        let map = TimeMap::from_raw(3, 2, 1.0, 2, vec![1, 2, 2, 1, 2, 2]).unwrap();
        let inputs = BundleInputs {
            config: &cfg,
            time_map: &map,
            graph: &g,
            full_graph: &g,
            annotations: Annotations::default(),
            full_annotations: Annotations::default(),
            metrics: &rows(2),
            fronts: &[],
            simplification: "off",
            highlight_frame: None,
            frames: None,
        };
        assert!(export_bundle(&inputs, tmp.path()).is_err());
        assert!(tmp.path().join("precious.txt").is_file());
        let names: Vec<String> = fs::read_dir(tmp.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["precious.txt".to_string()]);
    }
}
