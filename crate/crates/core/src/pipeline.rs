//! End-to-end orchestration of the stages and the run report.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{export_bundle, Annotations, BundleInputs, FrameImages, Manifest};
use crate::fronts::{compute_front_metrics, extract_fronts, quantize_small_fronts, FlowFront, FrontLabelMap};
use crate::graph::{
    build_graph, frame_metrics, Breakthrough, DisplacementGraph, FixTrace, FrameMetrics, MainChannel, NodeId,
    SimplifyMode, SimplifyOptions,
};
use crate::ingestion::{list_frame_paths, load_frame, segment_frame, DatasetConfig, Finding, GrayFrame, SeriesValidator};
use crate::layout::{layout_breakthrough, LayoutParams, LayoutResult};
use crate::timemap::{TimeMap, TimeMapBuilder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// `None` leaves the graph unsimplified.
    pub simplify: Option<SimplifyMode>,
    pub keep_jumps: bool,
    pub keep_breakthrough: bool,
    pub highlight_frame: Option<u32>,
    pub layout: LayoutParams,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            simplify: Some(SimplifyMode::Combine),
            keep_jumps: false,
            keep_breakthrough: false,
            highlight_frame: None,
            layout: LayoutParams::default(),
        }
    }
}

impl PipelineOptions {
    pub fn simplification_name(&self) -> &'static str {
        match self.simplify {
            None => "off",
            Some(SimplifyMode::Combine) => "combine",
            Some(SimplifyMode::Remove) => "remove",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Wall-clock timings of the stages in execution order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings(pub Vec<StageTiming>);

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn total(&self) -> f64 {
        self.0.iter().map(|t| t.seconds).sum()
    }
}

/// Counts along the pipeline, in the order of the stages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub invaded_pixels: usize,
    pub fronts_raw: usize,
    pub fronts_quantized: usize,
    pub quantize_iterations: u32,
    pub nodes_raw: usize,
    pub edges_raw: usize,
    pub fixes: Option<FixTrace>,
    pub nodes_fixed: usize,
    pub edges_fixed: usize,
    pub nodes_combined: usize,
    pub nodes_removed: usize,
    pub jump_nodes: usize,
    pub main_channel_nodes: usize,
}

/// Time map plus the validation findings collected while it was built.
#[derive(Debug, Clone)]
pub struct TimeMapStage {
    pub map: TimeMap,
    pub findings: Vec<Finding>,
}

/// Streams the frames of `dir` into the time map without holding the
/// series in memory.
pub fn time_map_from_dir(dir: &Path, config: &DatasetConfig) -> Result<TimeMapStage> {
    let paths = list_frame_paths(dir)?;
    if paths.len() < 2 {
        return Err(Error::Invalid(format!("{}: a series needs at least two frames", dir.display())));
    }
    let mut frames = paths.iter().map(|p| load_frame(p));
    time_map_from_frames(&mut frames, config)
}

/// Builds the time map from frames `0, 1, …, T` in order, validating as it goes.
pub fn time_map_from_frames(
    frames: &mut dyn Iterator<Item = Result<GrayFrame>>,
    config: &DatasetConfig,
) -> Result<TimeMapStage> {
    config.validate()?;
    let mut builder = TimeMapBuilder::new(config.threshold_beta, config.frame_period);
    let mut validator: Option<SeriesValidator<'_>> = None;
    for frame in frames {
        let frame = frame?;
        let v = validator.get_or_insert_with(|| SeriesValidator::new(config, frame.width, frame.height));
        v.push(&segment_frame(&frame, config.threshold_beta));
        builder.push(&frame)?;
    }
    let map = builder.finish()?;
    if map.last_frame < 1 {
        return Err(Error::Invalid("a series needs at least two frames".into()));
    }
    let report = validator.expect("at least one frame").finish();
    if report.has_errors() {
        let msg: Vec<String> = report.findings.iter().map(|f| f.message.clone()).collect();
        return Err(Error::Config(msg.join("; ")));
    }
    Ok(TimeMapStage {
        map,
        findings: report.findings,
    })
}

/// Results of the graph stages.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub quantized_map: TimeMap,
    pub labels: FrontLabelMap,
    pub fronts: Vec<FlowFront>,
    /// Graph after the noise fixes, not simplified.
    pub fixed: DisplacementGraph,
    /// Graph shown to users; equals `fixed` when simplification is off.
    pub display: DisplacementGraph,
    pub metrics: Vec<FrameMetrics>,
    pub breakthrough: Option<Breakthrough>,
    /// Main channel in the fixed graph.
    pub main_channel: Option<MainChannel>,
    /// Main channel mapped onto the display graph.
    pub display_channel: Vec<NodeId>,
    pub jumps: BTreeSet<NodeId>,
    pub layout: Option<LayoutResult>,
    pub trace: StageTrace,
}

impl Analysis {
    pub fn annotations(&self) -> Annotations<'_> {
        Annotations {
            layout: self.layout.as_ref(),
            breakthrough: self.breakthrough,
            main_channel: &self.display_channel,
            jumps: Some(&self.jumps),
        }
    }

    pub fn full_annotations(&self) -> Annotations<'_> {
        Annotations {
            layout: None,
            breakthrough: self.breakthrough,
            main_channel: self.main_channel.as_ref().map(|c| c.nodes.as_slice()).unwrap_or(&[]),
            jumps: Some(&self.jumps),
        }
    }
}

/// Runs fronts, quantization, graph construction, fixes, breakthrough and
/// main channel, simplification, frame metrics and (if `with_layout` and a
/// breakthrough exists) the layout.
pub fn analyze(
    map: &TimeMap,
    config: &DatasetConfig,
    options: &PipelineOptions,
    with_layout: bool,
    timings: &mut Timings,
) -> Result<Analysis> {
    let mut trace = StageTrace {
        invaded_pixels: map.invaded_pixels(),
        ..Default::default()
    };
    let (labels, fronts) = timings.time("fronts", || extract_fronts(map));
    trace.fronts_raw = fronts.len();
    let q = timings.time("quantize", || quantize_small_fronts(map, &labels, &fronts, config.gamma));
    trace.fronts_quantized = q.fronts.len();
    trace.quantize_iterations = q.iterations;
    let fronts = timings.time("front_metrics", || {
        compute_front_metrics(&q.labels, &q.map, config.frame_period)
    });

    let mut graph = timings.time("graph", || build_graph(&q.labels, &fronts, &q.map));
    trace.nodes_raw = graph.node_count();
    trace.edges_raw = graph.edge_count();
    let inlet: BTreeSet<NodeId> = q.labels.fronts_in(&config.inlet_region);
    let outlet: BTreeSet<NodeId> = q.labels.fronts_in(&config.outlet_region);
    let fixes = timings.time("fixes", || graph.apply_noise_fixes(&inlet));
    trace.fixes = Some(fixes);
    trace.nodes_fixed = graph.node_count();
    trace.edges_fixed = graph.edge_count();

    let breakthrough = graph.detect_breakthrough(&outlet);
    let main_channel = match breakthrough {
        Some(b) => Some(timings.time("main_channel", || graph.extract_main_channel(b.node))?),
        None => None,
    };
    trace.main_channel_nodes = main_channel.as_ref().map_or(0, |c| c.nodes.len());
    let jumps = graph.detect_velocity_jumps(config.jump_ratio);
    trace.jump_nodes = jumps.len();

    let base = SimplifyOptions {
        mode: None,
        keep_frame: if options.keep_breakthrough { breakthrough.map(|b| b.frame) } else { None },
        keep_nodes: if options.keep_jumps { jumps.clone() } else { BTreeSet::new() },
    };
    let (combined, removed) = timings.time("simplify", || {
        let c = graph.simplify(&SimplifyOptions { mode: Some(SimplifyMode::Combine), ..base.clone() });
        let r = graph.simplify(&SimplifyOptions { mode: Some(SimplifyMode::Remove), ..base.clone() });
        (c, r)
    });
    trace.nodes_combined = combined.node_count();
    trace.nodes_removed = removed.node_count();
    let display = match options.simplify {
        None => graph.clone(),
        Some(SimplifyMode::Combine) => combined,
        Some(SimplifyMode::Remove) => removed,
    };
    let display_channel = main_channel
        .as_ref()
        .map(|c| map_channel(&c.nodes, &display))
        .unwrap_or_default();

    let metrics = timings.time("frame_metrics", || frame_metrics(&graph, &fronts, map.last_frame));

    let layout = if with_layout && !display_channel.is_empty() {
        let channel = MainChannel {
            nodes: display_channel.clone(),
            area: main_channel.as_ref().map_or(0, |c| c.area),
        };
        Some(timings.time("layout", || layout_breakthrough(&display, &channel, &options.layout))?)
    } else {
        None
    };

    Ok(Analysis {
        quantized_map: q.map,
        labels: q.labels,
        fronts,
        fixed: graph,
        display,
        metrics,
        breakthrough,
        main_channel,
        display_channel,
        jumps,
        layout,
        trace,
    })
}

/// Maps channel nodes of the fixed graph onto the simplified graph: a node
/// stays if it survived, otherwise it is represented by the combined node
/// whose chain contains it, or dropped if its chain was removed.
pub fn map_channel(channel: &[NodeId], display: &DisplacementGraph) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = Vec::new();
    for &n in channel {
        let rep = if display.contains(n) {
            Some(n)
        } else {
            display
                .nodes()
                .find(|d| d.chain.as_ref().is_some_and(|c| c.nodes.iter().any(|m| m.id == n)))
                .map(|d| d.id)
        };
        if let Some(r) = rep {
            if out.last() != Some(&r) {
                out.push(r);
            }
        }
    }
    out
}

/// Stages a run can stop after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    TimeMap,
    Graph,
    Layout,
    Export,
    All,
}

/// Report written next to the outputs of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub stage: Stage,
    pub config: DatasetConfig,
    pub options: PipelineOptions,
    pub width: usize,
    pub height: usize,
    pub last_frame: u32,
    pub timings: Timings,
    pub total_seconds: f64,
    pub trace: StageTrace,
    pub breakthrough: Option<Breakthrough>,
    pub main_channel: Option<Vec<NodeId>>,
    pub warnings: Vec<Finding>,
    pub outputs: Vec<PathBuf>,
}

/// Writes the bundle of a completed analysis.
pub fn write_bundle(
    map: &TimeMap,
    analysis: &Analysis,
    config: &DatasetConfig,
    options: &PipelineOptions,
    frames: Option<&FrameImages>,
    dir: &Path,
) -> Result<Manifest> {
    let inputs = BundleInputs {
        config,
        time_map: map,
        graph: &analysis.display,
        full_graph: &analysis.fixed,
        annotations: analysis.annotations(),
        full_annotations: analysis.full_annotations(),
        metrics: &analysis.metrics,
        fronts: &analysis.fronts,
        simplification: options.simplification_name(),
        highlight_frame: options.highlight_frame,
        frames,
    };
    export_bundle(&inputs, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{generate_fixture, FixtureKind, FixtureParams};

    fn run(kind: FixtureKind) -> (TimeMap, Analysis) {
        let fx = generate_fixture(kind, &FixtureParams::default()).unwrap();
        let mut frames = (0..=fx.last_frame()).map(|t| Ok(fx.frame(t)));
        let stage = time_map_from_frames(&mut frames, &fx.config).unwrap();
        let a = analyze(&stage.map, &fx.config, &PipelineOptions::default(), true, &mut Timings::default()).unwrap();
        (stage.map, a)
    }

    #[test]
    fn straight_channel_end_to_end() {
        let (_, a) = run(FixtureKind::StraightChannel);
        assert_eq!(a.breakthrough.map(|b| b.frame), Some(17));
        let mc = a.main_channel.unwrap();
        assert_eq!(mc.nodes.len(), 17);
        assert!(a.layout.is_some());
        for e in a.fixed.edges() {
            assert!((e.velocity - 4.0).abs() < 1e-12, "edge {} -> {}: {}", e.src, e.dst, e.velocity);
        }
        // Source, one combined representative, sink.
        assert_eq!(a.display.node_count(), 3);
        assert_eq!(a.display_channel.len(), 3);
        assert_eq!(a.trace.nodes_removed, 2);
    }

    #[test]
    fn counts_shrink_along_the_stages() {
        let (_, a) = run(FixtureKind::GridPorous(crate::fixtures::GrainShape::Circular));
        let t = &a.trace;
        assert!(t.fronts_raw >= t.fronts_quantized);
        assert!(t.nodes_raw >= t.nodes_fixed);
        assert!(t.nodes_fixed >= t.nodes_combined);
        assert!(t.nodes_combined >= t.nodes_removed);
    }

    #[test]
    fn layout_needs_breakthrough() {
        let fx = generate_fixture(FixtureKind::RetreatingBlob, &FixtureParams::default()).unwrap();
        let mut frames = (0..=fx.last_frame()).map(|t| Ok(fx.frame(t)));
        let stage = time_map_from_frames(&mut frames, &fx.config).unwrap();
        let a = analyze(&stage.map, &fx.config, &PipelineOptions::default(), true, &mut Timings::default()).unwrap();
        assert!(a.breakthrough.is_none());
        assert!(a.layout.is_none());
        assert!(stage.findings.iter().any(|f| f.message.contains("retreat")));
    }
}
