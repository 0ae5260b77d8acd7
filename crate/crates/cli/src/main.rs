//! `porograph`: time maps, displacement graphs and viewer bundles from
//! drainage image series.
//!
//! Exit codes: 0 success, 1 configuration error, 2 input/output error,
//! 3 no breakthrough when a stage needs one.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use porograph::export::{export_graph, export_metrics_csv, fronts_to_csv, graph_to_json, verify_bundle, FrameImages, GraphFormat};
use porograph::fixtures::{generate_fixture, FixtureKind, FixtureParams, CONFIG_FILE};
use porograph::graph::SimplifyMode;
use porograph::ingestion::{list_frame_paths, load_frame};
use porograph::pipeline::{analyze, time_map_from_dir, write_bundle, PipelineOptions, PipelineRun, Stage, Timings};
use porograph::timemap::{render_time_map, write_time_map, Period};
use porograph::{DatasetConfig, Error, LayoutParams, Rect};

const EXIT_CONFIG: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_NO_BREAKTHROUGH: u8 = 3;

#[derive(Parser)]
#[command(name = "porograph", version, about = "Flow-front analysis of two-phase drainage image series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and render the time map.
    Timemap(RunArgs),
    /// Fronts, displacement graph, noise fixes and simplification.
    Graph(RunArgs),
    /// Everything up to the breakthrough layout; fails without breakthrough.
    Layout(RunArgs),
    /// Write the viewer bundle and the graph in the requested formats.
    Export {
        #[command(flatten)]
        run: RunArgs,
        /// Extra graph files to write next to the bundle.
        #[arg(long = "format", value_enum)]
        formats: Vec<FormatArg>,
    },
    /// Run every stage and write all outputs.
    All(RunArgs),
    /// Generate a synthetic series with its ground truth.
    Fixture(FixtureArgs),
    /// Check the hashes and frame ranges of a bundle.
    Verify {
        bundle: PathBuf,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Directory holding the frames (and optionally `config.txt`).
    input: PathBuf,
    /// Configuration file; defaults to `<input>/config.txt` when present.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<u32>,
    /// Inlet rectangle `x,y,w,h`.
    #[arg(long)]
    inlet: Option<Rect>,
    /// Outlet rectangle `x,y,w,h`.
    #[arg(long)]
    outlet: Option<Rect>,
    /// Seconds per frame.
    #[arg(long)]
    frame_period: Option<f64>,
    #[arg(long)]
    jump_ratio: Option<f64>,
    #[arg(long)]
    colormap: Option<String>,
    /// Colour period in frames, or `inf` for a non-periodic map.
    #[arg(long, conflicts_with = "period_seconds")]
    period_frames: Option<String>,
    /// Colour period in seconds.
    #[arg(long)]
    period_seconds: Option<f64>,
    /// Paint the pixels of this frame in the highlight colour.
    #[arg(long)]
    highlight_frame: Option<u32>,
    #[arg(long, value_enum, default_value_t = SimplifyArg::Combine)]
    simplify: SimplifyArg,
    /// Keep velocity-jump nodes when simplifying.
    #[arg(long)]
    keep_jumps: bool,
    /// Keep nodes of the breakthrough frame when simplifying.
    #[arg(long)]
    keep_breakthrough: bool,
    /// Seed of the layout.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Layout iterations.
    #[arg(long, default_value_t = 1000)]
    iterations: u32,
    /// Add the input frames to the bundle, shrunk by this factor.
    #[arg(long, value_name = "FACTOR")]
    bundle_frames: Option<u32>,
}

#[derive(Copy, Clone, ValueEnum)]
enum SimplifyArg {
    Combine,
    Remove,
    Off,
}

#[derive(Copy, Clone, ValueEnum)]
enum FormatArg {
    Json,
    Graphml,
    Dot,
}

impl From<FormatArg> for GraphFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => GraphFormat::Json,
            FormatArg::Graphml => GraphFormat::GraphMl,
            FormatArg::Dot => GraphFormat::Dot,
        }
    }
}

#[derive(Args)]
struct FixtureArgs {
    /// straight-channel, y-merge, dead-end, wide-split, pinned-jump,
    /// retreating-blob, sub-pixel-noise, grid-porous:{circular,octagonal,triangular}
    kind: FixtureKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    frame_period: f64,
    /// Size and length of the grid-porous fixtures.
    #[arg(long, default_value_t = 320)]
    width: usize,
    #[arg(long, default_value_t = 200)]
    height: usize,
    #[arg(long, default_value_t = 90)]
    frames: u32,
}

/// A failed run and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_CONFIG,
            Error::NoBreakthrough => EXIT_NO_BREAKTHROUGH,
            _ => EXIT_IO,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Timemap(a) => run(&a, Stage::TimeMap, &[]),
        Command::Graph(a) => run(&a, Stage::Graph, &[]),
        Command::Layout(a) => run(&a, Stage::Layout, &[]),
        Command::Export { run: a, formats } => {
            let formats: Vec<GraphFormat> = formats.into_iter().map(Into::into).collect();
            run(&a, Stage::Export, &formats)
        }
        Command::All(a) => run(&a, Stage::All, &[GraphFormat::GraphMl, GraphFormat::Dot]),
        Command::Fixture(a) => fixture(&a),
        Command::Verify { bundle } => verify_bundle(&bundle).map_err(Failure::from).map(|m| {
            println!("{} files verified in {}", m.files.len(), bundle.display());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(a: &RunArgs) -> Result<DatasetConfig, Error> {
    let path = a.config.clone().or_else(|| {
        let p = a.input.join(CONFIG_FILE);
        p.is_file().then_some(p)
    });
    let mut cfg = match path {
        Some(p) => DatasetConfig::load(&p)?,
        None => {
            let (Some(inlet), Some(outlet)) = (a.inlet, a.outlet) else {
                return Err(Error::Config("no config file; --inlet and --outlet are required".into()));
            };
            DatasetConfig::new(inlet, outlet)
        }
    };
    // Flags win over the file.
    let set = |cfg: &mut DatasetConfig, k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(k, &v));
    set(&mut cfg, "name", a.name.clone())?;
    set(&mut cfg, "beta", a.beta.map(|v| v.to_string()))?;
    set(&mut cfg, "gamma", a.gamma.map(|v| v.to_string()))?;
    set(&mut cfg, "inlet", a.inlet.map(|v| v.to_string()))?;
    set(&mut cfg, "outlet", a.outlet.map(|v| v.to_string()))?;
    set(&mut cfg, "frame_period", a.frame_period.map(|v| v.to_string()))?;
    set(&mut cfg, "jump_ratio", a.jump_ratio.map(|v| v.to_string()))?;
    set(&mut cfg, "colormap", a.colormap.clone())?;
    set(&mut cfg, "period_frames", a.period_frames.clone())?;
    if let Some(s) = a.period_seconds {
        cfg.colormap.period = Period::Seconds(s);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn options(a: &RunArgs) -> PipelineOptions {
    PipelineOptions {
        simplify: match a.simplify {
            SimplifyArg::Combine => Some(SimplifyMode::Combine),
            SimplifyArg::Remove => Some(SimplifyMode::Remove),
            SimplifyArg::Off => None,
        },
        keep_jumps: a.keep_jumps,
        keep_breakthrough: a.keep_breakthrough,
        highlight_frame: a.highlight_frame,
        layout: LayoutParams {
            iterations: a.iterations,
            seed: a.seed,
            ..LayoutParams::default()
        },
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(a: &RunArgs, stage: Stage, formats: &[GraphFormat]) -> Result<(), Failure> {
    let config = load_config(a)?;
    let opts = options(a);
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    let mut timings = Timings::default();
    let tm = timings.time("timemap", || time_map_from_dir(&a.input, &config))?;
    config.validate_bounds(tm.map.width, tm.map.height)?;
    let map = tm.map;
    let mut outputs = Vec::new();
    let mut report = PipelineRun {
        stage,
        config: config.clone(),
        options: opts.clone(),
        width: map.width,
        height: map.height,
        last_frame: map.last_frame,
        timings: Timings::default(),
        total_seconds: 0.0,
        trace: Default::default(),
        breakthrough: None,
        main_channel: None,
        warnings: tm.findings,
        outputs: Vec::new(),
    };

    let mut missing_breakthrough = false;
    if stage == Stage::TimeMap {
        let png = a.out.join("timemap.png");
        render_time_map(&map, &config.colormap, opts.highlight_frame)?
            .save(&png)
            .map_err(|e| Error::Invalid(format!("{}: {e}", png.display())))?;
        write_time_map(&map, &a.out.join("timemap.bin"), &a.out.join("timemap.json"))?;
        outputs.extend([png, a.out.join("timemap.bin"), a.out.join("timemap.json")]);
    } else {
        let with_layout = stage != Stage::Graph;
        let analysis = analyze(&map, &config, &opts, with_layout, &mut timings)?;
        report.trace = analysis.trace.clone();
        report.breakthrough = analysis.breakthrough;
        report.main_channel = analysis.main_channel.as_ref().map(|c| c.nodes.clone());
        missing_breakthrough = analysis.breakthrough.is_none() && stage != Stage::Graph && stage != Stage::Export;

        let graph_path = a.out.join("graph.json");
        write(&graph_path, graph_to_json(&analysis.display, &analysis.annotations())?)?;
        outputs.push(graph_path);
        if stage == Stage::Graph || stage == Stage::Layout {
            let full = a.out.join("graph_full.json");
            write(&full, graph_to_json(&analysis.fixed, &analysis.full_annotations())?)?;
            let frames = a.out.join("frames.csv");
            export_metrics_csv(&analysis.metrics, &frames)?;
            let fronts = a.out.join("fronts.csv");
            write(&fronts, fronts_to_csv(&analysis.fronts)?)?;
            outputs.extend([full, frames, fronts]);
        }
        if stage == Stage::Export || stage == Stage::All {
            let dir = a.out.join("bundle");
            timings.time("export", || {
                let frames = match a.bundle_frames {
                    Some(factor) => {
                        let paths = list_frame_paths(&a.input)?;
                        Some(FrameImages::encode(paths.iter().map(|p| load_frame(p)), factor)?)
                    }
                    None => None,
                };
                write_bundle(&map, &analysis, &config, &opts, frames.as_ref(), &dir)
            })?;
            outputs.push(dir);
            for &f in formats {
                let p = a.out.join(format!("graph.{}", f.extension()));
                export_graph(&analysis.display, &analysis.annotations(), f, &p)?;
                if !outputs.contains(&p) {
                    outputs.push(p);
                }
            }
        }
    }

    report.total_seconds = timings.total();
    report.timings = timings;
    report.outputs = outputs;
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    write(&a.out.join("report.json"), &json)?;
    println!("{json}");
    for w in &report.warnings {
        eprintln!("warning: {}", w.message);
    }
    if missing_breakthrough {
        return Err(Error::NoBreakthrough.into());
    }
    Ok(())
}

fn fixture(a: &FixtureArgs) -> Result<(), Failure> {
    let params = FixtureParams {
        seed: a.seed,
        frame_period: a.frame_period,
        width: a.width,
        height: a.height,
        frames: a.frames,
    };
    let fx = generate_fixture(a.kind, &params)?;
    fx.write(&a.out)?;
    println!(
        "{} written to {} ({} frames, {}x{})",
        a.kind,
        a.out.display(),
        fx.last_frame() + 1,
        fx.width(),
        fx.height()
    );
    Ok(())
}
