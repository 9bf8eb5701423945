use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use trajcount::cluster::{featurize, purge_and_recluster, select_k, FEATURE_DIM};
use trajcount::counting::{count_tracks, run_pipeline_with, scene_tracks, TrackSource};
use trajcount::eval::evaluate;
use trajcount::io;
use trajcount::render::{render_with, Layer, Overlays, RenderSpec};
use trajcount::roi::{accumulate_grid, estimate_roi};
use trajcount::synth::generate;
use trajcount::{parse_detection_file, HyperParams};

type F = f64;

#[derive(Parser)]
#[command(name = "trajcount", version, about = "Vehicle movement counting from detection files")]
struct Cli {
    #[command(flatten)]
    params: ParamArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ParamArgs {
    /// Hyper-parameter file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one hyper-parameter; repeatable, applied after --config.
    #[arg(long = "param", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SeedArg {
    /// Clustering seed.
    #[arg(long, env = "TRAJCOUNT_SEED", default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate the region of interest.
    Roi {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track detections inside an ROI.
    Track {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        roi: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use the track ids carried by the detection records.
        #[arg(long)]
        use_external_ids: bool,
    },
    /// Cluster tracks. With --roi, also compute paths and counts.
    Cluster {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        roi: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Run the whole pipeline.
    Count {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        use_external_ids: bool,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Score a result file against ground truth.
    Eval {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Generate a synthetic scene from a scenario file.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        /// Detection file to write.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth file; defaults to `<out>.truth`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Draw a result file as SVG.
    Render {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of grid-heatmap, roi, tracks, paths, counts.
        #[arg(long, value_delimiter = ',', default_value = "roi,paths,counts")]
        layers: Vec<String>,
        /// Track file for the tracks layer.
        #[arg(long)]
        tracks: Option<PathBuf>,
        /// Detection file for the grid-heatmap layer.
        #[arg(long)]
        detections: Option<PathBuf>,
    },
}

fn load_params(a: &ParamArgs) -> anyhow::Result<HyperParams> {
    let mut p = match &a.config {
        Some(path) => HyperParams::from_config_file(path)?,
        None => HyperParams::default(),
    };
    for o in &a.overrides {
        let Some((k, v)) = o.split_once('=') else {
            bail!("--param `{o}`: expected KEY=VALUE");
        };
        p.set(k.trim(), v.trim()).map_err(|m| anyhow::anyhow!("--param {o}: {m}"))?;
    }
    p.ensure_valid()?;
    Ok(p)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    Ok(io::write_text(path, text)?)
}

fn source(external: bool) -> TrackSource {
    if external {
        TrackSource::External
    } else {
        TrackSource::Iou
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let p = load_params(&cli.params)?;
    match cli.cmd {
        Cmd::Roi { detections, out } => {
            let d = parse_detection_file::<F>(&detections, &p)?;
            let est = estimate_roi(&d, &p)?;
            write(&out, &io::write_roi(d.frame_geometry, &est.roi))
        }
        Cmd::Track { detections, roi, out, use_external_ids } => {
            let d = parse_detection_file::<F>(&detections, &p)?;
            let (_, roi) = io::parse_roi::<F>(&io::read_text(&roi)?).with_context(|| roi.display().to_string())?;
            let tracks = scene_tracks(&d, &roi, &p, source(use_external_ids))?;
            write(&out, &io::write_tracks(&tracks))
        }
        Cmd::Cluster { tracks, out, roi, seed } => {
            let list = io::parse_tracks::<F>(&io::read_text(&tracks)?).with_context(|| tracks.display().to_string())?;
            match roi {
                Some(roi) => {
                    let (_, roi) =
                        io::parse_roi::<F>(&io::read_text(&roi)?).with_context(|| roi.display().to_string())?;
                    let st = count_tracks(&list, roi.grid_size, &p, seed.seed)?;
                    write(&out, &io::write_movements(&st.clusters, &st.purged_track_ids, &p, st.silhouette, list.len()))
                }
                None => {
                    let mut ids = Vec::new();
                    let mut feats: Vec<[F; FEATURE_DIM]> = Vec::new();
                    for t in &list {
                        if let Ok(f) = featurize(t, &p) {
                            ids.push(t.id);
                            feats.push(f.0);
                        }
                    }
                    let first = select_k(&feats, &p, seed.seed)?;
                    let out_ = purge_and_recluster(&first, &feats, &p, seed.seed)?;
                    let assign: Vec<(u64, usize)> =
                        out_.survivors.iter().zip(&out_.result.assignments).map(|(&i, &c)| (ids[i], c)).collect();
                    write(&out, &io::write_assignments(out_.result.k, out_.result.silhouette, &assign))
                }
            }
        }
        Cmd::Count { detections, out, use_external_ids, seed } => {
            let d = parse_detection_file::<F>(&detections, &p)?;
            let r = run_pipeline_with(&d, &p, seed.seed, source(use_external_ids))?;
            write(&out, &io::write_result(&r))
        }
        Cmd::Eval { result, truth, report } => {
            let r = io::parse_result::<F>(&io::read_text(&result)?).with_context(|| result.display().to_string())?;
            let t = io::parse_truth::<F>(&io::read_text(&truth)?).with_context(|| truth.display().to_string())?;
            let rep = evaluate(&r.roi.vertices, &r.clusters, &t)?;
            write(&report, &io::write_report(&rep))
        }
        Cmd::Synth { scenario, out, truth } => {
            let s =
                io::parse_scenario::<F>(&io::read_text(&scenario)?).with_context(|| scenario.display().to_string())?;
            let scene = generate(&s);
            let truth = truth.unwrap_or_else(|| {
                let mut t = out.clone().into_os_string();
                t.push(".truth");
                t.into()
            });
            scene.detections.write_file(&out)?;
            write(&truth, &io::write_truth(&scene.truth))
        }
        Cmd::Render { result, out, layers, tracks, detections } => {
            let r = io::parse_result::<F>(&io::read_text(&result)?).with_context(|| result.display().to_string())?;
            let layers = layers
                .iter()
                .map(|l| Layer::parse(l.trim()).ok_or_else(|| anyhow::anyhow!("unknown layer `{l}`")))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let spec = RenderSpec::with_layers(layers)?;
            let track_list = match &tracks {
                Some(t) => io::parse_tracks::<F>(&io::read_text(t)?).with_context(|| t.display().to_string())?,
                None => Vec::new(),
            };
            let grid = match &detections {
                Some(d) => Some(accumulate_grid(&parse_detection_file::<F>(d, &p)?, r.roi.grid_size)),
                None => None,
            };
            render_with(&r, &spec, Overlays { tracks: &track_list, grid: grid.as_ref() }, &out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
