use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use reseq_cli::config::{ProjectArgs, ProjectConfig};
use reseq_cli::export::export_frames;
use reseq_cli::failure::{CliResult, Failure};
use reseq_cli::pipeline::{distance_matrix, load_inputs, prune, solve, EngineSnapshot, SequenceRequest};
use reseq_cli::server::{serve, AppState};
use reseq_core::evalkit::{procedural_case, run_suite, EvalCase, ReconstructionConfig};
use reseq_core::frameset::{ingest_images, list_image_files, load_archive, save_matrix};
use reseq_core::graphseq::{build_graph, minimum_spanning_tree, SequenceKind, SequenceResult, SolverConfig};
use reseq_core::layout::{embed_2d, render_layout, EmbeddingSource, LayoutOptions, LayoutStyle};
use reseq_core::metrics::{fit_calibration, CalibrationConfig, JudgmentTriple, Metric};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "reseq", version, about = "Resequence image collections along perceptual distance")]
struct Cli {
    /// Report errors as one JSON object per line on stderr
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the pairwise distance matrix (PDM1)
    Dist {
        #[command(flatten)]
        project: ProjectArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Remove perceptual outliers
    Prune {
        #[command(flatten)]
        project: ProjectArgs,
        /// Pruned matrix (PDM1)
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Report JSON; stdout when omitted
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Shortest Hamiltonian path, optionally pinned at either end
    Path {
        #[command(flatten)]
        project: ProjectArgs,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        end: Option<String>,
        #[command(flatten)]
        output: SequenceOutput,
    },
    /// Shortest Hamiltonian cycle, for looping sequences
    Cycle {
        #[command(flatten)]
        project: ProjectArgs,
        #[command(flatten)]
        output: SequenceOutput,
    },
    /// In-between frames along the spanning tree between key-frames
    Keyframes {
        #[command(flatten)]
        project: ProjectArgs,
        /// Key-frame ids in order (comma separated)
        #[arg(long, value_delimiter = ',', required = true)]
        frames: Vec<String>,
        #[command(flatten)]
        output: SequenceOutput,
    },
    /// Reconstruction experiments scored with Kendall tau
    Eval(EvalArgs),
    /// Composite sheet of a sequence and/or the 2D tree embedding
    Layout {
        #[command(flatten)]
        project: ProjectArgs,
        /// Sequence JSON to render
        #[arg(long)]
        sequence: Option<PathBuf>,
        #[arg(long, default_value = "linear")]
        style: LayoutStyle,
        #[arg(long, default_value_t = 8)]
        gutter: u32,
        /// Composite PNG
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Write the embedding JSON here
        #[arg(long)]
        embedding: Option<PathBuf>,
        /// Embed the raw matrix instead of tree geodesics
        #[arg(long)]
        raw: bool,
    },
    /// Fit calibration weights to 2AFC judgments
    Calibrate(CalibrateArgs),
    /// Serve the HTTP API
    Serve {
        #[command(flatten)]
        project: ProjectArgs,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8000)]
        port: u16,
    },
}

#[derive(Args)]
struct SequenceOutput {
    /// Sequence JSON; stdout when omitted
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the frames as 000001.png, 000002.png, ... here
    #[arg(long)]
    export_dir: Option<PathBuf>,
    /// Symlink exported frames instead of copying them
    #[arg(long, requires = "export_dir")]
    symlink: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory with one subdirectory of ordered frames per case
    #[arg(long, required_unless_present = "synthetic")]
    cases: Option<PathBuf>,
    /// Run this many generated animations instead
    #[arg(long, conflicts_with = "cases")]
    synthetic: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "l2-image")]
    metrics: Vec<Metric>,
    #[arg(long, default_value_t = 0)]
    shuffle_seed: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    exact_threshold: Option<usize>,
    /// Report JSON; stdout when omitted
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    features: PathBuf,
    /// JSON list of {"ref", "x0", "x1", "h"}
    #[arg(long)]
    judgments: PathBuf,
    /// Weights JSON ({layer: [w, ...]})
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| run(cli.command));
    if let Err(f) = outcome {
        eprintln!("{}", f.render(cli.json_errors));
        std::process::exit(f.exit_code());
    }
}

/// Honours `RESEQ_THREADS` as a cap on the worker pool.
fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("RESEQ_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::contract(format!("RESEQ_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Other(format!("cannot size the thread pool: {e}")))
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let bytes = reseq_core::json::to_vec(value)?;
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Dist { project, out } => {
            let config = ProjectConfig::resolve(&project)?;
            let m = distance_matrix(&config, &load_inputs(&config)?)?;
            save_matrix(&m, out)?;
            Ok(())
        }
        Command::Prune { project, out, report } => {
            let mut config = ProjectConfig::resolve(&project)?;
            if config.no_prune {
                return Err(Failure::contract("prune cannot run with --no-prune"));
            }
            config.no_prune = false;
            let m = distance_matrix(&config, &load_inputs(&config)?)?;
            let (pruned, r) = prune(&config, &m)?;
            if let Some(out) = out {
                save_matrix(&pruned, out)?;
            }
            write_json(&r, report.as_deref())
        }
        Command::Path { project, start, end, output } => sequence_command(
            &project,
            SequenceRequest {
                kind: SequenceKind::Path,
                keyframes: None,
                start,
                end,
                no_prune: false,
            },
            &output,
        ),
        Command::Cycle { project, output } => sequence_command(
            &project,
            SequenceRequest {
                kind: SequenceKind::Cycle,
                keyframes: None,
                start: None,
                end: None,
                no_prune: false,
            },
            &output,
        ),
        Command::Keyframes { project, frames, output } => sequence_command(
            &project,
            SequenceRequest {
                kind: SequenceKind::Keyframe,
                keyframes: Some(frames),
                start: None,
                end: None,
                no_prune: false,
            },
            &output,
        ),
        Command::Eval(args) => eval(args),
        Command::Layout {
            project,
            sequence,
            style,
            gutter,
            out,
            embedding,
            raw,
        } => {
            if sequence.is_none() && embedding.is_none() {
                return Err(Failure::contract("layout needs --sequence (with --out) or --embedding"));
            }
            let config = ProjectConfig::resolve(&project)?;
            let inputs = load_inputs(&config)?;
            if let Some(path) = embedding {
                let m = distance_matrix(&config, &inputs)?;
                let (pruned, _) = prune(&config, &m)?;
                let tree = minimum_spanning_tree(&build_graph(&pruned)?);
                let source = if raw { EmbeddingSource::RawMatrix } else { EmbeddingSource::TreeGeodesic };
                write_json(&embed_2d(&tree, &pruned, source)?, Some(&path))?;
            }
            if let Some(seq_path) = sequence {
                let out = out.ok_or_else(|| Failure::contract("rendering a sequence needs --out"))?;
                let text = std::fs::read(&seq_path)
                    .map_err(|e| Failure::contract(format!("cannot read {}: {e}", seq_path.display())))?;
                let seq: SequenceResult = serde_json::from_slice(&text)
                    .map_err(|e| Failure::contract(format!("invalid sequence {}: {e}", seq_path.display())))?;
                let frames = inputs
                    .frames
                    .as_ref()
                    .ok_or_else(|| Failure::contract("rendering a sequence needs the images (--images)"))?;
                let options = LayoutOptions {
                    gutter,
                    ..LayoutOptions::default()
                };
                render_layout(&seq, frames, style, &options, out)?;
            }
            Ok(())
        }
        Command::Calibrate(args) => calibrate(args),
        Command::Serve { project, host, port } => {
            let config = ProjectConfig::resolve(&project)?;
            let snapshot = EngineSnapshot::build(&config)?;
            let state = AppState::new(config, snapshot);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(state, &format!("{host}:{port}")))
        }
    }
}

fn sequence_command(project: &ProjectArgs, req: SequenceRequest, output: &SequenceOutput) -> CliResult<()> {
    let config = ProjectConfig::resolve(project)?;
    let inputs = load_inputs(&config)?;
    let m = distance_matrix(&config, &inputs)?;
    let (pruned, _) = prune(&config, &m)?;
    let result = solve(&config, &pruned, None, &req)?;
    if let Some(dir) = &output.export_dir {
        let frames = inputs
            .frames
            .as_ref()
            .ok_or_else(|| Failure::contract("exporting frames needs the images (--images)"))?;
        export_frames(&result, frames, dir, output.symlink)?;
    }
    write_json(&result, output.out.as_deref())
}

/// Each subdirectory of `root` is a case: its images in file-name order are
/// the ground truth. An optional `features.pfa` feeds feature metrics and an
/// optional `EXCLUDE` file (holding the reason) keeps the case out.
fn load_cases(root: &Path) -> CliResult<Vec<EvalCase>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Failure::contract(format!("cannot read cases directory {}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Failure::contract(format!("no case directories under {}", root.display())));
    }
    dirs.iter()
        .map(|dir| {
            let name = dir.file_name().unwrap().to_string_lossy().into_owned();
            let mut case = EvalCase::new(name, ingest_images(&list_image_files(dir)?)?);
            let features = dir.join("features.pfa");
            if features.exists() {
                case.features = Some(load_archive(features)?);
            }
            let exclude = dir.join("EXCLUDE");
            if exclude.exists() {
                case.exclusion = Some(std::fs::read_to_string(exclude)?.trim().to_owned());
            }
            Ok(case)
        })
        .collect()
}

fn eval(args: EvalArgs) -> CliResult<()> {
    let cases = match (&args.cases, args.synthetic) {
        (Some(root), _) => load_cases(root)?,
        (None, Some(count)) => (0..count)
            .map(|k| procedural_case(format!("synthetic{k:02}"), 10 + (k * 7) % 31, k as u64))
            .collect::<reseq_core::Result<Vec<_>>>()?,
        (None, None) => unreachable!("clap requires one of --cases or --synthetic"),
    };
    let mut solver = SolverConfig {
        seed: args.seed,
        ..SolverConfig::default()
    };
    solver.exact_threshold = args.exact_threshold.unwrap_or(solver.exact_threshold);
    let config = ReconstructionConfig {
        solver,
        shuffle_seed: args.shuffle_seed,
        weights: None,
    };
    let report = run_suite(&cases, &args.metrics, &config)?;
    if let Some(csv) = &args.csv {
        std::fs::write(csv, report.to_csv()?)?;
    }
    write_json(&report, args.json.as_deref())
}

fn calibrate(args: CalibrateArgs) -> CliResult<()> {
    let archive = load_archive(&args.features)?;
    let text = std::fs::read(&args.judgments)
        .map_err(|e| Failure::contract(format!("cannot read {}: {e}", args.judgments.display())))?;
    let judgments: Vec<JudgmentTriple> = serde_json::from_slice(&text)
        .map_err(|e| Failure::contract(format!("invalid judgments {}: {e}", args.judgments.display())))?;
    let defaults = CalibrationConfig::default();
    let config = CalibrationConfig {
        learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        seed: args.seed,
        batch_size: args.batch_size,
    };
    let fit = fit_calibration(&archive, &judgments, &config)?;
    fit.weights.save_json(&args.out, &archive)?;
    write_json(
        &serde_json::json!({
            "initial_loss": fit.initial_loss,
            "final_loss": fit.final_loss,
            "epochs_run": fit.epochs_run,
            "judge": fit.judge,
        }),
        None,
    )
}
