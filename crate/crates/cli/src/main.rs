//! mdn-ik command line: every pipeline stage as a scriptable subcommand.
//!
//! Exit codes: 0 success, 1 runtime failure (for example training
//! divergence or a pipeline stage failure), 2 usage or validation errors
//! (bad flags, unreadable or malformed files, mismatched dimensions).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

use mdn_ik::calib_file;
use mdn_ik::dataset_file;
use mdn_ik::model_file;
use mdn_ik::pipeline::{run_pipeline, PipelineContext};
use mdn_ik::pnm;
use mdn_ik::report::{self, EvalRow};
use mdn_ik::run_config;
use mdn_ik::urdf;

use mdn_ik_core::chain::{forward_kinematics, KinematicChain};
use mdn_ik_core::dls::{solve_dls, DlsSettings};
use mdn_ik_core::mdn::{train, MdnConfig, TrainError, TrainSettings};
use mdn_ik_core::sampling::{generate_dataset, sample_config, SampleRng};
use mdn_ik_core::vision::metrics;

#[derive(Parser)]
#[command(
    name = "mdn-ik",
    version,
    about = "Learned inverse kinematics for serial-chain manipulators: \
             dataset generation, MDN training, evaluation against a \
             damped-least-squares solver, and a plate-to-command pipeline."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a robot description and print a chain summary.
    Describe {
        /// URDF-subset file.
        chain: PathBuf,
    },
    /// Generate a forward-kinematics dataset by uniform joint sampling.
    GenDataset(GenDatasetArgs),
    /// Train the mixture density network on a dataset.
    Train(TrainArgs),
    /// Evaluate a trained model against the numerical solver.
    EvalIk(EvalArgs),
    /// Compare a predicted mask against a ground-truth mask.
    Metrics(MetricsArgs),
    /// Run the full plate-to-command pipeline from a config file.
    Run {
        /// TOML run configuration.
        config: PathBuf,
    },
}

#[derive(Args)]
struct GenDatasetArgs {
    /// URDF-subset file.
    #[arg(long)]
    chain: PathBuf,
    /// Number of samples to generate.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// RNG seed; the same seed reproduces the file byte for byte.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset CSV produced by gen-dataset.
    #[arg(long)]
    dataset: PathBuf,
    /// Output model JSON path.
    #[arg(long)]
    out_model: PathBuf,
    /// Output per-epoch report CSV path.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Initial learning rate.
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    /// Multiplier applied to the rate after each decay interval.
    #[arg(long, default_value_t = 0.90)]
    lr_decay: f64,
    /// Decay interval in epochs.
    #[arg(long, default_value_t = 100)]
    decay_every: usize,
    /// Fraction of the dataset used for training (rest validates).
    #[arg(long, default_value_t = 0.9)]
    split: f64,
    /// Mixture components K.
    #[arg(long, default_value_t = 5)]
    components: usize,
    #[arg(long, default_value_t = 3)]
    hidden_layers: usize,
    #[arg(long, default_value_t = 128)]
    hidden_width: usize,
    /// Seed for weight initialization, the split and the shuffles.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained model JSON.
    #[arg(long)]
    model: PathBuf,
    /// URDF-subset file the model was trained for.
    #[arg(long)]
    chain: PathBuf,
    /// Targets file: one `x,y,z` per line (# comments allowed).
    #[arg(long, conflicts_with = "random")]
    targets: Option<PathBuf>,
    /// Evaluate n random reachable targets (FK of sampled configs).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    random: Option<u64>,
    /// Seed for --random target generation.
    #[arg(long, default_value_t = 4242)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct MetricsArgs {
    /// Predicted mask (PGM; nonzero = foreground).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth mask (PGM; nonzero = foreground).
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

enum AppError {
    /// Bad inputs: flags, files, formats, dimension mismatches. Exit 2.
    Usage(String),
    /// Failures while computing: divergence, stage errors. Exit 1.
    Runtime(String),
}

fn usage(err: impl std::fmt::Display) -> AppError {
    AppError::Usage(err.to_string())
}

fn runtime(err: impl std::fmt::Display) -> AppError {
    AppError::Runtime(err.to_string())
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (e.g. piping into head).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(AppError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<(), AppError> {
    match command {
        Command::Describe { chain } => cmd_describe(&chain),
        Command::GenDataset(args) => cmd_gen_dataset(&args),
        Command::Train(args) => cmd_train(&args),
        Command::EvalIk(args) => cmd_eval_ik(&args),
        Command::Metrics(args) => cmd_metrics(&args),
        Command::Run { config } => cmd_run(&config),
    }
}

fn load_chain(path: &Path) -> Result<KinematicChain, AppError> {
    urdf::load_chain(path).map_err(usage)
}

fn cmd_describe(path: &Path) -> Result<(), AppError> {
    let chain = load_chain(path)?;
    println!("robot: {}", chain.name());
    println!("fingerprint: {}", chain.fingerprint());
    println!("dof: {}", chain.dof());
    println!("max reach: {:.4} m", chain.max_reach());
    println!("joints (base to tip):");
    for (i, joint) in chain.joints().iter().enumerate() {
        let axis = joint.axis();
        let limits = match joint.limits() {
            Some(l) => format!("[{:.4}, {:.4}]", l.lower, l.upper),
            None => "-".to_string(),
        };
        let masked = if joint.masked() { "  masked" } else { "" };
        println!(
            "  {:>2}. {:<16} {:<9} axis [{} {} {}]  limits {limits}{masked}",
            i + 1,
            joint.name(),
            joint.kind().as_str(),
            axis.x,
            axis.y,
            axis.z
        );
    }
    Ok(())
}

fn ensure_parent_dir(path: &Path) -> Result<(), AppError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(usage)?;
        }
    }
    Ok(())
}

fn cmd_gen_dataset(args: &GenDatasetArgs) -> Result<(), AppError> {
    let chain = load_chain(&args.chain)?;
    let dataset = generate_dataset(&chain, args.n as usize, args.seed).map_err(usage)?;
    ensure_parent_dir(&args.out)?;
    dataset_file::save_dataset(&dataset, &args.out).map_err(usage)?;
    eprintln!(
        "wrote {} samples (dof {}, seed {}) to {}",
        dataset.len(),
        dataset.dof,
        dataset.seed,
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), AppError> {
    let dataset = dataset_file::load_dataset(&args.dataset).map_err(usage)?;
    let config = MdnConfig {
        input_dim: 3,
        hidden_layers: args.hidden_layers,
        hidden_width: args.hidden_width,
        components: args.components,
        output_dim: dataset.dof,
        seed: args.seed,
    };
    let settings = TrainSettings {
        epochs: args.epochs,
        batch_size: args.batch_size,
        initial_lr: args.lr,
        lr_decay: args.lr_decay,
        decay_every: args.decay_every,
        train_fraction: args.split,
        seed: args.seed,
        ..TrainSettings::default()
    };
    let started = Instant::now();
    let (model, training_report) = train(&dataset, config, &settings).map_err(|e| match e {
        TrainError::Diverged { .. } => runtime(e),
        other => usage(other),
    })?;
    ensure_parent_dir(&args.out_model)?;
    ensure_parent_dir(&args.report)?;
    model_file::save_model(&model, Some(&dataset.chain_fingerprint), &args.out_model)
        .map_err(usage)?;
    fs::write(&args.report, report::training_report_csv(&training_report)).map_err(usage)?;
    eprintln!(
        "trained {} epochs on {}+{} samples in {:.1} s; train nll {:.4} -> {:.4}, val {:.4}",
        settings.epochs,
        training_report.train_count,
        training_report.val_count,
        started.elapsed().as_secs_f64(),
        training_report.first_train_nll().unwrap_or(f64::NAN),
        training_report.final_train_nll().unwrap_or(f64::NAN),
        training_report.final_val_nll().unwrap_or(f64::NAN),
    );
    Ok(())
}

fn parse_targets(path: &Path) -> Result<Vec<Vector3<f64>>, AppError> {
    let text = fs::read_to_string(path).map_err(usage)?;
    let mut targets = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| usage(format!("targets line {}: cannot parse '{raw}'", idx + 1)))?;
        if values.len() != 3 {
            return Err(usage(format!(
                "targets line {}: expected x,y,z, found {} values",
                idx + 1,
                values.len()
            )));
        }
        targets.push(Vector3::new(values[0], values[1], values[2]));
    }
    if targets.is_empty() {
        return Err(usage("targets file contains no targets"));
    }
    Ok(targets)
}

fn cmd_eval_ik(args: &EvalArgs) -> Result<(), AppError> {
    let chain = load_chain(&args.chain)?;
    let (model, _) = model_file::load_model(&args.model, Some(chain.dof())).map_err(usage)?;

    let targets = match (&args.targets, args.random) {
        (Some(path), None) => parse_targets(path)?,
        (None, Some(n)) => {
            let mut rng = SampleRng::from_seed(args.seed);
            (0..n)
                .map(|_| {
                    let q = sample_config(&chain, &mut rng);
                    forward_kinematics(&chain, &q).map(|p| p.translation)
                })
                .collect::<Result<_, _>>()
                .map_err(usage)?
        }
        _ => return Err(usage("provide exactly one of --targets or --random")),
    };

    let dls_settings = DlsSettings::default();
    let q0 = chain.mid_config();
    let reach = chain.max_reach();
    let mut rows = Vec::with_capacity(targets.len());
    for (index, target) in targets.iter().enumerate() {
        if target.norm() > reach {
            rows.push(EvalRow {
                index,
                target: [target.x, target.y, target.z],
                reachable: false,
                position_error_mm: f64::NAN,
                joint_error_deg: Vec::new(),
                dls_converged: false,
                inference_us: f64::NAN,
            });
            continue;
        }
        let started = Instant::now();
        let predicted = model.predict_config(target).map_err(runtime)?;
        let inference_us = started.elapsed().as_secs_f64() * 1e6;
        let clamped = chain.clamped(&predicted).map_err(runtime)?;
        let reached = forward_kinematics(&chain, &clamped).map_err(runtime)?.translation;
        let solution = solve_dls(&chain, target, &q0, &dls_settings).map_err(runtime)?;
        let joint_error_deg = clamped
            .as_slice()
            .iter()
            .zip(solution.config.as_slice())
            .map(|(&a, &b)| (a - b).abs().to_degrees())
            .collect();
        rows.push(EvalRow {
            index,
            target: [target.x, target.y, target.z],
            reachable: true,
            position_error_mm: (reached - target).norm() * 1000.0,
            joint_error_deg,
            dls_converged: solution.status.converged(),
            inference_us,
        });
    }

    match args.format {
        Format::Text => print!("{}", report::eval_text(&rows, chain.dof())),
        Format::Csv => print!("{}", report::eval_csv(&rows, chain.dof())),
    }
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs) -> Result<(), AppError> {
    let pred = pnm::read_mask(&args.pred).map_err(usage)?;
    let truth = pnm::read_mask(&args.truth).map_err(usage)?;
    let m = metrics(&pred, &truth).map_err(usage)?;
    match args.format {
        Format::Text => println!(
            "iou={:.6} dice={:.6} acc={:.6}",
            m.iou, m.dice, m.pixel_accuracy
        ),
        Format::Csv => {
            println!("iou,dice,pixel_accuracy");
            println!("{:.6},{:.6},{:.6}", m.iou, m.dice, m.pixel_accuracy);
        }
    }
    Ok(())
}

fn cmd_run(config_path: &Path) -> Result<(), AppError> {
    let config = run_config::load_run_config(config_path)
        .map_err(|e| usage(format!("stage load-config: {e}")))?;
    let chain = urdf::load_chain(&config.chain)
        .map_err(|e| usage(format!("stage load-chain: {e}")))?;
    let (model, _) = model_file::load_model(&config.model, Some(chain.dof()))
        .map_err(|e| usage(format!("stage load-model: {e}")))?;
    let map = calib_file::load_calibration(&config.calibration)
        .map_err(|e| usage(format!("stage load-calibration: {e}")))?;
    let image = pnm::read_image(&config.image)
        .map_err(|e| usage(format!("stage load-image: {e}")))?;

    let ctx = PipelineContext {
        chain: &chain,
        model: &model,
        map: &map,
        camera: &config.camera,
        plane_z: config.plane_z,
        hover_m: config.hover_m,
        segmentation: config.segmentation,
        min_area: config.min_area,
        seed: config.seed,
    };

    let mut sink: Box<dyn Write> = if config.commands_out == "-" {
        Box::new(std::io::stdout())
    } else {
        let path = Path::new(&config.commands_out);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| usage(format!("stage emit: {e}")))?;
        }
        Box::new(fs::File::create(path).map_err(|e| usage(format!("stage emit: {e}")))?)
    };

    let (run_report, mask) = run_pipeline(&image, &ctx, &mut sink).map_err(|e| {
        if e.stage == "validate" {
            usage(e)
        } else {
            runtime(e)
        }
    })?;
    sink.flush().map_err(|e| runtime(format!("stage emit: {e}")))?;
    drop(sink);

    print!("{}", report::pipeline_text(&run_report));

    if let Some(path) = &config.report_csv_out {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(runtime)?;
        }
        let mut csv = report::pipeline_csv_header(chain.dof());
        csv.push_str(&report::pipeline_csv_row(&run_report, chain.dof()));
        fs::write(path, csv).map_err(runtime)?;
    }
    if let Some(path) = &config.overlay_out {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(runtime)?;
        }
        let blobs = mdn_ik_core::vision::find_blobs(&mask, ctx.min_area);
        pnm::write_overlay(&image, &blobs, path).map_err(runtime)?;
    }
    Ok(())
}
