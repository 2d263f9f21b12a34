//! Command-line front end: dataset synthesis, preprocessing, training,
//! evaluation, cross-validation, ablations, and plotting.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use laneintrude::harness::{
    ablation_orders, ablation_preproc, confusion_csv, content_hash, crossval, evaluate,
    loss_curves_csv, metrics_csv, orders_csv, prepare_dataset, prepare_sample, preproc_csv,
    render_metrics_table, svg_line_chart, train, write_manifest, HarnessError, PipelineConfig,
    PreprocVariant, TrainConfig,
};
use laneintrude::ingest::{parse_frames, IngestError};
use laneintrude::normalize::write_series_csv;
use laneintrude::psrnet::{PsrNet, PsrNetConfig, PsrNetError};
use laneintrude::scenegen::{
    generate_dataset, read_dataset_jsonl, write_dataset_jsonl, DatasetSample, Label,
    SceneGenError, ScenarioConfig, SensorConfig, YawProfile,
};

/// Resolved run configuration: JSON file fields plus flag overrides.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct AppConfig {
    scenario: ScenarioConfig,
    sensor: SensorConfig,
    pipeline: PipelineConfig,
    model: PsrNetConfig,
    train: TrainConfig,
    dataset: DatasetConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct DatasetConfig {
    n_per_class: usize,
    seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_per_class: 50,
            seed: 7,
        }
    }
}

#[derive(Parser)]
#[command(name = "laneintrude", version, about = "Lane intrusion recognition pipeline")]
struct Cli {
    /// JSON config file; flags override individual fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flag overrides for every tunable config field.
#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    // scenario
    #[arg(long, global = true)]
    lane_width_m: Option<f64>,
    #[arg(long, global = true)]
    object_range_min_m: Option<f64>,
    #[arg(long, global = true)]
    object_range_max_m: Option<f64>,
    #[arg(long, global = true)]
    ego_speed_mps: Option<f64>,
    #[arg(long, global = true)]
    object_lateral_speed_mps: Option<f64>,
    /// Sinusoidal yaw amplitude in degrees.
    #[arg(long, global = true)]
    yaw_amplitude_deg: Option<f64>,
    /// Constant yaw in degrees (replaces the sinusoid).
    #[arg(long, global = true)]
    yaw_constant_deg: Option<f64>,
    #[arg(long, global = true)]
    frame_count: Option<usize>,
    #[arg(long, global = true)]
    frame_rate_hz: Option<f64>,
    #[arg(long, global = true)]
    cam_lateral_offset_m: Option<f64>,
    // sensor
    #[arg(long, global = true)]
    fx: Option<f64>,
    #[arg(long, global = true)]
    fy: Option<f64>,
    #[arg(long, global = true)]
    u0: Option<f64>,
    #[arg(long, global = true)]
    v0: Option<f64>,
    #[arg(long, global = true)]
    pixel_noise_sigma: Option<f64>,
    #[arg(long, global = true)]
    miss_rate: Option<f64>,
    #[arg(long, global = true)]
    clutter_rate: Option<f64>,
    #[arg(long, global = true)]
    marking_points_per_frame: Option<usize>,
    // pipeline
    #[arg(long, global = true)]
    gate_px: Option<f64>,
    #[arg(long, global = true)]
    process_noise: Option<f64>,
    #[arg(long, global = true)]
    measurement_noise: Option<f64>,
    #[arg(long, global = true)]
    initial_covariance: Option<f64>,
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Preprocessing variant: raw | normalized | normalized_filtered.
    #[arg(long, global = true)]
    preproc: Option<String>,
    // model
    #[arg(long, global = true)]
    max_order: Option<usize>,
    #[arg(long, global = true)]
    recon_channels: Option<usize>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    // training
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    /// Training / fold-split seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    // dataset
    #[arg(long, global = true)]
    n_per_class: Option<usize>,
    #[arg(long, global = true)]
    dataset_seed: Option<u64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut AppConfig) -> Result<(), CliError> {
        let s = &mut cfg.scenario;
        set(&mut s.lane_width_m, self.lane_width_m);
        set(&mut s.object_range_m[0], self.object_range_min_m);
        set(&mut s.object_range_m[1], self.object_range_max_m);
        set(&mut s.ego_speed_mps, self.ego_speed_mps);
        set(&mut s.object_lateral_speed_mps, self.object_lateral_speed_mps);
        if let Some(deg) = self.yaw_amplitude_deg {
            s.yaw = YawProfile::Sine {
                amplitude: deg.to_radians(),
            };
        }
        if let Some(deg) = self.yaw_constant_deg {
            s.yaw = YawProfile::Constant(deg.to_radians());
        }
        set(&mut s.frame_count, self.frame_count);
        set(&mut s.frame_rate_hz, self.frame_rate_hz);
        set(&mut s.cam_lateral_offset_m, self.cam_lateral_offset_m);

        let sensor = &mut cfg.sensor;
        set(&mut sensor.intrinsics.fx, self.fx);
        set(&mut sensor.intrinsics.fy, self.fy);
        set(&mut sensor.intrinsics.u0, self.u0);
        set(&mut sensor.intrinsics.v0, self.v0);
        set(&mut sensor.pixel_noise_sigma, self.pixel_noise_sigma);
        set(&mut sensor.miss_rate, self.miss_rate);
        set(&mut sensor.clutter_rate, self.clutter_rate);
        set(
            &mut sensor.marking_points_per_frame,
            self.marking_points_per_frame,
        );

        let p = &mut cfg.pipeline;
        set(&mut p.gate_px, self.gate_px);
        set(&mut p.kalman.process_noise, self.process_noise);
        set(&mut p.kalman.measurement_noise, self.measurement_noise);
        set(&mut p.kalman.initial_covariance, self.initial_covariance);
        set(&mut p.stride, self.stride);
        if let Some(v) = &self.preproc {
            p.variant = match v.as_str() {
                "raw" => PreprocVariant::Raw,
                "normalized" => PreprocVariant::Normalized,
                "normalized_filtered" => PreprocVariant::NormalizedFiltered,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown preproc variant `{other}`"
                    )))
                }
            };
        }

        set(&mut cfg.model.max_order, self.max_order);
        set(&mut cfg.model.recon_channels, self.recon_channels);
        set(&mut cfg.model.lambda, self.lambda);

        set(&mut cfg.train.epochs, self.epochs);
        set(&mut cfg.train.batch_size, self.batch_size);
        set(&mut cfg.train.adam.learning_rate, self.learning_rate);
        set(&mut cfg.train.seed, self.seed);

        set(&mut cfg.dataset.n_per_class, self.n_per_class);
        set(&mut cfg.dataset.seed, self.dataset_seed);
        Ok(())
    }
}

fn set<T: Copy>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled detection dataset (JSONL).
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn detection records into the normalized series CSV.
    Preprocess {
        /// A single detection-frame JSONL file.
        #[arg(long, conflicts_with = "data")]
        frames: Option<PathBuf>,
        /// A dataset JSONL; writes one CSV per sample into --out-dir.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output CSV (with --frames; stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output directory (with --data).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Only this sample index (with --data).
        #[arg(long)]
        sample: Option<usize>,
    },
    /// Train on every sample of a dataset and save a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        loss_out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset (sample-level, last window).
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        metrics_out: Option<PathBuf>,
    },
    /// k-fold cross-validation.
    Crossval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        metrics_out: Option<PathBuf>,
        #[arg(long)]
        confusion_out: Option<PathBuf>,
        #[arg(long)]
        loss_out: Option<PathBuf>,
    },
    /// Reconstructor-order ablation grid.
    AblateOrders {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1, 2, 3, 4])]
        orders: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [3usize, 5, 7])]
        folds: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Preprocessing ablation grid (raw / normalized / normalized+filtered).
    AblatePreproc {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [3usize, 5, 7])]
        folds: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a CSV column as an SVG line chart.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// X column name; defaults to the first column.
        #[arg(long)]
        x_col: Option<String>,
        /// Y column name; defaults to the second column.
        #[arg(long)]
        y_col: Option<String>,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl From<SceneGenError> for CliError {
    fn from(e: SceneGenError) -> Self {
        match e {
            SceneGenError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) => CliError::Config(e.to_string()),
            HarnessError::Model(PsrNetError::InvalidConfig(_)) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PsrNetError> for CliError {
    fn from(e: PsrNetError) -> Self {
        match e {
            PsrNetError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e @ CliError::Data(_)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}

fn load_config(cli: &Cli) -> Result<AppConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => AppConfig::default(),
    };
    cli.overrides.apply(&mut cfg)?;
    cfg.scenario
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    cfg.sensor
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    cfg.model
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.model.window_len != laneintrude::normalize::WINDOW_LEN {
        return Err(CliError::Config(format!(
            "model window_len {} must match the pipeline window of {}",
            cfg.model.window_len,
            laneintrude::normalize::WINDOW_LEN
        )));
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: String,
    config: &'a AppConfig,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

/// Every run leaves a manifest next to its primary output: the resolved
/// config, content hashes of the inputs, and the produced files.
fn emit_manifest(
    command: &str,
    cfg: &AppConfig,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<(), CliError> {
    let mut input_hashes = BTreeMap::new();
    for path in inputs {
        let bytes = fs::read(path)?;
        input_hashes.insert(path.display().to_string(), content_hash(&bytes));
    }
    let manifest = Manifest {
        command: command.to_string(),
        config: cfg,
        inputs: input_hashes,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let manifest_path = outputs
        .first()
        .map(|p| {
            let mut os = p.as_os_str().to_owned();
            os.push(".manifest.json");
            PathBuf::from(os)
        })
        .unwrap_or_else(|| PathBuf::from(format!("laneintrude-{command}.manifest.json")));
    let file = fs::File::create(&manifest_path)?;
    write_manifest(BufWriter::new(file), &manifest)?;
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Vec<DatasetSample>, CliError> {
    let file =
        fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(read_dataset_jsonl(BufReader::new(file))?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Generate { out } => {
            let samples = generate_dataset(
                cfg.dataset.n_per_class,
                &cfg.scenario,
                &cfg.sensor,
                cfg.dataset.seed,
            )?;
            let file = fs::File::create(out)?;
            write_dataset_jsonl(BufWriter::new(file), &samples)?;
            println!(
                "wrote {} samples ({} per class) to {}",
                samples.len(),
                cfg.dataset.n_per_class,
                out.display()
            );
            emit_manifest("generate", &cfg, &[], &[out])?;
        }
        Command::Preprocess {
            frames,
            data,
            out,
            out_dir,
            sample,
        } => match (frames, data) {
            (Some(frames_path), None) => {
                let file = fs::File::open(frames_path)?;
                let parsed = parse_frames(BufReader::new(file))?;
                let prepared =
                    prepare_sample(&parsed, Label::NoIntrusion, 0, &cfg.pipeline)
                        .map_err(|e| CliError::Data(e.to_string()))?;
                match out {
                    Some(path) => {
                        let mut w = BufWriter::new(fs::File::create(path)?);
                        write_series_csv(&mut w, &prepared.rows)?;
                        w.flush()?;
                        emit_manifest("preprocess", &cfg, &[frames_path], &[path])?;
                    }
                    None => {
                        let mut buf = Vec::new();
                        write_series_csv(&mut buf, &prepared.rows)?;
                        print!("{}", String::from_utf8_lossy(&buf));
                        emit_manifest("preprocess", &cfg, &[frames_path], &[])?;
                    }
                }
            }
            (None, Some(data_path)) => {
                let dir = out_dir
                    .clone()
                    .ok_or_else(|| CliError::Config("--data requires --out-dir".into()))?;
                fs::create_dir_all(&dir)?;
                let samples = read_dataset(data_path)?;
                let mut written = Vec::new();
                for (i, s) in samples.iter().enumerate() {
                    if let Some(only) = sample {
                        if i != *only {
                            continue;
                        }
                    }
                    let prepared = prepare_sample(&s.frames, s.label, i, &cfg.pipeline)
                        .map_err(|e| CliError::Data(format!("sample {i}: {e}")))?;
                    let path = dir.join(format!("sample_{i:04}.csv"));
                    let mut w = BufWriter::new(fs::File::create(&path)?);
                    write_series_csv(&mut w, &prepared.rows)?;
                    w.flush()?;
                    written.push(path);
                }
                println!("wrote {} series files to {}", written.len(), dir.display());
                let outs: Vec<&Path> = written.iter().map(|p| p.as_path()).collect();
                emit_manifest("preprocess", &cfg, &[data_path], &outs)?;
            }
            _ => {
                return Err(CliError::Config(
                    "preprocess needs exactly one of --frames or --data".into(),
                ))
            }
        },
        Command::Train {
            data,
            model_out,
            loss_out,
        } => {
            let samples = read_dataset(data)?;
            let (prepared, failures) = prepare_dataset(&samples, &cfg.pipeline);
            if !failures.is_empty() {
                eprintln!("warning: {} samples failed the pipeline", failures.len());
            }
            let windows: Vec<_> = prepared
                .iter()
                .flat_map(|p| p.windows.iter().cloned())
                .collect();
            let (model, curve) = train(&windows, &cfg.model, &cfg.train)?;
            let file = fs::File::create(model_out)?;
            model.save_checkpoint(BufWriter::new(file))?;
            let final_loss = curve.last().expect("at least one epoch");
            println!(
                "trained on {} windows for {} epochs; final loss {:.6} (cross-entropy {:.6})",
                windows.len(),
                cfg.train.epochs,
                final_loss.total,
                final_loss.cross_entropy
            );
            let mut outputs: Vec<&Path> = vec![model_out];
            if let Some(path) = loss_out {
                fs::write(path, loss_curves_csv(&[curve]))?;
                outputs.push(path);
            }
            emit_manifest("train", &cfg, &[data.as_path()], &outputs)?;
        }
        Command::Eval {
            data,
            model,
            metrics_out,
        } => {
            let samples = read_dataset(data)?;
            let model_file = fs::File::open(model)?;
            let net = PsrNet::load_checkpoint(BufReader::new(model_file))?;
            let (prepared, failures) = prepare_dataset(&samples, &cfg.pipeline);
            let outcome = evaluate(&net, &prepared, failures.len())?;
            println!(
                "accuracy {:.2}% ({}/{} correct, {} failed the pipeline)",
                outcome.accuracy_pct, outcome.correct, outcome.n, outcome.failed
            );
            print!("{}", confusion_table(&outcome.confusion));
            let mut outputs: Vec<&Path> = Vec::new();
            if let Some(path) = metrics_out {
                let mut text = format!(
                    "n,correct,failed,accuracy_pct\n{},{},{},{:.6}\n",
                    outcome.n, outcome.correct, outcome.failed, outcome.accuracy_pct
                );
                text.push_str(&confusion_csv(&outcome.confusion));
                fs::write(path, text)?;
                outputs.push(path);
            }
            emit_manifest("eval", &cfg, &[data.as_path(), model.as_path()], &outputs)?;
        }
        Command::Crossval {
            data,
            k,
            metrics_out,
            confusion_out,
            loss_out,
        } => {
            let samples = read_dataset(data)?;
            let report = crossval(&samples, *k, &cfg.model, &cfg.train, &cfg.pipeline)?;
            print!("{}", render_metrics_table(&report));
            let mut outputs: Vec<&Path> = Vec::new();
            if let Some(path) = metrics_out {
                fs::write(path, metrics_csv(&report))?;
                outputs.push(path);
            }
            if let Some(path) = confusion_out {
                fs::write(path, confusion_csv(&report.confusion))?;
                outputs.push(path);
            }
            if let Some(path) = loss_out {
                fs::write(path, loss_curves_csv(&report.fold_curves))?;
                outputs.push(path);
            }
            emit_manifest("crossval", &cfg, &[data.as_path()], &outputs)?;
        }
        Command::AblateOrders {
            data,
            orders,
            folds,
            out,
        } => {
            let samples = read_dataset(data)?;
            let rows = ablation_orders(
                &samples,
                orders,
                folds,
                &cfg.model,
                &cfg.train,
                &cfg.pipeline,
            )?;
            fs::write(out, orders_csv(&rows))?;
            for row in &rows {
                let cells: Vec<String> = row
                    .cells
                    .iter()
                    .map(|(k, r)| {
                        format!("{k}-fold {:.1}+-{:.1}", r.mean_accuracy, r.std_accuracy)
                    })
                    .collect();
                println!("order {}: {}", row.order, cells.join("  "));
            }
            emit_manifest("ablate-orders", &cfg, &[data.as_path()], &[out])?;
        }
        Command::AblatePreproc { data, folds, out } => {
            let samples = read_dataset(data)?;
            let rows = ablation_preproc(&samples, folds, &cfg.model, &cfg.train, &cfg.pipeline)?;
            fs::write(out, preproc_csv(&rows))?;
            for row in &rows {
                let cells: Vec<String> = row
                    .cells
                    .iter()
                    .map(|(k, r)| {
                        format!("{k}-fold {:.1}+-{:.1}", r.mean_accuracy, r.std_accuracy)
                    })
                    .collect();
                println!("{:?}: {}", row.variant, cells.join("  "));
            }
            emit_manifest("ablate-preproc", &cfg, &[data.as_path()], &[out])?;
        }
        Command::Plot {
            input,
            out,
            x_col,
            y_col,
        } => {
            let text = fs::read_to_string(input)?;
            let points = csv_points(&text, x_col.as_deref(), y_col.as_deref())?;
            let title = input
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let x_name = x_col.clone().unwrap_or_else(|| "x".into());
            let y_name = y_col.clone().unwrap_or_else(|| "y".into());
            fs::write(out, svg_line_chart(&points, &title, &x_name, &y_name))?;
            println!("wrote {} ({} points)", out.display(), points.len());
            emit_manifest("plot", &cfg, &[input.as_path()], &[out])?;
        }
    }
    Ok(())
}

fn confusion_table(confusion: &[[usize; 3]; 3]) -> String {
    let mut out = String::from("confusion (rows = truth):\n");
    for (t, label) in Label::ALL.iter().enumerate() {
        out.push_str(&format!(
            "  {:>13} {:5} {:5} {:5}\n",
            label.as_str(),
            confusion[t][0],
            confusion[t][1],
            confusion[t][2]
        ));
    }
    out
}

/// Pull (x, y) pairs out of a simple headed CSV.
fn csv_points(
    text: &str,
    x_col: Option<&str>,
    y_col: Option<&str>,
) -> Result<Vec<(f64, f64)>, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Data("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: Option<&str>, default_idx: usize| -> Result<usize, CliError> {
        match name {
            Some(n) => cols
                .iter()
                .position(|c| *c == n)
                .ok_or_else(|| CliError::Data(format!("column `{n}` not in header `{header}`"))),
            None => {
                if cols.len() > default_idx {
                    Ok(default_idx)
                } else {
                    Err(CliError::Data("CSV has too few columns".into()))
                }
            }
        }
    };
    let xi = find(x_col, 0)?;
    let yi = find(y_col, 1)?;
    let mut points = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> Option<f64> { fields.get(i)?.parse().ok() };
        if let (Some(x), Some(y)) = (parse(xi), parse(yi)) {
            points.push((x, y));
        }
    }
    if points.is_empty() {
        return Err(CliError::Data("no numeric rows to plot".into()));
    }
    Ok(points)
}
