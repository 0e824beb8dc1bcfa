use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use doppler_har::classify::{evaluate, train, Model, Network};
use doppler_har::doppler::{
    read_trace_csv, write_trace_csv, write_trace_pgm, DopplerProcessor, DopplerStream, TraceBuilder,
};
use doppler_har::io::{
    generate_dataset, load_scenario, load_trace_dir, run_pipeline, split, CfrHeader, CfrReader, CfrWriter, DatasetSpec,
    PipelineConfig, PipelineInput, PipelineOptions, Until,
};
use doppler_har::sanitize::{SanitizedCfr, Sanitizer};
use doppler_har::sim::{simulate, Activity, ActivityGenerator, CfrPacket};
use doppler_har::{Error, Result};

#[derive(Parser)]
#[command(
    name = "doppler-har",
    version,
    about = "Wi-Fi CFR sensing: simulate, sanitize, Doppler traces, activity classification"
)]
struct Cli {
    /// Pipeline configuration file (flat TOML key/value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set lambda=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(flatten)]
    overrides: ConfigFlags,
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// One flag per configuration key.
#[derive(Args, Serialize, Default)]
struct ConfigFlags {
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    symbol_time: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cyclic_prefix: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate_interval: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    carrier_freq: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    subchannels: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    band_edge: Option<i32>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dc_guard: Option<i32>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_antennas: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    window_len: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    fft_len: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_len: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    window_stride: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold_db: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    atoms: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delay_max: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sparsity_floor: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol_kkt: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dropout_rate: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    patience: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    classify_stride: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated CFR stream.
    Simulate {
        /// Scenario file; alternatively use --activity.
        #[arg(long, conflicts_with = "activity")]
        scenario: Option<PathBuf>,
        /// Generate a randomized scenario for this activity.
        #[arg(long, value_enum)]
        activity: Option<ActivityArg>,
        /// Packets for --activity (default: one trace worth).
        #[arg(long)]
        packets: Option<u64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Remove phase offsets from a CFR file; output uses the same format.
    Sanitize {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Negate sub-channels −63..=122 on load.
        #[arg(long)]
        sign_fix: bool,
    },
    /// Doppler traces from a sanitized CFR file, exported as CSV and PGM.
    Doppler {
        input: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train a classifier on synthetic traces or a directory of labelled CSVs.
    Train {
        /// `<dir>/<class>/*.csv`; without it a synthetic dataset is generated.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Synthetic scenarios per class.
        #[arg(long, default_value_t = 40)]
        per_class: usize,
        /// Antennas per synthetic scenario.
        #[arg(long, default_value_t = 1)]
        antennas: usize,
        #[arg(short, long)]
        model: PathBuf,
        /// Training log (JSON lines).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Classify trace CSV files with a trained model.
    Classify {
        #[arg(short, long)]
        model: PathBuf,
        traces: Vec<PathBuf>,
    },
    /// End-to-end run from a scenario or a raw CFR file to fused labels.
    Pipeline {
        #[arg(long, conflicts_with = "input")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        sign_fix: bool,
        #[arg(short, long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "fuse")]
        until: UntilArg,
        /// Export traces (CSV and PGM) into this directory.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Write labels as JSON lines here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Describe a CFR file, model checkpoint, trace CSV or the resolved config.
    Inspect { path: Option<PathBuf> },
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivityArg {
    Empty,
    Sitting,
    Walking,
    Running,
    Jumping,
}

impl From<ActivityArg> for Activity {
    fn from(a: ActivityArg) -> Self {
        match a {
            ActivityArg::Empty => Activity::Empty,
            ActivityArg::Sitting => Activity::Sitting,
            ActivityArg::Walking => Activity::Walking,
            ActivityArg::Running => Activity::Running,
            ActivityArg::Jumping => Activity::Jumping,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum UntilArg {
    Doppler,
    Fuse,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let flags = toml::Table::try_from(&cli.overrides).map_err(|e| Error::Format(e.to_string()))?;
    cfg.merge(flags)?;
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid("--set", format!("expected KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    match cli.command {
        Command::Simulate {
            scenario,
            activity,
            packets,
            out,
        } => {
            let scenario = match (scenario, activity) {
                (Some(path), _) => load_scenario(&path)?,
                (None, Some(activity)) => {
                    let n = packets.unwrap_or(((cfg.trace_len - 1) * cfg.window_stride + cfg.window_len) as u64);
                    let mut gen = ActivityGenerator::new(cfg.ofdm(), n, cfg.window_len as u64);
                    gen.n_antennas = cfg.n_antennas;
                    gen.scenario(activity.into(), cfg.seed)
                }
                (None, None) => return Err(Error::invalid("simulate", "give --scenario or --activity")),
            };
            let header = CfrHeader::from_ofdm(
                &scenario.ofdm,
                scenario.n_antennas,
                scenario.n_packets * scenario.n_antennas as u64,
            );
            let mut w = CfrWriter::new(create(&out)?, header)?;
            for p in simulate(&scenario)? {
                w.write(&p)?;
            }
            w.finish()?;
        }
        Command::Sanitize { input, out, sign_fix } => {
            let reader = CfrReader::new(open(&input)?, sign_fix)?;
            let ofdm = reader.header().ofdm();
            let sanitizer = Sanitizer::new(&ofdm, cfg.sanitizer())?;
            let mut header = reader.header().clone();
            header.used_subchannels = sanitizer.config().reconstruct.clone();
            let n_ant = header.n_antennas as usize;
            let mut w = CfrWriter::new(create(&out)?, header)?;
            let mut warm = vec![None; n_ant];
            for p in reader {
                let p = p.map_err(|e| e.in_stage("ingest"))?;
                let a = p.antenna_index as usize;
                let (clean, dec) = sanitizer
                    .sanitize_warm(&p, warm[a].as_ref())
                    .map_err(|e| e.in_stage("sanitize"))?;
                warm[a] = Some(dec);
                w.write(&CfrPacket {
                    packet_index: clean.packet_index,
                    antenna_index: clean.antenna_index,
                    values: clean.values,
                })?;
            }
            w.finish()?;
        }
        Command::Doppler { input, out } => {
            std::fs::create_dir_all(&out)?;
            let reader = CfrReader::new(open(&input)?, false)?;
            let subchannels = reader.header().used_subchannels.clone();
            let n_ant = reader.header().n_antennas as usize;
            let processor = DopplerProcessor::new(cfg.doppler())?;
            let mut streams: Vec<_> = (0..n_ant).map(|_| DopplerStream::new(processor.clone())).collect();
            let mut builders: Vec<_> = (0..n_ant)
                .map(|_| TraceBuilder::new(cfg.trace_len, cfg.threshold_db))
                .collect();
            let mut counts = vec![0usize; n_ant];
            let every = cfg.classify_every();
            for p in reader {
                let p = p.map_err(|e| e.in_stage("ingest"))?;
                let a = p.antenna_index as usize;
                let clean = SanitizedCfr {
                    packet_index: p.packet_index,
                    antenna_index: p.antenna_index,
                    subchannels: subchannels.clone(),
                    values: p.values,
                };
                let Some((start, v)) = streams[a].push(clean).map_err(|e| e.in_stage("doppler"))? else {
                    continue;
                };
                if let Some(trace) = builders[a].push(start, &v) {
                    if counts[a].is_multiple_of(every) {
                        let stem = out.join(format!("trace_a{a}_p{:08}", trace.start_packet));
                        write_trace_csv(create(&stem.with_extension("csv"))?, &trace)?;
                        write_trace_pgm(create(&stem.with_extension("pgm"))?, &trace)?;
                    }
                    counts[a] += 1;
                }
            }
            println!("{} traces per antenna", counts.first().copied().unwrap_or(0));
        }
        Command::Train {
            data,
            per_class,
            antennas,
            model,
            log,
        } => {
            let (class_names, traces) = match data {
                Some(dir) => load_trace_dir(&dir)?,
                None => {
                    let spec = DatasetSpec {
                        per_class,
                        n_antennas: antennas,
                        hardware_offsets: true,
                        seed: cfg.seed,
                    };
                    let names = Activity::ALL.iter().map(|a| a.name().to_string()).collect();
                    (names, generate_dataset(&cfg, &spec)?)
                }
            };
            let (tr, va, te) = split(&traces, |t| t.label, 0.6, 0.2, cfg.seed);
            let ex = |v: &[doppler_har::io::LabeledTrace]| v.iter().map(|t| t.example()).collect::<Vec<_>>();
            let (tr, va, te) = (ex(&tr), ex(&va), ex(&te));
            let mut net = Network::new(cfg.network(class_names.len()), cfg.seed)?;
            let mut log_file = log.as_deref().map(create).transpose()?;
            let report = train(
                &mut net,
                &tr,
                &va,
                &cfg.training(),
                log_file.as_mut().map(|f| f as &mut dyn Write),
            )?;
            let metrics = evaluate(&net, &te)?;
            println!(
                "best epoch {} loss {:.4} -> {:.4}; test accuracy {:.3} on {} traces",
                report.best_epoch,
                report.initial_loss(),
                report.final_loss(),
                metrics.accuracy,
                te.len()
            );
            let model_file = Model::new(net, class_names)?;
            let mut w = create(&model)?;
            model_file.write(&mut w)?;
            w.flush()?;
        }
        Command::Classify { model, traces } => {
            let model = Model::read(open(&model)?)?;
            for path in traces {
                let trace = read_trace_csv(open(&path)?)?;
                let input: Vec<f32> = trace.unit_scaled().into_iter().map(|v| v as f32).collect();
                let out = model.network.predict(&input).map_err(|e| e.in_stage("classify"))?;
                let scores: Vec<String> = out.scores.iter().map(|s| format!("{s:.4}")).collect();
                println!(
                    "{}\t{}\t[{}]",
                    path.display(),
                    model.class_names[out.label],
                    scores.join(", ")
                );
            }
        }
        Command::Pipeline {
            scenario,
            input,
            sign_fix,
            model,
            until,
            export,
            out,
        } => {
            let input = match (scenario, input) {
                (Some(path), _) => PipelineInput::Scenario(load_scenario(&path)?),
                (None, Some(path)) => PipelineInput::File { path, sign_fix },
                (None, None) => return Err(Error::invalid("pipeline", "give --scenario or --input")),
            };
            let model = model.map(|m| open(&m).and_then(Model::read)).transpose()?;
            let options = PipelineOptions {
                until: match until {
                    UntilArg::Doppler => Until::Doppler,
                    UntilArg::Fuse => Until::Fuse,
                },
                export,
            };
            let result = run_pipeline(&cfg, input, model.as_ref(), &options)?;
            let mut sink: Box<dyn Write> = match out {
                Some(path) => Box::new(create(&path)?),
                None => Box::new(std::io::stdout().lock()),
            };
            for label in &result.labels {
                let line = serde_json::to_string(label).map_err(|e| Error::Format(e.to_string()))?;
                writeln!(sink, "{line}")?;
            }
            sink.flush()?;
            log::info!("{} traces, {} files exported", result.traces, result.exported.len());
        }
        Command::Inspect { path } => inspect(&cfg, path.as_deref())?,
    }
    Ok(())
}

fn inspect(cfg: &PipelineConfig, path: Option<&Path>) -> Result<()> {
    let Some(path) = path else {
        print!("{}", cfg.to_toml());
        println!("# trace duration: {:.3} s", cfg.trace_duration());
        return Ok(());
    };
    let mut magic = [0u8; 4];
    let n = std::io::Read::read(&mut File::open(path)?, &mut magic)?;
    match &magic[..n] {
        b"CFRF" => {
            let reader = CfrReader::new(open(path)?, false)?;
            let h = reader.header().clone();
            println!(
                "CFR file: K={} used={} ({}..={}) antennas={}",
                h.subchannels,
                h.used_subchannels.len(),
                h.used_subchannels[0],
                h.used_subchannels[h.used_subchannels.len() - 1],
                h.n_antennas
            );
            println!(
                "T={:e} s, T_c={:e} s, f_c={:e} Hz, records={}",
                h.symbol_time, h.estimate_interval, h.carrier_freq, h.records
            );
            let mut last = None;
            for p in reader {
                last = Some(p?.packet_index);
            }
            println!("records readable; last packet index {last:?}");
        }
        b"DHNN" => {
            let m = Model::read(open(path)?)?;
            let spec = m.network.spec();
            println!(
                "model: input {}×{}, classes {:?}, dropout {}",
                spec.input_rows, spec.input_cols, m.class_names, spec.dropout_rate
            );
            for l in m.network.layers() {
                println!("  {:<9} {:?} + {} biases", l.name, l.shape(), l.biases);
            }
            println!("parameters: {}", m.network.parameter_count());
        }
        b"# ro" => {
            let t = read_trace_csv(open(path)?)?;
            println!(
                "trace: {}×{} from packet {}, threshold {} dB",
                t.rows, t.cols, t.start_packet, t.threshold_db
            );
        }
        _ => {
            let text = std::fs::read_to_string(path)?;
            match PipelineConfig::from_toml(&text) {
                Ok(c) => print!("{}", c.to_toml()),
                Err(_) => {
                    let s = doppler_har::io::parse_scenario(&text)?;
                    println!(
                        "scenario: {} paths, {} antennas, {} packets, static={}",
                        s.paths.len(),
                        s.n_antennas,
                        s.n_packets,
                        s.is_static()
                    );
                }
            }
        }
    }
    Ok(())
}
