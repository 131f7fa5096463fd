use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clad::bench::bench;
use clad::checkpoint;
use clad::config::{Preset, RunConfig};
use clad::error::{Error, Result};
use clad::io::{read_scores, read_stream, write_roc, write_scores, write_stream, StreamHeader};
use clad::metrics::{roc_curve, FilterStats};
use clad::pipeline::{self, detect_ados, detect_exhaustive, drift_updater, fit, resolve, run_stream};
use clad::stream::build_sequences;
use clad::synth::synth_stream;

/// Streaming anomaly detection over coupled presenter/audience features.
#[derive(Parser)]
#[command(name = "clad", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dataset preset for tau, omega, trigger thresholds and sparse groups (inf, spe, ted, twi).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic stream.
    Gen {
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        segments: Option<usize>,
        #[arg(long)]
        anomaly_rate: Option<f64>,
        /// Switch to a second style dictionary at this segment.
        #[arg(long)]
        shift_at: Option<usize>,
    },
    /// Train a model, calibrate thresholds and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the training report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score a stream file in one batch.
    Detect {
        #[command(flatten)]
        io: ScoreIo,
        /// Prune exact divergence computations with bounds.
        #[arg(long)]
        ados: bool,
    },
    /// Score a stream online, updating the model when drift is detected.
    Stream {
        #[command(flatten)]
        io: ScoreIo,
        #[arg(long)]
        ados: bool,
        /// Keep the model frozen.
        #[arg(long)]
        no_update: bool,
        /// Write one JSON line per update cycle here.
        #[arg(long)]
        update_log: Option<PathBuf>,
    },
    /// ROC curve and AUROC of a score report.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        /// Write the curve points as columns here.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Time exhaustive and pruned scoring.
    Bench {
        #[command(flatten)]
        io: ScoreIo,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

#[derive(Args)]
struct ScoreIo {
    /// Stream file, or `-` for standard input.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(p) = &cli.preset {
        cfg.apply_preset(Preset::parse(p)?);
    }
    cfg.validate()?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Error::Validation("no command given (try --help)".into()));
    };
    match command {
        Command::Gen {
            out,
            segments,
            anomaly_rate,
            shift_at,
        } => {
            if let Some(n) = segments {
                cfg.stream.segments = n;
            }
            if let Some(r) = anomaly_rate {
                cfg.stream.anomaly_rate = r;
            }
            if shift_at.is_some() {
                cfg.stream.shift_at = shift_at;
            }
            cfg.validate()?;
            let segs = synth_stream(&cfg.stream)?;
            write_stream(output(out.as_deref())?, &StreamHeader::from_config(&cfg.stream), &segs)
        }
        Command::Train {
            data,
            out,
            report,
            epochs,
        } => {
            if let Some(e) = epochs {
                cfg.model.max_epoch = e;
            }
            cfg.validate()?;
            let (header, segs) = read_stream(input(&data)?)?;
            cfg.check_header(&header)?;
            let fitted = fit(&cfg, &segs)?;
            checkpoint::save(&out, &fitted.checkpoint(&cfg.model))?;
            if let Some(p) = report {
                let mut w = output(Some(&p))?;
                serde_json::to_writer(&mut w, &fitted.report)
                    .map_err(|e| Error::Invariant(e.to_string()))?;
                writeln!(w)?;
            }
            let c = fitted.calibration;
            eprintln!(
                "selected epoch {} (val loss {:.6}); tau {} trigger [{}, {}]",
                fitted.report.selected_epoch,
                fitted.report.selected().val_loss,
                c.tau,
                c.t1,
                c.t2
            );
            Ok(())
        }
        Command::Detect { io, ados } => {
            let (ck, windows) = load_inputs(&mut cfg, &io)?;
            let params = ck.params()?;
            let (thresholds, ados_cfg) = resolve(&cfg, ck.calibration.as_ref())?;
            let rows = if ados {
                let (rows, decisions) =
                    detect_ados(&params, &windows, cfg.model.omega, &thresholds, &ados_cfg)?;
                let s = FilterStats::from_decisions(&decisions);
                eprintln!(
                    "fp {:.4} (l1 {:.4}, group {:.4}); exact divergence on {} of {} segments",
                    s.fp_total(),
                    s.fp_l1(),
                    s.fp_group(),
                    s.exact,
                    s.segments
                );
                rows
            } else {
                detect_exhaustive(&params, &windows, cfg.model.omega, &thresholds)?
            };
            eprintln!("{} anomalies flagged", pipeline::anomaly_ids(&rows).len());
            write_scores(output(io.out.as_deref())?, &rows)
        }
        Command::Stream {
            io,
            ados,
            no_update,
            update_log,
        } => {
            let (ck, windows) = load_inputs(&mut cfg, &io)?;
            let mut params = ck.params()?;
            let (thresholds, ados_cfg) = resolve(&cfg, ck.calibration.as_ref())?;
            let mut updater = if no_update {
                None
            } else {
                // The first buffer's worth of the stream seeds the history.
                let seed_len = cfg.update.buffer_len.min(windows.len());
                Some(drift_updater(&cfg, &params, &windows[..seed_len])?)
            };
            let outcome = run_stream(
                &mut params,
                &windows,
                cfg.model.omega,
                &thresholds,
                ados.then_some(&ados_cfg),
                updater.as_mut(),
            )?;
            if let Some(p) = update_log {
                let mut w = output(Some(&p))?;
                for log in &outcome.updates {
                    serde_json::to_writer(&mut w, log).map_err(|e| Error::Invariant(e.to_string()))?;
                    writeln!(w)?;
                }
                w.flush()?;
            }
            eprintln!(
                "{} update cycles, {} retrains",
                outcome.updates.len(),
                outcome.updates.iter().filter(|u| u.retrained).count()
            );
            write_scores(output(io.out.as_deref())?, &outcome.rows)
        }
        Command::Eval { scores, curve } => {
            let rows = read_scores(input(&scores)?)?;
            let mut s = Vec::with_capacity(rows.len());
            let mut labels = Vec::with_capacity(rows.len());
            for r in &rows {
                let score = r.re_ia.ok_or_else(|| {
                    Error::Validation(format!(
                        "segment {} has no combined score; evaluate an exhaustive report",
                        r.id
                    ))
                })?;
                let label = r.label.ok_or_else(|| {
                    Error::Validation(format!("segment {} has no label", r.id))
                })?;
                s.push(score);
                labels.push(label.is_anomaly());
            }
            let roc = roc_curve(&s, &labels)?;
            if let Some(p) = curve {
                write_roc(output(Some(&p))?, &roc)?;
            }
            println!("auroc {}", roc.auroc);
            Ok(())
        }
        Command::Bench { io, repeats } => {
            let (ck, windows) = load_inputs(&mut cfg, &io)?;
            let params = ck.params()?;
            let (thresholds, ados_cfg) = resolve(&cfg, ck.calibration.as_ref())?;
            let report = bench(&params, &windows, cfg.model.omega, &thresholds, &ados_cfg, repeats)?;
            report.write(output(io.out.as_deref())?)
        }
    }
}

/// Loads the checkpoint and the stream, adopting the checkpoint's model settings.
fn load_inputs(
    cfg: &mut RunConfig,
    io: &ScoreIo,
) -> Result<(checkpoint::ModelCheckpoint, Vec<clad::stream::SequenceWindow>)> {
    let ck = checkpoint::load(&io.model)?;
    cfg.model = ck.config.clone();
    let (header, segs) = read_stream(input(&io.data)?)?;
    cfg.check_header(&header)?;
    let windows = build_sequences(&segs, cfg.model.q)?;
    Ok((ck, windows))
}

fn input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(File::open(path)?)))
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) if p.as_os_str() != "-" => Ok(Box::new(BufWriter::new(File::create(p)?))),
        _ => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}
