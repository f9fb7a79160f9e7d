//! Subcommands and their exit codes: 0 success, 1 usage, 2 data or
//! config, 3 numeric-health abort.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use qcfd_core::beat::{make_dataset, BeatLabel};
use qcfd_core::dsp::{to_trimodal, TriModalSample};
use qcfd_core::eval::{evaluate, ReferenceModels};
use qcfd_core::gan::{grid_search, split_dataset, train_on_split};
use qcfd_core::info::fit_binning;
use qcfd_core::rng;
use rand::Rng;

use crate::beats::{attach_fiducials, load_beats_csv, write_beats_csv, write_fiducials_csv};
use crate::checkpoint::Checkpoint;
use crate::config::{RunConfig, SEED_ENV};
use crate::dataset::{read_samples, write_samples};
use crate::error::{io, CliError, Result};
use crate::report::{
    read_raw_metrics, score_table, write_report, write_score_lines, ReportDocument,
};

pub const BEATS_FILE: &str = "beats.csv";
pub const FIDUCIALS_FILE: &str = "fiducials.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const TEST_DIR: &str = "test";
pub const SCORES_FILE: &str = "scores.csv";

#[derive(Debug, Parser)]
#[command(
    name = "qcfd",
    version,
    about = "Tri-domain ECG synthesis: simulate, preprocess, train, generate, evaluate"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Run seed; overrides the config file and QCFD_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override any config key, e.g. `--set train.epochs=30`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate labelled beats into beats.csv and fiducials.csv.
    Simulate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a beats CSV into tri-modal TensorFiles.
    Preprocess {
        #[arg(long)]
        beats: PathBuf,
        /// Row-aligned fiducials; without them the morphology loss is off.
        #[arg(long)]
        fiducials: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train class generators; writes a checkpoint, the epoch history and the
    /// held-out test split.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate tri-modal samples from a checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Samples per class; defaults to eval.n_per_class, then to the
        /// checkpoint's test split.
        #[arg(long)]
        n_per_class: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score synthetic sets against real samples; the first set is the
    /// baseline.
    Evaluate {
        #[arg(long)]
        real: PathBuf,
        #[arg(long = "synth", value_name = "NAME=DIR", required = true)]
        synth: Vec<String>,
        /// Use the checkpoint's reference models and binning instead of
        /// fitting them on the real set.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalised scores from a raw-metrics table.
    Scores {
        #[arg(long)]
        input: PathBuf,
        /// Directory for scores.csv; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse `argv`, run the command and return its exit code. Diagnostics go
/// to `err` as one line.
pub fn run_with<I, T>(
    argv: I,
    env_seed: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, env_seed, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "qcfd: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

/// [`run_with`] on the process streams and `QCFD_SEED`.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_seed = std::env::var(SEED_ENV).ok();
    run_with(
        argv,
        env_seed.as_deref(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    )
}

fn dispatch(cli: Cli, env_seed: Option<&str>, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), env_seed, &cli.overrides, cli.seed)?;
    match cli.command {
        Command::Simulate { out: dir } => simulate(&cfg, &dir, out),
        Command::Preprocess {
            beats,
            fiducials,
            out: dir,
        } => preprocess(&cfg, &beats, fiducials.as_deref(), &dir, out),
        Command::Train { data, out: dir } => train(&cfg, &data, &dir, out),
        Command::Generate {
            checkpoint,
            n_per_class,
            out: dir,
        } => generate(&cfg, &checkpoint, n_per_class, &dir, out),
        Command::Evaluate {
            real,
            synth,
            checkpoint,
            out: dir,
        } => run_evaluate(&cfg, &real, &synth, checkpoint.as_deref(), &dir, out),
        Command::Scores { input, out: dir } => scores(&input, dir.as_deref(), out),
    }
}

fn say(out: &mut dyn Write, msg: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{msg}").map_err(io("<stdout>"))
}

fn simulate(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let beats = make_dataset(cfg.sim.n_per_class, &cfg.sim_profile()?, cfg.seed)?;
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    write_beats_csv(&dir.join(BEATS_FILE), &beats)?;
    write_fiducials_csv(&dir.join(FIDUCIALS_FILE), &beats)?;
    say(
        out,
        format_args!("simulated {} beats into {}", beats.len(), dir.display()),
    )
}

fn preprocess(
    cfg: &RunConfig,
    beats: &Path,
    fiducials: Option<&Path>,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let mut raw = load_beats_csv(beats)?;
    if let Some(f) = fiducials {
        attach_fiducials(f, &mut raw)?;
    }
    let profile = cfg.dsp_profile()?;
    let samples = raw
        .iter()
        .map(|b| to_trimodal(b, &profile))
        .collect::<qcfd_core::Result<Vec<_>>>()?;
    write_samples(dir, &samples)?;
    say(
        out,
        format_args!(
            "preprocessed {} beats into {}",
            samples.len(),
            dir.display()
        ),
    )
}

fn train(cfg: &RunConfig, data: &Path, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let samples = read_samples(data)?;
    let base = cfg.train_config();
    let split = split_dataset(&samples, base.seed)?;
    let (train_cfg, outcome) = if cfg.train.grid_search {
        let g = grid_search(&split, &base)?;
        (
            qcfd_core::gan::TrainConfig {
                weights: g.best,
                ..base
            },
            g.outcome,
        )
    } else {
        (base, train_on_split(&split, &base)?)
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut ckpt = Checkpoint::new(cfg, train_cfg, &outcome);
    ckpt.test_per_class = split
        .test
        .iter()
        .filter(|s| s.label == BeatLabel::Normal)
        .count();
    ckpt.write(&dir.join(CHECKPOINT_FILE))?;
    let history = dir.join(HISTORY_FILE);
    let mut w =
        csv::Writer::from_path(&history).map_err(|e| CliError::data(&history, e.to_string()))?;
    for rec in &outcome.history {
        w.serialize(rec)
            .map_err(|e| CliError::data(&history, e.to_string()))?;
    }
    w.flush().map_err(io(&history))?;
    write_samples(&dir.join(TEST_DIR), &split.test)?;
    let best = outcome
        .best_epoch
        .map_or("none".to_string(), |e| e.to_string());
    say(
        out,
        format_args!(
            "trained {} epochs (best {best}) into {}",
            outcome.history.len(),
            dir.display()
        ),
    )
}

fn generate(
    cfg: &RunConfig,
    checkpoint: &Path,
    n: Option<usize>,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let ckpt = Checkpoint::read(checkpoint)?;
    let n = n
        .or((cfg.eval.n_per_class > 0).then_some(cfg.eval.n_per_class))
        .unwrap_or(ckpt.test_per_class);
    if n == 0 {
        return Err(CliError::Config(
            "nothing to generate: n_per_class is 0".into(),
        ));
    }
    let samples = ckpt
        .generators
        .generate(n, rng::derived(cfg.seed, 0x6e7).random())?;
    write_samples(dir, &samples)?;
    say(
        out,
        format_args!("generated {} samples into {}", samples.len(), dir.display()),
    )
}

fn parse_synth(arg: &str) -> Result<(String, PathBuf)> {
    match arg.split_once('=') {
        Some((name, dir)) if !name.is_empty() && !dir.is_empty() => {
            Ok((name.to_string(), PathBuf::from(dir)))
        }
        _ => Err(CliError::Usage(format!("--synth '{arg}' is not NAME=DIR"))),
    }
}

fn run_evaluate(
    cfg: &RunConfig,
    real_dir: &Path,
    synth: &[String],
    checkpoint: Option<&Path>,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let named = synth
        .iter()
        .map(|s| parse_synth(s))
        .collect::<Result<Vec<_>>>()?;
    let real = read_samples(real_dir)?;
    let sets = named
        .into_iter()
        .map(|(name, p)| Ok((name, read_samples(&p)?)))
        .collect::<Result<Vec<(String, Vec<TriModalSample>)>>>()?;
    let (reference, binning, model_hash) = match checkpoint {
        Some(p) => {
            let c = Checkpoint::read(p)?;
            (c.reference, c.binning, Some(c.config_hash))
        }
        None => {
            let t = cfg.train_config();
            let seed = rng::derived(cfg.seed, 0x4ef).random();
            (
                ReferenceModels::train(&real, t.reference, seed)?,
                fit_binning(&real, t.bins)?,
                None,
            )
        }
    };
    let report = evaluate(&reference, &real, &sets, &binning, &cfg.dsp_profile()?)?;
    let doc = ReportDocument {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        model_config_hash: model_hash,
        report,
    };
    write_report(&doc, dir, cfg.eval.hist_bins)?;
    for s in &doc.report.sets {
        say(
            out,
            format_args!(
                "{}: sigma2 {:.4} delta {:.4} c_ratio {:.3} e_rms {:.2}%",
                s.name, s.raw.sigma2, s.raw.delta, s.raw.c_ratio, s.raw.e_rms
            ),
        )?;
    }
    Ok(())
}

fn scores(input: &Path, dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let (sigma2_real, rows) = read_raw_metrics(input)?;
    let lines = score_table(sigma2_real, &rows);
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(io(d))?;
            let path = d.join(SCORES_FILE);
            let file = std::fs::File::create(&path).map_err(io(&path))?;
            write_score_lines(file, &lines).map_err(|e| CliError::data(&path, e.to_string()))
        }
        None => {
            write_score_lines(out, &lines).map_err(|e| CliError::data("<stdout>", e.to_string()))
        }
    }
}
