//! `sfcgan` command line: synth, train, translate, eval, classify, render.
//!
//! Exit codes: 0 on success, 1 for invalid arguments, configuration or input
//! data, 2 when the run itself fails (I/O, diverging training).

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use sfcgan::checkpoint::ModelCheckpoint;
use sfcgan::classify::{classification_study, write_metrics_csv};
use sfcgan::connectome::{load_manifest, write_matrix_csv, DatasetManifest, Split};
use sfcgan::eval::evaluate_dataset;
use sfcgan::losses::SpPairing;
use sfcgan::render::{render_heatmap, write_edge_list};
use sfcgan::synth::gen_dataset;
use sfcgan::trainer::{self, Trainer};
use thiserror::Error;

pub use config::{defaults_help, RenderConfig, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] sfcgan::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sfcgan", version, about = "Bidirectional FC/SC connectome translation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON run configuration
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for both data synthesis and training
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Disable the structure-preserving loss
    #[arg(long, global = true)]
    no_sp: bool,
    /// PCC pairing of the structure-preserving loss
    #[arg(long, global = true, value_parser = parse_pairing, value_name = "literal|paired")]
    sp_pairing: Option<SpPairing>,
    /// Worker threads (1 = deterministic reference mode)
    #[arg(long, global = true, env = "SFCGAN_THREADS", value_name = "K")]
    threads: Option<usize>,
    /// Fraction of strongest edges kept by `render`
    #[arg(long, global = true, value_name = "RHO")]
    top: Option<f64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dataset directory holding manifest.json
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic paired dataset into the data directory
    Synth,
    /// Train the four networks; writes checkpoint.sfcg and train_log.csv
    Train {
        /// Continue from this checkpoint up to train.epochs
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Translate the test split in both directions into translated/{fc,sc}
    Translate {
        /// Model to use [default: <out_dir>/checkpoint.sfcg]
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Similarity and graph-property report on the test split
    Eval {
        /// Model to use [default: <out_dir>/checkpoint.sfcg]
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Linear SVM on real vs translated test features
    Classify {
        /// Model to use [default: <out_dir>/checkpoint.sfcg]
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Heatmaps and strongest-edge lists for real and translated test subjects
    Render {
        /// Model to use [default: <out_dir>/checkpoint.sfcg]
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
}

fn parse_pairing(s: &str) -> Result<SpPairing, String> {
    match s {
        "literal" => Ok(SpPairing::Literal),
        "paired" => Ok(SpPairing::Paired),
        other => Err(format!("expected literal or paired, got {other:?}")),
    }
}

fn command() -> clap::Command {
    let help = defaults_help();
    Cli::command().after_help(help.clone()).mut_subcommands(|s| s.after_help(help.clone()))
}

/// Runs one invocation; `argv` includes the program name.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches: ArgMatches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_config(o: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = o.seed {
        cfg.synth.seed = seed;
        cfg.train.seed = seed;
    }
    if o.no_sp {
        cfg.train.loss.sp_enabled = false;
    }
    if let Some(p) = o.sp_pairing {
        cfg.train.loss.sp_pairing = p;
    }
    if let Some(t) = o.threads {
        cfg.threads = t;
    }
    if let Some(top) = o.top {
        cfg.render.top = top;
    }
    if let Some(out) = &o.out {
        cfg.out_dir = out.clone();
    }
    if let Some(data) = &o.data {
        cfg.data_dir = data.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.overrides)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} threads: {e}", cfg.threads)))?;
    pool.install(|| match cli.command {
        Command::Synth => synth(&cfg),
        Command::Train { resume } => train(&cfg, resume.as_deref()),
        Command::Translate { checkpoint } => translate(&cfg, checkpoint),
        Command::Eval { checkpoint } => eval(&cfg, checkpoint),
        Command::Classify { checkpoint } => classify(&cfg, checkpoint),
        Command::Render { checkpoint } => render(&cfg, checkpoint),
    })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn manifest(cfg: &RunConfig) -> Result<DatasetManifest, CliError> {
    Ok(load_manifest(&cfg.manifest_path())?)
}

/// Loads the checkpoint (default `<out_dir>/checkpoint.sfcg`) and checks it
/// was built for the dataset's node count.
fn checkpoint(cfg: &RunConfig, path: Option<PathBuf>, data: &DatasetManifest) -> Result<ModelCheckpoint, CliError> {
    let path = path.unwrap_or_else(|| cfg.checkpoint_path());
    let ckpt = ModelCheckpoint::load(&path)?;
    let mut expected = *ckpt.model_config();
    expected.n = data.n;
    ckpt.ensure_compatible(&expected)?;
    Ok(ckpt)
}

fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    create_dir(&cfg.data_dir)?;
    let m = gen_dataset(&cfg.synth, &cfg.data_dir)?;
    let (train, test) = m.split_counts();
    println!("wrote {} ({train} train / {test} test, n = {})", cfg.manifest_path().display(), m.n);
    Ok(())
}

fn train(cfg: &RunConfig, resume: Option<&Path>) -> Result<(), CliError> {
    let data = manifest(cfg)?;
    create_dir(&cfg.out_dir)?;
    let tc = cfg.train;
    let (ckpt, history) = match resume {
        Some(path) => {
            let ckpt = ModelCheckpoint::load(path)?;
            if ckpt.epoch >= tc.epochs {
                trainer::resume(ckpt, &data, tc)?
            } else {
                run_epochs(cfg, Trainer::resume(ckpt, &data, tc)?)?
            }
        }
        None => run_epochs(cfg, Trainer::new(&data, tc)?)?,
    };
    let path = cfg.checkpoint_path();
    ckpt.save(&path)?;
    history.write_csv(&cfg.out_dir.join("train_log.csv"))?;
    println!("wrote {} (epoch {})", path.display(), ckpt.epoch);
    Ok(())
}

fn run_epochs(
    cfg: &RunConfig,
    mut t: Trainer,
) -> Result<(ModelCheckpoint, sfcgan::trainer::TrainHistory), CliError> {
    let total = cfg.train.epochs;
    while !t.is_done() {
        let r = t.run_epoch()?;
        let e = t.epoch();
        eprintln!(
            "epoch {e:>4}/{total}  total {:.4}  gan_g {:.4}  gan_d {:.4}  cyc {:.4}  id {:.4}{}",
            r.total,
            r.gan_g,
            r.gan_d,
            r.cyc,
            r.id,
            match (r.sp_mse, r.sp_pcc) {
                (Some(m), Some(p)) => format!("  sp_mse {m:.4}  sp_pcc {p:.4}"),
                _ => String::new(),
            }
        );
        let every = cfg.train.checkpoint_every;
        if every > 0 && e % every == 0 && e < total {
            t.checkpoint().save(&cfg.out_dir.join(format!("checkpoint_epoch{e}.sfcg")))?;
        }
    }
    let history = t.history().clone();
    Ok((t.into_checkpoint(), history))
}

fn translate(cfg: &RunConfig, ckpt: Option<PathBuf>) -> Result<(), CliError> {
    let data = manifest(cfg)?;
    let ckpt = checkpoint(cfg, ckpt, &data)?;
    let test = data.load_split(Split::Test)?;
    let (fc_dir, sc_dir) = (cfg.out_dir.join("translated/fc"), cfg.out_dir.join("translated/sc"));
    create_dir(&fc_dir)?;
    create_dir(&sc_dir)?;
    for pair in &test {
        let fc = ckpt.models.g_fc.translate(&pair.sc)?;
        let sc = ckpt.models.g_sc.translate(&pair.fc)?;
        write_matrix_csv(fc.values(), &fc_dir.join(format!("{}.csv", pair.id)))?;
        write_matrix_csv(sc.values(), &sc_dir.join(format!("{}.csv", pair.id)))?;
    }
    println!("translated {} test subjects into {}", test.len(), cfg.out_dir.join("translated").display());
    Ok(())
}

fn eval(cfg: &RunConfig, ckpt: Option<PathBuf>) -> Result<(), CliError> {
    let data = manifest(cfg)?;
    let ckpt = checkpoint(cfg, ckpt, &data)?;
    let report = evaluate_dataset(&data, &ckpt, &cfg.thresholds)?;
    create_dir(&cfg.out_dir)?;
    report.write_csv(&cfg.out_dir.join("report.csv"))?;
    let summary = report.summary_table();
    write_text(&cfg.out_dir.join("report_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn classify(cfg: &RunConfig, ckpt: Option<PathBuf>) -> Result<(), CliError> {
    let data = manifest(cfg)?;
    let ckpt = checkpoint(cfg, ckpt, &data)?;
    let rows = classification_study(&data, &ckpt, &cfg.dataset, &cfg.svm)?;
    create_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("classification.csv");
    write_metrics_csv(&rows, &path)?;
    println!("{:<24} {:>8} {:>9} {:>8} {:>8} {:>8}", "testing data", "accuracy", "precision", "recall", "f1", "auc");
    for r in &rows {
        let m = &r.metrics;
        println!(
            "{:<24} {:>8.2} {:>9.2} {:>8.2} {:>8.2} {:>8.2}",
            r.testing_data, m.accuracy, m.precision, m.recall, m.f1, m.auc
        );
    }
    Ok(())
}

fn render(cfg: &RunConfig, ckpt: Option<PathBuf>) -> Result<(), CliError> {
    let data = manifest(cfg)?;
    let ckpt = checkpoint(cfg, ckpt, &data)?;
    let dir = cfg.out_dir.join("render");
    create_dir(&dir)?;
    let test = data.load_split(Split::Test)?;
    for pair in &test {
        let translated_fc = ckpt.models.g_fc.translate(&pair.sc)?;
        let translated_sc = ckpt.models.g_sc.translate(&pair.fc)?;
        for (tag, c) in [
            ("fc", &pair.fc),
            ("sc", &pair.sc),
            ("fc_translated", &translated_fc),
            ("sc_translated", &translated_sc),
        ] {
            render_heatmap(c, &dir.join(format!("{}_{tag}.pgm", pair.id)))?;
            write_edge_list(c, cfg.render.top, &dir.join(format!("{}_{tag}_edges.csv", pair.id)))?;
        }
    }
    println!("rendered {} test subjects into {}", test.len(), dir.display());
    Ok(())
}
