use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use pdvol_cli::config::{KeyValues, RunConfig, OUTPUT_DIR_ENV};
use pdvol_cli::{cmd_augment, cmd_ingest, cmd_plot, cmd_run, cmd_synth, PlotKind, PlotRequest};

/// Volumetric MRI PD/HC classification with nested cross-validation.
///
/// Settings come from an optional `key = value` config file; flags and
/// `--set key=value` overrides win over it.
#[derive(Debug, Parser)]
#[command(name = "pdvol", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Directory of FreeSurfer-style stats files.
    #[arg(long, global = true)]
    stats_dir: Option<String>,
    /// Demographics CSV for `--stats-dir` input.
    #[arg(long, global = true)]
    demographics: Option<String>,
    /// Subjects to exclude as soft failures, one id per line.
    #[arg(long, global = true)]
    exclusions: Option<String>,
    /// Dataset interchange CSV.
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Synthetic cohort preset: ppmi or balanced.
    #[arg(long, global = true)]
    synth: Option<String>,
    /// Output directory [default: $PDVOL_OUTPUT_DIR, else pdvol-out].
    #[arg(long, short, global = true)]
    output_dir: Option<String>,
    /// Worker threads [default: available cores].
    #[arg(long, global = true)]
    threads: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble a dataset CSV and manifest from a stats directory.
    Ingest,
    /// Write a synthetic cohort.
    Synth,
    /// Append augmented HC rows to the input dataset.
    Augment {
        /// subtract, reflect
        #[arg(long)]
        rule: Option<String>,
    },
    /// Nested cross-validated grid search; writes report, per-fold and ROC CSVs.
    Run {
        /// Comma-separated subset of LR,RF,SVM.
        #[arg(long)]
        classifiers: Option<String>,
        /// paper-order or leakage-safe.
        #[arg(long)]
        leakage_mode: Option<String>,
        /// subtract, reflect or none.
        #[arg(long)]
        augment: Option<String>,
        /// auto, with, without or both.
        #[arg(long)]
        age_sex: Option<String>,
        #[arg(long)]
        outer_k: Option<String>,
        #[arg(long)]
        inner_k: Option<String>,
    },
    /// Render an SVG figure.
    Plot {
        /// feature-dist, pair-scatter or roc.
        #[arg(long)]
        kind: PlotKind,
        /// Feature name; give twice for pair-scatter.
        #[arg(long = "feature")]
        features: Vec<String>,
        /// ROC CSV written by `run`.
        #[arg(long)]
        roc: Option<PathBuf>,
        /// Output SVG path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const INPUT_KEYS: [&str; 3] = ["stats_dir", "dataset", "synth"];

fn key_values(common: &Common, command: &Command) -> Result<KeyValues> {
    let mut kv = match &common.config {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::default(),
    };
    let mut flags: Vec<(&str, &Option<String>)> = vec![
        ("stats_dir", &common.stats_dir),
        ("demographics", &common.demographics),
        ("exclusions", &common.exclusions),
        ("dataset", &common.dataset),
        ("synth", &common.synth),
        ("output_dir", &common.output_dir),
        ("threads", &common.threads),
        ("seed", &common.seed),
    ];
    match command {
        Command::Augment { rule } => flags.push(("augment", rule)),
        Command::Run { classifiers, leakage_mode, augment, age_sex, outer_k, inner_k } => flags.extend([
            ("classifiers", classifiers),
            ("leakage_mode", leakage_mode),
            ("augment", augment),
            ("age_sex", age_sex),
            ("outer_k", outer_k),
            ("inner_k", inner_k),
        ]),
        _ => {}
    }
    // an input chosen on the command line replaces the config file's
    if flags.iter().any(|(k, v)| INPUT_KEYS.contains(k) && v.is_some()) {
        for k in INPUT_KEYS {
            kv.remove(k);
        }
    }
    for (k, v) in flags {
        if let Some(v) = v {
            kv.set(k, v)?;
        }
    }
    for pair in &common.set {
        kv.set_pair(pair)?;
    }
    Ok(kv)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let kv = key_values(&cli.common, &cli.command)?;
    let env_dir = std::env::var(OUTPUT_DIR_ENV).ok();
    let config = || RunConfig::from_key_values(&kv, env_dir.as_deref());
    match &cli.command {
        Command::Ingest => cmd_ingest(&config()?),
        Command::Synth => cmd_synth(&config()?),
        Command::Augment { .. } => cmd_augment(&config()?),
        Command::Run { .. } => cmd_run(&config()?),
        Command::Plot { kind, features, roc, out } => {
            let req = PlotRequest { kind: *kind, features: features.clone(), roc: roc.clone(), out: out.clone() };
            if *kind == PlotKind::Roc && INPUT_KEYS.iter().all(|k| kv.get(k).is_none()) {
                let dir = kv
                    .get("output_dir")
                    .map(str::to_string)
                    .or(env_dir.clone())
                    .unwrap_or_else(|| pdvol_cli::config::DEFAULT_OUTPUT_DIR.into());
                cmd_plot(&req, None, dir.as_ref())
            } else {
                let cfg = config()?;
                cmd_plot(&req, Some(&cfg), &cfg.output_dir)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pdvol: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
