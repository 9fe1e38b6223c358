//! `genlab`: reproducible 2D generalization experiments from one config
//! file. Subcommands generate datasets, run experiments, render figures,
//! and compute region-wise metrics.

mod config;
mod ops;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ops::RenderKind;
use run::RunOptions;

#[derive(Parser)]
#[command(name = "genlab", version, about = "2D generalization workbench")]
struct Cli {
    /// Override the experiment seed (run only).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory (run only).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a builtin dataset/mask or a rendered scene JSON as PGM.
    GenData {
        /// theta_l, theta_c, mask, or a path to a SceneSpec .json file.
        name: String,
        out_path: PathBuf,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
    },
    /// Run a full experiment described by a JSON config file.
    Run { config: PathBuf },
    /// Render a figure from a saved model file or a mask PGM.
    Render {
        /// Network file, nu-SVC model file, or mask PGM (for distance-map).
        model: PathBuf,
        kind: KindArg,
        out_path: PathBuf,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
    },
    /// Region-wise MSE of a prediction PGM against a ground-truth PGM.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// Row name in the printed table.
        #[arg(long, default_value = "model")]
        name: String,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Surface,
    Hyperplanes,
    DistanceMap,
    Binary,
}

impl From<KindArg> for RenderKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Surface => RenderKind::Surface,
            KindArg::Hyperplanes => RenderKind::Hyperplanes,
            KindArg::DistanceMap => RenderKind::DistanceMap,
            KindArg::Binary => RenderKind::Binary,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData {
            name,
            out_path,
            width,
            height,
        } => ops::cmd_gen_data(&name, &out_path, width, height),
        Command::Run { config } => run::cmd_run(
            &config,
            &RunOptions {
                seed_override: cli.seed,
                out_override: cli.out,
                quiet: cli.quiet,
            },
        ),
        Command::Render {
            model,
            kind,
            out_path,
            width,
            height,
        } => ops::cmd_render(&model, kind.into(), &out_path, width, height),
        Command::Metrics {
            pred,
            truth,
            mask,
            name,
            csv,
        } => ops::cmd_metrics(&pred, &truth, &mask, &name, csv.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("genlab: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
