use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use diinn_cli::commands::ablate::AblateArgs;
use diinn_cli::commands::bench::BenchArgs;
use diinn_cli::commands::eval::{EvalArgs, Method};
use diinn_cli::commands::gradcheck::GradcheckArgs;
use diinn_cli::commands::sr::{Size, SrArgs, Target};
use diinn_cli::commands::train::TrainArgs;
use diinn_cli::commands::{self, ConfigSource};
use diinn_cli::config::KEY_DOCS;
use diinn_cli::{exit_code, RunConfig};

/// Arbitrary-scale super-resolution with a dual interactive implicit decoder.
#[derive(Parser)]
#[command(name = "diinn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigFlags {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set hidden=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl From<ConfigFlags> for ConfigSource {
    fn from(f: ConfigFlags) -> Self {
        ConfigSource { path: f.config, overrides: f.sets }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train on a folder of PNG/BMP images.
    Train {
        #[command(flatten)]
        config: ConfigFlags,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from a checkpoint's weights, optimizer state and step.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Super-resolve one image.
    Sr {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, conflicts_with = "size", required_unless_present = "size")]
        scale: Option<f64>,
        /// Exact output size, HxW.
        #[arg(long)]
        size: Option<Size>,
        #[arg(long)]
        output: PathBuf,
    },
    /// PSNR/SSIM/LR-PSNR over a dataset folder.
    Eval {
        #[command(flatten)]
        config: ConfigFlags,
        #[arg(long, default_value = "model")]
        method: Method,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated scales; the config's eval_scales otherwise.
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
        /// Per-image CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Train and evaluate decoder variants (a)-(f).
    Ablate {
        #[command(flatten)]
        config: ConfigFlags,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        eval_data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of a-f; all six by default.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<char>,
        /// Comma-separated scales; 3.14,4,8 by default.
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
    },
    /// Forward-pass timing per output size.
    Bench {
        #[command(flatten)]
        config: ConfigFlags,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "48x48")]
        input_size: Size,
        #[arg(long, value_delimiter = ',', default_value = "128x128,256x256,512x512")]
        output_sizes: Vec<Size>,
        #[arg(long, default_value_t = 100)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
    },
    /// Finite-difference check of every model gradient; exits 1 on failure.
    Gradcheck {
        #[command(flatten)]
        config: ConfigFlags,
        #[arg(long, default_value_t = 6)]
        lr_size: usize,
        #[arg(long, default_value_t = 2)]
        scale: usize,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
    /// Print the effective configuration (defaults plus overrides).
    Config {
        #[command(flatten)]
        config: ConfigFlags,
        /// Start from the tiny model instead of the full-size defaults.
        #[arg(long)]
        tiny: bool,
        /// List every key with its meaning.
        #[arg(long)]
        keys: bool,
    },
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { config, data, out, resume } => {
            commands::train::run(&TrainArgs { config: config.into(), data, out, resume })?;
        }
        Command::Sr { model, input, scale, size, output } => {
            let target = match (scale, size) {
                (Some(s), _) => Target::Scale(s),
                (None, Some(Size(h, w))) => Target::Size(h, w),
                (None, None) => unreachable!("clap requires one of --scale/--size"),
            };
            let (h, w) = commands::sr::run(&SrArgs { model, input, target, output })?;
            println!("wrote {h}x{w}");
        }
        Command::Eval { config, method, model, dataset, scales, csv, threads } => {
            commands::eval::run(&EvalArgs { config: config.into(), method, model, dataset, scales, csv, threads })?;
        }
        Command::Ablate { config, data, eval_data, out, variants, scales } => {
            commands::ablate::run(&AblateArgs { config: config.into(), data, eval_data, out, variants, scales })?;
        }
        Command::Bench { config, model, input_size, output_sizes, repeats, warmup } => {
            commands::bench::run(&BenchArgs {
                config: config.into(),
                model,
                input: input_size,
                outputs: output_sizes,
                repeats,
                warmup,
            })?;
        }
        Command::Gradcheck { config, lr_size, scale, step } => {
            commands::gradcheck::run(&GradcheckArgs { config: config.into(), lr_size, scale, step })?;
        }
        Command::Config { config, tiny, keys } => {
            if keys {
                for (k, doc) in KEY_DOCS {
                    println!("{k:<16} {doc}");
                }
            } else {
                let base = if tiny { RunConfig::tiny() } else { RunConfig::default() };
                println!("{}", ConfigSource::from(config).resolve_over(base)?.to_json());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = dispatch(cli.command);
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(exit_code(&result) as u8)
}
