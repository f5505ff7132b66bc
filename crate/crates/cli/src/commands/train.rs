use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use diinn::data::DatasetFolder;
use diinn::model::Checkpoint;
use diinn::train::{EpochRecord, TrainOutcome, Trainer};
use diinn::Model;
use log::warn;

use super::ConfigSource;
use crate::RunConfig;

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub config: ConfigSource,
    pub data: PathBuf,
    pub out: PathBuf,
    pub resume: Option<PathBuf>,
}

pub fn run(args: &TrainArgs) -> Result<TrainOutcome> {
    let cfg = args.config.resolve()?;
    train_with(&cfg, &args.data, &args.out, args.resume.as_deref(), true)
}

/// Trains under `cfg`, writing checkpoints, loss logs and the effective config to `out`.
pub fn train_with(cfg: &RunConfig, data: &Path, out: &Path, resume: Option<&Path>, verbose: bool) -> Result<TrainOutcome> {
    let dataset = DatasetFolder::open(data).with_context(|| format!("loading training data from {}", data.display()))?;
    cfg.echo(out)?;
    let mut trainer = match resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            if ckpt.config != cfg.model() {
                warn!("resuming with the checkpoint's model configuration, which differs from the run config");
            }
            Trainer::resume(ckpt, cfg.train())?
        }
        None => Trainer::new(Model::new(cfg.model())?, cfg.train())?,
    };
    let outcome = trainer.run(&dataset, Some(out), |e| {
        if verbose {
            println!("{}", epoch_line(e));
        }
    })?;
    Ok(outcome)
}

pub fn epoch_line(e: &EpochRecord) -> String {
    format!(
        "epoch {:>5}  loss {:.6}  lr {:.3e}  steps {:>7}{}",
        e.epoch,
        e.mean_loss,
        e.lr,
        e.steps,
        if e.best { "  *" } else { "" }
    )
}
