//! Training loop: per-epoch shuffled batches, L1 loss, Adam with step-halving learning rate.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::data::{batches_per_epoch, sample_batch, DatasetFolder, TrainingPair};
use crate::error::{arg_err, Error, Result};
use crate::model::{Checkpoint, TrainingMeta};
use crate::numcore::{adam_step, AdamConfig, AdamState, Graph, Tape};
use crate::{Model, Tensor};

pub const LOSS_CSV: &str = "loss.csv";
pub const EPOCH_CSV: &str = "epochs.csv";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub scales: Vec<usize>,
    pub patch_base: usize,
    pub batch_hr: usize,
    pub epochs: u64,
    /// Stop after this many optimizer steps in total, even mid-epoch.
    pub max_steps: Option<u64>,
    pub lr0: f64,
    pub halve_every: u64,
    pub flip_prob: f64,
    pub seed: u64,
    pub antialias: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scales: vec![2, 3, 4],
            patch_base: 48,
            batch_hr: 4,
            epochs: 1000,
            max_steps: None,
            lr0: 1e-4,
            halve_every: 200,
            flip_prob: 0.5,
            seed: 0,
            antialias: true,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.contains(&0) {
            return arg_err("scales must be a non-empty list of positive integers");
        }
        if self.patch_base == 0 || self.batch_hr == 0 || self.halve_every == 0 {
            return arg_err("patch_base, batch_hr and halve_every must be positive");
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return arg_err("flip_prob must lie in [0, 1]");
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return arg_err("lr0 must be a finite non-negative number");
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: u64) -> f64 {
        self.lr0 * 0.5f64.powi((epoch / self.halve_every.max(1)) as i32)
    }

    pub fn adam(&self, epoch: u64) -> AdamConfig {
        AdamConfig { lr: self.learning_rate(epoch), beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub epoch: u64,
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub mean_loss: f64,
    pub lr: f64,
    pub steps: u64,
    pub best: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

/// Mean L1 loss over `pairs` and its gradient with respect to every parameter.
pub fn loss_and_gradients(model: &Model<f32>, pairs: &[TrainingPair]) -> Result<(f64, Vec<Tensor<f32>>)> {
    if pairs.is_empty() {
        return arg_err("empty batch");
    }
    let mut grads: Vec<Tensor<f32>> = model.params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
    let weight = 1.0 / pairs.len() as f32;
    let mut total = 0.0f64;
    for pair in pairs {
        let mut tape = Tape::new();
        let params = model.params.bind(&mut tape, true);
        let [c, h, w] = three(pair.lr.shape())?;
        let [_, oh, ow] = three(pair.hr.shape())?;
        let lr = tape.constant(pair.lr.clone().reshape(&[1, c, h, w])?);
        let hr = tape.constant(pair.hr.clone().reshape(&[1, c, oh, ow])?);
        let pred = model.forward(&mut tape, &params, &lr, oh, ow)?;
        let loss = tape.l1_loss(&pred, &hr)?;
        total += tape.value(&loss).item() as f64;
        let scaled = tape.scale(&loss, weight);
        tape.backward(scaled)?;
        for (acc, node) in grads.iter_mut().zip(params.nodes()) {
            if let Some(g) = tape.grad(*node) {
                acc.accumulate(g);
            }
        }
    }
    Ok((total / pairs.len() as f64, grads))
}

fn three(shape: &[usize]) -> Result<[usize; 3]> {
    match shape {
        &[a, b, c] => Ok([a, b, c]),
        _ => Err(Error::Dimension(format!("expected a [C,H,W] patch, got {shape:?}"))),
    }
}

/// Owns a model and its optimizer state for one training session.
pub struct Trainer {
    pub model: Model<f32>,
    pub optimizer: AdamState<f32>,
    pub meta: TrainingMeta,
    pub cfg: TrainConfig,
}

impl Trainer {
    pub fn new(model: Model<f32>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let optimizer = AdamState::new(model.params.tensors());
        let meta = TrainingMeta {
            antialias: cfg.antialias,
            omega0: model.config.decoder.omega0,
            ..TrainingMeta::default()
        };
        Ok(Self { model, optimizer, meta, cfg })
    }

    /// Continues from a checkpoint's weights, optimizer moments and step count.
    pub fn resume(ckpt: Checkpoint, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let model = ckpt.model()?;
        let optimizer = match ckpt.optimizer {
            Some(state) => state,
            None => AdamState::new(model.params.tensors()),
        };
        let mut meta = ckpt.meta;
        meta.antialias = cfg.antialias;
        Ok(Self { model, optimizer, meta, cfg })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(&self.model, Some(self.optimizer.clone()), self.meta.clone())
    }

    /// One optimizer step on `pairs`; parameters are untouched if the loss is not finite.
    pub fn step(&mut self, pairs: &[TrainingPair], epoch: u64) -> Result<f64> {
        let (loss, grads) = loss_and_gradients(&self.model, pairs)?;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch, step: self.meta.step });
        }
        adam_step(self.model.params.tensors_mut(), &grads, &mut self.optimizer, &self.cfg.adam(epoch))?;
        self.meta.step += 1;
        Ok(loss)
    }

    /// Runs until `cfg.epochs` epochs or `cfg.max_steps` steps are complete.
    ///
    /// With `out_dir`, appends to the loss logs and writes `last.ckpt` at every
    /// epoch end (and on stopping) and `best.ckpt` whenever the epoch loss improves.
    pub fn run(
        &mut self,
        dataset: &DatasetFolder,
        out_dir: Option<&Path>,
        mut on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<TrainOutcome> {
        let per_epoch = batches_per_epoch(dataset.len(), self.cfg.batch_hr) as u64;
        let mut logs = match out_dir {
            Some(dir) => Some(Logs::open(dir, self.meta.step > 0)?),
            None => None,
        };
        let mut steps = Vec::new();
        let mut epochs = Vec::new();
        let limit = self.cfg.max_steps.unwrap_or(u64::MAX);
        let mut epoch = self.meta.step / per_epoch;
        let mut partial = (0.0f64, 0u64);
        while epoch < self.cfg.epochs && self.meta.step < limit {
            let lr = self.cfg.learning_rate(epoch);
            let first = self.meta.step - epoch * per_epoch;
            for batch in first..per_epoch {
                if self.meta.step >= limit {
                    break;
                }
                let pairs = sample_batch(dataset, &self.cfg, epoch, batch as usize)?;
                let loss = self.step(&pairs, epoch)?;
                let rec = StepRecord { epoch, step: self.meta.step, loss, lr };
                if let Some(l) = logs.as_mut() {
                    l.step(&rec)?;
                }
                steps.push(rec);
                partial.0 += loss;
                partial.1 += 1;
                self.meta.loss = Some(loss);
            }
            if self.meta.step < (epoch + 1) * per_epoch {
                break;
            }
            let mean_loss = partial.0 / partial.1.max(1) as f64;
            partial = (0.0, 0);
            let best = self.meta.best_loss.is_none_or(|b| mean_loss < b);
            self.meta.epoch = epoch + 1;
            self.meta.loss = Some(mean_loss);
            if best {
                self.meta.best_loss = Some(mean_loss);
            }
            let rec = EpochRecord { epoch, mean_loss, lr, steps: self.meta.step, best };
            info!("epoch {epoch}: loss {mean_loss:.6} lr {lr:.3e}{}", if best { " (best)" } else { "" });
            if let (Some(l), Some(dir)) = (logs.as_mut(), out_dir) {
                l.epoch(&rec)?;
                let ckpt = self.checkpoint();
                ckpt.save(&dir.join(LAST_CHECKPOINT))?;
                if best {
                    ckpt.save(&dir.join(BEST_CHECKPOINT))?;
                }
            }
            on_epoch(&rec);
            epochs.push(rec);
            epoch += 1;
        }
        if partial.1 > 0 {
            self.meta.loss = Some(partial.0 / partial.1 as f64);
        }
        let checkpoint = self.checkpoint();
        if let Some(dir) = out_dir {
            checkpoint.save(&dir.join(LAST_CHECKPOINT))?;
        }
        Ok(TrainOutcome { checkpoint, steps, epochs })
    }
}

/// Trains a fresh session without writing anything to disk.
pub fn train(model: Model<f32>, dataset: &DatasetFolder, cfg: &TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(model, cfg.clone())?.run(dataset, None, |_| {})
}

struct Logs {
    steps: fs::File,
    epochs: fs::File,
}

impl Logs {
    fn open(dir: &Path, append: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let open = |name: &str, header: &str| -> Result<fs::File> {
            let path: PathBuf = dir.join(name);
            let fresh = !append || !path.exists();
            let mut f = OpenOptions::new().create(true).write(true).append(!fresh).truncate(fresh).open(&path)?;
            if fresh {
                writeln!(f, "{header}")?;
            }
            Ok(f)
        };
        Ok(Self {
            steps: open(LOSS_CSV, "epoch,step,loss,lr")?,
            epochs: open(EPOCH_CSV, "epoch,mean_loss,lr,steps")?,
        })
    }

    fn step(&mut self, r: &StepRecord) -> Result<()> {
        writeln!(self.steps, "{},{},{:.8},{:e}", r.epoch, r.step, r.loss, r.lr)?;
        Ok(())
    }

    fn epoch(&mut self, r: &EpochRecord) -> Result<()> {
        writeln!(self.epochs, "{},{:.8},{:e},{}", r.epoch, r.mean_loss, r.lr, r.steps)?;
        Ok(())
    }
}
