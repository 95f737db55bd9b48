use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{score_model, Aggregate, InferSettings};
use crate::sequence::PulseSequence;
use crate::simulator::read_dataset;
use crate::smcf::{backward, save_checkpoint, CheckpointMeta, LossBreakdown, Model, ModelConfig, Sample};

use super::adam::{adam_step, AdamState};
use super::windows::training_windows;
use super::TrainConfig;

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 1 << 40;

/// Model, optimizer state and step counter.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Model<f64>,
    pub config: TrainConfig,
    pub adam: AdamState<f64>,
    pub step: u64,
}

impl Trainer {
    /// Fresh model initialised from `config.seed`.
    pub fn new(model_config: ModelConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            model: Model::new(model_config, config.seed)?,
            adam: AdamState::new(&model_config),
            config,
            step: 0,
        })
    }

    /// One optimizer step on `batch`. On a non-finite loss or gradient the
    /// model is left as it was.
    pub fn step(&mut self, batch: &[Sample]) -> Result<LossBreakdown> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(DROPOUT_STREAM + self.step);
        let seeds: Vec<u64> = batch.iter().map(|_| rng.next_u64()).collect();
        let weights = self.config.weights_at(self.step);
        let (mut loss, grads) = backward(batch, &self.model, &weights, Some(&seeds))?;
        let lr = self.config.lr_at(self.step);
        adam_step(&mut self.model.params, &grads, &mut self.adam, lr, &self.config.adam)?;
        self.step += 1;
        // keep the configured coefficients visible in baseline runs
        loss.weights = Some(weights);
        Ok(loss)
    }

    pub fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            step: self.step,
            seed: self.config.seed,
            weights: self.config.effective_weights(),
            baseline: self.config.baseline,
        }
    }

    fn epoch_order(&self, epoch: usize, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(SHUFFLE_STREAM + epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order
    }
}

/// Emitted after every step and every held-out evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Progress {
    Step { step: u64, epoch: usize, loss: LossBreakdown },
    Validation { step: u64, scores: Aggregate, improved: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub steps: u64,
    pub epochs: usize,
    pub first_loss: Option<LossBreakdown>,
    pub last_loss: Option<LossBreakdown>,
    /// Step and scores of the best held-out evaluation.
    pub best: Option<(u64, Aggregate)>,
    pub stopped_early: bool,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
}

/// Companion file next to the checkpoint: `model.ckpt` -> `model.<tag>`.
pub fn sibling(out: &Path, tag: &str) -> PathBuf {
    out.with_extension(tag)
}

/// Training windows of every record in a dataset file.
pub fn dataset_windows(path: &Path, model_config: &ModelConfig) -> Result<Vec<Sample>> {
    let ds = read_dataset(path)?;
    let per_record = ds
        .records
        .par_iter()
        .map(|r| training_windows(&r.sequence()?, model_config.seq_len, model_config.lookahead))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_record.into_iter().flatten().collect())
}

/// Train from dataset files. `out` receives the final checkpoint (the best
/// held-out one when `val` is given); `<out>.metrics.csv` logs every step.
pub fn train(
    model_config: ModelConfig,
    config: TrainConfig,
    dataset: &Path,
    val: Option<&Path>,
    out: &Path,
    progress: &mut dyn FnMut(&Progress),
) -> Result<TrainOutcome> {
    let samples = dataset_windows(dataset, &model_config)?;
    let val_seqs = match val {
        Some(p) => read_dataset(p)?
            .records
            .iter()
            .map(|r| r.sequence())
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let mut trainer = Trainer::new(model_config, config)?;
    train_samples(&mut trainer, &samples, &val_seqs, out, progress)
}

/// The training loop over prepared windows.
pub fn train_samples(
    trainer: &mut Trainer,
    samples: &[Sample],
    val: &[PulseSequence],
    out: &Path,
    progress: &mut dyn FnMut(&Progress),
) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cfg = trainer.config;
    let metrics_path = sibling(out, "metrics.csv");
    let mut metrics = BufWriter::new(File::create(&metrics_path)?);
    writeln!(metrics, "step,ce,l2,l3,l4,total")?;
    let mut val_log = if val.is_empty() {
        None
    } else {
        let mut w = BufWriter::new(File::create(sibling(out, "val.csv"))?);
        writeln!(w, "step,acc_link,acc_nor,v_1m")?;
        Some(w)
    };
    let last_path = sibling(out, "last.ckpt");

    let mut outcome = TrainOutcome {
        steps: 0,
        epochs: 0,
        first_loss: None,
        last_loss: None,
        best: None,
        stopped_early: false,
        checkpoint: out.to_path_buf(),
        metrics: metrics_path,
    };
    let mut stale = 0usize;
    let budget = cfg.max_steps.unwrap_or(u64::MAX);
    let epochs = if cfg.max_steps.is_some() && cfg.epochs == 0 {
        usize::MAX
    } else {
        cfg.epochs
    };

    // Held-out evaluation: the progress event, and whether to stop.
    let mut evaluate = |trainer: &Trainer, outcome: &mut TrainOutcome, stale: &mut usize| -> Result<Option<(Progress, bool)>> {
        let Some(log) = val_log.as_mut() else { return Ok(None) };
        let scores = Aggregate::of(&score_model(
            &trainer.model,
            val,
            InferSettings::for_model(&trainer.model),
            cfg.val_decode,
        )?);
        writeln!(log, "{},{},{},{}", trainer.step, scores.acc_link, scores.acc_nor, scores.v_1m)?;
        log.flush()?;
        let improved = outcome.best.is_none_or(|(_, b)| scores.acc_link > b.acc_link);
        if improved {
            outcome.best = Some((trainer.step, scores));
            save_checkpoint(out, &trainer.model, &trainer.meta())?;
            *stale = 0;
        } else {
            *stale += 1;
        }
        let event = Progress::Validation {
            step: trainer.step,
            scores,
            improved,
        };
        Ok(Some((event, cfg.patience > 0 && *stale >= cfg.patience)))
    };
    let mut validate = |trainer: &Trainer, outcome: &mut TrainOutcome, stale: &mut usize, progress: &mut dyn FnMut(&Progress)| -> Result<bool> {
        Ok(match evaluate(trainer, outcome, stale)? {
            Some((event, stop)) => {
                progress(&event);
                stop
            }
            None => false,
        })
    };

    'epochs: for epoch in 0..epochs {
        let order = trainer.epoch_order(epoch, samples.len());
        for chunk in order.chunks(cfg.batch_size) {
            if trainer.step >= budget {
                break 'epochs;
            }
            let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let loss = match trainer.step(&batch) {
                Ok(l) => l,
                Err(e) => {
                    metrics.flush()?;
                    save_checkpoint(&last_path, &trainer.model, &trainer.meta())?;
                    if outcome.best.is_none() {
                        save_checkpoint(out, &trainer.model, &trainer.meta())?;
                    }
                    return Err(Error::NonFinite(format!(
                        "training stopped at step {}: {e}; last good weights kept",
                        trainer.step
                    )));
                }
            };
            writeln!(
                metrics,
                "{},{},{},{},{},{}",
                trainer.step, loss.ce, loss.l2, loss.l3, loss.l4, loss.total
            )?;
            outcome.first_loss.get_or_insert(loss);
            outcome.last_loss = Some(loss);
            progress(&Progress::Step {
                step: trainer.step,
                epoch,
                loss,
            });
            if cfg.checkpoint_every > 0 && trainer.step % cfg.checkpoint_every == 0 {
                save_checkpoint(&last_path, &trainer.model, &trainer.meta())?;
            }
            if cfg.val_every > 0 && trainer.step % cfg.val_every == 0 && validate(trainer, &mut outcome, &mut stale, progress)? {
                outcome.stopped_early = true;
                break 'epochs;
            }
        }
        outcome.epochs = epoch + 1;
        if cfg.val_every == 0 && validate(trainer, &mut outcome, &mut stale, progress)? {
            outcome.stopped_early = true;
            break;
        }
    }
    metrics.flush()?;
    outcome.steps = trainer.step;
    save_checkpoint(&last_path, &trainer.model, &trainer.meta())?;
    if outcome.best.is_none() {
        save_checkpoint(out, &trainer.model, &trainer.meta())?;
    }
    Ok(outcome)
}
