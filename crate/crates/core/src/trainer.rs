//! Deterministic 1vsAll training.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{self, EvalOptions};
use crate::kg::{Split, TripleStore};
use crate::loss::LossSpec;
use crate::model::{Mode, ModelState, Variant};
use crate::optim::AdamState;
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub dim: usize,
    pub loss: LossSpec,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub reciprocal: bool,
    /// Fraction of the training split added as noise; 0 disables.
    pub noise_fraction: f64,
    /// Evaluate on the validation split every this many epochs; 0 = never.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::DistMult,
            dim: 100,
            loss: LossSpec::BCE,
            epochs: 1000,
            lr: 0.01,
            batch_size: 1024,
            seed: 1,
            reciprocal: false,
            noise_fraction: 0.0,
            eval_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.variant.stored_dims(self.dim)?;
        self.loss.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} is not positive",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(Error::NoiseFraction(self.noise_fraction));
        }
        Ok(())
    }
}

/// Applies the configured reciprocal augmentation and noise injection.
pub fn prepare_store(base: &TripleStore, config: &TrainConfig) -> Result<TripleStore> {
    let mut store = if config.reciprocal {
        base.add_reciprocals()?
    } else {
        base.clone()
    };
    if config.noise_fraction > 0.0 {
        store = store.inject_noise(config.noise_fraction, config.seed)?;
    }
    Ok(store)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based epoch number.
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_secs: f64,
    pub valid_mrr: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }

    pub fn total_secs(&self) -> f64 {
        self.epochs.iter().map(|e| e.wall_secs).sum()
    }
}

/// Training order for one epoch: a permutation of `0..len` that depends only
/// on `(seed, epoch, len)`.
pub fn epoch_order(seed: u64, epoch: usize, len: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng::stream(seed, Purpose::Shuffle, epoch as u64));
    order
}

#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub state: ModelState,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig, store: &TripleStore) -> Result<Self> {
        config.validate()?;
        let state = ModelState::init(
            config.variant,
            config.dim,
            store.num_entities(),
            store.num_relations(),
            config.seed,
        )?;
        let adam = AdamState::new(&state, config.lr);
        Ok(Self {
            config,
            state,
            adam,
            epoch: 0,
        })
    }

    /// Runs one batch: forward, loss, backward and (unless `dry`) an update.
    fn batch(&mut self, store: &TripleStore, ids: &[usize], targets: &mut [f64], dry: bool) -> Result<f64> {
        let train = store.train();
        let heads: Vec<usize> = ids.iter().map(|&i| train[i].head).collect();
        let rels: Vec<usize> = ids.iter().map(|&i| train[i].rel).collect();
        let fwd = self.state.forward(&heads, &rels, Mode::Train);
        let ne = store.num_entities();
        let rows = ids.len();
        let (positive, negative) = self.config.loss.target_values();
        let mut upstream = vec![0.0; rows * ne];
        let mut total = 0.0;
        for (row, &i) in ids.iter().enumerate() {
            let tail = train[i].tail;
            targets.fill(negative);
            targets[tail] = positive;
            let grad = &mut upstream[row * ne..(row + 1) * ne];
            total += self.config.loss.evaluate(fwd.logits_row(row), targets, grad)?;
        }
        let loss = total / rows as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch: self.epoch + 1,
                batch: 0,
                loss: self.config.loss.to_string(),
                value: loss,
            });
        }
        if !dry {
            let scale = 1.0 / rows as f64;
            upstream.iter_mut().for_each(|g| *g *= scale);
            let grads = self.state.backward(&fwd, &upstream)?;
            self.state.update_running_stats(&fwd);
            self.adam.step(&mut self.state, &grads)?;
        }
        Ok(loss)
    }

    fn pass(&mut self, store: &TripleStore, dry: bool) -> Result<f64> {
        let order = epoch_order(self.config.seed, self.epoch, store.train().len());
        let mut targets = vec![0.0; store.num_entities()];
        let mut sum = 0.0;
        let mut batches = 0;
        for (b, ids) in order.chunks(self.config.batch_size).enumerate() {
            let loss = self.batch(store, ids, &mut targets, dry).map_err(|e| match e {
                Error::Diverged { epoch, loss, value, .. } => Error::Diverged {
                    epoch,
                    batch: b,
                    loss,
                    value,
                },
                other => other,
            })?;
            sum += loss;
            batches += 1;
        }
        Ok(sum / batches as f64)
    }

    /// Mean batch loss of the next epoch's batches, without updating anything.
    pub fn probe_loss(&self, store: &TripleStore) -> Result<f64> {
        self.clone().pass(store, true)
    }

    pub fn run_epoch(&mut self, store: &TripleStore) -> Result<EpochLog> {
        let start = Instant::now();
        let mean_loss = self.pass(store, false)?;
        self.epoch += 1;
        let valid_mrr = if self.config.eval_every > 0
            && self.epoch.is_multiple_of(self.config.eval_every)
            && !store.valid().is_empty()
        {
            Some(eval::evaluate(&self.state, store, Split::Valid, EvalOptions::default())?.mrr)
        } else {
            None
        };
        Ok(EpochLog {
            epoch: self.epoch,
            mean_loss,
            wall_secs: start.elapsed().as_secs_f64(),
            valid_mrr,
        })
    }

    /// Trains until `config.epochs` epochs are complete.
    pub fn run(&mut self, store: &TripleStore) -> Result<TrainLog> {
        self.run_with(store, |_| {})
    }

    /// Like [`Trainer::run`], calling `on_epoch` after every epoch.
    pub fn run_with(&mut self, store: &TripleStore, mut on_epoch: impl FnMut(&EpochLog)) -> Result<TrainLog> {
        if self.state.num_entities() != store.num_entities() || self.state.num_relations() != store.num_relations() {
            return Err(Error::VocabMismatch(
                "model and training data disagree on |E| or |R|".into(),
            ));
        }
        let mut log = TrainLog::default();
        while self.epoch < self.config.epochs {
            let entry = self.run_epoch(store)?;
            on_epoch(&entry);
            log.epochs.push(entry);
        }
        Ok(log)
    }
}

/// Trains a fresh model under `config` on `store` (already augmented).
pub fn train(config: &TrainConfig, store: &TripleStore) -> Result<(ModelState, TrainLog)> {
    let mut trainer = Trainer::new(config.clone(), store)?;
    let log = trainer.run(store)?;
    Ok((trainer.state, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossKind;

    fn toy_store() -> TripleStore {
        let t = |h: &str, r: &str, t: &str| (h.to_string(), r.to_string(), t.to_string());
        TripleStore::from_named(
            &[
                t("a", "p", "b"),
                t("b", "p", "c"),
                t("c", "q", "a"),
                t("a", "q", "d"),
                t("d", "p", "e"),
            ],
            &[t("e", "q", "b")],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn epoch_order_is_a_seeded_permutation() {
        let a = epoch_order(1, 0, 50);
        assert_eq!(a, epoch_order(1, 0, 50));
        assert_ne!(a, epoch_order(1, 1, 50));
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn config_guards() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig {
            epochs: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            variant: Variant::KdRel,
            dim: 7,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            noise_fraction: 1.0,
            ..ok
        }
        .validate()
        .is_err());
    }

    #[test]
    fn one_epoch_reduces_loss_on_toy_graph() {
        let store = toy_store();
        for variant in Variant::ALL {
            let config = TrainConfig {
                variant,
                dim: 16,
                epochs: 1,
                batch_size: 5,
                lr: 0.05,
                ..TrainConfig::default()
            };
            let mut trainer = Trainer::new(config, &store).unwrap();
            let before = trainer.probe_loss(&store).unwrap();
            trainer.run(&store).unwrap();
            let after = trainer.probe_loss(&store).unwrap();
            assert!(after < before, "{variant}: {after} !< {before}");
        }
    }

    #[test]
    fn identical_configs_give_identical_runs() {
        let store = toy_store();
        let config = TrainConfig {
            variant: Variant::KdDistMult,
            dim: 9,
            epochs: 5,
            batch_size: 3,
            loss: LossSpec::new(LossKind::LabelRelaxation, 0.1).unwrap(),
            eval_every: 2,
            ..TrainConfig::default()
        };
        let (s1, l1) = train(&config, &store).unwrap();
        let (s2, l2) = train(&config, &store).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(l1.losses(), l2.losses());
        assert!(l1.epochs[1].valid_mrr.is_some());
        assert!(l1.epochs[0].valid_mrr.is_none());
    }

    #[test]
    fn prepare_store_applies_augmentation() {
        let store = toy_store();
        let config = TrainConfig {
            reciprocal: true,
            noise_fraction: 0.1,
            ..TrainConfig::default()
        };
        let prepared = prepare_store(&store, &config).unwrap();
        assert_eq!(prepared.num_relations(), 4);
        assert_eq!(prepared.train().len(), 11);
        assert_eq!(prepared.noise().len(), 1);
    }
}
