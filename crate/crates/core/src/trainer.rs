//! Alternating discriminator / generator optimization over subject-paired
//! FC/SC batches.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::ModelCheckpoint;
use crate::connectome::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::losses::{self, LossComponents, LossReport, LossWeights, Translations};
use crate::model::{init_models, ModelConfig, Models};
use crate::nn::{AdamState, Bound, Real, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Fakes kept per domain for discriminator updates; 0 disables replay.
    pub replay_buffer_size: usize,
    pub gen_widths: [usize; 2],
    pub disc_widths: [usize; 2],
    pub loss: LossWeights,
    /// Save a checkpoint every this many epochs (0: only the final one).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 1e-4,
            weight_decay: 1e-4,
            batch_size: 4,
            seed: 0,
            replay_buffer_size: 50,
            gen_widths: [16, 32],
            disc_widths: [16, 32],
            loss: LossWeights::default(),
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        self.loss.validate()
    }

    pub fn model_config(&self, n: usize) -> ModelConfig {
        ModelConfig {
            n,
            gen_widths: self.gen_widths,
            disc_widths: self.disc_widths,
        }
    }
}

/// Pool of past generator outputs. Until full, every fake is stored and
/// passed through; afterwards each query returns, with probability ½, a
/// uniformly chosen stored fake (replacing it with the new one).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Vec<f32>>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            items: Vec::new(),
        }
    }

    pub fn with_items(capacity: usize, items: Vec<Vec<f32>>) -> Result<Self> {
        if items.len() > capacity {
            return Err(Error::InvalidArgument(format!(
                "replay buffer holds {} items but capacity is {capacity}",
                items.len()
            )));
        }
        Ok(ReplayBuffer { capacity, items })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Vec<f32>] {
        &self.items
    }

    pub fn query(&mut self, fake: Vec<f32>, rng: &mut impl Rng) -> Vec<f32> {
        if self.capacity == 0 {
            return fake;
        }
        if self.items.len() < self.capacity {
            self.items.push(fake.clone());
            return fake;
        }
        if rng.random_bool(0.5) {
            let k = rng.random_range(0..self.items.len());
            std::mem::replace(&mut self.items[k], fake)
        } else {
            fake
        }
    }

    /// Applies [`query`](Self::query) to every sample of a B×1×n×n batch.
    pub fn query_batch(&mut self, fakes: &Tensor<f32>, rng: &mut impl Rng) -> Result<Tensor<f32>> {
        let (b, _, h, w) = fakes.dims4()?;
        let per = h * w;
        let mut out = Vec::with_capacity(b * per);
        for chunk in fakes.data().chunks(per) {
            out.extend(self.query(chunk.to_vec(), rng));
        }
        Tensor::new(fakes.shape().to_vec(), out)
    }
}

/// Per-epoch averages, in epoch order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrainHistory {
    pub epochs: Vec<LossReport>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// `epoch,gan_g,gan_d,cyc,id,sp_mse,sp_pcc,total`; sp fields are empty
    /// when the structure-preserving loss was disabled.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["epoch", "gan_g", "gan_d", "cyc", "id", "sp_mse", "sp_pcc", "total"])
            .map_err(|e| csv_error(path, e))?;
        for (i, r) in self.epochs.iter().enumerate() {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                (i + 1).to_string(),
                r.gan_g.to_string(),
                r.gan_d.to_string(),
                r.cyc.to_string(),
                r.id.to_string(),
                opt(r.sp_mse),
                opt(r.sp_pcc),
                r.total.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Generator forward pass kept alive between the two updates of a step.
struct GeneratorPass {
    tape: Tape<f32>,
    g_fc: Bound,
    g_sc: Bound,
    x_fc: Var,
    x_sc: Var,
    translations: Translations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPhase {
    BeforeDiscriminator,
    AfterDiscriminator,
    AfterGenerator,
}

/// Stream ids below this are used by model initialization.
const EPOCH_STREAM_BASE: u64 = 1 << 32;

pub struct Trainer {
    cfg: TrainConfig,
    models: Models<f32>,
    adam_g: AdamState<f32>,
    adam_d: AdamState<f32>,
    replay_fc: ReplayBuffer,
    replay_sc: ReplayBuffer,
    history: TrainHistory,
    epoch: usize,
    /// Subject-paired (FC, SC) matrices, row-major f32.
    data: Vec<(Vec<f32>, Vec<f32>)>,
}

fn load_train_data(manifest: &DatasetManifest) -> Result<Vec<(Vec<f32>, Vec<f32>)>> {
    let pairs = manifest.load_split(Split::Train)?;
    if pairs.is_empty() {
        return Err(Error::Manifest("train split is empty".into()));
    }
    let f32s = |m: &crate::connectome::Matrix| m.as_slice().iter().map(|&v| v as f32).collect();
    Ok(pairs.iter().map(|p| (f32s(p.fc.values()), f32s(p.sc.values()))).collect())
}

impl Trainer {
    pub fn new(manifest: &DatasetManifest, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let model_cfg = cfg.model_config(manifest.n);
        let models = init_models::<f32>(&model_cfg, cfg.seed)?;
        let data = load_train_data(manifest)?;
        Ok(Trainer {
            adam_g: AdamState::new(&[models.g_fc.params(), models.g_sc.params()]),
            adam_d: AdamState::new(&[models.d_fc.params(), models.d_sc.params()]),
            replay_fc: ReplayBuffer::new(cfg.replay_buffer_size),
            replay_sc: ReplayBuffer::new(cfg.replay_buffer_size),
            history: TrainHistory::default(),
            epoch: 0,
            models,
            cfg,
            data,
        })
    }

    /// Continues from a checkpoint; `cfg` must describe the same model.
    pub fn resume(ckpt: ModelCheckpoint, manifest: &DatasetManifest, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        ckpt.ensure_compatible(&cfg.model_config(manifest.n))?;
        let data = load_train_data(manifest)?;
        Ok(Trainer {
            replay_fc: ReplayBuffer::with_items(cfg.replay_buffer_size, ckpt.replay_fc)?,
            replay_sc: ReplayBuffer::with_items(cfg.replay_buffer_size, ckpt.replay_sc)?,
            models: ckpt.models,
            adam_g: ckpt.adam_g,
            adam_d: ckpt.adam_d,
            history: ckpt.history,
            epoch: ckpt.epoch,
            cfg,
            data,
        })
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.cfg.epochs
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn models(&self) -> &Models<f32> {
        &self.models
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            train: self.cfg,
            epoch: self.epoch,
            models: self.models.clone(),
            adam_g: self.adam_g.clone(),
            adam_d: self.adam_d.clone(),
            replay_fc: self.replay_fc.items().to_vec(),
            replay_sc: self.replay_sc.items().to_vec(),
            history: self.history.clone(),
        }
    }

    pub fn into_checkpoint(self) -> ModelCheckpoint {
        ModelCheckpoint {
            train: self.cfg,
            epoch: self.epoch,
            models: self.models,
            adam_g: self.adam_g,
            adam_d: self.adam_d,
            replay_fc: self.replay_fc.items,
            replay_sc: self.replay_sc.items,
            history: self.history,
        }
    }

    /// One pass over the shuffled train split; returns the epoch average.
    pub fn run_epoch(&mut self) -> Result<LossReport> {
        self.run_epoch_observed(|_, _| {})
    }

    /// [`run_epoch`](Self::run_epoch), calling `observe` around every
    /// optimizer update.
    pub fn run_epoch_observed(&mut self, mut observe: impl FnMut(StepPhase, &Models<f32>)) -> Result<LossReport> {
        let epoch = self.epoch + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(EPOCH_STREAM_BASE + epoch as u64);
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        order.shuffle(&mut rng);

        let mut reports = Vec::new();
        for batch in order.chunks(self.cfg.batch_size) {
            let step = self.adam_g.step as usize + 1;
            let pass = self.forward_generators(batch)?;
            observe(StepPhase::BeforeDiscriminator, &self.models);
            let (gan_d_fc, gan_d_sc) = self.update_discriminators(&pass, &mut rng, epoch, step)?;
            observe(StepPhase::AfterDiscriminator, &self.models);
            let mut c = self.update_generators(pass, epoch, step)?;
            observe(StepPhase::AfterGenerator, &self.models);
            c.gan_d_fc = gan_d_fc;
            c.gan_d_sc = gan_d_sc;
            reports.push(LossReport::new(&c, &self.cfg.loss)?);
        }
        let mean = LossReport::mean(&reports).expect("train split is non-empty");
        self.history.epochs.push(mean);
        self.epoch = epoch;
        Ok(mean)
    }

    fn batch_tensor(&self, batch: &[usize], fc: bool) -> Tensor<f32> {
        let n = self.models.config().n;
        let mut data = Vec::with_capacity(batch.len() * n * n);
        for &i in batch {
            let (f, s) = &self.data[i];
            data.extend_from_slice(if fc { f } else { s });
        }
        Tensor::new(vec![batch.len(), 1, n, n], data).expect("batch shape")
    }

    fn forward_generators(&self, batch: &[usize]) -> Result<GeneratorPass> {
        let mut tape = Tape::new();
        let g_fc = self.models.g_fc.params().bind(&mut tape, true);
        let g_sc = self.models.g_sc.params().bind(&mut tape, true);
        let x_fc = tape.constant(self.batch_tensor(batch, true));
        let x_sc = tape.constant(self.batch_tensor(batch, false));
        let translations = losses::translate_all(
            &mut tape,
            (&self.models.g_fc, &g_fc),
            (&self.models.g_sc, &g_sc),
            x_fc,
            x_sc,
        )?;
        Ok(GeneratorPass {
            tape,
            g_fc,
            g_sc,
            x_fc,
            x_sc,
            translations,
        })
    }

    fn update_discriminators(
        &mut self,
        pass: &GeneratorPass,
        rng: &mut ChaCha8Rng,
        epoch: usize,
        step: usize,
    ) -> Result<(f64, f64)> {
        let t = &pass.tape;
        let fake_fc = self.replay_fc.query_batch(t.value(pass.translations.fake_fc), rng)?;
        let fake_sc = self.replay_sc.query_batch(t.value(pass.translations.fake_sc), rng)?;
        let mut tape = Tape::new();
        let d_fc = self.models.d_fc.params().bind(&mut tape, true);
        let d_sc = self.models.d_sc.params().bind(&mut tape, true);
        let real_fc = tape.constant(t.value(pass.x_fc).clone());
        let real_sc = tape.constant(t.value(pass.x_sc).clone());
        let fake_fc = tape.constant(fake_fc);
        let fake_sc = tape.constant(fake_sc);
        let terms = losses::discriminator_objective(
            &mut tape,
            (&self.models.d_fc, &d_fc),
            (&self.models.d_sc, &d_sc),
            real_fc,
            real_sc,
            fake_fc,
            fake_sc,
            &self.cfg.loss,
        )?;
        let value = |v: Var| tape.value(v).item().as_f64();
        for (term, v) in [("gan_d_fc", terms.gan_d_fc), ("gan_d_sc", terms.gan_d_sc)] {
            if !value(v).is_finite() {
                return Err(Error::NonFiniteLoss { term, epoch, step });
            }
        }
        let grads = tape.backward(terms.total)?;
        self.models.d_fc.params_mut().accumulate(&grads, &d_fc);
        self.models.d_sc.params_mut().accumulate(&grads, &d_sc);
        self.adam_d.step(
            &mut [self.models.d_fc.params_mut(), self.models.d_sc.params_mut()],
            self.cfg.lr,
            self.cfg.weight_decay,
        )?;
        Ok((value(terms.gan_d_fc), value(terms.gan_d_sc)))
    }

    fn update_generators(&mut self, pass: GeneratorPass, epoch: usize, step: usize) -> Result<LossComponents> {
        let GeneratorPass {
            mut tape,
            g_fc,
            g_sc,
            x_fc,
            x_sc,
            translations,
        } = pass;
        let d_fc = self.models.d_fc.params().bind(&mut tape, false);
        let d_sc = self.models.d_sc.params().bind(&mut tape, false);
        let terms = losses::generator_objective(
            &mut tape,
            &translations,
            (&self.models.d_fc, &d_fc),
            (&self.models.d_sc, &d_sc),
            x_fc,
            x_sc,
            &self.cfg.loss,
        )?;
        for (term, v) in terms.named() {
            if !tape.value(v).item().is_finite() {
                return Err(Error::NonFiniteLoss { term, epoch, step });
            }
        }
        let value = |v: Var| tape.value(v).item().as_f64();
        let c = LossComponents {
            gan_g_fc: value(terms.gan_g_fc),
            gan_g_sc: value(terms.gan_g_sc),
            cyc: value(terms.cyc),
            id: value(terms.id),
            sp_mse: terms.sp_mse.map_or(0.0, value),
            sp_pcc: terms.sp_pcc.map_or(0.0, value),
            ..LossComponents::default()
        };
        let grads = tape.backward(terms.total)?;
        self.models.g_fc.params_mut().accumulate(&grads, &g_fc);
        self.models.g_sc.params_mut().accumulate(&grads, &g_sc);
        self.adam_g.step(
            &mut [self.models.g_fc.params_mut(), self.models.g_sc.params_mut()],
            self.cfg.lr,
            self.cfg.weight_decay,
        )?;
        Ok(c)
    }
}

/// Trains from scratch for `cfg.epochs` epochs.
pub fn train(manifest: &DatasetManifest, cfg: TrainConfig) -> Result<(ModelCheckpoint, TrainHistory)> {
    let mut trainer = Trainer::new(manifest, cfg)?;
    while !trainer.is_done() {
        trainer.run_epoch()?;
    }
    let history = trainer.history().clone();
    Ok((trainer.into_checkpoint(), history))
}

/// Continues a run up to `cfg.epochs`; a checkpoint already at or past that
/// epoch is returned unchanged.
pub fn resume(
    ckpt: ModelCheckpoint,
    manifest: &DatasetManifest,
    cfg: TrainConfig,
) -> Result<(ModelCheckpoint, TrainHistory)> {
    if ckpt.epoch >= cfg.epochs {
        cfg.validate()?;
        ckpt.ensure_compatible(&cfg.model_config(manifest.n))?;
        let history = ckpt.history.clone();
        return Ok((ckpt, history));
    }
    let mut trainer = Trainer::resume(ckpt, manifest, cfg)?;
    while !trainer.is_done() {
        trainer.run_epoch()?;
    }
    let history = trainer.history().clone();
    Ok((trainer.into_checkpoint(), history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_passes_through_until_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = ReplayBuffer::new(2);
        assert_eq!(buf.query(vec![1.0], &mut rng), vec![1.0]);
        assert_eq!(buf.query(vec![2.0], &mut rng), vec![2.0]);
        assert_eq!(buf.len(), 2);
        let mut swapped = 0;
        for k in 0..200 {
            let v = 10.0 + k as f32;
            if buf.query(vec![v], &mut rng) != vec![v] {
                swapped += 1;
            }
            assert_eq!(buf.len(), 2);
        }
        assert!((70..130).contains(&swapped), "{swapped}");
    }

    #[test]
    fn zero_capacity_disables_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = ReplayBuffer::new(0);
        for k in 0..5 {
            assert_eq!(buf.query(vec![k as f32], &mut rng), vec![k as f32]);
        }
        assert!(buf.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { lr: 0.0, ..Default::default() },
            TrainConfig { weight_decay: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
