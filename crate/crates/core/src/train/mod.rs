//! MSE training with AdamW and fresh noise on every batch.

mod optim;

pub use optim::{adamw_step, AdamW};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{forward_normalized, model_forward, ModelConfig, ParameterStore};
use crate::ops::mse;
use crate::rng::{label, stream};
use crate::signal::{default_sigma_f, minmax_normalize, render_target, sample_scene, synthesize, FrequencyScene, SceneConfig};
use crate::tensor::{Data, Tensor};

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Number of fixed training scenes.
    pub n_scenes: usize,
    pub batch: usize,
    /// Initial learning rate.
    pub lr: f64,
    pub epochs: usize,
    /// Per-item SNR is drawn uniformly from this range; `[inf, inf]` means noiseless.
    pub snr_range_db: [f64; 2],
    /// Target kernel width; `None` uses `0.12 / n_sr`.
    pub sigma_f: Option<f64>,
    pub weight_decay: f64,
    pub betas: [f64; 2],
    pub eps: f64,
    /// Final learning rate of the cosine schedule as a fraction of `lr`.
    pub lr_floor: f64,
    pub validation_scenes: usize,
    pub seed: u64,
    /// Component count range of the sampled scenes.
    pub l_min: usize,
    pub l_max: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_scenes: 10_000,
            batch: 256,
            lr: 0.003,
            epochs: 20,
            snr_range_db: [-10.0, 40.0],
            sigma_f: None,
            weight_decay: 0.01,
            betas: [0.9, 0.999],
            eps: 1e-8,
            lr_floor: 0.1,
            validation_scenes: 500,
            seed: 0,
            l_min: 1,
            l_max: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.n_scenes == 0 {
            return Err(Error::invalid("train config: batch and n_scenes must be positive"));
        }
        let [lo, hi] = self.snr_range_db;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::invalid(format!("train config: bad SNR range [{lo}, {hi}]")));
        }
        if !(self.lr >= 0.0) || !(0.0..=1.0).contains(&self.lr_floor) {
            return Err(Error::invalid("train config: lr must be >= 0 and lr_floor in [0, 1]"));
        }
        if self.l_min == 0 || self.l_min > self.l_max {
            return Err(Error::invalid("train config: need 1 <= l_min <= l_max"));
        }
        Ok(())
    }

    pub fn sigma_f(&self, n_sr: usize) -> f64 {
        self.sigma_f.unwrap_or_else(|| default_sigma_f(n_sr))
    }

    pub fn scene_config(&self, n_sr: usize) -> SceneConfig {
        SceneConfig { l_min: self.l_min, l_max: self.l_max, ..SceneConfig::for_grid(n_sr) }
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.n_scenes.div_ceil(self.batch)
    }

    /// Cosine decay from `lr` to `lr * lr_floor` over the whole run.
    pub fn lr_at(&self, step: u64) -> f64 {
        let total = (self.steps_per_epoch() * self.epochs).max(1) as f64;
        let frac = (step as f64 / total).min(1.0);
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * frac).cos());
        self.lr * (self.lr_floor + (1.0 - self.lr_floor) * cos)
    }

    pub fn adamw(&self, lr: f64) -> AdamW {
        AdamW { lr, beta1: self.betas[0], beta2: self.betas[1], eps: self.eps, weight_decay: self.weight_decay }
    }
}

/// Loss and validation curves of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean batch MSE of every optimizer step, in order.
    pub step_loss: Vec<f64>,
    /// Mean validation PSNR after every epoch.
    pub val_psnr: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    /// MSE on a fixed probe batch of training scenes before the first and
    /// after the last step of this run.
    pub probe_mse_start: f64,
    pub probe_mse_end: f64,
}

/// Noisy normalized inputs `[batch, N]` and clean targets `[batch, N_SR]`.
pub fn make_batch<R: Rng + ?Sized>(
    scenes: &[FrequencyScene],
    n: usize,
    n_sr: usize,
    sigma_f: f64,
    snr_range_db: [f64; 2],
    rng: &mut R,
) -> Result<(Tensor, Tensor)> {
    let mut inputs = Vec::with_capacity(scenes.len() * n);
    let mut targets = Vec::with_capacity(scenes.len() * n_sr);
    for scene in scenes {
        let [lo, hi] = snr_range_db;
        let snr = if lo == hi { lo } else { rng.random_range(lo..hi) };
        inputs.extend(minmax_normalize(&synthesize(scene, n, snr, rng)?).samples);
        targets.extend(render_target(scene, n_sr, sigma_f)?.values);
    }
    Ok((Tensor::complex(&[scenes.len(), n], inputs)?, Tensor::real(&[scenes.len(), n_sr], targets)?))
}

/// Mean loss and mean gradient over the rows of a batch. Rows run in
/// parallel; the reduction is always in row order.
pub fn batch_gradients(store: &ParameterStore, inputs: &Tensor, targets: &Tensor) -> Result<(f64, BTreeMap<String, Data>)> {
    let cfg = store.config();
    let x = inputs.as_complex().ok_or_else(|| Error::shape("batch", "inputs must be complex"))?;
    let y = targets.as_real().ok_or_else(|| Error::shape("batch", "targets must be real"))?;
    let rows = inputs.shape()[0];
    let per_row: Vec<(f64, Vec<(String, Data)>)> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let graph = Graph::new();
            let params = store.bind(&graph);
            let out = forward_normalized(&graph, &params, cfg, &x[r * cfg.n..(r + 1) * cfg.n])?;
            let loss = mse(out, &y[r * cfg.n_sr..(r + 1) * cfg.n_sr])?;
            let mut grads = graph.backward(loss)?;
            let value = loss.value().as_real().unwrap()[0];
            let named = params
                .iter()
                .map(|(name, var)| {
                    let g = grads.take(var).unwrap_or_else(|| Data::zeros(var.dtype(), var.value().numel()));
                    (name.to_string(), g)
                })
                .collect();
            Ok((value, named))
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut sum: BTreeMap<String, Data> = BTreeMap::new();
    for (loss, grads) in per_row {
        total += loss;
        for (name, g) in grads {
            match sum.get_mut(&name) {
                Some(acc) => acc.add_assign(&g),
                None => {
                    sum.insert(name, g);
                }
            }
        }
    }
    let scale = 1.0 / rows as f64;
    for g in sum.values_mut() {
        match g {
            Data::Real(v) => v.iter_mut().for_each(|x| *x *= scale),
            Data::Complex(v) => v.iter_mut().for_each(|x| *x *= scale),
        }
    }
    Ok((total * scale, sum))
}

/// Mean MSE of the model over a batch, without gradients.
pub fn batch_loss(store: &ParameterStore, inputs: &Tensor, targets: &Tensor) -> Result<f64> {
    let cfg = store.config();
    let x = inputs.as_complex().ok_or_else(|| Error::shape("batch", "inputs must be complex"))?;
    let y = targets.as_real().ok_or_else(|| Error::shape("batch", "targets must be real"))?;
    let rows = inputs.shape()[0];
    let losses: Vec<f64> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let graph = Graph::no_grad();
            let params = store.bind(&graph);
            let out = forward_normalized(&graph, &params, cfg, &x[r * cfg.n..(r + 1) * cfg.n])?;
            Ok(mse(out, &y[r * cfg.n_sr..(r + 1) * cfg.n_sr])?.value().as_real().unwrap()[0])
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / rows as f64)
}

/// Where a run writes its side outputs.
#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Checkpoint written after every epoch.
    pub checkpoint: Option<PathBuf>,
    /// CSV log with `step,loss,lr,wallclock`.
    pub log: Option<PathBuf>,
    /// Continue from this store (e.g. a loaded checkpoint) instead of a
    /// fresh initialization.
    pub resume: Option<ParameterStore>,
    /// Stop after this many epochs of the schedule, even if more remain.
    pub stop_after_epoch: Option<usize>,
}

/// The fixed scene sets of a run: training scenes and validation scenes.
pub fn training_scenes(model: &ModelConfig, cfg: &TrainConfig) -> Result<(Vec<FrequencyScene>, Vec<FrequencyScene>)> {
    let scene_cfg = cfg.scene_config(model.n_sr);
    let mut r = stream(cfg.seed, &[label("train-scenes")]);
    let train = (0..cfg.n_scenes).map(|_| sample_scene(&mut r, &scene_cfg)).collect::<Result<_>>()?;
    let mut r = stream(cfg.seed, &[label("validation-scenes")]);
    let val = (0..cfg.validation_scenes).map(|_| sample_scene(&mut r, &scene_cfg)).collect::<Result<_>>()?;
    Ok((train, val))
}

/// Train `model` under `cfg`.
///
/// Every random draw comes from a stream keyed by the seed and the
/// (epoch, batch) position, so a resumed run repeats the uninterrupted one
/// exactly.
pub fn train(model: &ModelConfig, cfg: &TrainConfig, opts: TrainOptions) -> Result<(ParameterStore, TrainHistory)> {
    model.validate()?;
    cfg.validate()?;
    let (scenes, val_scenes) = training_scenes(model, cfg)?;
    let sigma_f = cfg.sigma_f(model.n_sr);
    let mut store = match opts.resume {
        Some(s) => {
            if s.config() != model {
                return Err(Error::ConfigHashMismatch { expected: model.hash(), found: s.config().hash() });
            }
            s
        }
        None => ParameterStore::init(model, &mut stream(cfg.seed, &[label("init")]))?,
    };

    let probe_n = scenes.len().min(cfg.batch.max(64));
    let (probe_x, probe_y) = make_batch(
        &scenes[..probe_n],
        model.n,
        model.n_sr,
        sigma_f,
        cfg.snr_range_db,
        &mut stream(cfg.seed, &[label("probe")]),
    )?;
    let mut history = TrainHistory { probe_mse_start: batch_loss(&store, &probe_x, &probe_y)?, ..Default::default() };

    let mut log = match &opts.log {
        Some(path) => {
            let resuming = store.step > 0 && path.exists();
            let file = std::fs::OpenOptions::new().create(true).append(resuming).write(true).truncate(!resuming).open(path)?;
            let mut w = std::io::BufWriter::new(file);
            if !resuming {
                writeln!(w, "step,loss,lr,wallclock")?;
            }
            Some(w)
        }
        None => None,
    };
    let started = Instant::now();
    let last_epoch = opts.stop_after_epoch.unwrap_or(cfg.epochs).min(cfg.epochs);
    for epoch in store.epoch as usize..last_epoch {
        let epoch_start = Instant::now();
        let mut order: Vec<usize> = (0..scenes.len()).collect();
        order.shuffle(&mut stream(cfg.seed, &[label("shuffle"), epoch as u64]));
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            let batch: Vec<FrequencyScene> = chunk.iter().map(|&i| scenes[i].clone()).collect();
            let mut rng = stream(cfg.seed, &[label("noise"), epoch as u64, b as u64]);
            let (x, y) = make_batch(&batch, model.n, model.n_sr, sigma_f, cfg.snr_range_db, &mut rng)?;
            let (loss, grads) = batch_gradients(&store, &x, &y)?;
            if !loss.is_finite() || grads.values().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { step: store.step as usize, loss });
            }
            let lr = cfg.lr_at(store.step);
            adamw_step(&mut store, &grads, &cfg.adamw(lr))?;
            store.step += 1;
            history.step_loss.push(loss);
            if let Some(w) = log.as_mut() {
                writeln!(w, "{},{loss},{lr},{:.3}", store.step, started.elapsed().as_secs_f64())?;
            }
            log::debug!("epoch {epoch} step {} loss {loss:.6} lr {lr:.2e}", store.step);
        }
        store.epoch = epoch as u64 + 1;
        let psnr = validation_psnr(&store, &val_scenes, cfg)?;
        history.val_psnr.push(psnr);
        history.epoch_seconds.push(epoch_start.elapsed().as_secs_f64());
        log::info!("epoch {} done: last loss {:.6}, validation PSNR {psnr:.2} dB", epoch + 1, history.step_loss.last().copied().unwrap_or(f64::NAN));
        if let Some(w) = log.as_mut() {
            w.flush()?;
        }
        if let Some(path) = &opts.checkpoint {
            store.save(path)?;
        }
    }
    history.probe_mse_end = batch_loss(&store, &probe_x, &probe_y)?;
    Ok((store, history))
}

/// Mean PSNR of the model on the validation scenes, with noise drawn from a
/// fixed stream so that every epoch sees the same inputs.
pub fn validation_psnr(store: &ParameterStore, scenes: &[FrequencyScene], cfg: &TrainConfig) -> Result<f64> {
    if scenes.is_empty() {
        return Ok(f64::NAN);
    }
    let model = store.config();
    let sigma_f = cfg.sigma_f(model.n_sr);
    let values: Vec<f64> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let mut r = stream(cfg.seed, &[label("validation-noise"), i as u64]);
            let [lo, hi] = cfg.snr_range_db;
            let snr = if lo == hi { lo } else { r.random_range(lo..hi) };
            let signal = synthesize(scene, model.n, snr, &mut r)?;
            let est = model_forward(&signal, store)?;
            crate::eval::psnr(&est, &render_target(scene, model.n_sr, sigma_f)?)
        })
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
