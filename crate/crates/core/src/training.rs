//! Minibatch training of the residual network on a pair dataset.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::PairDataset;
use crate::error::{EvoError, Result};
use crate::resnet::ResNetModel;
use crate::rng::{stream, Purpose};

const STATE_MAGIC: &[u8; 4] = b"MEVO";
const STATE_VERSION: u32 = 1;
/// Rows per forward pass in [`evaluate`].
const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Optimizer {
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Sgd,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate of the last epoch; the rate decays geometrically from
    /// `learning_rate` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_learning_rate: Option<f64>,
    pub optimizer: Optimizer,
    pub shuffle_seed: u64,
    pub validation_fraction: f64,
    /// Write a checkpoint every this many epochs (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 10,
            learning_rate: 1e-3,
            final_learning_rate: None,
            optimizer: Optimizer::default(),
            shuffle_seed: 0,
            validation_fraction: 0.0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, samples: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(EvoError::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 || self.batch_size > samples {
            return Err(EvoError::InvalidArgument(format!(
                "batch size {} must lie in [1, {samples}]",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EvoError::InvalidArgument(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if let Some(lr) = self.final_learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(EvoError::InvalidArgument(format!(
                    "final learning rate must be > 0, got {lr}"
                )));
            }
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return Err(EvoError::InvalidArgument(format!(
                "validation fraction must lie in [0, 0.5], got {}",
                self.validation_fraction
            )));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(EvoError::InvalidArgument("invalid Adam constants".into()));
            }
        }
        Ok(())
    }

    /// Learning rate used during `epoch` (zero-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.final_learning_rate {
            Some(last) if self.epochs > 1 => {
                let s = epoch.min(self.epochs - 1) as f64 / (self.epochs - 1) as f64;
                self.learning_rate * (last / self.learning_rate).powf(s)
            }
            _ => self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub validation: Option<Vec<f64>>,
    pub seconds: Vec<f64>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.train.last().copied()
    }

    /// CSV `epoch,train_loss[,val_loss],seconds` with one-based epochs.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        match &self.validation {
            Some(_) => writeln!(w, "epoch,train_loss,val_loss,seconds")?,
            None => writeln!(w, "epoch,train_loss,seconds")?,
        }
        for e in 0..self.train.len() {
            match &self.validation {
                Some(v) => writeln!(
                    w,
                    "{},{:e},{:e},{:.6}",
                    e + 1,
                    self.train[e],
                    v[e],
                    self.seconds[e]
                )?,
                None => writeln!(w, "{},{:e},{:.6}", e + 1, self.train[e], self.seconds[e])?,
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| EvoError::Format("empty loss history".into()))??;
        let with_val = match header.trim() {
            "epoch,train_loss,val_loss,seconds" => true,
            "epoch,train_loss,seconds" => false,
            h => {
                return Err(EvoError::Format(format!(
                    "unexpected loss history header '{h}'"
                )))
            }
        };
        let mut out = LossHistory {
            validation: with_val.then(Vec::new),
            ..Default::default()
        };
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| EvoError::Format(format!("bad loss history line '{line}': {e}")))?;
            let want = if with_val { 4 } else { 3 };
            if f.len() != want {
                return Err(EvoError::Format(format!("bad loss history line '{line}'")));
            }
            out.train.push(f[1]);
            if let Some(v) = out.validation.as_mut() {
                v.push(f[2]);
            }
            out.seconds.push(f[want - 1]);
        }
        Ok(out)
    }
}

/// Optimizer moments and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    /// One update of `params` with gradient `grad`.
    pub fn update(&mut self, opt: &Optimizer, lr: f64, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        match *opt {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    params[i] -= lr * mh / (vh.sqrt() + eps);
                }
            }
        }
    }

    fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(STATE_MAGIC)?;
        w.write_all(&STATE_VERSION.to_le_bytes())?;
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&(self.m.len() as u64).to_le_bytes())?;
        for x in self.m.iter().chain(&self.v) {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    fn read(r: &mut impl Read) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        if &b4 != STATE_MAGIC {
            return Err(EvoError::Format("not an optimizer state file".into()));
        }
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != STATE_VERSION {
            return Err(EvoError::Format(
                "unsupported optimizer state version".into(),
            ));
        }
        r.read_exact(&mut b8)?;
        let step = u64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut vals = vec![0.0; 2 * len];
        for x in vals.iter_mut() {
            r.read_exact(&mut b8)?;
            *x = f64::from_le_bytes(b8);
        }
        let v = vals.split_off(len);
        Ok(Self { step, m: vals, v })
    }
}

/// Loss of the model over the whole dataset, without updates.
pub fn evaluate(model: &ResNetModel, ds: &PairDataset) -> Result<f64> {
    if ds.n() != model.n() {
        return Err(EvoError::DimensionMismatch {
            expected: model.n(),
            got: ds.n(),
        });
    }
    let n = ds.n();
    let mut total = 0.0;
    for (x, t) in ds
        .inputs()
        .chunks(EVAL_CHUNK * n)
        .zip(ds.targets().chunks(EVAL_CHUNK * n))
    {
        let y = model.forward_batch(x)?;
        for (yr, tr) in y.chunks_exact(n).zip(t.chunks_exact(n)) {
            total += yr
                .iter()
                .zip(tr)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
    }
    Ok(total / ds.len() as f64)
}

/// Deterministic train/validation split; `fraction = 0` keeps everything for training.
pub fn split(
    ds: &PairDataset,
    fraction: f64,
    seed: u64,
) -> Result<(PairDataset, Option<PairDataset>)> {
    let count = (fraction * ds.len() as f64).round() as usize;
    if count == 0 {
        return Ok((ds.clone(), None));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut stream(seed, Purpose::Split, 0));
    let (val, train) = idx.split_at(count);
    let mut train = train.to_vec();
    let mut val = val.to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok((ds.subset(&train)?, Some(ds.subset(&val)?)))
}

/// Where and how a run persists checkpoints.
#[derive(Debug, Clone, Default)]
pub struct TrainHooks {
    pub checkpoint_dir: Option<PathBuf>,
    /// Resume from the newest checkpoint in `checkpoint_dir` if any.
    pub resume: bool,
    /// Called after every epoch with `(epoch, train_loss)`.
    pub progress: Option<fn(usize, f64)>,
}

fn checkpoint_paths(dir: &Path, epoch: usize) -> (PathBuf, PathBuf, PathBuf) {
    let stem = format!("checkpoint-e{epoch:05}");
    (
        dir.join(format!("{stem}.mevm")),
        dir.join(format!("{stem}.opt")),
        dir.join(format!("{stem}.loss.csv")),
    )
}

/// Newest checkpoint epoch in `dir`.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<usize>> {
    if !dir.exists() {
        return Ok(None);
    }
    let mut best = None;
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(e) = name
            .strip_prefix("checkpoint-e")
            .and_then(|s| s.strip_suffix(".mevm"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            let (_, opt, loss) = checkpoint_paths(dir, e);
            if opt.exists() && loss.exists() {
                best = best.max(Some(e));
            }
        }
    }
    Ok(best)
}

fn write_checkpoint(
    dir: &Path,
    epoch: usize,
    model: &ResNetModel,
    state: &OptimizerState,
    history: &LossHistory,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (m, o, l) = checkpoint_paths(dir, epoch);
    model.save(&m)?;
    let mut w = BufWriter::new(File::create(&o)?);
    state.write(&mut w)?;
    w.flush()?;
    history.save_csv(&l)
}

pub fn train(
    model: &ResNetModel,
    ds: &PairDataset,
    cfg: &TrainConfig,
) -> Result<(ResNetModel, LossHistory)> {
    train_with(model, ds, cfg, &TrainHooks::default())
}

/// Shuffled minibatch training; deterministic given the model, data and seeds.
pub fn train_with(
    model: &ResNetModel,
    ds: &PairDataset,
    cfg: &TrainConfig,
    hooks: &TrainHooks,
) -> Result<(ResNetModel, LossHistory)> {
    if ds.n() != model.n() {
        return Err(EvoError::DimensionMismatch {
            expected: model.n(),
            got: ds.n(),
        });
    }
    let (train_ds, val_ds) = split(ds, cfg.validation_fraction, cfg.shuffle_seed)?;
    cfg.validate(train_ds.len())?;

    let mut model = model.clone();
    let mut state = OptimizerState::new(model.params().len());
    let mut history = LossHistory {
        validation: val_ds.as_ref().map(|_| Vec::new()),
        ..Default::default()
    };
    let mut start = 0;
    if let (true, Some(dir)) = (hooks.resume, hooks.checkpoint_dir.as_deref()) {
        if let Some(e) = latest_checkpoint(dir)? {
            let (m, o, l) = checkpoint_paths(dir, e);
            let loaded = ResNetModel::load(&m)?;
            if loaded.architecture() != model.architecture() {
                return Err(EvoError::Config(
                    "checkpoint architecture differs from the configured model".into(),
                ));
            }
            model = loaded;
            state = OptimizerState::read(&mut BufReader::new(File::open(&o)?))?;
            history = LossHistory::read_csv(BufReader::new(File::open(&l)?))?;
            if history.len() != e || state.m.len() != model.params().len() {
                return Err(EvoError::Format(format!("checkpoint {e} is inconsistent")));
            }
            start = e;
        }
    }

    let n = train_ds.n();
    let rows = train_ds.len();
    let mut grad = vec![0.0; model.params().len()];
    let mut order: Vec<usize> = (0..rows).collect();
    let mut xb = Vec::with_capacity(cfg.batch_size * n);
    let mut tb = Vec::with_capacity(cfg.batch_size * n);
    for epoch in start..cfg.epochs {
        let clock = Instant::now();
        order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
        order.shuffle(&mut stream(
            cfg.shuffle_seed,
            Purpose::Shuffle,
            epoch as u64,
        ));
        let lr = cfg.learning_rate_at(epoch);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            xb.clear();
            tb.clear();
            for &j in chunk {
                xb.extend_from_slice(train_ds.input(j));
                tb.extend_from_slice(train_ds.target(j));
            }
            let loss = match model.backward_into(&xb, &tb, &mut grad) {
                Ok(l) if l.is_finite() => l,
                Ok(_) | Err(EvoError::NonFinite { .. }) => {
                    return Err(EvoError::TrainingDiverged { epoch, batch: b })
                }
                Err(e) => return Err(e),
            };
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(EvoError::TrainingDiverged { epoch, batch: b });
            }
            total += loss * chunk.len() as f64;
            state.update(&cfg.optimizer, lr, model.params_mut(), &grad);
        }
        history.train.push(total / rows as f64);
        if let (Some(v), Some(vds)) = (history.validation.as_mut(), val_ds.as_ref()) {
            v.push(evaluate(&model, vds)?);
        }
        history.seconds.push(clock.elapsed().as_secs_f64());
        if let Some(cb) = hooks.progress {
            cb(epoch + 1, total / rows as f64);
        }
        if let Some(dir) = hooks.checkpoint_dir.as_deref() {
            let done = epoch + 1;
            if cfg.checkpoint_every > 0 && (done % cfg.checkpoint_every == 0 || done == cfg.epochs)
            {
                write_checkpoint(dir, done, &model, &state, &history)?;
            }
        }
    }
    Ok((model, history))
}
