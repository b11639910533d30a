//! Loss, full-batch ADAM, the hyperparameter ensemble and retraining statistics.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{evaluate_points, BenchmarkMap};
use crate::lds::PointSet;
use crate::net::{Activation, Mode, NetworkConfig, NetworkParams};
use crate::rng::split_seed;
use crate::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 20_000;
/// A loss above this (or non-finite) ends the run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Inputs and targets of a regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(points: &PointSet, targets: Vec<f64>) -> Result<Self> {
        Self::from_flat(points.dim(), points.as_flat().to_vec(), targets)
    }

    pub fn from_flat(dim: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 || inputs.len() != dim * targets.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * targets.len(),
                got: inputs.len(),
            });
        }
        if targets.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite target {t}")));
        }
        Ok(Self {
            dim,
            inputs,
            targets,
        })
    }

    /// Labels `points` with `map`.
    pub fn from_benchmark(map: &dyn BenchmarkMap, points: &PointSet) -> Result<Self> {
        let targets = evaluate_points(map, points)?;
        Self::new(points, targets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub network: NetworkConfig,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Exponent `p` of the data term, 1 or 2.
    pub loss_exponent: u32,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        check_exponent(self.loss_exponent)?;
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epoch cap must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_exponent(p: u32) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("loss exponent must be 1 or 2, got {p}")))
    }
}

fn data_term(outputs: &[f64], targets: &[f64], p: u32) -> f64 {
    let sum: f64 = outputs
        .iter()
        .zip(targets)
        .map(|(o, t)| {
            let r = (t - o).abs();
            if p == 1 {
                r
            } else {
                r * r
            }
        })
        .sum();
    sum / targets.len() as f64
}

/// `(1/N) Σ |L(y_i) − L_θ(y_i)|^p + λ ‖θ_W‖²`, with the network in training mode.
pub fn loss(params: &NetworkParams, data: &Dataset, p: u32, weight_decay: f64) -> Result<f64> {
    check_exponent(p)?;
    check_data(params, data)?;
    let tape = params.forward(data.inputs(), Mode::Train)?;
    Ok(data_term(tape.outputs(), data.targets(), p) + weight_decay * params.weight_norm_sq())
}

/// `(1/N) Σ |L(y_i) − L_θ(y_i)|^p` with the network in inference mode. With `p = 1` on a
/// test set this is the generalization error estimate; on the training set it is `E_T`.
pub fn errors_on(params: &NetworkParams, data: &Dataset, p: u32) -> Result<f64> {
    check_exponent(p)?;
    check_data(params, data)?;
    let out = params.predict(data.inputs())?;
    Ok(data_term(&out, data.targets(), p))
}

fn check_data(params: &NetworkParams, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if params.config().input_dim != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.config().input_dim,
            got: data.dim(),
        });
    }
    Ok(())
}

/// First and second moment estimates of ADAM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }
}

/// One bias-corrected ADAM update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            got: if grads.len() != params.len() {
                grads.len()
            } else {
                state.m.len()
            },
        });
    }
    state.step = state.step.saturating_add(1);
    let c1 = 1.0 - ADAM_BETA1.powi(state.step);
    let c2 = 1.0 - ADAM_BETA2.powi(state.step);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: TrainConfig,
    /// Parameters with the lowest training loss seen.
    pub params: NetworkParams,
    /// `E_T` (p = 1) of `params` on the training set.
    pub training_error: f64,
    pub best_loss: f64,
    pub best_epoch: usize,
    /// Training loss before each update, then once after the last one.
    pub losses: Vec<f64>,
}

/// Full-batch ADAM from a Xavier initialization seeded by `cfg.seed`.
pub fn train_one(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let init = NetworkParams::init_xavier(cfg.network, cfg.seed)?;
    train_from(data, cfg, init)
}

/// Full-batch ADAM starting from `init`.
pub fn train_from(data: &Dataset, cfg: &TrainConfig, init: NetworkParams) -> Result<TrainedModel> {
    cfg.validate()?;
    if *init.config() != cfg.network {
        return Err(Error::InvalidArgument("initial parameters do not match the network config".into()));
    }
    check_data(&init, data)?;
    let n = data.len() as f64;
    let p = cfg.loss_exponent;
    let mut params = init;
    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut adam = AdamState::new(params.param_count());
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    let mut upstream = vec![0.0; data.len()];

    for epoch in 0..=cfg.epochs {
        let tape = params.forward(data.inputs(), Mode::Train)?;
        let out = tape.outputs();
        let loss = data_term(out, data.targets(), p) + cfg.weight_decay * params.weight_norm_sq();
        losses.push(loss);
        if !loss.is_finite() || loss > DIVERGENCE_THRESHOLD {
            return Err(Error::Diverged { epoch, loss });
        }
        if loss < best_loss {
            best_loss = loss;
            best_epoch = epoch;
            best.values_mut().copy_from_slice(params.values());
            best.record_statistics(&tape);
        }
        if epoch == cfg.epochs {
            break;
        }
        for ((u, o), t) in upstream.iter_mut().zip(out).zip(data.targets()) {
            let r = o - t;
            let slope = match p {
                1 if r > 0.0 => 1.0,
                1 if r < 0.0 => -1.0,
                1 => 0.0,
                _ => 2.0 * r,
            };
            *u = slope / n;
        }
        let mut grad = params.backward(&tape, &upstream)?;
        if cfg.weight_decay > 0.0 {
            for range in params.weight_ranges() {
                for i in range {
                    grad[i] += 2.0 * cfg.weight_decay * params.values()[i];
                }
            }
        }
        adam_step(params.values_mut(), &grad, &mut adam, cfg.learning_rate)?;
    }

    let training_error = errors_on(&best, data, 1)?;
    Ok(TrainedModel {
        config: *cfg,
        params: best,
        training_error,
        best_loss,
        best_epoch,
        losses,
    })
}

/// Axes of the hyperparameter sweep. `depths` count hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
}

impl HyperGrid {
    /// The 3 × 4 × 3 × 3 = 108-cell ensemble grid.
    pub fn table1() -> Self {
        Self {
            learning_rates: vec![1e-1, 1e-2, 1e-3],
            weight_decays: vec![1e-4, 1e-5, 1e-6, 1e-7],
            depths: vec![4, 8, 16],
            widths: vec![6, 12, 24],
        }
    }

    /// A 12-cell subgrid for desk-scale runs: learning rates {1e-2, 1e-3}, weight decays
    /// {1e-5, 1e-7}, depth 4, widths {6, 12, 24}.
    pub fn fast() -> Self {
        Self {
            learning_rates: vec![1e-2, 1e-3],
            weight_decays: vec![1e-5, 1e-7],
            depths: vec![4],
            widths: vec![6, 12, 24],
        }
    }

    pub fn single(learning_rate: f64, weight_decay: f64, depth: usize, width: usize) -> Self {
        Self {
            learning_rates: vec![learning_rate],
            weight_decays: vec![weight_decay],
            depths: vec![depth],
            widths: vec![width],
        }
    }

    pub fn with_depths(mut self, depths: Vec<usize>) -> Self {
        self.depths = depths;
        self
    }

    pub fn len(&self) -> usize {
        self.learning_rates.len() * self.weight_decays.len() * self.depths.len() * self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in lr-major order, each seeded from `seed` by its index.
    pub fn cells(&self, settings: &TrainSettings, input_dim: usize, seed: u64) -> Vec<TrainConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &lr in &self.learning_rates {
            for &wd in &self.weight_decays {
                for &depth in &self.depths {
                    for &width in &self.widths {
                        let index = out.len() as u64;
                        out.push(TrainConfig {
                            network: NetworkConfig {
                                input_dim,
                                hidden_layers: depth,
                                width,
                                activation: settings.activation,
                                batch_norm: settings.batch_norm,
                            },
                            learning_rate: lr,
                            weight_decay: wd,
                            loss_exponent: settings.loss_exponent,
                            epochs: settings.epochs,
                            seed: split_seed(seed, index),
                        });
                    }
                }
            }
        }
        out
    }
}

/// Settings shared by every cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub activation: Activation,
    pub batch_norm: bool,
    pub loss_exponent: u32,
    pub epochs: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            activation: Activation::Sigmoid,
            batch_norm: false,
            loss_exponent: 2,
            epochs: DEFAULT_EPOCHS,
        }
    }
}

/// What happened to one cell of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Trained {
        training_error: f64,
        validation_error: f64,
    },
    Diverged {
        epoch: usize,
        loss: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub config: TrainConfig,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub model: TrainedModel,
    pub validation_error: f64,
    /// Every cell, in grid order.
    pub cells: Vec<CellReport>,
}

/// A cell to train, optionally from given starting parameters.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub config: TrainConfig,
    pub warm_start: Option<NetworkParams>,
}

/// Trains every grid cell and keeps the one with the lowest validation error (p = 1).
pub fn ensemble_select(
    data: &Dataset,
    validation: &Dataset,
    grid: &HyperGrid,
    settings: &TrainSettings,
    seed: u64,
) -> Result<Selection> {
    let candidates: Vec<Candidate> = grid
        .cells(settings, data.dim(), seed)
        .into_iter()
        .map(|config| Candidate {
            config,
            warm_start: None,
        })
        .collect();
    select_among(data, validation, &candidates)
}

/// Ties in validation error go to lower depth, then lower width, lower learning rate,
/// higher weight decay. Diverged cells are reported and skipped.
pub fn select_among(data: &Dataset, validation: &Dataset, candidates: &[Candidate]) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("grid is empty".into()));
    }
    type Run = std::result::Result<(TrainedModel, f64), (usize, f64)>;
    let runs: Vec<Result<Run>> = candidates
        .par_iter()
        .map(|c| {
            let run = match &c.warm_start {
                Some(init) => train_from(data, &c.config, init.clone()),
                None => train_one(data, &c.config),
            };
            match run {
                Ok(model) => {
                    let v = errors_on(&model.params, validation, 1)?;
                    Ok(Ok((model, v)))
                }
                Err(Error::Diverged { epoch, loss }) => Ok(Err((epoch, loss))),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut cells = Vec::with_capacity(candidates.len());
    let mut best: Option<(TrainedModel, f64)> = None;
    for (c, run) in candidates.iter().zip(runs) {
        match run? {
            Ok((model, v)) => {
                cells.push(CellReport {
                    config: c.config,
                    outcome: CellOutcome::Trained {
                        training_error: model.training_error,
                        validation_error: v,
                    },
                });
                let better = match &best {
                    None => true,
                    Some((b, bv)) => rank(&c.config, v, &b.config, *bv) == Ordering::Less,
                };
                if better {
                    best = Some((model, v));
                }
            }
            Err((epoch, loss)) => cells.push(CellReport {
                config: c.config,
                outcome: CellOutcome::Diverged { epoch, loss },
            }),
        }
    }
    let (model, validation_error) = best.ok_or(Error::AllCellsDiverged)?;
    Ok(Selection {
        model,
        validation_error,
        cells,
    })
}

fn rank(a: &TrainConfig, va: f64, b: &TrainConfig, vb: f64) -> Ordering {
    va.total_cmp(&vb)
        .then(a.network.hidden_layers.cmp(&b.network.hidden_layers))
        .then(a.network.width.cmp(&b.network.width))
        .then(a.learning_rate.total_cmp(&b.learning_rate))
        .then(b.weight_decay.total_cmp(&a.weight_decay))
}

/// Sample mean and standard deviation over retrainings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrainStats {
    pub training_error_mean: f64,
    pub training_error_std: f64,
    pub generalization_error_mean: f64,
    pub generalization_error_std: f64,
    pub runs: usize,
    pub diverged: usize,
}

/// Retrains `cfg` `repeats` times with seeds `split_seed(seed, k)` and summarizes `E_T`
/// and `E_G` (p = 1). Diverged runs are counted and left out of the statistics.
pub fn retrain_statistics(
    cfg: &TrainConfig,
    data: &Dataset,
    test: &Dataset,
    repeats: usize,
    seed: u64,
) -> Result<RetrainStats> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    cfg.validate()?;
    let runs: Vec<Result<Option<(f64, f64)>>> = (0..repeats)
        .into_par_iter()
        .map(|k| {
            let c = TrainConfig {
                seed: split_seed(seed, k as u64),
                ..*cfg
            };
            match train_one(data, &c) {
                Ok(m) => Ok(Some((m.training_error, errors_on(&m.params, test, 1)?))),
                Err(Error::Diverged { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut et = Vec::new();
    let mut eg = Vec::new();
    for (a, b) in runs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten() {
        et.push(a);
        eg.push(b);
    }
    if et.is_empty() {
        return Err(Error::AllCellsDiverged);
    }
    let (tm, ts) = mean_std(&et);
    let (gm, gs) = mean_std(&eg);
    Ok(RetrainStats {
        training_error_mean: tm,
        training_error_std: ts,
        generalization_error_mean: gm,
        generalization_error_std: gs,
        runs: et.len(),
        diverged: repeats - et.len(),
    })
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
