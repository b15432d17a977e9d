//! Adam training loops (global and binned) and per-`t` loss evaluation
//! against the exact Bayes floor.

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmm::Gmm;
use crate::mlp::{Batch, Mlp, MlpConfig};
use crate::rng::{self, tag};
use crate::schedule::Schedule;
use crate::stats::Moments;
use crate::target::{TargetKind, WeightKind, WeightRule, DEFAULT_GAMMA};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub t_range: (f64, f64),
    pub seed: u64,
    pub target: TargetKind,
    pub schedule: Schedule,
    pub weight: WeightKind,
    pub gamma: f64,
    pub mlp: MlpConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            batch: 512,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            t_range: (0.0, 1.0),
            seed: 0,
            target: TargetKind::Eps,
            schedule: Schedule::linear(),
            weight: WeightKind::Uniform,
            gamma: DEFAULT_GAMMA,
            mlp: MlpConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.t_range;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("t_range must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi}]")));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn weight_rule(&self) -> Result<WeightRule> {
        WeightRule::with_gamma(self.weight, self.target, self.schedule, self.gamma)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Per-iteration training losses.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricLog {
    pub losses: Vec<f64>,
}

impl MetricLog {
    /// Trailing mean over `window` iterations at each index.
    pub fn running_loss(&self, window: usize) -> Vec<f64> {
        let window = window.max(1);
        let mut out = Vec::with_capacity(self.losses.len());
        let mut acc = 0.0;
        for (i, l) in self.losses.iter().enumerate() {
            acc += l;
            if i >= window {
                acc -= self.losses[i - window];
            }
            out.push(acc / (i + 1).min(window) as f64);
        }
        out
    }
}

fn draw_batch(
    gmm: &Gmm,
    config: &TrainConfig,
    rule: &WeightRule,
    rng: &mut rng::Rng,
) -> Result<Batch> {
    let n = config.batch;
    let d = gmm.dim();
    let (lo, hi) = config.t_range;
    let mut x = Array2::zeros((n, d));
    let mut y = Array2::zeros((n, d));
    let mut t = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut x0 = vec![0.0; d];
    for i in 0..n {
        gmm.sample_into(rng, &mut x0);
        let ti = lo + (hi - lo) * rng.random::<f64>();
        let (a, s) = config.schedule.alpha_sigma(ti)?;
        let (cx, ce) = config.target.coefficients_from(a, s);
        for j in 0..d {
            let e: f64 = rng.sample(StandardNormal);
            x[[i, j]] = a * x0[j] + s * e;
            y[[i, j]] = cx * x0[j] + ce * e;
        }
        t.push(ti);
        w.push(rule.weight(ti)?);
    }
    Ok(Batch { x, t, y, w })
}

/// Trains one model with fresh mixture draws every step.
pub fn train(config: &TrainConfig, gmm: &Gmm) -> Result<(Mlp, MetricLog)> {
    config.validate()?;
    if config.mlp.dim != gmm.dim() {
        return Err(Error::Config(format!(
            "model dim {} does not match data dim {}",
            config.mlp.dim,
            gmm.dim()
        )));
    }
    let rule = config.weight_rule()?;
    let mut model = Mlp::init(config.mlp, config.seed)?;
    let mut rng = rng::derived(config.seed, tag::TRAIN, 0);
    let mut adam = Adam::new(
        model.param_count(),
        config.lr,
        config.beta1,
        config.beta2,
        config.adam_eps,
    );
    let mut log = MetricLog::default();
    for iteration in 0..config.iterations {
        let batch = draw_batch(gmm, config, &rule, &mut rng)?;
        let (loss, grad) = model
            .loss_grad(&batch)
            .map_err(|e| Error::TrainingFault {
                iteration,
                detail: e.to_string(),
            })?;
        adam.step(model.params_mut(), &grad);
        if !model.all_finite() {
            return Err(Error::TrainingFault {
                iteration,
                detail: "non-finite parameters after update".into(),
            });
        }
        log.losses.push(loss);
    }
    Ok((model, log))
}

/// `n` equal-width bins covering `[0, 1]`.
pub fn default_bins(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| (i as f64 / n as f64, (i + 1) as f64 / n as f64))
        .collect()
}

pub fn validate_bins(bins: &[(f64, f64)]) -> Result<()> {
    if bins.is_empty() {
        return Err(Error::Config("piecewise training needs at least one bin".into()));
    }
    const TOL: f64 = 1e-12;
    if bins[0].0.abs() > TOL || (bins[bins.len() - 1].1 - 1.0).abs() > TOL {
        return Err(Error::Config("bins must start at 0 and end at 1".into()));
    }
    for (i, &(lo, hi)) in bins.iter().enumerate() {
        if !(lo < hi) {
            return Err(Error::Config(format!("bin {i} is empty: [{lo}, {hi}]")));
        }
        if i > 0 && (bins[i - 1].1 - lo).abs() > TOL {
            return Err(Error::Config(format!(
                "bins {} and {i} overlap or leave a gap",
                i - 1
            )));
        }
    }
    Ok(())
}

/// Seed for bin `k`; bin 0 keeps the run seed.
pub fn bin_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One independent model per bin, each trained with `t` restricted to it.
pub fn train_piecewise(
    config: &TrainConfig,
    bins: &[(f64, f64)],
    gmm: &Gmm,
) -> Result<Vec<((f64, f64), Mlp, MetricLog)>> {
    validate_bins(bins)?;
    bins.par_iter()
        .enumerate()
        .map(|(k, &bin)| {
            let cfg = TrainConfig {
                t_range: bin,
                seed: bin_seed(config.seed, k),
                ..config.clone()
            };
            let (model, log) = train(&cfg, gmm)?;
            Ok((bin, model, log))
        })
        .collect()
}

/// Anything that maps a batch of `(x_t, t)` to predictions.
pub trait Predictor: Sync {
    fn predict(&self, x: ArrayView2<'_, f64>, t: &[f64]) -> Result<Array2<f64>>;
}

impl Predictor for Mlp {
    fn predict(&self, x: ArrayView2<'_, f64>, t: &[f64]) -> Result<Array2<f64>> {
        Ok(self.forward_batch(x, t)?.output)
    }
}

/// The exact posterior mean as a predictor.
#[derive(Debug, Clone)]
pub struct BayesOracle<'a> {
    pub gmm: &'a Gmm,
    pub target: TargetKind,
    pub schedule: Schedule,
}

impl Predictor for BayesOracle<'_> {
    fn predict(&self, x: ArrayView2<'_, f64>, t: &[f64]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(x.dim());
        for (i, row) in x.rows().into_iter().enumerate() {
            let f = self
                .gmm
                .bayes_predictor(self.target, &self.schedule, t[i], &row.to_vec())?;
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&f));
        }
        Ok(out)
    }
}

/// Routes each input to the model trained on the bin containing its `t`.
#[derive(Debug, Clone)]
pub struct PiecewiseModel {
    pub bins: Vec<(f64, f64)>,
    pub models: Vec<Mlp>,
}

impl PiecewiseModel {
    pub fn new(bins: Vec<(f64, f64)>, models: Vec<Mlp>) -> Result<Self> {
        validate_bins(&bins)?;
        if bins.len() != models.len() {
            return Err(Error::Contract(format!(
                "{} bins but {} models",
                bins.len(),
                models.len()
            )));
        }
        Ok(PiecewiseModel { bins, models })
    }

    pub fn bin_of(&self, t: f64) -> usize {
        self.bins
            .iter()
            .position(|&(lo, hi)| lo <= t && t < hi)
            .unwrap_or(self.bins.len() - 1)
    }
}

impl Predictor for PiecewiseModel {
    fn predict(&self, x: ArrayView2<'_, f64>, t: &[f64]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(x.dim());
        for k in 0..self.models.len() {
            let rows: Vec<usize> = (0..t.len()).filter(|&i| self.bin_of(t[i]) == k).collect();
            if rows.is_empty() {
                continue;
            }
            let sub = x.select(ndarray::Axis(0), &rows);
            let ts: Vec<f64> = rows.iter().map(|&i| t[i]).collect();
            let pred = self.models[k].predict(sub.view(), &ts)?;
            for (r, &i) in rows.iter().enumerate() {
                out.row_mut(i).assign(&pred.row(r));
            }
        }
        Ok(out)
    }
}

/// Unweighted MSE at one `t`, paired with the Bayes floor on the same draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossPoint {
    pub t: f64,
    pub mse: f64,
    pub mse_stderr: f64,
    pub floor: f64,
    pub floor_stderr: f64,
    pub excess: f64,
    /// Standard error of the paired per-draw difference.
    pub excess_stderr: f64,
}

const EVAL_CHUNK: usize = 4096;

/// Per-`t` MSE of `model` against fresh seeded draws. Draws depend only on
/// `(seed, index in t_grid)`, so two models evaluated with the same seed and
/// grid see identical samples.
pub fn evaluate_loss_curve<P: Predictor + ?Sized>(
    model: &P,
    gmm: &Gmm,
    target: TargetKind,
    schedule: &Schedule,
    t_grid: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<Vec<LossPoint>> {
    if n_mc == 0 {
        return Err(Error::Domain("evaluate_loss_curve needs n_mc >= 1".into()));
    }
    t_grid
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut rng = rng::derived(seed, tag::EVAL, i as u64);
            let draws = gmm.draw(n_mc, &mut rng);
            let floors = gmm.conditional_errors(target, schedule, t, &draws)?;
            let (a, s) = schedule.alpha_sigma(t)?;
            let (cx, ce) = target.coefficients_from(a, s);
            let d = gmm.dim();
            let (mut mse, mut floor, mut diff) =
                (Moments::default(), Moments::default(), Moments::default());
            for (chunk_idx, chunk) in draws.chunks(EVAL_CHUNK).enumerate() {
                let mut x = Array2::zeros((chunk.len(), d));
                for (r, dr) in chunk.iter().enumerate() {
                    for j in 0..d {
                        x[[r, j]] = a * dr.x0[j] + s * dr.eps[j];
                    }
                }
                let pred = model.predict(x.view(), &vec![t; chunk.len()])?;
                for (r, dr) in chunk.iter().enumerate() {
                    let err: f64 = (0..d)
                        .map(|j| (pred[[r, j]] - (cx * dr.x0[j] + ce * dr.eps[j])).powi(2))
                        .sum();
                    let fl = floors[chunk_idx * EVAL_CHUNK + r];
                    mse.push(err);
                    floor.push(fl);
                    diff.push(err - fl);
                }
            }
            Ok(LossPoint {
                t,
                mse: mse.mean(),
                mse_stderr: mse.stderr(),
                floor: floor.mean(),
                floor_stderr: floor.stderr(),
                excess: mse.mean() - floor.mean(),
                excess_stderr: diff.stderr(),
            })
        })
        .collect()
}
