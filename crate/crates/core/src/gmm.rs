//! Isotropic Gaussian mixture data source and its exact Bayes oracles.
//!
//! With `x0 ~ Σ_k π_k N(μ_k, σ0² I)` and `x_t = α x0 + σ eps`, each component
//! stays Gaussian under corruption, so the posterior over `x0` given `x_t` is
//! again a mixture with closed-form responsibilities, means and covariances.
//! Everything below follows from that.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, tag, Rng};
use crate::schedule::Schedule;
use crate::stats::{self, Estimate, Moments};
use crate::target::TargetKind;

pub const DEFAULT_COMPONENT_STD: f64 = 0.3;
pub const DEFAULT_N_MC: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gmm {
    centers: Vec<Vec<f64>>,
    component_std: f64,
    dim: usize,
}

impl Default for Gmm {
    /// Four clusters at `(±2, ±2)` with `σ0 = 0.3`.
    fn default() -> Self {
        Gmm::new(
            vec![
                vec![2.0, 2.0],
                vec![-2.0, 2.0],
                vec![-2.0, -2.0],
                vec![2.0, -2.0],
            ],
            DEFAULT_COMPONENT_STD,
        )
        .expect("default mixture is valid")
    }
}

/// Posterior of `x0` given `x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub responsibilities: Vec<f64>,
    pub mean: Vec<f64>,
    /// `tr Cov(x0 | x_t)`.
    pub trace_cov: f64,
}

/// Per-sample split of a target into its recoverable and irreducible parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BayesDecomposition {
    /// `‖E[y | x_t]‖₂`
    pub signal_norm: f64,
    /// `‖y − E[y | x_t]‖₂`
    pub noise_norm: f64,
}

impl BayesDecomposition {
    pub fn noise_dominated(&self) -> bool {
        self.noise_norm > self.signal_norm
    }
}

/// Monte-Carlo Bayes floor. `mse` is `E‖f* − y‖²`; the loss-scale value is
/// half of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FloorEstimate {
    pub mse: f64,
    pub stderr: f64,
    pub n: u64,
}

impl FloorEstimate {
    pub fn half_loss(&self) -> f64 {
        0.5 * self.mse
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingCost {
    pub empirical: f64,
    pub stderr: f64,
    pub analytic: f64,
}

/// One draw `(x0, eps)` with its generating component.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub x0: Vec<f64>,
    pub eps: Vec<f64>,
    pub component: usize,
}

impl Gmm {
    pub fn new(centers: Vec<Vec<f64>>, component_std: f64) -> Result<Self> {
        let dim = centers
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Domain("mixture needs at least one center".into()))?;
        if dim == 0 || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::Domain("mixture centers must share a positive dimension".into()));
        }
        if !(component_std > 0.0 && component_std.is_finite()) {
            return Err(Error::Domain(format!(
                "component std must be positive, got {component_std}"
            )));
        }
        Ok(Gmm {
            centers,
            component_std,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn component_std(&self) -> f64 {
        self.component_std
    }

    /// `E‖x0‖² = Σ π_k ‖μ_k‖² + d σ0²`.
    pub fn second_moment(&self) -> f64 {
        let k = self.components() as f64;
        self.centers
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / k
            + self.dim as f64 * self.component_std.powi(2)
    }

    /// `tr Cov(x0)`.
    pub fn total_variance(&self) -> f64 {
        let k = self.components() as f64;
        let mean_sq: f64 = (0..self.dim)
            .map(|j| (self.centers.iter().map(|c| c[j]).sum::<f64>() / k).powi(2))
            .sum();
        self.second_moment() - mean_sq
    }

    /// Writes one `x0` draw into `out` and returns its component.
    pub fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) -> usize {
        let k = rng.random_range(0..self.components());
        for (o, m) in out.iter_mut().zip(&self.centers[k]) {
            let z: f64 = rng.sample(StandardNormal);
            *o = m + self.component_std * z;
        }
        k
    }

    pub fn sample_x0(&self, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        self.sample_labeled(count, rng).into_iter().map(|(x, _)| x).collect()
    }

    pub fn sample_labeled(&self, count: usize, rng: &mut Rng) -> Vec<(Vec<f64>, usize)> {
        (0..count)
            .map(|_| {
                let mut x = vec![0.0; self.dim];
                let k = self.sample_into(rng, &mut x);
                (x, k)
            })
            .collect()
    }

    /// Draws `(x0, eps)` pairs.
    pub fn draw(&self, count: usize, rng: &mut Rng) -> Vec<Draw> {
        (0..count)
            .map(|_| {
                let mut x0 = vec![0.0; self.dim];
                let component = self.sample_into(rng, &mut x0);
                let eps = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                Draw { x0, eps, component }
            })
            .collect()
    }

    fn check_point(&self, x_t: &[f64]) -> Result<()> {
        if x_t.len() != self.dim {
            return Err(Error::Contract(format!(
                "point has dimension {} but mixture has {}",
                x_t.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn responsibilities_at(&self, alpha: f64, sigma: f64, x_t: &[f64]) -> Vec<f64> {
        let var = alpha * alpha * self.component_std.powi(2) + sigma * sigma;
        let logits: Vec<f64> = self
            .centers
            .iter()
            .map(|c| {
                let d2: f64 = x_t.iter().zip(c).map(|(x, m)| (x - alpha * m).powi(2)).sum();
                -0.5 * d2 / var
            })
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= z);
        w
    }

    /// `p(k | x_t)` for each component.
    pub fn posterior_responsibilities(
        &self,
        schedule: &Schedule,
        t: f64,
        x_t: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_point(x_t)?;
        let (a, s) = schedule.alpha_sigma(t)?;
        Ok(self.responsibilities_at(a, s, x_t))
    }

    pub(crate) fn posterior_at(&self, alpha: f64, sigma: f64, x_t: &[f64]) -> Posterior {
        let s0 = self.component_std.powi(2);
        let var = alpha * alpha * s0 + sigma * sigma;
        let gain = alpha * s0 / var;
        let resp = self.responsibilities_at(alpha, sigma, x_t);
        let means: Vec<Vec<f64>> = self
            .centers
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x_t)
                    .map(|(m, x)| m + gain * (x - alpha * m))
                    .collect()
            })
            .collect();
        let mut mean = vec![0.0; self.dim];
        for (p, m) in resp.iter().zip(&means) {
            for (acc, v) in mean.iter_mut().zip(m) {
                *acc += p * v;
            }
        }
        let between: f64 = resp
            .iter()
            .zip(&means)
            .map(|(p, m)| p * m.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum();
        let within = self.dim as f64 * s0 * sigma * sigma / var;
        Posterior {
            responsibilities: resp,
            mean,
            trace_cov: within + between,
        }
    }

    pub fn posterior(&self, schedule: &Schedule, t: f64, x_t: &[f64]) -> Result<Posterior> {
        self.check_point(x_t)?;
        let (a, s) = schedule.alpha_sigma(t)?;
        Ok(self.posterior_at(a, s, x_t))
    }

    /// `(E[x0 | x_t], E[eps | x_t])`. At `σ = 0` the noise channel is
    /// independent of `x_t` and its conditional mean is zero.
    pub fn channel_means(
        &self,
        schedule: &Schedule,
        t: f64,
        x_t: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_point(x_t)?;
        let (a, s) = schedule.alpha_sigma(t)?;
        let post = self.posterior_at(a, s, x_t);
        let eps = channel_eps(a, s, x_t, &post.mean);
        Ok((post.mean, eps))
    }

    /// `E[y | x_t]` for the given target.
    pub fn bayes_predictor(
        &self,
        target: TargetKind,
        schedule: &Schedule,
        t: f64,
        x_t: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_point(x_t)?;
        let (a, s) = schedule.alpha_sigma(t)?;
        let post = self.posterior_at(a, s, x_t);
        Ok(predict_from(target, a, s, x_t, &post.mean))
    }

    /// `tr Cov(y | x_t)`, the conditional Bayes error at one input.
    fn conditional_error(&self, target: TargetKind, alpha: f64, sigma: f64, post: &Posterior) -> f64 {
        let (cx, ce) = target.coefficients_from(alpha, sigma);
        if sigma > 0.0 {
            // Given x_t, eps = (x_t − α x0)/σ, so y is affine in x0.
            (cx - ce * alpha / sigma).powi(2) * post.trace_cov
        } else {
            cx * cx * post.trace_cov + ce * ce * self.dim as f64
        }
    }

    /// Monte-Carlo estimate of `E‖E[y | x_t] − y‖²`.
    ///
    /// Each draw contributes its exact conditional error `tr Cov(y | x_t)`
    /// rather than the raw squared residual; both have the floor as their
    /// mean, the former with far lower variance. Draws are split into fixed
    /// shards seeded from `seed`, so the result is independent of threading.
    pub fn bayes_floor(
        &self,
        target: TargetKind,
        schedule: &Schedule,
        t: f64,
        n_mc: usize,
        seed: u64,
    ) -> Result<FloorEstimate> {
        if n_mc == 0 {
            return Err(Error::Domain("bayes_floor needs n_mc >= 1".into()));
        }
        let (a, s) = schedule.alpha_sigma(t)?;
        let parts: Vec<Moments> = rng::shards(n_mc)
            .into_par_iter()
            .map(|(shard, len)| {
                let mut rng = rng::derived(seed, tag::FLOOR, shard as u64);
                let mut m = Moments::default();
                let mut x0 = vec![0.0; self.dim];
                let mut xt = vec![0.0; self.dim];
                for _ in 0..len {
                    self.sample_into(&mut rng, &mut x0);
                    for (o, x) in xt.iter_mut().zip(&x0) {
                        let e: f64 = rng.sample(StandardNormal);
                        *o = a * x + s * e;
                    }
                    let post = self.posterior_at(a, s, &xt);
                    m.push(self.conditional_error(target, a, s, &post));
                }
                m
            })
            .collect();
        let est = stats::reduce(parts).estimate();
        Ok(FloorEstimate {
            mse: est.mean,
            stderr: est.stderr,
            n: est.n,
        })
    }

    /// Conditional Bayes error `tr Cov(y | x_t)` at each draw's corrupted
    /// input. Used to pair floors with model evaluations on the same draws.
    pub fn conditional_errors(
        &self,
        target: TargetKind,
        schedule: &Schedule,
        t: f64,
        draws: &[Draw],
    ) -> Result<Vec<f64>> {
        let (a, s) = schedule.alpha_sigma(t)?;
        draws
            .iter()
            .map(|d| {
                self.check_point(&d.x0)?;
                let xt: Vec<f64> = d.x0.iter().zip(&d.eps).map(|(x, e)| a * x + s * e).collect();
                let post = self.posterior_at(a, s, &xt);
                Ok(self.conditional_error(target, a, s, &post))
            })
            .collect()
    }

    /// Signal/noise norms of `y` against `E[y | x_t]` for each draw.
    pub fn signal_noise_decomposition(
        &self,
        target: TargetKind,
        schedule: &Schedule,
        t: f64,
        samples: &[(Vec<f64>, Vec<f64>)],
    ) -> Result<Vec<BayesDecomposition>> {
        let (a, s) = schedule.alpha_sigma(t)?;
        let (cx, ce) = target.coefficients_from(a, s);
        samples
            .iter()
            .map(|(x0, eps)| {
                self.check_point(x0)?;
                self.check_point(eps)?;
                let xt: Vec<f64> = x0.iter().zip(eps).map(|(x, e)| a * x + s * e).collect();
                let post = self.posterior_at(a, s, &xt);
                let f = predict_from(target, a, s, &xt, &post.mean);
                let signal = f.iter().map(|v| v * v).sum::<f64>().sqrt();
                let noise = f
                    .iter()
                    .zip(x0.iter().zip(eps))
                    .map(|(fv, (x, e))| (cx * x + ce * e - fv).powi(2))
                    .sum::<f64>()
                    .sqrt();
                Ok(BayesDecomposition {
                    signal_norm: signal,
                    noise_norm: noise,
                })
            })
            .collect()
    }

    /// Cost of the coupling `x_t ↔ σ_max·eps` against its closed form
    /// `α² E‖x0‖² + (σ − σ_max)² d`.
    pub fn w2_coupling_cost(
        &self,
        schedule: &Schedule,
        t: f64,
        n_mc: usize,
        seed: u64,
    ) -> Result<CouplingCost> {
        if n_mc == 0 {
            return Err(Error::Domain("w2_coupling_cost needs n_mc >= 1".into()));
        }
        let (a, s) = schedule.alpha_sigma(t)?;
        let gap = s - schedule.sigma_max();
        let parts: Vec<Moments> = rng::shards(n_mc)
            .into_par_iter()
            .map(|(shard, len)| {
                let mut rng = rng::derived(seed, tag::COUPLING, shard as u64);
                let mut m = Moments::default();
                let mut x0 = vec![0.0; self.dim];
                for _ in 0..len {
                    self.sample_into(&mut rng, &mut x0);
                    let cost: f64 = x0
                        .iter()
                        .map(|x| {
                            let e: f64 = rng.sample(StandardNormal);
                            (a * x + gap * e).powi(2)
                        })
                        .sum();
                    m.push(cost);
                }
                m
            })
            .collect();
        let Estimate { mean, stderr, .. } = stats::reduce(parts).estimate();
        Ok(CouplingCost {
            empirical: mean,
            stderr,
            analytic: a * a * self.second_moment() + gap * gap * self.dim as f64,
        })
    }
}

fn channel_eps(alpha: f64, sigma: f64, x_t: &[f64], mean_x0: &[f64]) -> Vec<f64> {
    if sigma > 0.0 {
        x_t.iter()
            .zip(mean_x0)
            .map(|(x, m)| (x - alpha * m) / sigma)
            .collect()
    } else {
        vec![0.0; x_t.len()]
    }
}

fn predict_from(target: TargetKind, alpha: f64, sigma: f64, x_t: &[f64], mean_x0: &[f64]) -> Vec<f64> {
    let (cx, ce) = target.coefficients_from(alpha, sigma);
    let eps = channel_eps(alpha, sigma, x_t, mean_x0);
    mean_x0
        .iter()
        .zip(&eps)
        .map(|(m, e)| cx * m + ce * e)
        .collect()
}
