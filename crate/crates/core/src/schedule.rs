//! Continuous-time noise schedules on `t ∈ [0, 1]` and their log-SNR.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA_CLAMP: f64 = 20.0;
pub const DEFAULT_BETA_MIN: f64 = 0.1;
pub const DEFAULT_BETA_MAX: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScheduleKind {
    /// Flow-matching interpolant: `α = 1 − t`, `σ = t`.
    Linear,
    /// Variance preserving with a linear `β(t)`.
    Vp,
    /// Spherical interpolant: `α = cos(πt/2)`, `σ = sin(πt/2)`.
    Gvp,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 3] = [ScheduleKind::Linear, ScheduleKind::Vp, ScheduleKind::Gvp];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Linear => "linear",
            ScheduleKind::Vp => "vp",
            ScheduleKind::Gvp => "gvp",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(ScheduleKind::Linear),
            "vp" => Ok(ScheduleKind::Vp),
            "gvp" => Ok(ScheduleKind::Gvp),
            other => Err(Error::Config(format!(
                "unknown schedule `{other}` (expected linear|vp|gvp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub beta_min: f64,
    pub beta_max: f64,
    pub lambda_clamp: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind) -> Self {
        Schedule {
            kind,
            beta_min: DEFAULT_BETA_MIN,
            beta_max: DEFAULT_BETA_MAX,
            lambda_clamp: DEFAULT_LAMBDA_CLAMP,
        }
    }

    pub fn linear() -> Self {
        Self::new(ScheduleKind::Linear)
    }

    pub fn vp() -> Self {
        Self::new(ScheduleKind::Vp)
    }

    pub fn gvp() -> Self {
        Self::new(ScheduleKind::Gvp)
    }

    pub fn vp_with_betas(beta_min: f64, beta_max: f64) -> Result<Self> {
        if !(beta_min > 0.0 && beta_min <= beta_max && beta_max.is_finite()) {
            return Err(Error::Domain(format!(
                "VP betas must satisfy 0 < beta_min <= beta_max, got ({beta_min}, {beta_max})"
            )));
        }
        Ok(Schedule {
            beta_min,
            beta_max,
            ..Self::vp()
        })
    }

    pub fn with_lambda_clamp(mut self, clamp: f64) -> Self {
        self.lambda_clamp = clamp;
        self
    }

    fn check_t(t: f64) -> Result<()> {
        if (0.0..=1.0).contains(&t) {
            Ok(())
        } else {
            Err(Error::Domain(format!("t = {t} outside [0, 1]")))
        }
    }

    /// Integrated `β` for the VP schedule: `β_min t + (β_max − β_min) t² / 2`.
    fn vp_integral(&self, t: f64) -> f64 {
        self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t
    }

    /// `(α(t), σ(t))`.
    pub fn alpha_sigma(&self, t: f64) -> Result<(f64, f64)> {
        Self::check_t(t)?;
        Ok(self.alpha_sigma_unchecked(t))
    }

    pub(crate) fn alpha_sigma_unchecked(&self, t: f64) -> (f64, f64) {
        match self.kind {
            ScheduleKind::Linear => (1.0 - t, t),
            ScheduleKind::Vp => {
                let b = self.vp_integral(t);
                // σ² = 1 − e^{−B}, computed without cancellation near t = 0.
                ((-0.5 * b).exp(), (-(-b).exp_m1()).sqrt())
            }
            ScheduleKind::Gvp => {
                let (s, c) = (t * FRAC_PI_2).sin_cos();
                (c, s)
            }
        }
    }

    /// Terminal noise level `σ(1)`.
    pub fn sigma_max(&self) -> f64 {
        self.alpha_sigma_unchecked(1.0).1
    }

    /// `log(α²/σ²)` clamped to `±lambda_clamp`.
    pub fn log_snr(&self, t: f64) -> Result<f64> {
        let (a, s) = self.alpha_sigma(t)?;
        let raw = if s == 0.0 {
            f64::INFINITY
        } else if a == 0.0 {
            f64::NEG_INFINITY
        } else {
            2.0 * (a / s).ln()
        };
        Ok(raw.clamp(-self.lambda_clamp, self.lambda_clamp))
    }

    /// `α²/σ²`, unclamped (`+∞` at σ = 0).
    pub fn snr(&self, t: f64) -> Result<f64> {
        let (a, s) = self.alpha_sigma(t)?;
        Ok(if s == 0.0 { f64::INFINITY } else { (a / s).powi(2) })
    }

    /// Forward corruption `α(t)·x0 + σ(t)·eps`.
    pub fn corrupt(&self, x0: &[f64], eps: &[f64], t: f64) -> Result<Vec<f64>> {
        if x0.len() != eps.len() {
            return Err(Error::Contract(format!(
                "corrupt: x0 has dimension {} but eps has {}",
                x0.len(),
                eps.len()
            )));
        }
        let (a, s) = self.alpha_sigma(t)?;
        Ok(x0.iter().zip(eps).map(|(x, e)| a * x + s * e).collect())
    }
}

/// `n` uniformly spaced points covering `[0, 1]` inclusive.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}
