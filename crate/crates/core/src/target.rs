//! Prediction targets `y = c_x·x0 + c_eps·eps`, the recoverability score and
//! the loss-weight rules built on it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::Schedule;

/// Grid size of the trapezoid rule used to normalize weights over `t ~ U[0,1]`.
pub const NORMALIZATION_GRID: usize = 1025;
pub const DEFAULT_GAMMA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TargetKind {
    Eps,
    X0,
    /// Velocity `α·eps − σ·x0`.
    V,
    /// Flow-matching field `eps − x0`.
    U,
}

impl TargetKind {
    pub const ALL: [TargetKind; 4] = [TargetKind::Eps, TargetKind::X0, TargetKind::V, TargetKind::U];

    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Eps => "eps",
            TargetKind::X0 => "x0",
            TargetKind::V => "v",
            TargetKind::U => "u",
        }
    }

    /// `(c_x(t), c_eps(t))` under `schedule`.
    pub fn coefficients(self, schedule: &Schedule, t: f64) -> Result<(f64, f64)> {
        let (a, s) = schedule.alpha_sigma(t)?;
        Ok(self.coefficients_from(a, s))
    }

    pub(crate) fn coefficients_from(self, alpha: f64, sigma: f64) -> (f64, f64) {
        match self {
            TargetKind::Eps => (0.0, 1.0),
            TargetKind::X0 => (1.0, 0.0),
            TargetKind::V => (-sigma, alpha),
            TargetKind::U => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eps" => Ok(TargetKind::Eps),
            "x0" => Ok(TargetKind::X0),
            "v" => Ok(TargetKind::V),
            "u" => Ok(TargetKind::U),
            other => Err(Error::Config(format!(
                "unknown target `{other}` (expected eps|x0|v|u)"
            ))),
        }
    }
}

/// `y = c_x(t)·x0 + c_eps(t)·eps`.
pub fn make_target(
    target: TargetKind,
    schedule: &Schedule,
    x0: &[f64],
    eps: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    if x0.len() != eps.len() {
        return Err(Error::Contract(format!(
            "make_target: x0 has dimension {} but eps has {}",
            x0.len(),
            eps.len()
        )));
    }
    let (cx, ce) = target.coefficients(schedule, t)?;
    Ok(x0.iter().zip(eps).map(|(x, e)| cx * x + ce * e).collect())
}

/// RMS amplitude of the target as it is expressed through the corrupted
/// input: `sqrt((c_x α)² + (c_eps σ)²)`.
pub fn recoverability(target: TargetKind, schedule: &Schedule, t: f64) -> Result<f64> {
    let (a, s) = schedule.alpha_sigma(t)?;
    let (cx, ce) = target.coefficients_from(a, s);
    Ok((cx * a).hypot(ce * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightKind {
    Uniform,
    Erd,
    /// `min(SNR, γ)/SNR`, a Min-SNR style baseline.
    ClampedSnr,
}

impl WeightKind {
    pub const ALL: [WeightKind; 3] = [WeightKind::Uniform, WeightKind::Erd, WeightKind::ClampedSnr];

    pub fn name(self) -> &'static str {
        match self {
            WeightKind::Uniform => "uniform",
            WeightKind::Erd => "erd",
            WeightKind::ClampedSnr => "clamped_snr",
        }
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(WeightKind::Uniform),
            "erd" => Ok(WeightKind::Erd),
            "clamped_snr" => Ok(WeightKind::ClampedSnr),
            other => Err(Error::Config(format!(
                "unknown weight `{other}` (expected uniform|erd|clamped_snr)"
            ))),
        }
    }
}

/// A loss-weight rule bound to one (target, schedule) pair and normalized to
/// unit mean over `t ~ U[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRule {
    kind: WeightKind,
    gamma: f64,
    target: TargetKind,
    schedule: Schedule,
    normalizer: f64,
}

impl WeightRule {
    pub fn new(kind: WeightKind, target: TargetKind, schedule: Schedule) -> Result<Self> {
        Self::with_gamma(kind, target, schedule, DEFAULT_GAMMA)
    }

    pub fn with_gamma(
        kind: WeightKind,
        target: TargetKind,
        schedule: Schedule,
        gamma: f64,
    ) -> Result<Self> {
        if kind == WeightKind::ClampedSnr && !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
        }
        let mut rule = WeightRule {
            kind,
            gamma,
            target,
            schedule,
            normalizer: 1.0,
        };
        if kind != WeightKind::Uniform {
            let n = NORMALIZATION_GRID;
            let h = 1.0 / (n - 1) as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                acc += end * rule.raw(i as f64 * h)?;
            }
            rule.normalizer = acc * h;
            if !(rule.normalizer > 0.0) {
                return Err(Error::Domain(format!(
                    "weight rule {kind} has non-positive mean {}",
                    rule.normalizer
                )));
            }
        }
        Ok(rule)
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn target(&self) -> TargetKind {
        self.target
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// The constant `Z` dividing the raw weight.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    fn raw(&self, t: f64) -> Result<f64> {
        Ok(match self.kind {
            WeightKind::Uniform => 1.0,
            WeightKind::Erd => recoverability(self.target, &self.schedule, t)?,
            WeightKind::ClampedSnr => {
                let snr = self.schedule.snr(t)?;
                if snr <= self.gamma {
                    1.0
                } else {
                    self.gamma / snr
                }
            }
        })
    }

    /// Normalized weight at `t`.
    pub fn weight(&self, t: f64) -> Result<f64> {
        Ok(self.raw(t)? / self.normalizer)
    }

    /// Normalized weight at `t`, checking that the caller's target and
    /// schedule are the ones this rule was built for.
    pub fn loss_weight(&self, target: TargetKind, schedule: &Schedule, t: f64) -> Result<f64> {
        if target != self.target || *schedule != self.schedule {
            return Err(Error::Contract(format!(
                "weight rule built for ({}, {}) used with ({}, {})",
                self.target, self.schedule.kind, target, schedule.kind
            )));
        }
        self.weight(t)
    }
}
