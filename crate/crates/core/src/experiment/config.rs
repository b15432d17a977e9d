//! Plain-text `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::schedule::{Schedule, ScheduleKind};
use crate::spectra::BlockScalarization;
use crate::train::{default_bins, validate_bins, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    pub t_grid_size: usize,
    /// Draws per `t` for oracle-only Bayes floors.
    pub n_mc: usize,
    /// Draws per `t` when evaluating a trained model.
    pub eval_mc: usize,
    pub plot: bool,
    pub oracle_only: bool,
    /// Also train the binned models in `train`.
    pub piecewise: bool,
    pub bins: Vec<(f64, f64)>,
    pub ntk_points: usize,
    pub ntk_grid_size: usize,
    pub heatmap_times: Vec<f64>,
    pub scalarization: BlockScalarization,
    pub pca_times: Vec<f64>,
    pub pca_samples: usize,
    pub phase_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            out_dir: PathBuf::from("erdlab-out"),
            t_grid_size: 101,
            n_mc: crate::gmm::DEFAULT_N_MC,
            eval_mc: 4096,
            plot: false,
            oracle_only: false,
            piecewise: false,
            bins: default_bins(5),
            ntk_points: 64,
            ntk_grid_size: 21,
            heatmap_times: vec![0.05, 0.35, 0.65, 0.95],
            scalarization: BlockScalarization::Trace,
            pca_times: vec![0.1, 0.4, 0.7, 0.9],
            pca_samples: 512,
            phase_samples: 128,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse::<f64>(key, v.trim()))
        .collect()
}

/// `5` for five equal bins, or `lo:hi,lo:hi,...`.
fn parse_bins(value: &str) -> Result<Vec<(f64, f64)>> {
    if let Ok(n) = value.parse::<usize>() {
        if n == 0 {
            return Err(Error::Config("bins must be >= 1".into()));
        }
        return Ok(default_bins(n));
    }
    value
        .split(',')
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("bin `{pair}` is not lo:hi")))?;
            Ok((parse("bins", lo.trim())?, parse("bins", hi.trim())?))
        })
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut beta_min = cfg.train.schedule.beta_min;
        let mut beta_max = cfg.train.schedule.beta_max;
        let mut clamp = cfg.train.schedule.lambda_clamp;
        let mut kind = cfg.train.schedule.kind;
        let mut t_lo = cfg.train.t_range.0;
        let mut t_hi = cfg.train.t_range.1;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let t = &mut cfg.train;
            match key {
                "schedule" => kind = value.parse::<ScheduleKind>()?,
                "beta_min" => beta_min = parse(key, value)?,
                "beta_max" => beta_max = parse(key, value)?,
                "lambda_clamp" => clamp = parse(key, value)?,
                "target" => t.target = value.parse()?,
                "weight" => t.weight = value.parse()?,
                "gamma" => t.gamma = parse(key, value)?,
                "iterations" => t.iterations = parse(key, value)?,
                "batch" => t.batch = parse(key, value)?,
                "lr" => t.lr = parse(key, value)?,
                "beta1" => t.beta1 = parse(key, value)?,
                "beta2" => t.beta2 = parse(key, value)?,
                "adam_eps" => t.adam_eps = parse(key, value)?,
                "t_lo" => t_lo = parse(key, value)?,
                "t_hi" => t_hi = parse(key, value)?,
                "seed" => t.seed = parse(key, value)?,
                "embed_dim" => t.mlp.embed_dim = parse(key, value)?,
                "hidden_dim" => t.mlp.hidden_dim = parse(key, value)?,
                "depth" => t.mlp.depth = parse(key, value)?,
                "freq_base" => t.mlp.freq_base = parse(key, value)?,
                "time_scale" => t.mlp.time_scale = parse(key, value)?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "t_grid_size" => cfg.t_grid_size = parse(key, value)?,
                "n_mc" => cfg.n_mc = parse(key, value)?,
                "eval_mc" => cfg.eval_mc = parse(key, value)?,
                "plot" => cfg.plot = parse_bool(key, value)?,
                "oracle_only" => cfg.oracle_only = parse_bool(key, value)?,
                "piecewise" => cfg.piecewise = parse_bool(key, value)?,
                "bins" => cfg.bins = parse_bins(value)?,
                "ntk_points" => cfg.ntk_points = parse(key, value)?,
                "ntk_grid_size" => cfg.ntk_grid_size = parse(key, value)?,
                "heatmap_times" => cfg.heatmap_times = parse_list(key, value)?,
                "scalarization" => {
                    cfg.scalarization = match value {
                        "trace" => BlockScalarization::Trace,
                        "frobenius" => BlockScalarization::Frobenius,
                        _ => {
                            return Err(Error::Config(format!(
                                "unknown scalarization `{value}` (expected trace|frobenius)"
                            )))
                        }
                    }
                }
                "pca_times" => cfg.pca_times = parse_list(key, value)?,
                "pca_samples" => cfg.pca_samples = parse(key, value)?,
                "phase_samples" => cfg.phase_samples = parse(key, value)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        cfg.train.schedule = match kind {
            ScheduleKind::Vp => Schedule::vp_with_betas(beta_min, beta_max)
                .map_err(|e| Error::Config(e.to_string()))?,
            k => Schedule::new(k),
        }
        .with_lambda_clamp(clamp);
        cfg.train.t_range = (t_lo, t_hi);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.t_grid_size < 2 || self.ntk_grid_size < 2 {
            return Err(Error::Config("grid sizes must be >= 2".into()));
        }
        if self.n_mc == 0 || self.eval_mc == 0 || self.pca_samples < 4 || self.ntk_points == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if !self.pca_times.iter().all(in_unit) || !self.heatmap_times.iter().all(in_unit) {
            return Err(Error::Config("pca_times and heatmap_times must lie in [0, 1]".into()));
        }
        validate_bins(&self.bins)?;
        if !(self.train.schedule.lambda_clamp > 0.0) {
            return Err(Error::Config("lambda_clamp must be positive".into()));
        }
        Ok(())
    }

    /// Canonical key/value snapshot, parseable by [`ExperimentConfig::parse`].
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let t = &self.train;
        let s = &t.schedule;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("schedule", s.kind.to_string());
        put("beta_min", s.beta_min.to_string());
        put("beta_max", s.beta_max.to_string());
        put("lambda_clamp", s.lambda_clamp.to_string());
        put("target", t.target.to_string());
        put("weight", t.weight.to_string());
        put("gamma", t.gamma.to_string());
        put("iterations", t.iterations.to_string());
        put("batch", t.batch.to_string());
        put("lr", t.lr.to_string());
        put("beta1", t.beta1.to_string());
        put("beta2", t.beta2.to_string());
        put("adam_eps", t.adam_eps.to_string());
        put("t_lo", t.t_range.0.to_string());
        put("t_hi", t.t_range.1.to_string());
        put("seed", t.seed.to_string());
        put("embed_dim", t.mlp.embed_dim.to_string());
        put("hidden_dim", t.mlp.hidden_dim.to_string());
        put("depth", t.mlp.depth.to_string());
        put("freq_base", t.mlp.freq_base.to_string());
        put("time_scale", t.mlp.time_scale.to_string());
        put("out_dir", self.out_dir.display().to_string());
        put("t_grid_size", self.t_grid_size.to_string());
        put("n_mc", self.n_mc.to_string());
        put("eval_mc", self.eval_mc.to_string());
        put("plot", self.plot.to_string());
        put("oracle_only", self.oracle_only.to_string());
        put("piecewise", self.piecewise.to_string());
        put(
            "bins",
            self.bins
                .iter()
                .map(|(a, b)| format!("{a}:{b}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        put("ntk_points", self.ntk_points.to_string());
        put("ntk_grid_size", self.ntk_grid_size.to_string());
        put("heatmap_times", join(&self.heatmap_times));
        put(
            "scalarization",
            match self.scalarization {
                BlockScalarization::Trace => "trace",
                BlockScalarization::Frobenius => "frobenius",
            }
            .to_string(),
        );
        put("pca_times", join(&self.pca_times));
        put("pca_samples", self.pca_samples.to_string());
        put("phase_samples", self.phase_samples.to_string());
        m
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{TargetKind, WeightKind};

    #[test]
    fn parses_keys_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# toy run\nschedule = vp\nbeta_max = 10 # lower\ntarget = x0\nweight = erd\n\
             iterations = 10\nbins = 0:0.5,0.5:1\npca_times = 0.1, 0.9\nplot = yes\n",
        )
        .unwrap();
        assert_eq!(cfg.train.schedule.kind, ScheduleKind::Vp);
        assert_eq!(cfg.train.schedule.beta_max, 10.0);
        assert_eq!(cfg.train.target, TargetKind::X0);
        assert_eq!(cfg.train.weight, WeightKind::Erd);
        assert_eq!(cfg.train.iterations, 10);
        assert_eq!(cfg.bins, vec![(0.0, 0.5), (0.5, 1.0)]);
        assert_eq!(cfg.pca_times, vec![0.1, 0.9]);
        assert!(cfg.plot);
    }

    #[test]
    fn defaults_follow_toy_setup() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg.train.iterations, 2000);
        assert_eq!(cfg.train.batch, 512);
        assert_eq!(cfg.train.lr, 1e-3);
        assert_eq!(cfg.t_grid_size, 101);
        assert_eq!(cfg.bins.len(), 5);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "target = z",
            "schedule = cosine",
            "unknown_key = 1",
            "just words",
            "iterations = -3",
            "t_grid_size = 1",
            "pca_times = 0.1, 1.5",
            "t_lo = 0.5\nt_hi = 0.2",
            "schedule = vp\nbeta_min = 0",
            "bins = 0",
            "bins = 0:0.5,0.6:1",
        ] {
            assert!(
                matches!(ExperimentConfig::parse(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn snapshot_round_trips() {
        let cfg = ExperimentConfig::parse("target = u\nseed = 9\nbins = 3\n").unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
