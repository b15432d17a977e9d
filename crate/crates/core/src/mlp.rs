//! Time-conditioned MLP: `[x_t, embed(t)] → SiLU hidden layers → linear readout`.
//!
//! Parameters live in one flat `Vec<f64>`; layer `l` owns a row-major
//! `fan_in × fan_out` weight block followed by its bias. The readout layer is
//! last, so `params[..body_len()]` are the feature-extractor parameters.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub dim: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub depth: usize,
    pub freq_base: f64,
    pub time_scale: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            dim: 2,
            embed_dim: 64,
            hidden_dim: 256,
            depth: 3,
            freq_base: 10_000.0,
            time_scale: 1000.0,
        }
    }
}

impl MlpConfig {
    pub fn in_dim(&self) -> usize {
        self.dim + self.embed_dim
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.hidden_dim == 0 || self.depth == 0 {
            return Err(Error::Domain(format!("MLP dimensions must be positive: {self:?}")));
        }
        if self.embed_dim == 0 || self.embed_dim % 2 != 0 {
            return Err(Error::Domain(format!(
                "embedding dimension must be a positive even number, got {}",
                self.embed_dim
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` per layer, readout last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.in_dim(), self.hidden_dim)];
        shapes.extend((1..self.depth).map(|_| (self.hidden_dim, self.hidden_dim)));
        shapes.push((self.hidden_dim, self.dim));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Sinusoidal embedding: pairs `[sin(ω_i·t·scale), cos(ω_i·t·scale)]` with
/// `ω_i = base^(−i/half)`.
pub fn time_embed_with(t: f64, embed_dim: usize, freq_base: f64, time_scale: f64) -> Vec<f64> {
    let half = embed_dim / 2;
    let mut out = Vec::with_capacity(embed_dim);
    for i in 0..half {
        let w = freq_base.powf(-(i as f64) / half as f64);
        let (s, c) = (w * t * time_scale).sin_cos();
        out.push(s);
        out.push(c);
    }
    out
}

/// Default 64-dimensional embedding.
pub fn time_embed(t: f64) -> Vec<f64> {
    let c = MlpConfig::default();
    time_embed_with(t, c.embed_dim, c.freq_base, c.time_scale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    seed: u64,
    params: Vec<f64>,
    slots: Vec<Slot>,
}

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the network input, `acts[l]` the output of hidden layer `l`.
    acts: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl ForwardCache {
    /// Last hidden activation, the representation fed to the readout.
    pub fn hidden(&self) -> &Array2<f64> {
        self.acts.last().expect("at least one hidden layer")
    }
}

/// A weighted regression batch; rows of `x` and `y` are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Array2<f64>,
    pub t: Vec<f64>,
    pub y: Array2<f64>,
    pub w: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

impl Mlp {
    fn with_params(config: MlpConfig, seed: u64, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let mut slots = Vec::new();
        let mut off = 0;
        for (fan_in, fan_out) in config.layer_shapes() {
            slots.push(Slot {
                w: off,
                b: off + fan_in * fan_out,
                fan_in,
                fan_out,
            });
            off += fan_in * fan_out + fan_out;
        }
        if params.len() != off {
            return Err(Error::Contract(format!(
                "parameter vector has length {} but the architecture needs {off}",
                params.len()
            )));
        }
        Ok(Mlp {
            config,
            seed,
            params,
            slots,
        })
    }

    /// Kaiming-normal weights (`N(0, 2/fan_in)`), zero biases.
    pub fn init(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::derived(seed, tag::INIT, 0);
        let mut params = Vec::with_capacity(config.param_count());
        for (fan_in, fan_out) in config.layer_shapes() {
            let std = (2.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let z: f64 = rng.sample(StandardNormal);
                params.push(std * z);
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self::with_params(config, seed, params)
    }

    /// All-zero parameters.
    pub fn zeros(config: MlpConfig) -> Result<Self> {
        Self::with_params(config, 0, vec![0.0; config.param_count()])
    }

    pub fn from_params(config: MlpConfig, seed: u64, params: Vec<f64>) -> Result<Self> {
        Self::with_params(config, seed, params)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Number of non-readout parameters.
    pub fn body_len(&self) -> usize {
        self.slots.last().expect("readout slot").w
    }

    /// Readout weight block, row-major `hidden_dim × dim`.
    pub fn readout_weights(&self) -> ArrayView2<'_, f64> {
        self.weight(self.slots.len() - 1)
    }

    pub fn readout_weights_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        let s = *self.slots.last().expect("readout slot");
        ArrayViewMut2::from_shape((s.fan_in, s.fan_out), &mut self.params[s.w..s.b])
            .expect("slot shape")
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn weight(&self, l: usize) -> ArrayView2<'_, f64> {
        let s = self.slots[l];
        ArrayView2::from_shape((s.fan_in, s.fan_out), &self.params[s.w..s.b]).expect("slot shape")
    }

    fn bias(&self, l: usize) -> &[f64] {
        let s = self.slots[l];
        &self.params[s.b..s.b + s.fan_out]
    }

    /// Stacks `[x_t, embed(t)]` rows.
    pub fn inputs(&self, x: ArrayView2<'_, f64>, t: &[f64]) -> Result<Array2<f64>> {
        let c = &self.config;
        if x.ncols() != c.dim || x.nrows() != t.len() {
            return Err(Error::Contract(format!(
                "inputs: x is {}x{}, t has {} entries, model dim is {}",
                x.nrows(),
                x.ncols(),
                t.len(),
                c.dim
            )));
        }
        if x.iter().chain(t).any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite network input".into()));
        }
        let mut inp = Array2::zeros((x.nrows(), c.in_dim()));
        inp.slice_mut(s![.., ..c.dim]).assign(&x);
        for (i, &ti) in t.iter().enumerate() {
            let e = time_embed_with(ti, c.embed_dim, c.freq_base, c.time_scale);
            for (j, v) in e.into_iter().enumerate() {
                inp[[i, c.dim + j]] = v;
            }
        }
        Ok(inp)
    }

    pub fn forward_batch(&self, x: ArrayView2<'_, f64>, t: &[f64]) -> Result<ForwardCache> {
        let input = self.inputs(x, t)?;
        Ok(self.forward_inputs(input))
    }

    fn forward_inputs(&self, input: Array2<f64>) -> ForwardCache {
        let depth = self.config.depth;
        let mut acts = Vec::with_capacity(depth + 1);
        let mut pre = Vec::with_capacity(depth);
        acts.push(input);
        for l in 0..depth {
            let mut z = acts[l].dot(&self.weight(l));
            for mut row in z.rows_mut() {
                row.iter_mut().zip(self.bias(l)).for_each(|(v, b)| *v += b);
            }
            acts.push(z.mapv(silu));
            pre.push(z);
        }
        let mut output = acts[depth].dot(&self.weight(depth));
        for mut row in output.rows_mut() {
            row.iter_mut().zip(self.bias(depth)).for_each(|(v, b)| *v += b);
        }
        ForwardCache { acts, pre, output }
    }

    /// Single-point forward returning `(output, hidden)`.
    pub fn forward(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let xv = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::Contract(e.to_string()))?;
        let cache = self.forward_batch(xv, &[t])?;
        Ok((cache.output.row(0).to_vec(), cache.hidden().row(0).to_vec()))
    }

    /// Reverse accumulation from `delta = ∂L/∂z_top` (pre-activation of layer
    /// `top`) down to the input layer, adding parameter gradients into `grad`.
    fn backprop(&self, cache: &ForwardCache, mut delta: Array2<f64>, top: usize, grad: &mut [f64]) {
        for l in (0..=top).rev() {
            let s = self.slots[l];
            {
                let mut gw = ArrayViewMut2::from_shape((s.fan_in, s.fan_out), &mut grad[s.w..s.b])
                    .expect("slot shape");
                general_mat_mul(1.0, &cache.acts[l].t(), &delta, 1.0, &mut gw);
            }
            let gb = delta.sum_axis(Axis(0));
            grad[s.b..s.b + s.fan_out]
                .iter_mut()
                .zip(gb.iter())
                .for_each(|(g, v)| *g += v);
            if l > 0 {
                let mut d_act = delta.dot(&self.weight(l).t());
                d_act.zip_mut_with(&cache.pre[l - 1], |d, &z| *d *= silu_grad(z));
                delta = d_act;
            }
        }
    }

    /// Gradient of `Σ_i ⟨d_out_i, f(x_i)⟩` with respect to all parameters.
    pub fn backward(&self, cache: &ForwardCache, d_out: Array2<f64>) -> Vec<f64> {
        let mut grad = vec![0.0; self.param_count()];
        self.backprop(cache, d_out, self.config.depth, &mut grad);
        grad
    }

    /// Gradient of `Σ_i ⟨d_hidden_i, h(x_i)⟩` with respect to the body
    /// parameters (readout entries stay zero).
    pub fn vjp_hidden(&self, cache: &ForwardCache, d_hidden: Array2<f64>) -> Vec<f64> {
        let depth = self.config.depth;
        let mut delta = d_hidden;
        delta.zip_mut_with(&cache.pre[depth - 1], |d, &z| *d *= silu_grad(z));
        let mut grad = vec![0.0; self.param_count()];
        self.backprop(cache, delta, depth - 1, &mut grad);
        grad
    }

    /// Mean weighted half-squared error and its exact gradient.
    pub fn loss_grad(&self, batch: &Batch) -> Result<(f64, Vec<f64>)> {
        let n = batch.x.nrows();
        if n == 0 {
            return Err(Error::Contract("loss_grad: empty batch".into()));
        }
        if batch.y.dim() != batch.x.dim() || batch.w.len() != n {
            return Err(Error::Contract(format!(
                "loss_grad: x {:?}, y {:?}, {} weights",
                batch.x.dim(),
                batch.y.dim(),
                batch.w.len()
            )));
        }
        let cache = self.forward_batch(batch.x.view(), &batch.t)?;
        let mut resid = &cache.output - &batch.y;
        let mut loss = 0.0;
        for (mut row, &w) in resid.rows_mut().into_iter().zip(&batch.w) {
            loss += 0.5 * w * row.iter().map(|r| r * r).sum::<f64>();
            row.mapv_inplace(|r| r * w / n as f64);
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return Err(Error::Domain(format!("non-finite loss {loss}")));
        }
        Ok((loss, self.backward(&cache, resid)))
    }

    /// `dim × P` Jacobian of the output at one input, one reverse pass per row.
    pub fn param_jacobian(&self, x: &[f64], t: f64) -> Result<Array2<f64>> {
        let xv = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::Contract(e.to_string()))?;
        let cache = self.forward_batch(xv, &[t])?;
        let d = self.config.dim;
        let mut jac = Array2::zeros((d, self.param_count()));
        for r in 0..d {
            let mut e = Array2::zeros((1, d));
            e[[0, r]] = 1.0;
            let row = self.backward(&cache, e);
            jac.row_mut(r).assign(&ndarray::ArrayView1::from(&row));
        }
        Ok(jac)
    }

    /// Stacked Jacobians for many points: row `i·dim + r` is `∇θ f(x_i, t_i)[r]`.
    pub fn param_jacobians(&self, points: &[(Vec<f64>, f64)]) -> Result<Array2<f64>> {
        let d = self.config.dim;
        let blocks: Vec<Array2<f64>> = points
            .par_iter()
            .map(|(x, t)| self.param_jacobian(x, *t))
            .collect::<Result<_>>()?;
        let mut jac = Array2::zeros((points.len() * d, self.param_count()));
        for (i, b) in blocks.iter().enumerate() {
            jac.slice_mut(s![i * d..(i + 1) * d, ..]).assign(b);
        }
        Ok(jac)
    }

    /// Plain gradient step helper for tests and simple optimizers.
    pub fn apply_update(&mut self, delta: &[f64]) {
        self.params.iter_mut().zip(delta).for_each(|(p, d)| *p += d);
    }
}

// Checkpoint layout (all little-endian):
//   magic "ERDLABCK" | version u32 | activation u32 (1 = SiLU)
//   dim u32 | embed_dim u32 | hidden_dim u32 | depth u32
//   freq_base f64 | time_scale f64 | seed u64 | param_count u64
//   params f64 × param_count
const MAGIC: &[u8; 8] = b"ERDLABCK";
const VERSION: u32 = 1;
const ACTIVATION_SILU: u32 = 1;

impl Mlp {
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let c = &self.config;
        w.write_all(MAGIC)?;
        for v in [
            VERSION,
            ACTIVATION_SILU,
            c.dim as u32,
            c.embed_dim as u32,
            c.hidden_dim as u32,
            c.depth as u32,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&c.freq_base.to_le_bytes())?;
        w.write_all(&c.time_scale.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.params.len() * 8);
        for p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> std::result::Result<Self, String> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| e.to_string())?;
        if &magic != MAGIC {
            return Err("bad magic".into());
        }
        let mut u32s = [0u32; 6];
        for v in u32s.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|e| e.to_string())?;
            *v = u32::from_le_bytes(b);
        }
        let [version, act, dim, embed_dim, hidden_dim, depth] = u32s;
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        if act != ACTIVATION_SILU {
            return Err(format!("unknown activation tag {act}"));
        }
        let mut b8 = [0u8; 8];
        let mut next8 = |r: &mut R| -> std::result::Result<[u8; 8], String> {
            r.read_exact(&mut b8).map_err(|e| e.to_string())?;
            Ok(b8)
        };
        let freq_base = f64::from_le_bytes(next8(&mut r)?);
        let time_scale = f64::from_le_bytes(next8(&mut r)?);
        let seed = u64::from_le_bytes(next8(&mut r)?);
        let count = u64::from_le_bytes(next8(&mut r)?) as usize;
        let config = MlpConfig {
            dim: dim as usize,
            embed_dim: embed_dim as usize,
            hidden_dim: hidden_dim as usize,
            depth: depth as usize,
            freq_base,
            time_scale,
        };
        if config.validate().is_err() || config.param_count() != count {
            return Err(format!("header inconsistent: {config:?}, {count} params"));
        }
        let mut raw = vec![0u8; count * 8];
        r.read_exact(&mut raw).map_err(|e| e.to_string())?;
        let params = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| e.to_string())?;
        if !rest.is_empty() {
            return Err(format!("{} trailing bytes", rest.len()));
        }
        Self::with_params(config, seed, params).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_checkpoint(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingCheckpoint(path.to_path_buf()));
        }
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(std::io::BufReader::new(f)).map_err(|detail| Error::BadCheckpoint {
            path: path.to_path_buf(),
            detail,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MlpConfig {
        MlpConfig {
            embed_dim: 8,
            hidden_dim: 16,
            ..MlpConfig::default()
        }
    }

    #[test]
    fn param_count_matches_shapes() {
        let p = MlpConfig::default().param_count();
        assert_eq!(p, 66 * 256 + 256 + 2 * (256 * 256 + 256) + 256 * 2 + 2);
        let m = Mlp::init(MlpConfig::default(), 1).unwrap();
        assert_eq!(m.param_count(), p);
        assert_eq!(m.body_len(), p - (256 * 2 + 2));
    }

    #[test]
    fn init_is_deterministic() {
        let a = Mlp::init(small(), 42).unwrap();
        let b = Mlp::init(small(), 42).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), Mlp::init(small(), 43).unwrap().params());
        assert!(a.all_finite());
    }

    #[test]
    fn first_layer_variance() {
        let m = Mlp::init(MlpConfig::default(), 3).unwrap();
        let w = &m.params()[..66 * 256];
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        assert!((var / (2.0 / 66.0) - 1.0).abs() < 0.1, "var {var}");
        assert!(m.params()[66 * 256..66 * 256 + 256].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn embedding_properties() {
        let e0 = time_embed(0.0);
        assert_eq!(e0.len(), 64);
        for pair in e0.chunks(2) {
            assert_eq!(pair, [0.0, 1.0]);
        }
        for t in [0.0, 0.13, 0.5, 1.0] {
            let n2: f64 = time_embed(t).iter().map(|v| v * v).sum();
            assert!((n2 - 32.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = Mlp::zeros(small()).unwrap();
        let (out, _) = m.forward(&[1.5, -3.0], 0.4).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = Mlp::init(small(), 1).unwrap();
        assert!(matches!(m.forward(&[f64::NAN, 0.0], 0.5), Err(Error::Contract(_))));
        assert!(m.forward(&[0.0, 0.0], f64::INFINITY).is_err());
        assert!(m.forward(&[0.0], 0.5).is_err());
    }

    #[test]
    fn doubling_readout_doubles_output() {
        let m = Mlp::init(small(), 8).unwrap();
        let mut m2 = m.clone();
        m2.readout_weights_mut().mapv_inplace(|w| 2.0 * w);
        let (o1, h1) = m.forward(&[0.3, 0.7], 0.2).unwrap();
        let (o2, h2) = m2.forward(&[0.3, 0.7], 0.2).unwrap();
        assert_eq!(h1, h2);
        for (a, b) in o1.iter().zip(&o2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_grad() {
        let m = Mlp::init(small(), 2).unwrap();
        let x = Array2::from_shape_vec((3, 2), vec![0.1, 0.2, -1.0, 0.5, 2.0, 2.0]).unwrap();
        let t = vec![0.1, 0.5, 0.9];
        let y = m.forward_batch(x.view(), &t).unwrap().output;
        let (loss, grad) = m
            .loss_grad(&Batch {
                x,
                t,
                y,
                w: vec![1.0; 3],
            })
            .unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn loss_grad_rejects_bad_batches() {
        let m = Mlp::init(small(), 2).unwrap();
        let empty = Batch {
            x: Array2::zeros((0, 2)),
            t: vec![],
            y: Array2::zeros((0, 2)),
            w: vec![],
        };
        assert!(m.loss_grad(&empty).is_err());
        let ragged = Batch {
            x: Array2::zeros((2, 2)),
            t: vec![0.1, 0.2],
            y: Array2::zeros((2, 2)),
            w: vec![1.0],
        };
        assert!(m.loss_grad(&ragged).is_err());
    }

    #[test]
    fn weight_scaling_is_linear() {
        let m = Mlp::init(small(), 4).unwrap();
        let x = Array2::from_shape_vec((2, 2), vec![0.1, 0.2, -1.0, 0.5]).unwrap();
        let y = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b1 = Batch {
            x: x.clone(),
            t: vec![0.2, 0.6],
            y: y.clone(),
            w: vec![0.5, 2.0],
        };
        let b3 = Batch {
            w: vec![1.5, 6.0],
            ..b1.clone()
        };
        let (l1, g1) = m.loss_grad(&b1).unwrap();
        let (l3, g3) = m.loss_grad(&b3).unwrap();
        assert!((l3 - 3.0 * l1).abs() <= 1e-15 * l3.abs());
        for (a, b) in g1.iter().zip(&g3) {
            assert!((b - 3.0 * a).abs() <= 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn jacobian_diagonal_is_row_norm() {
        let m = Mlp::init(small(), 6).unwrap();
        let j = m.param_jacobian(&[0.4, -0.2], 0.3).unwrap();
        let stacked = m.param_jacobians(&[(vec![0.4, -0.2], 0.3)]).unwrap();
        assert_eq!(j, stacked);
        let gram = j.dot(&j.t());
        for r in 0..2 {
            let nr: f64 = j.row(r).iter().map(|v| v * v).sum();
            assert!((gram[[r, r]] - nr).abs() < 1e-12 * nr);
        }
    }

    #[test]
    fn checkpoint_roundtrip_and_corruption() {
        let m = Mlp::init(small(), 77).unwrap();
        let mut bytes = Vec::new();
        m.write_checkpoint(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 6 * 4 + 4 * 8 + m.param_count() * 8);
        let back = Mlp::read_checkpoint(&bytes[..]).unwrap();
        assert_eq!(back, m);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Mlp::read_checkpoint(&bad[..]).is_err());
        assert!(Mlp::read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(Mlp::read_checkpoint(&long[..]).is_err());
    }

    #[test]
    fn missing_checkpoint_error() {
        let err = Mlp::load(Path::new("/nonexistent/model.ckpt")).unwrap_err();
        assert!(matches!(err, Error::MissingCheckpoint(_)));
    }
}
