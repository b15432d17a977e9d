//! Symmetric eigensolver, empirical NTK Gram matrices and their spectra,
//! entropy effective rank, normalized heatmaps, and PCA.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mlp::Mlp;

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_REL_TOL: f64 = 1e-12;
pub const EIGEN_FLOOR: f64 = 1e-12;
const GRAM_CHUNK: usize = 64;

/// Eigenpairs sorted by descending eigenvalue; column `i` of `vectors`
/// pairs with `values[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

/// Cyclic Jacobi rotations on the symmetrized input.
pub fn sym_eig(matrix: ArrayView2<'_, f64>) -> Result<SymEig> {
    let (n, m) = matrix.dim();
    if n != m {
        return Err(Error::Contract(format!("sym_eig: matrix is {n}x{m}, not square")));
    }
    let mut a: Vec<f64> = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (matrix[[i, j]] + matrix[[j, i]]);
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("sym_eig: non-finite entry".into()));
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_REL_TOL * norm;
    let off_norm = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= threshold;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        converged = off_norm(&a) <= threshold;
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps,
            off: off_norm(&a),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, col]] = v[k * n + src];
        }
    }
    Ok(SymEig { values, vectors })
}

/// How a `d × d` kernel block becomes one heatmap scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum BlockScalarization {
    /// `trace(Θ_ij) / d`
    #[default]
    Trace,
    /// `‖Θ_ij‖_F`
    Frobenius,
}

/// Empirical NTK over `n` points: the `(n·d) × (n·d)` block matrix
/// `Θ = J Jᵀ` and its `n × n` scalarization.
#[derive(Debug, Clone)]
pub struct NtkGram {
    pub block: Array2<f64>,
    pub scalar: Array2<f64>,
    pub dim: usize,
    pub points: Vec<(Vec<f64>, f64)>,
    pub checkpoint: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GramCheck {
    /// `max |Θ − Θᵀ| / max |Θ|`
    pub asymmetry: f64,
    /// `min eigenvalue / max eigenvalue`
    pub min_eig_ratio: f64,
}

impl GramCheck {
    pub fn symmetric(&self) -> bool {
        self.asymmetry <= 1e-10
    }

    pub fn psd(&self) -> bool {
        self.min_eig_ratio >= -1e-8
    }
}

pub fn ntk_gram(
    model: &Mlp,
    points: &[(Vec<f64>, f64)],
    scalarization: BlockScalarization,
    checkpoint: impl Into<String>,
) -> Result<NtkGram> {
    if points.is_empty() {
        return Err(Error::Contract("ntk_gram: no points".into()));
    }
    let d = model.config().dim;
    let n = points.len();
    let chunks: Vec<(usize, &[(Vec<f64>, f64)])> = points
        .chunks(GRAM_CHUNK)
        .enumerate()
        .map(|(c, p)| (c * GRAM_CHUNK, p))
        .collect();
    // Jacobians are recomputed per chunk pair so at most two chunks are live.
    let mut block = Array2::zeros((n * d, n * d));
    for (a, &(ia, pa)) in chunks.iter().enumerate() {
        let ja = model.param_jacobians(pa)?;
        for &(ib, pb) in &chunks[a..] {
            let g = if ia == ib {
                let g = ja.dot(&ja.t());
                (&g + &g.t()) * 0.5
            } else {
                ja.dot(&model.param_jacobians(pb)?.t())
            };
            let (ra, rb) = (ia * d..(ia + pa.len()) * d, ib * d..(ib + pb.len()) * d);
            block.slice_mut(ndarray::s![ra.clone(), rb.clone()]).assign(&g);
            block.slice_mut(ndarray::s![rb, ra]).assign(&g.t());
        }
    }
    Ok(gram_from_block(block, d, points.to_vec(), scalarization, checkpoint.into()))
}

fn gram_from_block(
    block: Array2<f64>,
    dim: usize,
    points: Vec<(Vec<f64>, f64)>,
    scalarization: BlockScalarization,
    checkpoint: String,
) -> NtkGram {
    let n = points.len();
    let mut scalar = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let blk = block.slice(ndarray::s![i * dim..(i + 1) * dim, j * dim..(j + 1) * dim]);
            scalar[[i, j]] = match scalarization {
                BlockScalarization::Trace => blk.diag().sum() / dim as f64,
                BlockScalarization::Frobenius => blk.iter().map(|v| v * v).sum::<f64>().sqrt(),
            };
        }
    }
    NtkGram {
        block,
        scalar,
        dim,
        points,
        checkpoint,
    }
}

impl NtkGram {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// All eigenvalues of the block matrix, descending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(sym_eig(self.block.view())?.values)
    }

    pub fn check(&self) -> Result<GramCheck> {
        let scale = self.block.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut asym = 0.0f64;
        let n = self.block.nrows();
        for i in 0..n {
            for j in i + 1..n {
                asym = asym.max((self.block[[i, j]] - self.block[[j, i]]).abs());
            }
        }
        let eig = self.eigenvalues()?;
        let max = eig.first().copied().unwrap_or(0.0);
        let min = eig.last().copied().unwrap_or(0.0);
        Ok(GramCheck {
            asymmetry: if scale > 0.0 { asym / scale } else { 0.0 },
            min_eig_ratio: if max > 0.0 { min / max } else { 0.0 },
        })
    }
}

/// Top-`k` eigenvalues of the block matrix.
pub fn ntk_spectrum(gram: &NtkGram, k: usize) -> Result<Vec<f64>> {
    let size = gram.block.nrows();
    if k > size {
        return Err(Error::Contract(format!("ntk_spectrum: k = {k} exceeds {size}")));
    }
    let mut values = gram.eigenvalues()?;
    values.truncate(k);
    Ok(values)
}

/// `exp(H(p))` with `p_i = λ_i / Σλ` over eigenvalues at or above the floor.
pub fn effective_rank(eigenvalues: &[f64]) -> Result<f64> {
    let kept: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .filter(|&l| l >= EIGEN_FLOOR)
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateSpectrum { floor: EIGEN_FLOOR });
    }
    let total: f64 = kept.iter().sum();
    let entropy: f64 = kept
        .iter()
        .map(|l| {
            let p = l / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp())
}

/// `H_ij = k_ij / sqrt(k_ii k_jj)` on the scalarized kernel.
pub fn normalized_heatmap(gram: &NtkGram) -> Result<Array2<f64>> {
    let k = &gram.scalar;
    let n = k.nrows();
    let diag: Vec<f64> = (0..n).map(|i| k[[i, i]]).collect();
    if let Some((index, &value)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::DegenerateKernel { index, value });
    }
    let mut h = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            h[[i, j]] = if i == j {
                1.0
            } else {
                k[[i, j]] / (diag[i] * diag[j]).sqrt()
            };
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub mean: Array1<f64>,
    /// `dim × k`, orthonormal columns.
    pub components: Array2<f64>,
    pub explained_variance: Vec<f64>,
}

impl PcaBasis {
    /// `max |CᵀC − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.components.t().dot(&self.components);
        let mut err = 0.0f64;
        for ((i, j), v) in g.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((v - target).abs());
        }
        err
    }
}

/// Top-`k` principal components of the rows of `features`.
pub fn pca_fit(features: ArrayView2<'_, f64>, k: usize) -> Result<PcaBasis> {
    let (n, dim) = features.dim();
    if k == 0 || k > dim {
        return Err(Error::Contract(format!("pca_fit: k = {k} not in 1..={dim}")));
    }
    if n <= k {
        return Err(Error::Contract(format!(
            "pca_fit: need more than k = {k} samples, got {n}"
        )));
    }
    let mean = features.mean_axis(Axis(0)).expect("non-empty");
    let centered = &features - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let eig = sym_eig(cov.view())?;
    let components = eig.vectors.slice(ndarray::s![.., ..k]).to_owned();
    Ok(PcaBasis {
        mean,
        components,
        explained_variance: eig.values[..k].to_vec(),
    })
}

/// `(f − mean) · components` for each row.
pub fn pca_project(basis: &PcaBasis, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if features.ncols() != basis.mean.len() {
        return Err(Error::Contract(format!(
            "pca_project: features have {} columns, basis expects {}",
            features.ncols(),
            basis.mean.len()
        )));
    }
    Ok((&features - &basis.mean).dot(&basis.components))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::MlpConfig;
    use ndarray::array;

    #[test]
    fn identity_and_diagonal() {
        let e = sym_eig(Array2::<f64>::eye(5).view()).unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
        let d = sym_eig(Array2::from_diag(&array![3.0, 1.0, 2.0]).view()).unwrap();
        assert_eq!(d.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(d.vectors.column(0).to_vec(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(
            sym_eig(Array2::<f64>::zeros((2, 3)).view()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let e = sym_eig(a.view()).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn effective_rank_examples() {
        assert!((effective_rank(&[2.0; 7]).unwrap() - 7.0).abs() < 1e-12);
        assert!((effective_rank(&[5.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let h: f64 = -(0.5f64 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        assert!((effective_rank(&[2.0, 1.0, 1.0]).unwrap() - h.exp()).abs() < 1e-12);
        assert!((effective_rank(&[2.0, 1.0, 1.0]).unwrap() - 2.828).abs() < 1e-3);
        assert!(matches!(
            effective_rank(&[0.0, -1e-9, 1e-13]),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    fn small_model() -> Mlp {
        Mlp::init(
            MlpConfig {
                embed_dim: 8,
                hidden_dim: 16,
                ..MlpConfig::default()
            },
            3,
        )
        .unwrap()
    }

    #[test]
    fn single_point_gram() {
        let m = small_model();
        let g = ntk_gram(&m, &[(vec![0.5, -1.0], 0.3)], BlockScalarization::Trace, "test").unwrap();
        assert_eq!(g.block.dim(), (2, 2));
        assert_eq!(g.block[[0, 1]], g.block[[1, 0]]);
        let eig = g.eigenvalues().unwrap();
        assert!(eig[1] >= -1e-8 * eig[0]);
        assert!(ntk_spectrum(&g, 3).is_err());
    }

    #[test]
    fn duplicated_points_homogeneous() {
        let m = small_model();
        let p = (vec![0.2, 0.1], 0.6);
        let g = ntk_gram(&m, &[p.clone(), p], BlockScalarization::Trace, "dup").unwrap();
        let s = &g.scalar;
        assert!(s.iter().all(|&v| (v - s[[0, 0]]).abs() <= 1e-12 * s[[0, 0]]));
        let h = normalized_heatmap(&g).unwrap();
        assert!(h.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn frobenius_scalarization() {
        let m = small_model();
        let g = ntk_gram(&m, &[(vec![0.2, 0.1], 0.6)], BlockScalarization::Frobenius, "f").unwrap();
        let fro = g.block.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((g.scalar[[0, 0]] - fro).abs() < 1e-12 * fro);
    }

    #[test]
    fn zero_kernel_is_degenerate() {
        let m = Mlp::zeros(MlpConfig {
            embed_dim: 8,
            hidden_dim: 16,
            ..MlpConfig::default()
        })
        .unwrap();
        // zero weights still give bias gradients on the readout, so build a
        // degenerate kernel by hand
        let mut g = ntk_gram(&m, &[(vec![0.0, 0.0], 0.1)], BlockScalarization::Trace, "z").unwrap();
        g.scalar[[0, 0]] = 0.0;
        assert!(matches!(normalized_heatmap(&g), Err(Error::DegenerateKernel { index: 0, .. })));
    }

    #[test]
    fn pca_line_and_errors() {
        let pts: Vec<f64> = (0..20).flat_map(|i| {
            let s = i as f64 - 9.5;
            [s, 2.0 * s, -s]
        }).collect();
        let f = Array2::from_shape_vec((20, 3), pts).unwrap();
        let b = pca_fit(f.view(), 2).unwrap();
        let total: f64 = b.explained_variance.iter().sum();
        assert!(b.explained_variance[0] / total > 1.0 - 1e-12);
        assert!(b.orthonormality_error() < 1e-10);
        let mean_proj = pca_project(&b, b.mean.view().insert_axis(Axis(0))).unwrap();
        assert!(mean_proj.iter().all(|v| v.abs() < 1e-15));
        assert!(pca_fit(f.view(), 4).is_err());
        assert!(pca_fit(f.slice(ndarray::s![..2, ..]), 2).is_err());
        assert!(pca_project(&b, Array2::zeros((1, 2)).view()).is_err());
    }
}
