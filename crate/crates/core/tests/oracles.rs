mod common;

use common::{Stream, CENTERS, SIGMA0};
use erdlab::mlp::Batch;
use erdlab::spectra::{self, BlockScalarization};
use erdlab::target::recoverability;
use erdlab::{Gmm, Mlp, MlpConfig, Schedule, ScheduleKind, TargetKind, WeightKind, WeightRule};
use ndarray::{Array2, ArrayView2};

fn schedules() -> [(Schedule, &'static str); 3] {
    [(Schedule::linear(), "linear"), (Schedule::vp(), "vp"), (Schedule::gvp(), "gvp")]
}

fn sample_xt(rng: &mut Stream, a: f64, s: f64) -> [f64; 2] {
    let c = CENTERS[rng.below(4)];
    [
        a * (c[0] + SIGMA0 * rng.normal()) + s * rng.normal(),
        a * (c[1] + SIGMA0 * rng.normal()) + s * rng.normal(),
    ]
}

#[test]
fn schedules_match_textbook_formulas() {
    for (sched, name) in schedules() {
        for i in 0..=200 {
            let t = i as f64 / 200.0;
            let (a, s) = sched.alpha_sigma(t).unwrap();
            let (ea, es) = common::alpha_sigma(name, t);
            assert!((a - ea).abs() <= 1e-12 && (s - es).abs() <= 1e-12, "{name} t={t}");
        }
    }
}

#[test]
fn predictor_matches_grid_quadrature() {
    let gmm = Gmm::default();
    let mut rng = Stream(11);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let (sched, name) = &schedules()[k % 3];
        let target = TargetKind::ALL[k % 4];
        let t = rng.range(0.05, 0.95);
        let (a, s) = common::alpha_sigma(name, t);
        let xt = sample_xt(&mut rng, a, s);
        let got = gmm.bayes_predictor(target, sched, t, &xt).unwrap();
        let want = common::quadrature_predictor(target.name(), a, s, xt);
        for j in 0..2 {
            worst = worst.max((got[j] - want[j]).abs());
        }
    }
    assert!(worst <= 1e-6, "max abs error {worst}");
}

#[test]
fn channel_means_reassemble_input() {
    let gmm = Gmm::default();
    let mut rng = Stream(12);
    for (sched, name) in schedules() {
        for _ in 0..200 {
            let t = rng.range(0.001, 0.999);
            let (a, s) = common::alpha_sigma(name, t);
            let xt = sample_xt(&mut rng, a, s);
            let (m, e) = gmm.channel_means(&sched, t, &xt).unwrap();
            for j in 0..2 {
                assert!((a * m[j] + s * e[j] - xt[j]).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn weight_normalizer_matches_simpson() {
    for (sched, name) in schedules() {
        for target in TargetKind::ALL {
            let omega = |t: f64| {
                let (a, s) = common::alpha_sigma(name, t);
                let (cx, ce) = common::coefficients(target.name(), a, s);
                ((cx * a).powi(2) + (ce * s).powi(2)).sqrt()
            };
            let mean = common::simpson(omega, 0.0, 1.0, 20_000);
            let rule = WeightRule::new(WeightKind::Erd, target, sched).unwrap();
            // The library normalizes with a 1025-point trapezoid rule.
            assert!(
                common::rel_err(rule.normalizer(), mean, 1e-12) < 1e-5,
                "{name}/{target}: {} vs {mean}",
                rule.normalizer()
            );
            for i in 0..=50 {
                let t = i as f64 / 50.0;
                let w = rule.weight(t).unwrap();
                assert!((w * rule.normalizer() - omega(t)).abs() <= 1e-12);
                let r = recoverability(target, &sched, t).unwrap();
                assert!((r - omega(t)).abs() <= 1e-12);
            }
        }
    }
}

fn small_config(hidden: usize, depth: usize) -> MlpConfig {
    MlpConfig {
        hidden_dim: hidden,
        depth,
        embed_dim: 8,
        ..MlpConfig::default()
    }
}

fn random_batch(rng: &mut Stream, n: usize) -> Batch {
    let x = Array2::from_shape_fn((n, 2), |_| 2.0 * rng.normal());
    let y = Array2::from_shape_fn((n, 2), |_| rng.normal());
    let t = (0..n).map(|_| rng.uniform()).collect();
    let w = (0..n).map(|_| rng.range(0.2, 2.0)).collect();
    Batch { x, t, y, w }
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = Stream(21);
    for (m, (hidden, depth)) in [(16, 1), (24, 2), (32, 3)].into_iter().enumerate() {
        let cfg = small_config(hidden, depth);
        let model = Mlp::init(cfg, 100 + m as u64).unwrap();
        let batch = random_batch(&mut rng, 7);
        let (_, grad) = model.loss_grad(&batch).unwrap();
        for _ in 0..60 {
            let i = rng.below(model.param_count());
            let fd = common::central_difference(model.params(), i, 1e-5, |p| {
                let probe = Mlp::from_params(cfg, 0, p.to_vec()).unwrap();
                probe.loss_grad(&batch).unwrap().0
            });
            let err = common::rel_err(grad[i], fd, 1e-6);
            assert!(err <= 1e-4, "model {m} param {i}: {} vs {fd}", grad[i]);
        }
    }
}

#[test]
fn jacobian_rows_match_central_differences() {
    let mut rng = Stream(22);
    let cfg = small_config(20, 2);
    let model = Mlp::init(cfg, 5).unwrap();
    let x = [rng.normal(), rng.normal()];
    let t = 0.37;
    let jac = model.param_jacobian(&x, t).unwrap();
    for r in 0..2 {
        for _ in 0..40 {
            let i = rng.below(model.param_count());
            let fd = common::central_difference(model.params(), i, 1e-5, |p| {
                Mlp::from_params(cfg, 0, p.to_vec()).unwrap().forward(&x, t).unwrap().0[r]
            });
            assert!(common::rel_err(jac[[r, i]], fd, 1e-6) <= 1e-4);
        }
    }
}

#[test]
fn readout_jacobian_factorizes_through_hidden_features() {
    let cfg = small_config(24, 3);
    let model = Mlp::init(cfg, 9).unwrap();
    let x = [0.4, -1.3];
    let t = 0.61;
    let jac = model.param_jacobian(&x, t).unwrap();
    let (_, hidden) = model.forward(&x, t).unwrap();
    let xv = ArrayView2::from_shape((1, 2), &x).unwrap();
    let cache = model.forward_batch(xv, &[t]).unwrap();
    let body = model.body_len();
    let w_out = model.readout_weights().to_owned();
    for r in 0..2 {
        // Readout weights: ∂f_r/∂W[k, r] = h_k, other output columns zero.
        for k in 0..cfg.hidden_dim {
            assert!((jac[[r, body + k * 2 + r]] - hidden[k]).abs() <= 1e-12);
            assert_eq!(jac[[r, body + k * 2 + (1 - r)]], 0.0);
        }
        // Body: ∇f_r = Σ_k W[k, r] ∇h_k.
        let d_hidden = Array2::from_shape_fn((1, cfg.hidden_dim), |(_, k)| w_out[[k, r]]);
        let via_hidden = model.vjp_hidden(&cache, d_hidden);
        for i in 0..body {
            assert!((via_hidden[i] - jac[[r, i]]).abs() <= 1e-10);
        }
    }
}

#[test]
fn gram_entries_are_jacobian_dot_products() {
    let cfg = small_config(16, 2);
    let model = Mlp::init(cfg, 3).unwrap();
    let points: Vec<(Vec<f64>, f64)> = vec![
        (vec![1.0, 2.0], 0.1),
        (vec![-0.5, 0.3], 0.5),
        (vec![2.2, -1.9], 0.9),
    ];
    let gram = spectra::ntk_gram(&model, &points, BlockScalarization::Trace, "m").unwrap();
    let jacs: Vec<Array2<f64>> = points
        .iter()
        .map(|(x, t)| model.param_jacobian(x, *t).unwrap())
        .collect();
    for i in 0..3 {
        for j in 0..3 {
            let mut tr = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    let want = common::dot(
                        jacs[i].row(a).as_slice().unwrap(),
                        jacs[j].row(b).as_slice().unwrap(),
                    );
                    let got = gram.block[[i * 2 + a, j * 2 + b]];
                    assert!(common::rel_err(got, want, 1e-12) <= 1e-12);
                    if a == b {
                        tr += want;
                    }
                }
            }
            assert!(common::rel_err(gram.scalar[[i, j]], tr / 2.0, 1e-12) <= 1e-12);
        }
    }
}

#[test]
fn eigensolver_reconstructs_and_agrees_with_power_iteration() {
    let mut rng = Stream(31);
    let n = 50;
    let base: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.normal()).collect()).collect();
    let m: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| base[i][j] + base[j][i]).collect())
        .collect();
    let a = Array2::from_shape_fn((n, n), |(i, j)| m[i][j]);
    let eig = spectra::sym_eig(a.view()).unwrap();
    let v = &eig.vectors;
    let d = Array2::from_diag(&ndarray::Array1::from(eig.values.clone()));
    let rec = v.dot(&d).dot(&v.t());
    let fro = |x: &Array2<f64>| x.iter().map(|y| y * y).sum::<f64>().sqrt();
    assert!(fro(&(&rec - &a)) / fro(&a) <= 1e-8);
    let dominant = eig
        .values
        .iter()
        .cloned()
        .max_by(|x, y| x.abs().total_cmp(&y.abs()))
        .unwrap();
    let pi = common::power_iteration(&m, 5000);
    assert!(common::rel_err(pi, dominant, 1e-12) < 1e-6, "{pi} vs {dominant}");
}

#[test]
fn pca_matches_direct_covariance() {
    let mut rng = Stream(41);
    let n = 300;
    let feats = Array2::from_shape_fn((n, 3), |(_, j)| rng.normal() * [3.0, 1.0, 0.2][j]);
    let basis = spectra::pca_fit(feats.view(), 2).unwrap();
    let mean: Vec<f64> = (0..3).map(|j| feats.column(j).sum() / n as f64).collect();
    for k in 0..2 {
        let c = basis.components.column(k);
        // Variance of the projection equals the eigenvalue.
        let var = (0..n)
            .map(|i| (0..3).map(|j| (feats[[i, j]] - mean[j]) * c[j]).sum::<f64>().powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        assert!(common::rel_err(var, basis.explained_variance[k], 1e-12) < 1e-10);
    }
    assert!(basis.explained_variance[0] >= basis.explained_variance[1]);
    assert!(basis.orthonormality_error() < 1e-12);
}

#[test]
fn coupling_cost_closed_form_is_reproduced() {
    let gmm = Gmm::default();
    assert!((gmm.second_moment() - 8.18).abs() < 1e-12);
    for kind in ScheduleKind::ALL {
        let sched = Schedule::new(kind);
        let cost = gmm.w2_coupling_cost(&sched, 0.3, 50_000, 4).unwrap();
        let (a, s) = common::alpha_sigma(kind.name(), 0.3);
        let smax = common::alpha_sigma(kind.name(), 1.0).1;
        let want = a * a * 8.18 + (s - smax).powi(2) * 2.0;
        assert!((cost.analytic - want).abs() < 1e-12);
        assert!(common::rel_err(cost.empirical, want, 1e-12) < 0.02);
    }
}

#[test]
fn chunked_gram_equals_direct_product() {
    let cfg = small_config(12, 2);
    let model = Mlp::init(cfg, 8).unwrap();
    let mut rng = Stream(51);
    let points: Vec<(Vec<f64>, f64)> = (0..150)
        .map(|_| (vec![rng.normal(), rng.normal()], rng.uniform()))
        .collect();
    let gram = spectra::ntk_gram(&model, &points, BlockScalarization::Trace, "m").unwrap();
    let jac = model.param_jacobians(&points).unwrap();
    let direct = jac.dot(&jac.t());
    let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = (&gram.block - &direct).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(diff <= 1e-12 * scale, "{diff}");
    assert!(gram.check().unwrap().symmetric());
}

#[test]
fn eigenpairs_have_small_residuals_and_preserve_trace() {
    let cfg = small_config(16, 2);
    let model = Mlp::init(cfg, 4).unwrap();
    let mut rng = Stream(61);
    let points: Vec<(Vec<f64>, f64)> = (0..20)
        .map(|_| (vec![rng.normal(), rng.normal()], rng.uniform()))
        .collect();
    let gram = spectra::ntk_gram(&model, &points, BlockScalarization::Trace, "m").unwrap();
    let a = &gram.block;
    let eig = spectra::sym_eig(a.view()).unwrap();
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (i, &l) in eig.values.iter().enumerate() {
        let v = eig.vectors.column(i);
        let r = a.dot(&v) - &v.mapv(|x| x * l);
        assert!(r.dot(&r).sqrt() <= 1e-8 * norm);
    }
    let trace: f64 = a.diag().sum();
    let total: f64 = eig.values.iter().sum();
    assert!(common::rel_err(total, trace, 1e-12) <= 1e-8);
    let top = spectra::ntk_spectrum(&gram, 3).unwrap();
    let rows: Vec<Vec<f64>> = a.rows().into_iter().map(|r| r.to_vec()).collect();
    assert!(common::rel_err(common::power_iteration(&rows, 3000), top[0], 1e-12) <= 1e-6);
}

#[test]
fn full_rank_pca_reconstructs_the_fitted_set() {
    let mut rng = Stream(71);
    let f = Array2::from_shape_fn((40, 4), |(_, j)| rng.normal() * (j + 1) as f64);
    let basis = spectra::pca_fit(f.view(), 4).unwrap();
    let proj = spectra::pca_project(&basis, f.view()).unwrap();
    let back = proj.dot(&basis.components.t()) + &basis.mean;
    let err = (&back - &f).iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(err <= 1e-8 * scale);
    // Distances within the span are preserved.
    let d_proj = (&proj.row(0) - &proj.row(1)).mapv(|v| v * v).sum().sqrt();
    let d_orig = (&f.row(0) - &f.row(1)).mapv(|v| v * v).sum().sqrt();
    assert!(common::rel_err(d_proj, d_orig, 1e-12) < 1e-10);
}
