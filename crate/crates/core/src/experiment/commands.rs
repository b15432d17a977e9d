//! Subcommand implementations. Each writes its reports under `out_dir` and
//! records them in the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, Axis};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{num, write_file, RunManifest, Table};
use super::plot::{self, Series};
use crate::error::{Error, Result};
use crate::gmm::Gmm;
use crate::mlp::Mlp;
use crate::rng::{self, tag};
use crate::schedule::uniform_grid;
use crate::spectra::{self, GramCheck, NtkGram};
use crate::target::{TargetKind, WeightKind, WeightRule};
use crate::train::{
    evaluate_loss_curve, train, train_piecewise, LossPoint, MetricLog, PiecewiseModel,
    TrainConfig,
};

pub const MODEL_FILE: &str = "model.ckpt";
/// Running-loss window used for `metrics.csv` summaries and plots.
pub const RUNNING_WINDOW: usize = 50;
/// Time at which the PCA basis is fitted.
pub const PCA_FIT_TIME: f64 = 0.1;
/// Times above this count as the high-noise region in `compare.csv`.
pub const HIGH_NOISE_T: f64 = 0.9;

pub fn bin_model_file(k: usize) -> String {
    format!("model_bin{k}.ckpt")
}

pub fn compare_model_file(rule: WeightKind) -> String {
    format!("model_{}.ckpt", rule.name())
}

pub fn heatmap_file(t: f64) -> String {
    format!("heatmap_{t}.csv")
}

/// Output directory, manifest and cached results shared by the steps of a run.
struct Run<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    gmm: Gmm,
    manifest: RunManifest,
    grid: Vec<f64>,
    global_curve: Option<Vec<LossPoint>>,
}

impl<'a> Run<'a> {
    fn open(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let dir = cfg.out_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let manifest = RunManifest::load_or_new(&dir, cfg.train.seed, cfg.to_pairs());
        Ok(Run {
            cfg,
            gmm: Gmm::default(),
            manifest,
            grid: uniform_grid(cfg.t_grid_size),
            global_curve: None,
            dir,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        write_file(&path, bytes)?;
        self.manifest.record(&self.dir, &path)
    }

    fn emit_csv(&mut self, name: &str, table: &Table) -> Result<()> {
        self.emit(name, table.render().as_bytes())
    }

    fn emit_svg(&mut self, name: &str, svg: impl FnOnce() -> String) -> Result<()> {
        if self.cfg.plot {
            self.emit(name, svg().as_bytes())?;
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
        bytes.push(b'\n');
        self.emit(name, &bytes)
    }

    fn save_model(&mut self, name: &str, model: &Mlp) -> Result<()> {
        let path = self.path(name);
        model.save(&path)?;
        self.manifest.record(&self.dir, &path)
    }

    fn load_model(&self, name: &str) -> Result<Mlp> {
        Mlp::load(&self.path(name))
    }

    /// Bin models if every bin checkpoint is present.
    fn load_piecewise(&self) -> Result<Option<PiecewiseModel>> {
        let paths: Vec<PathBuf> = (0..self.cfg.bins.len())
            .map(|k| self.path(&bin_model_file(k)))
            .collect();
        if !paths.iter().all(|p| p.exists()) {
            return Ok(None);
        }
        let models = paths.iter().map(|p| Mlp::load(p)).collect::<Result<_>>()?;
        PiecewiseModel::new(self.cfg.bins.clone(), models).map(Some)
    }

    fn timed<T>(&mut self, step: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.manifest.time(step, start.elapsed().as_secs_f64());
        Ok(out)
    }

    fn finish(&mut self, outcome: &Result<()>) -> Result<()> {
        self.manifest.status = match outcome {
            Ok(()) => "ok".into(),
            Err(e) => format!("failed: {e}"),
        };
        self.manifest.save(&self.dir)?;
        Ok(())
    }

    fn curve<P: crate::train::Predictor + ?Sized>(&self, model: &P) -> Result<Vec<LossPoint>> {
        let c = self.cfg;
        evaluate_loss_curve(
            model,
            &self.gmm,
            c.train.target,
            &c.train.schedule,
            &self.grid,
            c.eval_mc,
            c.train.seed,
        )
    }

    fn global_curve(&mut self, model: &Mlp) -> Result<Vec<LossPoint>> {
        if self.global_curve.is_none() {
            self.global_curve = Some(self.curve(model)?);
        }
        Ok(self.global_curve.clone().expect("set above"))
    }
}

/// Runs `body` against a fresh run and always writes the manifest.
fn with_run(cfg: &ExperimentConfig, body: impl FnOnce(&mut Run) -> Result<()>) -> Result<()> {
    let mut run = Run::open(cfg)?;
    let outcome = body(&mut run);
    run.finish(&outcome)?;
    outcome
}

// ---------------------------------------------------------------- train

fn train_step(run: &mut Run, piecewise: bool) -> Result<(Mlp, Option<PiecewiseModel>)> {
    let cfg = run.cfg;
    let (model, log) = run.timed("train", |r| train(&cfg.train, &r.gmm))?;
    run.save_model(MODEL_FILE, &model)?;
    emit_metrics(run, "metrics", &log)?;
    let curve = run.global_curve(&model)?;
    let mut table = Table::new(&["t", "mse", "floor", "excess"]);
    for p in &curve {
        table.push([num(p.t), num(p.mse), num(p.floor), num(p.excess)]);
    }
    run.emit_csv("loss_curve.csv", &table)?;
    run.emit_svg("loss_curve.svg", || {
        plot::line_plot(
            "MSE and Bayes floor",
            "t",
            "mse",
            &[
                Series::new("model", curve.iter().map(|p| (p.t, p.mse)).collect()),
                Series::new("floor", curve.iter().map(|p| (p.t, p.floor)).collect()),
            ],
        )
    })?;

    if !piecewise {
        return Ok((model, None));
    }
    let bins = cfg.bins.clone();
    let trained = run.timed("train_piecewise", |r| train_piecewise(&cfg.train, &bins, &r.gmm))?;
    let mut table = Table::new(&["bin", "t_lo", "t_hi", "iteration", "loss"]);
    let mut models = Vec::with_capacity(trained.len());
    let mut series = Vec::with_capacity(trained.len());
    for (k, ((lo, hi), m, log)) in trained.into_iter().enumerate() {
        run.save_model(&bin_model_file(k), &m)?;
        for (i, l) in log.losses.iter().enumerate() {
            table.push([k.to_string(), num(lo), num(hi), i.to_string(), num(*l)]);
        }
        series.push(Series::new(
            format!("bin [{lo}, {hi}]"),
            enumerate(&log.running_loss(RUNNING_WINDOW)),
        ));
        models.push(m);
    }
    run.emit_csv("metrics_piecewise.csv", &table)?;
    run.emit_svg("metrics_piecewise.svg", || {
        plot::line_plot("running loss per bin", "iteration", "loss", &series)
    })?;
    Ok((model, Some(PiecewiseModel::new(bins, models)?)))
}

fn emit_metrics(run: &mut Run, stem: &str, log: &MetricLog) -> Result<()> {
    let mut table = Table::new(&["iteration", "loss"]);
    for (i, l) in log.losses.iter().enumerate() {
        table.push([i.to_string(), num(*l)]);
    }
    run.emit_csv(&format!("{stem}.csv"), &table)?;
    run.emit_svg(&format!("{stem}.svg"), || {
        let running = log.running_loss(RUNNING_WINDOW);
        plot::line_plot(
            "training loss",
            "iteration",
            "loss",
            &[
                Series::new("loss", enumerate(&log.losses)),
                Series::new("running", enumerate(&running)),
            ],
        )
    })
}

fn enumerate(v: &[f64]) -> Vec<(f64, f64)> {
    v.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect()
}

/// Trains the global model (and bin models when `piecewise` is set).
/// Writes `model.ckpt`, `metrics.csv` and `loss_curve.csv`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    with_run(cfg, |run| train_step(run, cfg.piecewise).map(|_| ()))
}

// ---------------------------------------------------------------- bayes

const BAYES_HEADER: [&str; 8] = [
    "target",
    "schedule",
    "weight",
    "t",
    "empirical_mse",
    "bayes_floor",
    "floor_stderr",
    "excess",
];

fn push_curve_rows(table: &mut Table, cfg: &TrainConfig, curve: &[LossPoint]) {
    for p in curve {
        table.push([
            cfg.target.name().to_string(),
            cfg.schedule.kind.name().to_string(),
            cfg.weight.name().to_string(),
            num(p.t),
            num(p.mse),
            num(p.floor),
            num(p.floor_stderr),
            num(p.excess),
        ]);
    }
}

fn bayes_step(run: &mut Run, global: Option<&Mlp>, piecewise: Option<&PiecewiseModel>) -> Result<()> {
    let cfg = run.cfg;
    let tc = &cfg.train;
    let curve = match global {
        Some(m) if !cfg.oracle_only => Some(run.global_curve(m)?),
        _ => None,
    };
    let mut table = Table::new(&BAYES_HEADER);
    let mut floors = Vec::new();
    for target in TargetKind::ALL {
        if target == tc.target {
            if let Some(c) = &curve {
                push_curve_rows(&mut table, tc, c);
                floors.push((target, c.iter().map(|p| (p.t, p.floor)).collect::<Vec<_>>()));
                continue;
            }
        }
        let mut pts = Vec::with_capacity(run.grid.len());
        for (i, &t) in run.grid.iter().enumerate() {
            let seed = rng::derive_seed(tc.seed, tag::FLOOR, i as u64);
            let f = run.gmm.bayes_floor(target, &tc.schedule, t, cfg.n_mc, seed)?;
            table.push([
                target.name().to_string(),
                tc.schedule.kind.name().to_string(),
                tc.weight.name().to_string(),
                num(t),
                String::new(),
                num(f.mse),
                num(f.stderr),
                String::new(),
            ]);
            pts.push((t, f.mse));
        }
        floors.push((target, pts));
    }
    run.emit_csv("bayes_floor.csv", &table)?;
    run.emit_svg("bayes_floor.svg", || {
        let mut series: Vec<Series> = floors
            .iter()
            .map(|(k, p)| Series::new(format!("floor {}", k.name()), p.clone()))
            .collect();
        if let Some(c) = &curve {
            series.push(Series::new(
                format!("model {}", tc.target.name()),
                c.iter().map(|p| (p.t, p.mse)).collect(),
            ));
        }
        plot::line_plot("Bayes floor by target", "t", "mse", &series)
    })?;

    if let (Some(pw), false) = (piecewise, cfg.oracle_only) {
        let pcurve = run.curve(pw)?;
        let mut table = Table::new(&BAYES_HEADER);
        push_curve_rows(&mut table, tc, &pcurve);
        run.emit_csv("bayes_floor_piecewise.csv", &table)?;
        let global = curve.clone();
        run.emit_svg("bayes_floor_piecewise.svg", || {
            let mut series = vec![Series::new(
                "piecewise excess",
                pcurve.iter().map(|p| (p.t, p.excess)).collect(),
            )];
            if let Some(g) = &global {
                series.push(Series::new(
                    "global excess",
                    g.iter().map(|p| (p.t, p.excess)).collect(),
                ));
            }
            plot::line_plot("excess over the Bayes floor", "t", "excess", &series)
        })?;
    }
    Ok(())
}

/// Bayes floors for every target on the `t` grid, with the trained model's
/// MSE and excess for the configured target. Needs `model.ckpt` unless
/// `oracle_only` is set; also reports the binned models when all bin
/// checkpoints exist.
pub fn cmd_bayes(cfg: &ExperimentConfig) -> Result<()> {
    with_run(cfg, |run| {
        if cfg.oracle_only {
            return bayes_step(run, None, None);
        }
        let model = run.load_model(MODEL_FILE)?;
        let pw = run.load_piecewise()?;
        bayes_step(run, Some(&model), pw.as_ref())
    })
}

// ---------------------------------------------------------------- phase

fn phase_step(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let mut rng = rng::derived(cfg.train.seed, tag::PHASE, 0);
    let samples: Vec<(Vec<f64>, Vec<f64>)> = run
        .gmm
        .draw(cfg.phase_samples, &mut rng)
        .into_iter()
        .map(|d| (d.x0, d.eps))
        .collect();
    let mut table = Table::new(&[
        "target",
        "t",
        "sample_id",
        "signal_norm",
        "noise_norm",
        "noise_dominated",
    ]);
    let mut series = Vec::new();
    for target in TargetKind::ALL {
        let mut pts = Vec::new();
        for (i, &t) in run.grid.iter().enumerate() {
            let dec = run
                .gmm
                .signal_noise_decomposition(target, &cfg.train.schedule, t, &samples)?;
            for (j, d) in dec.iter().enumerate() {
                table.push([
                    target.name().to_string(),
                    num(t),
                    j.to_string(),
                    num(d.signal_norm),
                    num(d.noise_norm),
                    u8::from(d.noise_dominated()).to_string(),
                ]);
                if i % 10 == 0 {
                    pts.push((d.signal_norm, d.noise_norm));
                }
            }
        }
        series.push(Series::new(target.name(), pts));
    }
    run.emit_csv("phase.csv", &table)?;
    run.emit_svg("phase.svg", || {
        plot::scatter_plot("signal vs noise", "signal_norm", "noise_norm", &series, true)
    })
}

/// Oracle signal/noise norms per sample for every target on the `t` grid.
pub fn cmd_phase(cfg: &ExperimentConfig) -> Result<()> {
    with_run(cfg, phase_step)
}

// ---------------------------------------------------------------- ntk

#[derive(Debug, Clone, Serialize)]
struct GramReport {
    label: String,
    points: usize,
    asymmetry: f64,
    min_eig_ratio: f64,
    symmetric: bool,
    psd: bool,
    effective_rank: f64,
}

fn gram_report(label: String, gram: &NtkGram, eig: &[f64], check: GramCheck) -> Result<GramReport> {
    Ok(GramReport {
        label,
        points: gram.len(),
        asymmetry: check.asymmetry,
        min_eig_ratio: check.min_eig_ratio,
        symmetric: check.symmetric(),
        psd: check.psd(),
        effective_rank: spectra::effective_rank(eig)?,
    })
}

/// Fixed `(x0, eps)` pairs for kernel probes, grouped by mixture component.
fn probe_points(gmm: &Gmm, n: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>, usize)> {
    let mut rng = rng::derived(seed, tag::NTK, 0);
    let mut pts: Vec<_> = gmm
        .draw(n, &mut rng)
        .into_iter()
        .map(|d| (d.x0, d.eps, d.component))
        .collect();
    pts.sort_by_key(|p| p.2);
    pts
}

fn corrupted(
    cfg: &ExperimentConfig,
    probes: &[(Vec<f64>, Vec<f64>, usize)],
    t: f64,
) -> Result<Vec<(Vec<f64>, f64)>> {
    probes
        .iter()
        .map(|(x0, eps, _)| Ok((cfg.train.schedule.corrupt(x0, eps, t)?, t)))
        .collect()
}

fn matrix_table(m: &Array2<f64>) -> Table {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    let mut table = Table::new(&header);
    for row in m.rows() {
        table.push(row.iter().map(|v| num(*v)));
    }
    table
}

fn ntk_step(run: &mut Run, model: &Mlp) -> Result<()> {
    let cfg = run.cfg;
    let tc = &cfg.train;
    let probes = probe_points(&run.gmm, cfg.ntk_points, tc.seed);
    let mut table = Table::new(&[
        "target",
        "schedule",
        "t",
        "kappa1",
        "kappa2",
        "kappa3",
        "effective_rank",
    ]);
    let mut reports = Vec::new();
    let mut kappas = vec![Vec::new(), Vec::new(), Vec::new()];
    let mut ranks = Vec::new();
    for t in uniform_grid(cfg.ntk_grid_size) {
        let gram = spectra::ntk_gram(model, &corrupted(cfg, &probes, t)?, cfg.scalarization, MODEL_FILE)?;
        let eig = gram.eigenvalues()?;
        let report = gram_report(format!("t={t}"), &gram, &eig, gram.check()?)?;
        let mut top = eig.clone();
        top.resize(3, 0.0);
        table.push([
            tc.target.name().to_string(),
            tc.schedule.kind.name().to_string(),
            num(t),
            num(top[0]),
            num(top[1]),
            num(top[2]),
            num(report.effective_rank),
        ]);
        for (k, series) in kappas.iter_mut().enumerate() {
            series.push((t, top[k]));
        }
        ranks.push((t, report.effective_rank));
        reports.push(report);
    }
    run.emit_csv("ntk_spectrum.csv", &table)?;
    run.emit_svg("ntk_spectrum.svg", || {
        let series: Vec<Series> = kappas
            .into_iter()
            .enumerate()
            .map(|(k, p)| Series::new(format!("kappa{}", k + 1), p))
            .collect();
        plot::line_plot("top NTK eigenvalues", "t", "eigenvalue", &series)
    })?;
    run.emit_svg("ntk_effective_rank.svg", || {
        plot::line_plot("NTK effective rank", "t", "effective rank", &[Series::new("erank", ranks)])
    })?;

    let mut joint_points = Vec::new();
    for &t in &cfg.heatmap_times {
        let pts = corrupted(cfg, &probes, t)?;
        let gram = spectra::ntk_gram(model, &pts, cfg.scalarization, MODEL_FILE)?;
        let eig = gram.eigenvalues()?;
        reports.push(gram_report(format!("heatmap t={t}"), &gram, &eig, gram.check()?)?);
        let h = spectra::normalized_heatmap(&gram)?;
        let name = heatmap_file(t);
        run.emit_csv(&name, &matrix_table(&h))?;
        run.emit_svg(&name.replace(".csv", ".svg"), || {
            plot::heatmap(&format!("normalized NTK, t = {t}"), &h)
        })?;
        joint_points.extend(pts);
    }
    if !joint_points.is_empty() {
        let gram = spectra::ntk_gram(model, &joint_points, cfg.scalarization, MODEL_FILE)?;
        let eig = gram.eigenvalues()?;
        reports.push(gram_report("joint".into(), &gram, &eig, gram.check()?)?);
        let h = spectra::normalized_heatmap(&gram)?;
        run.emit_csv("heatmap_joint.csv", &matrix_table(&h))?;
        run.emit_svg("heatmap_joint.svg", || plot::heatmap("normalized joint NTK", &h))?;
    }
    run.emit_json("ntk_checks.json", &reports)
}

/// Fixed-noise NTK spectra on the NTK grid plus normalized heatmaps at the
/// heatmap times and over their union. Needs `model.ckpt`.
pub fn cmd_ntk(cfg: &ExperimentConfig) -> Result<()> {
    with_run(cfg, |run| {
        let model = run.load_model(MODEL_FILE)?;
        ntk_step(run, &model)
    })
}

// ---------------------------------------------------------------- pca

#[derive(Debug, Clone, Serialize)]
struct PcaTimeReport {
    t: f64,
    mean_projected_norm: f64,
    /// Mean distance between cluster centroids over mean within-cluster spread.
    separation_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
struct PcaReport {
    fit_time: f64,
    samples: usize,
    orthonormality_error: f64,
    explained_variance: Vec<f64>,
    times: Vec<PcaTimeReport>,
}

fn separation_ratio(proj: &Array2<f64>, labels: &[usize], clusters: usize) -> f64 {
    let mut centroids = vec![[0.0f64; 2]; clusters];
    let mut counts = vec![0usize; clusters];
    for (row, &c) in proj.rows().into_iter().zip(labels) {
        centroids[c][0] += row[0];
        centroids[c][1] += row[1];
        counts[c] += 1;
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        if *n > 0 {
            c[0] /= *n as f64;
            c[1] /= *n as f64;
        }
    }
    let spread: f64 = proj
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &c)| ((row[0] - centroids[c][0]).powi(2) + (row[1] - centroids[c][1]).powi(2)).sqrt())
        .sum::<f64>()
        / labels.len() as f64;
    let present: Vec<usize> = (0..clusters).filter(|&c| counts[c] > 0).collect();
    let mut between = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in present.iter().enumerate() {
        for &j in &present[a + 1..] {
            between += ((centroids[i][0] - centroids[j][0]).powi(2)
                + (centroids[i][1] - centroids[j][1]).powi(2))
            .sqrt();
            pairs += 1;
        }
    }
    if pairs == 0 || spread <= 0.0 {
        return 0.0;
    }
    between / pairs as f64 / spread
}

fn hidden_features(model: &Mlp, x: &Array2<f64>, t: f64) -> Result<Array2<f64>> {
    Ok(model.forward_batch(x.view(), &vec![t; x.nrows()])?.hidden().clone())
}

fn pca_step(run: &mut Run, model: &Mlp) -> Result<()> {
    let cfg = run.cfg;
    let schedule = &cfg.train.schedule;
    let mut rng = rng::derived(cfg.train.seed, tag::PCA, 0);
    let draws = run.gmm.draw(cfg.pca_samples, &mut rng);
    let labels: Vec<usize> = draws.iter().map(|d| d.component).collect();
    let d = run.gmm.dim();
    let inputs = |t: f64| -> Result<Array2<f64>> {
        let mut x = Array2::zeros((draws.len(), d));
        for (i, dr) in draws.iter().enumerate() {
            let xt = schedule.corrupt(&dr.x0, &dr.eps, t)?;
            x.row_mut(i).assign(&ndarray::ArrayView1::from(&xt));
        }
        Ok(x)
    };
    let basis = spectra::pca_fit(hidden_features(model, &inputs(PCA_FIT_TIME)?, PCA_FIT_TIME)?.view(), 2)?;
    let mut table = Table::new(&["t", "sample_id", "cluster_id", "pc1", "pc2"]);
    let mut times = Vec::new();
    let mut series = Vec::new();
    for &t in &cfg.pca_times {
        let proj = spectra::pca_project(&basis, hidden_features(model, &inputs(t)?, t)?.view())?;
        for (i, row) in proj.rows().into_iter().enumerate() {
            table.push([num(t), i.to_string(), labels[i].to_string(), num(row[0]), num(row[1])]);
        }
        let norms = proj.map_axis(Axis(1), |r| r.dot(&r).sqrt());
        times.push(PcaTimeReport {
            t,
            mean_projected_norm: norms.mean().unwrap_or(0.0),
            separation_ratio: separation_ratio(&proj, &labels, run.gmm.components()),
        });
        series.push(Series::new(
            format!("t={t}"),
            proj.rows().into_iter().map(|r| (r[0], r[1])).collect(),
        ));
    }
    run.emit_csv("pca.csv", &table)?;
    run.emit_json(
        "pca_meta.json",
        &PcaReport {
            fit_time: PCA_FIT_TIME,
            samples: cfg.pca_samples,
            orthonormality_error: basis.orthonormality_error(),
            explained_variance: basis.explained_variance.clone(),
            times,
        },
    )?;
    run.emit_svg("pca.svg", || {
        plot::scatter_plot("hidden features on the t = 0.1 PCA basis", "pc1", "pc2", &series, false)
    })
}

/// Last-hidden-layer features projected on a PCA basis fitted at
/// `t = 0.1`, for each of `pca_times`. Needs `model.ckpt`.
pub fn cmd_pca(cfg: &ExperimentConfig) -> Result<()> {
    with_run(cfg, |run| {
        let model = run.load_model(MODEL_FILE)?;
        pca_step(run, &model)
    })
}

// ---------------------------------------------------------------- compare

pub const COMPARE_RULES: [WeightKind; 3] = [WeightKind::Uniform, WeightKind::Erd, WeightKind::ClampedSnr];

fn compare_step(run: &mut Run, reuse: Option<&Mlp>) -> Result<()> {
    let cfg = run.cfg;
    let mut table = Table::new(&[
        "rule",
        "kind",
        "t",
        "empirical_mse",
        "bayes_floor",
        "excess",
        "weight",
        "high_noise_mass",
    ]);
    let mut aggregates = Vec::new();
    let mut series = Vec::new();
    for rule_kind in COMPARE_RULES {
        let tc = TrainConfig {
            weight: rule_kind,
            ..cfg.train.clone()
        };
        let rule = WeightRule::with_gamma(rule_kind, tc.target, tc.schedule, tc.gamma)?;
        let model = match reuse {
            Some(m) if cfg.train.weight == rule_kind => m.clone(),
            _ => run.timed(&format!("train_{}", rule_kind.name()), |r| train(&tc, &r.gmm))?.0,
        };
        run.save_model(&compare_model_file(rule_kind), &model)?;
        let curve = if reuse.is_some() && cfg.train.weight == rule_kind {
            run.global_curve(&model)?
        } else {
            run.curve(&model)?
        };
        let (mut high, mut high_n) = (0.0, 0usize);
        for p in &curve {
            let w = rule.weight(p.t)?;
            if p.t > HIGH_NOISE_T {
                high += w;
                high_n += 1;
            }
            table.push([
                rule_kind.name().to_string(),
                "curve".into(),
                num(p.t),
                num(p.mse),
                num(p.floor),
                num(p.excess),
                num(w),
                String::new(),
            ]);
        }
        let n = curve.len() as f64;
        let mean = |f: fn(&LossPoint) -> f64| curve.iter().map(f).sum::<f64>() / n;
        aggregates.push([
            rule_kind.name().to_string(),
            "aggregate".into(),
            String::new(),
            num(mean(|p| p.mse)),
            num(mean(|p| p.floor)),
            num(mean(|p| p.excess)),
            String::new(),
            num(if high_n > 0 { high / high_n as f64 } else { 0.0 }),
        ]);
        series.push(Series::new(rule_kind.name(), curve.iter().map(|p| (p.t, p.excess)).collect()));
    }
    for row in aggregates {
        table.push(row);
    }
    run.emit_csv("compare.csv", &table)?;
    run.emit_svg("compare.svg", || plot::line_plot("excess by weight rule", "t", "excess", &series))
}

/// Trains one model per weight rule with the same seed and reports per-`t`
/// excess and aggregate means. `high_noise_mass` is the mean rule weight
/// over grid points with `t > 0.9`, i.e. the rule's mass there relative to
/// uniform weighting.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<()> {
    with_run(cfg, |run| compare_step(run, None))
}

// ---------------------------------------------------------------- all

/// Global and binned training followed by every analysis. Stops at the
/// first failure; the manifest is written either way.
pub fn cmd_all(cfg: &ExperimentConfig) -> Result<()> {
    with_run(cfg, |run| {
        let (model, pw) = train_step(run, true)?;
        run.timed("bayes", |r| bayes_step(r, Some(&model), pw.as_ref()))?;
        run.timed("phase", phase_step)?;
        run.timed("ntk", |r| ntk_step(r, &model))?;
        run.timed("pca", |r| pca_step(r, &model))?;
        run.timed("compare", |r| compare_step(r, Some(&model)))
    })
}

/// Reads the manifest in `dir`, if any.
pub fn read_manifest(dir: &Path) -> Option<RunManifest> {
    let bytes = std::fs::read(dir.join(super::output::MANIFEST_FILE)).ok()?;
    serde_json::from_slice(&bytes).ok()
}
