//! The `generate`, `learn`, `evaluate`, `infer` and `verify` commands.
//!
//! A run directory holds `data/`, `models/`, `evaluate/` and `infer/`, each
//! with a `manifest.json` recording the configuration hash and seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abm::{ensemble, AbmParams};
use crate::config::{tidy, LearnMode, RunConfig};
use crate::error::{Error, Result};
use crate::inference::{error_sweep, nearest_rows, sweep_csv, SweepSettings};
use crate::me_eql::{
    es_learn, mse_csv, mse_table, oat_learn, oat_model, ExperimentSet, LearnSettings, ModelKind,
    ParameterizedModel, Source,
};
use crate::mfm::{self, MfmParams};
use crate::ode::IntegrateOptions;
use crate::plot::{Chart, Series};
use crate::rng::{derive_seed, rng_from_seed};
use crate::series::TimeSeries;
use crate::sparse::{LambdaRecord, LambdaSelection, SparseModel};

/// The noise-free five-experiment configuration used by `verify`.
pub const VERIFY_CONFIG: &str = include_str!("../configs/mfm_noise_free_5.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestExperiment {
    pub rp: f64,
    pub file: String,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_extinct: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub created: String,
    pub config: RunConfig,
    #[serde(default)]
    pub experiments: Vec<ManifestExperiment>,
    #[serde(default)]
    pub files: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Manifest {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config: cfg.clone(),
            experiments: Vec::new(),
            files: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn write(&mut self, dir: &Path) -> Result<()> {
        self.files.sort();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(dir: &Path, name: &str, text: &str, files: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    files.push(name.to_string());
    Ok(())
}

fn source_name(source: Source) -> &'static str {
    match source {
        Source::Mfm => "mfm",
        Source::Abm => "abm",
    }
}

pub fn data_file_name(source: Source, rp: f64) -> String {
    format!("{}_rp{}.csv", source_name(source), tidy(rp))
}

fn experiment_seed(cfg: &RunConfig, rp: f64) -> u64 {
    derive_seed(cfg.seed, &[tidy(rp).to_bits()])
}

/// Simulates every sweep and design rp value into `<out>/data`.
pub fn generate(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let dir = cfg.output_path().join("data");
    create_dir(&dir)?;
    let rps = cfg.generate_rp()?;
    if cfg.source == Source::Abm && cfg.abm.dump_replicates {
        create_dir(&dir.join("replicates"))?;
    }
    let made: Vec<(ManifestExperiment, String, Vec<(String, String)>)> = rps
        .par_iter()
        .map(|&rp| -> Result<_> {
            let seed = experiment_seed(cfg, rp);
            let t_end = cfg.grid.horizon / rp;
            let file = data_file_name(cfg.source, rp);
            match cfg.source {
                Source::Mfm => {
                    let params = MfmParams {
                        sigma: cfg.sigma,
                        n_points: cfg.grid.n_points,
                        t_end,
                        ..MfmParams::new(rp, cfg.ic)
                    };
                    let ts = mfm::generate(&params, &mut rng_from_seed(seed))?;
                    let seeds = if cfg.sigma > 0.0 { vec![seed] } else { vec![] };
                    Ok((
                        ManifestExperiment {
                            rp,
                            file,
                            seeds,
                            n_extinct: None,
                        },
                        ts.to_csv(),
                        Vec::new(),
                    ))
                }
                Source::Abm => {
                    let params = AbmParams {
                        rp,
                        rm: cfg.abm.rm,
                        lattice_side: cfg.abm.lattice_side,
                        ic_fraction: cfg.ic,
                        n_replicates: cfg.abm.n_replicates,
                        t_end,
                        n_points: cfg.grid.n_points,
                        seed,
                    };
                    let (ens, runs) = ensemble(&params)?;
                    let dumps = if cfg.abm.dump_replicates {
                        runs.iter()
                            .enumerate()
                            .map(|(i, ts)| {
                                (
                                    format!("replicates/abm_rp{}_rep{i}.csv", tidy(rp)),
                                    ts.to_csv(),
                                )
                            })
                            .collect()
                    } else {
                        Vec::new()
                    };
                    Ok((
                        ManifestExperiment {
                            rp,
                            file,
                            seeds: ens.replicates.iter().map(|r| r.seed).collect(),
                            n_extinct: Some(ens.n_extinct()),
                        },
                        ens.to_csv(),
                        dumps,
                    ))
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut manifest = Manifest::new("generate", cfg);
    for (exp, csv, dumps) in made {
        write_file(&dir, &exp.file, &csv, &mut manifest.files)?;
        for (name, text) in dumps {
            write_file(&dir, &name, &text, &mut manifest.files)?;
        }
        if let Some(n) = exp.n_extinct.filter(|n| *n > 0) {
            manifest
                .notes
                .push(format!("rp={}: {n} replicate(s) went extinct", exp.rp));
        }
        manifest.experiments.push(exp);
    }
    manifest.write(&dir)?;
    Ok(dir)
}

/// Loads every experiment listed in `<out>/data/manifest.json`.
pub fn load_dataset(cfg: &RunConfig) -> Result<ExperimentSet> {
    let dir = cfg.output_path().join("data");
    if !dir.join("manifest.json").exists() {
        return Err(Error::Precondition(format!(
            "no dataset at {}; run `generate` first",
            dir.display()
        )));
    }
    let manifest = Manifest::read(&dir)?;
    let mut experiments = Vec::with_capacity(manifest.experiments.len());
    for e in &manifest.experiments {
        experiments.push((e.rp, TimeSeries::read_csv(&dir.join(&e.file))?));
    }
    experiments.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut set = ExperimentSet::new(experiments, manifest.config.ic, manifest.config.source)?;
    set.sigma = manifest.config.sigma;
    set.seeds = manifest.experiments.iter().flat_map(|e| e.seeds.clone()).collect();
    Ok(set)
}

fn settings(cfg: &RunConfig) -> LearnSettings {
    LearnSettings {
        max_degree: cfg.learn.max_degree,
        smooth_window: cfg.learn.smooth_window,
        interpolation: cfg.learn.interpolation,
    }
}

fn aic_trace(out: &mut String, rp: Option<f64>, records: &[LambdaRecord], sel: &LambdaSelection) {
    for (j, r) in records.iter().enumerate() {
        let rp = rp.map_or_else(String::new, |v| v.to_string());
        let max_abs = r.splits.iter().map(|s| s.max_abs()).fold(0.0, f64::max);
        let _ = writeln!(
            out,
            "{rp},{},{},{max_abs},{}",
            r.lambda,
            r.mean_aic,
            u8::from(j == sel.index)
        );
    }
}

const AIC_HEADER: &str = "rp,lambda,mean_aic,max_abs_coefficient,selected\n";

fn structure_string(m: &SparseModel) -> String {
    let d: Vec<String> = m.active_degrees().iter().map(|d| format!("C{d}")).collect();
    d.join(" ")
}

/// Learns the configured models from the training design into `<out>/models`.
pub fn learn(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let full = load_dataset(cfg)?;
    let set = full.subset(&cfg.learn.design.design()?)?;
    let dir = cfg.output_path().join("models");
    create_dir(&dir)?;
    let mut manifest = Manifest::new("learn", cfg);
    manifest.experiments = set
        .experiments
        .iter()
        .map(|(rp, _)| ManifestExperiment {
            rp: *rp,
            file: format!("../data/{}", data_file_name(set.source, *rp)),
            seeds: Vec::new(),
            n_extinct: None,
        })
        .collect();
    let s = settings(cfg);
    let mut deferred: Option<Error> = None;

    if cfg.learn.modes.contains(&LearnMode::Oat) {
        let protocol = cfg.learn.protocol(cfg.learn.oat_threshold, cfg.seed);
        let records = oat_learn(&set, &protocol, &s)?;
        let mut trace = String::from(AIC_HEADER);
        let mut summary = String::from("rp,status,structure,lambda,model\n");
        for r in &records {
            match &r.outcome {
                Ok(o) => {
                    aic_trace(&mut trace, Some(r.rp), &o.records, &o.selection);
                    let name = format!("oat_rp{}.json", tidy(r.rp));
                    write_file(&dir, &name, &o.model.to_json(), &mut manifest.files)?;
                    let _ = writeln!(
                        summary,
                        "{},ok,{},{},{}",
                        r.rp,
                        structure_string(&o.model),
                        o.model.lambda,
                        o.model.describe()
                    );
                }
                Err(e) => {
                    let _ = writeln!(summary, "{},failed,,,\"{}\"", r.rp, e.replace('"', "'"));
                    manifest.notes.push(format!("oat rp={}: {e}", r.rp));
                }
            }
        }
        write_file(&dir, "aic_oat.csv", &trace, &mut manifest.files)?;
        write_file(&dir, "oat_summary.csv", &summary, &mut manifest.files)?;
        match oat_model(&records, cfg.learn.interpolation) {
            Ok(model) => write_file(&dir, "oat.json", &model.to_json(), &mut manifest.files)?,
            Err(e) => {
                manifest.notes.push(format!("oat interpolation: {e}"));
                deferred = Some(e);
            }
        }
    }

    if cfg.learn.modes.contains(&LearnMode::Es) {
        let protocol = cfg.learn.protocol(cfg.learn.es_threshold, cfg.seed);
        match es_learn(&set, &protocol, &s) {
            Ok((model, outcome)) => {
                write_file(&dir, "es.json", &model.to_json(), &mut manifest.files)?;
                write_file(&dir, "es_sparse.json", &outcome.model.to_json(), &mut manifest.files)?;
                let mut trace = String::from(AIC_HEADER);
                aic_trace(&mut trace, None, &outcome.records, &outcome.selection);
                write_file(&dir, "aic_es.csv", &trace, &mut manifest.files)?;
            }
            Err(e) => {
                manifest.notes.push(format!("es: {e}"));
                deferred.get_or_insert(e);
            }
        }
    }
    manifest.write(&dir)?;
    match deferred {
        Some(e) => Err(e),
        None => Ok(dir),
    }
}

fn model_path(cfg: &RunConfig, kind: ModelKind) -> PathBuf {
    cfg.output_path()
        .join("models")
        .join(format!("{}.json", kind.name()))
}

/// Loads the requested models, reporting every missing file at once.
fn load_models(cfg: &RunConfig, kinds: &[ModelKind]) -> Result<Vec<ParameterizedModel>> {
    let missing: Vec<String> = kinds
        .iter()
        .filter(|k| **k != ModelKind::Meanfield)
        .map(|k| model_path(cfg, *k))
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Precondition(format!(
            "missing model file(s): {}; run `learn` first",
            missing.join(", ")
        )));
    }
    kinds
        .iter()
        .map(|k| match k {
            ModelKind::Meanfield => Ok(ParameterizedModel::meanfield()),
            _ => ParameterizedModel::read(&model_path(cfg, *k)),
        })
        .collect()
}

/// MSE of each model on every generated experiment, into `<out>/evaluate`.
pub fn evaluate(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let set = load_dataset(cfg)?;
    let models = load_models(cfg, &cfg.evaluate.models)?;
    let find = |k: ModelKind| models.iter().find(|m| m.kind == k);
    let models_dir = cfg.output_path().join("models");
    let mut singles = Vec::new();
    for (rp, _) in &set.experiments {
        let path = models_dir.join(format!("oat_rp{}.json", tidy(*rp)));
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let m = SparseModel::from_json(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
            singles.push((*rp, m));
        }
    }
    let rows = mse_table(
        &set,
        find(ModelKind::Oat),
        find(ModelKind::Es),
        &singles,
        &IntegrateOptions::default(),
    );
    let dir = cfg.output_path().join("evaluate");
    create_dir(&dir)?;
    let mut manifest = Manifest::new("evaluate", cfg);
    write_file(&dir, "mse.csv", &mse_csv(&rows), &mut manifest.files)?;

    let mut divergent = String::from("rp,model\n");
    for r in &rows {
        for (name, v) in [("oat", r.oat), ("es", r.es), ("meanfield", Some(r.meanfield))] {
            if v.is_some_and(|x| !x.is_finite()) {
                let _ = writeln!(divergent, "{},{name}", r.rp);
            }
        }
    }
    write_file(&dir, "divergent.csv", &divergent, &mut manifest.files)?;

    let mut series = Vec::new();
    for kind in &cfg.evaluate.models {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| {
                let v = match kind {
                    ModelKind::Oat => r.oat,
                    ModelKind::Es => r.es,
                    ModelKind::Meanfield => Some(r.meanfield),
                };
                (r.rp, v.unwrap_or(f64::NAN))
            })
            .collect();
        series.push(Series {
            label: kind.name().to_string(),
            points,
            band: Vec::new(),
        });
    }
    let marks = set
        .subset(&cfg.learn.design.design()?)
        .map(|s| s.rp_values())
        .unwrap_or_default();
    let chart = Chart {
        title: format!("Generalization MSE ({} data, IC={})", source_name(cfg.source), cfg.ic),
        x_label: "Rp".into(),
        y_label: "MSE".into(),
        log_y: true,
        series,
        marks,
        provenance: format!("config sha256 {}", cfg.hash()),
    };
    write_file(&dir, "mse.svg", &chart.to_svg(), &mut manifest.files)?;
    manifest.write(&dir)?;
    Ok(dir)
}

/// Rate-recovery error sweep on fresh single-replicate simulations, into
/// `<out>/infer`.
pub fn infer(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let models = load_models(cfg, &cfg.infer.models)?;
    let rps = cfg.infer.sweep.values()?;
    let abm = AbmParams {
        rm: cfg.abm.rm,
        lattice_side: cfg.abm.lattice_side,
        n_points: cfg.grid.n_points,
        ..AbmParams::new(1.0, cfg.ic, derive_seed(cfg.seed, &[0x1f]))
    };
    let settings = SweepSettings {
        bounds: (cfg.infer.bounds[0], cfg.infer.bounds[1]),
        ..SweepSettings::default()
    };
    let rows = error_sweep(&models, &rps, cfg.infer.n_noisy, &abm, &settings)?;
    let dir = cfg.output_path().join("infer");
    create_dir(&dir)?;
    let mut manifest = Manifest::new("infer", cfg);
    write_file(&dir, "sweep.csv", &sweep_csv(&rows), &mut manifest.files)?;
    let summary: Vec<_> = nearest_rows(&rows, &cfg.infer.summary_rp)
        .into_iter()
        .cloned()
        .collect();
    write_file(&dir, "summary.csv", &sweep_csv(&summary), &mut manifest.files)?;

    let series = models
        .iter()
        .map(|m| {
            let mine: Vec<_> = rows.iter().filter(|r| r.model == m.kind).collect();
            Series {
                label: m.kind.name().to_string(),
                points: mine
                    .iter()
                    .map(|r| (r.rp_true, r.mean_rel_err.unwrap_or(f64::NAN)))
                    .collect(),
                band: mine
                    .iter()
                    .map(|r| match (r.mean_rel_err, r.std_rel_err) {
                        (Some(m), Some(s)) => (r.rp_true, m - s, m + s),
                        _ => (r.rp_true, f64::NAN, f64::NAN),
                    })
                    .collect(),
            }
        })
        .collect();
    let chart = Chart {
        title: format!("Rp recovery from single simulations (IC={})", cfg.ic),
        x_label: "Rp".into(),
        y_label: "relative error".into(),
        log_y: true,
        series,
        marks: Vec::new(),
        provenance: format!("config sha256 {}", cfg.hash()),
    };
    write_file(&dir, "sweep.svg", &chart.to_svg(), &mut manifest.files)?;
    manifest.write(&dir)?;
    Ok(dir)
}

/// Numerical self-checks of the integrator, the LASSO solver and the finite
/// differences, as CSV.
pub fn oracle_report() -> Result<String> {
    use crate::numderiv::{differentiate, DerivativeOptions};
    use crate::ode::{integrate, PolynomialOde};
    use crate::sparse::lasso;

    let mut rows: Vec<(String, f64, f64, bool)> = [0.1, 1.0, 5.0]
        .par_iter()
        .map(|&rp| -> Result<_> {
            let grid = TimeSeries::uniform_grid(30.0 / rp, 100);
            let ts = integrate(&PolynomialOde::mean_field(rp), 0.05, &grid)?;
            let err = ts
                .times
                .iter()
                .zip(&ts.values)
                .map(|(t, v)| (v - mfm::logistic_solution(rp, 0.05, *t)).abs())
                .fold(0.0, f64::max);
            Ok((format!("ode_logistic_rp{rp}"), err, 1e-6, err <= 1e-6))
        })
        .collect::<Result<_>>()?;

    let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() + 0.1 * i as f64).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 1.7 * v + 0.05 * (i as f64).cos()).collect();
    let theta = crate::library::DesignMatrix::from_rows(
        &x.iter().map(|v| vec![*v]).collect::<Vec<_>>(),
    )?;
    let (xx, xy) = x.iter().zip(&y).fold((0.0, 0.0), |(a, b), (p, q)| (a + p * p, b + p * q));
    let worst = [1e-3, 0.5, 3.0]
        .iter()
        .map(|&lam| -> Result<f64> {
            let exact = xy.signum() * (xy.abs() - lam / 2.0).max(0.0) / xx;
            Ok((lasso(&theta, &y, lam)?[0] - exact).abs())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    rows.push(("lasso_soft_threshold".into(), worst, 1e-8, worst <= 1e-8));

    let err_at = |n: usize| -> Result<f64> {
        let times = TimeSeries::uniform_grid(2.0, n);
        let values = times.iter().map(|t| t.sin()).collect();
        let d = differentiate(&TimeSeries::new(times.clone(), values)?, &DerivativeOptions::mean_field())?;
        Ok(times[1..n - 1]
            .iter()
            .zip(&d.values[1..n - 1])
            .map(|(t, v)| (v - t.cos()).abs())
            .fold(0.0, f64::max))
    };
    let order = (err_at(41)? / err_at(81)?).log2();
    rows.push(("central_difference_order".into(), order, 1.9, order >= 1.9));

    let mut out = String::from("check,value,tolerance,pass\n");
    for (name, v, tol, ok) in rows {
        let _ = writeln!(out, "{name},{v:e},{tol:e},{ok}");
    }
    Ok(out)
}

fn run_pipeline(cfg: &RunConfig) -> Result<()> {
    generate(cfg)?;
    learn(cfg)?;
    evaluate(cfg)?;
    let dir = cfg.output_path().join("oracles");
    create_dir(&dir)?;
    let path = dir.join("oracles.csv");
    std::fs::write(&path, oracle_report()?).map_err(|e| Error::io(&path, e))
}

fn collect_files(dir: &Path, base: &Path, out: &mut BTreeMap<String, Vec<u8>>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(&path, base, out)?;
        } else {
            let rel = path
                .strip_prefix(base)
                .expect("walk stays under base")
                .to_string_lossy()
                .replace('\\', "/");
            let mut bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if path.file_name().is_some_and(|n| n == "manifest.json") {
                bytes = strip_volatile(&bytes, &path)?;
            }
            out.insert(rel, bytes);
        }
    }
    Ok(())
}

/// A manifest without its creation time and output location, the
/// only fields allowed to differ between otherwise identical runs.
fn strip_volatile(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let mut v: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::parse(path, e.to_string()))?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("created");
        if let Some(c) = obj.get_mut("config").and_then(|c| c.as_object_mut()) {
            c.remove("output_dir");
        }
    }
    Ok(serde_json::to_vec(&v).expect("json serializes"))
}

/// Files that differ or exist on one side only.
pub fn diff_trees(a: &Path, b: &Path) -> Result<Vec<String>> {
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    collect_files(a, a, &mut fa)?;
    collect_files(b, b, &mut fb)?;
    let mut diffs = Vec::new();
    for (name, bytes) in &fa {
        match fb.get(name) {
            Some(other) if other == bytes => {}
            Some(_) => diffs.push(name.clone()),
            None => diffs.push(format!("{name} (only in {})", a.display())),
        }
    }
    for name in fb.keys().filter(|k| !fa.contains_key(*k)) {
        diffs.push(format!("{name} (only in {})", b.display()));
    }
    Ok(diffs)
}

/// Runs the pipeline once on a single worker and once on `jobs` workers and
/// compares every artifact byte for byte. Returns a textual report.
pub fn verify(cfg: &RunConfig, jobs: usize) -> Result<String> {
    cfg.validate()?;
    let base = cfg.output_path().join("verify");
    let mut report = String::new();
    let mut dirs = Vec::new();
    for n in [1, jobs.max(2)] {
        let mut c = cfg.clone();
        c.output_dir = base.join(format!("jobs{n}"));
        if c.output_dir.exists() {
            std::fs::remove_dir_all(&c.output_dir).map_err(|e| Error::io(&c.output_dir, e))?;
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        // Absolute location, so the output root is not applied twice.
        let c = RunConfig {
            output_dir: std::path::absolute(&c.output_dir).map_err(|e| Error::io(&c.output_dir, e))?,
            ..c
        };
        pool.install(|| run_pipeline(&c))?;
        let _ = writeln!(report, "ran with {n} worker(s) into {}", c.output_dir.display());
        dirs.push(c.output_dir);
    }
    let diffs = diff_trees(&dirs[0], &dirs[1])?;
    if diffs.is_empty() {
        let _ = writeln!(report, "identical: all artifacts match");
        Ok(report)
    } else {
        Err(Error::Mismatch(diffs))
    }
}
