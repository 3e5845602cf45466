//! Declarative TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::DEFAULT_BOUNDS;
use crate::me_eql::{Design, Interpolation, ModelKind, Source};
use crate::mfm::{DEFAULT_HORIZON, DEFAULT_N_POINTS};
use crate::sparse::{log_grid, CvProtocol, RefitObjective, ES_THRESHOLD, OAT_THRESHOLD};

/// Environment variable that relocates every relative `output_dir`.
pub const OUTPUT_ROOT_ENV: &str = "MEEQL_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source: Source,
    pub ic: f64,
    /// Relative observation noise for mean-field data; 0.0025 is the usual
    /// low-noise level.
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub abm: AbmConfig,
    #[serde(default)]
    pub learn: LearnConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub infer: InferConfig,
}

fn default_seed() -> u64 {
    1
}

/// Either an explicit list or `count` equally spaced values in `[start, stop]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

/// Rounds away the binary noise of `a + k * step` so values print cleanly.
pub fn tidy(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

impl SweepSpec {
    pub fn linspace(start: f64, stop: f64, count: usize) -> Self {
        Self {
            values: None,
            start: Some(start),
            stop: Some(stop),
            count: Some(count),
        }
    }

    pub fn list(values: Vec<f64>) -> Self {
        Self {
            values: Some(values),
            ..Default::default()
        }
    }

    /// Sorted, de-duplicated rp values.
    pub fn values(&self) -> Result<Vec<f64>> {
        let mut v = match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 || (n > 1 && !(b > a)) {
                    return Err(Error::Config(
                        "sweep range needs count >= 1 and stop > start".into(),
                    ));
                }
                if n == 1 {
                    vec![a]
                } else {
                    (0..n)
                        .map(|k| tidy(a + (b - a) * k as f64 / (n - 1) as f64))
                        .collect()
                }
            }
            _ => {
                return Err(Error::Config(
                    "sweep takes either `values` or all of `start`, `stop`, `count`".into(),
                ))
            }
        };
        if v.is_empty() {
            return Err(Error::Config("sweep is empty".into()));
        }
        if let Some(bad) = v.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::Config(format!("sweep rp values must be > 0, got {bad}")));
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_points: usize,
    /// Simulated time in units of `1/rp`.
    pub horizon: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_N_POINTS,
            horizon: DEFAULT_HORIZON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbmConfig {
    pub rm: f64,
    pub lattice_side: usize,
    pub n_replicates: usize,
    pub dump_replicates: bool,
}

impl Default for AbmConfig {
    fn default() -> Self {
        Self {
            rm: 1.0,
            lattice_side: crate::abm::DEFAULT_SIDE,
            n_replicates: crate::abm::DEFAULT_REPLICATES,
            dump_replicates: false,
        }
    }
}

/// `"all"`, `"ten-point"`, `"five-point"` or an explicit list of rp values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignSpec {
    Named(String),
    List(Vec<f64>),
}

impl Default for DesignSpec {
    fn default() -> Self {
        DesignSpec::Named("all".into())
    }
}

impl DesignSpec {
    pub fn design(&self) -> Result<Design> {
        match self {
            DesignSpec::Named(n) => match n.as_str() {
                "all" => Ok(Design::All),
                "ten-point" => Ok(Design::TenPoint),
                "five-point" => Ok(Design::FivePoint),
                other => Err(Error::Config(format!(
                    "unknown design `{other}` (expected all, ten-point, five-point or a list)"
                ))),
            },
            DesignSpec::List(v) => Ok(Design::List(v.iter().map(|x| tidy(*x)).collect())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnMode {
    Oat,
    Es,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnConfig {
    pub design: DesignSpec,
    pub modes: Vec<LearnMode>,
    pub max_degree: usize,
    pub smooth_window: Option<usize>,
    pub interpolation: Interpolation,
    pub oat_threshold: f64,
    pub es_threshold: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_count: usize,
    pub n_splits: usize,
    pub train_fraction: f64,
    pub refit: RefitObjective,
    /// Backward elimination after the refit; `prune_resolution` is the
    /// relative SSE floor used by it.
    pub prune: bool,
    pub prune_resolution: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            design: DesignSpec::default(),
            modes: vec![LearnMode::Oat, LearnMode::Es],
            max_degree: crate::ode::MAX_DEGREE,
            smooth_window: None,
            interpolation: Interpolation::Polynomial,
            oat_threshold: OAT_THRESHOLD,
            es_threshold: ES_THRESHOLD,
            lambda_min: 1e-9,
            lambda_max: 1e-1,
            lambda_count: 100,
            n_splits: 10,
            train_fraction: 0.8,
            refit: RefitObjective::ForwardSse,
            prune: true,
            prune_resolution: 1e-6,
        }
    }
}

impl LearnConfig {
    pub fn protocol(&self, threshold: f64, seed: u64) -> CvProtocol {
        CvProtocol {
            n_splits: self.n_splits,
            train_fraction: self.train_fraction,
            lambda_grid: log_grid(self.lambda_min, self.lambda_max, self.lambda_count),
            refit: self.refit,
            prune_resolution: self.prune.then_some(self.prune_resolution),
            ..CvProtocol::with_threshold(threshold, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub models: Vec<ModelKind>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            models: vec![ModelKind::Oat, ModelKind::Es, ModelKind::Meanfield],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferConfig {
    pub sweep: SweepSpec,
    pub n_noisy: usize,
    pub bounds: [f64; 2],
    pub models: Vec<ModelKind>,
    /// rp values whose nearest sweep rows go into the summary table.
    pub summary_rp: Vec<f64>,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            sweep: SweepSpec::linspace(0.01, 5.0, 50),
            n_noisy: 10,
            bounds: [DEFAULT_BOUNDS.0, DEFAULT_BOUNDS.1],
            models: vec![ModelKind::Meanfield, ModelKind::Es, ModelKind::Oat],
            summary_rp: vec![0.01, 2.51, 4.91],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.ic > 0.0 && self.ic < 1.0) {
            return bad(format!("ic must lie in (0, 1), got {}", self.ic));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if self.source == Source::Abm && self.sigma != 0.0 {
            return bad("sigma applies to mean-field data only".into());
        }
        self.sweep.values()?;
        if self.grid.n_points < 10 {
            return bad("grid.n_points must be >= 10".into());
        }
        if !(self.grid.horizon > 0.0 && self.grid.horizon.is_finite()) {
            return bad("grid.horizon must be > 0".into());
        }
        if !(self.abm.rm >= 0.0) || self.abm.lattice_side < 2 || self.abm.n_replicates == 0 {
            return bad("abm needs rm >= 0, lattice_side >= 2 and n_replicates >= 1".into());
        }
        let l = &self.learn;
        l.design.design()?;
        if l.modes.is_empty() {
            return bad("learn.modes is empty".into());
        }
        if !(1..=crate::ode::MAX_DEGREE).contains(&l.max_degree) {
            return bad(format!("learn.max_degree must lie in [1, {}]", crate::ode::MAX_DEGREE));
        }
        if !(l.lambda_min > 0.0 && l.lambda_max > l.lambda_min && l.lambda_count >= 1) {
            return bad("learn needs 0 < lambda_min < lambda_max and lambda_count >= 1".into());
        }
        l.protocol(l.oat_threshold, 0).validate()?;
        l.protocol(l.es_threshold, 0).validate()?;
        if let Some(w) = l.smooth_window {
            if w != 0 && (w < 3 || w % 2 == 0) {
                return bad("learn.smooth_window must be 0 or an odd number >= 3".into());
            }
        }
        let inf = &self.infer;
        inf.sweep.values()?;
        if inf.n_noisy == 0 {
            return bad("infer.n_noisy must be >= 1".into());
        }
        if !(inf.bounds[0] > 0.0 && inf.bounds[1] > inf.bounds[0]) {
            return bad("infer.bounds must satisfy 0 < lo < hi".into());
        }
        Ok(())
    }

    /// The full list of rp values to simulate: the sweep plus any training
    /// design values not already in it.
    pub fn generate_rp(&self) -> Result<Vec<f64>> {
        let mut v = self.sweep.values()?;
        if let Some(extra) = self.learn.design.design()?.rp_values() {
            for rp in extra {
                if !v.iter().any(|x| (x - rp).abs() <= 1e-9 * rp.max(1.0)) {
                    v.push(tidy(rp));
                }
            }
        }
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// `output_dir` resolved against the output root, if one is set.
    pub fn output_path(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    /// SHA-256 of the canonical JSON form of the configuration, leaving out
    /// the output location.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(&RunConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        })
        .expect("config serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}
