//! Learning one model per experiment and interpolating its coefficients in
//! `rp` (one-at-a-time), or learning a single model with `rp` embedded in
//! the library (embedded structure). Both produce a [`ParameterizedModel`].

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::LibrarySpec;
use crate::numderiv::DerivativeOptions;
use crate::ode::{forward_dense, IntegrateOptions, MAX_DEGREE};
use crate::rng::derive_seed;
use crate::series::TimeSeries;
use crate::sparse::{learn, majority_mask, CvProtocol, LearnOutcome, LearningData, SparseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Mfm,
    Abm,
}

impl Source {
    /// Derivative defaults: central differences for mean-field data, smoothed
    /// forward differences for agent-based data.
    pub fn derivative_options(self, n_points: usize) -> DerivativeOptions {
        match self {
            Source::Mfm => DerivativeOptions::mean_field(),
            Source::Abm => DerivativeOptions::agent_based(n_points),
        }
    }
}

/// Which experiments of a sweep are used for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    All,
    List(Vec<f64>),
    TenPoint,
    FivePoint,
}

impl Design {
    /// The requested rp values, or `None` for every experiment.
    pub fn rp_values(&self) -> Option<Vec<f64>> {
        match self {
            Design::All => None,
            Design::List(v) => Some(v.clone()),
            Design::TenPoint => Some((0..10).map(|k| 0.01 + 0.5 * k as f64).collect()),
            Design::FivePoint => Some((0..5).map(|k| 0.01 + k as f64).collect()),
        }
    }
}

/// Trajectories at increasing proliferation rates sharing one initial density.
#[derive(Debug, Clone)]
pub struct ExperimentSet {
    pub experiments: Vec<(f64, TimeSeries)>,
    pub ic: f64,
    pub source: Source,
    pub sigma: f64,
    pub n_replicates: Option<usize>,
    pub seeds: Vec<u64>,
}

impl ExperimentSet {
    pub fn new(experiments: Vec<(f64, TimeSeries)>, ic: f64, source: Source) -> Result<Self> {
        if experiments.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter(
                "experiment rp values must be strictly increasing".into(),
            ));
        }
        if let Some((rp, _)) = experiments.iter().find(|(rp, _)| !(*rp > 0.0 && rp.is_finite())) {
            return Err(Error::InvalidParameter(format!("rp must be > 0, got {rp}")));
        }
        if let Some((rp, _)) = experiments.iter().find(|(_, ts)| ts.is_empty()) {
            return Err(Error::InvalidParameter(format!("experiment at rp={rp} is empty")));
        }
        Ok(Self {
            experiments,
            ic,
            source,
            sigma: 0.0,
            n_replicates: None,
            seeds: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.experiments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experiments.is_empty()
    }

    pub fn rp_values(&self) -> Vec<f64> {
        self.experiments.iter().map(|(rp, _)| *rp).collect()
    }

    /// Experiments whose rp matches one of the design values.
    pub fn subset(&self, design: &Design) -> Result<Self> {
        let Some(wanted) = design.rp_values() else {
            return Ok(self.clone());
        };
        let mut picked = Vec::with_capacity(wanted.len());
        for rp in wanted {
            let hit = self
                .experiments
                .iter()
                .find(|(r, _)| (r - rp).abs() <= 1e-9 * rp.abs().max(1.0))
                .ok_or_else(|| {
                    Error::Precondition(format!("design rp {rp} is not in the experiment set"))
                })?;
            picked.push(hit.clone());
        }
        picked.sort_by(|a, b| a.0.total_cmp(&b.0));
        picked.dedup_by(|a, b| a.0 == b.0);
        let mut out = Self::new(picked, self.ic, self.source)?;
        out.sigma = self.sigma;
        out.n_replicates = self.n_replicates;
        out.seeds = self.seeds.clone();
        Ok(out)
    }

    fn derivative_options(&self, window: Option<usize>) -> DerivativeOptions {
        let n = self.experiments.first().map_or(0, |(_, ts)| ts.len());
        let mut opts = self.source.derivative_options(n);
        if let Some(w) = window {
            opts.smooth_window = w;
        }
        opts
    }
}

/// Options shared by both learning modes.
#[derive(Debug, Clone)]
pub struct LearnSettings {
    pub max_degree: usize,
    /// Overrides the source's default smoothing window.
    pub smooth_window: Option<usize>,
    pub interpolation: Interpolation,
}

impl Default for LearnSettings {
    fn default() -> Self {
        Self {
            max_degree: MAX_DEGREE,
            smooth_window: None,
            interpolation: Interpolation::Polynomial,
        }
    }
}

/// Outcome of learning on one experiment.
#[derive(Debug, Clone)]
pub struct OatRecord {
    pub rp: f64,
    pub outcome: std::result::Result<LearnOutcome, String>,
}

impl OatRecord {
    pub fn model(&self) -> Option<&SparseModel> {
        self.outcome.as_ref().ok().map(|o| &o.model)
    }
}

/// Learns every experiment independently. Failures stay attached to their
/// experiment. Each experiment's split seed is derived from its rp, so
/// results do not depend on the order or number of experiments.
pub fn oat_learn(
    set: &ExperimentSet,
    protocol: &CvProtocol,
    settings: &LearnSettings,
) -> Result<Vec<OatRecord>> {
    if set.len() < 2 {
        return Err(Error::Precondition(format!(
            "one-at-a-time learning needs at least 2 experiments, got {}",
            set.len()
        )));
    }
    protocol.validate()?;
    let deriv = set.derivative_options(settings.smooth_window);
    deriv.validate()?;
    let library = LibrarySpec::plain(settings.max_degree);
    library.validate()?;
    Ok(set
        .experiments
        .par_iter()
        .map(|(rp, ts)| {
            let proto = CvProtocol {
                seed: derive_seed(protocol.seed, &[rp.to_bits()]),
                ..protocol.clone()
            };
            let outcome = LearningData::new(&[(*rp, ts)], library, &deriv)
                .and_then(|data| learn(&data, &proto, Some(*rp)))
                .map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                log::warn!("rp={rp}: {e}");
            }
            OatRecord { rp: *rp, outcome }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Polynomial,
    Spline,
}

/// Natural cubic spline, extended linearly outside its knots.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(Error::InvalidParameter(
                "spline needs at least 2 knots with one value each".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("spline knots must increase".into()));
        }
        // Tridiagonal solve for the interior second derivatives.
        let mut second = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            let mut upper = vec![0.0; m];
            for i in 0..m {
                let (h0, h1) = (knots[i + 1] - knots[i], knots[i + 2] - knots[i + 1]);
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0
                    * ((values[i + 2] - values[i + 1]) / h1 - (values[i + 1] - values[i]) / h0);
            }
            for i in 1..m {
                let w = upper[i - 1] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - upper[i] * second[i + 2]) / diag[i];
            }
        }
        Ok(Self {
            knots,
            values,
            second,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn slope(&self, i: usize, at_right: bool) -> f64 {
        let h = self.knots[i + 1] - self.knots[i];
        let base = (self.values[i + 1] - self.values[i]) / h;
        if at_right {
            base + h * (self.second[i] + 2.0 * self.second[i + 1]) / 6.0
        } else {
            base - h * (2.0 * self.second[i] + self.second[i + 1]) / 6.0
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return self.values[0] + (x - self.knots[0]) * self.slope(0, false);
        }
        if x >= self.knots[n - 1] {
            return self.values[n - 1] + (x - self.knots[n - 1]) * self.slope(n - 2, true);
        }
        let i = self.knots.partition_point(|k| *k <= x) - 1;
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - x) / h;
        let b = (x - self.knots[i]) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }
}

/// A coefficient as a function of rp.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientFn {
    /// `c0 + c1 rp + c2 rp^2 + c3 rp^3`.
    Polynomial([f64; 4]),
    Spline(NaturalSpline),
}

impl CoefficientFn {
    pub fn eval(&self, rp: f64) -> f64 {
        match self {
            CoefficientFn::Polynomial(c) => ((c[3] * rp + c[2]) * rp + c[1]) * rp + c[0],
            CoefficientFn::Spline(s) => s.eval(rp),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Oat,
    Es,
    Meanfield,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Oat => "oat",
            ModelKind::Es => "es",
            ModelKind::Meanfield => "meanfield",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeFunction {
    pub degree: usize,
    pub coefficient: CoefficientFn,
}

/// `dC/dt = sum_i xi_i(rp) C^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterizedModel {
    pub kind: ModelKind,
    pub degrees: Vec<DegreeFunction>,
    pub retained_rp: Vec<f64>,
    pub discarded_rp: Vec<f64>,
}

impl ParameterizedModel {
    pub fn meanfield() -> Self {
        Self {
            kind: ModelKind::Meanfield,
            degrees: vec![
                DegreeFunction {
                    degree: 1,
                    coefficient: CoefficientFn::Polynomial([0.0, 0.5, 0.0, 0.0]),
                },
                DegreeFunction {
                    degree: 2,
                    coefficient: CoefficientFn::Polynomial([0.0, -1.0, 0.0, 0.0]),
                },
            ],
            retained_rp: Vec::new(),
            discarded_rp: Vec::new(),
        }
    }

    /// Wraps an embedded-library model: each coefficient is `xi_k * rp`.
    pub fn from_embedded(model: &SparseModel, retained_rp: Vec<f64>) -> Result<Self> {
        if !model.library.embed_rp {
            return Err(Error::InvalidParameter(
                "embedded-structure models need an rp-embedded library".into(),
            ));
        }
        Ok(Self {
            kind: ModelKind::Es,
            degrees: model
                .terms()
                .into_iter()
                .map(|(degree, xi)| DegreeFunction {
                    degree,
                    coefficient: CoefficientFn::Polynomial([0.0, xi, 0.0, 0.0]),
                })
                .collect(),
            retained_rp,
            discarded_rp: Vec::new(),
        })
    }

    /// Dense per-degree coefficients at `rp` (index `k-1` for `C^k`).
    pub fn coefficients_at(&self, rp: f64) -> Vec<f64> {
        let top = self.degrees.iter().map(|d| d.degree).max().unwrap_or(0);
        let mut out = vec![0.0; top];
        for d in &self.degrees {
            out[d.degree - 1] += d.coefficient.eval(rp);
        }
        out
    }

    pub fn describe_at(&self, rp: f64) -> String {
        let body: Vec<String> = self
            .degrees
            .iter()
            .map(|d| format!("{:+.4} C^{}", d.coefficient.eval(rp), d.degree))
            .collect();
        format!("[{}] rp={rp}: dC/dt = {}", self.kind.name(), body.join(" "))
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            kind: self.kind,
            degrees: self
                .degrees
                .iter()
                .map(|d| match &d.coefficient {
                    CoefficientFn::Polynomial(c) => DegreeDoc {
                        degree: d.degree,
                        coeff_poly_in_rp: Some(*c),
                        spline: None,
                    },
                    CoefficientFn::Spline(s) => DegreeDoc {
                        degree: d.degree,
                        coeff_poly_in_rp: None,
                        spline: Some(SplineDoc {
                            knots: s.knots.clone(),
                            values: s.values.clone(),
                        }),
                    },
                })
                .collect(),
            retained_rp: self.retained_rp.clone(),
            discarded_rp: self.discarded_rp.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("bad model document: {e}")))?;
        let mut degrees = Vec::with_capacity(doc.degrees.len());
        for d in doc.degrees {
            if !(1..=MAX_DEGREE).contains(&d.degree) {
                return Err(Error::Config(format!("degree {} out of range", d.degree)));
            }
            let coefficient = match (d.coeff_poly_in_rp, d.spline) {
                (Some(c), None) => CoefficientFn::Polynomial(c),
                (None, Some(s)) => CoefficientFn::Spline(NaturalSpline::new(s.knots, s.values)?),
                _ => {
                    return Err(Error::Config(format!(
                        "degree {} needs exactly one of coeff_poly_in_rp or spline",
                        d.degree
                    )))
                }
            };
            degrees.push(DegreeFunction {
                degree: d.degree,
                coefficient,
            });
        }
        degrees.sort_by_key(|d| d.degree);
        if degrees.windows(2).any(|w| w[0].degree == w[1].degree) {
            return Err(Error::Config("duplicate degree in model document".into()));
        }
        Ok(Self {
            kind: doc.kind,
            degrees,
            retained_rp: doc.retained_rp,
            discarded_rp: doc.discarded_rp,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    kind: ModelKind,
    degrees: Vec<DegreeDoc>,
    #[serde(default)]
    retained_rp: Vec<f64>,
    #[serde(default)]
    discarded_rp: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DegreeDoc {
    degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeff_poly_in_rp: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spline: Option<SplineDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplineDoc {
    knots: Vec<f64>,
    values: Vec<f64>,
}

/// Least-squares polynomial coefficients (lowest power first) of degree
/// `deg` through `(x, y)`, via Householder QR on the Vandermonde matrix.
pub fn polyfit(x: &[f64], y: &[f64], deg: usize) -> Result<Vec<f64>> {
    let m = x.len();
    let p = deg + 1;
    if y.len() != m || m < p {
        return Err(Error::InvalidParameter(format!(
            "polynomial fit of degree {deg} needs at least {p} points, got {m}"
        )));
    }
    // Column-major Vandermonde.
    let mut a: Vec<Vec<f64>> = (0..p)
        .map(|j| x.iter().map(|xi| xi.powi(j as i32)).collect())
        .collect();
    let mut b = y.to_vec();
    let scale: Vec<f64> = a.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    for k in 0..p {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale[k] || norm == 0.0 {
            return Err(Error::InvalidParameter(
                "polynomial fit is rank deficient (repeated x values)".into(),
            ));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        if vv > 0.0 {
            for col in a.iter_mut().skip(k) {
                let s = 2.0 * v.iter().zip(&col[k..]).map(|(p, q)| p * q).sum::<f64>() / vv;
                col[k..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= s * vi);
            }
            let s = 2.0 * v.iter().zip(&b[k..]).map(|(p, q)| p * q).sum::<f64>() / vv;
            b[k..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= s * vi);
        }
    }
    let mut coef = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| a[j][k] * coef[j]).sum();
        coef[k] = (b[k] - s) / a[k][k];
    }
    Ok(coef)
}

/// Keeps the models with the majority structure and interpolates each active
/// coefficient across their rp values.
pub fn oat_interpolate(models: &[(f64, SparseModel)], mode: Interpolation) -> Result<ParameterizedModel> {
    if models.len() < 2 {
        return Err(Error::Precondition(format!(
            "interpolation needs at least 2 models, got {}",
            models.len()
        )));
    }
    let masks: Vec<Vec<bool>> = models.iter().map(|(_, m)| m.structure.clone()).collect();
    let (structure, count) = majority_mask(&masks)
        .ok_or_else(|| Error::Precondition("no models to interpolate".into()))?;
    if count < 2 {
        return Err(Error::NoGeneralizableStructure { count });
    }
    let mut retained: Vec<&(f64, SparseModel)> =
        models.iter().filter(|(_, m)| m.structure == structure).collect();
    retained.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut discarded: Vec<f64> = models
        .iter()
        .filter(|(_, m)| m.structure != structure)
        .map(|(rp, _)| *rp)
        .collect();
    discarded.sort_by(f64::total_cmp);

    let xs: Vec<f64> = retained.iter().map(|(rp, _)| *rp).collect();
    let deg = (retained.len() - 1).min(3);
    let active = retained[0].1.active_degrees();
    let mut degrees = Vec::with_capacity(active.len());
    for (k, &degree) in active.iter().enumerate() {
        let ys: Vec<f64> = retained.iter().map(|(_, m)| m.coefficients[k]).collect();
        let coefficient = match mode {
            Interpolation::Polynomial => {
                let c = polyfit(&xs, &ys, deg)?;
                let mut padded = [0.0; 4];
                padded[..c.len()].copy_from_slice(&c);
                CoefficientFn::Polynomial(padded)
            }
            Interpolation::Spline => CoefficientFn::Spline(NaturalSpline::new(xs.clone(), ys)?),
        };
        degrees.push(DegreeFunction {
            degree,
            coefficient,
        });
    }
    Ok(ParameterizedModel {
        kind: ModelKind::Oat,
        degrees,
        retained_rp: xs,
        discarded_rp: discarded,
    })
}

/// OAT learning followed by interpolation over the successful experiments.
pub fn oat_model(
    records: &[OatRecord],
    mode: Interpolation,
) -> Result<ParameterizedModel> {
    let ok: Vec<(f64, SparseModel)> = records
        .iter()
        .filter_map(|r| r.model().map(|m| (r.rp, m.clone())))
        .collect();
    let failed: Vec<f64> = records
        .iter()
        .filter(|r| r.outcome.is_err())
        .map(|r| r.rp)
        .collect();
    let mut model = oat_interpolate(&ok, mode)?;
    model.discarded_rp.extend(failed);
    model.discarded_rp.sort_by(f64::total_cmp);
    Ok(model)
}

/// Joint learning over all experiments with the rp-embedded library.
pub fn es_learn(
    set: &ExperimentSet,
    protocol: &CvProtocol,
    settings: &LearnSettings,
) -> Result<(ParameterizedModel, LearnOutcome)> {
    if set.len() < 2 {
        return Err(Error::Precondition(format!(
            "embedded-structure learning needs at least 2 experiments, got {}",
            set.len()
        )));
    }
    let deriv = set.derivative_options(settings.smooth_window);
    let stacked: Vec<(f64, &TimeSeries)> = set.experiments.iter().map(|(rp, ts)| (*rp, ts)).collect();
    let data = LearningData::new(&stacked, LibrarySpec::embedded(settings.max_degree), &deriv)?;
    let outcome = learn(&data, protocol, None)?;
    let model = ParameterizedModel::from_embedded(&outcome.model, set.rp_values())?;
    Ok((model, outcome))
}

/// Forward-solves the model at `rp` from `c0` on `grid`.
pub fn predict(
    model: &ParameterizedModel,
    rp: f64,
    c0: f64,
    grid: &[f64],
    opts: &IntegrateOptions,
) -> Result<TimeSeries> {
    if !(rp > 0.0 && rp.is_finite()) {
        return Err(Error::InvalidParameter(format!("rp must be > 0, got {rp}")));
    }
    let values = forward_dense(&model.coefficients_at(rp), c0, grid, opts)?;
    TimeSeries::new(grid.to_vec(), values)
}

/// Mean squared error between a forward solve started at the observed first
/// sample and the observations. Divergence gives `+inf`.
pub fn mse_against(model: &ParameterizedModel, rp: f64, observed: &TimeSeries, opts: &IntegrateOptions) -> f64 {
    let Some(c0) = observed.first_value() else {
        return f64::NAN;
    };
    match predict(model, rp, c0, &observed.times, opts) {
        Ok(pred) => {
            pred.values
                .iter()
                .zip(&observed.values)
                .map(|(p, o)| (p - o).powi(2))
                .sum::<f64>()
                / observed.len() as f64
        }
        Err(_) => f64::INFINITY,
    }
}

/// Per-rp MSE of `model` on every experiment of `set`.
pub fn evaluate_generalization(
    model: &ParameterizedModel,
    set: &ExperimentSet,
    opts: &IntegrateOptions,
) -> Vec<(f64, f64)> {
    set.experiments
        .par_iter()
        .map(|(rp, ts)| (*rp, mse_against(model, *rp, ts, opts)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub rp: f64,
    pub oat: Option<f64>,
    pub es: Option<f64>,
    pub meanfield: f64,
    /// MSE of the experiment's own one-at-a-time model, when one was learned.
    pub oat_single: Option<f64>,
}

/// The MSE table comparing all available models on every experiment.
pub fn mse_table(
    set: &ExperimentSet,
    oat: Option<&ParameterizedModel>,
    es: Option<&ParameterizedModel>,
    singles: &[(f64, SparseModel)],
    opts: &IntegrateOptions,
) -> Vec<MseRow> {
    let meanfield = ParameterizedModel::meanfield();
    set.experiments
        .par_iter()
        .map(|(rp, ts)| {
            let single = singles
                .iter()
                .find(|(r, _)| r == rp)
                .and_then(|(_, m)| {
                    let c0 = ts.first_value()?;
                    let v = forward_dense(&m.dense_coefficients(), c0, &ts.times, opts).ok();
                    Some(v.map_or(f64::INFINITY, |v| {
                        v.iter()
                            .zip(&ts.values)
                            .map(|(p, o)| (p - o).powi(2))
                            .sum::<f64>()
                            / ts.len() as f64
                    }))
                });
            MseRow {
                rp: *rp,
                oat: oat.map(|m| mse_against(m, *rp, ts, opts)),
                es: es.map(|m| mse_against(m, *rp, ts, opts)),
                meanfield: mse_against(&meanfield, *rp, ts, opts),
                oat_single: single,
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn mse_csv(rows: &[MseRow]) -> String {
    let mut out = String::from("rp,mse_oat,mse_es,mse_meanfield,mse_oat_single\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.rp,
            cell(r.oat),
            cell(r.es),
            r.meanfield,
            cell(r.oat_single)
        );
    }
    out
}
