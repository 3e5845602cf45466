//! ℓ1-regularized regression of estimated derivatives onto a term library,
//! with cross-validated AIC selection of the regularization strength, a
//! coefficient-magnitude guard, majority-vote structure selection and a
//! Nelder–Mead refit of the chosen structure.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{build_theta, DesignMatrix, LibrarySpec};
use crate::numderiv::{differentiate, DerivativeOptions};
use crate::ode::{forward_dense, IntegrateOptions, MAX_DEGREE};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::rng::{derive_seed, rng_from_seed};
use crate::series::TimeSeries;

/// Floor applied to the SSE inside the AIC logarithm.
pub const SSE_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Stop when no coefficient moved more than this in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Normal-equation form `(X^T X, X^T y, y^T y)` of a least-squares problem.
#[derive(Debug, Clone)]
pub struct Gram {
    p: usize,
    g: Vec<f64>,
    b: Vec<f64>,
    yy: f64,
}

impl Gram {
    pub fn new(theta: &DesignMatrix, y: &[f64]) -> Result<Self> {
        Self::from_rows(theta, y, 0..theta.rows)
    }

    pub fn from_rows(
        theta: &DesignMatrix,
        y: &[f64],
        rows: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        if theta.rows != y.len() {
            return Err(Error::InvalidParameter(format!(
                "design matrix has {} rows but target has {}",
                theta.rows,
                y.len()
            )));
        }
        let p = theta.cols;
        let mut g = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        let mut yy = 0.0;
        for r in rows {
            let x = theta.row(r);
            let yr = y[r];
            if !yr.is_finite() || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("regression data"));
            }
            yy += yr * yr;
            for i in 0..p {
                b[i] += x[i] * yr;
                for j in i..p {
                    g[i * p + j] += x[i] * x[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                g[i * p + j] = g[j * p + i];
            }
        }
        Ok(Self { p, g, b, yy })
    }

    /// `||y - X xi||^2 + lambda |xi|_1`.
    pub fn objective(&self, xi: &[f64], lambda: f64) -> f64 {
        let p = self.p;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..p {
            lin += self.b[i] * xi[i];
            let mut row = 0.0;
            for j in 0..p {
                row += self.g[i * p + j] * xi[j];
            }
            quad += xi[i] * row;
        }
        self.yy - 2.0 * lin + quad + lambda * xi.iter().map(|v| v.abs()).sum::<f64>()
    }
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on the Gram form. `trace` receives the
/// objective after every sweep when provided.
pub fn coordinate_descent(
    gram: &Gram,
    lambda: f64,
    start: Option<&[f64]>,
    opts: &LassoOptions,
    trace: Option<&mut Vec<f64>>,
) -> LassoFit {
    macro_rules! dispatch {
        ($($n:literal)*) => {
            match gram.p {
                $($n => cd_fixed::<$n>(gram, lambda, start, opts, trace),)*
                _ => cd_fixed::<{ MAX_DEGREE }>(gram, lambda, start, opts, trace),
            }
        };
    }
    if gram.p > MAX_DEGREE {
        return cd_dynamic(gram, lambda, start, opts, trace);
    }
    dispatch!(0 1 2 3 4 5 6 7 8 9 10)
}

// Fixed-size copy of the Gram data so the inner loops unroll.
fn cd_fixed<const P: usize>(
    gram: &Gram,
    lambda: f64,
    start: Option<&[f64]>,
    opts: &LassoOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> LassoFit {
    let mut g = [[0.0; P]; P];
    for (i, row) in g.iter_mut().enumerate() {
        row.copy_from_slice(&gram.g[i * P..(i + 1) * P]);
    }
    let mut b = [0.0; P];
    b.copy_from_slice(&gram.b);
    let mut xi = [0.0; P];
    if let Some(s) = start.filter(|s| s.len() == P) {
        xi.copy_from_slice(s);
    }
    let mut gx = [0.0; P];
    for i in 0..P {
        for j in 0..P {
            gx[i] += g[i][j] * xi[j];
        }
    }
    let half = 0.5 * lambda;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_delta = 0.0_f64;
        for k in 0..P {
            let gkk = g[k][k];
            let old = xi[k];
            let new = if gkk > 0.0 {
                soft_threshold(b[k] - (gx[k] - gkk * old), half) / gkk
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                xi[k] = new;
                for (acc, c) in gx.iter_mut().zip(&g[k]) {
                    *acc += delta * c;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(gram.objective(&xi, lambda));
        }
        if max_delta < opts.tol {
            converged = true;
            break;
        }
    }
    LassoFit {
        coefficients: xi.to_vec(),
        sweeps,
        converged,
    }
}

fn cd_dynamic(
    gram: &Gram,
    lambda: f64,
    start: Option<&[f64]>,
    opts: &LassoOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> LassoFit {
    let p = gram.p;
    let mut xi = match start {
        Some(s) if s.len() == p => s.to_vec(),
        _ => vec![0.0; p],
    };
    let mut gx = vec![0.0; p];
    for i in 0..p {
        for j in 0..p {
            gx[i] += gram.g[i * p + j] * xi[j];
        }
    }
    let half = 0.5 * lambda;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_delta = 0.0_f64;
        for k in 0..p {
            let gkk = gram.g[k * p + k];
            let old = xi[k];
            let new = if gkk > 0.0 {
                soft_threshold(gram.b[k] - (gx[k] - gkk * old), half) / gkk
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                xi[k] = new;
                let col = &gram.g[k * p..(k + 1) * p];
                for (acc, c) in gx.iter_mut().zip(col) {
                    *acc += delta * c;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(gram.objective(&xi, lambda));
        }
        if max_delta < opts.tol {
            converged = true;
            break;
        }
    }
    LassoFit {
        coefficients: xi,
        sweeps,
        converged,
    }
}

/// Minimizes `||dcdt - theta xi||_2^2 + lambda |xi|_1`.
pub fn lasso(theta: &DesignMatrix, dcdt: &[f64], lambda: f64) -> Result<Vec<f64>> {
    Ok(lasso_with(theta, dcdt, lambda, &LassoOptions::default())?.coefficients)
}

pub fn lasso_with(
    theta: &DesignMatrix,
    dcdt: &[f64],
    lambda: f64,
    opts: &LassoOptions,
) -> Result<LassoFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let gram = Gram::new(theta, dcdt)?;
    Ok(coordinate_descent(&gram, lambda, None, opts, None))
}

/// `n ln(sse / n) + 2k`, with the SSE floored at [`SSE_FLOOR`].
pub fn aic_score(sse: f64, n: usize, k: usize) -> f64 {
    if sse.is_nan() || sse == f64::INFINITY {
        return f64::INFINITY;
    }
    let n = n as f64;
    n * (sse.max(SSE_FLOOR) / n).ln() + 2.0 * k as f64
}

/// Which objective the post-selection refit minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitObjective {
    /// SSE between forward-solved trajectories and the data.
    ForwardSse,
    /// Residual `||dC/dt - theta xi||^2` on the structure's columns.
    DerivativeResidual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvProtocol {
    pub n_splits: usize,
    pub train_fraction: f64,
    /// Strictly increasing.
    pub lambda_grid: Vec<f64>,
    pub coeff_threshold: f64,
    pub seed: u64,
    pub refit: RefitObjective,
    pub lasso: LassoOptions,
    pub nelder_mead: NelderMeadOptions,
    pub integrate: IntegrateOptions,
    /// Relative resolution for post-refit term pruning; `None` disables it.
    pub prune_resolution: Option<f64>,
}

pub const OAT_THRESHOLD: f64 = 100.0;
pub const ES_THRESHOLD: f64 = 20.0;

/// `count` log-spaced values from `lo` to `hi`, increasing.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

impl CvProtocol {
    pub fn with_threshold(coeff_threshold: f64, seed: u64) -> Self {
        Self {
            n_splits: 10,
            train_fraction: 0.8,
            lambda_grid: log_grid(1e-9, 1e-1, 100),
            coeff_threshold,
            seed,
            refit: RefitObjective::ForwardSse,
            lasso: LassoOptions::default(),
            nelder_mead: NelderMeadOptions::default(),
            integrate: IntegrateOptions::default(),
            prune_resolution: Some(1e-6),
        }
    }

    /// Per-experiment protocol (coefficient guard 100).
    pub fn oat(seed: u64) -> Self {
        Self::with_threshold(OAT_THRESHOLD, seed)
    }

    /// Joint embedded-library protocol (coefficient guard 20).
    pub fn es(seed: u64) -> Self {
        Self::with_threshold(ES_THRESHOLD, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_splits == 0 {
            return Err(Error::InvalidParameter("n_splits must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter("train_fraction must lie in (0, 1)".into()));
        }
        if self.lambda_grid.is_empty()
            || self.lambda_grid.windows(2).any(|w| !(w[1] > w[0]))
            || self.lambda_grid[0] < 0.0
        {
            return Err(Error::InvalidParameter(
                "lambda grid must be non-empty, non-negative and strictly increasing".into(),
            ));
        }
        if !(self.coeff_threshold > 0.0) {
            return Err(Error::InvalidParameter("coefficient threshold must be > 0".into()));
        }
        if let Some(r) = self.prune_resolution {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidParameter("prune resolution must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// One experiment prepared for learning.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub rp: f64,
    pub series: TimeSeries,
    pub dcdt: Vec<f64>,
}

/// Stacked regression problem over one or more experiments.
#[derive(Debug, Clone)]
pub struct LearningData {
    pub library: LibrarySpec,
    pub experiments: Vec<ExperimentData>,
    pub theta: DesignMatrix,
    pub target: Vec<f64>,
    /// `(experiment, sample)` for every stacked row.
    pub row_owner: Vec<(usize, usize)>,
}

impl LearningData {
    pub fn new(
        data: &[(f64, &TimeSeries)],
        library: LibrarySpec,
        deriv: &DerivativeOptions,
    ) -> Result<Self> {
        let theta = build_theta(data, &library)?;
        let mut experiments = Vec::with_capacity(data.len());
        let mut target = Vec::with_capacity(theta.rows);
        let mut row_owner = Vec::with_capacity(theta.rows);
        for (e, &(rp, ts)) in data.iter().enumerate() {
            let d = differentiate(ts, deriv)?;
            target.extend_from_slice(&d.values);
            row_owner.extend((0..ts.len()).map(|i| (e, i)));
            experiments.push(ExperimentData {
                rp,
                series: ts.clone(),
                dcdt: d.values,
            });
        }
        Ok(Self {
            library,
            experiments,
            theta,
            target,
            row_owner,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.theta.rows
    }

    /// Per-degree ODE coefficients for experiment `e` given library weights.
    fn ode_coefficients(&self, e: usize, xi: &[f64]) -> Vec<f64> {
        let scale = if self.library.embed_rp {
            self.experiments[e].rp
        } else {
            1.0
        };
        xi.iter().map(|v| v * scale).collect()
    }

    /// Forward-solves every experiment that owns at least one of `rows`
    /// (or all experiments when `rows` is `None`) and returns the summed
    /// squared error over those rows. Divergence yields `+inf`.
    pub fn forward_sse(&self, xi: &[f64], rows: Option<&[usize]>, opts: &IntegrateOptions) -> f64 {
        let mut per_exp: Vec<Vec<usize>> = vec![Vec::new(); self.experiments.len()];
        match rows {
            Some(rs) => {
                for &r in rs {
                    let (e, i) = self.row_owner[r];
                    per_exp[e].push(i);
                }
            }
            None => {
                for (e, exp) in self.experiments.iter().enumerate() {
                    per_exp[e].extend(0..exp.series.len());
                }
            }
        }
        let mut sse = 0.0;
        for (e, samples) in per_exp.iter().enumerate() {
            if samples.is_empty() {
                continue;
            }
            let exp = &self.experiments[e];
            let c0 = exp.series.values[0];
            let last = *samples.iter().max().unwrap();
            let grid = &exp.series.times[..=last];
            let coeffs = self.ode_coefficients(e, xi);
            match forward_dense(&coeffs, c0, grid, opts) {
                Ok(pred) => {
                    for &i in samples {
                        let r = pred[i] - exp.series.values[i];
                        sse += r * r;
                    }
                }
                Err(_) => return f64::INFINITY,
            }
        }
        sse
    }

    fn derivative_sse(&self, xi: &[f64]) -> f64 {
        (0..self.theta.rows)
            .map(|r| {
                let pred: f64 = self.theta.row(r).iter().zip(xi).map(|(a, b)| a * b).sum();
                (self.target[r] - pred).powi(2)
            })
            .sum()
    }
}

/// One split's fit at one lambda.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitFit {
    pub coefficients: Vec<f64>,
    pub test_sse: f64,
    pub aic: f64,
}

impl SplitFit {
    pub fn mask(&self) -> Vec<bool> {
        self.coefficients.iter().map(|c| *c != 0.0).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRecord {
    pub lambda: f64,
    pub mean_aic: f64,
    pub splits: Vec<SplitFit>,
}

/// Train/test partition of the stacked rows for split `split` at lambda
/// index `lambda_index`.
pub fn split_rows(
    n_rows: usize,
    train_fraction: f64,
    seed: u64,
    lambda_index: usize,
    split: usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n_rows).collect();
    let mut rng = rng_from_seed(derive_seed(seed, &[lambda_index as u64, split as u64]));
    idx.shuffle(&mut rng);
    let n_train = ((n_rows as f64) * train_fraction).round() as usize;
    let n_train = n_train.clamp(1, n_rows.saturating_sub(1).max(1));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Fits every (lambda, split) pair and scores it by AIC of the forward-solved
/// model on that split's test rows.
pub fn cross_validate(data: &LearningData, protocol: &CvProtocol) -> Result<Vec<LambdaRecord>> {
    protocol.validate()?;
    let min_rows = data
        .experiments
        .iter()
        .map(|e| e.series.len())
        .min()
        .unwrap_or(0);
    if min_rows < 10 {
        return Err(Error::TooFewSamples {
            needed: 10,
            got: min_rows,
        });
    }
    let n_lambda = protocol.lambda_grid.len();
    let n_rows = data.n_rows();

    // Each split walks the grid from the largest lambda down, warm-starting
    // from the previous solution. Splits are independent.
    let per_split: Vec<Vec<SplitFit>> = (0..protocol.n_splits)
        .into_par_iter()
        .map(|k| -> Result<Vec<SplitFit>> {
            let mut fits: Vec<Option<SplitFit>> = vec![None; n_lambda];
            let mut warm: Option<Vec<f64>> = None;
            for j in (0..n_lambda).rev() {
                let lambda = protocol.lambda_grid[j];
                let (train, test) =
                    split_rows(n_rows, protocol.train_fraction, protocol.seed, j, k);
                let gram = Gram::from_rows(&data.theta, &data.target, train.iter().copied())?;
                let fit =
                    coordinate_descent(&gram, lambda, warm.as_deref(), &protocol.lasso, None);
                let sse = data.forward_sse(&fit.coefficients, Some(&test), &protocol.integrate);
                let active = fit.coefficients.iter().filter(|c| **c != 0.0).count();
                let aic = aic_score(sse, test.len(), active);
                warm = Some(fit.coefficients.clone());
                fits[j] = Some(SplitFit {
                    coefficients: fit.coefficients,
                    test_sse: sse,
                    aic,
                });
            }
            Ok(fits.into_iter().map(Option::unwrap).collect())
        })
        .collect::<Result<_>>()?;

    Ok((0..n_lambda)
        .map(|j| {
            let splits: Vec<SplitFit> = per_split.iter().map(|s| s[j].clone()).collect();
            let mean_aic = splits.iter().map(|s| s.aic).sum::<f64>() / splits.len() as f64;
            LambdaRecord {
                lambda: protocol.lambda_grid[j],
                mean_aic,
                splits,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSelection {
    /// Index of the chosen lambda in the grid.
    pub index: usize,
    pub lambda: f64,
    /// Index of the mean-AIC minimizer, the lower bound of the search.
    pub argmin_index: usize,
}

/// Smallest lambda at or above the mean-AIC minimizer whose split models all
/// keep `|coefficient| <= threshold`.
pub fn select_lambda(records: &[LambdaRecord], protocol: &CvProtocol) -> Result<LambdaSelection> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no cross-validation records".into()));
    }
    let mut argmin = 0;
    for (j, r) in records.iter().enumerate() {
        if r.mean_aic < records[argmin].mean_aic {
            argmin = j;
        }
    }
    records[argmin..]
        .iter()
        .position(|r| {
            r.splits
                .iter()
                .all(|s| s.max_abs() <= protocol.coeff_threshold)
        })
        .map(|offset| LambdaSelection {
            index: argmin + offset,
            lambda: records[argmin + offset].lambda,
            argmin_index: argmin,
        })
        .ok_or(Error::ThresholdUnsatisfiable {
            threshold: protocol.coeff_threshold,
        })
}

/// Majority mask with ties broken toward fewer active terms, then the
/// lexicographically smaller mask (`false < true`, degree 1 first). The
/// result does not depend on the order of `masks`.
pub fn majority_mask(masks: &[Vec<bool>]) -> Option<(Vec<bool>, usize)> {
    let mut counts: HashMap<&[bool], usize> = HashMap::new();
    for m in masks {
        *counts.entry(m.as_slice()).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|(ma, ca), (mb, cb)| {
            ca.cmp(cb)
                .then_with(|| popcount(mb).cmp(&popcount(ma)))
                .then_with(|| mb.cmp(ma))
        })
        .map(|(m, c)| (m.to_vec(), c))
}

fn popcount(mask: &[bool]) -> usize {
    mask.iter().filter(|b| **b).count()
}

/// One learned ODE over a library.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    pub library: LibrarySpec,
    pub structure: Vec<bool>,
    /// One entry per active term, in degree order.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub rp: Option<f64>,
    pub fit_sse: f64,
    /// False when the refit hit its iteration cap.
    pub refit_converged: bool,
}

impl SparseModel {
    pub fn active_degrees(&self) -> Vec<usize> {
        self.structure
            .iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Coefficients expanded to one slot per library column.
    pub fn dense_coefficients(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.structure.len()];
        for (d, c) in self.active_degrees().into_iter().zip(&self.coefficients) {
            out[d - 1] = *c;
        }
        out
    }

    pub fn terms(&self) -> Vec<(usize, f64)> {
        self.active_degrees()
            .into_iter()
            .zip(self.coefficients.iter().copied())
            .collect()
    }

    pub fn describe(&self) -> String {
        if self.coefficients.is_empty() {
            return "dC/dt = 0".into();
        }
        let rp = if self.library.embed_rp { "Rp*" } else { "" };
        let body: Vec<String> = self
            .terms()
            .iter()
            .map(|(d, c)| format!("{c:+.4} {rp}C^{d}"))
            .collect();
        format!("dC/dt = {}", body.join(" "))
    }

    pub fn to_json(&self) -> String {
        let doc = SparseModelDoc {
            library: if self.library.embed_rp {
                LibraryKind::Embedded
            } else {
                LibraryKind::Plain
            },
            max_degree: self.library.max_degree,
            rp: self.rp,
            lambda: self.lambda,
            terms: self
                .terms()
                .into_iter()
                .map(|(degree, coefficient)| TermDoc {
                    degree,
                    coefficient,
                })
                .collect(),
            fit_sse: self.fit_sse,
            refit_converged: self.refit_converged,
        };
        serde_json::to_string_pretty(&doc).expect("sparse model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SparseModelDoc = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("bad sparse model document: {e}")))?;
        let library = LibrarySpec {
            max_degree: doc.max_degree,
            embed_rp: doc.library == LibraryKind::Embedded,
        };
        library.validate()?;
        let mut structure = vec![false; doc.max_degree];
        let mut terms = doc.terms;
        terms.sort_by_key(|t| t.degree);
        for t in &terms {
            if !(1..=doc.max_degree).contains(&t.degree) {
                return Err(Error::Config(format!("term degree {} out of range", t.degree)));
            }
            structure[t.degree - 1] = true;
        }
        Ok(Self {
            library,
            structure,
            coefficients: terms.iter().map(|t| t.coefficient).collect(),
            lambda: doc.lambda,
            rp: doc.rp,
            fit_sse: doc.fit_sse,
            refit_converged: doc.refit_converged,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LibraryKind {
    Plain,
    Embedded,
}

#[derive(Debug, Serialize, Deserialize)]
struct TermDoc {
    degree: usize,
    coefficient: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SparseModelDoc {
    library: LibraryKind,
    max_degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rp: Option<f64>,
    lambda: f64,
    terms: Vec<TermDoc>,
    fit_sse: f64,
    #[serde(default = "default_true")]
    refit_converged: bool,
}

fn default_true() -> bool {
    true
}

/// Picks the majority structure among the splits at the selected lambda,
/// averages the agreeing splits' coefficients and refits them on all data.
pub fn majority_refine(
    record: &LambdaRecord,
    data: &LearningData,
    protocol: &CvProtocol,
    rp: Option<f64>,
) -> Result<SparseModel> {
    let masks: Vec<Vec<bool>> = record.splits.iter().map(SplitFit::mask).collect();
    let (structure, _) = majority_mask(&masks)
        .ok_or_else(|| Error::InvalidParameter("no split models to vote on".into()))?;
    let active: Vec<usize> = structure
        .iter()
        .enumerate()
        .filter(|(_, on)| **on)
        .map(|(i, _)| i)
        .collect();
    let agreeing: Vec<&SplitFit> = record
        .splits
        .iter()
        .filter(|s| s.mask() == structure)
        .collect();
    let start: Vec<f64> = active
        .iter()
        .map(|&i| {
            agreeing.iter().map(|s| s.coefficients[i]).sum::<f64>() / agreeing.len() as f64
        })
        .collect();

    let (mut coefficients, mut converged) = refit(data, protocol, &active, &start);
    let mut structure = structure;
    if let Some(resolution) = protocol.prune_resolution {
        let pruned = prune(data, protocol, resolution, active, coefficients, converged);
        structure = vec![false; data.library.max_degree];
        for &i in &pruned.0 {
            structure[i] = true;
        }
        coefficients = pruned.1;
        converged = pruned.2;
    }
    let fit_sse = data.forward_sse(
        &expand(data.library.max_degree, &active_of(&structure), &coefficients),
        None,
        &protocol.integrate,
    );
    Ok(SparseModel {
        library: data.library,
        structure,
        coefficients,
        lambda: record.lambda,
        rp,
        fit_sse,
        refit_converged: converged,
    })
}

fn active_of(structure: &[bool]) -> Vec<usize> {
    structure
        .iter()
        .enumerate()
        .filter(|(_, on)| **on)
        .map(|(i, _)| i)
        .collect()
}

fn expand(p: usize, active: &[usize], x: &[f64]) -> Vec<f64> {
    let mut xi = vec![0.0; p];
    for (&i, v) in active.iter().zip(x) {
        xi[i] = *v;
    }
    xi
}

fn refit_objective(data: &LearningData, protocol: &CvProtocol, active: &[usize], x: &[f64]) -> f64 {
    if x
        .iter()
        .any(|v| !v.is_finite() || v.abs() > protocol.coeff_threshold)
    {
        return f64::INFINITY;
    }
    let xi = expand(data.library.max_degree, active, x);
    match protocol.refit {
        RefitObjective::ForwardSse => data.forward_sse(&xi, None, &protocol.integrate),
        RefitObjective::DerivativeResidual => data.derivative_sse(&xi),
    }
}

/// Nelder-Mead refit of the active coefficients on all data.
fn refit(
    data: &LearningData,
    protocol: &CvProtocol,
    active: &[usize],
    start: &[f64],
) -> (Vec<f64>, bool) {
    if active.is_empty() {
        return (Vec::new(), true);
    }
    let objective = |x: &[f64]| refit_objective(data, protocol, active, x);
    let res = nelder_mead(objective, start, &protocol.nelder_mead);
    if !res.converged {
        log::debug!(
            "Nelder-Mead refit stopped after {} iterations without converging",
            res.iterations
        );
    }
    // Keep the starting point if the refit could not improve on it.
    if res.fx <= objective(start) {
        (res.x, res.converged)
    } else {
        (start.to_vec(), res.converged)
    }
}

/// Backward elimination on full-data AIC. The SSE is floored at the
/// integrator's resolution so exact data cannot buy terms with roundoff.
fn prune(
    data: &LearningData,
    protocol: &CvProtocol,
    resolution: f64,
    mut active: Vec<usize>,
    mut coefficients: Vec<f64>,
    mut converged: bool,
) -> (Vec<usize>, Vec<f64>, bool) {
    let n = data.n_rows();
    let scale = data
        .experiments
        .iter()
        .flat_map(|e| e.series.values.iter())
        .map(|v| v.abs())
        .sum::<f64>()
        / n as f64;
    let floor = n as f64 * (resolution * scale).powi(2);
    let score = |active: &[usize], x: &[f64]| {
        let sse = refit_objective(data, protocol, active, x);
        if sse.is_finite() {
            aic_score(sse.max(floor), n, active.len())
        } else {
            f64::INFINITY
        }
    };
    let mut current = score(&active, &coefficients);
    while active.len() > 1 {
        let mut best: Option<(f64, Vec<usize>, Vec<f64>, bool)> = None;
        for drop in 0..active.len() {
            let reduced: Vec<usize> = active
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != drop)
                .map(|(_, &i)| i)
                .collect();
            let start: Vec<f64> = coefficients
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != drop)
                .map(|(_, &c)| c)
                .collect();
            let (x, conv) = refit(data, protocol, &reduced, &start);
            let aic = score(&reduced, &x);
            if best.as_ref().is_none_or(|b| aic < b.0) {
                best = Some((aic, reduced, x, conv));
            }
        }
        match best {
            Some((aic, reduced, x, conv)) if aic < current => {
                current = aic;
                active = reduced;
                coefficients = x;
                converged = conv;
            }
            _ => break,
        }
    }
    (active, coefficients, converged)
}

/// Everything produced while learning one model.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub model: SparseModel,
    pub records: Vec<LambdaRecord>,
    pub selection: LambdaSelection,
}

/// Cross-validation, lambda selection and refit in one call.
pub fn learn(data: &LearningData, protocol: &CvProtocol, rp: Option<f64>) -> Result<LearnOutcome> {
    let records = cross_validate(data, protocol)?;
    let selection = select_lambda(&records, protocol)?;
    let model = majority_refine(&records[selection.index], data, protocol, rp)?;
    Ok(LearnOutcome {
        model,
        records,
        selection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> DesignMatrix {
        DesignMatrix::from_rows(&values.iter().map(|v| vec![*v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn single_feature_least_squares_and_shrinkage() {
        let x = column(&[1.0; 4]);
        let y = [2.0; 4];
        assert!((lasso(&x, &y, 0.0).unwrap()[0] - 2.0).abs() < 1e-12);
        assert!((lasso(&x, &y, 4.0).unwrap()[0] - 1.5).abs() < 1e-12);
        assert_eq!(lasso(&x, &y, 16.0).unwrap()[0], 0.0);
    }

    #[test]
    fn lasso_rejects_bad_input() {
        let x = column(&[1.0, 2.0]);
        assert!(lasso(&x, &[1.0], 0.1).is_err());
        assert!(lasso(&x, &[1.0, f64::NAN], 0.1).is_err());
        assert!(lasso(&x, &[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn aic_values() {
        assert!((aic_score(1.0, 100, 2) - (-456.517)).abs() < 1e-3);
        assert!(aic_score(1.0, 100, 2) < aic_score(1.0, 100, 3));
        let d = aic_score(1.0, 100, 2) - aic_score(0.5, 100, 2);
        assert!((d - 100.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!(aic_score(0.0, 10, 1).is_finite());
        assert_eq!(aic_score(f64::INFINITY, 10, 1), f64::INFINITY);
    }

    fn record(lambda: f64, aic: f64, coeffs: &[&[f64]]) -> LambdaRecord {
        LambdaRecord {
            lambda,
            mean_aic: aic,
            splits: coeffs
                .iter()
                .map(|c| SplitFit {
                    coefficients: c.to_vec(),
                    test_sse: 0.0,
                    aic,
                })
                .collect(),
        }
    }

    #[test]
    fn lambda_selection_scans_upward() {
        let p = CvProtocol::oat(0);
        let recs = vec![
            record(1e-3, -10.0, &[&[500.0, 1.0]]),
            record(1e-2, -20.0, &[&[150.0, 1.0]]),
            record(1e-1, -5.0, &[&[2.0, 0.0]]),
        ];
        let s = select_lambda(&recs, &p).unwrap();
        assert_eq!(s.argmin_index, 1);
        assert_eq!(s.index, 2);
        let ok = vec![record(1e-3, -1.0, &[&[1.0]]), record(1e-2, -2.0, &[&[1.0]])];
        assert_eq!(select_lambda(&ok, &p).unwrap().index, 1);
        let bad = vec![record(1e-3, -1.0, &[&[1e3]])];
        assert!(matches!(
            select_lambda(&bad, &p),
            Err(Error::ThresholdUnsatisfiable { .. })
        ));
    }

    #[test]
    fn majority_vote_tie_breaks() {
        let a = vec![true, true, false];
        let b = vec![true, false, true];
        let c = vec![true, true, true];
        // a and c tie at two votes; a has fewer terms.
        let masks = vec![c.clone(), a.clone(), c.clone(), a.clone(), b.clone()];
        assert_eq!(majority_mask(&masks).unwrap(), (a.clone(), 2));
        // a and b tie on count and size; b < a lexicographically.
        let masks = vec![a.clone(), b.clone()];
        assert_eq!(majority_mask(&masks).unwrap().0, b);
        let mut rev = masks.clone();
        rev.reverse();
        assert_eq!(majority_mask(&rev).unwrap().0, b);
    }

    #[test]
    fn sparse_model_json_round_trip() {
        let m = SparseModel {
            library: LibrarySpec::plain(10),
            structure: (1..=10).map(|d| d == 1 || d == 2).collect(),
            coefficients: vec![0.5, -1.0],
            lambda: 1e-5,
            rp: Some(1.0),
            fit_sse: 1e-12,
            refit_converged: true,
        };
        let back = SparseModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.dense_coefficients()[..3], [0.5, -1.0, 0.0]);
    }

    #[test]
    fn splits_are_deterministic_and_disjoint() {
        let (tr, te) = split_rows(100, 0.8, 5, 3, 2);
        assert_eq!(tr.len(), 80);
        assert_eq!(te.len(), 20);
        assert!(tr.iter().all(|r| !te.contains(r)));
        assert_eq!(split_rows(100, 0.8, 5, 3, 2), (tr, te.clone()));
        assert_ne!(split_rows(100, 0.8, 5, 3, 3).1, te);
    }
}
