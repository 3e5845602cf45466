//! Recovering the proliferation rate from one trajectory by fitting a
//! parameterized model, and the error sweep over many rates.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::abm::{simulate_replicate, AbmParams};
use crate::error::{Error, Result};
use crate::me_eql::{predict, ModelKind, ParameterizedModel};
use crate::ode::IntegrateOptions;
use crate::optim::brent_minimize;
use crate::rng::derive_seed;
use crate::series::TimeSeries;
use crate::sparse::log_grid;

pub const DEFAULT_BOUNDS: (f64, f64) = (0.005, 6.0);
pub const SCAN_POINTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub rp_true: Option<f64>,
    pub rp_hat: f64,
    pub relative_error: Option<f64>,
    pub sse_at_optimum: f64,
    pub model_kind: ModelKind,
}

pub fn relative_error(rp_hat: f64, rp_true: f64) -> f64 {
    (rp_hat - rp_true).abs() / rp_true
}

/// SSE of the model solved at `rp` from the data's first sample.
pub fn inference_sse(model: &ParameterizedModel, rp: f64, data: &TimeSeries, opts: &IntegrateOptions) -> f64 {
    let Some(c0) = data.first_value() else {
        return f64::INFINITY;
    };
    match predict(model, rp, c0, &data.times, opts) {
        Ok(pred) => pred
            .values
            .iter()
            .zip(&data.values)
            .map(|(p, d)| (p - d).powi(2))
            .sum(),
        Err(_) => f64::INFINITY,
    }
}

/// Log-spaced scan over `bounds`, then Brent's method inside the bracket
/// around the best scan point. Returns whichever of the two is better.
pub fn infer_rp(
    model: &ParameterizedModel,
    data: &TimeSeries,
    bounds: (f64, f64),
    rp_true: Option<f64>,
    opts: &IntegrateOptions,
) -> Result<InferenceResult> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "search bounds must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidParameter("inference data is empty".into()));
    }
    let objective = |rp: f64| inference_sse(model, rp, data, opts);
    let scan = log_grid(lo, hi, SCAN_POINTS);
    let values: Vec<f64> = scan.iter().map(|&rp| objective(rp)).collect();
    let (best, &best_sse) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan is non-empty");
    if !best_sse.is_finite() {
        return Err(Error::ModelInvalidOverBounds { lo, hi });
    }
    let a = scan[best.saturating_sub(1)];
    let b = scan[(best + 1).min(scan.len() - 1)];
    let (x, fx) = brent_minimize(objective, a, b, scan[best], 1e-10, 200);
    let (rp_hat, sse) = if fx <= best_sse {
        (x, fx)
    } else {
        (scan[best], best_sse)
    };
    Ok(InferenceResult {
        rp_true,
        rp_hat,
        relative_error: rp_true.map(|r| relative_error(rp_hat, r)),
        sse_at_optimum: sse,
        model_kind: model.kind,
    })
}

/// Mean and population standard deviation of one sweep cell. Failed
/// inferences are left out of both and of `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rp_true: f64,
    pub model: ModelKind,
    pub mean_rel_err: Option<f64>,
    pub std_rel_err: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub bounds: (f64, f64),
    pub integrate: IntegrateOptions,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            bounds: DEFAULT_BOUNDS,
            integrate: IntegrateOptions::default(),
        }
    }
}

/// For every rp, simulates `n_noisy` single-replicate trajectories and infers
/// rp from each with every model. `abm` supplies everything except `rp`,
/// `t_end` (taken as `30/rp`) and the replicate seeds, which derive from
/// `abm.seed` and the rp's index.
pub fn error_sweep(
    models: &[ParameterizedModel],
    rp_values: &[f64],
    n_noisy: usize,
    abm: &AbmParams,
    settings: &SweepSettings,
) -> Result<Vec<SweepRow>> {
    if rp_values.is_empty() || n_noisy == 0 {
        return Err(Error::InvalidParameter(
            "error sweep needs at least one rp value and one replicate".into(),
        ));
    }
    let cells: Vec<(usize, usize)> = (0..rp_values.len())
        .flat_map(|k| (0..n_noisy).map(move |i| (k, i)))
        .collect();
    let horizon = crate::mfm::DEFAULT_HORIZON;
    let errors: Vec<Vec<Option<f64>>> = cells
        .par_iter()
        .map(|&(k, i)| -> Result<Vec<Option<f64>>> {
            let rp = rp_values[k];
            let params = AbmParams {
                rp,
                t_end: horizon / rp,
                n_replicates: 1,
                seed: derive_seed(abm.seed, &[k as u64]),
                ..*abm
            };
            let (data, _) = simulate_replicate(&params, i)?;
            Ok(models
                .iter()
                .map(|m| {
                    infer_rp(m, &data, settings.bounds, Some(rp), &settings.integrate)
                        .map_err(|e| log::warn!("rp={rp} replicate {i} {}: {e}", m.kind.name()))
                        .ok()
                        .and_then(|r| r.relative_error)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(rp_values.len() * models.len());
    for (k, &rp) in rp_values.iter().enumerate() {
        for (j, m) in models.iter().enumerate() {
            let vals: Vec<f64> = (0..n_noisy)
                .filter_map(|i| errors[k * n_noisy + i][j])
                .collect();
            let n = vals.len();
            let (mean, std) = if n == 0 {
                (None, None)
            } else {
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                (Some(mean), Some(var.sqrt()))
            };
            rows.push(SweepRow {
                rp_true: rp,
                model: m.kind,
                mean_rel_err: mean,
                std_rel_err: std,
                n,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("rp_true,model,mean_rel_err,std_rel_err,n\n");
    let cell = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.rp_true,
            r.model.name(),
            cell(r.mean_rel_err),
            cell(r.std_rel_err),
            r.n
        );
    }
    out
}

/// Rows at the swept rp nearest each target, for a compact summary.
pub fn nearest_rows<'a>(rows: &'a [SweepRow], targets: &[f64]) -> Vec<&'a SweepRow> {
    let mut out = Vec::new();
    for &t in targets {
        let Some(nearest) = rows
            .iter()
            .map(|r| r.rp_true)
            .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
        else {
            continue;
        };
        out.extend(rows.iter().filter(|r| r.rp_true == nearest));
    }
    out
}
