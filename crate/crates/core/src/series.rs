//! Uniformly sampled scalar trajectories and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Relative tolerance used when checking that a time grid is uniform.
const GRID_RTOL: f64 = 1e-9;

/// A scalar density trajectory sampled at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "times has {} entries but values has {}",
                times.len(),
                values.len()
            )));
        }
        Ok(Self { times, values })
    }

    /// `n_points` equally spaced samples over `[0, t_end]`.
    pub fn uniform_grid(t_end: f64, n_points: usize) -> Vec<f64> {
        if n_points == 1 {
            return vec![0.0];
        }
        let dt = t_end / (n_points - 1) as f64;
        (0..n_points).map(|i| i as f64 * dt).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first_value(&self) -> Option<f64> {
        self.values.first().copied()
    }

    /// Time-average of the sampled values.
    pub fn mean_value(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Grid spacing, or an error if the grid is not uniform.
    pub fn uniform_step(&self) -> Result<f64> {
        check_uniform(&self.times)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 40 + 4);
        out.push_str("t,C\n");
        for (t, c) in self.times.iter().zip(&self.values) {
            // `{}` on f64 prints the shortest string that round-trips exactly.
            let _ = writeln!(out, "{t},{c}");
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse(path, "empty file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "t" || !(cols[1] == "C" || cols[1] == "C_mean") {
            return Err(Error::parse(
                path,
                format!("expected header `t,C` or `t,C_mean,...`, found `{header}`"),
            ));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| {
                    Error::parse(path, format!("line {}: bad number in `{line}`", lineno + 2))
                })
            };
            times.push(parse(fields.next())?);
            values.push(parse(fields.next())?);
        }
        TimeSeries::new(times, values)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Returns the common spacing of `times`, erroring on a non-uniform grid.
pub fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: times.len(),
        });
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NonUniformGrid { index: 0 });
    }
    for (i, w) in times.windows(2).enumerate().skip(1) {
        let step = w[1] - w[0];
        let tol = GRID_RTOL * dt + 64.0 * f64::EPSILON * w[1].abs();
        if (step - dt).abs() > tol {
            return Err(Error::NonUniformGrid { index: i });
        }
    }
    Ok(dt)
}
