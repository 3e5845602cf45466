//! Finite-difference estimates of `dC/dt` from sampled trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Central,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivativeOptions {
    pub scheme: Scheme,
    /// Width of the centered moving mean applied afterwards; 0 disables it.
    pub smooth_window: usize,
}

impl DerivativeOptions {
    /// Central differences without smoothing, used for mean-field data.
    pub fn mean_field() -> Self {
        Self {
            scheme: Scheme::Central,
            smooth_window: 0,
        }
    }

    /// Forward differences with a moving mean of `max(5, round(n/20))`
    /// samples (forced odd), used for lattice-model data.
    pub fn agent_based(n_points: usize) -> Self {
        let mut w = ((n_points as f64 / 20.0).round() as usize).max(5);
        if w % 2 == 0 {
            w += 1;
        }
        Self {
            scheme: Scheme::Forward,
            smooth_window: w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.smooth_window != 0 && (self.smooth_window < 3 || self.smooth_window % 2 == 0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing window must be 0 or an odd number >= 3, got {}",
                self.smooth_window
            )));
        }
        Ok(())
    }
}

pub fn differentiate(ts: &TimeSeries, opts: &DerivativeOptions) -> Result<TimeSeries> {
    opts.validate()?;
    if ts.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: ts.len(),
        });
    }
    let dt = ts.uniform_step()?;
    let y = &ts.values;
    let n = y.len();
    let mut d = vec![0.0; n];
    match opts.scheme {
        Scheme::Central => {
            d[0] = (y[1] - y[0]) / dt;
            for i in 1..n - 1 {
                d[i] = (y[i + 1] - y[i - 1]) / (2.0 * dt);
            }
            d[n - 1] = (y[n - 1] - y[n - 2]) / dt;
        }
        Scheme::Forward => {
            for i in 0..n - 1 {
                d[i] = (y[i + 1] - y[i]) / dt;
            }
            d[n - 1] = d[n - 2];
        }
    }
    if opts.smooth_window > 0 {
        d = moving_mean(&d, opts.smooth_window);
    }
    TimeSeries::new(ts.times.clone(), d)
}

/// Centered moving mean; the window shrinks to what is available near the ends.
pub fn moving_mean(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            // Summing directly keeps constants exact; prefix sums are used only
            // to skip work on long windows.
            if hi - lo <= 64 {
                x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            } else {
                (prefix[hi] - prefix[lo]) / (hi - lo) as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, dt: f64, n: usize, t0: f64) -> TimeSeries {
        let t: Vec<f64> = (0..n).map(|i| t0 + i as f64 * dt).collect();
        let v = t.iter().map(|&x| f(x)).collect();
        TimeSeries::new(t, v).unwrap()
    }

    #[test]
    fn exact_on_linear_and_quadratic() {
        let d = differentiate(&series(|t| 2.0 * t, 0.37, 10, 0.0), &DerivativeOptions::mean_field())
            .unwrap();
        assert!(d.values.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let d = differentiate(&series(|t| t * t, 1.0, 7, 0.0), &DerivativeOptions::mean_field())
            .unwrap();
        assert_eq!(d.values[3], 6.0);
    }

    #[test]
    fn sine_at_zero() {
        let ts = series(f64::sin, 0.01, 201, -1.0);
        let d = differentiate(&ts, &DerivativeOptions::mean_field()).unwrap();
        assert!((d.values[100] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn forward_duplicates_last() {
        let opts = DerivativeOptions {
            scheme: Scheme::Forward,
            smooth_window: 0,
        };
        let d = differentiate(&series(|t| t * t, 1.0, 4, 0.0), &opts).unwrap();
        assert_eq!(d.values, vec![1.0, 3.0, 5.0, 5.0]);
    }

    #[test]
    fn errors() {
        let short = series(|t| t, 1.0, 2, 0.0);
        assert!(differentiate(&short, &DerivativeOptions::mean_field()).is_err());
        let bad = TimeSeries::new(vec![0.0, 1.0, 3.0], vec![0.0; 3]).unwrap();
        assert!(matches!(
            differentiate(&bad, &DerivativeOptions::mean_field()),
            Err(Error::NonUniformGrid { .. })
        ));
        let even = DerivativeOptions {
            scheme: Scheme::Forward,
            smooth_window: 4,
        };
        assert!(differentiate(&series(|t| t, 1.0, 9, 0.0), &even).is_err());
    }

    #[test]
    fn smoothing_keeps_constants_and_truncates_at_ends() {
        assert_eq!(moving_mean(&[2.5; 9], 5), vec![2.5; 9]);
        let m = moving_mean(&[0.0, 3.0, 6.0, 9.0], 3);
        assert_eq!(m, vec![1.5, 3.0, 6.0, 7.5]);
    }

    #[test]
    fn default_agent_window() {
        assert_eq!(DerivativeOptions::agent_based(100).smooth_window, 5);
        assert_eq!(DerivativeOptions::agent_based(200).smooth_window, 11);
        assert_eq!(DerivativeOptions::agent_based(160).smooth_window, 9);
    }
}
