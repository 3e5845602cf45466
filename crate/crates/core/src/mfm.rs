//! Mean-field birth–death model `dC/dt = (rp/2) C - rp C^2` and the
//! proportional observation-noise model applied to its trajectories.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ode::{self, PolynomialOde};
use crate::series::TimeSeries;

/// Default horizon in units of `1/rp`.
pub const DEFAULT_HORIZON: f64 = 30.0;
pub const DEFAULT_N_POINTS: usize = 100;
/// The "low noise" level: 0.25% of the trajectory mean.
pub const LOW_NOISE_SIGMA: f64 = 0.0025;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfmParams {
    pub rp: f64,
    pub c0: f64,
    pub sigma: f64,
    pub n_points: usize,
    pub t_end: f64,
}

impl MfmParams {
    /// Noise-free parameters on the default grid (`t_end = 30/rp`, 100 points).
    pub fn new(rp: f64, c0: f64) -> Self {
        Self {
            rp,
            c0,
            sigma: 0.0,
            n_points: DEFAULT_N_POINTS,
            t_end: DEFAULT_HORIZON / rp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rp > 0.0 && self.rp.is_finite()) {
            return Err(Error::InvalidParameter(format!("rp must be > 0, got {}", self.rp)));
        }
        if !(self.c0 > 0.0 && self.c0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "initial density must lie in (0, 1), got {}",
                self.c0
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.n_points < 2 {
            return Err(Error::InvalidParameter("n_points must be >= 2".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end must be > 0, got {}", self.t_end)));
        }
        Ok(())
    }
}

#[inline]
pub fn mfm_rhs(c: f64, rp: f64) -> f64 {
    0.5 * rp * c - rp * c * c
}

/// Closed-form solution of the mean-field model.
pub fn logistic_solution(rp: f64, c0: f64, t: f64) -> f64 {
    0.5 / (1.0 + (0.5 / c0 - 1.0) * (-0.5 * rp * t).exp())
}

/// Noise-free mean-field trajectory on the uniform grid of `params`.
pub fn solve_mfm(params: &MfmParams) -> Result<TimeSeries> {
    params.validate()?;
    let grid = TimeSeries::uniform_grid(params.t_end, params.n_points);
    ode::integrate(&PolynomialOde::mean_field(params.rp), params.c0, &grid)
}

/// `C_d(t_i) = C(t_i) + mean_t(C) * eps_i`, `eps_i ~ N(0, sigma)` i.i.d.
pub fn add_noise<R: Rng + ?Sized>(ts: &TimeSeries, sigma: f64, rng: &mut R) -> Result<TimeSeries> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(ts.clone());
    }
    let scale = ts.mean_value();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let values = ts
        .values
        .iter()
        .map(|&c| c + scale * normal.sample(rng))
        .collect();
    TimeSeries::new(ts.times.clone(), values)
}

/// Solves and then perturbs, drawing noise from `rng` when `sigma > 0`.
pub fn generate<R: Rng + ?Sized>(params: &MfmParams, rng: &mut R) -> Result<TimeSeries> {
    let clean = solve_mfm(params)?;
    add_noise(&clean, params.sigma, rng)
}
