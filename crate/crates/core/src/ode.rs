//! Forward solution of polynomial right-hand sides `dC/dt = sum_k a_k C^k`.
//!
//! Uses the Dormand–Prince 5(4) embedded pair with its fourth-order
//! continuous extension for sampling onto the output grid.

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Highest polynomial degree a right-hand side may carry.
pub const MAX_DEGREE: usize = 10;

/// `dC/dt = scale * sum_k a_k C^k` with degrees in `1..=MAX_DEGREE`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialOde {
    /// Dense coefficient table; index `k - 1` holds the coefficient of `C^k`.
    coeffs: [f64; MAX_DEGREE],
    top: usize,
    rp_scale: Option<f64>,
}

impl PolynomialOde {
    /// Builds the ODE from `(degree, coefficient)` pairs.
    pub fn new(terms: &[(usize, f64)]) -> Result<Self> {
        let mut coeffs = [0.0; MAX_DEGREE];
        for &(degree, value) in terms {
            if !(1..=MAX_DEGREE).contains(&degree) {
                return Err(Error::InvalidParameter(format!(
                    "term degree {degree} outside 1..={MAX_DEGREE}"
                )));
            }
            if !value.is_finite() {
                return Err(Error::NonFinite("ODE coefficient"));
            }
            coeffs[degree - 1] += value;
        }
        let top = coeffs.iter().rposition(|&c| c != 0.0).ok_or_else(|| {
            Error::InvalidParameter("polynomial ODE needs at least one nonzero coefficient".into())
        })? + 1;
        Ok(Self {
            coeffs,
            top,
            rp_scale: None,
        })
    }

    /// Multiplies every term by `rp`, as in embedded-parameter models.
    pub fn with_rp_scale(mut self, rp: f64) -> Self {
        self.rp_scale = Some(rp);
        self
    }

    /// The mean-field logistic right-hand side `(rp/2) C - rp C^2`.
    pub fn mean_field(rp: f64) -> Self {
        let mut coeffs = [0.0; MAX_DEGREE];
        coeffs[0] = 0.5 * rp;
        coeffs[1] = -rp;
        Self {
            coeffs,
            top: 2,
            rp_scale: None,
        }
    }

    pub fn coefficient(&self, degree: usize) -> f64 {
        let base = if (1..=MAX_DEGREE).contains(&degree) {
            self.coeffs[degree - 1]
        } else {
            0.0
        };
        base * self.rp_scale.unwrap_or(1.0)
    }

    #[inline]
    pub fn rhs(&self, c: f64) -> f64 {
        // Horner on C * (a1 + a2 C + ... + a_top C^(top-1)).
        let mut acc = 0.0;
        for k in (0..self.top).rev() {
            acc = acc * c + self.coeffs[k];
        }
        acc * c * self.rp_scale.unwrap_or(1.0)
    }
}

/// Integrator tolerances and guards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// `|C|` above this aborts with [`Error::Divergence`].
    pub divergence_bound: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            divergence_bound: 10.0,
            max_steps: 200_000,
        }
    }
}

// Dormand–Prince 5(4) tableau.




const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Solves `ode` from `c0` at `t_grid[0]` and samples it at every grid time.
pub fn integrate(ode: &PolynomialOde, c0: f64, t_grid: &[f64]) -> Result<TimeSeries> {
    integrate_with(ode, c0, t_grid, &IntegrateOptions::default())
}

pub fn integrate_with(
    ode: &PolynomialOde,
    c0: f64,
    t_grid: &[f64],
    opts: &IntegrateOptions,
) -> Result<TimeSeries> {
    let values = integrate_values(|c| ode.rhs(c), c0, t_grid, opts)?;
    TimeSeries::new(t_grid.to_vec(), values)
}

/// Solves a scalar autonomous ODE and returns values at `t_grid`.
pub fn integrate_values<F: Fn(f64) -> f64>(
    f: F,
    c0: f64,
    t_grid: &[f64],
    opts: &IntegrateOptions,
) -> Result<Vec<f64>> {
    if !c0.is_finite() {
        return Err(Error::NonFinite("initial condition"));
    }
    if t_grid.is_empty() {
        return Ok(Vec::new());
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "output grid must be strictly increasing".into(),
        ));
    }
    let bound = opts.divergence_bound;
    if c0.abs() > bound {
        return Err(Error::Divergence {
            t: t_grid[0],
            value: c0,
            bound,
        });
    }

    let mut out = Vec::with_capacity(t_grid.len());
    out.push(c0);
    let t_final = *t_grid.last().unwrap();
    let span = t_final - t_grid[0];
    if t_grid.len() == 1 {
        return Ok(out);
    }

    let mut t = t_grid[0];
    let mut y = c0;
    let mut k1 = f(y);
    let mut h = initial_step(&f, y, k1, span, opts);
    let h_min = 16.0 * f64::EPSILON * span.max(t_final.abs());
    let mut next_out = 1;
    let mut steps = 0usize;
    let mut prev_reject = false;

    while next_out < t_grid.len() {
        if steps >= opts.max_steps {
            return Err(Error::StepUnderflow { t, h });
        }
        steps += 1;
        let last = t + h >= t_final - h_min;
        if last {
            h = t_final - t;
        }

        let k2 = f(y + h * A21 * k1);
        let k3 = f(y + h * (A31 * k1 + A32 * k2));
        let k4 = f(y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y1 = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
        let k7 = f(y1);

        let err_est = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = opts.atol + opts.rtol * y.abs().max(y1.abs());
        let err = (err_est / scale).abs();

        if !err.is_finite() || !y1.is_finite() {
            // Stage blew up; retreat hard and retry.
            h *= 0.1;
            prev_reject = true;
            if h.abs() < h_min {
                return Err(Error::Divergence {
                    t,
                    value: f64::INFINITY,
                    bound,
                });
            }
            continue;
        }

        if err <= 1.0 {
            let t1 = if last { t_final } else { t + h };
            // Dense output on [t, t1].
            let ydiff = y1 - y;
            let bspl = h * k1 - ydiff;
            let r4 = ydiff - h * k7 - bspl;
            let r5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7);
            while next_out < t_grid.len() && t_grid[next_out] <= t1 {
                let tq = t_grid[next_out];
                let value = if tq == t1 {
                    y1
                } else {
                    let theta = (tq - t) / h;
                    let theta1 = 1.0 - theta;
                    y + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)))
                };
                if value.abs() > bound {
                    return Err(Error::Divergence {
                        t: tq,
                        value,
                        bound,
                    });
                }
                out.push(value);
                next_out += 1;
            }
            if y1.abs() > bound {
                return Err(Error::Divergence {
                    t: t1,
                    value: y1,
                    bound,
                });
            }
            t = t1;
            y = y1;
            k1 = k7;
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if prev_reject {
                fac = fac.min(1.0);
            }
            h *= fac;
            prev_reject = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            prev_reject = true;
        }
        if h.abs() < h_min && next_out < t_grid.len() {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    Ok(out)
}

fn initial_step<F: Fn(f64) -> f64>(
    f: &F,
    y0: f64,
    f0: f64,
    span: f64,
    opts: &IntegrateOptions,
) -> f64 {
    let sc = opts.atol + opts.rtol * y0.abs();
    let d0 = y0.abs() / sc;
    let d1 = f0.abs() / sc;
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let f1 = f(y0 + h0 * f0);
    let d2 = ((f1 - f0) / sc).abs() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Forward-solves `sum_k a_k C^k` given as dense per-degree coefficients
/// (index `k-1` for `C^k`). An all-zero right-hand side yields the constant
/// trajectory `c0`.
pub fn forward_dense(
    coeffs: &[f64],
    c0: f64,
    t_grid: &[f64],
    opts: &IntegrateOptions,
) -> Result<Vec<f64>> {
    let terms: Vec<(usize, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| (i + 1, *c))
        .collect();
    if terms.is_empty() {
        if !c0.is_finite() {
            return Err(Error::NonFinite("initial condition"));
        }
        return Ok(vec![c0; t_grid.len()]);
    }
    let ode = PolynomialOde::new(&terms)?;
    integrate_values(|c| ode.rhs(c), c0, t_grid, opts)
}
