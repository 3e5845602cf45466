//! On-lattice birth–death–migration process with volume exclusion.
//!
//! Each agent proliferates at rate `rp`, dies at rate `rp/2` and migrates at
//! rate `rm`. Proliferation and migration target a uniformly chosen von
//! Neumann neighbour and abort when that site is occupied or off the lattice.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mfm::{DEFAULT_HORIZON, DEFAULT_N_POINTS};
use crate::rng::{rng_from_seed, SimRng};
use crate::series::TimeSeries;

pub const DEFAULT_SIDE: usize = 120;
pub const DEFAULT_REPLICATES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbmParams {
    pub rp: f64,
    pub rm: f64,
    pub lattice_side: usize,
    pub ic_fraction: f64,
    pub n_replicates: usize,
    pub t_end: f64,
    pub n_points: usize,
    pub seed: u64,
}

impl AbmParams {
    pub fn new(rp: f64, ic_fraction: f64, seed: u64) -> Self {
        Self {
            rp,
            rm: 1.0,
            lattice_side: DEFAULT_SIDE,
            ic_fraction,
            n_replicates: DEFAULT_REPLICATES,
            t_end: DEFAULT_HORIZON / rp,
            n_points: DEFAULT_N_POINTS,
            seed,
        }
    }

    pub fn death_rate(&self) -> f64 {
        0.5 * self.rp
    }

    /// `rp = 0` is accepted (pure migration) as long as `t_end` is given.
    pub fn validate(&self) -> Result<()> {
        if !(self.rp >= 0.0 && self.rp.is_finite()) {
            return Err(Error::InvalidParameter(format!("rp must be >= 0, got {}", self.rp)));
        }
        if !(self.rm >= 0.0 && self.rm.is_finite()) {
            return Err(Error::InvalidParameter(format!("rm must be >= 0, got {}", self.rm)));
        }
        if self.lattice_side < 2 || self.lattice_side > 1 << 15 {
            return Err(Error::InvalidParameter(format!(
                "lattice side must lie in [2, 32768], got {}",
                self.lattice_side
            )));
        }
        if !(self.ic_fraction > 0.0 && self.ic_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "initial occupancy must lie in (0, 1), got {}",
                self.ic_fraction
            )));
        }
        if self.n_replicates == 0 {
            return Err(Error::InvalidParameter("n_replicates must be >= 1".into()));
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

/// Occupancy grid plus the list of occupied sites. Sites are stored as flat
/// indices `y * side + x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    side: usize,
    occupied: Vec<bool>,
    agents: Vec<u32>,
}

impl Lattice {
    pub fn empty(side: usize) -> Self {
        Self {
            side,
            occupied: vec![false; side * side],
            agents: Vec::new(),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n_sites(&self) -> usize {
        self.side * self.side
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn density(&self) -> f64 {
        self.agents.len() as f64 / self.n_sites() as f64
    }

    pub fn is_occupied(&self, x: usize, y: usize) -> bool {
        self.occupied[y * self.side + x]
    }

    /// Occupied coordinates in agent-list order.
    pub fn agent_coordinates(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.agents
            .iter()
            .map(|&s| (s as usize % self.side, s as usize / self.side))
    }

    /// Adds an agent at `(x, y)`; returns false if the site is taken.
    pub fn place(&mut self, x: usize, y: usize) -> bool {
        let site = y * self.side + x;
        if self.occupied[site] {
            return false;
        }
        self.occupied[site] = true;
        self.agents.push(site as u32);
        true
    }

    /// Number of occupied sites according to the grid itself.
    pub fn count_occupied(&self) -> usize {
        self.occupied.iter().filter(|o| **o).count()
    }

    #[inline]
    fn neighbour(&self, site: usize, dir: u32) -> Option<usize> {
        let (x, y) = (site % self.side, site / self.side);
        match dir {
            0 if x + 1 < self.side => Some(site + 1),
            1 if x > 0 => Some(site - 1),
            2 if y + 1 < self.side => Some(site + self.side),
            3 if y > 0 => Some(site - self.side),
            _ => None,
        }
    }
}

/// Occupies `round(ic_fraction * side^2)` distinct sites chosen uniformly.
pub fn init_lattice<R: Rng + ?Sized>(side: usize, ic_fraction: f64, rng: &mut R) -> Result<Lattice> {
    if !(ic_fraction > 0.0 && ic_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "initial occupancy must lie in (0, 1), got {ic_fraction}"
        )));
    }
    if side < 2 {
        return Err(Error::InvalidParameter("lattice side must be >= 2".into()));
    }
    let mut lattice = Lattice::empty(side);
    let n = lattice.n_sites();
    let k = (ic_fraction * n as f64).round() as usize;
    for site in index::sample(rng, n, k) {
        lattice.occupied[site] = true;
        lattice.agents.push(site as u32);
    }
    Ok(lattice)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Proliferation,
    Death,
    Migration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub dt: f64,
    pub kind: EventKind,
    /// False when the target site was occupied or off the lattice.
    pub succeeded: bool,
}

/// Gillespie state for one replicate.
#[derive(Debug, Clone)]
pub struct AbmState {
    pub lattice: Lattice,
    pub time: f64,
    rp: f64,
    rd: f64,
    rm: f64,
}

impl AbmState {
    pub fn new(lattice: Lattice, rp: f64, rm: f64) -> Self {
        Self {
            lattice,
            time: 0.0,
            rp,
            rd: 0.5 * rp,
            rm,
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.lattice.n_agents() as f64 * (self.rp + self.rd + self.rm)
    }

    /// Draws and applies the next event. `None` once no event can occur.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Event> {
        let n = self.lattice.n_agents();
        let per_agent = self.rp + self.rd + self.rm;
        if n == 0 || per_agent <= 0.0 {
            return None;
        }
        let u: f64 = rng.random();
        let dt = -(1.0 - u).ln() / (n as f64 * per_agent);
        self.time += dt;

        let slot = rng.random_range(0..n);
        let pick = rng.random::<f64>() * per_agent;
        let kind = if pick < self.rp {
            EventKind::Proliferation
        } else if pick < self.rp + self.rd {
            EventKind::Death
        } else {
            EventKind::Migration
        };

        let lattice = &mut self.lattice;
        let site = lattice.agents[slot] as usize;
        let succeeded = match kind {
            EventKind::Death => {
                lattice.occupied[site] = false;
                lattice.agents.swap_remove(slot);
                true
            }
            EventKind::Proliferation | EventKind::Migration => {
                let dir = rng.random_range(0..4u32);
                match lattice.neighbour(site, dir) {
                    Some(target) if !lattice.occupied[target] => {
                        lattice.occupied[target] = true;
                        if kind == EventKind::Migration {
                            lattice.occupied[site] = false;
                            lattice.agents[slot] = target as u32;
                        } else {
                            lattice.agents.push(target as u32);
                        }
                        true
                    }
                    _ => false,
                }
            }
        };
        Some(Event {
            dt,
            kind,
            succeeded,
        })
    }
}

/// Per-replicate bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateInfo {
    pub seed: u64,
    pub n_events: u64,
    pub extinction_time: Option<f64>,
}

/// One replicate sampled on the uniform grid, holding the state between
/// events. Extinction leaves the remaining samples at zero.
pub fn simulate<R: Rng + ?Sized>(params: &AbmParams, rng: &mut R) -> Result<(TimeSeries, ReplicateInfo)> {
    params.validate()?;
    let lattice = init_lattice(params.lattice_side, params.ic_fraction, rng)?;
    let grid = TimeSeries::uniform_grid(params.t_end, params.n_points);
    let mut state = AbmState::new(lattice, params.rp, params.rm);
    let mut values = Vec::with_capacity(grid.len());
    let mut n_events = 0u64;
    let mut extinction_time = None;

    let mut next = 0;
    // The sample at t_i sees every event with time <= t_i.
    while next < grid.len() {
        let before = state.lattice.density();
        match state.step(rng) {
            Some(_) => {
                n_events += 1;
                while next < grid.len() && grid[next] < state.time {
                    values.push(before);
                    next += 1;
                }
                if state.lattice.n_agents() == 0 && extinction_time.is_none() {
                    extinction_time = Some(state.time);
                }
            }
            None => {
                values.resize(grid.len(), state.lattice.density());
                next = grid.len();
            }
        }
    }
    let ts = TimeSeries::new(grid, values)?;
    Ok((
        ts,
        ReplicateInfo {
            seed: 0,
            n_events,
            extinction_time,
        },
    ))
}

/// Runs replicate `i` with seed `params.seed + i`.
pub fn simulate_replicate(params: &AbmParams, i: usize) -> Result<(TimeSeries, ReplicateInfo)> {
    let seed = params.seed.wrapping_add(i as u64);
    let mut rng: SimRng = rng_from_seed(seed);
    let (ts, mut info) = simulate(params, &mut rng)?;
    info.seed = seed;
    Ok((ts, info))
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub mean: TimeSeries,
    pub std: Vec<f64>,
    pub replicates: Vec<ReplicateInfo>,
}

impl Ensemble {
    pub fn n_replicates(&self) -> usize {
        self.replicates.len()
    }

    pub fn n_extinct(&self) -> usize {
        self.replicates
            .iter()
            .filter(|r| r.extinction_time.is_some())
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,C_mean,C_std,n_replicates\n");
        for ((t, m), s) in self.mean.times.iter().zip(&self.mean.values).zip(&self.std) {
            let _ = writeln!(out, "{t},{m},{s},{}", self.n_replicates());
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Pointwise mean and population standard deviation over the replicates.
/// Replicates run on the current rayon pool; results do not depend on it.
pub fn ensemble(params: &AbmParams) -> Result<(Ensemble, Vec<TimeSeries>)> {
    params.validate()?;
    let runs: Vec<(TimeSeries, ReplicateInfo)> = (0..params.n_replicates)
        .into_par_iter()
        .map(|i| simulate_replicate(params, i))
        .collect::<Result<_>>()?;
    let n = runs.len() as f64;
    let len = params.n_points;
    let mut mean = vec![0.0; len];
    for (ts, _) in &runs {
        for (m, v) in mean.iter_mut().zip(&ts.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    for (ts, _) in &runs {
        for ((s, v), m) in var.iter_mut().zip(&ts.values).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    let times = runs[0].0.times.clone();
    let (series, replicates): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok((
        Ensemble {
            mean: TimeSeries::new(times, mean)?,
            std,
            replicates,
        },
        series,
    ))
}

/// Ensemble-mean density trajectory.
pub fn ensemble_mean(params: &AbmParams) -> Result<TimeSeries> {
    Ok(ensemble(params)?.0.mean)
}
