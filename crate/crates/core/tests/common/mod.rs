#![allow(dead_code)]

use meeql::abm::{ensemble_mean, AbmParams};
use meeql::me_eql::{ExperimentSet, Source};
use meeql::mfm::{generate, MfmParams};
use meeql::rng::{derive_seed, rng_from_seed};

/// Mean-field experiments, each with its own noise stream.
pub fn mfm_set(rps: &[f64], ic: f64, sigma: f64, seed: u64) -> ExperimentSet {
    let ex = rps
        .iter()
        .map(|&rp| {
            let params = MfmParams { sigma, ..MfmParams::new(rp, ic) };
            let mut rng = rng_from_seed(derive_seed(seed, &[rp.to_bits()]));
            (rp, generate(&params, &mut rng).unwrap())
        })
        .collect();
    ExperimentSet::new(ex, ic, Source::Mfm).unwrap()
}

/// Lattice-model ensemble means; experiment `k` uses seeds from `seed + 1000 k`.
pub fn abm_set(rps: &[f64], ic: f64, n_replicates: usize, seed: u64) -> ExperimentSet {
    let ex = rps
        .iter()
        .enumerate()
        .map(|(k, &rp)| {
            let p = AbmParams {
                n_replicates,
                ..AbmParams::new(rp, ic, seed + 1000 * k as u64)
            };
            (rp, ensemble_mean(&p).unwrap())
        })
        .collect();
    ExperimentSet::new(ex, ic, Source::Abm).unwrap()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// `||y - X xi||^2 + lambda |xi|_1`, computed directly from the rows.
pub fn lasso_objective(x: &[Vec<f64>], y: &[f64], xi: &[f64], lambda: f64) -> f64 {
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(row, yi)| {
            let fit: f64 = row.iter().zip(xi).map(|(a, b)| a * b).sum();
            (yi - fit).powi(2)
        })
        .sum();
    sse + lambda * xi.iter().map(|v| v.abs()).sum::<f64>()
}

/// Exhaustive minimization of the LASSO objective over the lattice
/// `{-r, -r+h, ..., r}^p`, p <= 3. The quadratic is expanded once into
/// normal-equation form so each lattice point costs O(p^2).
pub fn lattice_lasso(x: &[Vec<f64>], y: &[f64], lambda: f64, r: f64, h: f64) -> Vec<f64> {
    let p = x[0].len();
    assert!((1..=3).contains(&p));
    let mut g = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (row, yi) in x.iter().zip(y) {
        for i in 0..p {
            b[i] += row[i] * yi;
            for j in 0..p {
                g[i][j] += row[i] * row[j];
            }
        }
    }
    let m = (r / h).round() as i64;
    let axis = |k: usize| if k < p { -m..=m } else { 0..=0 };
    let mut best = (f64::INFINITY, [0.0; 3]);
    for i in axis(0) {
        for j in axis(1) {
            for k in axis(2) {
                let v = [i as f64 * h, j as f64 * h, k as f64 * h];
                let mut f = 0.0;
                for a in 0..p {
                    f += lambda * v[a].abs() - 2.0 * b[a] * v[a];
                    for c in 0..p {
                        f += v[a] * g[a][c] * v[c];
                    }
                }
                if f < best.0 {
                    best = (f, v);
                }
            }
        }
    }
    best.1[..p].to_vec()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
