//! Polynomial candidate-term matrices, plain and with the proliferation
//! rate embedded multiplicatively.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::MAX_DEGREE;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibrarySpec {
    pub max_degree: usize,
    pub embed_rp: bool,
}

impl LibrarySpec {
    pub fn plain(max_degree: usize) -> Self {
        Self {
            max_degree,
            embed_rp: false,
        }
    }

    pub fn embedded(max_degree: usize) -> Self {
        Self {
            max_degree,
            embed_rp: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DEGREE).contains(&self.max_degree) {
            return Err(Error::InvalidParameter(format!(
                "max_degree must be in 1..={MAX_DEGREE}, got {}",
                self.max_degree
            )));
        }
        Ok(())
    }
}

impl Default for LibrarySpec {
    fn default() -> Self {
        Self::plain(MAX_DEGREE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermLabel {
    pub degree: usize,
    pub rp_embedded: bool,
}

impl std::fmt::Display for TermLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.rp_embedded {
            write!(f, "Rp*C^{}", self.degree)
        } else {
            write!(f, "C^{}", self.degree)
        }
    }
}

/// Row-major `rows x cols` matrix of library terms evaluated at the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub labels: Vec<TermLabel>,
}

impl DesignMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged design matrix".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
            labels: (1..=cols)
                .map(|degree| TermLabel {
                    degree,
                    rp_embedded: false,
                })
                .collect(),
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

pub fn build_theta(data: &[(f64, &TimeSeries)], spec: &LibrarySpec) -> Result<DesignMatrix> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("no experiments to build a library from".into()));
    }
    if !spec.embed_rp && data.len() > 1 {
        return Err(Error::InvalidParameter(format!(
            "plain library takes exactly one experiment, got {}",
            data.len()
        )));
    }
    let cols = spec.max_degree;
    let rows: usize = data.iter().map(|(_, ts)| ts.len()).sum();
    let mut out = Vec::with_capacity(rows * cols);
    for &(rp, ts) in data {
        let scale = if spec.embed_rp { rp } else { 1.0 };
        for &c in &ts.values {
            let mut p = 1.0;
            for _ in 0..cols {
                p *= c;
                out.push(scale * p);
            }
        }
    }
    Ok(DesignMatrix {
        rows,
        cols,
        data: out,
        labels: (1..=cols)
            .map(|degree| TermLabel {
                degree,
                rp_embedded: spec.embed_rp,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(c: f64) -> TimeSeries {
        TimeSeries::new(vec![0.0], vec![c]).unwrap()
    }

    #[test]
    fn powers_and_embedding() {
        let ts = one(0.5);
        let m = build_theta(&[(1.0, &ts)], &LibrarySpec::plain(3)).unwrap();
        assert_eq!(m.row(0), &[0.5, 0.25, 0.125]);
        let m = build_theta(&[(2.0, &ts)], &LibrarySpec::embedded(2)).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.5]);
        let z = one(0.0);
        let m = build_theta(&[(3.0, &z)], &LibrarySpec::embedded(4)).unwrap();
        assert!(m.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors() {
        let ts = one(0.5);
        assert!(build_theta(&[], &LibrarySpec::plain(3)).is_err());
        assert!(build_theta(&[(1.0, &ts), (2.0, &ts)], &LibrarySpec::plain(3)).is_err());
        assert!(build_theta(&[(1.0, &ts)], &LibrarySpec::plain(11)).is_err());
    }

    #[test]
    fn embedded_blocks_are_scaled_plain_blocks() {
        let a = TimeSeries::new(vec![0.0, 1.0], vec![0.1, 0.3]).unwrap();
        let b = TimeSeries::new(vec![0.0, 1.0], vec![0.2, 0.45]).unwrap();
        let emb = build_theta(&[(1.5, &a), (0.25, &b)], &LibrarySpec::embedded(10)).unwrap();
        let pa = build_theta(&[(1.5, &a)], &LibrarySpec::plain(10)).unwrap();
        let pb = build_theta(&[(0.25, &b)], &LibrarySpec::plain(10)).unwrap();
        assert_eq!(emb.rows, 4);
        for col in 0..10 {
            assert_eq!(emb.get(0, col), 1.5 * pa.get(0, col));
            assert_eq!(emb.get(3, col), 0.25 * pb.get(1, col));
            // column k is the k-th power of column 1
            let c = pa.get(1, 0);
            assert!((pa.get(1, col) - c.powi(col as i32 + 1)).abs() < 1e-15);
        }
    }
}
