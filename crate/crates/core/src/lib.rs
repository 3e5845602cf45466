//! Multi-experiment sparse equation learning for a lattice
//! birth–death–migration model and its mean-field ODE.

pub mod abm;
pub mod config;
pub mod error;
pub mod inference;
pub mod library;
pub mod me_eql;
pub mod mfm;
pub mod numderiv;
pub mod ode;
pub mod optim;
pub mod plot;
pub mod rng;
pub mod run;
pub mod series;
pub mod sparse;

pub use error::{Error, Result};
pub use series::TimeSeries;
