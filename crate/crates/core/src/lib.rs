//! Maximum likelihood and bias-reduced estimation for Poisson log-linear and
//! left-censored Tobit regression, with tools for spotting data separation.
//!
//! ```no_run
//! use brsep::data::{load_dataset, Estimator, Family, FitOptions};
//! use brsep::separation::{detect_separation, fit_ml};
//!
//! let file = std::fs::File::open("data.csv")?;
//! let data = load_dataset(file, "y", Family::Poisson)?;
//! let report = detect_separation(&data)?;
//! let br = fit_ml(&data, Estimator::Br, &FitOptions::default())?;
//! println!("{report}\n{:?}", br.estimates());
//! # Ok::<(), brsep::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod poisson;
pub mod report;
pub mod separation;
pub mod simulation;
pub mod tobit;

pub use error::{Error, Result};
