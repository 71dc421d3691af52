//! Wasserstein barycenter risk measures for location-scale ensembles.
//!
//! The crate is organised bottom-up:
//!
//! - [`distributions`]: standardized profiles (the Gaussian ships today) and
//!   location-scale measures built on them.
//! - [`transport`]: 2-Wasserstein distances, the 1D quantile-average barycenter and
//!   the multivariate Gaussian barycenter fixed point.
//! - [`risk`]: barycenter VaR / CVaR and the simple-summation and
//!   variance-covariance aggregators, under an explicit sign [`risk::Convention`].
//! - [`volatility`]: EWMA scale filtering.
//! - [`backtest`]: rolling next-day forecasts, exception counting and the Kupiec
//!   proportion-of-failures test.
//! - [`ingest`]: CSV price loading, log-returns, descriptive statistics.
//! - [`cli`]: the `wbrisk` command-line front end.

pub mod backtest;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod ingest;
pub mod risk;
pub mod transport;
pub mod volatility;

mod format;

pub use error::{Error, Result};
