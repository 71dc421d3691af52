//! EWMA scale filter, `σ_t² = (1 − ζ) x_t² + ζ σ_{t−1}²`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::sample_sd;

pub const RISKMETRICS_ZETA: f64 = 0.94;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EwmaInit {
    /// Sample standard deviation of the estimation window.
    #[default]
    SampleSdOfWindow,
    FirstAbsReturn,
}

impl fmt::Display for EwmaInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EwmaInit::SampleSdOfWindow => "sample_sd_of_window",
            EwmaInit::FirstAbsReturn => "first_abs_return",
        })
    }
}

impl FromStr for EwmaInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample_sd_of_window" => Ok(EwmaInit::SampleSdOfWindow),
            "first_abs_return" => Ok(EwmaInit::FirstAbsReturn),
            other => Err(Error::domain(format!("unknown EWMA init {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwmaConfig {
    zeta: f64,
    init: EwmaInit,
}

impl EwmaConfig {
    pub fn new(zeta: f64, init: EwmaInit) -> Result<Self> {
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::domain(format!(
                "zeta must lie in (0, 1), got {zeta}"
            )));
        }
        Ok(Self { zeta, init })
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn init(&self) -> EwmaInit {
        self.init
    }

    /// Starting scale for a path over `window` according to `init`. May be zero.
    pub fn initial_scale(&self, window: &[f64]) -> Result<f64> {
        match self.init {
            EwmaInit::SampleSdOfWindow => sample_sd(window),
            EwmaInit::FirstAbsReturn => window
                .first()
                .map(|x| x.abs())
                .ok_or(Error::Empty("EWMA initialisation window")),
        }
    }
}

impl Default for EwmaConfig {
    fn default() -> Self {
        Self {
            zeta: RISKMETRICS_ZETA,
            init: EwmaInit::default(),
        }
    }
}

/// Filtered scale after each observation; `out[t]` uses `returns[..=t]`.
pub fn ewma_path(returns: &[f64], cfg: &EwmaConfig, sigma0: f64) -> Result<Vec<f64>> {
    if returns.is_empty() {
        return Err(Error::Empty("EWMA input returns"));
    }
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::domain(format!(
            "sigma0 must be positive, got {sigma0}"
        )));
    }
    let z = cfg.zeta;
    let mut var = sigma0 * sigma0;
    Ok(returns
        .iter()
        .map(|x| {
            var = (1.0 - z) * x * x + z * var;
            var.sqrt()
        })
        .collect())
}
