//! Barycenter VaR / CVaR and the classical aggregators they are compared against.
//!
//! Two sign conventions are in play and every entry point takes one explicitly:
//!
//! - [`Convention::Quantile`]: VaR is the `α`-quantile of the return law,
//!   `m̄ + σ̄ G⁻¹(α)`, and CVaR the upper-tail mean `m̄ + σ̄ E[Z | Z > G⁻¹(α)]`.
//! - [`Convention::Loss`]: VaR is the positive loss threshold `−m̄ − σ̄ G⁻¹(α)` at a
//!   small tail level `α`, and CVaR the mean loss beyond it,
//!   `−m̄ − σ̄ E[Z | Z < G⁻¹(α)]`.
//!
//! Backtests always use the loss convention.
//!
//! For a profile with variance `σ_Z²` and density `g_Z`, the tail-expectation
//! expression `m̄ + σ̄ g_Z(G_Z⁻¹(α)) σ_Z² / (1 − α)` coincides with the upper-tail
//! mean for the Gaussian; CVaR is computed through
//! [`StandardProfile::tail_mean`] so the Gaussian case reduces to
//! `m̄ + σ̄ φ(Φ⁻¹(α)) / (1 − α)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::{normal_quantile, LocationScale, StandardProfile};
use crate::error::{check_probability, Error, Result};
use crate::transport::{check_spd, Simplex, WeightedEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Quantile,
    #[default]
    Loss,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Quantile => "quantile",
            Convention::Loss => "loss",
        })
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(Convention::Quantile),
            "loss" => Ok(Convention::Loss),
            other => Err(Error::domain(format!("unknown convention {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskQuery {
    alpha: f64,
    convention: Convention,
}

impl RiskQuery {
    pub fn new(alpha: f64, convention: Convention) -> Result<Self> {
        check_probability("alpha", alpha)?;
        Ok(Self { alpha, convention })
    }

    pub fn loss(alpha: f64) -> Result<Self> {
        Self::new(alpha, Convention::Loss)
    }

    pub fn quantile(alpha: f64) -> Result<Self> {
        Self::new(alpha, Convention::Quantile)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }
}

/// Asset weights of the aggregate position `X⁺ = Σ ω_i X_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSpec {
    asset_weights: Simplex,
}

impl PortfolioSpec {
    pub fn new(asset_weights: Simplex) -> Self {
        Self { asset_weights }
    }

    pub fn equal(n: usize) -> Result<Self> {
        Ok(Self::new(Simplex::equal(n)?))
    }

    pub fn weights(&self) -> &Simplex {
        &self.asset_weights
    }

    pub fn len(&self) -> usize {
        self.asset_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.asset_weights.is_empty()
    }
}

/// Barycenter VaR, `m̄_λ + σ̄_λ G_Z⁻¹(α)` in the quantile convention.
pub fn wb_var<P: StandardProfile + Clone>(e: &WeightedEnsemble<P>, q: RiskQuery) -> Result<f64> {
    let z = e.members()[0].profile().quantile(q.alpha)?;
    let quantile = e.mean_location() + e.mean_scale() * z;
    Ok(match q.convention {
        Convention::Quantile => quantile,
        Convention::Loss => -quantile,
    })
}

/// Barycenter CVaR (tail conditional expectation of the barycenter law).
pub fn wb_cvar<P: StandardProfile + Clone>(e: &WeightedEnsemble<P>, q: RiskQuery) -> Result<f64> {
    let profile = e.members()[0].profile();
    let (m, s) = (e.mean_location(), e.mean_scale());
    Ok(match q.convention {
        Convention::Quantile => m + s * profile.tail_mean(q.alpha)?,
        Convention::Loss => -(m + s * profile.lower_tail_mean(q.alpha)?),
    })
}

/// Stand-alone VaR of a single measure.
pub fn location_scale_var<P: StandardProfile>(d: &LocationScale<P>, q: RiskQuery) -> Result<f64> {
    let quantile = d.quantile(q.alpha)?;
    Ok(match q.convention {
        Convention::Quantile => quantile,
        Convention::Loss => -quantile,
    })
}

/// Gaussian portfolio VaR, `−μ₊ − σ₊ Φ⁻¹(α)` with `μ₊ = wᵀμ`, `σ₊ = √(wᵀΣw)`.
pub fn varcov_var(
    means: &DVector<f64>,
    cov: &DMatrix<f64>,
    p: &PortfolioSpec,
    q: RiskQuery,
) -> Result<f64> {
    let n = p.len();
    if means.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: means.len(),
        });
    }
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cov.nrows().max(cov.ncols()),
        });
    }
    check_spd(cov)?;
    let w = DVector::from_column_slice(p.weights().as_slice());
    let mu = w.dot(means);
    let sigma = (w.dot(&(cov * &w))).sqrt();
    let quantile = mu + sigma * normal_quantile(q.alpha);
    Ok(match q.convention {
        Convention::Quantile => quantile,
        Convention::Loss => -quantile,
    })
}

/// Unweighted sum of per-asset loss-convention VaRs.
pub fn simple_sum_var(individual_vars: &[f64]) -> Result<f64> {
    if individual_vars.is_empty() {
        return Err(Error::Empty("no per-asset VaRs to sum"));
    }
    Ok(individual_vars.iter().sum())
}
