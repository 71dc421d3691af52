//! Rolling-window next-day VaR backtest and the Kupiec proportion-of-failures test.
//!
//! For every test day `t` the model is fitted on the `window` observations ending
//! at `t − 1`, a loss-convention VaR is forecast for each tail level, and the day
//! is an exception when the realized portfolio loss `−Σ w_i x_{i,t}` is strictly
//! greater than the forecast.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{normal_sf, LocationScale};
use crate::error::{check_probability, Error, Result};
use crate::ingest::{sample_mean, sample_sd, ReturnMatrix};
use crate::risk::{
    location_scale_var, simple_sum_var, varcov_var, wb_var, PortfolioSpec, RiskQuery,
};
use crate::transport::{check_spd, Simplex, WeightedEnsemble};
use crate::volatility::{ewma_path, EwmaConfig};

/// 95% quantile of χ²(1).
pub const CHI2_1_CRITICAL_95: f64 = 3.841_458_820_694_124;
pub const SIGNIFICANCE: f64 = 0.05;
pub const DEFAULT_WINDOW: usize = 750;
pub const DEFAULT_ALPHAS: [f64; 4] = [0.1, 0.05, 0.01, 0.005];
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Barycenter of per-asset Gaussians with window sample SDs.
    WbNormal,
    /// Barycenter of per-asset Gaussians with EWMA-filtered SDs.
    WbNormalStar,
    Varcov,
    SimpleSum,
}

impl Model {
    pub const ALL: [Model; 4] = [
        Model::WbNormal,
        Model::WbNormalStar,
        Model::Varcov,
        Model::SimpleSum,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Model::WbNormal => "wb_normal",
            Model::WbNormalStar => "wb_normal_star",
            Model::Varcov => "varcov",
            Model::SimpleSum => "simple_sum",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub window: usize,
    pub alphas: Vec<f64>,
    pub model: Model,
    pub ewma: EwmaConfig,
    /// Portfolio weights; also the barycenter weights unless overridden.
    pub weights: PortfolioSpec,
    pub barycenter_weights: Option<Simplex>,
    /// Lower bound applied to every fitted scale (and, if needed, a ridge on the covariance).
    pub sigma_floor: f64,
}

impl BacktestConfig {
    pub fn new(model: Model, weights: PortfolioSpec) -> Self {
        Self {
            window: DEFAULT_WINDOW,
            alphas: DEFAULT_ALPHAS.to_vec(),
            model,
            ewma: EwmaConfig::default(),
            weights,
            barycenter_weights: None,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
        }
    }

    pub fn validate(&self, n_assets: usize) -> Result<()> {
        if self.window < 2 {
            return Err(Error::domain(format!(
                "window must be at least 2, got {}",
                self.window
            )));
        }
        if self.alphas.is_empty() {
            return Err(Error::Empty("no tail levels"));
        }
        for &a in &self.alphas {
            check_probability("alpha", a)?;
        }
        if self.weights.len() != n_assets {
            return Err(Error::DimensionMismatch {
                expected: n_assets,
                got: self.weights.len(),
            });
        }
        if let Some(b) = &self.barycenter_weights {
            if b.len() != n_assets {
                return Err(Error::DimensionMismatch {
                    expected: n_assets,
                    got: b.len(),
                });
            }
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return Err(Error::domain(format!(
                "sigma floor must be positive, got {}",
                self.sigma_floor
            )));
        }
        Ok(())
    }

    fn barycenter_weights(&self) -> &Simplex {
        self.barycenter_weights
            .as_ref()
            .unwrap_or_else(|| self.weights.weights())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KupiecResult {
    pub m: usize,
    pub x: usize,
    pub h: f64,
    pub p: f64,
    pub lr: f64,
    pub p_value: f64,
    pub rejected: bool,
}

/// Upper tail of χ²(1): `P(χ²₁ > lr) = 2(1 − Φ(√lr))`.
pub fn chi2_1_sf(lr: f64) -> Result<f64> {
    if lr.is_nan() || lr < 0.0 {
        return Err(Error::domain(format!(
            "chi-square statistic must be nonnegative, got {lr}"
        )));
    }
    Ok(2.0 * normal_sf(lr.sqrt()))
}

/// `k·ln(q)` with `0·ln 0 = 0`.
fn xlogy(k: f64, q: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * q.ln()
    }
}

/// Kupiec POF likelihood ratio for `x` exceptions in `m` days at exception
/// probability `p`, rejected at 95% confidence.
pub fn kupiec_test(m: usize, x: usize, p: f64) -> Result<KupiecResult> {
    if m == 0 {
        return Err(Error::domain("kupiec test needs at least one observation"));
    }
    if x > m {
        return Err(Error::domain(format!(
            "{x} exceptions exceed {m} observations"
        )));
    }
    check_probability("p", p)?;
    let (mf, xf) = (m as f64, x as f64);
    let h = xf / mf;
    let null = xlogy(mf - xf, 1.0 - p) + xlogy(xf, p);
    let alt = xlogy(mf - xf, 1.0 - h) + xlogy(xf, h);
    let lr = (-2.0 * (null - alt)).max(0.0);
    let p_value = chi2_1_sf(lr)?;
    Ok(KupiecResult {
        m,
        x,
        h,
        p,
        lr,
        p_value,
        rejected: p_value < SIGNIFICANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRecord {
    pub alpha: f64,
    pub var_path: Vec<f64>,
    pub exceptions: usize,
    pub kupiec: KupiecResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub model: Model,
    pub window: usize,
    pub n_obs: usize,
    pub test_days: usize,
    pub test_dates: Vec<NaiveDate>,
    pub realized_loss: Vec<f64>,
    pub records: Vec<AlphaRecord>,
}

/// One line of the tabular report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub model: Model,
    pub alpha: f64,
    pub expected_exceptions: f64,
    pub var_level_last: f64,
    pub var_level_mean: f64,
    pub exceptions: usize,
    pub lr: f64,
    pub p_value: f64,
    pub rejected: bool,
}

impl BacktestReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.records
            .iter()
            .map(|r| ReportRow {
                model: self.model,
                alpha: r.alpha,
                expected_exceptions: r.alpha * self.test_days as f64,
                var_level_last: r.var_path.last().copied().unwrap_or(f64::NAN),
                var_level_mean: sample_mean(&r.var_path),
                exceptions: r.exceptions,
                lr: r.kupiec.lr,
                p_value: r.kupiec.p_value,
                rejected: r.kupiec.rejected,
            })
            .collect()
    }

    pub fn first_test_date(&self) -> Option<NaiveDate> {
        self.test_dates.first().copied()
    }

    pub fn last_test_date(&self) -> Option<NaiveDate> {
        self.test_dates.last().copied()
    }
}

/// Number of strictly exceeded forecasts.
pub fn count_exceptions(realized_loss: &[f64], var_path: &[f64]) -> usize {
    realized_loss
        .iter()
        .zip(var_path)
        .filter(|(loss, var)| loss > var)
        .count()
}

fn sample_covariance(cols: &[&[f64]]) -> DMatrix<f64> {
    let n = cols.len();
    let len = cols[0].len();
    let means: Vec<f64> = cols.iter().map(|c| sample_mean(c)).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let s: f64 = (0..len)
            .map(|k| (cols[i][k] - means[i]) * (cols[j][k] - means[j]))
            .sum();
        s / (len - 1) as f64
    })
}

struct Engine<'a> {
    returns: &'a ReturnMatrix,
    cfg: &'a BacktestConfig,
    queries: Vec<RiskQuery>,
    ewma: Option<Vec<Vec<f64>>>,
}

impl Engine<'_> {
    fn scale(&self, s: f64) -> f64 {
        s.max(self.cfg.sigma_floor)
    }

    /// Loss VaR forecasts for day `t` from observations `t − window .. t`.
    fn forecast(&self, t: usize) -> Result<Vec<f64>> {
        let w = self.cfg.window;
        let cols: Vec<&[f64]> = self
            .returns
            .columns()
            .iter()
            .map(|c| &c[t - w..t])
            .collect();
        let means: Vec<f64> = cols.iter().map(|c| sample_mean(c)).collect();

        match self.cfg.model {
            Model::WbNormal | Model::WbNormalStar => {
                let mut members = Vec::with_capacity(cols.len());
                for (j, c) in cols.iter().enumerate() {
                    let sd = match &self.ewma {
                        Some(paths) => paths[j][t - 1],
                        None => sample_sd(c)?,
                    };
                    members.push(LocationScale::gaussian(means[j], self.scale(sd))?);
                }
                let ensemble =
                    WeightedEnsemble::new(members, self.cfg.barycenter_weights().clone())?;
                self.queries.iter().map(|q| wb_var(&ensemble, *q)).collect()
            }
            Model::SimpleSum => {
                let mut members = Vec::with_capacity(cols.len());
                for (j, c) in cols.iter().enumerate() {
                    members.push(LocationScale::gaussian(
                        means[j],
                        self.scale(sample_sd(c)?),
                    )?);
                }
                self.queries
                    .iter()
                    .map(|q| {
                        let each = members
                            .iter()
                            .map(|d| location_scale_var(d, *q))
                            .collect::<Result<Vec<_>>>()?;
                        simple_sum_var(&each)
                    })
                    .collect()
            }
            Model::Varcov => {
                let mut cov = sample_covariance(&cols);
                if check_spd(&cov).is_err() {
                    let f = self.cfg.sigma_floor;
                    cov += DMatrix::identity(cols.len(), cols.len()) * (f * f);
                }
                let mu = DVector::from_vec(means);
                self.queries
                    .iter()
                    .map(|q| varcov_var(&mu, &cov, &self.cfg.weights, *q))
                    .collect()
            }
        }
    }
}

/// Runs the rolling forecast over days `window..n_obs` (0-based).
///
/// Forecasts are computed in parallel and collected in day order, so the report
/// does not depend on scheduling.
pub fn rolling_backtest(returns: &ReturnMatrix, cfg: &BacktestConfig) -> Result<BacktestReport> {
    let n_assets = returns.n_assets();
    cfg.validate(n_assets)?;
    let n_obs = returns.n_obs();
    if n_obs <= cfg.window {
        return Err(Error::InsufficientData {
            needed: cfg.window,
            got: n_obs,
        });
    }
    if returns.columns().iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::domain("return matrix contains non-finite values"));
    }

    let ewma = match cfg.model {
        Model::WbNormalStar => Some(
            returns
                .columns()
                .iter()
                .map(|c| {
                    let sigma0 = cfg
                        .ewma
                        .initial_scale(&c[..cfg.window])?
                        .max(cfg.sigma_floor);
                    ewma_path(c, &cfg.ewma, sigma0)
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };
    let queries = cfg
        .alphas
        .iter()
        .map(|&a| RiskQuery::loss(a))
        .collect::<Result<Vec<_>>>()?;
    let engine = Engine {
        returns,
        cfg,
        queries,
        ewma,
    };

    let forecasts: Vec<Vec<f64>> = (cfg.window..n_obs)
        .into_par_iter()
        .map(|t| engine.forecast(t))
        .collect::<Result<_>>()?;

    let weights = cfg.weights.weights().as_slice();
    let realized_loss: Vec<f64> = (cfg.window..n_obs)
        .map(|t| {
            -returns
                .columns()
                .iter()
                .zip(weights)
                .map(|(c, w)| w * c[t])
                .sum::<f64>()
        })
        .collect();
    let test_days = realized_loss.len();

    let records = cfg
        .alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let var_path: Vec<f64> = forecasts.iter().map(|f| f[k]).collect();
            let exceptions = count_exceptions(&realized_loss, &var_path);
            let kupiec = kupiec_test(test_days, exceptions, alpha)?;
            Ok(AlphaRecord {
                alpha,
                var_path,
                exceptions,
                kupiec,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BacktestReport {
        model: cfg.model,
        window: cfg.window,
        n_obs,
        test_days,
        test_dates: returns.dates()[cfg.window..].to_vec(),
        realized_loss,
        records,
    })
}
