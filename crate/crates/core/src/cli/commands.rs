use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::output::{emit, ensure_dir, io_err, num, opt_num, write_file, Document, Format, Table};
use super::{BacktestArgs, BarycenterArgs, CliError, InputSpec, RealList, StatsArgs, VarArgs};
use crate::backtest::{
    rolling_backtest, BacktestConfig, BacktestReport, Model, ReportRow, DEFAULT_ALPHAS,
};
use crate::distributions::{LocationScale, StandardProfile};
use crate::error::Error;
use crate::ingest::{
    align, describe, load_prices, log_returns, sample_mean, sample_sd, split_periods,
    DescriptiveStats, ReturnMatrix, ReturnSeries,
};
use crate::risk::{
    location_scale_var, simple_sum_var, varcov_var, wb_cvar, wb_var, Convention, PortfolioSpec,
    RiskQuery,
};
use crate::transport::{
    barycenter_1d, barycenter_gaussian_mv, FixedPointOptions, GaussianMeasureMV, Simplex,
    WeightedEnsemble,
};
use crate::volatility::EwmaConfig;

fn load_returns(inputs: &[InputSpec]) -> Result<Vec<ReturnSeries>, CliError> {
    let prices = inputs
        .iter()
        .map(|i| load_prices(i.symbol.clone(), &i.path))
        .collect::<Result<Vec<_>, _>>()?;
    let (aligned, dropped) = align(&prices);
    for (p, d) in prices.iter().zip(dropped) {
        if d > 0 {
            warn!(
                "{}: dropped {d} dates not shared by every input",
                p.symbol()
            );
        }
    }
    Ok(aligned
        .iter()
        .map(log_returns)
        .collect::<Result<Vec<_>, _>>()?)
}

fn simplex_or_equal(weights: Option<&RealList>, n: usize) -> Result<Simplex, CliError> {
    Ok(match weights {
        Some(w) => {
            if w.0.len() != n {
                return Err(CliError::config(format!(
                    "{} weights given for {n} assets",
                    w.0.len()
                )));
            }
            Simplex::new(w.0.clone())?
        }
        None => Simplex::equal(n)?,
    })
}

fn check_alphas(alphas: &[f64]) -> Result<Vec<f64>, CliError> {
    let alphas = if alphas.is_empty() {
        DEFAULT_ALPHAS.to_vec()
    } else {
        alphas.to_vec()
    };
    for &a in &alphas {
        RiskQuery::loss(a)?;
    }
    Ok(alphas)
}

#[derive(Serialize)]
struct StatsConfig<'a> {
    command: &'static str,
    inputs: &'a [InputSpec],
    split: Option<usize>,
    trading_days: u32,
    format: Format,
}

#[derive(Serialize)]
struct StatsRecord {
    symbol: String,
    period: &'static str,
    first_date: Option<NaiveDate>,
    last_date: Option<NaiveDate>,
    #[serde(flatten)]
    stats: DescriptiveStats,
}

pub(super) fn stats(a: &StatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let series = load_returns(&a.inputs)?;
    let mut records = Vec::new();
    for s in &series {
        let periods: Vec<(&'static str, ReturnSeries)> = match a.split {
            Some(n) => {
                let (sample, test) = split_periods(s, n)?;
                vec![("sample", sample), ("test", test)]
            }
            None => vec![("full", s.clone())],
        };
        for (period, r) in periods {
            records.push(StatsRecord {
                symbol: s.symbol().to_string(),
                period,
                first_date: r.dates().first().copied(),
                last_date: r.dates().last().copied(),
                stats: describe(&r, a.trading_days)?,
            });
        }
    }

    let mut table = Table::new([
        "symbol",
        "period",
        "first_date",
        "last_date",
        "count",
        "mean",
        "annualized_mean",
        "sd",
        "min",
        "median",
        "max",
        "excess_kurtosis",
        "skewness",
    ]);
    for r in &records {
        let s = &r.stats;
        table.push(vec![
            r.symbol.clone(),
            r.period.to_string(),
            r.first_date.map(|d| d.to_string()).unwrap_or_default(),
            r.last_date.map(|d| d.to_string()).unwrap_or_default(),
            s.count.to_string(),
            num(s.mean),
            num(s.annualized_mean),
            num(s.sd),
            num(s.min),
            num(s.median),
            num(s.max),
            opt_num(s.excess_kurtosis),
            opt_num(s.skewness),
        ]);
    }

    let cfg = StatsConfig {
        command: "stats",
        inputs: &a.inputs,
        split: a.split,
        trading_days: a.trading_days,
        format: a.output.format,
    };
    let doc = Document::new(&cfg, &records, table);
    if let Some(path) = emit(
        a.output.out_dir.as_deref(),
        "stats",
        a.output.format,
        &doc,
        out,
    )? {
        writeln!(out, "wrote {} records to {}", records.len(), path.display()).map_err(io_err)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BacktestRunConfig<'a> {
    command: &'static str,
    inputs: &'a [InputSpec],
    models: Vec<Model>,
    window: usize,
    alphas: &'a [f64],
    ewma: EwmaConfig,
    weights: &'a [f64],
    barycenter_weights: Option<&'a [f64]>,
    sigma_floor: f64,
    convention: Convention,
    format: Format,
}

#[derive(Serialize)]
struct BacktestRecord {
    #[serde(flatten)]
    row: ReportRow,
    test_days: usize,
    first_test_date: Option<NaiveDate>,
    last_test_date: Option<NaiveDate>,
}

fn var_path_table(report: &BacktestReport) -> Table {
    let mut headers = vec!["date".to_string(), "realized_loss".to_string()];
    headers.extend(
        report
            .records
            .iter()
            .map(|r| format!("var_{}", num(r.alpha))),
    );
    let mut table = Table::new(headers);
    for (i, date) in report.test_dates.iter().enumerate() {
        let mut row = vec![date.to_string(), num(report.realized_loss[i])];
        row.extend(report.records.iter().map(|r| num(r.var_path[i])));
        table.push(row);
    }
    table
}

pub(super) fn backtest(a: &BacktestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let alphas = check_alphas(&a.alphas)?;
    let ewma = EwmaConfig::new(a.zeta, a.ewma_init.into())?;
    if a.window < 2 {
        return Err(CliError::config(format!(
            "window must be at least 2, got {}",
            a.window
        )));
    }
    let n = a.inputs.len();
    let weights = simplex_or_equal(a.weights.as_ref(), n)?;
    let bary_weights = a
        .barycenter_weights
        .as_ref()
        .map(|w| simplex_or_equal(Some(w), n))
        .transpose()?;

    let series = load_returns(&a.inputs)?;
    let matrix = ReturnMatrix::from_series(&series)?;

    let mut models: Vec<Model> = Vec::new();
    for m in &a.models {
        let m = Model::from(*m);
        if !models.contains(&m) {
            models.push(m);
        }
    }

    let mut reports = Vec::new();
    for &model in &models {
        let cfg = BacktestConfig {
            window: a.window,
            alphas: alphas.clone(),
            model,
            ewma,
            weights: PortfolioSpec::new(weights.clone()),
            barycenter_weights: bary_weights.clone(),
            sigma_floor: a.sigma_floor,
        };
        reports.push(rolling_backtest(&matrix, &cfg)?);
    }

    let records: Vec<BacktestRecord> = reports
        .iter()
        .flat_map(|r| {
            r.rows().into_iter().map(move |row| BacktestRecord {
                row,
                test_days: r.test_days,
                first_test_date: r.first_test_date(),
                last_test_date: r.last_test_date(),
            })
        })
        .collect();

    let mut table = Table::new([
        "model",
        "alpha",
        "expected_exceptions",
        "var_level_last",
        "var_level_mean",
        "exceptions",
        "lr",
        "p_value",
        "rejected",
        "test_days",
        "first_test_date",
        "last_test_date",
    ]);
    for r in &records {
        table.push(vec![
            r.row.model.to_string(),
            num(r.row.alpha),
            num(r.row.expected_exceptions),
            num(r.row.var_level_last),
            num(r.row.var_level_mean),
            r.row.exceptions.to_string(),
            num(r.row.lr),
            num(r.row.p_value),
            r.row.rejected.to_string(),
            r.test_days.to_string(),
            r.first_test_date.map(|d| d.to_string()).unwrap_or_default(),
            r.last_test_date.map(|d| d.to_string()).unwrap_or_default(),
        ]);
    }

    let cfg = BacktestRunConfig {
        command: "backtest",
        inputs: &a.inputs,
        models: models.clone(),
        window: a.window,
        alphas: &alphas,
        ewma,
        weights: weights.as_slice(),
        barycenter_weights: bary_weights.as_ref().map(|w| w.as_slice()),
        sigma_floor: a.sigma_floor,
        convention: Convention::Loss,
        format: a.output.format,
    };
    let doc = Document::new(&cfg, &records, table);
    let out_dir = a.output.out_dir.as_deref();
    if let Some(path) = emit(out_dir, "backtest_report", a.output.format, &doc, out)? {
        writeln!(out, "wrote report to {}", path.display()).map_err(io_err)?;
        for report in &reports {
            let path = write_var_paths(out_dir.expect("out dir set"), report)?;
            writeln!(out, "wrote daily VaR path to {}", path.display()).map_err(io_err)?;
        }
        for r in &records {
            writeln!(
                out,
                "{:<15} alpha={:<6} exceptions={:>5} expected={:>8} p_value={:<12} rejected={}",
                r.row.model.to_string(),
                num(r.row.alpha),
                r.row.exceptions,
                num(r.row.expected_exceptions),
                num(r.row.p_value),
                if r.row.rejected { "yes" } else { "no" }
            )
            .map_err(io_err)?;
        }
    }
    Ok(())
}

fn write_var_paths(dir: &Path, report: &BacktestReport) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(format!("var_path_{}.csv", report.model));
    write_file(&path, &var_path_table(report).to_csv(None)?)?;
    Ok(path)
}

#[derive(Serialize)]
struct VarRunConfig<'a> {
    command: &'static str,
    inputs: &'a [InputSpec],
    symbols: Vec<String>,
    means: &'a [f64],
    sds: &'a [f64],
    alphas: &'a [f64],
    weights: &'a [f64],
    barycenter_weights: &'a [f64],
    convention: Convention,
    format: Format,
}

#[derive(Serialize)]
struct VarRecord {
    alpha: f64,
    convention: Convention,
    wb_var: f64,
    wb_cvar: f64,
    varcov_var: Option<f64>,
    simple_sum_var: f64,
}

pub(super) fn var(a: &VarArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let alphas = check_alphas(&a.alphas)?;
    let convention = Convention::from(a.convention);

    let (symbols, means, sds, cov) = match (&a.means, &a.sds) {
        (Some(m), Some(s)) => {
            if m.0.len() != s.0.len() {
                return Err(CliError::config(format!(
                    "{} means but {} scales",
                    m.0.len(),
                    s.0.len()
                )));
            }
            let symbols = (1..=m.0.len()).map(|i| format!("asset{i}")).collect();
            (symbols, m.0.clone(), s.0.clone(), None)
        }
        _ if !a.inputs.is_empty() => {
            let series = load_returns(&a.inputs)?;
            let cols: Vec<&[f64]> = series.iter().map(|s| s.values()).collect();
            let means: Vec<f64> = cols.iter().map(|c| sample_mean(c)).collect();
            let sds = cols
                .iter()
                .map(|c| sample_sd(c))
                .collect::<Result<Vec<_>, _>>()?;
            let len = cols[0].len();
            let cov = DMatrix::from_fn(cols.len(), cols.len(), |i, j| {
                (0..len)
                    .map(|k| (cols[i][k] - means[i]) * (cols[j][k] - means[j]))
                    .sum::<f64>()
                    / (len - 1) as f64
            });
            let symbols = series.iter().map(|s| s.symbol().to_string()).collect();
            (symbols, means, sds, Some(cov))
        }
        _ => {
            return Err(CliError::config(
                "give either --input files or --means with --sds",
            ))
        }
    };

    let n = means.len();
    let weights = simplex_or_equal(a.weights.as_ref(), n)?;
    let bary_weights = match &a.barycenter_weights {
        Some(w) => simplex_or_equal(Some(w), n)?,
        None => weights.clone(),
    };
    let members = means
        .iter()
        .zip(&sds)
        .map(|(m, s)| LocationScale::gaussian(*m, *s))
        .collect::<Result<Vec<_>, _>>()?;
    let ensemble = WeightedEnsemble::new(members.clone(), bary_weights.clone())?;
    let portfolio = PortfolioSpec::new(weights.clone());
    let mu = DVector::from_column_slice(&means);

    let mut records = Vec::new();
    for &alpha in &alphas {
        let q = RiskQuery::new(alpha, convention)?;
        let each = members
            .iter()
            .map(|d| location_scale_var(d, q))
            .collect::<Result<Vec<_>, _>>()?;
        records.push(VarRecord {
            alpha,
            convention,
            wb_var: wb_var(&ensemble, q)?,
            wb_cvar: wb_cvar(&ensemble, q)?,
            varcov_var: cov
                .as_ref()
                .map(|c| varcov_var(&mu, c, &portfolio, q))
                .transpose()?,
            simple_sum_var: simple_sum_var(&each)?,
        });
    }

    let mut table = Table::new([
        "alpha",
        "convention",
        "wb_var",
        "wb_cvar",
        "varcov_var",
        "simple_sum_var",
    ]);
    for r in &records {
        table.push(vec![
            num(r.alpha),
            r.convention.to_string(),
            num(r.wb_var),
            num(r.wb_cvar),
            opt_num(r.varcov_var),
            num(r.simple_sum_var),
        ]);
    }
    let cfg = VarRunConfig {
        command: "var",
        inputs: &a.inputs,
        symbols,
        means: &means,
        sds: &sds,
        alphas: &alphas,
        weights: weights.as_slice(),
        barycenter_weights: bary_weights.as_slice(),
        convention,
        format: a.output.format,
    };
    let doc = Document::new(&cfg, &records, table);
    if let Some(path) = emit(
        a.output.out_dir.as_deref(),
        "var",
        a.output.format,
        &doc,
        out,
    )? {
        writeln!(out, "wrote {} records to {}", records.len(), path.display()).map_err(io_err)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BarycenterRunConfig<'a> {
    command: &'static str,
    means: Option<&'a [f64]>,
    sds: Option<&'a [f64]>,
    covs: &'a [PathBuf],
    mean_vectors: Vec<&'a [f64]>,
    weights: &'a [f64],
    tol: f64,
    max_iter: usize,
    scheme: &'static str,
    format: Format,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum BarycenterRecord {
    #[serde(rename = "1d")]
    OneDim {
        profile: String,
        location: f64,
        scale: f64,
    },
    GaussianMv {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        residual: f64,
        iterations: usize,
    },
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            kind => Error::Parse {
                path: path.to_path_buf(),
                row: 0,
                message: format!("{kind:?}"),
            },
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let parse = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            message,
        };
        let rec = rec.map_err(|e| parse(e.to_string()))?;
        let row = rec
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| parse(format!("bad number {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 0,
            message: "covariance file must hold a square matrix".into(),
        }
        .into());
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

pub(super) fn barycenter(a: &BarycenterArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let opts = FixedPointOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        scheme: a.scheme.into(),
    };

    let (record, weights, summary) = if let (Some(m), Some(s)) = (&a.means, &a.sds) {
        if m.0.len() != s.0.len() {
            return Err(CliError::config(format!(
                "{} means but {} scales",
                m.0.len(),
                s.0.len()
            )));
        }
        let weights = simplex_or_equal(a.weights.as_ref(), m.0.len())?;
        let members =
            m.0.iter()
                .zip(&s.0)
                .map(|(m, s)| LocationScale::gaussian(*m, *s))
                .collect::<Result<Vec<_>, _>>()?;
        let e = WeightedEnsemble::new(members, weights.clone())?;
        let b = barycenter_1d(&e);
        let summary = format!(
            "{} barycenter (location, scale) = ({}, {})",
            b.profile().kind(),
            num(b.location()),
            num(b.scale())
        );
        let record = BarycenterRecord::OneDim {
            profile: b.profile().kind().to_string(),
            location: b.location(),
            scale: b.scale(),
        };
        (record, weights, summary)
    } else if !a.covs.is_empty() {
        if !a.mean_vectors.is_empty() && a.mean_vectors.len() != a.covs.len() {
            return Err(CliError::config(format!(
                "{} mean vectors for {} covariance files",
                a.mean_vectors.len(),
                a.covs.len()
            )));
        }
        let weights = simplex_or_equal(a.weights.as_ref(), a.covs.len())?;
        let mut measures = Vec::new();
        for (i, path) in a.covs.iter().enumerate() {
            let cov = read_matrix(path)?;
            let mean = match a.mean_vectors.get(i) {
                Some(v) => DVector::from_vec(v.0.clone()),
                None => DVector::zeros(cov.nrows()),
            };
            let m = GaussianMeasureMV::new(mean, cov).map_err(|e| match e {
                Error::NotSpd(msg) => Error::NotSpd(format!("{}: {msg}", path.display())),
                other => other,
            })?;
            measures.push(m);
        }
        let (bary, report) = barycenter_gaussian_mv(&measures, &weights, opts)?;
        let cov = bary.covariance();
        let covariance: Vec<Vec<f64>> = (0..cov.nrows())
            .map(|i| (0..cov.ncols()).map(|j| cov[(i, j)]).collect())
            .collect();
        let summary = format!(
            "gaussian barycenter in dimension {}: residual {:e} after {} iterations",
            bary.dim(),
            report.residual,
            report.iterations
        );
        let record = BarycenterRecord::GaussianMv {
            mean: bary.mean().iter().copied().collect(),
            covariance,
            residual: report.residual,
            iterations: report.iterations,
        };
        (record, weights, summary)
    } else {
        return Err(CliError::config(
            "give either --means with --sds or one or more --cov files",
        ));
    };

    let mut table = Table::new(["field", "value"]);
    match &record {
        BarycenterRecord::OneDim {
            location, scale, ..
        } => {
            table.push(vec!["location".into(), num(*location)]);
            table.push(vec!["scale".into(), num(*scale)]);
        }
        BarycenterRecord::GaussianMv {
            mean,
            covariance,
            residual,
            iterations,
        } => {
            for (i, m) in mean.iter().enumerate() {
                table.push(vec![format!("mean[{i}]"), num(*m)]);
            }
            for (i, row) in covariance.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    table.push(vec![format!("covariance[{i}][{j}]"), num(*v)]);
                }
            }
            table.push(vec!["residual".into(), num(*residual)]);
            table.push(vec!["iterations".into(), iterations.to_string()]);
        }
    }

    let cfg = BarycenterRunConfig {
        command: "barycenter",
        means: a.means.as_ref().map(|m| m.0.as_slice()),
        sds: a.sds.as_ref().map(|s| s.0.as_slice()),
        covs: &a.covs,
        mean_vectors: a.mean_vectors.iter().map(|v| v.0.as_slice()).collect(),
        weights: weights.as_slice(),
        tol: a.tol,
        max_iter: a.max_iter,
        scheme: match opts.scheme {
            crate::transport::FixedPointScheme::Interpolation => "interpolation",
            crate::transport::FixedPointScheme::Substitution => "substitution",
        },
        format: a.output.format,
    };
    let doc = Document::new(&cfg, &[record], table);
    let written = emit(
        a.output.out_dir.as_deref(),
        "barycenter",
        a.output.format,
        &doc,
        out,
    )?;
    if let Some(path) = written {
        writeln!(out, "{summary}").map_err(io_err)?;
        writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
    }
    Ok(())
}
