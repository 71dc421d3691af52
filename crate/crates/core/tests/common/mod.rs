//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wbrisk::distributions::{normal_cdf, normal_pdf};

/// Φ⁻¹ by bisection on the CDF to 1e-12 (much tighter in practice).
pub fn bisect_quantile(u: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `∫ f` on `[a, b]` by composite Simpson with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// `E[Z | Z > Φ⁻¹(α)]` by quadrature of `z φ(z)` with a bisection quantile.
pub fn tail_mean_oracle(alpha: f64) -> f64 {
    let q = bisect_quantile(alpha);
    simpson(|z| z * normal_pdf(z), q, q + 40.0, 400_000) / (1.0 - alpha)
}

/// Principal square root by the Denman–Beavers iteration.
pub fn denman_beavers_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = a.clone();
    let mut z = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..100 {
        let yi = y.clone().try_inverse().expect("invertible");
        let zi = z.clone().try_inverse().expect("invertible");
        let ny = (&y + zi) * 0.5;
        let nz = (&z + yi) * 0.5;
        let done = (&ny - &y).norm() <= 1e-15 * ny.norm();
        y = ny;
        z = nz;
        if done {
            break;
        }
    }
    y
}

/// Barycenter-equation residual recomputed with Denman–Beavers roots.
pub fn residual_oracle(sigma: &DMatrix<f64>, covs: &[DMatrix<f64>], weights: &[f64]) -> f64 {
    let root = denman_beavers_sqrt(sigma);
    let mut t = DMatrix::zeros(sigma.nrows(), sigma.ncols());
    for (c, w) in covs.iter().zip(weights) {
        let inner = &root * c * &root;
        let inner = (&inner + inner.transpose()) * 0.5;
        t += denman_beavers_sqrt(&inner) * *w;
    }
    (sigma - t).norm()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random SPD matrix `A Aᵀ + εI` with entries of `A` uniform-ish Gaussian.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let n = Normal::new(0.0, 1.0).unwrap();
    let a = DMatrix::from_fn(d, d, |_, _| n.sample(rng));
    let s = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
    (&s + s.transpose()) * 0.5
}

/// `n` iid draws from `N(mean, sd²)` per asset.
pub fn gaussian_columns(seed: u64, n: usize, params: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    params
        .iter()
        .map(|&(m, s)| {
            let d = Normal::new(m, s).unwrap();
            (0..n).map(|_| d.sample(&mut r)).collect()
        })
        .collect()
}

/// `[lo, hi]` such that `P(X < lo) ≤ (1−level)/2` and `P(X > hi) ≤ (1−level)/2` for `X ~ Bin(n, p)`.
pub fn binomial_band(n: usize, p: f64, level: f64) -> (usize, usize) {
    let tail = (1.0 - level) / 2.0;
    // log pmf by the ratio recursion, no lgamma needed
    let log0 = n as f64 * (1.0 - p).ln();
    let odds = p.ln() - (1.0 - p).ln();
    let pmf: Vec<f64> = std::iter::once(log0)
        .chain((1..=n).scan(log0, |lp, k| {
            *lp += ((n - k + 1) as f64).ln() - (k as f64).ln() + odds;
            Some(*lp)
        }))
        .map(f64::exp)
        .collect();
    let mut cdf = 0.0;
    let mut lo = 0;
    for (k, v) in pmf.iter().enumerate() {
        if cdf + v > tail {
            lo = k;
            break;
        }
        cdf += v;
    }
    let mut sf = 0.0;
    let mut hi = n;
    for k in (0..=n).rev() {
        if sf + pmf[k] > tail {
            hi = k;
            break;
        }
        sf += pmf[k];
    }
    (lo, hi)
}

/// Writes a `date,close` file with consecutive calendar dates from 2000-01-03.
pub fn write_prices(dir: &std::path::Path, name: &str, closes: &[f64]) -> std::path::PathBuf {
    use std::fmt::Write as _;
    let start = chrono::NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    let mut s = String::from("date,close\n");
    for (i, c) in closes.iter().enumerate() {
        let d = start + chrono::TimeDelta::days(i as i64);
        writeln!(s, "{d},{c}").unwrap();
    }
    let path = dir.join(name);
    std::fs::write(&path, s).unwrap();
    path
}

/// Prices following a geometric random walk with Gaussian log-returns.
pub fn random_walk(seed: u64, n: usize, m: f64, s: f64) -> Vec<f64> {
    let col = &gaussian_columns(seed, n - 1, &[(m, s)])[0];
    let mut p = vec![100.0];
    for x in col {
        let last = *p.last().unwrap();
        p.push(last * x.exp());
    }
    p
}

/// Comonotone columns `m_j + s_j·z_t` driven by one iid standard normal series.
pub fn comonotone_columns(seed: u64, n: usize, params: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let z = &gaussian_columns(seed, n, &[(0.0, 1.0)])[0];
    params
        .iter()
        .map(|&(m, s)| z.iter().map(|v| m + s * v).collect())
        .collect()
}
