//! 2-Wasserstein distances and barycenters.
//!
//! On the real line the barycenter of an ensemble is the measure whose quantile
//! function is the weighted average of the members' quantile functions, so a
//! location-scale ensemble has a barycenter in the same family with averaged
//! location and scale. For Gaussian measures on `R^d` the barycenter covariance is
//! the positive-definite root of `Σ = Σ_i λ_i (Σ^{1/2} Σ_i Σ^{1/2})^{1/2}`, found
//! here by fixed-point iteration.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::distributions::{LocationScale, StandardProfile};
use crate::error::{check_probability, Error, Result};

/// Tolerance on `Σ λ_j = 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const SPD_RELATIVE_FLOOR: f64 = 1e-13;
const SYMMETRY_TOL: f64 = 1e-12;

pub const DEFAULT_W2_GRID: usize = 10_000;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex(Vec<f64>);

impl Simplex {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Simplex("no weights given".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Simplex(format!(
                "weight {w} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Simplex(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn equal(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Simplex("no weights given".into()));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    /// All mass on index `k`.
    pub fn vertex(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: k + 1,
            });
        }
        let mut w = vec![0.0; n];
        w[k] = 1.0;
        Ok(Self(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

/// Members of one location-scale family with barycentric weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble<P> {
    members: Vec<LocationScale<P>>,
    weights: Simplex,
}

impl<P: StandardProfile + Clone> WeightedEnsemble<P> {
    pub fn new(members: Vec<LocationScale<P>>, weights: Simplex) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Empty("ensemble has no members"));
        }
        if members.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: members.len(),
                got: weights.len(),
            });
        }
        let kind = members[0].profile().kind();
        if members.iter().any(|m| m.profile().kind() != kind) {
            return Err(Error::domain(
                "ensemble members must share one profile kind",
            ));
        }
        Ok(Self { members, weights })
    }

    pub fn equally_weighted(members: Vec<LocationScale<P>>) -> Result<Self> {
        let weights = Simplex::equal(members.len())?;
        Self::new(members, weights)
    }

    pub fn members(&self) -> &[LocationScale<P>] {
        &self.members
    }

    pub fn weights(&self) -> &Simplex {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `Σ λ_j m_j`.
    pub fn mean_location(&self) -> f64 {
        self.weighted(|m| m.location())
    }

    /// `Σ λ_j σ_j`.
    pub fn mean_scale(&self) -> f64 {
        self.weighted(|m| m.scale())
    }

    fn weighted(&self, f: impl Fn(&LocationScale<P>) -> f64) -> f64 {
        self.members
            .iter()
            .zip(self.weights.iter())
            .map(|(m, w)| w * f(m))
            .sum()
    }
}

/// Midpoint-rule `W₂` between two 1D measures via their quantile functions.
pub fn w2_1d<P: StandardProfile, Q: StandardProfile>(
    a: &LocationScale<P>,
    b: &LocationScale<Q>,
    grid_size: usize,
) -> Result<f64> {
    if grid_size < 2 {
        return Err(Error::domain(format!(
            "grid_size must be at least 2, got {grid_size}"
        )));
    }
    let h = 1.0 / grid_size as f64;
    let mut sum = 0.0;
    for i in 0..grid_size {
        let u = (i as f64 + 0.5) * h;
        let d = a.quantile(u)? - b.quantile(u)?;
        sum += d * d;
    }
    Ok((sum * h).sqrt())
}

/// Exact `W₂` between two members of the same location-scale family:
/// `√((m_a − m_b)² + σ_Z²(σ_a − σ_b)²)`.
pub fn w2_same_family<P: StandardProfile>(a: &LocationScale<P>, b: &LocationScale<P>) -> f64 {
    let dm = a.location() - b.location();
    let ds = a.scale() - b.scale();
    (dm * dm + a.profile().variance() * ds * ds).sqrt()
}

/// Barycenter of a location-scale ensemble: the family member with location
/// `Σ λ_j m_j` and scale `Σ λ_j σ_j`.
pub fn barycenter_1d<P: StandardProfile + Clone>(e: &WeightedEnsemble<P>) -> LocationScale<P> {
    let profile = e.members()[0].profile().clone();
    // Convex combinations of valid members stay valid.
    LocationScale::new(profile, e.mean_location(), e.mean_scale())
        .expect("convex combination of positive scales is positive")
}

/// Quantile function of the barycenter, `Σ λ_j F_j⁻¹(u)`.
pub fn barycenter_quantile<P: StandardProfile + Clone>(
    e: &WeightedEnsemble<P>,
    u: f64,
) -> Result<f64> {
    check_probability("u", u)?;
    e.members()
        .iter()
        .zip(e.weights().iter())
        .map(|(m, w)| m.quantile(u).map(|q| w * q))
        .sum()
}

/// A Gaussian measure on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasureMV {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianMeasureMV {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Empty("mean vector"));
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: covariance.nrows().max(covariance.ncols()),
            });
        }
        check_spd(&covariance)?;
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub solution: DMatrix<f64>,
    /// Frobenius norm of `Σ − Σ_i λ_i (Σ^{1/2} Σ_i Σ^{1/2})^{1/2}` at `solution`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FixedPointScheme {
    /// `Σ ← Σ^{-1/2} (Σ_i λ_i (Σ^{1/2} Σ_i Σ^{1/2})^{1/2})² Σ^{-1/2}`.
    #[default]
    Interpolation,
    /// `Σ ← Σ_i λ_i (Σ^{1/2} Σ_i Σ^{1/2})^{1/2}`, kept for cross-checking.
    Substitution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: FixedPointScheme,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            scheme: FixedPointScheme::Interpolation,
        }
    }
}

pub(crate) fn check_spd(s: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !s.is_square() {
        return Err(Error::NotSpd(format!(
            "{}x{} matrix is not square",
            s.nrows(),
            s.ncols()
        )));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotSpd("matrix has non-finite entries".into()));
    }
    let scale = s.amax().max(1.0);
    let asym = (s - s.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSpd(format!(
            "asymmetry {asym:e} exceeds tolerance"
        )));
    }
    let eig = SymmetricEigen::new(s.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if max.is_nan() || max <= 0.0 || min <= SPD_RELATIVE_FLOOR * max {
        return Err(Error::NotSpd(format!(
            "eigenvalues span [{min:e}, {max:e}]"
        )));
    }
    Ok(eig)
}

fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let out = v * d * v.transpose();
    symmetrize(out)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Principal square root of a symmetric positive-definite matrix.
pub fn sqrtm_spd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = check_spd(s)?;
    Ok(spectral_map(&eig, f64::sqrt))
}

/// `(S^{1/2}, S^{-1/2})` from one eigendecomposition.
fn sqrt_and_inv_sqrt(s: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = check_spd(s)?;
    Ok((
        spectral_map(&eig, f64::sqrt),
        spectral_map(&eig, |x| 1.0 / x.sqrt()),
    ))
}

/// `Σ_i λ_i (R Σ_i R)^{1/2}` with `R = Σ^{1/2}`.
fn root_average(
    root: &DMatrix<f64>,
    covariances: &[&DMatrix<f64>],
    weights: &Simplex,
) -> Result<DMatrix<f64>> {
    let d = root.nrows();
    let mut acc = DMatrix::zeros(d, d);
    for (cov, w) in covariances.iter().zip(weights.iter()) {
        if w == 0.0 {
            continue;
        }
        let inner = symmetrize(root * *cov * root);
        acc += sqrtm_spd(&inner)? * w;
    }
    Ok(acc)
}

/// Frobenius residual of the barycenter equation at a candidate covariance.
pub fn fixed_point_residual(
    candidate: &DMatrix<f64>,
    measures: &[GaussianMeasureMV],
    weights: &Simplex,
) -> Result<f64> {
    let covs: Vec<_> = measures.iter().map(|m| m.covariance()).collect();
    let root = sqrtm_spd(candidate)?;
    let t = root_average(&root, &covs, weights)?;
    Ok((candidate - t).norm())
}

/// Gaussian barycenter on `R^d`.
///
/// Starts from `Σ λ_i Σ_i` and iterates `opts.scheme` until the Frobenius residual
/// of the barycenter equation is at most `opts.tol · min(1, ‖Σ‖_F)`, so small-scale
/// inputs (daily return covariances) still converge in relative terms. The returned
/// report always describes the solution it ships with; on non-convergence the last
/// iterate comes back inside [`Error::Convergence`].
pub fn barycenter_gaussian_mv(
    measures: &[GaussianMeasureMV],
    weights: &Simplex,
    opts: FixedPointOptions,
) -> Result<(GaussianMeasureMV, FixedPointReport)> {
    let first = measures
        .first()
        .ok_or(Error::Empty("no Gaussian measures"))?;
    if measures.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: measures.len(),
            got: weights.len(),
        });
    }
    let d = first.dim();
    if let Some(m) = measures.iter().find(|m| m.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: m.dim(),
        });
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::domain(format!(
            "tol must be positive, got {}",
            opts.tol
        )));
    }

    let mut mean = DVector::zeros(d);
    let mut sigma = DMatrix::zeros(d, d);
    for (m, w) in measures.iter().zip(weights.iter()) {
        mean += m.mean() * w;
        sigma += m.covariance() * w;
    }
    let covs: Vec<_> = measures.iter().map(|m| m.covariance()).collect();

    let mut iterations = 0;
    loop {
        let (root, inv_root) = sqrt_and_inv_sqrt(&sigma)?;
        let t = root_average(&root, &covs, weights)?;
        let residual = (&sigma - &t).norm();
        let target = opts.tol * sigma.norm().min(1.0);
        if residual <= target || iterations >= opts.max_iter {
            let report = FixedPointReport {
                solution: sigma.clone(),
                residual,
                iterations,
            };
            if residual > target {
                return Err(Error::Convergence(Box::new(report)));
            }
            let bary = GaussianMeasureMV {
                mean,
                covariance: sigma,
            };
            return Ok((bary, report));
        }
        sigma = match opts.scheme {
            FixedPointScheme::Interpolation => symmetrize(&inv_root * &t * &t * &inv_root),
            FixedPointScheme::Substitution => symmetrize(t),
        };
        iterations += 1;
    }
}
