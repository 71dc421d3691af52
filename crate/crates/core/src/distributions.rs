//! Standardized distribution profiles and the location-scale measures built on them.
//!
//! A [`StandardProfile`] is a zero-location, unit-scale law `Z`. Every
//! [`LocationScale`] is the law of `m + σ Z` for one such profile, so quantiles and
//! tail expectations compose affinely. Only the standard [`Gaussian`] ships, but
//! any profile that can evaluate density, CDF, quantile and variance plugs into the
//! barycenter and risk formulas unchanged.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// Upper probability at which quadrature-based tail means truncate.
const TAIL_TRUNCATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Gaussian,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKind::Gaussian => f.write_str("gaussian"),
        }
    }
}

/// A standardized (zero-location, unit-scale) real distribution.
///
/// `tail_mean` and `lower_tail_mean` default to adaptive quadrature of `z·g(z)`
/// over the tail, truncated at probability `1e-12`; profiles with a closed form
/// should override them.
pub trait StandardProfile: fmt::Debug + Send + Sync {
    fn kind(&self) -> ProfileKind;

    fn density(&self, z: f64) -> f64;

    fn cdf(&self, z: f64) -> f64;

    /// Inverse CDF on the open interval `(0, 1)`.
    fn quantile(&self, u: f64) -> Result<f64>;

    /// Variance of the standardized law (`σ_Z²`).
    fn variance(&self) -> f64;

    /// `E[Z | Z > quantile(alpha)]`.
    fn tail_mean(&self, alpha: f64) -> Result<f64> {
        upper_tail_mean_by_quadrature(self, alpha)
    }

    /// `E[Z | Z < quantile(alpha)]`.
    fn lower_tail_mean(&self, alpha: f64) -> Result<f64> {
        lower_tail_mean_by_quadrature(self, alpha)
    }
}

/// Quadrature route for `E[Z | Z > quantile(alpha)]`, usable with any profile.
pub fn upper_tail_mean_by_quadrature<P: StandardProfile + ?Sized>(
    profile: &P,
    alpha: f64,
) -> Result<f64> {
    check_probability("alpha", alpha)?;
    let lo = profile.quantile(alpha)?;
    let hi = profile.quantile(1.0 - TAIL_TRUNCATION)?;
    if hi <= lo {
        return Ok(lo);
    }
    let integral = adaptive_simpson(&|z| z * profile.density(z), lo, hi, 1e-14);
    Ok(integral / (1.0 - alpha))
}

/// Quadrature route for `E[Z | Z < quantile(alpha)]`, usable with any profile.
pub fn lower_tail_mean_by_quadrature<P: StandardProfile + ?Sized>(
    profile: &P,
    alpha: f64,
) -> Result<f64> {
    check_probability("alpha", alpha)?;
    let lo = profile.quantile(TAIL_TRUNCATION)?;
    let hi = profile.quantile(alpha)?;
    if hi <= lo {
        return Ok(hi);
    }
    let integral = adaptive_simpson(&|z| z * profile.density(z), lo, hi, 1e-14);
    Ok(integral / alpha)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }

    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// The standard Gaussian `N(0, 1)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gaussian;

impl StandardProfile for Gaussian {
    fn kind(&self) -> ProfileKind {
        ProfileKind::Gaussian
    }

    fn density(&self, z: f64) -> f64 {
        normal_pdf(z)
    }

    fn cdf(&self, z: f64) -> f64 {
        normal_cdf(z)
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        check_probability("u", u)?;
        Ok(normal_quantile(u))
    }

    fn variance(&self) -> f64 {
        1.0
    }

    fn tail_mean(&self, alpha: f64) -> Result<f64> {
        check_probability("alpha", alpha)?;
        Ok(normal_pdf(normal_quantile(alpha)) / (1.0 - alpha))
    }

    fn lower_tail_mean(&self, alpha: f64) -> Result<f64> {
        check_probability("alpha", alpha)?;
        Ok(-normal_pdf(normal_quantile(alpha)) / alpha)
    }
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `Φ(z)`, evaluated through `erfc` so both tails keep full relative precision.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// `1 − Φ(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

// Acklam's rational approximation, relative error below 1.2e-9 before refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

fn acklam(u: f64) -> f64 {
    if u < P_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - P_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - u).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// `Φ⁻¹(u)` for `u` in `(0, 1)`; returns NaN outside that interval.
///
/// Rational approximation followed by one Newton step on the CDF. The residual is
/// taken against whichever tail is smaller so that deep quantiles stay accurate.
pub fn normal_quantile(u: f64) -> f64 {
    if !(u > 0.0 && u < 1.0) {
        return f64::NAN;
    }
    if u == 0.5 {
        return 0.0;
    }
    let z = acklam(u);
    let pdf = normal_pdf(z);
    if pdf == 0.0 {
        return z;
    }
    let residual = if u < 0.5 {
        normal_cdf(z) - u
    } else {
        (1.0 - u) - normal_sf(z)
    };
    z - residual / pdf
}

/// The law of `location + scale · Z` for a standardized profile `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationScale<P = Gaussian> {
    profile: P,
    location: f64,
    scale: f64,
}

impl LocationScale<Gaussian> {
    pub fn gaussian(location: f64, scale: f64) -> Result<Self> {
        Self::new(Gaussian, location, scale)
    }
}

impl<P: StandardProfile> LocationScale<P> {
    /// Fails unless `location` is finite and `scale` is finite and strictly positive.
    pub fn new(profile: P, location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::domain(format!(
                "location must be finite, got {location}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain(format!(
                "scale must be finite and strictly positive, got {scale}"
            )));
        }
        Ok(Self {
            profile,
            location,
            scale,
        })
    }

    pub fn profile(&self) -> &P {
        &self.profile
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        Ok(self.location + self.scale * self.profile.quantile(u)?)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.profile.cdf((x - self.location) / self.scale)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.profile.density((x - self.location) / self.scale) / self.scale
    }

    pub fn variance(&self) -> f64 {
        self.scale * self.scale * self.profile.variance()
    }
}
