//! Tolerance distributions on `[0, 1]`.
//!
//! Users' tolerances `F` and miners' tolerances `G` are laws on the
//! extraction rate. The mechanism only ever needs the expected participation
//! proportions `1 − F(λ)` and `G(λ)`, so each distribution exposes its CDF,
//! survival function and density, never a sampler.
//!
//! The CDF is extended continuously outside the unit interval (`0` below,
//! `1` above) so that update rules without a projection stay well defined.

use std::fmt;

use crate::error::{Error, Result};
use crate::special;

#[derive(Debug, Clone, PartialEq)]
pub enum ToleranceDistribution {
    Beta(Beta),
    Uniform(Uniform),
    TruncatedNormal(TruncatedNormal),
    PiecewiseLinear(PiecewiseLinear),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beta {
    a: f64,
    b: f64,
    ln_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uniform {
    lo: f64,
    hi: f64,
}

/// A Normal law conditioned on `[0, 1]` and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedNormal {
    mu: f64,
    sigma: f64,
    z_lo: f64,
    z_hi: f64,
    mass: f64,
}

/// A continuous law whose CDF interpolates linearly between knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    cdfs: Vec<f64>,
}

impl ToleranceDistribution {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::argument(format!(
                "beta shapes must be positive and finite, got a={a}, b={b}"
            )));
        }
        Ok(Self::Beta(Beta {
            a,
            b,
            ln_norm: special::ln_beta(a, b),
        }))
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lo) || !(hi > lo && hi <= 1.0) {
            return Err(Error::argument(format!(
                "uniform support must satisfy 0 <= L < U <= 1, got L={lo}, U={hi}"
            )));
        }
        Ok(Self::Uniform(Uniform { lo, hi }))
    }

    /// Normal with mean `mu` and variance `sigma2`, truncated to `[0, 1]`.
    pub fn truncated_normal(mu: f64, sigma2: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::argument(format!(
                "truncated normal needs finite mu and positive variance, got mu={mu}, sigma2={sigma2}"
            )));
        }
        let sigma = sigma2.sqrt();
        let z_lo = -mu / sigma;
        let z_hi = (1.0 - mu) / sigma;
        let mass = if z_lo > 0.0 {
            special::norm_sf(z_lo) - special::norm_sf(z_hi)
        } else {
            special::norm_cdf(z_hi) - special::norm_cdf(z_lo)
        };
        if !(mass > 0.0) {
            return Err(Error::argument(format!(
                "normal(mu={mu}, sigma2={sigma2}) puts no representable mass on [0,1]"
            )));
        }
        Ok(Self::TruncatedNormal(TruncatedNormal {
            mu,
            sigma,
            z_lo,
            z_hi,
            mass,
        }))
    }

    /// Piecewise-linear CDF through `(x, F(x))` knots. The first knot must
    /// carry `F = 0` and the last `F = 1`; `x` strictly increasing in `[0, 1]`.
    pub fn piecewise_linear(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::argument("piecewise-linear CDF needs at least two knots"));
        }
        let (xs, cdfs): (Vec<f64>, Vec<f64>) = knots.iter().copied().unzip();
        if xs[0] < 0.0 || xs[xs.len() - 1] > 1.0 || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::argument(
                "piecewise-linear knots must be strictly increasing inside [0,1]",
            ));
        }
        if cdfs[0] != 0.0 || cdfs[cdfs.len() - 1] != 1.0 || cdfs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::argument(
                "piecewise-linear CDF values must rise monotonically from 0 to 1",
            ));
        }
        Ok(Self::PiecewiseLinear(PiecewiseLinear { xs, cdfs }))
    }

    /// `P[tolerance <= x]`, extended by `0` below the unit interval and `1` above.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match self {
            Self::Beta(d) => special::inc_beta_reg_with(d.a, d.b, d.ln_norm, x),
            Self::Uniform(d) => ((x - d.lo) / (d.hi - d.lo)).clamp(0.0, 1.0),
            Self::TruncatedNormal(d) => d.cdf(x),
            Self::PiecewiseLinear(d) => d.cdf(x),
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Density. Beta shapes below one diverge at the matching endpoint,
    /// which is reported as a domain error.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Ok(0.0);
        }
        match self {
            Self::Beta(d) => d.pdf(x),
            Self::Uniform(d) => Ok(if x >= d.lo && x <= d.hi {
                1.0 / (d.hi - d.lo)
            } else {
                0.0
            }),
            Self::TruncatedNormal(d) => {
                let z = (x - d.mu) / d.sigma;
                Ok(special::norm_pdf(z) / (d.sigma * d.mass))
            }
            Self::PiecewiseLinear(d) => Ok(d.pdf(x)),
        }
    }

    /// Beta shapes `(a, b)` when this is a Beta law.
    pub fn beta_shapes(&self) -> Option<(f64, f64)> {
        match self {
            Self::Beta(d) => Some((d.a, d.b)),
            _ => None,
        }
    }

    /// `ln B(a, b)` for Beta laws.
    pub fn beta_ln_norm(&self) -> Option<f64> {
        match self {
            Self::Beta(d) => Some(d.ln_norm),
            _ => None,
        }
    }
}

impl Beta {
    fn pdf(&self, x: f64) -> Result<f64> {
        let at_zero = x == 0.0;
        let at_one = x == 1.0;
        if (at_zero && self.a < 1.0) || (at_one && self.b < 1.0) {
            return Err(Error::domain(format!(
                "Beta({}, {}) density diverges at x={x}",
                self.a, self.b
            )));
        }
        if (at_zero && self.a > 1.0) || (at_one && self.b > 1.0) {
            return Ok(0.0);
        }
        let ln_kernel = if at_zero || at_one {
            0.0
        } else {
            (self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p()
        };
        Ok((ln_kernel - self.ln_norm).exp())
    }
}

impl TruncatedNormal {
    fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        let v = if z <= 0.0 {
            (special::norm_cdf(z) - special::norm_cdf(self.z_lo)) / self.mass
        } else {
            1.0 - (special::norm_sf(z) - special::norm_sf(self.z_hi)) / self.mass
        };
        v.clamp(0.0, 1.0)
    }
}

impl PiecewiseLinear {
    fn segment(&self, x: f64) -> Option<usize> {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return None;
        }
        // right-continuous: x on a knot belongs to the segment starting there
        let i = self.xs.partition_point(|&k| k <= x);
        Some(i.saturating_sub(1).min(n - 2))
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let i = self.segment(x).unwrap_or(0);
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.cdfs[i] + t * (self.cdfs[i + 1] - self.cdfs[i])
    }

    fn pdf(&self, x: f64) -> f64 {
        match self.segment(x) {
            Some(i) => (self.cdfs[i + 1] - self.cdfs[i]) / (self.xs[i + 1] - self.xs[i]),
            None => 0.0,
        }
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.cdfs.iter().copied())
    }
}

impl fmt::Display for ToleranceDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Beta(d) => write!(f, "Beta({}, {})", d.a, d.b),
            Self::Uniform(d) => write!(f, "Uniform({}, {})", d.lo, d.hi),
            Self::TruncatedNormal(d) => {
                write!(f, "TruncatedNormal({}, {})", d.mu, d.sigma * d.sigma)
            }
            Self::PiecewiseLinear(d) => {
                write!(f, "PiecewiseLinear[")?;
                for (i, (x, c)) in d.knots().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "({x}, {c})")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Location and value of the maximum of a Beta kernel on an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMax {
    pub argmax: f64,
    pub value: f64,
}

/// Unnormalized Beta kernel `x^(a−1) (1−x)^(b−1)`.
pub fn beta_kernel(a: f64, b: f64, x: f64) -> f64 {
    x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0)
}

/// Maximum of `x^(a−1) (1−x)^(b−1)` over `[p, q] ⊂ (0, 1)`.
///
/// The kernel's only critical point is `ζ = (1−a)/(2−a−b)`. It is a minimum
/// when `a + b < 2` (so the maximum sits on an endpoint) and a maximum when
/// `a + b > 2`. For `a + b = 2` the kernel is monotone, or identically one
/// when `a = b = 1`.
pub fn beta_kernel_max(a: f64, b: f64, p: f64, q: f64) -> Result<KernelMax> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::argument(format!(
            "kernel shapes must be positive, got a={a}, b={b}"
        )));
    }
    if !(p > 0.0 && q < 1.0 && p < q) {
        return Err(Error::argument(format!(
            "kernel interval needs 0 < p < q < 1, got p={p}, q={q}"
        )));
    }
    let at = |x: f64| KernelMax {
        argmax: x,
        value: beta_kernel(a, b, x),
    };
    let s = a + b;
    if s == 2.0 {
        return Ok(if a > 1.0 {
            at(q)
        } else if a < 1.0 {
            at(p)
        } else {
            KernelMax { argmax: p, value: 1.0 }
        });
    }
    let zeta = (1.0 - a) / (2.0 - s);
    Ok(if s < 2.0 {
        if zeta < p {
            at(q)
        } else if zeta > q {
            at(p)
        } else {
            let (fp, fq) = (at(p), at(q));
            if fq.value > fp.value {
                fq
            } else {
                fp
            }
        }
    } else if zeta < p {
        at(p)
    } else if zeta > q {
        at(q)
    } else {
        at(zeta)
    })
}
