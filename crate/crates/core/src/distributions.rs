//! One-dimensional input laws.
//!
//! A [`Distribution1D`] is a [`Family`] with its parameters, optionally
//! truncated to an interval. Besides density, CDF, quantile and sampling it
//! exposes the two quantities the bounds are built from: the potential
//! derivative `V' = -(ln p)'` that defines the Poincaré operator, and the
//! score `Z` with its variance, the Fisher information.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::{beta, erf, gamma};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::quadrature::{self, GaussRule};

/// Distribution family with its parameters.
///
/// `Beta` lives on `[lo, hi]` with density proportional to
/// `(x - lo)^(alpha - 1) (hi - x)^(beta - 1)`; `Gamma` is the shape/scale law
/// on `(0, inf)`; `Gumbel` is the maximum-type law with density
/// `exp(-u - exp(-u)) / scale`, `u = (x - loc) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    Triangular {
        lo: f64,
        mode: f64,
        hi: f64,
    },
    Gumbel {
        loc: f64,
        scale: f64,
    },
    Laplace {
        loc: f64,
        scale: f64,
    },
    Cauchy {
        loc: f64,
        scale: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
        lo: f64,
        hi: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
}

impl Family {
    fn name(&self) -> &'static str {
        match self {
            Family::Uniform { .. } => "uniform",
            Family::Normal { .. } => "normal",
            Family::Triangular { .. } => "triangular",
            Family::Gumbel { .. } => "gumbel",
            Family::Laplace { .. } => "laplace",
            Family::Cauchy { .. } => "cauchy",
            Family::Beta { .. } => "beta",
            Family::Gamma { .. } => "gamma",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Family::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Family::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Family::Triangular { lo, mode, hi } => {
                lo.is_finite() && hi.is_finite() && lo < hi && lo <= mode && mode <= hi
            }
            Family::Gumbel { loc, scale }
            | Family::Laplace { loc, scale }
            | Family::Cauchy { loc, scale } => loc.is_finite() && scale > 0.0 && scale.is_finite(),
            Family::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => alpha > 0.0 && beta > 0.0 && lo.is_finite() && hi.is_finite() && lo < hi,
            Family::Gamma { shape, scale } => shape > 0.0 && scale > 0.0 && shape.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{self:?}")))
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            Family::Uniform { lo, hi }
            | Family::Triangular { lo, hi, .. }
            | Family::Beta { lo, hi, .. } => (lo, hi),
            Family::Gamma { .. } => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        match *self {
            Family::Uniform { lo, hi } => 1.0 / (hi - lo),
            Family::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            Family::Triangular { lo, mode, hi } => {
                if x < mode {
                    2.0 * (x - lo) / ((hi - lo) * (mode - lo))
                } else if x > mode {
                    2.0 * (hi - x) / ((hi - lo) * (hi - mode))
                } else {
                    2.0 / (hi - lo)
                }
            }
            Family::Gumbel { loc, scale } => {
                let u = (x - loc) / scale;
                (-u - (-u).exp()).exp() / scale
            }
            Family::Laplace { loc, scale } => (-(x - loc).abs() / scale).exp() / (2.0 * scale),
            Family::Cauchy { loc, scale } => {
                let z = (x - loc) / scale;
                1.0 / (PI * scale * (1.0 + z * z))
            }
            Family::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => {
                let w = hi - lo;
                let t = (x - lo) / w;
                // exponent * ln(base), with 0 * ln(0) read as 0
                let term = |e: f64, v: f64| if e == 0.0 { 0.0 } else { e * v.ln() };
                (term(alpha - 1.0, t) + term(beta - 1.0, 1.0 - t) - beta::ln_beta(alpha, beta))
                    .exp()
                    / w
            }
            Family::Gamma { shape, scale } => {
                if x == 0.0 {
                    return match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0 / scale,
                        _ => 0.0,
                    };
                }
                let t = x / scale;
                ((shape - 1.0) * t.ln() - t - gamma::ln_gamma(shape)).exp() / scale
            }
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            Family::Uniform { lo, hi } => (x - lo) / (hi - lo),
            Family::Normal { mean, sd } => 0.5 * erf::erfc(-(x - mean) / (sd * SQRT_2)),
            Family::Triangular { lo, mode, hi } => {
                if x <= mode {
                    (x - lo) * (x - lo) / ((hi - lo) * (mode - lo))
                } else {
                    1.0 - (hi - x) * (hi - x) / ((hi - lo) * (hi - mode))
                }
            }
            Family::Gumbel { loc, scale } => (-(-(x - loc) / scale).exp()).exp(),
            Family::Laplace { loc, scale } => {
                if x < loc {
                    0.5 * ((x - loc) / scale).exp()
                } else {
                    1.0 - 0.5 * (-(x - loc) / scale).exp()
                }
            }
            Family::Cauchy { loc, scale } => 0.5 + ((x - loc) / scale).atan() / PI,
            Family::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => beta::beta_reg(alpha, beta, (x - lo) / (hi - lo)),
            Family::Gamma { shape, scale } => gamma::gamma_lr(shape, x / scale),
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if u <= 0.0 {
            return lo;
        }
        if u >= 1.0 {
            return hi;
        }
        match *self {
            Family::Uniform { lo, hi } => lo + u * (hi - lo),
            Family::Normal { mean, sd } => mean - sd * SQRT_2 * erf::erfc_inv(2.0 * u),
            Family::Triangular { lo, mode, hi } => {
                let fm = (mode - lo) / (hi - lo);
                if u <= fm {
                    lo + (u * (hi - lo) * (mode - lo)).sqrt()
                } else {
                    hi - ((1.0 - u) * (hi - lo) * (hi - mode)).sqrt()
                }
            }
            Family::Gumbel { loc, scale } => loc - scale * (-u.ln()).ln(),
            Family::Laplace { loc, scale } => {
                if u < 0.5 {
                    loc + scale * (2.0 * u).ln()
                } else {
                    loc - scale * (2.0 * (1.0 - u)).ln()
                }
            }
            Family::Cauchy { loc, scale } => loc + scale * (PI * (u - 0.5)).tan(),
            Family::Beta { .. } | Family::Gamma { .. } => self.invert_cdf(u),
        }
    }

    /// Safeguarded Newton iteration on the CDF.
    fn invert_cdf(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        let (mut a, mut b) = (lo, hi);
        if !b.is_finite() {
            b = lo.max(0.0) + 1.0;
            while self.cdf(b) < u {
                a = b;
                b *= 2.0;
            }
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let f = self.cdf(x) - u;
            if f.abs() < 1e-15 {
                break;
            }
            if f > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let p = self.pdf(x);
            let newton = x - f / p;
            x = if p > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }

    /// `(ln p)'` on the open support; left limit at kinks.
    fn dlog_pdf(&self, x: f64) -> f64 {
        match *self {
            Family::Uniform { .. } => 0.0,
            Family::Normal { mean, sd } => -(x - mean) / (sd * sd),
            Family::Triangular { lo, mode, hi } => {
                if x <= mode && mode > lo {
                    1.0 / (x - lo)
                } else {
                    -1.0 / (hi - x)
                }
            }
            Family::Gumbel { loc, scale } => {
                let u = (x - loc) / scale;
                ((-u).exp() - 1.0) / scale
            }
            Family::Laplace { loc, scale } => {
                if x <= loc {
                    1.0 / scale
                } else {
                    -1.0 / scale
                }
            }
            Family::Cauchy { loc, scale } => {
                let z = x - loc;
                -2.0 * z / (z * z + scale * scale)
            }
            Family::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => (alpha - 1.0) / (x - lo) - (beta - 1.0) / (hi - x),
            Family::Gamma { shape, scale } => (shape - 1.0) / x - 1.0 / scale,
        }
    }

    /// Points where the density is not differentiable.
    fn kinks(&self) -> Vec<f64> {
        match *self {
            Family::Triangular { lo, mode, hi } if mode > lo && mode < hi => vec![mode],
            Family::Laplace { loc, .. } => vec![loc],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Truncation {
    lo: f64,
    hi: f64,
    cdf_lo: f64,
    mass: f64,
}

/// A continuous law on the real line, possibly truncated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRecord", into = "DistributionRecord")]
pub struct Distribution1D {
    family: Family,
    truncation: Option<Truncation>,
}

/// Serialized form: `{"family": "...", <params>, "truncate": [a, b]}`, where
/// `null` stands for an infinite end.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DistributionRecord {
    #[serde(flatten)]
    family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncate: Option<[Option<f64>; 2]>,
}

impl TryFrom<DistributionRecord> for Distribution1D {
    type Error = Error;

    fn try_from(rec: DistributionRecord) -> Result<Self> {
        let d = Distribution1D::new(rec.family)?;
        match rec.truncate {
            Some([a, b]) => d.truncate(a.unwrap_or(f64::NEG_INFINITY), b.unwrap_or(f64::INFINITY)),
            None => Ok(d),
        }
    }
}

impl From<Distribution1D> for DistributionRecord {
    fn from(d: Distribution1D) -> Self {
        DistributionRecord {
            family: d.family,
            truncate: d.truncation.map(|t| {
                [
                    Some(t.lo).filter(|v| v.is_finite()),
                    Some(t.hi).filter(|v| v.is_finite()),
                ]
            }),
        }
    }
}

/// Tail probability used to bound unbounded laws before solving spectra.
pub const SPECTRAL_TAIL: f64 = 1e-8;

impl Distribution1D {
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        Ok(Self {
            family,
            truncation: None,
        })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Family::Uniform { lo, hi })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(Family::Normal { mean, sd })
    }

    pub fn triangular(lo: f64, mode: f64, hi: f64) -> Result<Self> {
        Self::new(Family::Triangular { lo, mode, hi })
    }

    pub fn gumbel(loc: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Gumbel { loc, scale })
    }

    pub fn laplace(loc: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Laplace { loc, scale })
    }

    pub fn cauchy(loc: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Cauchy { loc, scale })
    }

    pub fn beta(alpha: f64, beta: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(Family::Beta {
            alpha,
            beta,
            lo,
            hi,
        })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Gamma { shape, scale })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_truncated(&self) -> bool {
        self.truncation.is_some()
    }

    /// Human-readable description used in error messages and reports.
    pub fn describe(&self) -> String {
        match self.truncation {
            Some(t) => format!(
                "{} law truncated to ({}, {})",
                self.family.name(),
                t.lo,
                t.hi
            ),
            None => format!("{} law", self.family.name()),
        }
    }

    /// Support interval `(a, b)`; endpoints may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match self.truncation {
            Some(t) => (t.lo, t.hi),
            None => self.family.support(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        let (a, b) = self.support();
        a.is_finite() && b.is_finite()
    }

    /// Restrict to `(a, b)` and renormalize by the base mass of the interval.
    pub fn truncate(&self, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidParameter(format!(
                "truncation interval ({a}, {b}) is empty"
            )));
        }
        let (lo, hi) = self.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if !(a < b) {
            return Err(Error::EmptyMass { lo: a, hi: b });
        }
        if let Family::Uniform { .. } = self.family {
            return Self::uniform(a, b);
        }
        let cdf_lo = self.family.cdf(a);
        let mass = self.family.cdf(b) - cdf_lo;
        if !(mass > 0.0) {
            return Err(Error::EmptyMass { lo: a, hi: b });
        }
        let (base_lo, base_hi) = self.family.support();
        if a == base_lo && b == base_hi {
            return Ok(Self {
                family: self.family,
                truncation: None,
            });
        }
        Ok(Self {
            family: self.family,
            truncation: Some(Truncation {
                lo: a,
                hi: b,
                cdf_lo,
                mass,
            }),
        })
    }

    /// Bounded version of the law: itself if already bounded, otherwise
    /// truncated at the quantiles `SPECTRAL_TAIL` and `1 - SPECTRAL_TAIL`.
    pub fn bounded(&self) -> Result<Self> {
        if self.is_bounded() {
            return Ok(*self);
        }
        let (lo, hi) = self.support();
        let a = if lo.is_finite() {
            lo
        } else {
            self.quantile(SPECTRAL_TAIL)
        };
        let b = if hi.is_finite() {
            hi
        } else {
            self.quantile(1.0 - SPECTRAL_TAIL)
        };
        self.truncate(a, b)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.truncation {
            Some(t) => {
                if x < t.lo || x > t.hi {
                    0.0
                } else {
                    self.family.pdf(x) / t.mass
                }
            }
            None => self.family.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.truncation {
            Some(t) => {
                if x <= t.lo {
                    0.0
                } else if x >= t.hi {
                    1.0
                } else {
                    ((self.family.cdf(x) - t.cdf_lo) / t.mass).clamp(0.0, 1.0)
                }
            }
            None => self.family.cdf(x),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match self.truncation {
            Some(t) => self
                .family
                .quantile(t.cdf_lo + u.clamp(0.0, 1.0) * t.mass)
                .clamp(t.lo, t.hi),
            None => self.family.quantile(u),
        }
    }

    fn check_interior(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.support();
        if x > lo && x < hi {
            Ok(())
        } else {
            Err(Error::OutsideSupport { x, lo, hi })
        }
    }

    /// `V'(x) = -(ln p)'(x)` on the open support. At a kink of a
    /// piecewise-smooth density the left limit is returned.
    pub fn potential_deriv(&self, x: f64) -> Result<f64> {
        self.check_interior(x)?;
        Ok(-self.family.dlog_pdf(x))
    }

    /// Density at the two support endpoints (limits for unbounded ends).
    pub fn boundary_density(&self) -> (f64, f64) {
        let (a, b) = self.support();
        let at = |x: f64| if x.is_finite() { self.pdf(x) } else { 0.0 };
        (at(a), at(b))
    }

    /// Whether the density vanishes at both ends of the support, so that the
    /// derivative forms of the Fisher-bound coefficients hold without
    /// boundary corrections.
    pub fn vanishes_at_boundary(&self) -> bool {
        let (pa, pb) = self.boundary_density();
        pa == 0.0 && pb == 0.0
    }

    /// Fails unless the score is square-integrable and not identically zero.
    pub fn check_score_support(&self) -> Result<()> {
        let unsupported = |why: &str| {
            Err(Error::UnsupportedForBounds(format!(
                "{} ({why})",
                self.describe()
            )))
        };
        match self.family {
            Family::Uniform { .. } => unsupported("constant density"),
            Family::Triangular { .. } => unsupported("p'/p is not square-integrable"),
            Family::Beta { alpha, beta, .. } => {
                let end_ok = |s: f64| s == 1.0 || s > 2.0;
                if alpha == 1.0 && beta == 1.0 {
                    unsupported("constant density")
                } else if self.truncation.is_none() && !(end_ok(alpha) && end_ok(beta)) {
                    unsupported("p'/p is not square-integrable")
                } else {
                    Ok(())
                }
            }
            Family::Gamma { shape, .. } => {
                if self.truncation.is_none() && shape <= 2.0 {
                    unsupported("p'/p is not square-integrable or the score vanishes")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Boundary-corrected score `Z(x) = (ln p)'(x) - (p(b) - p(a))`, centered
    /// under the law.
    pub fn score(&self, x: f64) -> Result<f64> {
        self.check_score_support()?;
        self.check_interior(x)?;
        let (pa, pb) = self.boundary_density();
        Ok(self.family.dlog_pdf(x) - (pb - pa))
    }

    fn score_unchecked(&self, x: f64, shift: f64) -> f64 {
        self.family.dlog_pdf(x) - shift
    }

    /// Fisher information `I = var(Z(X))`.
    pub fn fisher_information(&self) -> Result<f64> {
        self.check_score_support()?;
        if self.truncation.is_none() {
            match self.family {
                Family::Normal { sd, .. } => return Ok(1.0 / (sd * sd)),
                Family::Laplace { scale, .. } | Family::Gumbel { scale, .. } => {
                    return Ok(1.0 / (scale * scale))
                }
                Family::Cauchy { scale, .. } => return Ok(0.5 / (scale * scale)),
                Family::Gamma { shape, scale } => return Ok(1.0 / (scale * scale * (shape - 2.0))),
                _ => {}
            }
        }
        let info = self.score_variance_by_quadrature();
        if info.is_finite() && info > 0.0 {
            Ok(info)
        } else {
            Err(Error::UnsupportedForBounds(format!(
                "{} (Fisher information {info})",
                self.describe()
            )))
        }
    }

    /// Quadrature estimate of `var(Z)`, independent of the closed forms.
    pub fn score_variance_by_quadrature(&self) -> f64 {
        let (pa, pb) = self.boundary_density();
        let shift = pb - pa;
        let mean = self.expect(|x| self.score_unchecked(x, shift));
        let second = self.expect(|x| {
            let z = self.score_unchecked(x, shift);
            z * z
        });
        second - mean * mean
    }

    /// `E[f(X)]` by adaptive quadrature, split at the density kinks.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut breaks = vec![self.support().0];
        let (lo, hi) = self.support();
        breaks.extend(
            self.family
                .kinks()
                .into_iter()
                .filter(|&k| k > lo && k < hi),
        );
        breaks.push(hi);
        breaks
            .windows(2)
            .map(|w| {
                quadrature::integrate(
                    |x| {
                        let p = self.pdf(x);
                        if p == 0.0 {
                            0.0
                        } else {
                            f(x) * p
                        }
                    },
                    w[0],
                    w[1],
                    1e-12,
                )
            })
            .sum()
    }

    pub fn mean(&self) -> f64 {
        if self.truncation.is_none() {
            match self.family {
                Family::Uniform { lo, hi } => return 0.5 * (lo + hi),
                Family::Normal { mean, .. } => return mean,
                Family::Triangular { lo, mode, hi } => return (lo + mode + hi) / 3.0,
                _ => {}
            }
        }
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        if self.truncation.is_none() {
            match self.family {
                Family::Uniform { lo, hi } => return (hi - lo).powi(2) / 12.0,
                Family::Normal { sd, .. } => return sd * sd,
                _ => {}
            }
        }
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    /// `n` i.i.d. draws by inverse CDF from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.quantile(open_unit(&mut rng))).collect()
    }

    /// Quadrature rule for `E[f(X)]`: weights include the density and sum to
    /// one. Bounded supports get composite Gauss–Legendre with `per_piece`
    /// nodes between consecutive breakpoints (support ends, density kinks and
    /// `extra_breaks`); the untruncated normal gets Gauss–Hermite; other
    /// unbounded laws are integrated in quantile space.
    pub fn quadrature_rule(&self, per_piece: usize, extra_breaks: &[f64]) -> GaussRule {
        let (lo, hi) = self.support();
        let rule = if let (Family::Normal { mean, sd }, None) = (self.family, self.truncation) {
            let gh = quadrature::gauss_hermite(per_piece);
            GaussRule {
                nodes: gh.nodes.iter().map(|z| mean + sd * z).collect(),
                weights: gh.weights,
            }
        } else if lo.is_finite() && hi.is_finite() {
            let mut breaks = vec![lo, hi];
            breaks.extend(self.family.kinks());
            breaks.extend_from_slice(extra_breaks);
            breaks.retain(|&b| b >= lo && b <= hi);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let base = quadrature::composite_legendre(&breaks, per_piece);
            let weights = base
                .nodes
                .iter()
                .zip(&base.weights)
                .map(|(&x, &w)| w * self.pdf(x))
                .collect();
            GaussRule {
                nodes: base.nodes,
                weights,
            }
        } else {
            let mut breaks = vec![0.0, 1.0];
            breaks.extend(
                extra_breaks
                    .iter()
                    .chain(self.family.kinks().iter())
                    .map(|&b| self.cdf(b))
                    .filter(|&u| u > 0.0 && u < 1.0),
            );
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let base = quadrature::composite_legendre(&breaks, per_piece);
            GaussRule {
                nodes: base.nodes.iter().map(|&u| self.quantile(u)).collect(),
                weights: base.weights,
            }
        };
        let total: f64 = rule.weights.iter().sum();
        GaussRule {
            nodes: rule.nodes,
            weights: rule.weights.iter().map(|w| w / total).collect(),
        }
    }
}

/// Uniform draw in the open interval (0, 1).
pub(crate) fn open_unit<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn all_families() -> Vec<Distribution1D> {
        vec![
            Distribution1D::uniform(-0.5, 0.5).unwrap(),
            Distribution1D::normal(1.0, 2.0).unwrap(),
            Distribution1D::triangular(-1.0, 0.3, 2.0).unwrap(),
            Distribution1D::gumbel(1013.0, 558.0).unwrap(),
            Distribution1D::laplace(0.5, 1.5).unwrap(),
            Distribution1D::cauchy(0.0, 2.0).unwrap(),
            Distribution1D::beta(2.5, 3.5, -1.0, 1.0).unwrap(),
            Distribution1D::gamma(3.5, 2.0).unwrap(),
        ]
    }

    #[test]
    fn pdf_examples() {
        let u = Distribution1D::uniform(-0.5, 0.5).unwrap();
        assert_eq!(u.pdf(0.0), 1.0);
        assert_eq!(u.pdf(0.7), 0.0);
        let n = Distribution1D::normal(0.0, 1.0).unwrap();
        assert_relative_eq!(n.pdf(0.0), 1.0 / (2.0 * PI).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn pdf_integrates_to_one() {
        for d in all_families() {
            let total = d.expect(|_| 1.0);
            let tol = if d.is_bounded() { 1e-8 } else { 1e-6 };
            assert!((total - 1.0).abs() < tol, "{}: {total}", d.describe());
        }
        let g = Distribution1D::gumbel(1013.0, 558.0)
            .unwrap()
            .truncate(500.0, 3000.0)
            .unwrap();
        assert!((g.expect(|_| 1.0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cdf_and_quantile_are_inverse() {
        for d in all_families() {
            for &u in &[1e-6, 0.01, 0.2, 0.5, 0.77, 0.999] {
                let x = d.quantile(u);
                assert!((d.cdf(x) - u).abs() < 1e-9, "{} u={u}", d.describe());
            }
        }
    }

    #[test]
    fn cdf_matches_integrated_pdf() {
        for d in all_families() {
            let (lo, _) = d.support();
            let x = d.quantile(0.3);
            let start = if lo.is_finite() {
                lo
            } else {
                d.quantile(1e-14)
            };
            let integral = quadrature::integrate(|t| d.pdf(t), start, x, 1e-13);
            assert!(
                (integral - 0.3).abs() < 1e-7,
                "{}: {integral}",
                d.describe()
            );
        }
    }

    #[test]
    fn potential_derivative_examples() {
        let n = Distribution1D::normal(1.0, 2.0).unwrap();
        assert_relative_eq!(n.potential_deriv(3.0).unwrap(), 0.5);
        let u = Distribution1D::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.potential_deriv(0.3).unwrap(), 0.0);
        let t = Distribution1D::triangular(-1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(t.potential_deriv(0.5).unwrap(), 2.0);
        // Left limit at the kink.
        assert_relative_eq!(t.potential_deriv(0.0).unwrap(), -1.0);
        assert!(matches!(
            u.potential_deriv(1.2),
            Err(Error::OutsideSupport { .. })
        ));
    }

    #[test]
    fn potential_derivative_matches_finite_differences() {
        for d in all_families() {
            for &u in &[0.1, 0.35, 0.8] {
                let x = d.quantile(u);
                let h = 1e-6 * (1.0 + x.abs());
                let fd = -(d.pdf(x + h).ln() - d.pdf(x - h).ln()) / (2.0 * h);
                let v = d.potential_deriv(x).unwrap();
                assert!(
                    (fd - v).abs() < 1e-5 * (1.0 + v.abs()),
                    "{} x={x}",
                    d.describe()
                );
            }
        }
    }

    #[test]
    fn table_scores() {
        let (m, s) = (0.5, 1.5);
        let n = Distribution1D::normal(m, s).unwrap();
        assert_relative_eq!(n.score(2.0).unwrap(), -(2.0 - m) / (s * s));
        let l = Distribution1D::laplace(m, s).unwrap();
        assert_relative_eq!(l.score(2.0).unwrap(), -1.0 / s);
        assert_relative_eq!(l.score(-2.0).unwrap(), 1.0 / s);
        let c = Distribution1D::cauchy(m, s).unwrap();
        let z: f64 = 2.0 - m;
        assert_relative_eq!(c.score(2.0).unwrap(), -2.0 * z / (z * z + s * s));
    }

    #[test]
    fn table_fisher_information() {
        let s = 1.7;
        assert_relative_eq!(
            Distribution1D::normal(0.0, s)
                .unwrap()
                .fisher_information()
                .unwrap(),
            1.0 / (s * s)
        );
        assert_relative_eq!(
            Distribution1D::laplace(0.0, s)
                .unwrap()
                .fisher_information()
                .unwrap(),
            1.0 / (s * s)
        );
        assert_relative_eq!(
            Distribution1D::cauchy(0.0, s)
                .unwrap()
                .fisher_information()
                .unwrap(),
            0.5 / (s * s)
        );
    }

    #[test]
    fn fisher_information_matches_quadrature() {
        let cases = vec![
            (Distribution1D::normal(1.0, 2.0).unwrap(), 1e-3),
            (Distribution1D::laplace(0.0, 0.7).unwrap(), 1e-3),
            (Distribution1D::cauchy(0.0, 2.0).unwrap(), 1e-3),
            (Distribution1D::gumbel(3.0, 1.5).unwrap(), 1e-3),
            (Distribution1D::gamma(4.0, 0.5).unwrap(), 1e-3),
        ];
        for (d, tol) in cases {
            let closed = d.fisher_information().unwrap();
            let quad = d.score_variance_by_quadrature();
            assert!(
                (closed - quad).abs() < tol * closed,
                "{}: {closed} vs {quad}",
                d.describe()
            );
        }
    }

    #[test]
    fn unsupported_scores() {
        for d in [
            Distribution1D::uniform(0.0, 1.0).unwrap(),
            Distribution1D::triangular(-1.0, 0.0, 1.0).unwrap(),
            Distribution1D::beta(1.5, 3.0, 0.0, 1.0).unwrap(),
            Distribution1D::gamma(1.0, 1.0).unwrap(),
        ] {
            assert!(matches!(d.score(0.5), Err(Error::UnsupportedForBounds(_))));
            assert!(matches!(
                d.fisher_information(),
                Err(Error::UnsupportedForBounds(_))
            ));
        }
    }

    #[test]
    fn truncated_score_is_centered() {
        // Asymmetric truncation: the density does not vanish at the ends.
        let d = Distribution1D::normal(0.0, 1.0)
            .unwrap()
            .truncate(-0.5, 2.0)
            .unwrap();
        let (pa, pb) = d.boundary_density();
        assert!(pa > 0.0 && pb > 0.0);
        let mean = d.expect(|x| d.score(x).unwrap_or(0.0));
        assert!(mean.abs() < 1e-10, "{mean}");
        let info = d.fisher_information().unwrap();
        assert!(info > 0.0);
    }

    #[test]
    fn truncation_examples() {
        let n = Distribution1D::normal(0.0, 1.0)
            .unwrap()
            .truncate(-10.0, 10.0)
            .unwrap();
        assert!((n.pdf(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-6);
        let u = Distribution1D::uniform(0.0, 1.0)
            .unwrap()
            .truncate(0.0, 0.5)
            .unwrap();
        for x in [0.01, 0.25, 0.49] {
            assert_eq!(u.pdf(x), 2.0);
        }
        assert_eq!(u.pdf(0.7), 0.0);
        let t = Distribution1D::normal(0.0, 1.0)
            .unwrap()
            .truncate(0.0, 1.0)
            .unwrap();
        let base = Distribution1D::normal(0.0, 1.0).unwrap();
        let mass = base.cdf(1.0) - base.cdf(0.0);
        assert_relative_eq!(t.pdf(0.4), base.pdf(0.4) / mass, max_relative = 1e-14);
        assert_eq!(t.pdf(1.5), 0.0);
    }

    #[test]
    fn empty_truncation_fails() {
        let u = Distribution1D::uniform(0.0, 1.0).unwrap();
        assert!(matches!(u.truncate(2.0, 3.0), Err(Error::EmptyMass { .. })));
        let n = Distribution1D::normal(0.0, 1.0).unwrap();
        assert!(matches!(
            n.truncate(60.0, 70.0),
            Err(Error::EmptyMass { .. })
        ));
        assert!(n.truncate(1.0, 1.0).is_err());
    }

    #[test]
    fn sampling_moments_and_support() {
        let u = Distribution1D::uniform(-0.5, 0.5)
            .unwrap()
            .sample(100_000, 1);
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        assert!(mean.abs() < 0.005);
        let n = Distribution1D::normal(0.0, 1.0).unwrap().sample(100_000, 2);
        let m = n.iter().sum::<f64>() / n.len() as f64;
        let var = n.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.02);
        let t = Distribution1D::normal(0.0, 1.0)
            .unwrap()
            .truncate(0.0, f64::INFINITY)
            .unwrap()
            .sample(10_000, 3);
        assert!(t.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = Distribution1D::gumbel(0.0, 1.0).unwrap();
        assert_eq!(d.sample(100, 42), d.sample(100, 42));
        assert_ne!(d.sample(100, 42), d.sample(100, 43));
    }

    #[test]
    fn score_mean_zero_by_monte_carlo() {
        let cases = [
            Distribution1D::normal(0.0, 1.0).unwrap(),
            Distribution1D::laplace(1.0, 2.0).unwrap(),
            Distribution1D::cauchy(0.0, 1.0).unwrap(),
            Distribution1D::normal(0.0, 1.0)
                .unwrap()
                .truncate(-1.0, 2.5)
                .unwrap(),
            Distribution1D::gumbel(0.0, 1.0)
                .unwrap()
                .truncate(-1.0, 4.0)
                .unwrap(),
        ];
        for (k, d) in cases.iter().enumerate() {
            let xs = d.sample(100_000, 100 + k as u64);
            let z: Vec<f64> = xs.iter().map(|&x| d.score(x).unwrap()).collect();
            let n = z.len() as f64;
            let m = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(m.abs() < 4.0 * sd / n.sqrt(), "{}: mean {m}", d.describe());
        }
    }

    #[test]
    fn serde_record_shape() {
        let d = Distribution1D::normal(30.0, 8.0)
            .unwrap()
            .truncate(15.0, 60.0)
            .unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(
            json,
            r#"{"family":"normal","mean":30.0,"sd":8.0,"truncate":[15.0,60.0]}"#
        );
        let back: Distribution1D = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        let bad = serde_json::from_str::<Distribution1D>(r#"{"family":"uniform","lo":1,"hi":0}"#);
        assert!(bad.is_err());

        let half = Distribution1D::normal(30.0, 8.0)
            .unwrap()
            .truncate(15.0, f64::INFINITY)
            .unwrap();
        let json = serde_json::to_string(&half).unwrap();
        assert!(json.ends_with(r#""truncate":[15.0,null]}"#), "{json}");
        assert_eq!(serde_json::from_str::<Distribution1D>(&json).unwrap(), half);
    }

    #[test]
    fn quadrature_rule_integrates_moments() {
        for d in [
            Distribution1D::uniform(0.0, 2.0).unwrap(),
            Distribution1D::normal(1.0, 0.5).unwrap(),
            Distribution1D::normal(0.0, 1.0)
                .unwrap()
                .truncate(-2.0, 3.0)
                .unwrap(),
            Distribution1D::triangular(-1.0, 0.2, 1.0).unwrap(),
        ] {
            let rule = d.quadrature_rule(30, &[]);
            let m = rule.integrate(|x| x);
            let v = rule.integrate(|x| (x - m).powi(2));
            assert!((m - d.mean()).abs() < 1e-10, "{}", d.describe());
            assert!((v - d.variance()).abs() < 1e-10, "{}", d.describe());
        }
    }

    #[test]
    fn bounded_truncates_tails() {
        let n = Distribution1D::normal(0.0, 1.0).unwrap().bounded().unwrap();
        let (a, b) = n.support();
        assert!((a + 5.612).abs() < 1e-3 && (b - 5.612).abs() < 1e-3);
        let u = Distribution1D::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.bounded().unwrap(), u);
    }
}
