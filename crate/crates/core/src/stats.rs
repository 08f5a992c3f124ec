//! Normal-distribution primitives and the Gamma-mixture hyperparameters
//! shared by the borrowing, design and simulation code.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_positive, check_unit_interval, Error, Result};

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        check_unit_interval("probability", value)?;
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Standard normal CDF without argument checks. NaN propagates.
#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[inline]
fn phi_density(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    check_finite("x", x)?;
    Ok(Probability(phi(x).clamp(0.0, 1.0)))
}

// Acklam's rational approximation (relative error < 1.2e-9).
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
const P_LOW: f64 = 0.024_25;

/// Quantile for `p` in `(0, 0.5]`, where the lower-tail CDF is evaluated
/// without cancellation.
fn lower_quantile(p: f64) -> f64 {
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // one Newton step on the CDF
    x - (phi(x) - p) / phi_density(x)
}

/// Unchecked quantile for `p` strictly inside `(0, 1)`.
#[inline]
pub(crate) fn quantile(p: f64) -> f64 {
    if p <= 0.5 {
        lower_quantile(p)
    } else {
        -lower_quantile(1.0 - p)
    }
}

/// Inverse of the standard normal CDF: returns `z` with `Φ(z) = p`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok(quantile(p))
    } else {
        Err(Error::Domain {
            name: "p",
            value: p,
            domain: "(0, 1)",
        })
    }
}

/// Hyperparameters of the two-component Gamma mixture placed on each
/// commensurability precision. The first component (`a01`, `b01`) carries
/// its mass on small precisions and is selected by `w = 1`; the second
/// (`a02`, `b02`) on large precisions and is selected by `w = 0`.
///
/// `c0` is the concentration of the exponential synthesis weights used by
/// the legacy aggregation rule only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaMixtureHyperparams {
    a01: f64,
    b01: f64,
    a02: f64,
    b02: f64,
    c0: f64,
}

impl GammaMixtureHyperparams {
    pub const DEFAULT_C0: f64 = 0.05;

    pub fn new(a01: f64, b01: f64, a02: f64, b02: f64) -> Result<Self> {
        Self::with_concentration(a01, b01, a02, b02, Self::DEFAULT_C0)
    }

    pub fn with_concentration(a01: f64, b01: f64, a02: f64, b02: f64, c0: f64) -> Result<Self> {
        for (name, shape) in [("a01", a01), ("a02", a02)] {
            if !(shape > 1.0 && shape.is_finite()) {
                return Err(Error::Domain {
                    name,
                    value: shape,
                    domain: "(1, inf)",
                });
            }
        }
        check_positive("b01", b01)?;
        check_positive("b02", b02)?;
        check_positive("c0", c0)?;
        let hyper = Self {
            a01,
            b01,
            a02,
            b02,
            c0,
        };
        if hyper.discount_variance() <= hyper.borrow_variance() {
            return Err(Error::InvalidArgument(format!(
                "discount endpoint b01/(a01-1) = {} must exceed borrow endpoint b02/(a02-1) = {}",
                hyper.discount_variance(),
                hyper.borrow_variance()
            )));
        }
        Ok(hyper)
    }

    pub fn a01(&self) -> f64 {
        self.a01
    }

    pub fn b01(&self) -> f64 {
        self.b01
    }

    pub fn a02(&self) -> f64 {
        self.a02
    }

    pub fn b02(&self) -> f64 {
        self.b02
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Between-trial variance at `w = 1`: `b01 / (a01 - 1)`.
    pub fn discount_variance(&self) -> f64 {
        self.b01 / (self.a01 - 1.0)
    }

    /// Between-trial variance at `w = 0`: `b02 / (a02 - 1)`.
    pub fn borrow_variance(&self) -> f64 {
        self.b02 / (self.a02 - 1.0)
    }
}

impl Default for GammaMixtureHyperparams {
    fn default() -> Self {
        Self {
            a01: 1.01,
            b01: 1.01,
            a02: 1e6,
            b02: 1.0,
            c0: Self::DEFAULT_C0,
        }
    }
}

/// Two-moment approximation of the mean of `1/ν` under the Gamma mixture:
/// `w·b01/(a01−1) + (1−w)·b02/(a02−1)`.
pub fn inverse_gamma_mixture_mean(w: f64, hyper: &GammaMixtureHyperparams) -> Result<f64> {
    check_unit_interval("w", w)?;
    Ok(w * hyper.discount_variance() + (1.0 - w) * hyper.borrow_variance())
}
