//! Scalar special functions: the standard normal law, its hazard function,
//! log-gamma helpers and the regularized incomplete beta function.

use crate::error::{domain, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Beyond this argument the upper normal tail is evaluated through the
/// Laplace continued fraction instead of `erfc`.
const TAIL_SWITCH: f64 = 8.0;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Upper tail `1 - Phi(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    if x > TAIL_SWITCH {
        normal_pdf(x) * mills_ratio_cf(x)
    } else {
        0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        normal_sf(-x)
    } else {
        1.0 - normal_sf(x)
    }
}

/// Mills ratio `(1 - Phi(t)) / phi(t)` for large `t`, by backward evaluation of
/// `1 / (t + 1/(t + 2/(t + 3/(t + ...))))`.
fn mills_ratio_cf(t: f64) -> f64 {
    let mut acc = t;
    for n in (1..=120).rev() {
        acc = t + n as f64 / acc;
    }
    1.0 / acc
}

/// Conditional mean of a standard normal variable given that it is at least `t`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HazardValue {
    pub t: f64,
    pub mu: f64,
}

pub fn hazard_mu(t: f64) -> HazardValue {
    let mu = if t > TAIL_SWITCH {
        1.0 / mills_ratio_cf(t)
    } else {
        normal_pdf(t) / normal_sf(t)
    };
    HazardValue { t, mu }
}

/// Standard normal quantile: Wichura's AS241 rational approximation followed
/// by one Halley step against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("normal_quantile needs p in (0,1), got {p}"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let x = as241(p);
    // Polish on the smaller tail to keep relative accuracy.
    let err = if p < 0.5 {
        normal_cdf(x) - p
    } else {
        (1.0 - p) - normal_sf(x)
    };
    let u = err / normal_pdf(x);
    Ok(x - u / (1.0 + 0.5 * x * u))
}

fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_049e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Stirling series remainder `ln Gamma(x) - [(x - 1/2) ln x - x + ln(2 pi)/2]`, for x >= 10.
fn stirling_tail(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    (1.0 / 12.0 - z * (1.0 / 360.0 - z * (1.0 / 1260.0 - z * (1.0 / 1680.0 - z / 1188.0)))) / x
}

/// `ln Gamma(x) - ln Gamma(x - d)` for `x - d > 0`, accurate even when `x` is
/// huge compared to `d`.
pub fn ln_gamma_ratio(x: f64, d: f64) -> f64 {
    let y = x - d;
    if y < 10.0 || d.abs() > 0.5 * x {
        return ln_gamma(x) - ln_gamma(y);
    }
    -(x - 0.5) * (-d / x).ln_1p() + d * y.ln() - d + stirling_tail(x) - stirling_tail(y)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    if a <= b {
        ln_gamma(a) - ln_gamma_ratio(a + b, a)
    } else {
        ln_gamma(b) - ln_gamma_ratio(a + b, b)
    }
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn betainc(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("betainc needs x in [0,1], got {x}"));
    }
    Ok(betainc_pair(a, b, x, 1.0 - x))
}

/// `I_x(a, b)` where the caller supplies both `x` and `y = 1 - x`, so that
/// whichever one is tiny keeps full relative precision.
pub fn betainc_pair(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_x = if x > 0.5 { (-y).ln_1p() } else { x.ln() };
    let ln_y = if y > 0.5 { (-x).ln_1p() } else { y.ln() };
    let ln_front = a * ln_x + b * ln_y - ln_beta(a, b);
    // Evaluate the switch on whichever of x, y is small to keep it exact.
    let direct = if x <= y {
        x < (a + 1.0) / (a + b + 2.0)
    } else {
        y > (b + 1.0) / (a + b + 2.0)
    };
    if direct {
        (ln_front.exp() * beta_cf(a, b, x, y) / a).min(1.0)
    } else {
        (1.0 - ln_front.exp() * beta_cf(b, a, y, x) / b).max(0.0)
    }
}

/// Lentz evaluation of the continued fraction for the incomplete beta function.
fn beta_cf(a: f64, b: f64, x: f64, y: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    // 1 - qab*x/qap written with y to avoid cancellation when x is near 1.
    let mut d = 1.0 - qab * x / qap;
    if x > 0.5 {
        d = (qap - qab + qab * y) / qap;
    }
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    let mut c = 1.0;
    for m in 1..2_000_000u32 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
