//! Scalar and bivariate standard normal primitives.
//!
//! `gamma_cdf(t, q1, q2)` is the probability that a standard bivariate normal
//! pair with correlation `t` has both coordinates at most the `q1` and `q2`
//! quantiles of the standard normal. Every cut-probability formula in the crate
//! is assembled from it.
//!
//! The bivariate kernel follows Genz's reformulation of Drezner and
//! Wesolowsky: Gauss-Legendre quadrature of the Plackett integral for
//! `|t| < 0.925`, and an asymptotic expansion about `|t| = 1` otherwise. It is
//! accurate to roughly machine precision on the whole domain.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::error::Error;

/// A probability in `[0, 1]`, used as the argument of `gamma_cdf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Quantile(f64);

impl Quantile {
    pub fn new(value: f64) -> Result<Self, Error> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::OutOfRange { what: "quantile", value })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// A correlation coefficient in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Correlation(f64);

impl Correlation {
    pub fn new(value: f64) -> Result<Self, Error> {
        if (-1.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::OutOfRange { what: "correlation", value })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF on the extended reals.
#[inline]
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse of [`phi`]; `phi_inv(0) = -inf` and `phi_inv(1) = +inf`.
///
/// The tail on the side of the smaller of `q` and `1 - q` is computed
/// directly from `q`, so tiny quantiles keep full relative precision.
pub fn phi_inv(q: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q), "quantile {q} out of range");
    if q <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if q >= 1.0 {
        return f64::INFINITY;
    }
    if q == 0.5 {
        return 0.0;
    }
    let x = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * q);
    // One Newton step on the CDF tightens the last ulps of erfc_inv.
    let d = pdf(x);
    if d > 0.0 && x.is_finite() {
        let resid = if q < 0.5 { phi(x) - q } else { (1.0 - q) - phi(-x) };
        let step = resid / d;
        if step.is_finite() && step.abs() < 1e-6 * (1.0 + x.abs()) {
            return x - step;
        }
    }
    x
}

const GL_X6: [f64; 3] = [0.932_469_514_203_152_2, 0.661_209_386_466_264_7, 0.238_619_186_083_197];
const GL_W6: [f64; 3] = [0.171_324_492_379_170_5, 0.360_761_573_048_138_4, 0.467_913_934_572_690_4];
const GL_X12: [f64; 6] = [
    0.981_560_634_246_719_1,
    0.904_117_256_370_475,
    0.769_902_674_194_305,
    0.587_317_954_286_617_1,
    0.367_831_498_998_180_2,
    0.125_233_408_511_469_2,
];
const GL_W12: [f64; 6] = [
    0.047_175_336_386_511_77,
    0.106_939_325_995_318_3,
    0.160_078_328_543_346_4,
    0.203_167_426_723_065_9,
    0.233_492_536_538_354_7,
    0.249_147_045_813_402_9,
];
const GL_X20: [f64; 10] = [
    0.993_128_599_185_094_9,
    0.963_971_927_277_913_8,
    0.912_234_428_251_325_9,
    0.839_116_971_822_218_8,
    0.746_331_906_460_150_8,
    0.636_053_680_726_515,
    0.510_867_001_950_827_1,
    0.373_706_088_715_419_6,
    0.227_785_851_141_645_1,
    0.076_526_521_133_497_33,
];
const GL_W20: [f64; 10] = [
    0.017_614_007_139_152_12,
    0.040_601_429_800_386_94,
    0.062_672_048_334_109_06,
    0.083_276_741_576_704_75,
    0.101_930_119_817_240_4,
    0.118_194_531_961_518_4,
    0.131_688_638_449_176_6,
    0.142_096_109_318_382_1,
    0.149_172_986_472_603_7,
    0.152_753_387_130_725_9,
];

fn gauss_legendre_half(abs_r: f64) -> (&'static [f64], &'static [f64]) {
    if abs_r < 0.3 {
        (&GL_X6, &GL_W6)
    } else if abs_r < 0.75 {
        (&GL_X12, &GL_W12)
    } else {
        (&GL_X20, &GL_W20)
    }
}

/// Upper orthant probability `Pr[X > h, Y > k]` for a standard bivariate
/// normal pair with correlation `r`.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { phi(-k) };
    }
    if k == f64::NEG_INFINITY {
        return phi(-h);
    }
    if r == 0.0 {
        return phi(-h) * phi(-k);
    }
    if r >= 1.0 {
        return phi(-h.max(k));
    }
    if r <= -1.0 {
        return (phi(-h) - phi(k)).max(0.0);
    }

    const TWO_PI: f64 = 2.0 * PI;
    let (xs, ws) = gauss_legendre_half(r.abs());
    let hk = h * k;

    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        let mut sum = 0.0;
        for (&x, &w) in xs.iter().zip(ws) {
            for node in [1.0 - x, 1.0 + x] {
                let sn = (asr * node).sin();
                sum += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return (sum * asr / TWO_PI + phi(-h) * phi(-k)).clamp(0.0, 1.0);
    }

    let (k, hk) = if r < 0.0 { (-k, -hk) } else { (k, hk) };
    let a_sq = (1.0 - r) * (1.0 + r);
    let a = a_sq.sqrt();
    let bs = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 80.0;
    let mut bvn = 0.0;
    let asr = -0.5 * (bs / a_sq + hk);
    if asr > -100.0 {
        bvn = a * asr.exp() * (1.0 - c * (bs - a_sq) * (1.0 - d * bs) / 3.0 + c * d * a_sq * a_sq);
    }
    if hk > -100.0 {
        let b = bs.sqrt();
        let sp = TWO_PI.sqrt() * phi(-b / a);
        bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
    }
    let half_a = 0.5 * a;
    let mut sum = 0.0;
    for (&x, &w) in xs.iter().zip(ws) {
        for node in [1.0 - x, 1.0 + x] {
            let xs2 = (half_a * node).powi(2);
            let asr = -0.5 * (bs / xs2 + hk);
            if asr > -100.0 {
                let sp = 1.0 + c * xs2 * (1.0 + 5.0 * d * xs2);
                let rs = (1.0 - xs2).sqrt();
                let ep = (-0.5 * hk * xs2 / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                sum += w * asr.exp() * (sp - ep);
            }
        }
    }
    bvn = (half_a * sum - bvn) / TWO_PI;

    let value = if r > 0.0 {
        bvn + phi(-h.max(k))
    } else if h >= k {
        -bvn
    } else {
        let l = if h < 0.0 { phi(k) - phi(h) } else { phi(-h) - phi(-k) };
        l - bvn
    };
    value.clamp(0.0, 1.0)
}

/// `Γ_t(q1, q2) = Pr[X ≤ Φ⁻¹(q1), Y ≤ Φ⁻¹(q2)]` with `corr(X, Y) = t`.
///
/// Boundary conventions: `Γ_t(0, q) = 0`, `Γ_t(1, q) = q`, symmetric in the
/// two quantiles.
pub fn gamma_cdf(t: f64, q1: f64, q2: f64) -> f64 {
    debug_assert!((-1.0..=1.0).contains(&t), "correlation {t} out of range");
    if q1 <= 0.0 || q2 <= 0.0 {
        return 0.0;
    }
    if q1 >= 1.0 {
        return q2.min(1.0);
    }
    if q2 >= 1.0 {
        return q1;
    }
    if t >= 1.0 {
        return q1.min(q2);
    }
    if t <= -1.0 {
        return (q1 + q2 - 1.0).max(0.0);
    }
    if t == 0.0 {
        return q1 * q2;
    }
    let value = bvn_upper(-phi_inv(q1), -phi_inv(q2), t);
    // Fréchet bounds hold exactly; enforce them against quadrature round-off.
    value.clamp((q1 + q2 - 1.0).max(0.0), q1.min(q2))
}

/// `∂Γ_t(q1, q2)/∂t`, the bivariate normal density at the quantile preimages.
pub fn gamma_dcorr(t: f64, q1: f64, q2: f64) -> Result<f64, Error> {
    if t.abs() >= 1.0 {
        return Err(Error::Singular("gamma_dcorr at |t| = 1"));
    }
    let a = phi_inv(q1);
    let b = phi_inv(q2);
    let one_m = 1.0 - t * t;
    if !a.is_finite() || !b.is_finite() {
        return Ok(0.0);
    }
    let expo = -(a * a + b * b - 2.0 * a * b * t) / (2.0 * one_m);
    Ok(expo.exp() / (2.0 * PI * one_m.sqrt()))
}

/// `∂Γ_t(q1, q2)/∂q1 = Φ((Φ⁻¹(q2) − t·Φ⁻¹(q1)) / √(1 − t²))`.
pub fn gamma_dq1(t: f64, q1: f64, q2: f64) -> Result<f64, Error> {
    if t.abs() >= 1.0 {
        return Err(Error::Singular("gamma_dq1 at |t| = 1"));
    }
    let a = phi_inv(q1);
    let b = phi_inv(q2);
    if !b.is_finite() {
        return Ok(if b > 0.0 { 1.0 } else { 0.0 });
    }
    if !a.is_finite() {
        // Limit of the conditional CDF as the first preimage runs off to ±inf.
        let arg = -t * a;
        return Ok(if t == 0.0 { q2 } else { phi(arg) });
    }
    Ok(phi((b - t * a) / (1.0 - t * t).sqrt()))
}
