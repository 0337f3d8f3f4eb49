//! Scalar numerics shared by the oracles and the statistical tests:
//! Gamma-function machinery (including a cancellation-free log-Gamma ratio
//! for large arguments), the regularized incomplete gamma function, normal
//! and Kolmogorov distribution helpers, and a minimal double-double type
//! used to keep long recurrences and dynamic-programming sweeps well below
//! f64 round-off.

use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// Gamma
// ---------------------------------------------------------------------------

/// Lanczos coefficients, g = 7, 9 terms. Relative error of the resulting
/// Gamma values is ~1e-14 over the arguments used here (O(1) magnitudes).
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x >= 0.5; series evaluated at z = x - 1
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    acc
}

/// Natural log of Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma needs x > 0, got {x}");
    if x >= 16.0 {
        return stirling_ln_gamma(x);
    }
    if x < 0.5 {
        // reflection through ln Gamma(1 - x)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(x).ln()
}

/// Gamma(x) for any non-pole real x (reflection below 0.5).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = (PI * x).sin();
        if s == 0.0 {
            return f64::INFINITY; // pole at 0, -1, -2, ...
        }
        return PI / (s * gamma(1.0 - x));
    }
    if x >= 16.0 {
        return stirling_ln_gamma(x).exp();
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(x)
}

/// 1/Gamma(x); returns 0 at the poles, so it is defined for every real x.
pub fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    1.0 / gamma(x)
}

/// Bernoulli-number tail of the Stirling series,
/// S(z) = sum_k B_2k / (2k (2k-1) z^(2k-1)); truncation error < 1e-19 for
/// z >= 16.
fn stirling_tail(z: f64) -> f64 {
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let w = 1.0 / (z * z);
    let mut acc = C[6];
    for k in (0..6).rev() {
        acc = C[k] + acc * w;
    }
    acc / z
}

fn stirling_ln_gamma(z: f64) -> f64 {
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + stirling_tail(z)
}

/// ln Gamma(z + d) - ln Gamma(z), computed without forming the two large
/// logarithms. Direct subtraction of `ln_gamma` values loses ~|ln Gamma(z)|
/// * eps of absolute accuracy (catastrophic once z is 1e6 or more); this
/// routine keeps the absolute error at a few ulps of the small result.
///
/// Requires z > 0 and z + d > 0.
pub fn ln_gamma_ratio(z: f64, d: f64) -> f64 {
    assert!(z > 0.0 && z + d > 0.0, "ln_gamma_ratio domain: z = {z}, d = {d}");
    if d == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut z = z;
    // Gamma(z+d)/Gamma(z) = [Gamma(z+1+d)/Gamma(z+1)] * z/(z+d)
    while z < 16.0 {
        acc -= (d / z).ln_1p();
        z += 1.0;
    }
    // (z+d-1/2) ln(z+d) - (z-1/2) ln z - d  ==  (z-1/2) ln1p(d/z) + d (ln(z+d) - 1)
    acc + (z - 0.5) * (d / z).ln_1p() + d * ((z + d).ln() - 1.0) + stirling_tail(z + d)
        - stirling_tail(z)
}

/// Gamma(z + d) / Gamma(z) for z > 0, z + d > 0.
pub fn gamma_ratio(z: f64, d: f64) -> f64 {
    ln_gamma_ratio(z, d).exp()
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma
// ---------------------------------------------------------------------------

const IG_EPS: f64 = 1e-15;
const IG_ITMAX: usize = 400;

/// Regularized lower incomplete gamma P(a, x).
pub fn reg_gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "reg_gamma_p domain: a = {a}, x = {x}");
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn reg_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "reg_gamma_q domain: a = {a}, x = {x}");
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..IG_ITMAX {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * IG_EPS {
            break;
        }
    }
    sum * (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    // modified Lentz continued fraction
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=IG_ITMAX {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < IG_EPS {
            break;
        }
    }
    h * (a * x.ln() - x - ln_gamma(a)).exp()
}

/// Survival function of the chi-square law with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    reg_gamma_q(0.5 * df, 0.5 * x)
}

// ---------------------------------------------------------------------------
// Normal distribution
// ---------------------------------------------------------------------------

/// erfc via the incomplete gamma identity erfc(y) = Q(1/2, y^2) for y >= 0.
pub fn erfc(y: f64) -> f64 {
    if y < 0.0 {
        2.0 - erfc(-y)
    } else if y == 0.0 {
        1.0
    } else {
        reg_gamma_q(0.5, y * y)
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile. Acklam's rational approximation polished with
/// one Newton step against `std_normal_cdf`, good to ~1e-14 over (0, 1).
pub fn std_normal_quantile(prob: f64) -> f64 {
    assert!(prob > 0.0 && prob < 1.0, "quantile domain: {prob}");
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
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
    let p_low = 0.02425;
    let x = if prob < p_low {
        let q = (-2.0 * prob.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if prob <= 1.0 - p_low {
        let q = prob - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - prob).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // one Newton polish
    x - (std_normal_cdf(x) - prob) / std_normal_pdf(x)
}

// ---------------------------------------------------------------------------
// Kolmogorov distribution
// ---------------------------------------------------------------------------

/// Upper tail Q(lambda) of the Kolmogorov distribution,
/// Q(lambda) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lambda^2).
/// For small lambda the complementary theta series is used instead.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // F(lambda) = sqrt(2 pi)/lambda * sum_{j odd} exp(-(j pi)^2 / (8 lambda^2))
        let t = PI * PI / (8.0 * lambda * lambda);
        let mut f = 0.0;
        for j in (1..40).step_by(2) {
            let term = (-(j * j) as f64 * t).exp();
            f += term;
            if term < 1e-18 * f {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / lambda * f
    } else {
        let mut q = 0.0;
        let mut sign = 1.0;
        for j in 1..40 {
            let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
            q += sign * term;
            sign = -sign;
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * q).clamp(0.0, 1.0)
    }
}

// ---------------------------------------------------------------------------
// Double-double arithmetic (Dekker / Knuth error-free transforms)
// ---------------------------------------------------------------------------

/// Unevaluated sum hi + lo with |lo| <= ulp(hi)/2. Only the handful of
/// operations the sequence recurrences and the distribution DP need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    // requires |a| >= |b|
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let err = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact double-double from the f64 difference a - b (|a-b| assumed
    /// representable; used for constants like 1 - s).
    #[inline]
    pub fn from_sub(a: f64, b: f64) -> Dd {
        let (s, e) = two_sum(a, -b);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, x: f64) -> Dd {
        let (s, e) = two_sum(self.hi, x);
        let e = e + self.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + (self.hi * other.lo + self.lo * other.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, x: f64) -> Dd {
        let (p, e) = two_prod(self.hi, x);
        let e = e + self.lo * x;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sqr(self) -> Dd {
        self.mul(self)
    }
}

/// k / (k + a) to double-double accuracy, for k >= 1 and a > -1.
#[inline]
pub fn ratio_dd(k: f64, a: f64) -> Dd {
    let s = k + a;
    // rounding error of the denominator; exact for k >= 2 (Sterbenz), and
    // within 1/2 ulp of exact at k = 1, which is far below the dd budget
    let err = a - (s - k);
    let r = k / s;
    let (p, pe) = two_prod(r, s);
    let resid = ((k - p) - pe) - r * err;
    Dd { hi: r, lo: resid / s }
}
