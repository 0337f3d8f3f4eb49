//! Simulation-free ground truth.
//!
//! The conditional step law depends on the past only through S_n, so the
//! position is a time-inhomogeneous Markov chain on {0, ..., n} and its
//! full law is a dynamic program with transition
//! P(S_{k+1} = j+1 | S_k = j) = q + a j / k. On top of the DP sit the
//! moment recursions
//!
//!   E[S_{n+1}]   = q + (1 + a/n) E[S_n],
//!   E[S_{n+1}^2] = (1 + 2a/n) E[S_n^2] + (2q + a/n) E[S_n] + q,
//!
//! their closed forms through the Gamma-ratio sequences, and the
//! closed-form limit constants of the superdiffusive regime. Closed forms
//! carrying a (2a - 1) denominator are guarded near a = 1/2, where the
//! recursion route is authoritative.

use crate::error::{Error, Result};
use crate::numeric::{gamma, ln_gamma_ratio, ratio_dd, recip_gamma, Dd};
use crate::process::WalkParams;
use crate::sequences::SequenceIter;

/// Default cap for the O(n^2) exact-distribution sweep (25M multiply-adds).
pub const DEFAULT_MAX_EXACT_N: u64 = 5000;

/// Width of the guard band around a = 1/2 inside which (2a - 1) closed
/// forms are refused and recursions are used instead.
pub const NEAR_HALF_WIDTH: f64 = 1e-8;

/// Exact probability mass of S_n on {0, ..., n}.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    n: u64,
    pmf: Vec<f64>,
}

impl ExactDistribution {
    #[inline]
    pub fn n(&self) -> u64 {
        self.n
    }

    /// The mass function over 0..=n.
    #[inline]
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    #[inline]
    pub fn prob(&self, k: u64) -> f64 {
        if k <= self.n {
            self.pmf[k as usize]
        } else {
            0.0
        }
    }

    /// E[f(S_n)] under the exact law.
    pub fn expectation<F: Fn(u64) -> f64>(&self, f: F) -> f64 {
        let mut acc = Dd::ZERO;
        for (k, &p) in self.pmf.iter().enumerate() {
            acc = acc.add_f64(f(k as u64) * p);
        }
        acc.to_f64()
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|k| k as f64)
    }

    pub fn second_moment(&self) -> f64 {
        self.expectation(|k| (k * k) as f64)
    }
}

/// Exact law of S_n by dynamic programming, default cap on n.
pub fn exact_distribution(params: &WalkParams, n: u64) -> Result<ExactDistribution> {
    exact_distribution_with_cap(params, n, DEFAULT_MAX_EXACT_N)
}

/// Exact law of S_n with an explicit resource cap. The sweep accumulates
/// in double-double so the mass still sums to 1 within 1e-12 after n
/// sweeps of rounding.
pub fn exact_distribution_with_cap(
    params: &WalkParams,
    n: u64,
    max_n: u64,
) -> Result<ExactDistribution> {
    if n < 1 {
        return Err(Error::NTooSmall { op: "exact_distribution", n, min: 1 });
    }
    if n > max_n {
        return Err(Error::ResourceLimit { n, max: max_n });
    }
    let (q, a, s) = (params.q(), params.a(), params.s());
    let mut cur: Vec<Dd> = Vec::with_capacity(n as usize + 1);
    cur.push(Dd::from_sub(1.0, s));
    cur.push(Dd::from_f64(s));
    let mut next: Vec<Dd> = Vec::with_capacity(n as usize + 1);
    for k in 1..n {
        let kf = k as f64;
        next.clear();
        next.resize(k as usize + 2, Dd::ZERO);
        for j in 0..=k as usize {
            let pi = q + a * (j as f64 / kf);
            let w = cur[j];
            next[j] = next[j].add(w.mul_f64(1.0 - pi));
            next[j + 1] = next[j + 1].add(w.mul_f64(pi));
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let pmf = cur
        .iter()
        .map(|d| {
            let p = d.to_f64();
            debug_assert!(p > -1e-20, "negative mass {p}");
            p.max(0.0)
        })
        .collect();
    Ok(ExactDistribution { n, pmf })
}

/// Streaming first/second moment recursion: after construction the state
/// holds the moments of S_1; `advance` moves to the next time.
pub struct MomentRecursion {
    q: f64,
    a: f64,
    k: u64,
    mean: f64,
    second: f64,
}

impl MomentRecursion {
    pub fn new(params: &WalkParams) -> Self {
        MomentRecursion {
            q: params.q(),
            a: params.a(),
            k: 1,
            mean: params.s(),
            second: params.s(),
        }
    }

    #[inline]
    pub fn k(&self) -> u64 {
        self.k
    }
    #[inline]
    pub fn mean(&self) -> f64 {
        self.mean
    }
    #[inline]
    pub fn second_moment(&self) -> f64 {
        self.second
    }

    #[inline]
    pub fn advance(&mut self) {
        let kf = self.k as f64;
        self.second = (1.0 + 2.0 * self.a / kf) * self.second
            + (2.0 * self.q + self.a / kf) * self.mean
            + self.q;
        self.mean = self.q + (1.0 + self.a / kf) * self.mean;
        self.k += 1;
    }

    pub fn advance_to(&mut self, n: u64) {
        while self.k < n {
            self.advance();
        }
    }
}

/// E[S_n] by the step recursion (works for every a in [-1, 1)).
pub fn mean_sn_recursive(params: &WalkParams, n: u64) -> f64 {
    let mut rec = MomentRecursion::new(params);
    rec.advance_to(n);
    rec.mean()
}

/// E[S_n^2] by the step recursion.
pub fn second_moment_sn_recursive(params: &WalkParams, n: u64) -> f64 {
    let mut rec = MomentRecursion::new(params);
    rec.advance_to(n);
    rec.second_moment()
}

/// E[S_n] through the scaled closed form a_n E[S_n] = s - q + q A_n.
/// Falls back to the recursion at a = -1 where the sequences degenerate.
pub fn mean_sn(params: &WalkParams, n: u64) -> f64 {
    if params.a() <= -1.0 {
        return mean_sn_recursive(params, n);
    }
    let mut it = SequenceIter::new(params.a()).expect("a in (-1,1) by construction");
    while it.n() < n {
        it.advance();
    }
    (params.s() - params.q() + params.q() * it.big_a_n()) / it.a_n()
}

/// `a_n^2 Gamma(n+2a) / (Gamma(n) Gamma(2a+1))`, the scale factor of the
/// leading closed-form term; tends to Gamma^2(a+1)/Gamma(2a+1). Entire in
/// a (the Gamma(2a+1) pole at a = -1/2 is absorbed by the reciprocal).
fn leading_scale(a: f64, n: u64) -> f64 {
    match n {
        1 => 1.0,
        2 => (1.0 + 2.0 * a) / ((1.0 + a) * (1.0 + a)),
        _ => {
            // Gamma(n) Gamma(n+2a) / Gamma^2(n+a), argument-safe for n >= 3
            let nf = n as f64;
            let g = gamma(a + 1.0);
            g * g * recip_gamma(2.0 * a + 1.0)
                * (ln_gamma_ratio(nf + a, a) - ln_gamma_ratio(nf, a)).exp()
        }
    }
}

/// a_n through the log-Gamma route (independent of the recurrence).
fn a_n_gamma(a: f64, n: u64) -> f64 {
    gamma(a + 1.0) * (-ln_gamma_ratio(n as f64, a)).exp()
}

/// The constant tau entering the second-moment closed form and E[L^2]:
/// tau = s - 4qs/(1-a) + 2q/(2a-1) + 2q^2 (3a-2) / ((1-a)^2 (2a-1)).
///
/// Derived by assembling the four Gamma-sum identities behind the
/// second-moment recursion symbolically and verified against the recursion
/// itself at every n (see the route-agreement tests); with a 4q^2 last
/// coefficient in place of 2q^2 the closed form already fails at n = 1 and
/// produces a negative E[L^2] for p = 1 parameter sets.
pub fn tau(params: &WalkParams) -> Result<f64> {
    let (q, s, a) = (params.q(), params.s(), params.a());
    if (a - 0.5).abs() < NEAR_HALF_WIDTH {
        return Err(Error::NearHalf { op: "tau", a, width: NEAR_HALF_WIDTH });
    }
    let om = 1.0 - a;
    Ok(s - 4.0 * q * s / om
        + 2.0 * q / (2.0 * a - 1.0)
        + 2.0 * q * q * (3.0 * a - 2.0) / (om * om * (2.0 * a - 1.0)))
}

/// E[S_n^2] in closed form,
///
///   (s + tau) Gamma(n+2a)/(Gamma(n) Gamma(2a+1))
///     + n q (q n (2a-1) + a + q - 1) / ((1-a)^2 (2a-1))
///     + b (1 - a - 2q(n+1)) Gamma(n+a) / ((1-a)^2 Gamma(n) Gamma(a+1)),
///
/// refused within the (2a - 1) guard band. Evaluated in the a_n^2-scaled
/// variables so the Gamma ratios never overflow.
pub fn second_moment_sn_closed(params: &WalkParams, n: u64) -> Result<f64> {
    let (q, s, a) = (params.q(), params.s(), params.a());
    if a <= -1.0 {
        return Err(Error::MemoryRange { a, range: "(-1, 1) for the closed form" });
    }
    let tau = tau(params)?;
    let a_n = a_n_gamma(a, n);
    Ok(scaled_second_moment(n, tau, q, s, a) / (a_n * a_n))
}

/// a_n^2 E[S_n^2] from the closed form.
fn scaled_second_moment(n: u64, tau: f64, q: f64, s: f64, a: f64) -> f64 {
    let nf = n as f64;
    let om = 1.0 - a;
    let two_am1 = 2.0 * a - 1.0;
    let a_n = a_n_gamma(a, n);
    let t1 = (s + tau) * leading_scale(a, n);
    let t2 = a_n * a_n * nf * q * (q * nf * two_am1 + a + q - 1.0) / (om * om * two_am1);
    let b = q - s * om;
    let t3 = b * a_n * (om - 2.0 * q * (nf + 1.0)) / (om * om);
    t1 + t2 + t3
}

/// E[S_n^2]: closed form away from a = 1/2, recursion inside the guard
/// band (and at a = -1).
pub fn second_moment_sn(params: &WalkParams, n: u64) -> f64 {
    match second_moment_sn_closed(params, n) {
        Ok(v) => v,
        Err(_) => second_moment_sn_recursive(params, n),
    }
}

/// E[M_n^2] assembled directly from a_n^2 E[S_n^2] - 2q(s-q) A_n - q^2 A_n^2
/// with the recursion second moment; the route independent of the closed
/// form below.
pub fn mean_m2_direct(params: &WalkParams, n: u64) -> f64 {
    let (q, s) = (params.q(), params.s());
    let mut it = SequenceIter::new(params.a()).expect("a in (-1,1)");
    while it.n() < n {
        it.advance();
    }
    let (a_n, big_a) = (it.a_n(), it.big_a_n());
    let es2 = second_moment_sn_recursive(params, n);
    a_n * a_n * es2 - 2.0 * q * (s - q) * big_a - q * q * big_a * big_a
}

/// E[M_n^2] in closed form, assembled as
/// a_n^2 E[S_n^2] - 2q(s-q) A_n - q^2 A_n^2 with the closed-form second
/// moment and A_n = (n a_n - a)/(1-a); refused within the (2a - 1) guard
/// band.
pub fn mean_m2_closed(params: &WalkParams, n: u64) -> Result<f64> {
    let (q, s, a) = (params.q(), params.s(), params.a());
    if a <= -1.0 {
        return Err(Error::MemoryRange { a, range: "(-1, 1) for the closed form" });
    }
    let tau = tau(params)?;
    let scaled = scaled_second_moment(n, tau, q, s, a);
    let a_n = a_n_gamma(a, n);
    let big_a = (n as f64 * a_n - a) / (1.0 - a);
    Ok(scaled - 2.0 * q * (s - q) * big_a - q * q * big_a * big_a)
}

/// E[M_n^2]: closed form away from a = 1/2, direct route inside the band.
pub fn mean_m2(params: &WalkParams, n: u64) -> f64 {
    match mean_m2_closed(params, n) {
        Ok(v) => v,
        Err(_) => mean_m2_direct(params, n),
    }
}

/// Unconditional martingale-increment variance
/// E[eps_{n+1}^2] = q(1-q) + (1-2q) a E[S_n]/n - a^2 E[S_n^2]/n^2,
/// always in [0, 1/4].
pub fn eps2_mean(params: &WalkParams, n: u64) -> f64 {
    let (q, a) = (params.q(), params.a());
    let nf = n as f64;
    let m1 = mean_sn(params, n);
    let m2 = second_moment_sn(params, n);
    let v = q * (1.0 - q) + (1.0 - 2.0 * q) * a * m1 / nf - a * a * m2 / (nf * nf);
    debug_assert!((-1e-9..=0.25 + 1e-9).contains(&v), "eps2_mean = {v}");
    v
}

/// Same expectation through the DP law: E[pi - pi^2] with pi = q + a S_n/n.
pub fn eps2_mean_dp(params: &WalkParams, n: u64) -> Result<f64> {
    let dist = exact_distribution(params, n)?;
    let (q, a) = (params.q(), params.a());
    let nf = n as f64;
    Ok(dist.expectation(|k| {
        let pi = q + a * (k as f64 / nf);
        pi - pi * pi
    }))
}

/// Variance of the increment at time 1, E[(X_1 - q)^2] = s - 2qs + q^2.
pub fn eps2_first(params: &WalkParams) -> f64 {
    let (q, s) = (params.q(), params.s());
    s - 2.0 * q * s + q * q
}

/// Tail variance of the martingale, s_n^2 = sum_{k>=n} a_k^2 E[eps_k^2],
/// finite in the superdiffusive regime.
///
/// Terms are summed explicitly up to a doubling horizon K. Beyond it the
/// terms follow c1 k^{-2a} + c2 k^{-(a+1)} (the second exponent comes from
/// the k^{a-1} approach of E[eps_k^2] to its limit); both coefficients are
/// calibrated on the exact terms at K/2 and K and the remainder is closed
/// with midpoint power integrals. The horizon doubles until two successive
/// closures agree within `rel_tol/4`, which certifies the returned relative
/// error below `rel_tol`.
///
/// n^{2a-1} s_n^2 converges to sigma^2 Gamma^2(a+1) / (2a - 1) (see
/// [`LimitConstants::sn2_rate`]).
pub fn tail_s2(params: &WalkParams, n: u64, rel_tol: f64) -> Result<f64> {
    let a = params.a();
    if !(a > 0.5) {
        return Err(Error::RegimeMismatch {
            op: "tail_s2",
            expected: "superdiffusive",
            actual: if a == 0.5 { "critical" } else { "diffusive" },
            a,
        });
    }
    if n < 1 {
        return Err(Error::NTooSmall { op: "tail_s2", n, min: 1 });
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::Invalid {
            what: "rel_tol",
            reason: format!("must be in (0, 1), got {rel_tol}"),
        });
    }
    let q = params.q();
    let mut rec = MomentRecursion::new(params);
    let mut a_k = Dd::from_f64(1.0); // a_1
    let mut k: u64 = 1;
    let mut sum = Dd::ZERO;
    let mut term = 0.0f64;
    let mut half_term = 0.0f64;
    let mut cap = (2 * n).max(4096);
    let mut prev_total: Option<f64> = None;
    loop {
        while k <= cap {
            // E[eps_k^2]: k = 1 is the first-step variance
            let e2 = if k == 1 {
                eps2_first(params)
            } else {
                let kf = (k - 1) as f64;
                q * (1.0 - q) + (1.0 - 2.0 * q) * a * rec.mean() / kf
                    - a * a * rec.second_moment() / (kf * kf)
            };
            let af = a_k.to_f64();
            term = af * af * e2;
            if k >= n {
                sum = sum.add_f64(term);
            }
            if 2 * k == cap {
                half_term = term;
            }
            a_k = a_k.mul(ratio_dd(k as f64, a));
            rec.advance_to(k);
            k += 1;
        }
        let partial = sum.to_f64();
        if partial == 0.0 {
            return Ok(0.0); // degenerate all-zero walk
        }
        // two-term power fit through the exact terms at K/2 and K
        let kf = cap as f64;
        let (e1, e2x) = (-2.0 * a, -(a + 1.0));
        let (u1, v1) = (kf.powf(e1), kf.powf(e2x));
        let (u2, v2) = ((0.5 * kf).powf(e1), (0.5 * kf).powf(e2x));
        let det = u1 * v2 - u2 * v1;
        let c1 = (term * v2 - half_term * v1) / det;
        let c2 = (half_term * u1 - term * u2) / det;
        let m = kf + 0.5;
        let tail = c1 * m.powf(e1 + 1.0) / (-e1 - 1.0) + c2 * m.powf(e2x + 1.0) / (-e2x - 1.0);
        let total = partial + tail;
        if let Some(prev) = prev_total {
            if (total - prev).abs() <= 0.25 * rel_tol * total.abs() {
                return Ok(total);
            }
        }
        prev_total = Some(total);
        cap *= 2;
        // the last computed term sits at the new cap/2
        half_term = term;
        if cap > 1 << 32 {
            return Err(Error::Invalid {
                what: "rel_tol",
                reason: format!("tail closure did not certify rel_tol = {rel_tol}"),
            });
        }
    }
}

/// Closed-form limit constants. Fields that only exist in one regime are
/// `None` elsewhere; `ell` is also `None` at a = -1 where Gamma(a+1) has a
/// pole.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LimitConstants {
    /// sigma^2 = q (1-p) / (1-a)^2.
    pub sigma2: f64,
    /// nu = -q / (1-a).
    pub nu: f64,
    /// b = q - s (1-a).
    pub b: f64,
    /// E[M] = s - q.
    pub e_m: f64,
    /// Diffusive v_n/n^{1-2a} limit Gamma^2(a+1)/(1-2a); a in (-1, 1/2).
    pub ell: Option<f64>,
    /// tau; defined away from a = 1/2.
    pub tau: Option<f64>,
    /// E[L] = (s + nu) / Gamma(a+1); superdiffusive only.
    pub e_l: Option<f64>,
    /// E[L^2] = (s + tau) / Gamma(2a+1); superdiffusive only.
    pub e_l2: Option<f64>,
    /// E[M^2] = (s+tau) Gamma^2(a+1)/Gamma(2a+1) - qa(q(2-a) - 2s(1-a))/(1-a)^2.
    pub e_m2: Option<f64>,
    /// Limit of n^{2a-1} s_n^2: sigma^2 Gamma^2(a+1) / (2a-1).
    pub sn2_rate: Option<f64>,
}

/// E[L^2] recomputed through the M-moments,
/// (E[M^2] - 2 (qa/(1-a)) E[M] + (qa/(1-a))^2) / Gamma^2(a+1);
/// algebraically identical to (s + tau)/Gamma(2a+1) and used as the
/// consistency cross-route.
pub fn e_l2_from_m_route(params: &WalkParams) -> Result<f64> {
    let (q, a) = (params.q(), params.a());
    if !(a > 0.5) {
        return Err(Error::RegimeMismatch {
            op: "e_l2_from_m_route",
            expected: "superdiffusive",
            actual: if a == 0.5 { "critical" } else { "diffusive" },
            a,
        });
    }
    let c = limit_constants(params);
    let shift = q * a / (1.0 - a);
    let g = gamma(a + 1.0);
    Ok((c.e_m2.unwrap() - 2.0 * shift * c.e_m + shift * shift) / (g * g))
}

pub fn limit_constants(params: &WalkParams) -> LimitConstants {
    let (q, s, a) = (params.q(), params.s(), params.a());
    let om = 1.0 - a;
    let sigma2 = params.sigma2();
    let nu = -q / om;
    let b = q - s * om;
    let e_m = s - q;
    let ell = if a > -1.0 && a < 0.5 {
        let g = gamma(a + 1.0);
        Some(g * g / (1.0 - 2.0 * a))
    } else {
        None
    };
    let tau_v = tau(params).ok();
    let (e_l, e_l2, e_m2, sn2_rate) = if a > 0.5 {
        let g1 = gamma(a + 1.0);
        let g2 = gamma(2.0 * a + 1.0);
        let tau_v = tau_v.expect("a > 1/2 is outside the guard band");
        let e_l = (s + nu) / g1;
        let e_l2 = (s + tau_v) / g2;
        let e_m2 = (s + tau_v) * g1 * g1 / g2 - q * a * (q * (2.0 - a) - 2.0 * s * om) / (om * om);
        let sn2_rate = sigma2 * g1 * g1 / (2.0 * a - 1.0);
        debug_assert!(e_l2 + 1e-12 >= e_l * e_l, "E[L^2] < E[L]^2");
        (Some(e_l), Some(e_l2), Some(e_m2), Some(sn2_rate))
    } else {
        (None, None, None, None)
    };
    LimitConstants { sigma2, nu, b, e_m, ell, tau: tau_v, e_l, e_l2, e_m2, sn2_rate }
}
