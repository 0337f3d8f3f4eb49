//! Martingale coordinates of a sample path.
//!
//! M_n = a_n S_n - q A_n is a martingale with M_0 = 0, E[M_n] = s - q, and
//! increments M_k - M_{k-1} = a_k eps_k, where eps_k = S_k - E[S_k | past]
//! for k >= 2 and eps_1 = S_1 - q (our fixed convention: M_1 - M_0 = S_1 - q
//! with a_1 = A_1 = 1, so eps_1 is not centered unless s = q — M is a
//! martingale from time 1 on, not a centered one).
//!
//! The predictable bracket sums a_k^2 times the conditional increment
//! variance pi - pi^2 evaluated at the predecessor state, with the k = 1
//! term equal to E[(X_1 - q)^2] = s - 2qs + q^2. The same bracket also
//! splits into the deterministic-plus-path decomposition
//! (s-q)(1-2q) + q(1-q) v_n + a(1-2q) xi_n - a^2 zeta_n used by the
//! normalized-bracket experiment.

use crate::error::{Error, Result};
use crate::oracle::eps2_first;
use crate::process::{simulate_batch, step_probability, Path, Sampler, WalkParams};
use crate::sequences::{shared_table, v_limit_diffusive, SequenceTable};
use crate::stats::report::{TestResult, Verdict};
use crate::stats::summarize_mean;

/// A path rewritten in martingale coordinates.
#[derive(Debug, Clone)]
pub struct MartingalePath {
    /// M_0..M_n.
    pub m: Vec<f64>,
    /// eps_1..eps_n.
    pub eps: Vec<f64>,
    /// Bracket at 0..n (nondecreasing, starts at 0).
    pub bracket: Vec<f64>,
}

impl MartingalePath {
    #[inline]
    pub fn n(&self) -> u64 {
        (self.m.len() - 1) as u64
    }
}

/// Conditional centered moments of the next increment given the state:
/// with pi = q + a s_n / n,
///   m2 = pi - pi^2, m3 = pi - 3 pi^2 + 2 pi^3,
///   m4 = pi - 4 pi^2 + 6 pi^3 - 3 pi^4.
/// Bounds: 0 <= m2 <= 1/4 and 0 <= m4 <= 1/12.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalMoments {
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

pub fn conditional_moments(params: &WalkParams, s_n: u64, n: u64) -> Result<ConditionalMoments> {
    let pi = step_probability(params, s_n, n)?;
    Ok(moments_of_pi(pi))
}

#[inline]
fn moments_of_pi(pi: f64) -> ConditionalMoments {
    let m2 = pi * (1.0 - pi);
    let m3 = pi * (1.0 - pi * (3.0 - 2.0 * pi));
    let m4 = pi * (1.0 - pi * (4.0 - pi * (6.0 - 3.0 * pi)));
    debug_assert!((-1e-12..=0.25 + 1e-12).contains(&m2));
    debug_assert!((-1e-12..=1.0 / 12.0 + 1e-12).contains(&m4));
    ConditionalMoments { m2, m3, m4 }
}

/// Map a path to (M_k), (eps_k) and the bracket. The table must cover the
/// path length.
pub fn transform(path: &Path, params: &WalkParams, table: &SequenceTable) -> Result<MartingalePath> {
    let n = path.n();
    table.check_covers(n)?;
    let (q, a, s) = (params.q(), params.a(), params.s());
    let mut m = Vec::with_capacity(n as usize + 1);
    let mut eps = Vec::with_capacity(n as usize);
    let mut bracket = Vec::with_capacity(n as usize + 1);
    m.push(0.0);
    bracket.push(0.0);
    for k in 1..=n {
        let s_k = path.position(k) as f64;
        let m_k = table.a_n(k) * s_k - q * table.big_a_n(k);
        let (e_k, db) = if k == 1 {
            (s_k - q, s - 2.0 * q * s + q * q)
        } else {
            let prev = path.position(k - 1) as f64;
            let gamma = 1.0 + a / (k - 1) as f64;
            let pi = q + a * (prev / (k - 1) as f64);
            let a_k = table.a_n(k);
            (s_k - (q + gamma * prev), a_k * a_k * moments_of_pi(pi).m2)
        };
        debug_assert!(
            (m_k - m[(k - 1) as usize] - table.a_n(k) * e_k).abs() < 1e-9 * (1.0 + m_k.abs()),
            "increment identity violated at k = {k}"
        );
        bracket.push(bracket[(k - 1) as usize] + db);
        m.push(m_k);
        eps.push(e_k);
    }
    Ok(MartingalePath { m, eps, bracket })
}

/// Just the bracket sequence of a path.
pub fn bracket(path: &Path, params: &WalkParams, table: &SequenceTable) -> Result<Vec<f64>> {
    Ok(transform(path, params, table)?.bracket)
}

/// The bracket at time n split into its deterministic and path-dependent
/// parts: bracket = (s-q)(1-2q) + q(1-q) v_n + a(1-2q) xi_n - a^2 zeta_n,
/// with xi_n = sum_{k<n} a_{k+1}^2 (S_k/k) and zeta_n the same with the
/// square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketDecomposition {
    pub v_n: f64,
    pub xi_n: f64,
    pub zeta_n: f64,
    pub bracket_value: f64,
}

pub fn bracket_decomposition(
    path: &Path,
    params: &WalkParams,
    table: &SequenceTable,
) -> Result<BracketDecomposition> {
    let n = path.n();
    table.check_covers(n)?;
    let (q, s, a) = (params.q(), params.s(), params.a());
    let mut xi = 0.0;
    let mut zeta = 0.0;
    for k in 1..n {
        let a_k1 = table.a_n(k + 1);
        let frac = path.position(k) as f64 / k as f64;
        xi += a_k1 * a_k1 * frac;
        zeta += a_k1 * a_k1 * frac * frac;
    }
    let v_n = table.v_n(n);
    let value = (s - q) * (1.0 - 2.0 * q) + q * (1.0 - q) * v_n + a * (1.0 - 2.0 * q) * xi
        - a * a * zeta;
    Ok(BracketDecomposition { v_n, xi_n: xi, zeta_n: zeta, bracket_value: value })
}

/// Monte Carlo check that bracket_n / n^{1-2a} concentrates at sigma^2 l
/// in the diffusive regime. `band` is the relative acceptance band on the
/// Monte Carlo mean.
pub fn normalized_bracket_limit_check(
    params: &WalkParams,
    n: u64,
    replicas: u64,
    master_seed: u64,
    band: f64,
) -> Result<TestResult> {
    let a = params.a();
    if !(a < 0.5) {
        return Err(Error::RegimeMismatch {
            op: "normalized_bracket_limit_check",
            expected: "diffusive",
            actual: if a == 0.5 { "critical" } else { "superdiffusive" },
            a,
        });
    }
    if a <= -1.0 {
        return Err(Error::MemoryRange { a, range: "(-1, 1/2) for the bracket limit" });
    }
    let table = shared_table(a, n)?;
    let q = params.q();
    let first = eps2_first(params);
    let scale = (n as f64).powf(1.0 - 2.0 * a);
    let table_ref = &table;
    let values = simulate_batch(params, n, replicas, master_seed, Sampler::Collapsed, move |iter| {
        let mut acc = first;
        let mut prev: u64 = 0;
        for (k, s_k) in iter {
            if k >= 2 {
                let pi = q + a * (prev as f64 / (k - 1) as f64);
                let a_k = table_ref.a_n(k);
                acc += a_k * a_k * (pi - pi * pi);
            }
            prev = s_k;
        }
        acc / scale
    })?;
    let target = params.sigma2() * v_limit_diffusive(a)?;
    let estimate = summarize_mean(&values, 0.99);
    let verdict = verdict_for_band(estimate.value, target, band);
    Ok(TestResult {
        name: "normalized_bracket_limit".into(),
        statistic: estimate.value,
        p_value: None,
        target,
        estimate,
        verdict,
        notes: vec![format!("bracket_n / n^(1-2a) vs sigma^2 * ell, band {band:.3}")],
    })
}

/// Pass iff `value` is within `band` of `target` relatively; a zero target
/// demands a (numerically) zero value.
pub(crate) fn verdict_for_band(value: f64, target: f64, band: f64) -> Verdict {
    if target == 0.0 {
        if value.abs() < 1e-12 {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    } else if ((value - target) / target).abs() <= band {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_distribution;
    use crate::process::simulate_collapsed;
    use crate::rng::RngStream;
    use crate::sequences::SequenceTable;

    fn params(p: f64, q: f64, s: f64) -> WalkParams {
        WalkParams::new(p, q, s).unwrap()
    }

    #[test]
    fn conditional_moment_values() {
        // pi = 0
        let w = params(0.9, 0.0, 0.5);
        let m = conditional_moments(&w, 0, 5).unwrap();
        assert_eq!((m.m2, m.m3, m.m4), (0.0, 0.0, 0.0));
        // pi = 1/2
        let w = params(0.5, 0.5, 0.5);
        let m = conditional_moments(&w, 3, 6).unwrap();
        assert!((m.m2 - 0.25).abs() < 1e-15);
        assert!(m.m3.abs() < 1e-15);
        assert!((m.m4 - 1.0 / 16.0).abs() < 1e-15);
        // pi = 1
        let w = params(1.0, 0.2, 0.5);
        let m = conditional_moments(&w, 7, 7).unwrap();
        assert!(m.m2.abs() < 1e-12 && m.m3.abs() < 1e-12 && m.m4.abs() < 1e-12);
        // domain error
        assert!(conditional_moments(&w, 8, 7).is_err());
    }

    #[test]
    fn conditional_moment_bounds_sweep() {
        for &(p, q) in &[(0.8, 0.3), (0.75, 0.25), (0.9, 0.1), (0.05, 0.9), (0.0, 1.0)] {
            let w = params(p, q, 0.5);
            for n in 1..=1000u64 {
                // full sweep below n = 64, coarse above to keep this fast
                let step = if n <= 64 { 1 } else { n / 64 };
                let mut s_n = 0;
                loop {
                    let m = conditional_moments(&w, s_n, n).unwrap();
                    assert!((-1e-12..=0.25 + 1e-12).contains(&m.m2));
                    assert!((-1e-12..=1.0 / 12.0 + 1e-12).contains(&m.m4));
                    if s_n == n {
                        break;
                    }
                    s_n = (s_n + step).min(n);
                }
            }
        }
    }

    #[test]
    fn transform_base_values() {
        let w = params(0.8, 0.3, 0.5);
        let table = SequenceTable::build(w.a(), 300).unwrap();
        let mut rng = RngStream::new(9);
        let path = simulate_collapsed(&w, 300, &mut rng).unwrap();
        let mp = transform(&path, &w, &table).unwrap();
        assert_eq!(mp.m[0], 0.0);
        assert_eq!(mp.bracket[0], 0.0);
        // M_1 = S_1 - q (a_1 = A_1 = 1)
        assert!((mp.m[1] - (path.position(1) as f64 - 0.3)).abs() < 1e-15);
        // bracket_1 = s - 2qs + q^2, deterministic
        assert!((mp.bracket[1] - (0.5 - 2.0 * 0.3 * 0.5 + 0.09)).abs() < 1e-15);
        // bracket is nondecreasing
        for k in 1..mp.bracket.len() {
            assert!(mp.bracket[k] >= mp.bracket[k - 1]);
        }
        // increment identity holds to round-off on every step
        for k in 1..=300usize {
            let dm = mp.m[k] - mp.m[k - 1];
            let ae = table.a_n(k as u64) * mp.eps[k - 1];
            assert!((dm - ae).abs() < 1e-10, "k = {k}");
        }
        // table too short is an error
        assert!(matches!(
            transform(&path, &w, &SequenceTable::build(w.a(), 100).unwrap()),
            Err(Error::TableTooShort { .. })
        ));
    }

    #[test]
    fn dp_weighted_martingale_mean_is_s_minus_q() {
        // average of M_n over the exact law equals s - q for n <= 200
        let w = params(0.8, 0.3, 0.5);
        let table = SequenceTable::build(w.a(), 200).unwrap();
        for &n in &[1u64, 2, 10, 50, 200] {
            let d = exact_distribution(&w, n).unwrap();
            let mean_m = d.expectation(|k| table.a_n(n) * k as f64 - 0.3 * table.big_a_n(n));
            assert!((mean_m - 0.2).abs() < 1e-11, "n = {n}: {mean_m}");
        }
    }

    #[test]
    fn state_level_increment_mean_is_zero() {
        // P(up) * M_up + P(stay) * M_stay - M_now = 0 at every reachable state
        let w = params(0.6, 0.2, 0.5);
        let table = SequenceTable::build(w.a(), 201).unwrap();
        for k in 1..=200u64 {
            for s in 0..=k {
                let pi = step_probability(&w, s, k).unwrap();
                let m_now = table.a_n(k) * s as f64 - w.q() * table.big_a_n(k);
                let m_up = table.a_n(k + 1) * (s + 1) as f64 - w.q() * table.big_a_n(k + 1);
                let m_stay = table.a_n(k + 1) * s as f64 - w.q() * table.big_a_n(k + 1);
                let drift = pi * m_up + (1.0 - pi) * m_stay - m_now;
                assert!(drift.abs() < 1e-10, "k={k} s={s}: {drift}");
            }
        }
    }

    #[test]
    fn bracket_equals_decomposition() {
        for (seed, (p, q, s)) in
            [(1u64, (0.8, 0.3, 0.5)), (2, (0.75, 0.25, 0.5)), (3, (0.9, 0.1, 0.7))]
        {
            let w = params(p, q, s);
            let table = SequenceTable::build(w.a(), 1000).unwrap();
            for rep in 0..20u64 {
                let mut rng = RngStream::substream(seed, rep);
                let path = simulate_collapsed(&w, 1000, &mut rng).unwrap();
                let br = bracket(&path, &w, &table).unwrap();
                let dec = bracket_decomposition(&path, &w, &table).unwrap();
                assert!(
                    (br[1000] - dec.bracket_value).abs() < 1e-10,
                    "{} vs {}",
                    br[1000],
                    dec.bracket_value
                );
            }
        }
    }

    #[test]
    fn decomposition_n1_and_all_ones() {
        let w = params(0.8, 0.3, 0.5);
        let table = SequenceTable::build(w.a(), 2).unwrap();
        let mut rng = RngStream::new(0);
        let path = simulate_collapsed(&w, 1, &mut rng).unwrap();
        let dec = bracket_decomposition(&path, &w, &table).unwrap();
        assert_eq!(dec.xi_n, 0.0);
        assert_eq!(dec.zeta_n, 0.0);
        assert!((dec.bracket_value - (0.5 - 0.3 + 0.09)).abs() < 1e-15);

        // all-ones path (p = 1, s = 1): S_k/k = 1, so xi = zeta = v_n - 1
        let w1 = params(1.0, 0.4, 1.0);
        let table = SequenceTable::build(w1.a(), 400).unwrap();
        let mut rng = RngStream::new(5);
        let path = simulate_collapsed(&w1, 400, &mut rng).unwrap();
        assert_eq!(path.position(400), 400);
        let dec = bracket_decomposition(&path, &w1, &table).unwrap();
        assert!((dec.xi_n - (dec.v_n - 1.0)).abs() < 1e-10);
        assert!((dec.zeta_n - (dec.v_n - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn bracket_zero_for_frozen_zero_walk() {
        let w = params(0.9, 0.0, 0.0);
        let table = SequenceTable::build(w.a(), 100).unwrap();
        let mut rng = RngStream::new(1);
        let path = simulate_collapsed(&w, 100, &mut rng).unwrap();
        let br = bracket(&path, &w, &table).unwrap();
        assert!(br.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn normalized_bracket_concentrates() {
        // a = 0: bracket_n / n has mean sigma^2 = 1/4 exactly
        let w = params(0.5, 0.5, 0.5);
        let r = normalized_bracket_limit_check(&w, 20_000, 500, 11, 0.03).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.statistic - 0.25).abs() < 0.25 * 0.03);

        // degenerate zero walk: statistic and target are both zero
        let w0 = params(0.3, 0.0, 0.0);
        let r0 = normalized_bracket_limit_check(&w0, 1000, 10, 1, 0.05).unwrap();
        assert_eq!(r0.verdict, Verdict::Pass);
        assert_eq!(r0.statistic, 0.0);

        // regime guard
        assert!(normalized_bracket_limit_check(&params(0.8, 0.1, 0.5), 100, 10, 1, 0.05).is_err());
    }
}
