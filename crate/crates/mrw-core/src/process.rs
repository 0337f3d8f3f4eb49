//! The walk itself: validated parameters, regime classification, and two
//! interchangeable samplers.
//!
//! Mechanism: the first step is Bernoulli(s). At time n+1 a uniformly
//! chosen past step is revisited; a past 1 is imitated through
//! Bernoulli(p), a past 0 through Bernoulli(q). Conditionally on the
//! history this makes the step law Bernoulli(q + a S_n / n) with
//! a = p - q, which is what the collapsed sampler draws directly in O(1)
//! memory per step. The full-memory sampler keeps the literal mechanism
//! (bit history plus uniform lookback); both produce the same joint law of
//! (S_1, ..., S_n) and are cross-checked against the exact distribution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Growth regime, decided by the memory parameter a = p - q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Diffusive,
    Critical,
    Superdiffusive,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Diffusive => "diffusive",
            Regime::Critical => "critical",
            Regime::Superdiffusive => "superdiffusive",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The validated triple (p, q, s) with the derived memory parameter cached.
///
/// `a = p - q` is computed once at construction; every regime branch
/// compares that cached value, so a triple classifies identically
/// everywhere. The critical regime is exact equality `a == 1/2`: callers
/// wanting it must supply p, q whose difference is exactly representable
/// as 0.5 (e.g. 0.75/0.25), which is deliberate — a measure-zero threshold
/// should not be fuzzy-matched silently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    p: f64,
    q: f64,
    s: f64,
    a: f64,
}

impl WalkParams {
    pub fn new(p: f64, q: f64, s: f64) -> Result<Self> {
        for (name, value) in [("p", p), ("q", q), ("s", s)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ParamRange { name, value });
            }
        }
        if p == 1.0 && q == 0.0 {
            return Err(Error::FrozenWalk);
        }
        Ok(WalkParams { p, q, s, a: p - q })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }
    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }
    #[inline]
    pub fn s(&self) -> f64 {
        self.s
    }
    /// Cached memory parameter a = p - q.
    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn regime(&self) -> Regime {
        if self.a < 0.5 {
            Regime::Diffusive
        } else if self.a == 0.5 {
            Regime::Critical
        } else {
            Regime::Superdiffusive
        }
    }

    /// Almost-sure limit of S_n / n, namely q / (1 - a).
    #[inline]
    pub fn mean_rate(&self) -> f64 {
        self.q / (1.0 - self.a)
    }

    /// Asymptotic step variance q (1 - p) / (1 - a)^2; zero exactly when
    /// q = 0 or p = 1.
    #[inline]
    pub fn sigma2(&self) -> f64 {
        self.q * (1.0 - self.p) / ((1.0 - self.a) * (1.0 - self.a))
    }
}

/// Regime of a parameter triple (thin wrapper over [`WalkParams::regime`]).
pub fn classify(params: &WalkParams) -> Regime {
    params.regime()
}

/// Conditional step probability q + a s_n / n given S_n = s_n. Always a
/// convex combination q (1 - s_n/n) + p (s_n/n), hence in [0, 1].
pub fn step_probability(params: &WalkParams, s_n: u64, n: u64) -> Result<f64> {
    if n < 1 {
        return Err(Error::NTooSmall { op: "step_probability", n, min: 1 });
    }
    if s_n > n {
        return Err(Error::StateOutOfSupport { s_n: s_n as i64, n });
    }
    let pi = params.q + params.a * (s_n as f64 / n as f64);
    debug_assert!(
        (-1e-12..=1.0 + 1e-12).contains(&pi),
        "step probability {pi} escaped [0,1]"
    );
    Ok(pi)
}

/// One realization: positions S_0..S_n (steps are the increments).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    positions: Vec<u32>,
}

impl Path {
    fn from_positions(positions: Vec<u32>) -> Self {
        Path { positions }
    }

    /// Number of steps n.
    #[inline]
    pub fn n(&self) -> u64 {
        (self.positions.len() - 1) as u64
    }

    /// S_k for k = 0..=n.
    #[inline]
    pub fn position(&self, k: u64) -> u64 {
        self.positions[k as usize] as u64
    }

    /// All positions S_0..S_n.
    #[inline]
    pub fn positions(&self) -> &[u32] {
        &self.positions
    }

    /// Step bit X_k for k = 1..=n.
    #[inline]
    pub fn step(&self, k: u64) -> u64 {
        (self.positions[k as usize] - self.positions[k as usize - 1]) as u64
    }

    /// Check S_0 = 0, increments in {0, 1}, 0 <= S_k <= k.
    pub fn check_invariants(&self) -> Result<()> {
        if self.positions.is_empty() || self.positions[0] != 0 {
            return Err(Error::Invalid { what: "path", reason: "S_0 != 0".into() });
        }
        for k in 1..self.positions.len() {
            let d = self.positions[k] as i64 - self.positions[k - 1] as i64;
            if d != 0 && d != 1 {
                return Err(Error::Invalid {
                    what: "path",
                    reason: format!("increment {d} at step {k}"),
                });
            }
            if self.positions[k] as usize > k {
                return Err(Error::Invalid {
                    what: "path",
                    reason: format!("S_{k} = {} > {k}", self.positions[k]),
                });
            }
        }
        Ok(())
    }
}

/// Which sampling mechanism to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampler {
    /// O(1)-memory Markov sampler drawing Bernoulli(q + a S_k / k).
    Collapsed,
    /// Literal mechanism: uniform lookback into the stored bit history.
    FullMemory,
}

struct CollapsedState {
    q: f64,
    a: f64,
    s: f64,
    pos: u64,
    k: u64,
}

impl CollapsedState {
    #[inline]
    fn step(&mut self, rng: &mut RngStream) -> u64 {
        let pi = if self.k == 0 {
            self.s
        } else {
            self.q + self.a * (self.pos as f64 / self.k as f64)
        };
        self.pos += rng.bernoulli(pi) as u64;
        self.k += 1;
        self.pos
    }
}

struct FullMemoryState {
    p: f64,
    q: f64,
    s: f64,
    bits: Vec<u64>,
    pos: u64,
    k: u64,
}

impl FullMemoryState {
    #[inline]
    fn bit(&self, j: u64) -> bool {
        self.bits[(j >> 6) as usize] >> (j & 63) & 1 == 1
    }

    #[inline]
    fn push_bit(&mut self, b: bool) {
        let j = self.k;
        let w = (j >> 6) as usize;
        if w == self.bits.len() {
            self.bits.push(0);
        }
        if b {
            self.bits[w] |= 1 << (j & 63);
        }
    }

    /// Per step: draw the uniform index first, then the imitation coin.
    #[inline]
    fn step(&mut self, rng: &mut RngStream) -> u64 {
        let b = if self.k == 0 {
            rng.bernoulli(self.s)
        } else {
            let j = rng.uniform_1_to(self.k) - 1; // revisit step j+1
            let coin = if self.bit(j) { self.p } else { self.q };
            rng.bernoulli(coin)
        };
        self.push_bit(b);
        self.pos += b as u64;
        self.k += 1;
        self.pos
    }
}

enum SamplerState {
    Collapsed(CollapsedState),
    FullMemory(FullMemoryState),
}

/// Streaming view of one replica: yields (k, S_k) for k = 1..=n without
/// materializing the path. Recorders fold this into whatever statistic
/// they need, so replica memory stays O(1) (collapsed) or O(n/8) bytes
/// (full-memory bit history).
pub struct PositionIter<'a> {
    state: SamplerState,
    rng: &'a mut RngStream,
    n: u64,
}

impl<'a> PositionIter<'a> {
    pub fn new(params: &WalkParams, n: u64, sampler: Sampler, rng: &'a mut RngStream) -> Self {
        let state = match sampler {
            Sampler::Collapsed => SamplerState::Collapsed(CollapsedState {
                q: params.q,
                a: params.a,
                s: params.s,
                pos: 0,
                k: 0,
            }),
            Sampler::FullMemory => SamplerState::FullMemory(FullMemoryState {
                p: params.p,
                q: params.q,
                s: params.s,
                bits: Vec::with_capacity((n as usize >> 6) + 1),
                pos: 0,
                k: 0,
            }),
        };
        PositionIter { state, rng, n }
    }
}

impl Iterator for PositionIter<'_> {
    /// (k, S_k)
    type Item = (u64, u64);

    #[inline]
    fn next(&mut self) -> Option<(u64, u64)> {
        let k_done = match &self.state {
            SamplerState::Collapsed(st) => st.k,
            SamplerState::FullMemory(st) => st.k,
        };
        if k_done >= self.n {
            return None;
        }
        let pos = match &mut self.state {
            SamplerState::Collapsed(st) => st.step(self.rng),
            SamplerState::FullMemory(st) => st.step(self.rng),
        };
        Some((k_done + 1, pos))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let k_done = match &self.state {
            SamplerState::Collapsed(st) => st.k,
            SamplerState::FullMemory(st) => st.k,
        };
        let rem = (self.n - k_done) as usize;
        (rem, Some(rem))
    }
}

fn collect_path(params: &WalkParams, n: u64, sampler: Sampler, rng: &mut RngStream) -> Result<Path> {
    if n < 1 {
        return Err(Error::NTooSmall { op: "simulate", n, min: 1 });
    }
    let mut positions = Vec::with_capacity(n as usize + 1);
    positions.push(0u32);
    for (_, s) in PositionIter::new(params, n, sampler, rng) {
        positions.push(s as u32);
    }
    Ok(Path::from_positions(positions))
}

/// Sample a path by the literal mechanism (stored bit history, uniform
/// lookback, imitation coins).
pub fn simulate_full_memory(params: &WalkParams, n: u64, rng: &mut RngStream) -> Result<Path> {
    collect_path(params, n, Sampler::FullMemory, rng)
}

/// Sample a path by the collapsed Markov mechanism; same joint law as
/// [`simulate_full_memory`], O(1) memory per step.
pub fn simulate_collapsed(params: &WalkParams, n: u64, rng: &mut RngStream) -> Result<Path> {
    collect_path(params, n, Sampler::Collapsed, rng)
}

/// Run `replicas` independent replicas, replica i on substream
/// (master_seed, i), and fold each through `recorder`. The output vector
/// is indexed by replica, so the result is a pure function of the
/// arguments regardless of how rayon schedules the work.
pub fn simulate_batch<T, F>(
    params: &WalkParams,
    n: u64,
    replicas: u64,
    master_seed: u64,
    sampler: Sampler,
    recorder: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(PositionIter<'_>) -> T + Sync,
{
    if n < 1 {
        return Err(Error::NTooSmall { op: "simulate_batch", n, min: 1 });
    }
    if replicas < 1 {
        return Err(Error::NTooSmall { op: "simulate_batch replicas", n: replicas, min: 1 });
    }
    Ok((0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::substream(master_seed, i);
            recorder(PositionIter::new(params, n, sampler, &mut rng))
        })
        .collect())
}

/// Final position S_n of every replica (the most common recorder).
pub fn final_positions(
    params: &WalkParams,
    n: u64,
    replicas: u64,
    master_seed: u64,
    sampler: Sampler,
) -> Result<Vec<u64>> {
    simulate_batch(params, n, replicas, master_seed, sampler, |iter| {
        iter.last().map(|(_, s)| s).unwrap_or(0)
    })
}
