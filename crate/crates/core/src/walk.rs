//! Distance from the start of the lazy random walk on `T_d`.
//!
//! The walk stays put with probability 1/2 and otherwise steps to a uniform
//! neighbour. Its distance from the start is a birth-death chain on
//! `{0, 1, 2, ...}`:
//!
//! * from 0: to 1 with probability 1/2, stay with 1/2;
//! * from `r >= 1`: up with `(d-1)/(2d)`, down with `1/(2d)`, stay with 1/2.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::logspace::log_sum_exp_iter;
use crate::rng::stream_rng;
use crate::tree::{ln_ambient_sphere, NormalizedProfile};

/// Default number of steps for kernels built by front ends.
pub const DEFAULT_STEPS: usize = 4096;

/// Log transition probabilities of the distance chain.
#[derive(Debug, Clone, Copy)]
struct Steps {
    stay: f64,
    from_origin: f64,
    up: f64,
    down: f64,
}

impl Steps {
    fn new(d: usize) -> Self {
        let d = d as f64;
        Self {
            stay: 0.5f64.ln(),
            from_origin: 0.5f64.ln(),
            up: ((d - 1.0) / (2.0 * d)).ln(),
            down: (1.0 / (2.0 * d)).ln(),
        }
    }

    /// Row `n+1` from row `n`, renormalised so rounding cannot accumulate.
    fn advance(&self, prev: &[f64]) -> Vec<f64> {
        let n = prev.len() - 1;
        let at = |r: usize| prev.get(r).copied().unwrap_or(f64::NEG_INFINITY);
        let mut next: Vec<f64> = (0..=n + 1)
            .map(|r| {
                let stay = at(r) + self.stay;
                let from_below = match r {
                    0 => f64::NEG_INFINITY,
                    1 => at(0) + self.from_origin,
                    _ => at(r - 1) + self.up,
                };
                let from_above = at(r + 1) + self.down;
                log_sum_exp_iter([stay, from_below, from_above])
            })
            .collect();
        let total = log_sum_exp_iter(next.iter().copied());
        for v in &mut next {
            *v -= total;
        }
        next
    }
}

fn check_degree(d: usize) -> Result<()> {
    if d < 3 {
        return Err(invalid(format!("walk kernels need d >= 3, got {d}")));
    }
    Ok(())
}

/// `logq[n][r] = ln P(dist(X_n, o) = r)` for `r <= n <= N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceKernel {
    d: usize,
    rows: Vec<Vec<f64>>,
}

/// Tabulate the distance law for `n = 0..=steps`. Quadratic time and memory;
/// [`KernelRows`] streams the same rows in linear memory.
pub fn build_kernel(d: usize, steps: usize) -> Result<DistanceKernel> {
    if steps == 0 {
        return Err(invalid("kernel needs at least one step"));
    }
    let rows = KernelRows::new(d)?.take(steps + 1).collect();
    Ok(DistanceKernel { d, rows })
}

impl DistanceKernel {
    pub fn d(&self) -> usize {
        self.d
    }

    /// Largest step count `N`.
    pub fn steps(&self) -> usize {
        self.rows.len() - 1
    }

    /// Row `n`, entries `r = 0..=n`.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    /// `ln q_n(r)`, `-inf` for `r > n`.
    pub fn log_q(&self, n: usize, r: usize) -> f64 {
        self.rows[n].get(r).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// `E[dist(X_n, o)]`.
    pub fn mean_distance(&self, n: usize) -> f64 {
        self.rows[n].iter().enumerate().map(|(r, &lq)| r as f64 * lq.exp()).sum()
    }

    fn check_step(&self, n: usize) -> Result<()> {
        if n > self.steps() {
            return Err(invalid(format!("step {n} beyond kernel size {}", self.steps())));
        }
        Ok(())
    }
}

/// Kernel rows `n = 0, 1, 2, ...` computed on the fly.
#[derive(Debug, Clone)]
pub struct KernelRows {
    steps: Steps,
    current: Option<Vec<f64>>,
}

impl KernelRows {
    pub fn new(d: usize) -> Result<Self> {
        check_degree(d)?;
        Ok(Self { steps: Steps::new(d), current: None })
    }
}

impl Iterator for KernelRows {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let next = match &self.current {
            None => vec![0.0],
            Some(prev) => self.steps.advance(prev),
        };
        self.current = Some(next.clone());
        Some(next)
    }
}

/// `ln P(X_n = x)` for one fixed vertex `x` at distance `r`: the sphere mass
/// spread evenly over its `d (d-1)^{r-1}` vertices.
pub fn point_probability(kernel: &DistanceKernel, n: usize, r: usize) -> Result<f64> {
    kernel.check_step(n)?;
    if r > n {
        return Err(invalid(format!("distance {r} is unreachable in {n} steps")));
    }
    Ok(kernel.log_q(n, r) - ln_ambient_sphere(kernel.d, r))
}

/// `ln p_n` for `n = 0..=N`, where `p_n = sum_r q_n(r) a_r` is the chance
/// that the walk is back inside the tree described by the profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    pub d: usize,
    pub log_p: Vec<f64>,
    pub source: String,
}

impl ReturnSeries {
    /// Largest step count.
    pub fn steps(&self) -> usize {
        self.log_p.len() - 1
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }
}

fn check_profile(profile: &NormalizedProfile, d: usize, steps: usize) -> Result<()> {
    if profile.d() != d {
        return Err(invalid(format!("profile has d={} but the kernel has d={d}", profile.d())));
    }
    if profile.horizon() < steps && !profile.exhausted() {
        return Err(Error::ProfileTooShort { horizon: profile.horizon(), needed: steps });
    }
    Ok(())
}

/// `ln sum_r q(r) w_r` over one kernel row, for log weights `w_r`; missing
/// weights count as zero.
///
/// When every weight is exactly 1 the sum is the total mass of the row, which
/// is 1 by construction. That case returns exactly 0 rather than the rounded
/// row sum, so full trees and full clusters give exact identities.
pub(crate) fn mix_row(row: &[f64], ln_w: &[f64]) -> f64 {
    if ln_w.len() >= row.len() && ln_w[..row.len()].iter().all(|&w| w == 0.0) {
        return 0.0;
    }
    log_sum_exp_iter(row.iter().zip(ln_w).map(|(&q, &w)| q + w))
}

fn series_term(row: &[f64], profile: &NormalizedProfile) -> f64 {
    mix_row(row, profile.ln_a())
}

/// Return series over every step of the kernel.
pub fn return_series(profile: &NormalizedProfile, kernel: &DistanceKernel) -> Result<ReturnSeries> {
    check_profile(profile, kernel.d, kernel.steps())?;
    let log_p = kernel.rows.par_iter().map(|row| series_term(row, profile)).collect();
    Ok(ReturnSeries { d: kernel.d, log_p, source: String::new() })
}

/// [`return_series`] in linear memory, without keeping the kernel.
pub fn return_series_streaming(profile: &NormalizedProfile, d: usize, steps: usize) -> Result<ReturnSeries> {
    check_profile(profile, d, steps)?;
    let log_p = KernelRows::new(d)?.take(steps + 1).map(|row| series_term(&row, profile)).collect();
    Ok(ReturnSeries { d, log_p, source: String::new() })
}

/// One trajectory of the distance chain, `steps + 1` entries starting at 0.
///
/// Each step draws a fair coin for laziness, then a uniform neighbour slot;
/// slot 0 is the neighbour towards the start.
pub fn mc_distance_walk(d: usize, steps: usize, seed: u64) -> Result<Vec<usize>> {
    mc_distance_walk_stream(d, steps, seed, 0)
}

/// [`mc_distance_walk`] on stream `stream` of `seed`.
pub fn mc_distance_walk_stream(d: usize, steps: usize, seed: u64, stream: u64) -> Result<Vec<usize>> {
    check_degree(d)?;
    if steps == 0 {
        return Err(invalid("walk needs at least one step"));
    }
    let mut rng = stream_rng(seed, stream);
    let mut path = Vec::with_capacity(steps + 1);
    let mut r = 0usize;
    path.push(r);
    for _ in 0..steps {
        if rng.gen::<bool>() {
            let slot = rng.gen_range(0..d);
            r = if r > 0 && slot == 0 { r - 1 } else { r + 1 };
        }
        path.push(r);
    }
    Ok(path)
}

/// Histogram of the distance after `steps` steps over `runs` independent
/// trajectories (stream `i` for run `i`).
pub fn mc_distance_histogram(d: usize, steps: usize, runs: u64, seed: u64) -> Result<Vec<u64>> {
    check_degree(d)?;
    let finals: Vec<usize> = (0..runs)
        .into_par_iter()
        .map(|i| mc_distance_walk_stream(d, steps, seed, i).map(|p| p[steps]))
        .collect::<Result<_>>()?;
    let mut hist = vec![0u64; steps + 1];
    for r in finals {
        hist[r] += 1;
    }
    Ok(hist)
}
