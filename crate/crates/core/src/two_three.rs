//! The 2-3 method: mass-transport functionals on a percolation cluster, the
//! certificate chain they build, and exponent estimators.
//!
//! For a cluster `C` and `k` lazy steps write `p_k(x, y)` for the walk's
//! point probability and `P_k(y) = sum_{z in C} p_k(y, z)`. Then
//!
//! * `f1(x, k) = sum_y p_k(x, y) / P_k(y)`;
//! * `f2(x, k) = P_k(x) sum_y p_k(x, y) / sum_z p_k(y, z) P_k(z)`;
//!
//! with all sums over `C`. Cauchy-Schwarz gives `P_k^2 <= f1 P_{2k}` and
//! `P_k^3 <= f2 P_{3k}`, and both functionals have mean 1 under invariant
//! percolation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{bernoulli_cluster, PercolationParams};
use crate::logspace::{ln_count, log_sum_exp};
use crate::stats::MeanEstimate;
use crate::tree::RootedTreeWindow;
use crate::walk::{mix_row, DistanceKernel, ReturnSeries};

/// Smallest series accepted by [`exponent_estimate`].
pub const MIN_SERIES_LEN: usize = 64;
/// Slack tolerated on the Cauchy-Schwarz inequalities.
pub const SLACK_TOL: f64 = -1e-10;
/// Log slack tolerated on the certificate chain.
pub const CHAIN_TOL: f64 = 1e-9;

/// Log of the number of vertices on a sphere of `T_d`.
///
/// Computed as the log of the exact count while it fits in a double, so that
/// a sphere filled completely by the cluster gives a ratio of exactly 1.
fn ln_ambient(d: usize, r: usize) -> f64 {
    if r == 0 {
        return 0.0;
    }
    let exact = (d as f64) * ((d - 1) as f64).powi(r as i32 - 1);
    if exact < 9.007_199_254_740_992e15 {
        exact.ln()
    } else {
        (d as f64).ln() + (r - 1) as f64 * ((d - 1) as f64).ln()
    }
}

/// Exact evaluation of cluster quantities around vertices of one window.
///
/// `P_k(v)` values are cached per window vertex.
struct ClusterEval<'a> {
    window: &'a RootedTreeWindow,
    kernel: &'a DistanceKernel,
    k: usize,
    ln_p: Vec<Option<f64>>,
    ln_inner: Vec<Option<f64>>,
}

impl<'a> ClusterEval<'a> {
    fn new(window: &'a RootedTreeWindow, kernel: &'a DistanceKernel, k: usize) -> Result<Self> {
        if k > kernel.steps() {
            return Err(crate::error::invalid(format!("{k} steps exceed the kernel size {}", kernel.steps())));
        }
        if kernel.d() != window.d() {
            return Err(crate::error::invalid(format!(
                "window has d={} but the kernel has d={}",
                window.d(),
                kernel.d()
            )));
        }
        let n = window.len();
        Ok(Self { window, kernel, k, ln_p: vec![None; n], ln_inner: vec![None; n] })
    }

    fn row(&self) -> &'a [f64] {
        self.kernel.row(self.k)
    }

    /// Per-sphere `ln((1/|S_r|) sum_{y in C, d(v,y)=r} e^{g(y)})`.
    fn sphere_average(&mut self, v: usize, mut g: impl FnMut(&mut Self, usize) -> Result<f64>) -> Result<Vec<f64>> {
        let ball = self.window.ball(v, self.k)?;
        let mut by_r: Vec<Vec<f64>> = vec![Vec::new(); self.k + 1];
        for (y, r) in ball {
            let val = g(self, y)?;
            by_r[r].push(val);
        }
        let d = self.window.d();
        Ok(by_r.iter().enumerate().map(|(r, vals)| log_sum_exp(vals) - ln_ambient(d, r)).collect())
    }

    /// `ln P_k(v)`.
    fn ln_return(&mut self, v: usize) -> Result<f64> {
        if let Some(val) = self.ln_p[v] {
            return Ok(val);
        }
        let ball = self.window.ball(v, self.k)?;
        let mut counts = vec![0u64; self.k + 1];
        for (_, r) in ball {
            counts[r] += 1;
        }
        let d = self.window.d();
        let ln_a: Vec<f64> = counts.iter().enumerate().map(|(r, &c)| ln_count(c) - ln_ambient(d, r)).collect();
        let val = mix_row(self.row(), &ln_a);
        self.ln_p[v] = Some(val);
        Ok(val)
    }

    /// `ln f1(x, k)`.
    fn ln_f1(&mut self, x: usize) -> Result<f64> {
        let w = self.sphere_average(x, |s, y| Ok(-s.ln_return(y)?))?;
        Ok(mix_row(self.row(), &w))
    }

    /// `ln sum_z p_k(y, z) P_k(z) / P_k(x)`, the inner sum of `f2` scaled by
    /// `P_k(x)`; the scaling keeps one-vertex clusters exact.
    fn ln_inner(&mut self, y: usize, ln_px: f64) -> Result<f64> {
        if let Some(val) = self.ln_inner[y] {
            return Ok(val);
        }
        let w = self.sphere_average(y, |s, z| Ok(s.ln_return(z)? - ln_px))?;
        let val = mix_row(self.row(), &w);
        self.ln_inner[y] = Some(val);
        Ok(val)
    }

    /// `ln f2(x, k)`.
    fn ln_f2(&mut self, x: usize) -> Result<f64> {
        let ln_px = self.ln_return(x)?;
        self.ln_inner.iter_mut().for_each(|v| *v = None);
        let w = self.sphere_average(x, |s, y| Ok(-s.ln_inner(y, ln_px)?))?;
        Ok(mix_row(self.row(), &w))
    }
}

/// `ln P_k(y)`: the chance that `k` lazy steps from `y` end in `y`'s cluster.
///
/// Fails with [`Error::InsufficientRadius`] when the window does not
/// determine the cluster ball of radius `k` around `y`.
pub fn cluster_return_prob(window: &RootedTreeWindow, y: usize, k: usize, kernel: &DistanceKernel) -> Result<f64> {
    ClusterEval::new(window, kernel, k)?.ln_return(y)
}

/// `ln f1(x, k)`. Needs the cluster ball of radius `2k` around `x`.
pub fn f1(window: &RootedTreeWindow, x: usize, k: usize, kernel: &DistanceKernel) -> Result<f64> {
    ClusterEval::new(window, kernel, k)?.ln_f1(x)
}

/// `ln f2(x, k)`. Needs the cluster ball of radius `3k` around `x`.
pub fn f2(window: &RootedTreeWindow, x: usize, k: usize, kernel: &DistanceKernel) -> Result<f64> {
    ClusterEval::new(window, kernel, k)?.ln_f2(x)
}

/// Both Cauchy-Schwarz inequalities at one vertex, with `k = 2l` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditRecord {
    pub f1: f64,
    pub f2: f64,
    pub p_2l: f64,
    pub p_4l: f64,
    pub p_6l: f64,
    /// `f1 p_{4l} - p_{2l}^2`.
    pub slack1: f64,
    /// `f2 p_{6l} - p_{2l}^3`.
    pub slack2: f64,
    pub cluster_size: usize,
}

impl AuditRecord {
    pub fn holds(&self) -> bool {
        self.slack1 >= SLACK_TOL && self.slack2 >= SLACK_TOL
    }
}

/// Evaluate the 2-3 functionals at vertex `x` for step count `2l`. The
/// kernel must cover `6l` steps.
pub fn audit_vertex(window: &RootedTreeWindow, x: usize, l: usize, kernel: &DistanceKernel) -> Result<AuditRecord> {
    let k = 2 * l;
    let mut eval = ClusterEval::new(window, kernel, k)?;
    let ln_f1 = eval.ln_f1(x)?;
    let ln_f2 = eval.ln_f2(x)?;
    let p2 = eval.ln_return(x)?.exp();
    let p4 = cluster_return_prob(window, x, 2 * k, kernel)?.exp();
    let p6 = cluster_return_prob(window, x, 3 * k, kernel)?.exp();
    let (f1, f2) = (ln_f1.exp(), ln_f2.exp());
    Ok(AuditRecord {
        f1,
        f2,
        p_2l: p2,
        p_4l: p4,
        p_6l: p6,
        slack1: f1 * p4 - p2 * p2,
        slack2: f2 * p6 - p2 * p2 * p2,
        cluster_size: window.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoThreeAudit {
    pub params: PercolationParams,
    pub l: usize,
    pub samples: usize,
    pub per_sample: Vec<AuditRecord>,
    pub f1: MeanEstimate,
    pub f2: MeanEstimate,
    pub min_slack1: f64,
    pub min_slack2: f64,
}

impl TwoThreeAudit {
    /// Both means within three standard errors of 1.
    pub fn means_pass(&self) -> bool {
        self.f1.within(1.0, 3.0) && self.f2.within(1.0, 3.0)
    }

    pub fn slacks_pass(&self) -> bool {
        self.min_slack1 >= SLACK_TOL && self.min_slack2 >= SLACK_TOL
    }
}

/// Audit the root of `samples` Bernoulli clusters, sample `i` on stream `i`.
///
/// The window radius is raised to `6l` when smaller, the least that
/// determines every quantity at the root.
pub fn two_three_audit(
    params: &PercolationParams,
    l: usize,
    samples: usize,
    kernel: &DistanceKernel,
) -> Result<TwoThreeAudit> {
    if l == 0 || samples == 0 {
        return Err(crate::error::invalid("need l >= 1 and at least one sample"));
    }
    if kernel.steps() < 6 * l {
        return Err(crate::error::invalid(format!("kernel needs {} steps, has {}", 6 * l, kernel.steps())));
    }
    let base = PercolationParams { window_radius: params.window_radius.max(6 * l), ..*params };
    let per_sample: Vec<AuditRecord> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let w = bernoulli_cluster(&base.with_stream(params.stream + i))?;
            audit_vertex(&w, w.root(), l, kernel)
        })
        .collect::<Result<_>>()?;
    let f1s: Vec<f64> = per_sample.iter().map(|r| r.f1).collect();
    let f2s: Vec<f64> = per_sample.iter().map(|r| r.f2).collect();
    Ok(TwoThreeAudit {
        params: base,
        l,
        samples,
        f1: MeanEstimate::of(&f1s),
        f2: MeanEstimate::of(&f2s),
        min_slack1: per_sample.iter().map(|r| r.slack1).fold(f64::INFINITY, f64::min),
        min_slack2: per_sample.iter().map(|r| r.slack2).fold(f64::INFINITY, f64::min),
        per_sample,
    })
}

/// Monte Carlo check that `E[f1] = E[f2] = 1`.
pub fn mtp_expectation_audit(
    params: &PercolationParams,
    l: usize,
    samples: usize,
    kernel: &DistanceKernel,
) -> Result<TwoThreeAudit> {
    two_three_audit(params, l, samples, kernel)
}

/// One factor of a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateTerm {
    /// 1 or 2, for `f1` or `f2`.
    pub functional: u8,
    pub steps: usize,
    pub power: u64,
    pub ln_value: f64,
}

/// `p_{2l}^{2^p 3^q} <= C_{p,q} p_{2^{p+1} 3^q l}` at one vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub l: usize,
    pub p: u32,
    pub q: u32,
    pub ln_c: f64,
    pub ln_p_base: f64,
    pub ln_p_target: f64,
    /// `2^{p+1} 3^q l`.
    pub target_steps: usize,
    pub terms: Vec<CertificateTerm>,
    /// `ln C + ln p_target - 2^p 3^q ln p_base`, nonnegative up to rounding.
    pub log_slack: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.log_slack >= -CHAIN_TOL
    }

    pub fn exponent(&self) -> u64 {
        2u64.pow(self.p) * 3u64.pow(self.q)
    }
}

/// Build `ln C_{p,q}(x, 2l)` from `f1` at `2^{i+1} l` steps (`i < p`) and
/// `f2` at `2^{p+1} 3^j l` steps (`j < q`), and check the chain.
pub fn c_pq(
    window: &RootedTreeWindow,
    x: usize,
    l: usize,
    p: u32,
    q: u32,
    kernel: &DistanceKernel,
) -> Result<Certificate> {
    if l == 0 {
        return Err(crate::error::invalid("l must be at least 1"));
    }
    let mut terms = Vec::new();
    for i in 0..p {
        let steps = 2usize.pow(i + 1) * l;
        terms.push(CertificateTerm {
            functional: 1,
            steps,
            power: 2u64.pow(p - 1 - i) * 3u64.pow(q),
            ln_value: f1(window, x, steps, kernel)?,
        });
    }
    for j in 0..q {
        let steps = 2usize.pow(p + 1) * 3usize.pow(j) * l;
        terms.push(CertificateTerm {
            functional: 2,
            steps,
            power: 3u64.pow(q - 1 - j),
            ln_value: f2(window, x, steps, kernel)?,
        });
    }
    let ln_c: f64 = terms.iter().map(|t| t.power as f64 * t.ln_value).sum();
    let target_steps = 2usize.pow(p) * 3usize.pow(q) * 2 * l;
    let ln_p_base = cluster_return_prob(window, x, 2 * l, kernel)?;
    let ln_p_target = cluster_return_prob(window, x, target_steps, kernel)?;
    let k = (2u64.pow(p) * 3u64.pow(q)) as f64;
    let log_slack = ln_c + ln_p_target - k * ln_p_base;
    Ok(Certificate { l, p, q, ln_c, ln_p_base, ln_p_target, target_steps, terms, log_slack })
}

/// Smallest `l0 <= l_max` with `f1(x, 2l) <= l^2` and `f2(x, 2l) <= l^2` for
/// every `l` in `l0..=l_max`; `None` if the bound fails at `l_max`.
pub fn l0_diagnostic(
    window: &RootedTreeWindow,
    x: usize,
    l_max: usize,
    kernel: &DistanceKernel,
) -> Result<Option<usize>> {
    let mut l0 = None;
    for l in (1..=l_max).rev() {
        // f <= l^2, with room for rounding when f is 1 in exact arithmetic
        let bound = 2.0 * (l as f64).ln() + 1e-12;
        let ok = f1(window, x, 2 * l, kernel)? <= bound && f2(window, x, 2 * l, kernel)? <= bound;
        if !ok {
            break;
        }
        l0 = Some(l);
    }
    Ok(l0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Ratio,
    Grid23,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "ratio" => Ok(Self::Ratio),
            "grid23" => Ok(Self::Grid23),
            other => Err(crate::error::invalid(format!("unknown method `{other}` (direct, ratio, grid23)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub log_rho_lazy: f64,
    pub method: Method,
    /// `(n, estimate)` pairs the value was read from.
    pub diagnostics: Vec<(usize, f64)>,
    /// Max minus min of the diagnostics the estimate aggregates.
    pub tail_spread: f64,
    pub certificate: Option<Vec<Certificate>>,
}

impl ExponentEstimate {
    pub fn rho_lazy(&self) -> f64 {
        self.log_rho_lazy.exp()
    }
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    max - min
}

/// Exponent of `p_{2n}` read from a return series.
///
/// * `direct`: `ln p_{2n} / 2n` at the last even index.
/// * `ratio`: `(ln p_{2n} - ln p_{2n-2}) / 2` averaged over the last
///   `ceil(N/8)` even indices, which cancels polynomial prefactors.
/// * `grid23`: the best lower bound `ln p_{2l} / 2l` over the series, valid
///   when the certificate constant is 1, as on vertex-transitive sources.
///   Use [`grid23_from_certificates`] otherwise.
pub fn exponent_estimate(series: &ReturnSeries, method: Method) -> Result<ExponentEstimate> {
    let lp = &series.log_p;
    if lp.len() < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort { len: lp.len(), min: MIN_SERIES_LEN });
    }
    let last_even = (lp.len() - 1) & !1;
    let evens = (1..=last_even / 2).map(|m| 2 * m);
    Ok(match method {
        Method::Direct => {
            let diagnostics: Vec<(usize, f64)> = evens.map(|n| (n, lp[n] / n as f64)).collect();
            let tail = diagnostics.len().div_ceil(8);
            let tail_spread = spread(diagnostics[diagnostics.len() - tail..].iter().map(|p| p.1));
            let (_, value) = *diagnostics.last().expect("series has even indices");
            ExponentEstimate { log_rho_lazy: value.min(0.0), method, diagnostics, tail_spread, certificate: None }
        }
        Method::Ratio => {
            let diagnostics: Vec<(usize, f64)> = evens.map(|n| (n, 0.5 * (lp[n] - lp[n - 2]))).collect();
            let tail = (lp.len() - 1).div_ceil(8).min(diagnostics.len());
            let window = &diagnostics[diagnostics.len() - tail..];
            let mean = window.iter().map(|p| p.1).sum::<f64>() / tail as f64;
            let tail_spread = spread(window.iter().map(|p| p.1));
            ExponentEstimate { log_rho_lazy: mean.min(0.0), method, diagnostics, tail_spread, certificate: None }
        }
        Method::Grid23 => {
            let diagnostics: Vec<(usize, f64)> = evens.map(|n| (n, lp[n] / n as f64)).collect();
            let best = diagnostics.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let tail = diagnostics.len().div_ceil(8);
            let tail_spread = spread(diagnostics[diagnostics.len() - tail..].iter().map(|p| p.1));
            ExponentEstimate { log_rho_lazy: best.min(0.0), method, diagnostics, tail_spread, certificate: None }
        }
    })
}

/// `grid23` lower bound from explicit certificates: each one gives
/// `ln p_m / m >= (2^p 3^q ln p_{2l} - ln C) / m` at `m = 2^{p+1} 3^q l`.
pub fn grid23_from_certificates(certs: Vec<Certificate>) -> Result<ExponentEstimate> {
    if certs.is_empty() {
        return Err(Error::SeriesTooShort { len: 0, min: 1 });
    }
    let diagnostics: Vec<(usize, f64)> = certs
        .iter()
        .map(|c| (c.target_steps, (c.exponent() as f64 * c.ln_p_base - c.ln_c) / c.target_steps as f64))
        .collect();
    let best = diagnostics.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let tail_spread = spread(diagnostics.iter().map(|p| p.1));
    Ok(ExponentEstimate {
        log_rho_lazy: best.min(0.0),
        method: Method::Grid23,
        diagnostics,
        tail_spread,
        certificate: Some(certs),
    })
}

/// Finite-`n` view of the cone convergence argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeDiagnostic {
    /// Tail min and max of `alpha_n / n`.
    pub liminf_estimate: f64,
    pub limsup_estimate: f64,
    /// `l_n = max_{r <= n} (F(r/n) - alpha_r / n)` for `n = 1..=N`.
    pub ell: Vec<f64>,
    pub tail_spread: f64,
    /// Max minus min of `l_n` over the tail.
    pub ell_drift: f64,
    pub converged: bool,
}

/// Default convergence tolerance for [`cone_diagnostic`].
pub const CONE_TOL: f64 = 5e-3;

/// Check `|alpha_{n+1} - alpha_n| <= lipschitz`, then summarise `alpha_n / n`
/// and `l_n` over the last `ceil(N/4)` indices. Convergence is flagged when
/// both vary by less than `tol` there; this is a diagnostic, not a proof.
pub fn cone_diagnostic(
    alpha: &[f64],
    f: impl Fn(f64) -> f64 + Sync,
    lipschitz: f64,
    tol: f64,
) -> Result<ConeDiagnostic> {
    if alpha.len() < 3 {
        return Err(Error::SeriesTooShort { len: alpha.len(), min: 3 });
    }
    for i in 0..alpha.len() - 1 {
        let step = (alpha[i + 1] - alpha[i]).abs();
        if !(step <= lipschitz * (1.0 + 1e-12) + 1e-12) {
            return Err(Error::Lipschitz { index: i, step, bound: lipschitz });
        }
    }
    let big_n = alpha.len() - 1;
    let f_grid = |n: usize| -> f64 {
        let nf = n as f64;
        (0..=n).map(|r| f(r as f64 / nf) - alpha[r] / nf).fold(f64::NEG_INFINITY, f64::max)
    };
    let ell: Vec<f64> = (1..=big_n).into_par_iter().map(f_grid).collect();
    let tail = big_n.div_ceil(4);
    let ratios: Vec<f64> = (big_n + 1 - tail..=big_n).map(|n| alpha[n] / n as f64).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ell_drift = spread(ell[ell.len() - tail..].iter().copied());
    Ok(ConeDiagnostic {
        liminf_estimate: lo,
        limsup_estimate: hi,
        tail_spread: hi - lo,
        ell_drift,
        converged: hi - lo < tol && ell_drift < tol,
        ell,
    })
}
