use serde::Serialize;

use super::window::RootedTreeWindow;
use crate::error::{invalid, Result};
use crate::logspace::{ln_count, log_add_exp};

/// Slack for comparisons between log counts built from floating arithmetic.
const LOG_SLACK: f64 = 1e-9;

/// Sphere sizes `s_r = |S(o, r)|`, stored as natural logs so that regular
/// profiles can run to thousands of levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereProfile {
    d: usize,
    ln_spheres: Vec<f64>,
    leafless: bool,
    exhausted: bool,
}

impl SphereProfile {
    /// Checked constructor from log sphere sizes.
    ///
    /// `exhausted` declares that the tree is finite and every vertex has been
    /// counted, so all spheres past the last stored one are empty.
    pub fn from_ln(d: usize, ln_spheres: Vec<f64>, leafless: bool, exhausted: bool) -> Result<Self> {
        let p = Self::from_raw(d, ln_spheres, leafless, exhausted);
        p.validate()?;
        Ok(p)
    }

    /// Checked constructor from exact counts.
    pub fn from_counts(d: usize, counts: &[u64], leafless: bool, exhausted: bool) -> Result<Self> {
        Self::from_ln(d, counts.iter().map(|&c| ln_count(c)).collect(), leafless, exhausted)
    }

    /// Unchecked constructor for externally supplied data; call
    /// [`SphereProfile::validate`] before trusting it.
    pub fn from_raw(d: usize, ln_spheres: Vec<f64>, leafless: bool, exhausted: bool) -> Self {
        Self { d, ln_spheres, leafless, exhausted }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d < 2 {
            return Err(invalid(format!("degree bound d={d} must be at least 2")));
        }
        let s = &self.ln_spheres;
        if s.is_empty() {
            return Err(invalid("empty sphere profile"));
        }
        if s[0].abs() > LOG_SLACK {
            return Err(invalid(format!("s_0 must be 1, got {}", s[0].exp())));
        }
        if s.len() > 1 && s[1] > (d as f64).ln() + LOG_SLACK {
            return Err(invalid(format!("s_1 = {} exceeds d = {d}", s[1].exp())));
        }
        let ln_branch = ((d - 1) as f64).ln();
        for r in 1..s.len().saturating_sub(1) {
            if s[r + 1] > s[r] + ln_branch + LOG_SLACK {
                return Err(invalid(format!("s_{} exceeds (d-1) s_{}", r + 1, r)));
            }
        }
        if self.leafless {
            for r in 0..s.len() - 1 {
                if s[r + 1] < s[r] - LOG_SLACK {
                    return Err(invalid(format!("leafless profile decreases at r={r}")));
                }
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Largest radius stored.
    pub fn horizon(&self) -> usize {
        self.ln_spheres.len() - 1
    }

    pub fn ln_spheres(&self) -> &[f64] {
        &self.ln_spheres
    }

    pub fn leafless(&self) -> bool {
        self.leafless
    }

    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    /// Sphere sizes as floats (may overflow to infinity for deep regular profiles).
    pub fn counts(&self) -> Vec<f64> {
        self.ln_spheres.iter().map(|v| v.exp()).collect()
    }

    /// Exact integer sizes, when all of them are below 2^53.
    pub fn counts_u64(&self) -> Option<Vec<u64>> {
        self.ln_spheres
            .iter()
            .map(|&v| {
                let c = v.exp().round();
                (c < 9.007_199_254_740_992e15).then_some(c as u64)
            })
            .collect()
    }

    /// Copy truncated to `horizon` levels.
    pub fn truncated(&self, horizon: usize) -> Self {
        let keep = (horizon + 1).min(self.ln_spheres.len());
        Self {
            ln_spheres: self.ln_spheres[..keep].to_vec(),
            exhausted: self.exhausted && keep == self.ln_spheres.len(),
            ..self.clone()
        }
    }
}

/// `a_0 = 1`, `a_r = s_r / (d (d-1)^{r-1})`: the fraction of the ambient
/// sphere of `T_d` that the tree occupies, in log form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedProfile {
    d: usize,
    ln_a: Vec<f64>,
    leafless_source: bool,
    exhausted: bool,
}

impl NormalizedProfile {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ln_a(&self) -> &[f64] {
        &self.ln_a
    }

    pub fn horizon(&self) -> usize {
        self.ln_a.len() - 1
    }

    pub fn leafless_source(&self) -> bool {
        self.leafless_source
    }

    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    /// `ln a_r`, extended by `-inf` past the horizon of an exhausted profile.
    pub fn ln_a_at(&self, r: usize) -> Option<f64> {
        match self.ln_a.get(r) {
            Some(&v) => Some(v),
            None if self.exhausted => Some(f64::NEG_INFINITY),
            None => None,
        }
    }
}

/// Log size of the ambient sphere `|S_{T_d}(o, r)| = d (d-1)^{r-1}`.
pub fn ln_ambient_sphere(d: usize, r: usize) -> f64 {
    if r == 0 {
        0.0
    } else {
        (d as f64).ln() + (r - 1) as f64 * ((d - 1) as f64).ln()
    }
}

/// Finite-horizon growth statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthEstimate {
    /// `|B(o,n)|^{1/n}` for `n = 1..=N`.
    pub ball_root: Vec<f64>,
    /// `(|B(o,n)| / |B(o, n/2)|)^{1/(n - n/2)}` for `n = 1..=N`; the
    /// subexponential prefactor of `|B(o,n)|` cancels in this ratio.
    pub half_ratio: Vec<f64>,
    pub lower_estimate: f64,
    pub upper_estimate: f64,
    pub horizon: usize,
}

/// Count vertices per distance from the root.
pub fn sphere_sizes(window: &RootedTreeWindow) -> SphereProfile {
    let mut counts = vec![0u64; window.horizon() + 1];
    for v in 0..window.len() {
        counts[window.depth(v)] += 1;
    }
    let horizon = window.horizon();
    let root = window.root();
    // horizon vertices have truncated degrees, so they are never inspected
    let leafless = horizon == 0
        || (window.degree(root) >= 1
            && (0..window.len()).all(|v| v == root || window.depth(v) >= horizon || window.degree(v) >= 2));
    SphereProfile {
        d: window.d(),
        ln_spheres: counts.iter().map(|&c| ln_count(c)).collect(),
        leafless,
        exhausted: window.alive_count() == 0,
    }
}

pub fn normalize(profile: &SphereProfile) -> Result<NormalizedProfile> {
    let s = &profile.ln_spheres;
    if s.is_empty() || s[0] != 0.0 {
        return Err(invalid(format!("normalization needs s_0 = 1, got {}", s.first().map_or(0.0, |v| v.exp()))));
    }
    let d = profile.d;
    let ln_a =
        s.iter().enumerate().map(|(r, &ln_s)| if r == 0 { 0.0 } else { ln_s - ln_ambient_sphere(d, r) }).collect();
    Ok(NormalizedProfile { d, ln_a, leafless_source: profile.leafless, exhausted: profile.exhausted })
}

/// Growth statistics over the last `ceil(N/4)` radii.
///
/// The full `|B(o,n)|^{1/n}` sequence is reported as is, but its tail still
/// carries the polynomial prefactor of the ball size (the line gives
/// `(2n+1)^{1/n}`, about 1.10 at n = 60). The estimates are therefore read
/// from the half-ball ratio, which has the same limit, and clamped to
/// `[1, d-1]` where every growth lies.
pub fn growth_estimates(profile: &SphereProfile) -> Result<GrowthEstimate> {
    if profile.ln_spheres.is_empty() {
        return Err(invalid("empty profile"));
    }
    let horizon = profile.horizon();
    if horizon < 2 {
        return Err(invalid(format!("growth estimates need a horizon of at least 2, got {horizon}")));
    }
    let mut ln_ball = Vec::with_capacity(horizon + 1);
    let mut acc = f64::NEG_INFINITY;
    for &ln_s in &profile.ln_spheres {
        acc = log_add_exp(acc, ln_s);
        ln_ball.push(acc);
    }
    let ball_root: Vec<f64> = (1..=horizon).map(|n| (ln_ball[n] / n as f64).exp()).collect();
    let half_ratio: Vec<f64> = (1..=horizon)
        .map(|n| {
            let h = n / 2;
            ((ln_ball[n] - ln_ball[h]) / (n - h) as f64).exp()
        })
        .collect();
    let tail = horizon.div_ceil(4);
    let window = &half_ratio[horizon - tail..];
    let cap = (profile.d - 1) as f64;
    let clamp = |v: f64| v.clamp(1.0, cap.max(1.0));
    let lower = clamp(window.iter().copied().fold(f64::INFINITY, f64::min));
    let upper = clamp(window.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    Ok(GrowthEstimate { ball_root, half_ratio, lower_estimate: lower, upper_estimate: upper, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_window(radius: u64, alive_ends: bool) -> RootedTreeWindow {
        let edges: Vec<(u64, u64)> = (0..2 * radius).map(|i| (i, i + 1)).collect();
        let alive = if alive_ends { vec![0, 2 * radius] } else { vec![] };
        RootedTreeWindow::from_edges(4, radius, radius as usize, &edges, &alive).unwrap()
    }

    fn full_window(d: usize, radius: usize) -> RootedTreeWindow {
        let mut b = super::super::window::WindowBuilder::new();
        let mut frontier = vec![0];
        for depth in 0..radius {
            let mut next = Vec::new();
            for &v in &frontier {
                let kids = if depth == 0 { d } else { d - 1 };
                for _ in 0..kids {
                    next.push(b.add_child(v));
                }
            }
            frontier = next;
        }
        b.finish(d, radius, &frontier).unwrap()
    }

    #[test]
    fn sphere_sizes_examples() {
        let single = RootedTreeWindow::singleton(4).unwrap();
        assert_eq!(sphere_sizes(&single).counts_u64().unwrap(), vec![1]);
        let line = sphere_sizes(&line_window(3, true));
        assert_eq!(line.counts_u64().unwrap(), vec![1, 2, 2, 2]);
        assert!(line.leafless());
        let full = sphere_sizes(&full_window(4, 2));
        assert_eq!(full.counts_u64().unwrap(), vec![1, 4, 12]);
        full.validate().unwrap();
    }

    #[test]
    fn leaf_inside_horizon_is_detected() {
        // root 0 with a path 0-1-2-3 and a pendant leaf 4 on vertex 1
        let w = RootedTreeWindow::from_edges(4, 0, 3, &[(0, 1), (1, 2), (2, 3), (1, 4)], &[3]).unwrap();
        assert!(!sphere_sizes(&w).leafless());
        let ok = RootedTreeWindow::from_edges(4, 0, 3, &[(0, 1), (1, 2), (2, 3)], &[3]).unwrap();
        // a degree-1 root is allowed
        assert!(sphere_sizes(&ok).leafless());
    }

    #[test]
    fn normalize_examples() {
        let full = SphereProfile::from_counts(4, &[1, 4, 12, 36], true, false).unwrap();
        for v in normalize(&full).unwrap().ln_a() {
            assert!(v.abs() < 1e-15);
        }
        let line = SphereProfile::from_counts(4, &[1, 2, 2, 2], true, false).unwrap();
        let a: Vec<f64> = normalize(&line).unwrap().ln_a().iter().map(|v| v.exp()).collect();
        for (got, want) in a.iter().zip([1.0, 0.5, 1.0 / 6.0, 1.0 / 18.0]) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        let sub = SphereProfile::from_counts(4, &[1, 3, 6, 12], true, false).unwrap();
        let a2 = normalize(&sub).unwrap().ln_a()[2].exp();
        assert!((a2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalize_rejects_bad_root_sphere() {
        let raw = SphereProfile::from_raw(4, vec![2f64.ln(), 0.0], false, false);
        assert!(raw.validate().is_err());
        assert!(normalize(&raw).is_err());
    }

    #[test]
    fn profile_invariants_enforced() {
        assert!(SphereProfile::from_counts(4, &[1, 5], false, false).is_err());
        assert!(SphereProfile::from_counts(4, &[1, 2, 7], false, false).is_err());
        assert!(SphereProfile::from_counts(4, &[1, 2, 1], true, false).is_err());
        assert!(SphereProfile::from_counts(4, &[1, 2, 1], false, false).is_ok());
    }

    #[test]
    fn growth_of_full_tree_and_line() {
        let mut counts = vec![1u64];
        for r in 1..=40u32 {
            counts.push(4 * 3u64.pow(r - 1));
        }
        let full = SphereProfile::from_counts(4, &counts, true, false).unwrap();
        let g = growth_estimates(&full).unwrap();
        assert!((g.upper_estimate - 3.0).abs() < 0.02, "{g:?}");
        assert!(g.lower_estimate <= g.upper_estimate);
        assert_eq!(g.ball_root.len(), 40);

        let mut prev = f64::INFINITY;
        for n in [60usize, 240, 960] {
            let mut c = vec![1u64];
            c.extend(std::iter::repeat_n(2, n));
            let g = growth_estimates(&SphereProfile::from_counts(4, &c, true, false).unwrap()).unwrap();
            assert!(g.upper_estimate < prev);
            assert!(g.lower_estimate >= 1.0);
            prev = g.upper_estimate;
        }
        assert!(prev < 1.005);
    }

    #[test]
    fn growth_rejects_short_profiles() {
        let p = SphereProfile::from_counts(4, &[1, 2], true, false).unwrap();
        assert!(growth_estimates(&p).is_err());
    }
}
