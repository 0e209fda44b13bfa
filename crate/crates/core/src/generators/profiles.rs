use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::logspace::log_sum_exp;
use crate::rng::stream_rng;
use crate::tree::{header_fields, SphereProfile};

fn check_horizon(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("profile horizon must be at least 1"));
    }
    Ok(())
}

/// Spheres of a `k`-regular tree seen from any vertex, normalised against
/// the ambient degree `ambient_d`.
fn regular_like(k: usize, ambient_d: usize, n: usize) -> Result<SphereProfile> {
    check_horizon(n)?;
    let ln_k = (k as f64).ln();
    let ln_branch = ((k - 1) as f64).ln();
    let ln = (0..=n).map(|r| if r == 0 { 0.0 } else { ln_k + (r - 1) as f64 * ln_branch }).collect();
    SphereProfile::from_ln(ambient_d, ln, true, false)
}

/// `T_d` itself: `s_r = d (d-1)^{r-1}`.
pub fn regular_profile(d: usize, n: usize) -> Result<SphereProfile> {
    if d < 2 {
        return Err(invalid(format!("d={d} must be at least 2")));
    }
    regular_like(d, d, n)
}

/// A `d_prime`-regular subtree embedded in `T_d`.
pub fn subtree_profile(d_prime: usize, ambient_d: usize, n: usize) -> Result<SphereProfile> {
    if d_prime < 2 || d_prime > ambient_d {
        return Err(invalid(format!("need 2 <= d'={d_prime} <= d={ambient_d}")));
    }
    regular_like(d_prime, ambient_d, n)
}

/// The bi-infinite line inside `T_d`.
pub fn line_profile(d: usize, n: usize) -> Result<SphereProfile> {
    subtree_profile(2, d, n)
}

/// The one-vertex cluster. Finite, so it extends to any horizon.
pub fn singleton_profile(d: usize) -> Result<SphereProfile> {
    SphereProfile::from_ln(d, vec![0.0], true, true)
}

/// Exact spheres of the canopy tree seen from a vertex at `root_level`.
///
/// A level-`k` vertex has one parent at level `k+1` and, when `k >= 1`,
/// `d-1` children at level `k-1`. A vertex at distance `n` is reached by
/// climbing `j` levels and then descending `n-j` levels through a sibling
/// branch, which exists only when `n - j <= root_level + j`.
pub fn canopy_profile(d: usize, root_level: usize, n: usize) -> Result<SphereProfile> {
    if d <= 2 {
        return Err(invalid(format!("canopy tree needs d >= 3, got {d}")));
    }
    check_horizon(n)?;
    let ln_b = ((d - 1) as f64).ln();
    let ln_side = ((d - 2) as f64).ln();
    let mut ln = Vec::with_capacity(n + 1);
    let mut terms = Vec::new();
    for dist in 0..=n {
        terms.clear();
        if dist <= root_level {
            terms.push(dist as f64 * ln_b);
        }
        for up in 1..=dist {
            let down = dist - up;
            if down == 0 {
                terms.push(0.0);
            } else if down <= root_level + up {
                terms.push(ln_side + (down - 1) as f64 * ln_b);
            }
        }
        ln.push(log_sum_exp(&terms));
    }
    SphereProfile::from_ln(d, ln, false, false)
}

/// Draw a canopy root level from the stationary law
/// `P(k) = (d-2)/(d-1)^{k+1}`, i.e. `P(K >= k) = (d-1)^{-k}`.
pub fn canopy_root_level_sampler(d: usize, seed: u64) -> Result<usize> {
    if d <= 2 {
        return Err(invalid(format!("canopy tree needs d >= 3, got {d}")));
    }
    let mut rng = stream_rng(seed, 0);
    Ok(sample_canopy_level(d, &mut rng))
}

pub(crate) fn sample_canopy_level<R: Rng>(d: usize, rng: &mut R) -> usize {
    let u: f64 = 1.0 - rng.gen::<f64>();
    (-u.ln() / ((d - 1) as f64).ln()).floor() as usize
}

/// Counts of non-backtracking continuations between vertex types.
///
/// A vertex of state `i` has `transitions[i][j]` children of state `j`; the
/// root has `start[j]` neighbours of state `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferAutomaton {
    ambient_d: usize,
    start: Vec<u64>,
    transitions: Vec<Vec<u64>>,
}

impl TransferAutomaton {
    pub fn new(ambient_d: usize, start: Vec<u64>, transitions: Vec<Vec<u64>>) -> Result<Self> {
        let n = start.len();
        if n == 0 {
            return Err(invalid("automaton needs at least one state"));
        }
        if transitions.len() != n || transitions.iter().any(|row| row.len() != n) {
            return Err(invalid(format!("transition matrix must be {n}x{n}")));
        }
        if start.iter().sum::<u64>() > ambient_d as u64 {
            return Err(invalid(format!("start vector sums above d={ambient_d}")));
        }
        for (i, row) in transitions.iter().enumerate() {
            if row.iter().sum::<u64>() + 1 > ambient_d as u64 {
                return Err(invalid(format!("row {i} sums above d-1={}", ambient_d - 1)));
            }
        }
        Ok(Self { ambient_d, start, transitions })
    }

    pub fn state_count(&self) -> usize {
        self.start.len()
    }

    pub fn ambient_d(&self) -> usize {
        self.ambient_d
    }

    /// States reachable from the start vector.
    fn reachable(&self) -> Vec<bool> {
        let n = self.state_count();
        let mut seen: Vec<bool> = self.start.iter().map(|&s| s > 0).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if self.transitions[i][j] > 0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }

    /// Parse the text format:
    ///
    /// ```text
    /// automaton states=2 d=4
    /// start 1 0
    /// 0 1
    /// 3 0
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line, msg: String| Error::Parse { line, msg };
        let (hno, header) = lines.next().ok_or_else(|| perr(1, "empty input".into()))?;
        let mut toks = header.split_whitespace();
        if toks.next() != Some("automaton") {
            return Err(perr(hno, "header must start with `automaton`".into()));
        }
        let h = header_fields(hno, toks, &["states", "d"])?;
        let n = h[0] as usize;
        let ints = |no: usize, toks: std::str::SplitWhitespace<'_>| -> Result<Vec<u64>> {
            let v = toks
                .map(|t| t.parse::<u64>().map_err(|_| perr(no, format!("`{t}` is not a nonnegative integer"))))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != n {
                return Err(perr(no, format!("expected {n} entries, found {}", v.len())));
            }
            Ok(v)
        };
        let (sno, sline) = lines.next().ok_or_else(|| perr(hno + 1, "missing start line".into()))?;
        let mut st = sline.split_whitespace();
        if st.next() != Some("start") {
            return Err(perr(sno, "expected `start` line".into()));
        }
        let start = ints(sno, st)?;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let (no, line) = lines.next().ok_or_else(|| perr(sno + rows.len() + 1, "missing matrix row".into()))?;
            rows.push(ints(no, line.split_whitespace())?);
        }
        if let Some((no, _)) = lines.next() {
            return Err(perr(no, "unexpected trailing line".into()));
        }
        Self::new(h[1] as usize, start, rows)
    }
}

/// `s_0 = 1`, `s_r = |start M^{r-1}|_1`.
///
/// The state vector is rescaled by exact powers of two, so counts stay exact
/// while they fit in 53 bits.
pub fn automaton_profile(aut: &TransferAutomaton, n: usize) -> Result<SphereProfile> {
    check_horizon(n)?;
    let k = aut.state_count();
    let mut v: Vec<f64> = aut.start.iter().map(|&s| s as f64).collect();
    let mut scale = 0i64; // v is stored divided by 2^scale
    let mut ln = vec![0.0];
    for r in 1..=n {
        if r > 1 {
            let mut next = vec![0.0; k];
            for i in 0..k {
                if v[i] != 0.0 {
                    for j in 0..k {
                        next[j] += v[i] * aut.transitions[i][j] as f64;
                    }
                }
            }
            v = next;
        }
        let total: f64 = v.iter().sum();
        if total > 2f64.powi(200) {
            let e = total.log2().floor() as i32;
            for x in &mut v {
                *x /= 2f64.powi(e);
            }
            scale += i64::from(e);
        }
        let total: f64 = v.iter().sum();
        ln.push(if total == 0.0 { f64::NEG_INFINITY } else { total.ln() + scale as f64 * std::f64::consts::LN_2 });
    }
    let reach = aut.reachable();
    let leafless = aut.start.iter().sum::<u64>() >= 1
        && (0..k).filter(|&i| reach[i]).all(|i| aut.transitions[i].iter().sum::<u64>() >= 1);
    SphereProfile::from_ln(aut.ambient_d, ln, leafless, false)
}

/// Log of the Perron root of the transition matrix on reachable states.
///
/// Iterates `M + I`, which is primitive whenever `M` is irreducible, and
/// stops once the Collatz-Wielandt bounds agree to a relative `1e-12`.
pub fn perron_growth(aut: &TransferAutomaton) -> Result<f64> {
    let reach = aut.reachable();
    let states: Vec<usize> = (0..aut.state_count()).filter(|&i| reach[i]).collect();
    if states.is_empty() {
        return Err(Error::Reducible);
    }
    let m = states.len();
    let sub: Vec<Vec<f64>> =
        states.iter().map(|&i| states.iter().map(|&j| aut.transitions[i][j] as f64).collect()).collect();
    // strong connectivity of the reachable block
    for s in 0..m {
        let mut seen = vec![false; m];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            for j in 0..m {
                if sub[i][j] > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if seen.iter().any(|&x| !x) {
            return Err(Error::Reducible);
        }
    }
    if m == 1 && sub[0][0] == 0.0 {
        return Err(Error::Reducible);
    }
    let mut v = vec![1.0; m];
    for _ in 0..1_000_000 {
        let mut w = v.clone();
        for i in 0..m {
            for j in 0..m {
                w[j] += v[i] * sub[i][j];
            }
        }
        let ratios = w.iter().zip(&v).map(|(a, b)| a / b);
        let lo = ratios.clone().fold(f64::INFINITY, f64::min);
        let hi = ratios.fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = w.iter().sum();
        v = w.iter().map(|x| x / norm).collect();
        if hi - lo <= 1e-12 * (hi - 1.0).max(f64::MIN_POSITIVE) {
            return Ok((0.5 * (lo + hi) - 1.0).ln());
        }
    }
    Err(Error::Reducible)
}
