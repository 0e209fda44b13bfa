//! Golden-section search on unimodal functions.
//!
//! Each iteration keeps three of the four probe points and shrinks the
//! bracket by the inverse golden ratio. Only function values are used, so
//! there is no derivative code to keep in sync with the objective.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Result of a one-dimensional search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Minimise a unimodal `f` on `[lo, hi]` until the bracket is narrower than `xtol`.
///
/// Endpoints are compared against the interior optimum at the end, so a
/// monotone function returns the better endpoint exactly.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Extremum {
    assert!(lo <= hi, "empty bracket [{lo}, {hi}]");
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut e = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fe = f(e);
    let mut iterations = 0;
    while (b - a) > xtol && iterations < 500 {
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + INV_PHI * (b - a);
            fe = f(e);
        }
        iterations += 1;
    }
    let mut best =
        if fc <= fe { Extremum { x: c, value: fc, iterations } } else { Extremum { x: e, value: fe, iterations } };
    for x in [lo, hi] {
        let v = f(x);
        if v < best.value {
            best = Extremum { x, value: v, iterations };
        }
    }
    best
}

/// Maximise a unimodal (e.g. concave) `f` on `[lo, hi]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Extremum {
    let m = golden_min(|x| -f(x), lo, hi, xtol);
    Extremum { value: -m.value, ..m }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let m = golden_min(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-12);
        assert!((m.x - 0.3).abs() < 1e-7);
        assert!((m.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn concave_maximum_at_boundary() {
        let m = golden_max(|x| -x, 0.0, 1.0, 1e-12);
        assert_eq!(m.x, 0.0);
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn degenerate_bracket() {
        let m = golden_min(|x| x * x, 2.0, 2.0, 1e-12);
        assert_eq!(m.x, 2.0);
    }
}
