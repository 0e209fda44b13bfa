//! Large-deviation rate function of the lazy walk on `T_d`.
//!
//! `phi(t)` is the exponential decay rate of `P(X_n = x)` for a fixed vertex
//! at distance `tn`, and `I(t) = phi(t) + t ln(d-1)` the rate of the whole
//! sphere. Both come in closed form through the minimiser `x(t)` of
//! `t ln F(x) - ln x` on `(0, r]`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::logspace::log_sum_exp_iter;
use crate::optimize::{golden_max, golden_min, Extremum};
use crate::walk::DistanceKernel;

/// Bracket tolerance for the golden-section searches.
const SEARCH_TOL: f64 = 1e-12;
const RADICAND_CLAMP: f64 = -1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFunction {
    d: usize,
    r_const: f64,
    s_const: f64,
}

impl RateFunction {
    pub fn new(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(invalid(format!("rate function needs d >= 3, got {d}")));
        }
        let c = ((d - 1) as f64).sqrt() / d as f64;
        Ok(Self { d, r_const: 1.0 / (0.5 + c), s_const: 1.0 / (0.5 - c) })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `r = (1/2 + sqrt(d-1)/d)^{-1}`, also `x(0)`.
    pub fn r_const(&self) -> f64 {
        self.r_const
    }

    /// `s = (1/2 - sqrt(d-1)/d)^{-1}`.
    pub fn s_const(&self) -> f64 {
        self.s_const
    }

    fn ln_branch(&self) -> f64 {
        ((self.d - 1) as f64).ln()
    }

    fn radicand(&self, x: f64) -> f64 {
        let v = (1.0 - x / self.r_const) * (1.0 - x / self.s_const);
        if (RADICAND_CLAMP..0.0).contains(&v) {
            0.0
        } else {
            v
        }
    }

    /// `F(x) = d/((d-1)x) ((1 - x/2) - sqrt((1-x/r)(1-x/s)))` on `(0, r]`.
    ///
    /// Evaluated as `x / (d ((1 - x/2) + sqrt(...)))`, which is the same
    /// quantity without the cancellation near `x = 0`.
    pub fn big_f(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= self.r_const) {
            return Err(Error::Domain { value: x, domain: "(0, r]" });
        }
        Ok(self.f_unchecked(x))
    }

    fn f_unchecked(&self, x: f64) -> f64 {
        x / (self.d as f64 * ((1.0 - 0.5 * x) + self.radicand(x).sqrt()))
    }

    fn check_t(t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain { value: t, domain: "[0, 1]" });
        }
        Ok(())
    }

    /// `psi(t) = sqrt(d^2 t^2 + 4(d-1)(1-t^2))`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(self.psi_unchecked(t))
    }

    fn psi_unchecked(&self, t: f64) -> f64 {
        let d = self.d as f64;
        (d * d * t * t + 4.0 * (d - 1.0) * (1.0 - t * t)).sqrt()
    }

    /// `x(t) = 2d/(d-2)^2 (d - psi(t))`, computed as `2d(1-t^2)/(d + psi(t))`.
    pub fn x_of_t(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(self.x_unchecked(t))
    }

    fn x_unchecked(&self, t: f64) -> f64 {
        let d = self.d as f64;
        2.0 * d * (1.0 - t * t) / (d + self.psi_unchecked(t))
    }

    /// Closed form `phi(t) = t ln F(x(t)) - ln x(t)`, with the limits
    /// `-ln r` and `-ln(2d)` at the endpoints.
    pub fn phi(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(if t == 0.0 {
            -self.r_const.ln()
        } else if t == 1.0 {
            -(2.0 * self.d as f64).ln()
        } else {
            let x = self.x_unchecked(t);
            t * self.f_unchecked(x).ln() - x.ln()
        })
    }

    /// `phi(t)` by direct minimisation of `t ln F(x) - ln x` over `ln x`.
    pub fn phi_grid(&self, t: f64) -> Result<Extremum> {
        Self::check_t(t)?;
        let hi = self.r_const.ln();
        let lo = hi + (1e-16f64).ln();
        let m = golden_min(|u| t * self.f_unchecked(u.exp()).ln() - u, lo, hi, SEARCH_TOL);
        Ok(Extremum { x: m.x.exp(), ..m })
    }

    /// `d/dx (t ln F(x) - ln x)`, zero at `x(t)`.
    pub fn objective_slope(&self, t: f64, x: f64) -> Result<f64> {
        self.big_f(x)?;
        let (r, s) = (self.r_const, self.s_const);
        let root = self.radicand(x).sqrt();
        let d_root = if root > 0.0 { -((1.0 - x / s) / r + (1.0 - x / r) / s) / (2.0 * root) } else { f64::NAN };
        let d_ln_f = 1.0 / x - (-0.5 + d_root) / ((1.0 - 0.5 * x) + root);
        Ok(t * d_ln_f - 1.0 / x)
    }

    /// `I(t) = phi(t) + t ln(d-1)`.
    pub fn rate_i(&self, t: f64) -> Result<f64> {
        Ok(self.phi(t)? + t * self.ln_branch())
    }

    /// Right derivative of `I` at 0, `ln(d-1)/2`.
    pub fn i_prime_at_zero(&self) -> f64 {
        0.5 * self.ln_branch()
    }

    /// Central difference of `I` at `t` with half-width `t/10`.
    pub fn i_prime_numeric(&self, t: f64) -> Result<f64> {
        let h = t / 10.0;
        Ok((self.rate_i(t + h)? - self.rate_i(t - h)?) / (2.0 * h))
    }

    /// `phi''(t) = x'(t) / (t x(t)) = -2d / (psi(t) x(t))` on `(0, 1)`.
    pub fn phi_second(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain { value: t, domain: "(0, 1)" });
        }
        Ok(-2.0 * self.d as f64 / (self.psi_unchecked(t) * self.x_unchecked(t)))
    }

    /// Maximum of the concave `I` on `[a, b]`.
    pub fn max_rate(&self, a: f64, b: f64) -> Result<Extremum> {
        Self::check_t(a)?;
        Self::check_t(b)?;
        if a > b {
            return Err(invalid(format!("empty interval [{a}, {b}]")));
        }
        Ok(golden_max(|t| self.rate_i(t).unwrap_or(f64::NEG_INFINITY), a, b, SEARCH_TOL))
    }
}

/// Kernel tail mass against the rate function on one interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LdpCheck {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    /// `(1/n) ln P(an <= dist(X_n, o) <= bn)` from the kernel.
    pub empirical: f64,
    pub max_rate: f64,
    pub argmax: f64,
    pub gap: f64,
}

pub fn ldp_check(kernel: &DistanceKernel, a: f64, b: f64, n: usize) -> Result<LdpCheck> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(invalid(format!("need 0 <= a < b <= 1, got [{a}, {b}]")));
    }
    if n == 0 || n > kernel.steps() {
        return Err(invalid(format!("n={n} must lie in 1..={}", kernel.steps())));
    }
    let rate = RateFunction::new(kernel.d())?;
    let nf = n as f64;
    // integer radii inside [an, bn], guarding against a*n landing just off an integer
    let lo = (a * nf - 1e-9).ceil().max(0.0) as usize;
    let hi = ((b * nf + 1e-9).floor() as usize).min(n);
    let mass = log_sum_exp_iter(kernel.row(n)[lo..=hi].iter().copied());
    let empirical = mass / nf;
    let best = rate.max_rate(a, b)?;
    Ok(LdpCheck { n, a, b, empirical, max_rate: best.value, argmax: best.x, gap: (empirical - best.value).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::build_kernel;

    fn rate(d: usize) -> RateFunction {
        RateFunction::new(d).unwrap()
    }

    #[test]
    fn constants() {
        let f = rate(4);
        assert!(1.0 < f.r_const() && f.r_const() < 2.0 && 2.0 < f.s_const());
        assert!((f.x_of_t(0.0).unwrap() - f.r_const()).abs() < 1e-15);
        assert!((f.r_const() - 1.071_796_769_724_491).abs() < 1e-12);
        assert_eq!(f.x_of_t(1.0).unwrap(), 0.0);
        assert!((f.psi(0.5).unwrap() - 3.605_551_275_463_989).abs() < 1e-12);
        assert!(RateFunction::new(2).is_err());
    }

    #[test]
    fn f_values() {
        let f = rate(4);
        assert!((f.big_f(f.r_const()).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((f.big_f(0.788_897_4).unwrap() - 0.178_394_56).abs() < 1e-7);
        assert!(f.big_f(0.0).is_err());
        assert!(f.big_f(1.2).is_err());
        // the textbook form agrees away from the cancellation
        let (r, s) = (f.r_const(), f.s_const());
        for x in [0.1, 0.5, 1.0] {
            let naive = 4.0 / (3.0 * x) * ((1.0 - x / 2.0) - ((1.0 - x / r) * (1.0 - x / s)).sqrt());
            assert!((f.big_f(x).unwrap() - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_values() {
        let f = rate(4);
        assert!((f.phi(0.0).unwrap() - (0.5 + 3f64.sqrt() / 4.0).ln()).abs() < 1e-15);
        assert!((f.phi(1.0).unwrap() + 8f64.ln()).abs() < 1e-15);
        assert!((f.phi(0.5).unwrap() + 0.624_759_76).abs() < 1e-7);
        let g = f.phi_grid(0.5).unwrap();
        assert!((g.x - 0.788_897_47).abs() < 1e-6);
        assert!((f.rate_i(1.0).unwrap() - (3.0f64 / 8.0).ln()).abs() < 1e-15);
        // closed form approaches the endpoint limits
        assert!((f.phi(1.0 - 1e-12).unwrap() - f.phi(1.0).unwrap()).abs() < 1e-9);
        assert!((f.phi(1e-12).unwrap() - f.phi(0.0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn closed_form_matches_search() {
        for d in [3, 4, 6] {
            let f = rate(d);
            for k in 1..100 {
                let t = k as f64 / 100.0;
                let gap = (f.phi(t).unwrap() - f.phi_grid(t).unwrap().value).abs();
                assert!(gap < 1e-8, "d={d} t={t} gap={gap}");
            }
        }
    }

    #[test]
    fn first_order_condition() {
        for d in [3, 4, 6] {
            let f = rate(d);
            for k in 1..10 {
                let t = k as f64 / 10.0;
                let x = f.x_of_t(t).unwrap();
                assert!(f.objective_slope(t, x).unwrap().abs() < 1e-8, "d={d} t={t}");
            }
        }
    }

    #[test]
    fn derivatives_and_concavity() {
        for d in [3, 4, 6] {
            let f = rate(d);
            assert!((f.i_prime_numeric(1e-5).unwrap() - f.i_prime_at_zero()).abs() < 1e-3);
            assert!(f.phi_second(0.5).unwrap() < 0.0);
            let h = 0.01;
            for k in 1..99 {
                let t = k as f64 * h;
                let second = f.rate_i(t + h).unwrap() - 2.0 * f.rate_i(t).unwrap() + f.rate_i(t - h).unwrap();
                assert!(second < 0.0);
            }
            // analytic second derivative against finite differences
            let t = 0.3;
            let fd = (f.phi(t + 1e-4).unwrap() - 2.0 * f.phi(t).unwrap() + f.phi(t - 1e-4).unwrap()) / 1e-8;
            assert!((fd - f.phi_second(t).unwrap()).abs() < 1e-4 * fd.abs());
        }
        assert!(rate(4).phi_second(0.0).is_err());
    }

    #[test]
    fn supremum_is_zero_at_the_speed() {
        let kernel = build_kernel(4, 2000).unwrap();
        let speed = kernel.mean_distance(2000) - kernel.mean_distance(1999);
        for d in [3, 4, 6] {
            let f = rate(d);
            let best = f.max_rate(0.0, 1.0).unwrap();
            assert!(best.value.abs() < 1e-8, "d={d}: {}", best.value);
            assert!(f.rate_i(0.0).unwrap() < 0.0 && f.rate_i(1.0).unwrap() < 0.0);
            if d == 4 {
                assert!((best.x - speed).abs() < 1e-6, "{} vs {speed}", best.x);
            }
        }
    }

    #[test]
    fn ldp_interval() {
        let kernel = build_kernel(4, 400).unwrap();
        let c = ldp_check(&kernel, 0.3, 0.5, 400).unwrap();
        assert!(c.gap <= 0.03, "{c:?}");
        let full = ldp_check(&kernel, 0.0, 1.0, 400).unwrap();
        assert!(full.empirical.abs() < 1e-14);
        assert!(ldp_check(&kernel, 0.5, 0.3, 400).is_err());
    }
}
