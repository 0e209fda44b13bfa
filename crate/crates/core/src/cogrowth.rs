//! Return exponent as a function of growth, and back.
//!
//! Exponents come in two normalisations. The simple walk's spectral radius
//! `rho_simple` is what the two-branch formula produces; the lazy walk used
//! everywhere else in the crate has `rho_lazy = (1 + rho_simple) / 2`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::optimize::golden_max;
use crate::rate::RateFunction;

const GAMMA_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Supercritical,
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CogrowthResult {
    pub d: usize,
    /// Log-growth `ln gr`.
    pub gamma: f64,
    pub rho_simple: f64,
    pub rho_lazy: f64,
    pub branch: Branch,
    /// `ln(d-1)/2`, where the branches meet.
    pub threshold: f64,
}

fn check_d(d: usize) -> Result<()> {
    if d < 3 {
        return Err(invalid(format!("co-growth needs d >= 3, got {d}")));
    }
    Ok(())
}

fn check_gamma(gamma: f64, d: usize) -> Result<f64> {
    let top = ((d - 1) as f64).ln();
    if !(gamma >= -GAMMA_SLACK && gamma <= top + GAMMA_SLACK) {
        return Err(Error::Domain { value: gamma, domain: "[0, ln(d-1)]" });
    }
    Ok(gamma.clamp(0.0, top))
}

/// Simple-walk exponent of a cluster with log-growth `gamma`:
/// `(e^g + (d-1) e^{-g}) / d` above the threshold, `2 sqrt(d-1)/d` below.
pub fn cogrowth_rho(gamma: f64, d: usize) -> Result<CogrowthResult> {
    check_d(d)?;
    let gamma = check_gamma(gamma, d)?;
    let threshold = 0.5 * ((d - 1) as f64).ln();
    let df = d as f64;
    let (rho_simple, branch) = if gamma >= threshold {
        (((gamma.exp() + (df - 1.0) * (-gamma).exp()) / df).min(1.0), Branch::Supercritical)
    } else {
        (2.0 * (df - 1.0).sqrt() / df, Branch::Subcritical)
    };
    Ok(CogrowthResult { d, gamma, rho_simple, rho_lazy: lazy_from_simple(rho_simple)?, branch, threshold })
}

/// `max_t I(t) + t (gamma - ln(d-1))`, the log lazy exponent of a profile
/// whose normalised sizes decay like `e^{(gamma - ln(d-1)) r}`.
pub fn variational_log_rho_lazy(gamma: f64, d: usize) -> Result<f64> {
    check_d(d)?;
    let gamma = check_gamma(gamma, d)?;
    let rate = RateFunction::new(d)?;
    let slope = gamma - ((d - 1) as f64).ln();
    let best = golden_max(|t| rate.rate_i(t).unwrap_or(f64::NEG_INFINITY) + t * slope, 0.0, 1.0, 1e-10);
    Ok(best.value)
}

pub fn lazy_from_simple(rho_simple: f64) -> Result<f64> {
    if !(rho_simple > 0.0 && rho_simple <= 1.0) {
        return Err(Error::Domain { value: rho_simple, domain: "(0, 1]" });
    }
    Ok(0.5 * (1.0 + rho_simple))
}

/// Inverse of [`lazy_from_simple`]. A lazy exponent below 1/2 is impossible
/// since the walk stays put with probability 1/2.
pub fn simple_from_lazy(rho_lazy: f64) -> Result<f64> {
    if !(rho_lazy > 0.5 && rho_lazy <= 1.0) {
        return Err(Error::Domain { value: rho_lazy, domain: "(1/2, 1]" });
    }
    Ok(2.0 * rho_lazy - 1.0)
}

/// Log-growth from a supercritical simple-walk exponent: `ln z` for the
/// larger root of `z^2 - d rho z + (d-1) = 0`.
pub fn invert_cogrowth(rho_simple: f64, d: usize) -> Result<f64> {
    check_d(d)?;
    let df = d as f64;
    let critical = 2.0 * (df - 1.0).sqrt() / df;
    if rho_simple > 1.0 || rho_simple.is_nan() {
        return Err(Error::Domain { value: rho_simple, domain: "(2 sqrt(d-1)/d, 1]" });
    }
    if rho_simple <= critical {
        return Err(Error::Subcritical { threshold: critical });
    }
    let disc = (df * df * rho_simple * rho_simple - 4.0 * (df - 1.0)).max(0.0);
    let z = 0.5 * (df * rho_simple + disc.sqrt());
    Ok(z.ln().min((df - 1.0).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_values() {
        let full = cogrowth_rho(3f64.ln(), 4).unwrap();
        assert!((full.rho_simple - 1.0).abs() < 1e-15 && full.rho_lazy == 1.0);
        let sub = cogrowth_rho(0.0, 4).unwrap();
        assert!((sub.rho_simple - 0.866_025_403_784_438_6).abs() < 1e-15);
        assert_eq!(sub.branch, Branch::Subcritical);
        let sup = cogrowth_rho(2f64.ln(), 4).unwrap();
        assert!((sup.rho_simple - 0.875).abs() < 1e-15);
        assert!((sup.rho_lazy - 0.9375).abs() < 1e-15);
        assert_eq!(sup.branch, Branch::Supercritical);
        assert!(cogrowth_rho(2.0, 4).is_err());
        assert!(cogrowth_rho(-0.1, 4).is_err());
    }

    #[test]
    fn continuous_at_threshold() {
        for d in [3, 4, 6] {
            let th = 0.5 * ((d - 1) as f64).ln();
            let lo = cogrowth_rho(th - 1e-9, d).unwrap().rho_simple;
            let hi = cogrowth_rho(th + 1e-9, d).unwrap().rho_simple;
            assert!((lo - hi).abs() < 1e-8);
        }
    }

    #[test]
    fn variational_matches_closed_form() {
        assert!(variational_log_rho_lazy(3f64.ln(), 4).unwrap().abs() < 1e-12);
        let sub = variational_log_rho_lazy(0.0, 4).unwrap();
        assert!((sub - (0.5 + 3f64.sqrt() / 4.0).ln()).abs() < 1e-12);
        for d in [3, 4, 6] {
            let top = ((d - 1) as f64).ln();
            for k in 0..=10 {
                let g = top * k as f64 / 10.0;
                let closed = cogrowth_rho(g, d).unwrap().rho_lazy.ln();
                let var = variational_log_rho_lazy(g, d).unwrap();
                assert!((closed - var).abs() < 1e-6, "d={d} g={g}: {closed} vs {var}");
            }
        }
    }

    #[test]
    fn conversions() {
        assert_eq!(lazy_from_simple(1.0).unwrap(), 1.0);
        assert_eq!(simple_from_lazy(1.0).unwrap(), 1.0);
        assert!((lazy_from_simple(0.875).unwrap() - 0.9375).abs() < 1e-15);
        assert!(simple_from_lazy(0.4).is_err());
        assert!(lazy_from_simple(0.0).is_err());
    }

    #[test]
    fn inversion_round_trips() {
        assert!((invert_cogrowth(1.0, 4).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!((invert_cogrowth(0.875, 4).unwrap() - 2f64.ln()).abs() < 1e-10);
        assert!(matches!(invert_cogrowth(0.866_025_403_784_438_6, 4), Err(Error::Subcritical { .. })));
        for d in [3, 4, 6] {
            let top = ((d - 1) as f64).ln();
            for k in 1..=20 {
                let g = 0.5 * top + 0.5 * top * k as f64 / 20.0;
                let back = invert_cogrowth(cogrowth_rho(g, d).unwrap().rho_simple, d).unwrap();
                assert!((back - g).abs() < 1e-10, "d={d} g={g} back={back}");
            }
        }
    }
}
