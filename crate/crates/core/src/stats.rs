//! Small Monte Carlo summaries.

use serde::Serialize;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
}

impl MeanEstimate {
    /// Mean and `sd / sqrt(n)` with the unbiased variance; `se = 0` for
    /// fewer than two values.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self { mean, se: 0.0, samples: values.len() };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, se: (var / n).sqrt(), samples: values.len() }
    }

    /// `|mean - target| <= z se`.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.se
    }

    /// `|mean - target| / se`; 0 when both are 0, infinite when only the
    /// error is 0.
    pub fn z_score(&self, target: f64) -> f64 {
        let dev = (self.mean - target).abs();
        if dev == 0.0 {
            0.0
        } else {
            dev / self.se
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_error() {
        let m = MeanEstimate::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(m.within(2.0, 1.0));
        let flat = MeanEstimate::of(&[1.0; 5]);
        assert_eq!((flat.se, flat.z_score(1.0)), (0.0, 0.0));
        assert!(flat.z_score(2.0).is_infinite());
    }
}
