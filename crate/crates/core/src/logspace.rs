//! Log-domain arithmetic.
//!
//! Return probabilities decay geometrically and leave the range of `f64`
//! after a few thousand steps, so every probability in the crate is carried
//! as a natural log. `NEG_INFINITY` stands for probability zero.

/// `ln(e^a + e^b)` without overflow or underflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum(exp(x)))` by max extraction. Empty or all-zero input gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    log_sum_exp_iter(values.iter().copied())
}

/// Same as [`log_sum_exp`] for any re-iterable source.
pub fn log_sum_exp_iter<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = iter.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Natural log of a nonnegative count, `-inf` for zero.
#[inline]
pub fn ln_count(count: u64) -> f64 {
    if count == 0 {
        f64::NEG_INFINITY
    } else {
        (count as f64).ln()
    }
}
