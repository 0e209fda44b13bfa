//! Independent oracles for the walk kernel.

use crate::error::{invalid, Result};

/// Exact distance law of the lazy walk by enumerating every step sequence on
/// the tree itself.
///
/// Vertices of `T_d` are reduced words over `d` involutions: moving along
/// label `c` pops `c` if it ends the word and pushes it otherwise. A path
/// with `m` moves out of `n` steps has probability `2^{-n} d^{-m}`, so the
/// enumeration only counts paths per `(m, final distance)` in integers and
/// converts once at the end. Cost is `(d+1)^n`.
pub fn brute_force_distance(d: usize, n: usize) -> Result<Vec<f64>> {
    if !(2..=8).contains(&d) || n > 10 {
        return Err(invalid(format!("brute force limited to d in 2..=8 and n <= 10, got d={d}, n={n}")));
    }
    let mut counts = vec![vec![0u64; n + 1]; n + 1];
    let mut word = Vec::with_capacity(n);
    enumerate(d, n, 0, &mut word, &mut counts);
    let mut law = vec![0.0; n + 1];
    for (moves, by_dist) in counts.iter().enumerate() {
        let weight = 0.5f64.powi(n as i32) / (d as f64).powi(moves as i32);
        for (r, &c) in by_dist.iter().enumerate() {
            law[r] += c as f64 * weight;
        }
    }
    Ok(law)
}

fn enumerate(d: usize, left: usize, moves: usize, word: &mut Vec<usize>, counts: &mut [Vec<u64>]) {
    if left == 0 {
        counts[moves][word.len()] += 1;
        return;
    }
    enumerate(d, left - 1, moves, word, counts);
    for c in 0..d {
        if word.last() == Some(&c) {
            word.pop();
            enumerate(d, left - 1, moves + 1, word, counts);
            word.push(c);
        } else {
            word.push(c);
            enumerate(d, left - 1, moves + 1, word, counts);
            word.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_steps_in_t4() {
        let q = brute_force_distance(4, 2).unwrap();
        assert_eq!(q, vec![5.0 / 16.0, 0.5, 3.0 / 16.0]);
    }

    #[test]
    fn rows_sum_to_one() {
        for n in 0..=6 {
            let total: f64 = brute_force_distance(3, n).unwrap().iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
        }
    }
}
