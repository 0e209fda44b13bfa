use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;
use crate::tree::{RootedTreeWindow, WindowBuilder};

/// Bernoulli edge percolation on `T_d`, observed in a ball around the root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercolationParams {
    pub d: usize,
    /// Probability that an edge is open.
    pub p: f64,
    pub window_radius: usize,
    pub seed: u64,
    /// Stream index under `seed`; batch samplers use the sample index.
    #[serde(default)]
    pub stream: u64,
    /// Abort once the cluster window holds this many vertices.
    #[serde(default = "default_cap")]
    pub vertex_cap: usize,
}

fn default_cap() -> usize {
    1 << 22
}

impl PercolationParams {
    pub fn new(d: usize, p: f64, window_radius: usize, seed: u64) -> Self {
        Self { d, p, window_radius, seed, stream: 0, vertex_cap: default_cap() }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_vertex_cap(mut self, cap: usize) -> Self {
        self.vertex_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(invalid(format!("percolation needs d >= 3, got {}", self.d)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid(format!("open probability p={} outside [0, 1]", self.p)));
        }
        Ok(())
    }
}

/// The open cluster of the root, cut at `window_radius`.
///
/// Explored as a branching process: the root tries `d` edges, every other
/// vertex the `d-1` edges away from its parent. Horizon vertices draw their
/// outgoing edges too but keep no children; they are flagged alive when at
/// least one is open. Edge trials happen in BFS order, so the result depends
/// only on `(seed, stream)`.
pub fn bernoulli_cluster(params: &PercolationParams) -> Result<RootedTreeWindow> {
    params.validate()?;
    let PercolationParams { d, p, window_radius, .. } = *params;
    let mut rng = stream_rng(params.seed, params.stream);
    let mut b = WindowBuilder::new();
    let mut alive = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        let trials = if v == 0 { d } else { d - 1 };
        let at_horizon = b.depth(v) == window_radius;
        let mut open = 0;
        for _ in 0..trials {
            if rng.gen::<f64>() < p {
                open += 1;
            }
        }
        if at_horizon {
            if open > 0 {
                alive.push(v);
            }
            continue;
        }
        for _ in 0..open {
            queue.push_back(b.add_child(v));
        }
        if b.len() > params.vertex_cap {
            return Err(Error::VertexCap { cap: params.vertex_cap });
        }
    }
    b.finish(d, window_radius, &alive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::sphere_sizes;

    #[test]
    fn closed_and_open_extremes() {
        let w = bernoulli_cluster(&PercolationParams::new(4, 0.0, 5, 1)).unwrap();
        assert_eq!(w.len(), 1);
        let full = bernoulli_cluster(&PercolationParams::new(4, 1.0, 3, 1)).unwrap();
        assert_eq!(sphere_sizes(&full).counts_u64().unwrap(), vec![1, 4, 12, 36]);
        assert_eq!(full.alive_count(), 36);
    }

    #[test]
    fn reproducible_per_stream() {
        let base = PercolationParams::new(4, 0.35, 10, 42);
        let a = bernoulli_cluster(&base.with_stream(3)).unwrap();
        let b = bernoulli_cluster(&base.with_stream(3)).unwrap();
        assert_eq!(a, b);
        let sizes: Vec<usize> = (0..20).map(|s| bernoulli_cluster(&base.with_stream(s)).unwrap().len()).collect();
        assert!(sizes.iter().any(|&s| s != sizes[0]));
    }

    #[test]
    fn vertex_cap_reports_truncation() {
        let params = PercolationParams::new(4, 1.0, 12, 0).with_vertex_cap(1000);
        assert!(matches!(bernoulli_cluster(&params), Err(Error::VertexCap { cap: 1000 })));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(bernoulli_cluster(&PercolationParams::new(4, 1.5, 3, 0)).is_err());
        assert!(bernoulli_cluster(&PercolationParams::new(2, 0.5, 3, 0)).is_err());
    }
}
