use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};

/// Finite radius-`horizon` window of a possibly infinite rooted tree.
///
/// Vertices are stored densely; `labels` keeps the external ids used by the
/// interchange format. Every vertex strictly inside the horizon has its full
/// neighbour set stored. A horizon vertex is either `alive` (the tree
/// continues past it) or a genuine leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTreeWindow {
    d: usize,
    root: usize,
    horizon: usize,
    labels: Vec<u64>,
    adjacency: Vec<Vec<usize>>,
    alive: Vec<bool>,
    depth: Vec<usize>,
}

impl RootedTreeWindow {
    /// Build a window from labelled edges, rejecting duplicate edges, cycles,
    /// disconnected input and every violated window invariant.
    pub fn from_edges(d: usize, root: u64, horizon: usize, edges: &[(u64, u64)], alive: &[u64]) -> Result<Self> {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut labels = Vec::new();
        let mut intern = |label: u64, labels: &mut Vec<u64>| {
            *index.entry(label).or_insert_with(|| {
                labels.push(label);
                labels.len() - 1
            })
        };
        let root_idx = intern(root, &mut labels);
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new()];
        let mut seen = HashSet::new();
        let mut dsu = DisjointSets::default();
        dsu.grow(1);
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidTree(format!("self loop at {a}")));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(Error::InvalidTree(format!("duplicate edge {a} {b}")));
            }
            let ia = intern(a, &mut labels);
            let ib = intern(b, &mut labels);
            adjacency.resize(labels.len(), Vec::new());
            dsu.grow(labels.len());
            if !dsu.union(ia, ib) {
                return Err(Error::InvalidTree(format!("edge {a} {b} closes a cycle")));
            }
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        let mut alive_flags = vec![false; labels.len()];
        for &a in alive {
            match index.get(&a) {
                Some(&i) => alive_flags[i] = true,
                None => return Err(Error::InvalidTree(format!("alive vertex {a} is not in the window"))),
            }
        }
        Self::from_parts(d, root_idx, horizon, labels, adjacency, alive_flags)
    }

    /// Assemble a window from dense parts and check every invariant.
    pub(crate) fn from_parts(
        d: usize,
        root: usize,
        horizon: usize,
        labels: Vec<u64>,
        adjacency: Vec<Vec<usize>>,
        alive: Vec<bool>,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("degree bound d={d} must be at least 2")));
        }
        let n = adjacency.len();
        if labels.len() != n || alive.len() != n || root >= n {
            return Err(Error::InvalidTree("inconsistent window parts".into()));
        }
        let edge_ends: usize = adjacency.iter().map(Vec::len).sum();
        if edge_ends != 2 * (n - 1) {
            return Err(Error::InvalidTree(format!(
                "{} vertices but {} edges; a tree needs exactly {}",
                n,
                edge_ends / 2,
                n - 1
            )));
        }
        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &u in &adjacency[v] {
                if depth[u] == usize::MAX {
                    depth[u] = depth[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        for v in 0..n {
            if depth[v] == usize::MAX {
                return Err(Error::InvalidTree(format!("vertex {} is not connected to the root", labels[v])));
            }
            if adjacency[v].len() > d {
                return Err(Error::DegreeBound { vertex: labels[v], d });
            }
            if depth[v] > horizon {
                return Err(Error::InvalidTree(format!(
                    "vertex {} at distance {} lies beyond horizon {horizon}",
                    labels[v], depth[v]
                )));
            }
            if alive[v] && depth[v] != horizon {
                return Err(Error::InvalidTree(format!(
                    "alive vertex {} is at distance {}, not at the horizon {horizon}",
                    labels[v], depth[v]
                )));
            }
        }
        Ok(Self { d, root, horizon, labels, adjacency, alive, depth })
    }

    /// Single-vertex window with horizon 0.
    pub fn singleton(d: usize) -> Result<Self> {
        Self::from_parts(d, 0, 0, vec![0], vec![Vec::new()], vec![false])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn label(&self, v: usize) -> u64 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn index_of(&self, label: u64) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn is_alive(&self, v: usize) -> bool {
        self.alive[v]
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Distance from the root.
    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    /// Edges as `(parent, child)` index pairs, child one level deeper.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |v| {
            self.adjacency[v].iter().copied().filter(move |&u| self.depth[u] == self.depth[v] + 1).map(move |u| (v, u))
        })
    }

    /// Children of `v` in the rooted orientation.
    pub fn children(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let dv = self.depth[v];
        self.adjacency[v].iter().copied().filter(move |&u| self.depth[u] == dv + 1)
    }

    /// All vertices within `radius` of `center`, with their distances, in BFS
    /// order.
    ///
    /// Fails when the ball is not fully determined by the window, i.e. the
    /// search would have to expand an alive vertex closer than `radius`.
    /// Non-alive horizon vertices are genuine leaves and never cause failure.
    pub fn ball(&self, center: usize, radius: usize) -> Result<Vec<(usize, usize)>> {
        let mut out = vec![(center, 0)];
        // BFS parent per entry; in a tree that is all the visited state needed
        let mut parents = vec![usize::MAX];
        let mut head = 0;
        while head < out.len() {
            let (v, dist) = out[head];
            let parent = parents[head];
            head += 1;
            if dist == radius {
                continue;
            }
            if self.alive[v] {
                return Err(Error::InsufficientRadius { vertex: self.labels[center], depth: radius });
            }
            for &u in &self.adjacency[v] {
                if u != parent {
                    out.push((u, dist + 1));
                    parents.push(v);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Default)]
struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn grow(&mut self, n: usize) {
        while self.parent.len() < n {
            let i = self.parent.len();
            self.parent.push(i);
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Incremental construction of a window rooted at vertex 0.
#[derive(Debug, Clone)]
pub(crate) struct WindowBuilder {
    adjacency: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl WindowBuilder {
    pub fn new() -> Self {
        Self { adjacency: vec![Vec::new()], depth: vec![0] }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn add_child(&mut self, parent: usize) -> usize {
        let v = self.adjacency.len();
        self.adjacency.push(vec![parent]);
        self.adjacency[parent].push(v);
        self.depth.push(self.depth[parent] + 1);
        v
    }

    pub fn finish(self, d: usize, horizon: usize, alive: &[usize]) -> Result<RootedTreeWindow> {
        let n = self.adjacency.len();
        let mut flags = vec![false; n];
        for &a in alive {
            flags[a] = true;
        }
        RootedTreeWindow::from_parts(d, 0, horizon, (0..n as u64).collect(), self.adjacency, flags)
    }
}
