use std::collections::VecDeque;

use super::window::RootedTreeWindow;
use crate::error::{Error, Result};

/// Spine of a window: the subtree spanned by edges with alive vertices on
/// both sides.
#[derive(Debug, Clone)]
pub struct Spine {
    /// The spine as its own window, rooted at the spine vertex nearest to the
    /// original root. `None` when no edge is strong.
    pub window: Option<RootedTreeWindow>,
    /// Distance from the original root to the spine.
    pub root_distance: Option<usize>,
    /// Membership flags indexed by vertex of the input window.
    pub members: Vec<bool>,
}

impl Spine {
    pub fn is_empty(&self) -> bool {
        self.window.is_none()
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }
}

/// Number of alive vertices in the subtree below each vertex.
fn alive_below(window: &RootedTreeWindow) -> Vec<usize> {
    let mut order: Vec<usize> = (0..window.len()).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(window.depth(v)));
    let mut below = vec![0usize; window.len()];
    for v in order {
        below[v] += usize::from(window.is_alive(v));
        let dv = window.depth(v);
        if let Some(&p) = window.neighbors(v).iter().find(|&&u| window.depth(u) + 1 == dv) {
            below[p] += below[v];
        }
    }
    below
}

/// Whether the edge `(parent, child)` is weak: one side of it holds no alive
/// vertex, hence is entirely inside the window and finite.
pub fn is_weak(window: &RootedTreeWindow, parent: usize, child: usize) -> bool {
    debug_assert_eq!(window.depth(child), window.depth(parent) + 1);
    let below = alive_below(window);
    let total = below[window.root()];
    below[child] == 0 || below[child] == total
}

/// Remove weak edges and keep the strong subtree.
///
/// An edge is weak iff one of its sides carries no alive vertex. Strong edges
/// always form a single connected subtree whose leaves are alive, so the
/// result is that subtree, or empty when every edge is weak (finite or
/// one-ended windows).
pub fn spine(window: &RootedTreeWindow) -> Spine {
    let below = alive_below(window);
    let total = below[window.root()];
    let mut members = vec![false; window.len()];
    for (p, c) in window.edges() {
        if below[c] > 0 && below[c] < total {
            members[p] = true;
            members[c] = true;
        }
    }
    let Some(top) = (0..window.len()).filter(|&v| members[v]).min_by_key(|&v| window.depth(v)) else {
        return Spine { window: None, root_distance: None, members };
    };
    let k = window.depth(top);

    let mut index = vec![usize::MAX; window.len()];
    let mut labels = Vec::new();
    let mut order = VecDeque::from([top]);
    index[top] = 0;
    labels.push(window.label(top));
    let mut seq = vec![top];
    while let Some(v) = order.pop_front() {
        for &u in window.neighbors(v) {
            if members[u] && index[u] == usize::MAX {
                index[u] = labels.len();
                labels.push(window.label(u));
                seq.push(u);
                order.push_back(u);
            }
        }
    }
    let adjacency =
        seq.iter().map(|&v| window.neighbors(v).iter().filter(|&&u| members[u]).map(|&u| index[u]).collect()).collect();
    let alive = seq.iter().map(|&v| window.is_alive(v)).collect();
    let sub = RootedTreeWindow::from_parts(window.d(), 0, window.horizon() - k, labels, adjacency, alive)
        .expect("the strong subtree of a valid window is a valid window");
    Spine { window: Some(sub), root_distance: Some(k), members }
}

/// One finite tree hanging off the spine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoration {
    /// Spine vertex (index into the input window) the tree is attached to.
    pub anchor: usize,
    pub size: usize,
}

#[derive(Debug, Clone)]
pub struct Decorations {
    pub components: Vec<Decoration>,
    /// `w(v) = 1 + total decoration size at v` for spine vertices, 0 elsewhere.
    pub weights: Vec<usize>,
}

impl Decorations {
    pub fn weight(&self, v: usize) -> usize {
        self.weights[v]
    }
}

/// Split the non-spine vertices into their finite components and attach each
/// one to its unique spine neighbour.
pub fn decorations(window: &RootedTreeWindow) -> Result<Decorations> {
    let sp = spine(window);
    if sp.is_empty() {
        return Err(Error::EmptySpine);
    }
    let members = &sp.members;
    let n = window.len();
    let mut seen = members.clone();
    let mut weights: Vec<usize> = members.iter().map(|&m| usize::from(m)).collect();
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut size = 0;
        let mut anchor = None;
        while let Some(v) = stack.pop() {
            size += 1;
            for &u in window.neighbors(v) {
                if members[u] {
                    anchor = Some(u);
                } else if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        let anchor = anchor.expect("every decoration touches the spine");
        weights[anchor] += size;
        components.push(Decoration { anchor, size });
    }
    components.sort_by_key(|c| (window.label(c.anchor), c.size));
    Ok(Decorations { components, weights })
}
