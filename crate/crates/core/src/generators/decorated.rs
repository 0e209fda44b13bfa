use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;
use crate::stats::MeanEstimate;
use crate::tree::{decorations, spine, RootedTreeWindow};

/// A finite forest hung from one line vertex.
///
/// `parents[i]` is `None` when vertex `i` attaches to the anchor, otherwise
/// an earlier vertex of the shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecorationShape {
    parents: Vec<Option<usize>>,
}

impl DecorationShape {
    pub fn new(parents: Vec<Option<usize>>) -> Result<Self> {
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                if p >= i {
                    return Err(invalid(format!("shape vertex {i} must hang from an earlier vertex, got {p}")));
                }
            }
        }
        Ok(Self { parents })
    }

    pub fn empty() -> Self {
        Self { parents: Vec::new() }
    }

    pub fn leaf() -> Self {
        Self { parents: vec![None] }
    }

    /// A pendant path with `len` vertices.
    pub fn path(len: usize) -> Self {
        Self { parents: (0..len).map(|i| i.checked_sub(1)).collect() }
    }

    pub fn size(&self) -> usize {
        self.parents.len()
    }

    fn depths(&self) -> Vec<usize> {
        let mut depth = Vec::with_capacity(self.parents.len());
        for p in &self.parents {
            depth.push(p.map_or(1, |p| depth[p] + 1));
        }
        depth
    }

    /// Largest distance from the anchor.
    pub fn depth(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    fn check_degrees(&self, d: usize) -> Result<()> {
        let mut deg = vec![1usize; self.parents.len()];
        let mut at_anchor = 0;
        for p in &self.parents {
            match p {
                Some(p) => deg[*p] += 1,
                None => at_anchor += 1,
            }
        }
        if at_anchor + 2 > d {
            return Err(Error::DegreeBound { vertex: 0, d });
        }
        if let Some(i) = deg.iter().position(|&x| x > d) {
            return Err(Error::DegreeBound { vertex: i as u64 + 1, d });
        }
        Ok(())
    }
}

/// Finite distribution over decoration shapes.
#[derive(Debug, Clone)]
pub struct DecorationLaw {
    d: usize,
    shapes: Vec<(DecorationShape, f64)>,
}

impl DecorationLaw {
    pub fn new(d: usize, shapes: Vec<(DecorationShape, f64)>) -> Result<Self> {
        if d < 3 {
            return Err(invalid("decorated lines need d >= 3"));
        }
        if shapes.is_empty() {
            return Err(invalid("decoration law has no shapes"));
        }
        let mut total = 0.0;
        for (shape, prob) in &shapes {
            if !(0.0..=1.0).contains(prob) {
                return Err(invalid(format!("shape probability {prob} outside [0, 1]")));
            }
            shape.check_degrees(d)?;
            total += prob;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("shape probabilities sum to {total}, not 1")));
        }
        Ok(Self { d, shapes })
    }

    /// Every line vertex bare.
    pub fn none(d: usize) -> Result<Self> {
        Self::new(d, vec![(DecorationShape::empty(), 1.0)])
    }

    /// A single pendant leaf with probability `prob`.
    pub fn pendant_leaf(d: usize, prob: f64) -> Result<Self> {
        Self::new(d, vec![(DecorationShape::leaf(), prob), (DecorationShape::empty(), 1.0 - prob)])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shapes(&self) -> &[(DecorationShape, f64)] {
        &self.shapes
    }

    pub fn max_depth(&self) -> usize {
        self.shapes.iter().map(|(s, _)| s.depth()).max().unwrap_or(0)
    }

    /// `E[w] = 1 + E[size]`.
    pub fn mean_weight(&self) -> f64 {
        1.0 + self.shapes.iter().map(|(s, p)| p * s.size() as f64).sum::<f64>()
    }

    fn draw<R: Rng>(&self, rng: &mut R, size_biased: bool) -> usize {
        let weight = |i: usize| {
            let (s, p) = &self.shapes[i];
            if size_biased {
                p * (1 + s.size()) as f64
            } else {
                *p
            }
        };
        let total: f64 = (0..self.shapes.len()).map(weight).sum();
        let mut u = rng.gen::<f64>() * total;
        for i in 0..self.shapes.len() {
            u -= weight(i);
            if u < 0.0 {
                return i;
            }
        }
        self.shapes.len() - 1
    }
}

/// Where the root of a decorated line sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rooting {
    /// At the centre line vertex, decorations drawn from the law as is.
    Center,
    /// Unimodular re-rooting: the centre block `{anchor} ∪ decoration` is
    /// size-biased by `w` and the root is uniform inside it.
    Uniform,
}

/// A bi-infinite line window with i.i.d. finite decorations.
///
/// The line runs over positions `-half_length..=half_length` with both ends
/// alive. Every position draws a shape, but a shape is attached only when it
/// fits inside the window (`|i| + depth <= half_length`), so no decoration is
/// ever cut by the horizon. Line vertex `i` carries label `i + half_length`.
pub fn line_with_decorations(
    law: &DecorationLaw,
    half_length: usize,
    seed: u64,
    stream: u64,
    rooting: Rooting,
) -> Result<RootedTreeWindow> {
    let max_depth = law.max_depth();
    if half_length == 0 || half_length < 2 * max_depth {
        return Err(invalid(format!(
            "half length {half_length} must be positive and at least twice the deepest shape ({max_depth})"
        )));
    }
    let mut rng = stream_rng(seed, stream);
    let l = half_length as i64;
    let line_label = |i: i64| (i + l) as u64;
    let mut next_label = 2 * half_length as u64 + 1;
    let mut edges: Vec<(u64, u64)> = (-l..l).map(|i| (line_label(i), line_label(i + 1))).collect();
    let mut root = line_label(0);
    let mut root_depth = 0;
    for i in -l..=l {
        let biased = i == 0 && rooting == Rooting::Uniform;
        let shape = &law.shapes[law.draw(&mut rng, biased)].0;
        let pick = if biased { Some(rng.gen_range(0..=shape.size())) } else { None };
        if (i.unsigned_abs() as usize) + shape.depth() > half_length {
            continue;
        }
        let base = next_label;
        for (k, p) in shape.parents.iter().enumerate() {
            let parent = p.map_or(line_label(i), |p| base + p as u64);
            edges.push((parent, base + k as u64));
        }
        if let Some(j) = pick.filter(|&j| j > 0) {
            root = base + (j - 1) as u64;
            root_depth = shape.depths()[j - 1];
        }
        next_label += shape.size() as u64;
    }
    let horizon = half_length + root_depth;
    RootedTreeWindow::from_edges(law.d, root, horizon, &edges, &[line_label(-l), line_label(l)])
}

/// Whether the spine of a centre-rooted decorated line is exactly the line.
pub fn spine_is_line(window: &RootedTreeWindow, half_length: usize) -> bool {
    let sp = spine(window);
    let Some(w) = sp.window else { return false };
    let mut labels = w.labels().to_vec();
    labels.sort_unstable();
    sp.root_distance == Some(0) && labels.iter().copied().eq(0..=2 * half_length as u64)
}

/// Unimodularity check on decorated lines: `P(o in spine) E[w(o')] <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecorationAudit {
    /// Indicator that a uniformly re-rooted sample has its root on the spine.
    pub on_spine: MeanEstimate,
    /// `w` at the root of centre-rooted samples.
    pub weight: MeanEstimate,
    pub product: f64,
    /// Delta-method standard error of the product.
    pub se: f64,
    /// `E[w]` of the law, for reference.
    pub exact_weight: f64,
}

impl DecorationAudit {
    pub fn passes(&self) -> bool {
        self.product <= 1.0 + 3.0 * self.se
    }
}

/// Estimate both factors from `samples` windows each. Re-rooted samples use
/// streams `0..samples`, centre-rooted ones `samples..2*samples`.
pub fn decoration_mtp_audit(
    law: &DecorationLaw,
    half_length: usize,
    samples: usize,
    seed: u64,
) -> Result<DecorationAudit> {
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let n = samples as u64;
    let on_spine: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let w = line_with_decorations(law, half_length, seed, i, Rooting::Uniform)?;
            Ok(if spine(&w).root_distance == Some(0) { 1.0 } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = (n..2 * n)
        .into_par_iter()
        .map(|i| {
            let w = line_with_decorations(law, half_length, seed, i, Rooting::Center)?;
            Ok(decorations(&w)?.weight(w.root()) as f64)
        })
        .collect::<Result<_>>()?;
    let on_spine = MeanEstimate::of(&on_spine);
    let weight = MeanEstimate::of(&weights);
    let product = on_spine.mean * weight.mean;
    let se = ((weight.mean * on_spine.se).powi(2) + (on_spine.mean * weight.se).powi(2)).sqrt();
    Ok(DecorationAudit { on_spine, weight, product, se, exact_weight: law.mean_weight() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_law_gives_plain_line() {
        let w = line_with_decorations(&DecorationLaw::none(4).unwrap(), 10, 1, 0, Rooting::Center).unwrap();
        assert_eq!(w.len(), 21);
        assert_eq!(w.alive_count(), 2);
        assert_eq!(spine(&w).len(), 21);
    }

    #[test]
    fn pendant_leaves_leave_the_line_as_spine() {
        let law = DecorationLaw::pendant_leaf(4, 0.5).unwrap();
        for stream in 0..50 {
            let w = line_with_decorations(&law, 10, 9, stream, Rooting::Center).unwrap();
            assert!(spine_is_line(&w, 10));
        }
    }

    #[test]
    fn uniform_rooting_lands_in_decorations() {
        let law =
            DecorationLaw::new(4, vec![(DecorationShape::path(2), 0.5), (DecorationShape::empty(), 0.5)]).unwrap();
        let mut off = 0;
        for stream in 0..200 {
            let w = line_with_decorations(&law, 8, 3, stream, Rooting::Uniform).unwrap();
            let sp = spine(&w);
            let k = sp.root_distance.unwrap();
            assert_eq!(w.horizon(), 8 + k);
            if k > 0 {
                off += 1;
            }
            let dec = decorations(&w).unwrap();
            let total: usize = dec.components.iter().map(|c| c.size).sum();
            assert_eq!(total + sp.len(), w.len());
        }
        // P(root off the spine) = (0.5 * 2) / E[w] = 1/2
        assert!((60..140).contains(&off), "{off}");
    }

    #[test]
    fn mass_transport_balance() {
        let law = DecorationLaw::new(
            4,
            vec![(DecorationShape::empty(), 0.5), (DecorationShape::leaf(), 0.3), (DecorationShape::path(2), 0.2)],
        )
        .unwrap();
        let a = decoration_mtp_audit(&law, 6, 4000, 11).unwrap();
        assert!((a.exact_weight - 1.7).abs() < 1e-12);
        assert!(a.passes(), "{a:?}");
        assert!((a.product - 1.0).abs() < 4.0 * a.se, "{a:?}");
    }

    #[test]
    fn degree_bound_checked() {
        let three_leaves = DecorationShape::new(vec![None, None, None]).unwrap();
        assert!(DecorationLaw::new(4, vec![(three_leaves.clone(), 1.0)]).is_err());
        assert!(DecorationLaw::new(5, vec![(three_leaves, 1.0)]).is_ok());
        let star = DecorationShape::new(vec![None, Some(0), Some(0), Some(0), Some(0)]).unwrap();
        assert!(DecorationLaw::new(4, vec![(star, 1.0)]).is_err());
        assert!(DecorationShape::new(vec![Some(0)]).is_err());
        assert!(DecorationLaw::new(4, vec![(DecorationShape::leaf(), 0.3)]).is_err());
    }

    #[test]
    fn short_line_rejected() {
        let law = DecorationLaw::new(4, vec![(DecorationShape::path(3), 1.0)]).unwrap();
        assert!(line_with_decorations(&law, 5, 0, 0, Rooting::Center).is_err());
        assert!(line_with_decorations(&law, 6, 0, 0, Rooting::Center).is_ok());
    }
}
