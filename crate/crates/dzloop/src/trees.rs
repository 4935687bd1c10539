//! Stable rooted trees with labelled legs and their exponent assignments.
//!
//! A tree here has a distinguished root vertex and `n` labelled legs. Every
//! vertex other than the root must have index at least three, where the
//! index counts attached legs, edges to children, and the edge toward the
//! root. Positive half-edges are the legs together with the edge halves
//! pointing away from the root; an assignment puts a nonnegative exponent
//! on each positive half, subject to a total budget and a capacity bound
//! at every non-root vertex. Trees and assignments index the summands of
//! the differential operators assembled in [`crate::operators`].

use std::collections::BTreeSet;
use std::fmt;

/// A positive half-edge: either a labelled leg or the root-ward half of
/// the edge above a non-root vertex. The edge half is attached at the
/// parent and points down into the child's subtree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Half {
    /// Leg with 0-based label.
    Leg(usize),
    /// Positive half of the edge joining `Edge(c)` to the parent of `c`.
    Edge(usize),
}

/// A stable rooted tree with labelled legs.
///
/// Vertices are numbered `0..vertex_count()` with the root at `0`, and
/// every non-root vertex has a parent with a smaller number. Instances
/// normally come from [`enumerate_trees`], which yields one representative
/// per isomorphism class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    parent: Vec<usize>,
    leg_at: Vec<usize>,
    children: Vec<Vec<usize>>,
    legs: Vec<Vec<usize>>,
    plus: Vec<Half>,
    plus_at: Vec<Vec<usize>>,
    half_at: Vec<usize>,
    dl: Vec<Vec<usize>>,
    dh: Vec<Vec<usize>>,
}

impl RootedTree {
    /// Builds a tree from its parent list (entry `i` is the parent of
    /// vertex `i + 1`) and the vertex carrying each leg.
    ///
    /// Panics if a parent is not smaller than its child, a leg sits on a
    /// missing vertex, or a non-root vertex has index below three.
    pub fn new(parent: Vec<usize>, leg_at: Vec<usize>) -> Self {
        let vcount = parent.len() + 1;
        let n = leg_at.len();
        for (i, &p) in parent.iter().enumerate() {
            assert!(p <= i, "parent of vertex {} must be a smaller vertex", i + 1);
        }
        let mut children = vec![Vec::new(); vcount];
        for (i, &p) in parent.iter().enumerate() {
            children[p].push(i + 1);
        }
        let mut legs = vec![Vec::new(); vcount];
        for (l, &v) in leg_at.iter().enumerate() {
            assert!(v < vcount, "leg {} placed on missing vertex {}", l + 1, v);
            legs[v].push(l);
        }
        for v in 1..vcount {
            assert!(
                legs[v].len() + children[v].len() >= 2,
                "vertex {v} has index below three"
            );
        }

        // Positive halves in a fixed order: legs by label, then edge
        // halves by child vertex. The edge half of child c is plus index
        // n + c - 1 and is attached at c's parent.
        let mut plus: Vec<Half> = (0..n).map(Half::Leg).collect();
        plus.extend((1..vcount).map(Half::Edge));
        let mut half_at = leg_at.clone();
        half_at.extend(parent.iter().copied());
        let mut plus_at = vec![Vec::new(); vcount];
        for (idx, &v) in half_at.iter().enumerate() {
            plus_at[v].push(idx);
        }

        // Subtrees, built leaf-first since parents have smaller numbers.
        let mut subtree: Vec<Vec<usize>> = (0..vcount).map(|v| vec![v]).collect();
        for v in (1..vcount).rev() {
            let sub = subtree[v].clone();
            subtree[parent[v - 1]].extend(sub);
        }
        let mut dl = Vec::with_capacity(plus.len());
        let mut dh = Vec::with_capacity(plus.len());
        for half in &plus {
            match *half {
                Half::Leg(l) => {
                    dl.push(vec![l]);
                    dh.push(Vec::new());
                }
                Half::Edge(c) => {
                    let mut below_legs: Vec<usize> = subtree[c]
                        .iter()
                        .flat_map(|&w| legs[w].iter().copied())
                        .collect();
                    below_legs.sort_unstable();
                    let mut below: Vec<usize> = below_legs.clone();
                    below.extend(subtree[c].iter().filter(|&&w| w != c).map(|&w| n + w - 1));
                    below.sort_unstable();
                    dl.push(below_legs);
                    dh.push(below);
                }
            }
        }

        RootedTree {
            parent,
            leg_at,
            children,
            legs,
            plus,
            plus_at,
            half_at,
            dl,
            dh,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len() + 1
    }

    pub fn edge_count(&self) -> usize {
        self.parent.len()
    }

    pub fn leg_count(&self) -> usize {
        self.leg_at.len()
    }

    /// Parent of a non-root vertex.
    pub fn parent(&self, v: usize) -> usize {
        assert!(v >= 1, "the root has no parent");
        self.parent[v - 1]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Legs attached at `v`, as sorted 0-based labels.
    pub fn legs_at(&self, v: usize) -> &[usize] {
        &self.legs[v]
    }

    /// All positive halves; indices into this slice identify halves in
    /// assignments and the descendant accessors.
    pub fn plus_halves(&self) -> &[Half] {
        &self.plus
    }

    /// Positive halves attached at `v`, as indices into [`Self::plus_halves`].
    pub fn plus_at(&self, v: usize) -> &[usize] {
        &self.plus_at[v]
    }

    /// Vertex at which positive half `idx` is attached.
    pub fn half_vertex(&self, idx: usize) -> usize {
        self.half_at[idx]
    }

    /// Leg labels weakly below the half: a leg is below itself, and an
    /// edge half covers every leg in the child's subtree.
    pub fn descendant_legs(&self, idx: usize) -> &[usize] {
        &self.dl[idx]
    }

    /// Positive halves strictly below the half, as indices into
    /// [`Self::plus_halves`]. A leg has none; an edge half covers every
    /// positive half attached inside the child's subtree.
    pub fn descendant_halves(&self, idx: usize) -> &[usize] {
        &self.dh[idx]
    }

    /// Canonical form under root- and label-preserving isomorphism; equal
    /// signatures mean isomorphic trees.
    pub fn signature(&self) -> String {
        self.sig(0)
    }

    fn sig(&self, v: usize) -> String {
        let mut parts: Vec<String> = self.children[v].iter().map(|&c| self.sig(c)).collect();
        parts.sort();
        let legs: Vec<String> = self.legs[v].iter().map(|l| (l + 1).to_string()).collect();
        format!("({}|{})", legs.join(","), parts.join(""))
    }
}

impl fmt::Display for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<String> = (1..self.vertex_count())
            .map(|v| format!("{}<-{}", v, self.parent(v)))
            .collect();
        let legs: Vec<String> = self
            .leg_at
            .iter()
            .enumerate()
            .map(|(l, &v)| format!("s{}@{}", l + 1, v))
            .collect();
        write!(f, "edges [{}]; legs [{}]", edges.join(" "), legs.join(" "))
    }
}

/// Enumerates the stable rooted trees with `n` labelled legs, one
/// representative per isomorphism class, sorted by edge count and then by
/// canonical signature.
pub fn enumerate_trees(n: usize) -> Vec<RootedTree> {
    assert!((1..=8).contains(&n), "leg count must be in 1..=8");
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    // Each non-root leaf needs two legs and each one-child vertex one leg,
    // so a stable tree has at most n - 1 edges.
    for k in 0..n {
        let mut parent = vec![0usize; k];
        'parents: loop {
            scan_leg_maps(n, k, &parent, &mut seen, &mut out);
            // Advance the parent list in mixed radix; digit i runs 0..=i.
            let mut i = 0;
            loop {
                if i == k {
                    break 'parents;
                }
                if parent[i] < i {
                    parent[i] += 1;
                    for digit in parent.iter_mut().take(i) {
                        *digit = 0;
                    }
                    break;
                }
                i += 1;
            }
        }
    }
    out.sort_by_key(|t| (t.edge_count(), t.signature()));
    out
}

fn scan_leg_maps(
    n: usize,
    k: usize,
    parent: &[usize],
    seen: &mut BTreeSet<String>,
    out: &mut Vec<RootedTree>,
) {
    let mut child_count = vec![0usize; k + 1];
    for &p in parent {
        child_count[p] += 1;
    }
    let mut leg_at = vec![0usize; n];
    loop {
        let mut leg_count = vec![0usize; k + 1];
        for &v in &leg_at {
            leg_count[v] += 1;
        }
        if (1..=k).all(|v| leg_count[v] + child_count[v] >= 2) {
            let t = RootedTree::new(parent.to_vec(), leg_at.clone());
            if seen.insert(t.signature()) {
                out.push(t);
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            if leg_at[i] < k {
                leg_at[i] += 1;
                for digit in leg_at.iter_mut().take(i) {
                    *digit = 0;
                }
                break;
            }
            i += 1;
        }
    }
}

/// Enumerates exponent assignments on the positive halves of `tree`.
///
/// The exponents sum to `chi` minus the edge count, and at every non-root
/// vertex the local sum is bounded by the local half count minus two; the
/// root is unconstrained. Assignments come out in lexicographic order with
/// respect to [`RootedTree::plus_halves`]. An empty result means `chi`
/// cannot be achieved on this tree.
pub fn enumerate_q(tree: &RootedTree, chi: u32) -> Vec<Vec<u32>> {
    let edges = tree.edge_count() as u32;
    if chi < edges {
        return Vec::new();
    }
    let budget = chi - edges;
    // Remaining capacity per vertex; the root absorbs the whole budget.
    let mut cap: Vec<u32> = (0..tree.vertex_count())
        .map(|v| {
            if v == 0 {
                budget
            } else {
                tree.plus_at(v).len() as u32 - 2
            }
        })
        .collect();
    let mut q = vec![0u32; tree.plus_halves().len()];
    let mut out = Vec::new();
    fill_q(tree, 0, budget, &mut cap, &mut q, &mut out);
    out
}

fn fill_q(
    tree: &RootedTree,
    pos: usize,
    rem: u32,
    cap: &mut [u32],
    q: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if pos == q.len() {
        if rem == 0 {
            out.push(q.clone());
        }
        return;
    }
    let v = tree.half_vertex(pos);
    let top = rem.min(cap[v]);
    for val in 0..=top {
        q[pos] = val;
        cap[v] -= val;
        fill_q(tree, pos + 1, rem - val, cap, q, out);
        cap[v] += val;
    }
    q[pos] = 0;
}
