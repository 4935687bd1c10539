//! Differential operators on the jet space of a Frobenius manifold.
//!
//! Three layers are built on top of the hierarchy flows `D_{β,p}`. First,
//! the operators `O_{β,p}`: corrected flows whose coefficients depend only
//! on the flat coordinates, with `O_{β,0} = D_{β,0}` and the higher levels
//! defined so that descendant operators commute and kill all jets of order
//! below their level. Second, normal-ordered products, where no operator
//! acts on the coefficients of another. Third, the full tree operators
//! `O_{{α₁,a₁;…;αₙ,aₙ}}`: sums over stable rooted trees with exponent
//! assignments, edge pairings, and descending-factorial weights. The
//! refined operators `A^m_{α,p}` are linear combinations of `O`-operators
//! that kill every jet of order up to `m`.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::diffpoly::{DiffFrac, DiffPoly, JetVar};
use crate::frobenius::{FrobeniusModel, ModelCtx};
use crate::par;
use crate::rational::{factorial, pochhammer, Rational};
use crate::trees::{enumerate_q, enumerate_trees, RootedTree};

pub use crate::trees::Half;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OperatorError {
    /// `A^m_{α,p}` is only defined for `p >= m + 1`.
    #[error("refinement level {m} needs descendant level at least {min} but got {p}", min = m + 1)]
    LevelTooSmall { m: u32, p: u32 },
}

/// Anything the operators can act on: jet polynomials and their ratios.
/// The action only ever needs partials, multiplication by polynomials,
/// and addition, so the genus-1 gradient fractions work uniformly.
pub trait JetTarget: Clone + Send + Sync {
    fn zero_target() -> Self;
    fn is_zero_target(&self) -> bool;
    fn add_target(&self, rhs: &Self) -> Self;
    fn mul_poly(&self, p: &DiffPoly) -> Self;
    fn partial_var(&self, v: JetVar) -> Self;
    fn jet_vars(&self) -> BTreeSet<JetVar>;
}

impl JetTarget for DiffPoly {
    fn zero_target() -> Self {
        DiffPoly::zero()
    }

    fn is_zero_target(&self) -> bool {
        self.is_zero()
    }

    fn add_target(&self, rhs: &Self) -> Self {
        self + rhs
    }

    fn mul_poly(&self, p: &DiffPoly) -> Self {
        self * p
    }

    fn partial_var(&self, v: JetVar) -> Self {
        self.partial(v)
    }

    fn jet_vars(&self) -> BTreeSet<JetVar> {
        self.vars()
    }
}

impl JetTarget for DiffFrac {
    fn zero_target() -> Self {
        DiffFrac::zero()
    }

    fn is_zero_target(&self) -> bool {
        self.is_zero()
    }

    fn add_target(&self, rhs: &Self) -> Self {
        self.add(rhs)
    }

    fn mul_poly(&self, p: &DiffPoly) -> Self {
        self.mul(&DiffFrac::from_poly(p.clone()))
    }

    fn partial_var(&self, v: JetVar) -> Self {
        self.partial(v)
    }

    fn jet_vars(&self) -> BTreeSet<JetVar> {
        let mut vars = self.num().vars();
        vars.extend(self.den().vars());
        vars
    }
}

/// A first-order operator `Σ c_{γ,q}(v) D_{γ,q}` whose coefficients only
/// involve the flat coordinates, not higher jets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExOperator {
    terms: BTreeMap<(u8, u32), DiffPoly>,
}

impl ExOperator {
    pub fn zero() -> Self {
        ExOperator::default()
    }

    /// The bare flow `D_{β,p}`.
    pub fn flow(beta: u8, p: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((beta, p), DiffPoly::one());
        ExOperator { terms }
    }

    /// Coefficients over the flows, keyed by `(γ, q)`.
    pub fn terms(&self) -> &BTreeMap<(u8, u32), DiffPoly> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `self + c · other` with a polynomial weight.
    fn add_scaled(&self, other: &ExOperator, c: &DiffPoly) -> ExOperator {
        let mut out = self.clone();
        for (k, coeff) in &other.terms {
            let add = coeff * c;
            let entry = out.terms.entry(*k).or_insert_with(DiffPoly::zero);
            *entry = &*entry + &add;
            if entry.is_zero() {
                out.terms.remove(k);
            }
        }
        out
    }

    pub fn add(&self, other: &ExOperator) -> ExOperator {
        self.add_scaled(other, &DiffPoly::one())
    }

    pub fn sub(&self, other: &ExOperator) -> ExOperator {
        self.add_scaled(other, &DiffPoly::constant(-Rational::one()))
    }

    pub fn scale_poly(&self, c: &DiffPoly) -> ExOperator {
        ExOperator::zero().add_scaled(self, c)
    }

    /// Applies the operator as a derivation, through the full flows.
    pub fn apply<T: JetTarget>(&self, ctx: &OpCtx, f: &T) -> T {
        let mut out = T::zero_target();
        for ((gamma, q), c) in &self.terms {
            let flowed = apply_flow_target(ctx.model_ctx(), *gamma, *q, f);
            if !flowed.is_zero_target() {
                out = out.add_target(&flowed.mul_poly(c));
            }
        }
        out
    }

    /// The coefficient of `∂/∂v` at one jet variable: what the operator
    /// multiplies the partial `∂/∂v^{α,s}` by.
    pub fn coefficient_on(&self, ctx: &OpCtx, v: JetVar) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for ((gamma, q), c) in &self.terms {
            let xs = ctx.model_ctx().flow_coeffs(*gamma, *q, v.order);
            let x = &xs[v.alpha as usize - 1];
            if !x.is_zero() {
                out = out + x * c;
            }
        }
        out
    }

    /// True when the operator annihilates every function of the flat
    /// coordinates alone, i.e. all its order-zero coefficients vanish.
    pub fn kills_coordinates(&self, ctx: &OpCtx) -> bool {
        let dim = ctx.model().dimension() as u8;
        (1..=dim).all(|a| self.coefficient_on(ctx, JetVar::new(a, 0)).is_zero())
    }
}

/// Applies the flow `D_{β,q}` to a target as a derivation.
fn apply_flow_target<T: JetTarget>(ctx: &ModelCtx, beta: u8, q: u32, f: &T) -> T {
    let mut out = T::zero_target();
    for v in f.jet_vars() {
        let pf = f.partial_var(v);
        if pf.is_zero_target() {
            continue;
        }
        let xs = ctx.flow_coeffs(beta, q, v.order);
        let x = &xs[v.alpha as usize - 1];
        if !x.is_zero() {
            out = out.add_target(&pf.mul_poly(x));
        }
    }
    out
}

/// Shared operator state for one model: the genus-0 correlator caches plus
/// memoized operators, trees, and vertex factors.
pub struct OpCtx {
    mctx: ModelCtx,
    ex: RwLock<HashMap<(u8, u32), Arc<ExOperator>>>,
    refined: RwLock<HashMap<(u32, u8, u32), Arc<ExOperator>>>,
    trees: RwLock<HashMap<usize, Arc<Vec<RootedTree>>>>,
    vertex: RwLock<HashMap<(Vec<(u8, u32)>, u8), Arc<DiffPoly>>>,
}

impl OpCtx {
    pub fn new(model: FrobeniusModel) -> Self {
        OpCtx {
            mctx: ModelCtx::new(model),
            ex: RwLock::new(HashMap::new()),
            refined: RwLock::new(HashMap::new()),
            trees: RwLock::new(HashMap::new()),
            vertex: RwLock::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &FrobeniusModel {
        self.mctx.model()
    }

    pub fn model_ctx(&self) -> &ModelCtx {
        &self.mctx
    }

    /// Stable rooted trees with `n` legs, enumerated once per context.
    pub fn trees(&self, n: usize) -> Arc<Vec<RootedTree>> {
        if let Some(hit) = self.trees.read().unwrap().get(&n) {
            return hit.clone();
        }
        let value = Arc::new(enumerate_trees(n));
        self.trees.write().unwrap().entry(n).or_insert(value).clone()
    }

    /// The raised two-point function `⟨⟨τ^γ_0 τ_{β,k}⟩⟩ = η^{γμ} Ω_{μ,0;β,k}`.
    pub fn raised_two_point(&self, gamma: u8, beta: u8, k: u32) -> DiffPoly {
        let dim = self.model().dimension() as u8;
        let mut out = DiffPoly::zero();
        for mu in 1..=dim {
            let e = self.model().eta_inv(gamma, mu);
            if !e.is_zero() {
                out = out + self.mctx.omega(mu, 0, beta, k).scale(e);
            }
        }
        out
    }

    /// The operator `O_{β,p}`: the flow `D_{β,p}` minus two-point-weighted
    /// lower operators, `O_{β,p} = D_{β,p} - Σ_{k<p} ⟨⟨τ^γ_0 τ_{β,k}⟩⟩ O_{γ,p-k-1}`.
    pub fn ex_operator(&self, beta: u8, p: u32) -> Arc<ExOperator> {
        if let Some(hit) = self.ex.read().unwrap().get(&(beta, p)) {
            return hit.clone();
        }
        let dim = self.model().dimension() as u8;
        let mut acc = ExOperator::flow(beta, p);
        for k in 0..p {
            for gamma in 1..=dim {
                let c = self.raised_two_point(gamma, beta, k);
                if !c.is_zero() {
                    let lower = self.ex_operator(gamma, p - k - 1);
                    acc = acc.add_scaled(&lower, &c.scale(&-Rational::one()));
                }
            }
        }
        let arc = Arc::new(acc);
        self.ex.write().unwrap().entry((beta, p)).or_insert(arc).clone()
    }

    /// The refined operator `A^m_{α,p}`, defined for `p >= m + 1` as
    /// `O_{α,p}` plus two-point-weighted lower operators; it kills every
    /// jet of order up to `m`.
    pub fn refined_operator(&self, m: u32, alpha: u8, p: u32) -> Result<Arc<ExOperator>, OperatorError> {
        if p < m + 1 {
            return Err(OperatorError::LevelTooSmall { m, p });
        }
        if let Some(hit) = self.refined.read().unwrap().get(&(m, alpha, p)) {
            return Ok(hit.clone());
        }
        let dim = self.model().dimension() as u8;
        let mut acc = (*self.ex_operator(alpha, p)).clone();
        if p >= m + 2 {
            for k in 0..=p - m - 2 {
                for gamma in 1..=dim {
                    let c = self.raised_two_point(gamma, alpha, k);
                    if !c.is_zero() {
                        let lower = self.ex_operator(gamma, p - k - 1);
                        acc = acc.add_scaled(&lower, &c);
                    }
                }
            }
        }
        let arc = Arc::new(acc);
        Ok(self
            .refined
            .write()
            .unwrap()
            .entry((m, alpha, p))
            .or_insert(arc)
            .clone())
    }

    /// Normal-ordered product of level-`q` operators applied to the formal
    /// one-point function of the index carried by the vertex's rootward
    /// edge. The one-point function is not a local jet function, but each
    /// choice of flow terms turns it into a genuine correlator with the
    /// rootward insertion appended, weighted by the product of the chosen
    /// coefficients. Memoized because the same local picture recurs across
    /// trees and assignments.
    fn vertex_factor(&self, mut pairs: Vec<(u8, u32)>, beta: u8) -> Arc<DiffPoly> {
        pairs.sort_unstable();
        let key = (pairs, beta);
        if let Some(hit) = self.vertex.read().unwrap().get(&key) {
            return hit.clone();
        }
        let mut combos: Vec<(DiffPoly, Vec<(u8, u32)>)> = vec![(DiffPoly::one(), Vec::new())];
        for &(a, q) in &key.0 {
            let field = self.ex_operator(a, q);
            let mut next = Vec::with_capacity(combos.len() * field.terms().len());
            for (flow, c) in field.terms() {
                for (coeff, ins) in &combos {
                    let mut ins = ins.clone();
                    ins.push(*flow);
                    next.push((coeff * c, ins));
                }
            }
            combos = next;
        }
        let mut value = DiffPoly::zero();
        for (coeff, mut ins) in combos {
            ins.push((beta, 0));
            value = value + &coeff * &self.mctx.correlator(&ins);
        }
        let value = Arc::new(value);
        self.vertex.write().unwrap().entry(key).or_insert(value).clone()
    }
}

/// Applies `O_{β,p}` to a target.
pub fn ex_operator_action<T: JetTarget>(ctx: &OpCtx, beta: u8, p: u32, target: &T) -> T {
    ctx.ex_operator(beta, p).apply(ctx, target)
}

/// Normal-ordered application `:X₁ ⋯ X_m:(f)`: all coefficient functions
/// come out front and the bare flows compose on the target, so no operator
/// ever differentiates another's coefficients. The flows commute, which
/// makes this symmetric in the fields; with one field it is plain
/// application.
pub fn normal_ordered_apply<T: JetTarget>(ctx: &OpCtx, fields: &[Arc<ExOperator>], target: &T) -> T {
    let images = RwLock::new(BTreeMap::new());
    normal_ordered_apply_with(ctx, fields, target, &images)
}

/// The cached core: term combinations are grouped by their commuting flow
/// multiset, coefficient products summed per group, and each distinct
/// composition applied to the target once. `images` maps sorted flow
/// multisets to their composed action on the one base target of the whole
/// call, so it can be shared across many products over the same target.
fn normal_ordered_apply_with<T: JetTarget>(
    ctx: &OpCtx,
    fields: &[Arc<ExOperator>],
    target: &T,
    images: &RwLock<BTreeMap<Vec<(u8, u32)>, Arc<T>>>,
) -> T {
    if fields.is_empty() {
        return target.clone();
    }
    let mut combos: Vec<(Vec<(u8, u32)>, DiffPoly)> = vec![(Vec::new(), DiffPoly::one())];
    for field in fields {
        let mut next = Vec::with_capacity(combos.len() * field.terms().len());
        for (flow, c) in field.terms() {
            for (flows, coeff) in &combos {
                let mut flows = flows.clone();
                flows.push(*flow);
                next.push((flows, coeff * c));
            }
        }
        combos = next;
    }
    let mut sums: BTreeMap<Vec<(u8, u32)>, DiffPoly> = BTreeMap::new();
    for (mut flows, coeff) in combos {
        if coeff.is_zero() {
            continue;
        }
        flows.sort_unstable();
        match sums.entry(flows) {
            Entry::Occupied(mut e) => {
                let total = e.get() + &coeff;
                *e.get_mut() = total;
            }
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
        }
    }
    let mut out = T::zero_target();
    for (flows, coeff) in sums {
        if coeff.is_zero() {
            continue;
        }
        let img = flow_image(ctx, &flows, target, images);
        if !img.is_zero_target() {
            out = out.add_target(&img.mul_poly(&coeff));
        }
    }
    out
}

/// The composed bare-flow action of a sorted multiset on the base target,
/// built by peeling the first flow off and recursing, so every suffix is
/// computed and stored once.
fn flow_image<T: JetTarget>(
    ctx: &OpCtx,
    flows: &[(u8, u32)],
    target: &T,
    images: &RwLock<BTreeMap<Vec<(u8, u32)>, Arc<T>>>,
) -> Arc<T> {
    if let Some(hit) = images.read().unwrap().get(flows).cloned() {
        return hit;
    }
    let img = if flows.is_empty() {
        target.clone()
    } else {
        let sub = flow_image(ctx, &flows[1..], target, images);
        apply_flow_target(ctx.model_ctx(), flows[0].0, flows[0].1, &*sub)
    };
    let img = Arc::new(img);
    images.write().unwrap().entry(flows.to_vec()).or_insert(img).clone()
}

/// The scalar weight of one exponent assignment: a sign from the edge
/// count and a product of descending factorials, one per positive half,
/// over the factorials of the shifted leg levels. Zero exactly when the
/// assignment contributes nothing, so callers can prune on it before any
/// polynomial work.
pub fn assignment_coefficient(tree: &RootedTree, q: &[u32], levels: &[u32]) -> Rational {
    assert_eq!(levels.len(), tree.leg_count());
    assert_eq!(q.len(), tree.plus_halves().len());
    let mut num = BigInt::one();
    for h in 0..q.len() {
        let below_legs: i64 = tree
            .descendant_legs(h)
            .iter()
            .map(|&l| levels[l] as i64 + 1)
            .sum();
        let below_halves: i64 = tree
            .descendant_halves(h)
            .iter()
            .map(|&hh| q[hh] as i64 + 1)
            .sum();
        let f = pochhammer(below_legs - below_halves, q[h] + 1);
        if f.is_zero() {
            return Rational::zero();
        }
        num *= f;
    }
    if tree.edge_count() % 2 == 1 {
        num = -num;
    }
    let mut den = BigInt::one();
    for &a in levels {
        den *= factorial(a as u64 + 1);
    }
    Rational::new(num, den)
}

/// Applies the tree operator `O_{{α₁,a₁;…;αₙ,aₙ}}` to a target: the sum
/// over stable rooted trees with `n` legs and exponent assignments of
/// total weight `Σaᵢ`, with pairing-contracted edges, normal-ordered
/// vertex factors on first thetas, and the root product on the target.
/// The empty insertion list is the identity.
pub fn tree_operator_action<T: JetTarget>(ctx: &OpCtx, pairs: &[(u8, u32)], target: &T) -> T {
    if pairs.is_empty() {
        return target.clone();
    }
    let dim = ctx.model().dimension() as u8;
    for &(a, _) in pairs {
        assert!((1..=dim).contains(&a), "coordinate index out of range");
    }
    let levels: Vec<u32> = pairs.iter().map(|p| p.1).collect();
    let chi: u32 = levels.iter().sum();
    let trees = ctx.trees(pairs.len());
    // Enumerate surviving assignments up front; the scalar prune is cheap
    // and drops most of them.
    let mut jobs: Vec<(usize, Vec<u32>, Rational)> = Vec::new();
    for (ti, tree) in trees.iter().enumerate() {
        for q in enumerate_q(tree, chi) {
            let w = assignment_coefficient(tree, &q, &levels);
            if !w.is_zero() {
                jobs.push((ti, q, w));
            }
        }
    }
    // The root product depends only on the multiset of root fields, and its
    // expansion only on the composed flow multisets; both recur heavily
    // across trees and assignments, so share them between jobs.
    let root_cache: RwLock<BTreeMap<Vec<(u8, u32)>, Arc<T>>> = RwLock::new(BTreeMap::new());
    let flow_images: RwLock<BTreeMap<Vec<(u8, u32)>, Arc<T>>> = RwLock::new(BTreeMap::new());
    let parts = par::map_collect(&jobs, |(ti, q, w)| {
        labeled_tree_value(ctx, &trees[*ti], q, pairs, w, target, &root_cache, &flow_images)
    });
    let mut out = T::zero_target();
    for part in &parts {
        out = out.add_target(part);
    }
    out
}

/// One tree with one assignment, summed over all edge index labelings.
#[allow(clippy::too_many_arguments)]
fn labeled_tree_value<T: JetTarget>(
    ctx: &OpCtx,
    tree: &RootedTree,
    q: &[u32],
    pairs: &[(u8, u32)],
    scalar: &Rational,
    target: &T,
    root_cache: &RwLock<BTreeMap<Vec<(u8, u32)>, Arc<T>>>,
    flow_images: &RwLock<BTreeMap<Vec<(u8, u32)>, Arc<T>>>,
) -> T {
    let n = pairs.len();
    let vcount = tree.vertex_count();
    let ecount = tree.edge_count();
    let model = ctx.model();
    let dim = model.dimension() as u8;
    let mut nz: Vec<(u8, u8, Rational)> = Vec::new();
    for b in 1..=dim {
        for g in 1..=dim {
            let w = model.eta_inv(b, g);
            if !w.is_zero() {
                nz.push((b, g, w.clone()));
            }
        }
    }
    let mut pick = vec![0usize; ecount];
    let mut alpha_of = vec![0u8; tree.plus_halves().len()];
    for (i, &(a, _)) in pairs.iter().enumerate() {
        alpha_of[i] = a;
    }
    let mut out = T::zero_target();
    'labelings: loop {
        let mut weight = scalar.clone();
        for c in 1..vcount {
            let (_, g, w) = &nz[pick[c - 1]];
            weight = weight * w;
            alpha_of[n + c - 1] = *g;
        }
        let mut poly = DiffPoly::constant(weight);
        for v in 1..vcount {
            // The negative half at v carries the child-side index of the
            // edge above v.
            let beta = nz[pick[v - 1]].0;
            let local: Vec<(u8, u32)> = tree.plus_at(v).iter().map(|&h| (alpha_of[h], q[h])).collect();
            let factor = ctx.vertex_factor(local, beta);
            if factor.is_zero() {
                poly = DiffPoly::zero();
                break;
            }
            poly = &poly * &factor;
        }
        if !poly.is_zero() {
            let mut root_pairs: Vec<(u8, u32)> =
                tree.plus_at(0).iter().map(|&h| (alpha_of[h], q[h])).collect();
            root_pairs.sort_unstable();
            let hit = root_cache.read().unwrap().get(&root_pairs).cloned();
            let root_val = match hit {
                Some(v) => v,
                None => {
                    let fields: Vec<Arc<ExOperator>> =
                        root_pairs.iter().map(|&(a, qq)| ctx.ex_operator(a, qq)).collect();
                    let v =
                        Arc::new(normal_ordered_apply_with(ctx, &fields, target, flow_images));
                    root_cache.write().unwrap().entry(root_pairs).or_insert(v).clone()
                }
            };
            if !root_val.is_zero_target() {
                out = out.add_target(&root_val.mul_poly(&poly));
            }
        }
        let mut i = 0;
        loop {
            if i == ecount {
                break 'labelings;
            }
            if pick[i] + 1 < nz.len() {
                pick[i] += 1;
                pick[..i].fill(0);
                break;
            }
            i += 1;
        }
    }
    out
}

/// Applies the composition `A^{m₁}_{α₁,p₁} ∘ … ∘ A^{mₙ}_{αₙ,pₙ}`: the last
/// listed operator acts first, each as a genuine derivation.
pub fn a_operator_action<T: JetTarget>(
    ctx: &OpCtx,
    specs: &[(u32, u8, u32)],
    target: &T,
) -> Result<T, OperatorError> {
    let mut acc = target.clone();
    for &(m, alpha, p) in specs.iter().rev() {
        let op = ctx.refined_operator(m, alpha, p)?;
        acc = op.apply(ctx, &acc);
    }
    Ok(acc)
}

/// The contraction chain behind first-surviving-jet actions: `links + 1`
/// three-point functions with a unit insertion, glued along raised
/// indices. The first carries the descendant `τ_{α,s}`, the last closes
/// on the raised `β`.
pub fn descendant_chain(ctx: &ModelCtx, alpha: u8, s: u32, beta: u8, links: u32) -> DiffPoly {
    assert!(links >= 1, "the chain needs at least one link");
    let dim = ctx.model().dimension() as u8;
    let mut w: Vec<DiffPoly> = (1..=dim)
        .map(|g| ctx.correlator(&[(alpha, s), (g, 0), (1, 0)]))
        .collect();
    for _ in 1..links {
        w = (1..=dim)
            .map(|next| {
                let mut acc = DiffPoly::zero();
                for g in 1..=dim {
                    for mu in 1..=dim {
                        let e = ctx.model().eta_inv(g, mu);
                        if e.is_zero() || w[g as usize - 1].is_zero() {
                            continue;
                        }
                        let link = ctx.correlator(&[(mu, 0), (next, 0), (1, 0)]);
                        acc = acc + (&w[g as usize - 1] * &link).scale(e);
                    }
                }
                acc
            })
            .collect();
    }
    let mut out = DiffPoly::zero();
    for g in 1..=dim {
        for mu in 1..=dim {
            let e1 = ctx.model().eta_inv(g, mu);
            if e1.is_zero() || w[g as usize - 1].is_zero() {
                continue;
            }
            for nu in 1..=dim {
                let e2 = ctx.model().eta_inv(beta, nu);
                if e2.is_zero() {
                    continue;
                }
                let link = ctx.correlator(&[(mu, 0), (nu, 0), (1, 0)]);
                out = out + (&w[g as usize - 1] * &link).scale(&(e1 * e2));
            }
        }
    }
    out
}
