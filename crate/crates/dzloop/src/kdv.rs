//! The loop equation of the KdV hierarchy, solved genus by genus.
//!
//! Genus-g free energies are determined by a single functional equation in
//! an auxiliary spectral parameter λ. We work in [`LoopSeries`]: finite
//! sums `Σ c_k (v¹-λ)^{-k/2}` whose coefficients are differential
//! polynomials; λ itself is never materialized. Substituting the structural
//! ansatz `F_g = Σ_μ C_{g;μ} v^{1,(μ)} / (v^{1,1})^{g+n-1}` with unknown
//! rationals `C_{g;μ}` makes the equation linear, and matching every
//! `(exponent, monomial)` coefficient yields an overdetermined exact linear
//! system whose unique solvability is itself a correctness check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::diffpoly::{jet, DiffMonomial, DiffPoly, JetVar};
use crate::linalg::{solve_linear_exact, LinalgError, LinearSolution};
use crate::rational::{binomial, factorial, odd_double_factorial, rat, Rational};

/// A partition labelling one ansatz monomial: weakly decreasing parts, each
/// at least 2. The special partition `(1)` marks the genus-1 logarithm.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn new(parts: impl IntoIterator<Item = u32>) -> Self {
        let mut parts: Vec<u32> = parts.into_iter().collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        let genus1 = parts.as_slice() == [1];
        assert!(
            genus1 || parts.iter().all(|&p| p >= 2),
            "parts must be >= 2 (or the special genus-1 partition (1))"
        );
        Partition { parts }
    }

    pub fn genus1() -> Self {
        Partition { parts: vec![1] }
    }

    pub fn is_genus1_marker(&self) -> bool {
        self.parts.as_slice() == [1]
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn sum(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// Order of the automorphism group: product of factorials of part
    /// multiplicities.
    pub fn aut_order(&self) -> BigInt {
        let mut acc = BigInt::one();
        let mut run = 0u64;
        for i in 0..self.parts.len() {
            run += 1;
            if i + 1 == self.parts.len() || self.parts[i + 1] != self.parts[i] {
                acc *= factorial(run);
                run = 0;
            }
        }
        acc
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// All partitions of `3g-3+n` into exactly `n` parts, each at least 2,
/// in descending lexicographic order. Empty when `2n > 3g-3+n`.
pub fn enumerate_partitions(g: u32, n: u32) -> Vec<Partition> {
    let total = 3 * (g as i64) - 3 + n as i64;
    let mut out = Vec::new();
    if n == 0 || total < 2 * n as i64 {
        return out;
    }
    let mut parts: Vec<u32> = Vec::with_capacity(n as usize);
    gen_parts(total as u32, n, u32::MAX, &mut parts, &mut out);
    out
}

fn gen_parts(total: u32, slots: u32, cap: u32, parts: &mut Vec<u32>, out: &mut Vec<Partition>) {
    if slots == 0 {
        if total == 0 {
            out.push(Partition { parts: parts.clone() });
        }
        return;
    }
    // Each remaining slot takes at least 2; the next part is bounded by the
    // previous one (descending) and by what the remaining slots can absorb.
    let hi = cap.min(total.saturating_sub(2 * (slots - 1)));
    let mut p = hi;
    while p >= 2 {
        if p as u64 * slots as u64 >= total as u64 {
            parts.push(p);
            gen_parts(total - p, slots - 1, p, parts, out);
            parts.pop();
        }
        p -= 1;
    }
}

/// `A_{n₁,n₂} = -(2n₁-1)!!(2n₂-1)!!/2^{n₁+n₂}`, with `(-1)!! = 1`: the
/// leading constant of the product `∂x^{n₁}[(v¹-λ)^{-1/2}] ∂x^{n₂}[...]`
/// expanded in `1/(λ-v¹)`.
pub fn leading_constant(n1: u32, n2: u32) -> Rational {
    let num = odd_double_factorial(2 * n1 as i64 - 1) * odd_double_factorial(2 * n2 as i64 - 1);
    -Rational::new(num, BigInt::from(2).pow(n1 + n2))
}

/// Finite sum `Σ_k c_k (v¹-λ)^{-k/2}` with differential-polynomial
/// coefficients; `k` counts half-units, and only the exponents of `v¹-λ`
/// are tracked, never λ itself.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoopSeries {
    terms: BTreeMap<u32, DiffPoly>,
}

impl LoopSeries {
    pub fn zero() -> Self {
        LoopSeries::default()
    }

    pub fn single(k: u32, c: DiffPoly) -> Self {
        let mut s = LoopSeries::zero();
        s.add_term(k, c);
        s
    }

    /// Embeds a λ-free polynomial at exponent 0.
    pub fn from_poly(p: DiffPoly) -> Self {
        LoopSeries::single(0, p)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, k: u32) -> DiffPoly {
        self.terms.get(&k).cloned().unwrap_or_else(DiffPoly::zero)
    }

    pub fn exponents(&self) -> impl Iterator<Item = u32> + '_ {
        self.terms.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u32, &DiffPoly)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, k: u32, c: DiffPoly) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(k) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = &*e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, rhs: &LoopSeries) -> LoopSeries {
        let mut out = self.clone();
        for (&k, c) in &rhs.terms {
            out.add_term(k, c.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &LoopSeries) -> LoopSeries {
        let mut out = self.clone();
        for (&k, c) in &rhs.terms {
            out.add_term(k, -c);
        }
        out
    }

    pub fn mul(&self, rhs: &LoopSeries) -> LoopSeries {
        let mut out = LoopSeries::zero();
        for (&ka, ca) in &self.terms {
            for (&kb, cb) in &rhs.terms {
                out.add_term(ka + kb, ca * cb);
            }
        }
        out
    }

    pub fn scale_poly(&self, p: &DiffPoly) -> LoopSeries {
        let mut out = LoopSeries::zero();
        for (&k, c) in &self.terms {
            out.add_term(k, c * p);
        }
        out
    }

    pub fn scale(&self, r: &Rational) -> LoopSeries {
        let mut out = LoopSeries::zero();
        for (&k, c) in &self.terms {
            out.add_term(k, c.scale(r));
        }
        out
    }

    /// Total x-derivative: dx on coefficients plus the chain rule
    /// `∂x (v¹-λ)^{-k/2} = (-k/2) v^{1,1} (v¹-λ)^{-k/2-1}`.
    pub fn loop_dx(&self) -> LoopSeries {
        let vx = DiffPoly::var(jet(1, 1));
        let mut out = LoopSeries::zero();
        for (&k, c) in &self.terms {
            out.add_term(k, c.dx());
            out.add_term(k + 2, (c * &vx).scale(&rat(-(k as i64), 2)));
        }
        out
    }
}

impl fmt::Display for LoopSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "[{c}] * (v-lambda)^(-{k}/2)")?;
        }
        Ok(())
    }
}

/// One genus of the free-energy tower: the coefficient table `μ ↦ C_{g;μ}`.
/// Genus 1 is stored as the marker `C_{1;(1)} = 1/24`, standing for
/// `(1/24) log v^{1,1}`; higher genera also carry their realization as a
/// Laurent differential polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KdVFreeEnergy {
    genus: u32,
    coeffs: BTreeMap<Partition, Rational>,
    realized: Option<DiffPoly>,
}

impl KdVFreeEnergy {
    pub fn genus1() -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(Partition::genus1(), rat(1, 24));
        KdVFreeEnergy { genus: 1, coeffs, realized: None }
    }

    fn from_table(genus: u32, coeffs: BTreeMap<Partition, Rational>) -> Self {
        assert!(genus >= 2);
        let realized = Some(realize_table(genus, &coeffs));
        KdVFreeEnergy { genus, coeffs, realized }
    }

    pub fn genus(&self) -> u32 {
        self.genus
    }

    pub fn coefficient(&self, mu: &Partition) -> Rational {
        self.coeffs.get(mu).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Partition, &Rational)> {
        self.coeffs.iter()
    }

    /// The free energy as a Laurent differential polynomial; genus >= 2
    /// only (genus 1 is a logarithm, handled gradient-wise).
    pub fn realize(&self) -> &DiffPoly {
        self.realized
            .as_ref()
            .expect("genus-1 free energy has no polynomial realization")
    }

    /// `∂F_g / ∂v^{1,k}`, a Laurent differential polynomial for every genus.
    pub fn gradient(&self, k: u16) -> DiffPoly {
        match &self.realized {
            Some(p) => p.partial(jet(1, k)),
            None => {
                if k == 1 {
                    DiffPoly::monomial(DiffMonomial::new([(jet(1, 1), -1)]), rat(1, 24))
                } else {
                    DiffPoly::zero()
                }
            }
        }
    }

    /// `∂²F_g / ∂v^{1,k} ∂v^{1,l}`.
    pub fn hessian(&self, k: u16, l: u16) -> DiffPoly {
        match &self.realized {
            Some(p) => p.partial(jet(1, k)).partial(jet(1, l)),
            None => {
                if k == 1 && l == 1 {
                    DiffPoly::monomial(DiffMonomial::new([(jet(1, 1), -2)]), rat(-1, 24))
                } else {
                    DiffPoly::zero()
                }
            }
        }
    }

    /// Highest jet order with a nonzero gradient: `3g-2` (also correct for
    /// the genus-1 marker).
    pub fn top_order(&self) -> u16 {
        (3 * self.genus - 2) as u16
    }
}

fn realize_table(genus: u32, coeffs: &BTreeMap<Partition, Rational>) -> DiffPoly {
    let mut p = DiffPoly::zero();
    for (mu, c) in coeffs {
        let n = mu.len() as i32;
        let mut factors: Vec<(JetVar, i32)> = vec![(jet(1, 1), -(genus as i32 + n - 1))];
        factors.extend(mu.parts().iter().map(|&part| (jet(1, part as u16), 1)));
        p.add_term(DiffMonomial::new(factors), c.clone());
    }
    p
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoopSolveError {
    #[error("loop-equation system is inconsistent (implementation bug)")]
    Inconsistent,
    #[error("loop-equation system is underdetermined (implementation bug)")]
    Underdetermined,
    #[error(transparent)]
    Shape(#[from] LinalgError),
}

/// Derivative tables for the three λ-dependent kernels of the loop
/// equation, indexed by the number of x-derivatives applied.
pub struct LoopKernels {
    /// `∂x^r [(v¹-λ)^{-1/2}]`
    pub half: Vec<LoopSeries>,
    /// `∂x^r [(v¹-λ)^{-1}]`
    pub one: Vec<LoopSeries>,
    /// `∂x^r [v^{1,1} (v¹-λ)^{-3}]`
    pub cubed: Vec<LoopSeries>,
}

impl LoopKernels {
    pub fn up_to(max: usize) -> Self {
        let tower = |seed: LoopSeries| {
            let mut out = Vec::with_capacity(max + 1);
            out.push(seed);
            for r in 0..max {
                let next = out[r].loop_dx();
                out.push(next);
            }
            out
        };
        LoopKernels {
            half: tower(LoopSeries::single(1, DiffPoly::one())),
            one: tower(LoopSeries::single(2, DiffPoly::one())),
            cubed: tower(LoopSeries::single(6, DiffPoly::var(jet(1, 1)))),
        }
    }
}

/// The loop-equation left-hand side applied to a Laurent polynomial `b`
/// (linear in `b`): `Σ_r ∂b/∂v^{1,r} ∂x^r[(v¹-λ)^{-1}] + Σ_{r≥1}
/// ∂b/∂v^{1,r} Σ_{k=1}^r C(r,k) ∂x^{k-1}[√] ∂x^{r-k+1}[√]`.
pub fn loop_lhs(b: &DiffPoly, kernels: &LoopKernels) -> LoopSeries {
    let max_r = b.max_order().unwrap_or(0) as usize;
    let mut out = LoopSeries::zero();
    for r in 0..=max_r {
        let grad = b.partial(jet(1, r as u16));
        if grad.is_zero() {
            continue;
        }
        let mut kernel = kernels.one[r].clone();
        for k in 1..=r {
            let c = Rational::from(binomial(r as u64, k as u64));
            kernel = kernel.add(&kernels.half[k - 1].mul(&kernels.half[r - k + 1]).scale(&c));
        }
        out = out.add(&kernel.scale_poly(&grad));
    }
    out
}

/// The loop-equation right-hand side for genus `g`, built from the strictly
/// lower part of the tower (`lower[m-1]` is the genus-m table).
pub fn loop_rhs(g: u32, lower: &[KdVFreeEnergy], kernels: &LoopKernels) -> LoopSeries {
    assert_eq!(lower.len() as u32, g - 1, "need exactly the genera below {g}");
    let mut out = LoopSeries::zero();
    if g >= 2 {
        let prev = &lower[g as usize - 2];
        let kmax = (3 * g - 3) as u16;
        for k in 0..=kmax {
            for l in 0..=kmax {
                let mut bracket = DiffPoly::zero();
                for m in 1..g {
                    let a = lower[m as usize - 1].gradient(k);
                    if a.is_zero() {
                        continue;
                    }
                    let b = lower[(g - m) as usize - 1].gradient(l);
                    if b.is_zero() {
                        continue;
                    }
                    bracket = &bracket + &(&a * &b);
                }
                bracket = &bracket + &prev.hessian(k, l);
                if bracket.is_zero() {
                    continue;
                }
                let pair = kernels.half[k as usize + 1].mul(&kernels.half[l as usize + 1]);
                out = out.add(&pair.scale_poly(&bracket).scale(&rat(1, 2)));
            }
        }
        for k in 0..=kmax {
            let grad = prev.gradient(k);
            if grad.is_zero() {
                continue;
            }
            out = out.add(&kernels.cubed[k as usize + 1].scale_poly(&grad).scale(&rat(1, 8)));
        }
    }
    if g == 1 {
        out.add_term(4, DiffPoly::constant(rat(-1, 16)));
    }
    out
}

/// Solves the loop equation at genus `g` given the lower tower. Genus 1
/// returns the closed-form logarithm marker. For `g >= 2` the ansatz
/// coefficients are determined by exact coefficient matching; the
/// overdetermined system must come out uniquely solvable.
pub fn solve_kdv_loop(g: u32, lower: &[KdVFreeEnergy]) -> Result<KdVFreeEnergy, LoopSolveError> {
    assert!(g >= 1);
    if g == 1 {
        return Ok(KdVFreeEnergy::genus1());
    }
    assert_eq!(lower.len() as u32, g - 1, "need exactly the genera below {g}");

    let basis: Vec<Partition> =
        (1..=3 * g - 3).flat_map(|n| enumerate_partitions(g, n)).collect();
    let kernels = LoopKernels::up_to(3 * g as usize);

    let lhs_columns: Vec<LoopSeries> = crate::par::map_collect(&basis, |mu| {
        let mut table = BTreeMap::new();
        table.insert(mu.clone(), Rational::one());
        loop_lhs(&realize_table(g, &table), &kernels)
    });
    let rhs = loop_rhs(g, lower, &kernels);

    // Row space: every (exponent, monomial) pair seen on either side.
    let mut rows: BTreeSet<(u32, DiffMonomial)> = BTreeSet::new();
    for series in lhs_columns.iter().chain(std::iter::once(&rhs)) {
        for (&k, c) in series.iter() {
            for (m, _) in c.iter() {
                rows.insert((k, m.clone()));
            }
        }
    }
    let rows: Vec<(u32, DiffMonomial)> = rows.into_iter().collect();
    let matrix: Vec<Vec<Rational>> = rows
        .iter()
        .map(|(k, m)| lhs_columns.iter().map(|s| s.coefficient(*k).coefficient(m)).collect())
        .collect();
    let rhs_vec: Vec<Rational> = rows.iter().map(|(k, m)| rhs.coefficient(*k).coefficient(m)).collect();

    let solution = match solve_linear_exact(&matrix, &rhs_vec)? {
        LinearSolution::Unique(x) => x,
        LinearSolution::Inconsistent => return Err(LoopSolveError::Inconsistent),
        LinearSolution::Underdetermined { .. } => return Err(LoopSolveError::Underdetermined),
    };

    // Residual check: the solved tower must satisfy the full equation, not
    // just the sampled rows (it does by construction, but this is cheap).
    let mut residual = rhs;
    for (series, c) in lhs_columns.iter().zip(&solution) {
        residual = residual.sub(&series.scale(c));
    }
    assert!(residual.is_zero(), "loop equation residual nonzero at genus {g}");

    let coeffs: BTreeMap<Partition, Rational> = basis
        .into_iter()
        .zip(solution)
        .filter(|(_, c)| !c.is_zero())
        .collect();
    Ok(KdVFreeEnergy::from_table(g, coeffs))
}

/// The whole tower up to a maximum genus.
#[derive(Debug, Clone)]
pub struct KdVTable {
    energies: Vec<KdVFreeEnergy>,
}

impl KdVTable {
    pub fn up_to(gmax: u32) -> Result<Self, LoopSolveError> {
        assert!(gmax >= 1);
        let mut energies: Vec<KdVFreeEnergy> = Vec::with_capacity(gmax as usize);
        for g in 1..=gmax {
            let next = solve_kdv_loop(g, &energies)?;
            energies.push(next);
        }
        Ok(KdVTable { energies })
    }

    pub fn max_genus(&self) -> u32 {
        self.energies.len() as u32
    }

    pub fn get(&self, g: u32) -> &KdVFreeEnergy {
        assert!(g >= 1 && g <= self.max_genus(), "genus {g} not in table");
        &self.energies[g as usize - 1]
    }

    pub fn lower(&self, g: u32) -> &[KdVFreeEnergy] {
        &self.energies[..g as usize - 1]
    }
}

/// The content of the `(3g-2)`-property for a stored free energy, for a
/// derivative tuple with every `kᵢ >= 2`:
///
/// - `∂ⁿF_g/∂v^{1,k₁}…∂v^{1,kₙ}` vanishes identically when
///   `Σkᵢ > 3g-3+n` (the tameness direction), and
/// - after evaluating all jets of order >= 2 at zero it also vanishes
///   whenever `Σkᵢ != 3g-3+n`; at `Σkᵢ = 3g-3+n` the surviving value is
///   `|Aut(μ)| C_{g;μ} (v^{1,1})^{-(g+n-1)}` for `μ` the sorted tuple.
///
/// Returns `(full_partial, evaluated_partial)` so callers can assert both.
pub fn three_g_minus_two_partials(f: &KdVFreeEnergy, ks: &[u16]) -> (DiffPoly, DiffPoly) {
    assert!(ks.iter().all(|&k| k >= 2), "property applies to jets of order >= 2");
    let mut p = match f.genus() {
        1 => DiffPoly::zero(),
        _ => f.realize().clone(),
    };
    for &k in ks {
        p = p.partial(jet(1, k));
    }
    let mut at_zero = p.clone();
    for v in at_zero.vars() {
        if v.order >= 2 {
            at_zero = at_zero.set_var_zero(v);
        }
    }
    (p, at_zero)
}

/// Homogeneity defect `Σ_{k≥1} ((k+2)/2) v^{1,k} ∂F_g/∂v^{1,k}`; zero for
/// every genus at least 2.
pub fn homogeneity_defect(f: &KdVFreeEnergy) -> DiffPoly {
    let mut acc = DiffPoly::zero();
    for k in 1..=f.top_order() {
        let grad = f.gradient(k);
        if grad.is_zero() {
            continue;
        }
        let weighted = (&DiffPoly::var(jet(1, k)) * &grad).scale(&rat(k as i64 + 2, 2));
        acc = &acc + &weighted;
    }
    acc
}

/// Checks the leading-term relation tying `∂F_g/∂v^{1,3g-2}` to the lower
/// tower: both sides are assembled as Laurent polynomials and compared
/// exactly. Requires genera `1..g` in the table.
pub fn check_leading_relation(g: u32, table: &KdVTable) -> bool {
    assert!(g >= 2, "leading-term relation needs genus >= 2");
    assert!(table.max_genus() >= g, "table must hold genera 1..{g}");
    let p = 3 * g - 2;
    let mut lhs_const = -Rational::from(factorial(p as u64));
    for k in 1..=p {
        lhs_const += Rational::from(binomial(p as u64, k as u64)) * leading_constant(k - 1, p + 1 - k);
    }
    let lhs = table.get(g).gradient(p as u16).scale(&lhs_const);

    let mut rhs = DiffPoly::zero();
    for m in 1..g {
        let a = table.get(m).gradient((3 * m - 2) as u16);
        let b = table.get(g - m).gradient((3 * (g - m) - 2) as u16);
        rhs = &rhs + &(&a * &b).scale(&(leading_constant(3 * m - 1, 3 * (g - m) - 1) * rat(1, 2)));
    }
    let prev = table.get(g - 1);
    for k in 1..=(3 * g - 4).saturating_sub(1) {
        let l = 3 * g - 4 - k;
        if l < 1 {
            continue;
        }
        let h = prev.hessian(k as u16, l as u16);
        if h.is_zero() {
            continue;
        }
        rhs = &rhs + &h.scale(&(leading_constant(k + 1, l + 1) * rat(1, 2)));
    }
    if g >= 2 && 3 * g as i64 - 5 >= 0 {
        let grad_prev = prev.gradient((3 * g - 5) as u16);
        let inv_vx = DiffPoly::monomial(DiffMonomial::new([(jet(1, 1), -1)]), Rational::one());
        let scale = Rational::from(factorial(p as u64)) * rat(-1, 16);
        rhs = &rhs + &(&grad_prev * &inv_vx).scale(&scale);
    }
    lhs == rhs
}
