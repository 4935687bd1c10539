//! The differential polynomial ring in jet variables `v^{α,s}`.
//!
//! A [`DiffPoly`] is an exact-rational polynomial in finitely many jets,
//! Laurent in the jets declared invertible (by default every first jet
//! `v^{α,1}`). It carries the total x-derivative [`DiffPoly::dx`] acting by
//! `v^{α,s} ↦ v^{α,s+1}` and formal partials treating all jets as
//! independent. [`DiffFrac`] adds a quotient layer, compared by
//! cross-multiplication with no GCD reduction; it exists because gradients
//! of the genus-1 free energy are rational even though the free energy
//! itself is a logarithm.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::rational::{rat_int, Rational};

/// Index pair of a jet variable `v^{alpha,order}`: `alpha` names the flat
/// coordinate (1-based), `order` counts x-derivatives.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct JetVar {
    pub alpha: u8,
    pub order: u16,
}

impl JetVar {
    pub fn new(alpha: u8, order: u16) -> Self {
        assert!(alpha >= 1, "jet index alpha is 1-based");
        JetVar { alpha, order }
    }

    /// The jet one x-derivative up: `v^{α,s} ↦ v^{α,s+1}`.
    pub fn raised(self) -> Self {
        JetVar { alpha: self.alpha, order: self.order + 1 }
    }
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v[{},{}]", self.alpha, self.order)
    }
}

/// Shorthand used throughout tests and constructions.
pub fn jet(alpha: u8, order: u16) -> JetVar {
    JetVar::new(alpha, order)
}

/// Which jet variables may carry negative exponents. The default matches
/// the structure rings here: all first jets, any coordinate index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum InvertibleJets {
    #[default]
    FirstJets,
    Custom(BTreeSet<JetVar>),
}

impl InvertibleJets {
    pub fn contains(&self, v: JetVar) -> bool {
        match self {
            InvertibleJets::FirstJets => v.order == 1,
            InvertibleJets::Custom(set) => set.contains(&v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DiffPolyError {
    #[error("cannot invert {var}: not in the invertible set")]
    NotInvertible { var: JetVar },
    #[error("unbound variable {var} in evaluation")]
    Unbound { var: JetVar },
    #[error("singular evaluation: an inverted quantity vanishes")]
    Singular,
    #[error("division by the zero polynomial")]
    ZeroDenominator,
}

/// Product of jet variables with nonzero integer exponents, kept sorted by
/// `(alpha, order)`. Negative exponents are created only through
/// [`DiffMonomial::try_new`] (checked against the invertible set) or by
/// ring operations that provably preserve the invariant.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct DiffMonomial {
    factors: Vec<(JetVar, i32)>,
}

impl DiffMonomial {
    pub fn one() -> Self {
        DiffMonomial::default()
    }

    pub fn var(v: JetVar) -> Self {
        DiffMonomial { factors: vec![(v, 1)] }
    }

    pub fn try_new(
        pairs: impl IntoIterator<Item = (JetVar, i32)>,
        invertible: &InvertibleJets,
    ) -> Result<Self, DiffPolyError> {
        let mut map: BTreeMap<JetVar, i32> = BTreeMap::new();
        for (v, e) in pairs {
            *map.entry(v).or_insert(0) += e;
        }
        map.retain(|_, e| *e != 0);
        for (&v, &e) in &map {
            if e < 0 && !invertible.contains(v) {
                return Err(DiffPolyError::NotInvertible { var: v });
            }
        }
        Ok(DiffMonomial { factors: map.into_iter().collect() })
    }

    /// Builds with the default invertible set; panics on an illegal inverse.
    pub fn new(pairs: impl IntoIterator<Item = (JetVar, i32)>) -> Self {
        DiffMonomial::try_new(pairs, &InvertibleJets::default()).expect("legal monomial")
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn exponent(&self, v: JetVar) -> i32 {
        self.factors
            .binary_search_by_key(&v, |&(w, _)| w)
            .map_or(0, |i| self.factors[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (JetVar, i32)> + '_ {
        self.factors.iter().copied()
    }

    /// Total x-degree: `deg v^{α,k} = k`, summed with exponents.
    pub fn dx_degree(&self) -> i64 {
        self.factors.iter().map(|&(v, e)| v.order as i64 * e as i64).sum()
    }

    fn mul(&self, other: &DiffMonomial) -> DiffMonomial {
        // Merge of two sorted factor lists; exponents may cancel.
        let mut out = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (mut a, mut b) = (self.factors.iter().peekable(), other.factors.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(va, ea)), Some(&&(vb, eb))) => {
                    if va < vb {
                        out.push((va, ea));
                        a.next();
                    } else if vb < va {
                        out.push((vb, eb));
                        b.next();
                    } else {
                        if ea + eb != 0 {
                            out.push((va, ea + eb));
                        }
                        a.next();
                        b.next();
                    }
                }
                (Some(_), None) => {
                    out.extend(a.by_ref().copied());
                    break;
                }
                (None, Some(_)) => {
                    out.extend(b.by_ref().copied());
                    break;
                }
                (None, None) => break,
            }
        }
        DiffMonomial { factors: out }
    }

    /// Adjusts exponents by the given deltas. Only used internally where
    /// the invertibility invariant is preserved (a variable can only go
    /// negative if it already was).
    fn with_deltas(&self, deltas: &[(JetVar, i32)]) -> DiffMonomial {
        let mut map: BTreeMap<JetVar, i32> = self.factors.iter().copied().collect();
        for &(v, d) in deltas {
            *map.entry(v).or_insert(0) += d;
        }
        map.retain(|_, e| *e != 0);
        DiffMonomial { factors: map.into_iter().collect() }
    }
}

impl fmt::Display for DiffMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for &(v, e) in &self.factors {
            if !first {
                write!(f, " * ")?;
            }
            first = false;
            if e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Exact-rational differential polynomial: a canonical map from monomials
/// to nonzero coefficients.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct DiffPoly {
    terms: BTreeMap<DiffMonomial, Rational>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        DiffPoly::default()
    }

    pub fn one() -> Self {
        DiffPoly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = DiffPoly::zero();
        p.add_term(DiffMonomial::one(), c);
        p
    }

    pub fn var(v: JetVar) -> Self {
        DiffPoly::monomial(DiffMonomial::var(v), Rational::one())
    }

    pub fn monomial(m: DiffMonomial, c: Rational) -> Self {
        let mut p = DiffPoly::zero();
        p.add_term(m, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DiffMonomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &DiffMonomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coefficient(&DiffMonomial::one())
    }

    /// The first term, in the canonical monomial order. Used for witnesses.
    pub fn first_term(&self) -> Option<(&DiffMonomial, &Rational)> {
        self.terms.iter().next()
    }

    pub fn add_term(&mut self, m: DiffMonomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> DiffPoly {
        if c.is_zero() {
            return DiffPoly::zero();
        }
        DiffPoly { terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect() }
    }

    pub fn pow(&self, e: u32) -> DiffPoly {
        let mut acc = DiffPoly::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// All jet variables present in the support.
    pub fn vars(&self) -> BTreeSet<JetVar> {
        self.terms.keys().flat_map(|m| m.iter().map(|(v, _)| v)).collect()
    }

    /// Highest jet order appearing, `None` for constants and zero.
    pub fn max_order(&self) -> Option<u16> {
        self.terms
            .keys()
            .flat_map(|m| m.iter().map(|(v, _)| v.order))
            .max()
    }

    /// Formal partial derivative with all jets independent.
    pub fn partial(&self, v: JetVar) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e != 0 {
                out.add_term(m.with_deltas(&[(v, -1)]), c * rat_int(e as i64));
            }
        }
        out
    }

    /// Total x-derivative: derivation with `dx(v^{α,s}) = v^{α,s+1}`.
    pub fn dx(&self) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m, c) in &self.terms {
            for (v, e) in m.iter() {
                out.add_term(
                    m.with_deltas(&[(v, -1), (v.raised(), 1)]),
                    c * rat_int(e as i64),
                );
            }
        }
        out
    }

    /// Iterated total x-derivative.
    pub fn dx_n(&self, n: u32) -> DiffPoly {
        let mut acc = self.clone();
        for _ in 0..n {
            acc = acc.dx();
        }
        acc
    }

    /// Set of x-degrees among monomials (empty for the zero polynomial).
    pub fn dx_degrees(&self) -> BTreeSet<i64> {
        self.terms.keys().map(DiffMonomial::dx_degree).collect()
    }

    pub fn eval_at(&self, assignment: &BTreeMap<JetVar, Rational>) -> Result<Rational, DiffPolyError> {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (v, e) in m.iter() {
                let x = assignment.get(&v).ok_or(DiffPolyError::Unbound { var: v })?;
                if x.is_zero() {
                    if e < 0 {
                        return Err(DiffPolyError::Singular);
                    }
                    term = Rational::zero();
                    break;
                }
                let mut p = Rational::one();
                for _ in 0..e.unsigned_abs() {
                    p *= x;
                }
                if e < 0 {
                    p = p.recip();
                }
                term *= p;
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Substitutes `v := 0`. Callers guarantee `v` carries no negative
    /// exponent (it never does for the order-0 polynomials this serves).
    pub fn set_var_zero(&self, v: JetVar) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            assert!(e >= 0, "set_var_zero of inverted variable {v}");
            if e == 0 {
                out.add_term(m.clone(), c.clone());
            }
        }
        out
    }

    /// Antiderivative in `v` with zero constant: `v^e ↦ v^{e+1}/(e+1)`.
    /// Callers guarantee no exponent `-1` on `v` (polynomial use only).
    pub fn antiderivative(&self, v: JetVar) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            assert!(e != -1, "antiderivative of {v}^-1 is not rational");
            out.add_term(m.with_deltas(&[(v, 1)]), c / rat_int(e as i64 + 1));
        }
        out
    }

    /// Renders the polynomial in LaTeX, negative powers gathered into
    /// denominators, terms in canonical order.
    pub fn latex(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let c = c.abs();
            let mut num_factors: Vec<String> = Vec::new();
            let mut den_factors: Vec<String> = Vec::new();
            for (v, e) in m.iter() {
                let base = format!("v^{{{},{}}}", v.alpha, v.order);
                let (list, a) = if e > 0 {
                    (&mut num_factors, e)
                } else {
                    (&mut den_factors, -e)
                };
                if a == 1 {
                    list.push(base);
                } else {
                    list.push(format!("({base})^{{{a}}}"));
                }
            }
            let numer = c.numer().magnitude().to_string();
            let denom = c.denom().to_string();
            if den_factors.is_empty() && c.denom().is_one() {
                if numer != "1" || num_factors.is_empty() {
                    num_factors.insert(0, numer);
                }
                out.push_str(&num_factors.join(" "));
            } else {
                if numer != "1" || num_factors.is_empty() {
                    num_factors.insert(0, numer);
                }
                if denom != "1" {
                    den_factors.insert(0, denom);
                }
                if den_factors.is_empty() {
                    out.push_str(&num_factors.join(" "));
                } else {
                    out.push_str(&format!(
                        "\\frac{{{}}}{{{}}}",
                        num_factors.join(" "),
                        den_factors.join(" ")
                    ));
                }
            }
        }
        out
    }
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            let c = c.abs();
            if m.is_one() {
                write!(f, "{c}")?;
            } else if c.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{c} * {m}")?;
            }
        }
        Ok(())
    }
}

impl std::ops::Add for &DiffPoly {
    type Output = DiffPoly;
    fn add(self, rhs: &DiffPoly) -> DiffPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl std::ops::Sub for &DiffPoly {
    type Output = DiffPoly;
    fn sub(self, rhs: &DiffPoly) -> DiffPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl std::ops::Neg for &DiffPoly {
    type Output = DiffPoly;
    fn neg(self) -> DiffPoly {
        DiffPoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect() }
    }
}

impl std::ops::Mul for &DiffPoly {
    type Output = DiffPoly;
    fn mul(self, rhs: &DiffPoly) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl std::ops::Add for DiffPoly {
    type Output = DiffPoly;
    fn add(self, rhs: DiffPoly) -> DiffPoly {
        &self + &rhs
    }
}

impl std::ops::Sub for DiffPoly {
    type Output = DiffPoly;
    fn sub(self, rhs: DiffPoly) -> DiffPoly {
        &self - &rhs
    }
}

impl std::iter::Sum for DiffPoly {
    fn sum<I: Iterator<Item = DiffPoly>>(iter: I) -> DiffPoly {
        let mut acc = DiffPoly::zero();
        for p in iter {
            for (m, c) in p.terms {
                acc.add_term(m, c);
            }
        }
        acc
    }
}

/// Quotient of differential polynomials. No reduction is performed;
/// equality is by cross-multiplication.
#[derive(Clone, Debug)]
pub struct DiffFrac {
    num: DiffPoly,
    den: DiffPoly,
}

impl DiffFrac {
    pub fn new(num: DiffPoly, den: DiffPoly) -> Result<Self, DiffPolyError> {
        if den.is_zero() {
            return Err(DiffPolyError::ZeroDenominator);
        }
        Ok(DiffFrac { num, den })
    }

    pub fn from_poly(p: DiffPoly) -> Self {
        DiffFrac { num: p, den: DiffPoly::one() }
    }

    pub fn zero() -> Self {
        DiffFrac::from_poly(DiffPoly::zero())
    }

    pub fn num(&self) -> &DiffPoly {
        &self.num
    }

    pub fn den(&self) -> &DiffPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, rhs: &DiffFrac) -> DiffFrac {
        DiffFrac {
            num: &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            den: &self.den * &rhs.den,
        }
    }

    pub fn sub(&self, rhs: &DiffFrac) -> DiffFrac {
        DiffFrac {
            num: &(&self.num * &rhs.den) - &(&rhs.num * &self.den),
            den: &self.den * &rhs.den,
        }
    }

    pub fn mul(&self, rhs: &DiffFrac) -> DiffFrac {
        DiffFrac { num: &self.num * &rhs.num, den: &self.den * &rhs.den }
    }

    pub fn neg(&self) -> DiffFrac {
        DiffFrac { num: -&self.num, den: self.den.clone() }
    }

    pub fn scale(&self, c: &Rational) -> DiffFrac {
        DiffFrac { num: self.num.scale(c), den: self.den.clone() }
    }

    pub fn dx(&self) -> DiffFrac {
        DiffFrac {
            num: &(&self.num.dx() * &self.den) - &(&self.num * &self.den.dx()),
            den: &self.den * &self.den,
        }
    }

    pub fn partial(&self, v: JetVar) -> DiffFrac {
        DiffFrac {
            num: &(&self.num.partial(v) * &self.den) - &(&self.num * &self.den.partial(v)),
            den: &self.den * &self.den,
        }
    }

    /// Equality of the represented fractions: `n₁ d₂ == n₂ d₁`.
    pub fn equivalent(&self, rhs: &DiffFrac) -> bool {
        &self.num * &rhs.den == &rhs.num * &self.den
    }

    pub fn eval_at(&self, assignment: &BTreeMap<JetVar, Rational>) -> Result<Rational, DiffPolyError> {
        let d = self.den.eval_at(assignment)?;
        if d.is_zero() {
            return Err(DiffPolyError::Singular);
        }
        Ok(self.num.eval_at(assignment)? / d)
    }
}

impl fmt::Display for DiffFrac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == DiffPoly::one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}
