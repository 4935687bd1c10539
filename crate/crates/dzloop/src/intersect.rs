//! Independent oracle for psi-class intersection numbers
//! `⟨τ_{k₁}⋯τ_{kₙ}⟩_g` on the moduli of stable curves.
//!
//! Computed from first principles by the Dijkgraaf–Verlinde–Verlinde
//! recursion, with the string and dilaton equations as reductions and
//! `⟨τ₀³⟩₀ = 1`, `⟨τ₁⟩₁ = 1/24` as seeds. This module deliberately knows
//! nothing about the loop equation: cross-checking its values against the
//! loop-equation solver is one of the acceptance gates.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::rational::{odd_double_factorial, rat_int, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unstable moduli space: genus {genus} with {n} marked points")]
pub struct UnstableError {
    pub genus: u32,
    pub n: usize,
}

/// A bare correlator request: genus plus the multiset of psi exponents.
/// The list order never matters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TauSpec {
    pub genus: u32,
    ks: Vec<u32>,
}

impl TauSpec {
    pub fn new(genus: u32, ks: impl IntoIterator<Item = u32>) -> Self {
        let mut ks: Vec<u32> = ks.into_iter().collect();
        ks.sort_unstable();
        TauSpec { genus, ks }
    }

    pub fn ks(&self) -> &[u32] {
        &self.ks
    }

    pub fn n(&self) -> usize {
        self.ks.len()
    }

    pub fn is_stable(&self) -> bool {
        2 * self.genus as i64 - 2 + self.n() as i64 > 0
    }

    /// The dimension constraint `Σkᵢ = 3g - 3 + n`; everything else is 0.
    pub fn dimension_ok(&self) -> bool {
        let total: i64 = self.ks.iter().map(|&k| k as i64).sum();
        total == 3 * self.genus as i64 - 3 + self.n() as i64
    }
}

/// Memoized intersection-number table. One table per worker; methods take
/// `&mut self` and the table is cheap to clone around.
#[derive(Debug, Clone, Default)]
pub struct IntersectionTable {
    memo: HashMap<TauSpec, Rational>,
}

impl IntersectionTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// `⟨τ_{k₁}⋯τ_{kₙ}⟩_g`, exactly. Errors on an unstable `(g, n)` input;
    /// inside the recursion unstable terms simply contribute zero.
    pub fn value(&mut self, genus: u32, ks: &[u32]) -> Result<Rational, UnstableError> {
        let spec = TauSpec::new(genus, ks.iter().copied());
        if !spec.is_stable() {
            return Err(UnstableError { genus, n: spec.n() });
        }
        Ok(self.stable_value(&spec))
    }

    /// Iterators over the table for cache persistence.
    pub fn entries(&self) -> impl Iterator<Item = (&TauSpec, &Rational)> {
        self.memo.iter()
    }

    pub fn preload(&mut self, spec: TauSpec, value: Rational) {
        self.memo.insert(spec, value);
    }

    fn lookup(&mut self, genus: u32, ks: impl IntoIterator<Item = u32>) -> Rational {
        let spec = TauSpec::new(genus, ks);
        if !spec.is_stable() {
            return Rational::zero();
        }
        self.stable_value(&spec)
    }

    fn stable_value(&mut self, spec: &TauSpec) -> Rational {
        if !spec.dimension_ok() {
            return Rational::zero();
        }
        if let Some(v) = self.memo.get(spec) {
            return v.clone();
        }
        let v = self.compute(spec);
        self.memo.insert(spec.clone(), v.clone());
        v
    }

    fn compute(&mut self, spec: &TauSpec) -> Rational {
        let g = spec.genus;
        let ks = &spec.ks;
        // Seeds.
        if g == 0 && ks.as_slice() == [0, 0, 0] {
            return rat_int(1);
        }
        if g == 1 && ks.as_slice() == [1] {
            return crate::rational::rat(1, 24);
        }
        // String equation: remove one τ₀, lower one other exponent.
        if ks.first() == Some(&0) {
            let rest = &ks[1..];
            let mut acc = Rational::zero();
            for (j, &kj) in rest.iter().enumerate() {
                if kj >= 1 {
                    let child: Vec<u32> = rest
                        .iter()
                        .enumerate()
                        .map(|(i, &k)| if i == j { k - 1 } else { k })
                        .collect();
                    acc += self.lookup(g, child);
                }
            }
            return acc;
        }
        // Dilaton equation: remove one τ₁, multiply by 2g - 2 + n.
        if ks.first() == Some(&1) {
            let rest: Vec<u32> = ks[1..].to_vec();
            let factor = rat_int(2 * g as i64 - 2 + rest.len() as i64);
            return factor * self.lookup(g, rest);
        }
        // All exponents ≥ 2: one step of the DVV recursion on the largest.
        let m = (ks[ks.len() - 1] - 1) as i64;
        let rest: Vec<u32> = ks[..ks.len() - 1].to_vec();
        let mut acc = Rational::zero();
        for (j, &kj) in rest.iter().enumerate() {
            let merged: Vec<u32> = rest
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, &k)| k)
                .chain(std::iter::once(kj + m as u32))
                .collect();
            let num = odd_double_factorial(2 * kj as i64 + 2 * m + 1);
            let den = odd_double_factorial(2 * kj as i64 - 1);
            acc += Rational::new(num, den) * self.lookup(g, merged);
        }
        for a in 0..=(m - 1) {
            let b = m - 1 - a;
            let weight = Rational::new(
                odd_double_factorial(2 * a + 1) * odd_double_factorial(2 * b + 1),
                BigInt::from(2),
            );
            // Nonseparating boundary: genus drops by one.
            if g >= 1 {
                let child: Vec<u32> = rest
                    .iter()
                    .copied()
                    .chain([a as u32, b as u32])
                    .collect();
                acc += &weight * self.lookup(g - 1, child);
            }
            // Separating boundary: split genus and the remaining insertions.
            for g1 in 0..=g {
                let g2 = g - g1;
                for mask in 0..(1u32 << rest.len()) {
                    let side_i: Vec<u32> = (0..rest.len())
                        .filter(|&i| mask & (1 << i) != 0)
                        .map(|i| rest[i])
                        .chain(std::iter::once(a as u32))
                        .collect();
                    let side_j: Vec<u32> = (0..rest.len())
                        .filter(|&i| mask & (1 << i) == 0)
                        .map(|i| rest[i])
                        .chain(std::iter::once(b as u32))
                        .collect();
                    let left = self.lookup(g1, side_i);
                    if left.is_zero() {
                        continue;
                    }
                    acc += &weight * left * self.lookup(g2, side_j);
                }
            }
        }
        acc / Rational::from(odd_double_factorial(2 * m + 3))
    }
}

/// Convenience wrapper for one-off queries.
pub fn intersection_number(genus: u32, ks: &[u32]) -> Result<Rational, UnstableError> {
    IntersectionTable::new().value(genus, ks)
}
