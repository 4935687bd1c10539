//! Frobenius manifolds presented by polynomial potentials, and the genus-0
//! correlator engine built on them.
//!
//! A model is a dimension `N` together with a potential `F` in `ℚ[v¹..v^N]`.
//! Its third partials supply the flat pairing `η_{αβ} = ∂₁∂_α∂_β F`, which
//! must be constant and invertible, and the structure constants
//! `c_{αβγ} = ∂_α∂_β∂_γ F`, which must satisfy the
//! Witten–Dijkgraaf–Verlinde–Verlinde associativity equations. On top of a
//! validated model, [`ModelCtx`] caches deformed flat coordinates `θ_{α,p}`,
//! two-point functions `Ω_{α,p;β,q}`, and principal-hierarchy flows
//! `D_{β,q}`, and assembles any genus-0 descendant correlator
//! `⟨⟨τ_{α₁,p₁}…τ_{αₙ,pₙ}⟩⟩` as a differential polynomial.
//!
//! Calibration: every `θ_{α,p}` is normalized to vanish at `v = 0`, and for
//! `p >= 1` to have vanishing gradient there as well. All identities checked
//! elsewhere in the crate compute both sides through the same engine, so
//! they hold for any fixed calibration; this one makes outputs canonical.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use crate::diffpoly::{jet, DiffPoly};
use crate::linalg::invert_rational_matrix;
use crate::rational::Rational;

/// Source text of the bundled one-dimensional model, `F = v³/6`.
pub const POINT_MODEL_SRC: &str = include_str!("../../../models/point.frob");
/// Source text of the bundled A2-type model.
pub const A2_MODEL_SRC: &str = include_str!("../../../models/a2.frob");
/// Source text of the bundled A3-type model.
pub const A3_MODEL_SRC: &str = include_str!("../../../models/a3.frob");

/// Largest dimension the text format accepts. Indices are `u8` and every
/// practical model here has `N <= 3`; the cap just bounds parser output.
const MAX_DIMENSION: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("eta not constant")]
    EtaNotConstant,
    #[error("eta singular")]
    EtaSingular,
    #[error("WDVV violated at ({alpha},{beta},{gamma},{delta})")]
    Wdvv { alpha: u8, beta: u8, gamma: u8, delta: u8 },
}

/// A validated Frobenius manifold chart: dimension, potential, pairing and
/// structure constants. Construction proves `η` constant and invertible and
/// runs the full symbolic associativity check.
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusModel {
    n: usize,
    potential: DiffPoly,
    eta: Vec<Vec<Rational>>,
    eta_inv: Vec<Vec<Rational>>,
    /// `c[α-1][β-1][γ-1] = ∂_α∂_β∂_γ F`, a polynomial in the `v^μ` alone.
    c: Vec<Vec<Vec<DiffPoly>>>,
}

impl FrobeniusModel {
    /// Validates a dimension and potential into a model.
    ///
    /// The potential must be a polynomial in `v[1,0]..v[N,0]`; jet variables
    /// of positive order make no sense here and panic.
    pub fn new(n: usize, potential: DiffPoly) -> Result<Self, ModelError> {
        assert!((1..=MAX_DIMENSION).contains(&n), "dimension out of range");
        for v in potential.vars() {
            assert!(
                v.order == 0 && (v.alpha as usize) <= n,
                "potential variable {v} outside v1..v{n}"
            );
        }

        let idx = |a: usize| jet(a as u8, 0);
        let mut c = vec![vec![vec![DiffPoly::zero(); n]; n]; n];
        for a in 1..=n {
            let pa = potential.partial(idx(a));
            for b in a..=n {
                let pab = pa.partial(idx(b));
                for g in b..=n {
                    let pabg = pab.partial(idx(g));
                    for (x, y, z) in [(a, b, g), (a, g, b), (b, a, g), (b, g, a), (g, a, b), (g, b, a)] {
                        c[x - 1][y - 1][z - 1] = pabg.clone();
                    }
                }
            }
        }

        let mut eta = vec![vec![Rational::zero(); n]; n];
        for a in 1..=n {
            for b in 1..=n {
                let p = &c[0][a - 1][b - 1];
                if !p.vars().is_empty() {
                    return Err(ModelError::EtaNotConstant);
                }
                eta[a - 1][b - 1] = p.constant_term();
            }
        }
        let eta_inv = invert_rational_matrix(&eta).ok_or(ModelError::EtaSingular)?;

        let model = FrobeniusModel { n, potential, eta, eta_inv, c };
        match model.wdvv_witness() {
            None => Ok(model),
            Some((alpha, beta, gamma, delta)) => Err(ModelError::Wdvv { alpha, beta, gamma, delta }),
        }
    }

    /// Parses the text format: statements `N = <int>` and `F = <expr>`
    /// separated by newlines or `;`, comments from `#` to end of line.
    /// Expressions use integers, rationals `a/b`, variables `v1..vN`, the
    /// operators `+ - * / ^` (binding loosest to tightest, `^` taking a
    /// nonnegative integer exponent, `/` a nonzero integer divisor), and
    /// parentheses.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let (n, potential) = parse_model_text(text)?;
        Self::new(n, potential)
    }

    pub fn point() -> Self {
        Self::parse(POINT_MODEL_SRC).expect("bundled point model is valid")
    }

    pub fn a2() -> Self {
        Self::parse(A2_MODEL_SRC).expect("bundled A2 model is valid")
    }

    pub fn a3() -> Self {
        Self::parse(A3_MODEL_SRC).expect("bundled A3 model is valid")
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn potential(&self) -> &DiffPoly {
        &self.potential
    }

    /// `η_{αβ}`; indices 1-based.
    pub fn eta(&self, a: u8, b: u8) -> &Rational {
        &self.eta[a as usize - 1][b as usize - 1]
    }

    /// `η^{αβ}`; indices 1-based.
    pub fn eta_inv(&self, a: u8, b: u8) -> &Rational {
        &self.eta_inv[a as usize - 1][b as usize - 1]
    }

    /// `c_{αβγ} = ∂_α∂_β∂_γ F`; indices 1-based.
    pub fn c_lower(&self, a: u8, b: u8, g: u8) -> &DiffPoly {
        &self.c[a as usize - 1][b as usize - 1][g as usize - 1]
    }

    /// `c^γ_{αβ} = η^{γμ} c_{μαβ}`; indices 1-based.
    pub fn c_upper(&self, g: u8, a: u8, b: u8) -> DiffPoly {
        let mut acc = DiffPoly::zero();
        for mu in 1..=self.n as u8 {
            let w = self.eta_inv(g, mu);
            if !w.is_zero() {
                acc = acc + self.c_lower(mu, a, b).scale(w);
            }
        }
        acc
    }

    /// First quadruple `(α,β,γ,δ)` with
    /// `Σ c_{αβμ}η^{μν}c_{νγδ} != Σ c_{αγμ}η^{μν}c_{νβδ}` in lexicographic
    /// scan order, or `None` when the product is associative. Models built
    /// through [`FrobeniusModel::new`] always return `None`.
    pub fn wdvv_witness(&self) -> Option<(u8, u8, u8, u8)> {
        let n = self.n as u8;
        let side = |a: u8, b: u8, g: u8, d: u8| {
            let mut acc = DiffPoly::zero();
            for mu in 1..=n {
                for nu in 1..=n {
                    let w = self.eta_inv(mu, nu);
                    if w.is_zero() {
                        continue;
                    }
                    acc = acc + (self.c_lower(a, b, mu) * self.c_lower(nu, g, d)).scale(w);
                }
            }
            acc
        };
        for a in 1..=n {
            for b in 1..=n {
                for g in 1..=n {
                    for d in 1..=n {
                        if side(a, b, g, d) != side(a, g, b, d) {
                            return Some((a, b, g, d));
                        }
                    }
                }
            }
        }
        None
    }
}

/// Session-local computation context over one model: memoized `θ_{α,p}`,
/// `Ω_{α,p;β,q}`, flow coefficients, and the correlator engine. Caches are
/// behind `RwLock`s, so a context may be shared across worker threads;
/// concurrent misses at worst duplicate a pure computation.
pub struct ModelCtx {
    model: FrobeniusModel,
    theta: RwLock<HashMap<(u8, u32), Arc<DiffPoly>>>,
    omega: RwLock<HashMap<(u8, u32, u8, u32), Arc<DiffPoly>>>,
    /// `(β,q,s)` maps to the vector `[X^{1,s}, .., X^{N,s}]` of coefficients
    /// of the flow `D_{β,q} = Σ X^{γ,s} ∂/∂v^{γ,s}`.
    flow: RwLock<HashMap<(u8, u32, u16), Arc<Vec<DiffPoly>>>>,
}

impl ModelCtx {
    pub fn new(model: FrobeniusModel) -> Self {
        ModelCtx {
            model,
            theta: RwLock::new(HashMap::new()),
            omega: RwLock::new(HashMap::new()),
            flow: RwLock::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &FrobeniusModel {
        &self.model
    }

    /// Deformed flat coordinate `θ_{α,p}`, a polynomial in `v` alone.
    ///
    /// `θ_{α,0} = η_{αμ}v^μ`; for `p >= 1` the Hessian recursion
    /// `∂_μ∂_ν θ_{α,p} = c^γ_{μν} ∂_γ θ_{α,p-1}` is integrated with the zero
    /// calibration, then the full Hessian identity is re-asserted.
    pub fn theta(&self, alpha: u8, p: u32) -> Arc<DiffPoly> {
        if let Some(hit) = self.theta.read().unwrap().get(&(alpha, p)) {
            return hit.clone();
        }
        let n = self.model.n;
        let value = if p == 0 {
            let mut acc = DiffPoly::zero();
            for mu in 1..=n as u8 {
                acc = acc + DiffPoly::var(jet(mu, 0)).scale(self.model.eta(alpha, mu));
            }
            acc
        } else {
            let prev = self.theta(alpha, p - 1);
            let prev_grad: Vec<DiffPoly> =
                (1..=n as u8).map(|g| prev.partial(jet(g, 0))).collect();
            let hess: Vec<Vec<DiffPoly>> = (1..=n as u8)
                .map(|mu| {
                    (1..=n as u8)
                        .map(|nu| {
                            let mut acc = DiffPoly::zero();
                            for g in 1..=n as u8 {
                                acc = acc
                                    + &self.model.c_upper(g, mu, nu) * &prev_grad[g as usize - 1];
                            }
                            acc
                        })
                        .collect()
                })
                .collect();
            let grad: Vec<DiffPoly> =
                hess.iter().map(|row| staircase_integral(n, row)).collect();
            let value = staircase_integral(n, &grad);
            for mu in 1..=n as u8 {
                for nu in 1..=n as u8 {
                    assert!(
                        value.partial(jet(mu, 0)).partial(jet(nu, 0))
                            == hess[mu as usize - 1][nu as usize - 1],
                        "theta recursion not integrable at (alpha,p)=({alpha},{p})"
                    );
                }
            }
            value
        };
        let arc = Arc::new(value);
        self.theta
            .write()
            .unwrap()
            .entry((alpha, p))
            .or_insert(arc)
            .clone()
    }

    /// Two-point function `Ω_{α,p;β,q} = ⟨⟨τ_{α,p}τ_{β,q}⟩⟩`, a polynomial
    /// in `v` alone. Symmetry in the two slots is a theorem, not an input;
    /// the cache stores each orientation as computed.
    pub fn omega(&self, alpha: u8, p: u32, beta: u8, q: u32) -> Arc<DiffPoly> {
        if let Some(hit) = self.omega.read().unwrap().get(&(alpha, p, beta, q)) {
            return hit.clone();
        }
        let value = if p == 0 {
            self.theta(beta, q + 1).partial(jet(alpha, 0))
        } else {
            let n = self.model.n as u8;
            let ta = self.theta(alpha, p);
            let tb = self.theta(beta, q + 1);
            let mut acc = DiffPoly::zero();
            for mu in 1..=n {
                for nu in 1..=n {
                    let w = self.model.eta_inv(mu, nu);
                    if w.is_zero() {
                        continue;
                    }
                    acc = acc
                        + (&ta.partial(jet(mu, 0)) * &tb.partial(jet(nu, 0))).scale(w);
                }
            }
            &acc - &*self.omega(alpha, p - 1, beta, q + 1)
        };
        let arc = Arc::new(value);
        self.omega
            .write()
            .unwrap()
            .entry((alpha, p, beta, q))
            .or_insert(arc)
            .clone()
    }

    /// Coefficients `[X^{1,s}, .., X^{N,s}]` of the flow
    /// `D_{β,q} = Σ_{γ,s} X^{γ,s} ∂/∂v^{γ,s}`, where
    /// `X^{γ,s} = dx^{s+1}(η^{γμ}∂_μθ_{β,q+1})`.
    pub fn flow_coeffs(&self, beta: u8, q: u32, s: u16) -> Arc<Vec<DiffPoly>> {
        if let Some(hit) = self.flow.read().unwrap().get(&(beta, q, s)) {
            return hit.clone();
        }
        let value: Vec<DiffPoly> = if s == 0 {
            let n = self.model.n as u8;
            let t = self.theta(beta, q + 1);
            (1..=n)
                .map(|g| {
                    let mut acc = DiffPoly::zero();
                    for mu in 1..=n {
                        let w = self.model.eta_inv(g, mu);
                        if !w.is_zero() {
                            acc = acc + t.partial(jet(mu, 0)).scale(w);
                        }
                    }
                    acc.dx()
                })
                .collect()
        } else {
            self.flow_coeffs(beta, q, s - 1).iter().map(DiffPoly::dx).collect()
        };
        let arc = Arc::new(value);
        self.flow
            .write()
            .unwrap()
            .entry((beta, q, s))
            .or_insert(arc)
            .clone()
    }

    /// Applies `D_{β,q}` to a jet polynomial.
    pub fn apply_flow(&self, beta: u8, q: u32, f: &DiffPoly) -> DiffPoly {
        let Some(max_s) = f.max_order() else {
            return DiffPoly::zero();
        };
        let mut out = DiffPoly::zero();
        for s in 0..=max_s {
            let xs = self.flow_coeffs(beta, q, s);
            for g in 1..=self.model.n as u8 {
                let pf = f.partial(jet(g, s));
                if !pf.is_zero() {
                    out = out + &xs[g as usize - 1] * &pf;
                }
            }
        }
        out
    }

    /// Genus-0 descendant correlator `⟨⟨τ_{α₁,p₁}…τ_{αₙ,pₙ}⟩⟩`:
    /// `θ_{α,p+1}` for one insertion, `Ω` for two, and flows applied to an
    /// `Ω` seed from the third on. The result does not depend on insertion
    /// order or on the choice of seed pair.
    pub fn correlator(&self, insertions: &[(u8, u32)]) -> DiffPoly {
        assert!(!insertions.is_empty(), "correlator needs at least one insertion");
        match insertions {
            [(a, p)] => (*self.theta(*a, p + 1)).clone(),
            [(a, p), (b, q), rest @ ..] => {
                let mut acc = (*self.omega(*a, *p, *b, *q)).clone();
                for (g, r) in rest {
                    acc = self.apply_flow(*g, *r, &acc);
                }
                acc
            }
            [] => unreachable!(),
        }
    }
}

/// Integrates a gradient back to a potential along the staircase path
/// through the coordinate axes, normalizing the result to vanish at zero:
/// `f(v) = Σ_ν ∫_0^{v^ν} grad_ν(v¹,..,v^{ν-1},s,0,..,0) ds`.
fn staircase_integral(n: usize, grad: &[DiffPoly]) -> DiffPoly {
    let mut f = DiffPoly::zero();
    for nu in 1..=n as u8 {
        let mut g = grad[nu as usize - 1].clone();
        for later in nu + 1..=n as u8 {
            g = g.set_var_zero(jet(later, 0));
        }
        f = f + g.antiderivative(jet(nu, 0));
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Equals,
    LParen,
    RParen,
    Sep,
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    end: (usize, usize),
}

fn lex(text: &str) -> Result<Lexer, ModelError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let at = (line, col);
        match ch {
            '\n' => {
                toks.push((Tok::Sep, at.0, at.1));
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            ';' => {
                toks.push((Tok::Sep, at.0, at.1));
                chars.next();
                col += 1;
            }
            '0'..='9' => {
                let mut digits = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        digits.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let value = digits.parse::<BigInt>().expect("digit run parses");
                toks.push((Tok::Int(value), at.0, at.1));
            }
            c if c.is_ascii_alphabetic() => {
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() {
                        name.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Ident(name), at.0, at.1));
            }
            _ => {
                let tok = match ch {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '=' => Tok::Equals,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    other => {
                        return Err(ModelError::Parse {
                            line: at.0,
                            col: at.1,
                            msg: format!("unexpected character '{other}'"),
                        })
                    }
                };
                toks.push((tok, at.0, at.1));
                chars.next();
                col += 1;
            }
        }
    }
    Ok(Lexer { toks, end: (line, col) })
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    end: (usize, usize),
    pos: usize,
    n: Option<usize>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|&(_, l, c)| (l, c))
            .unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, ModelError> {
        let (line, col) = self.here();
        Err(ModelError::Parse { line, col, msg: msg.into() })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ModelError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<DiffPoly, ModelError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = acc + self.term()?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<DiffPoly, ModelError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = &acc * &self.factor()?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    match self.bump() {
                        Some(Tok::Int(d)) if !d.is_zero() => {
                            acc = acc.scale(&Rational::new(1.into(), d));
                        }
                        _ => {
                            self.pos = self.pos.saturating_sub(1);
                            return self.fail("divisor must be a nonzero integer literal");
                        }
                    }
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<DiffPoly, ModelError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(-&self.factor()?);
        }
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            match self.bump() {
                Some(Tok::Int(e)) => {
                    let e: u32 = match e.try_into() {
                        Ok(e) if e <= 64 => e,
                        _ => {
                            self.pos -= 1;
                            return self.fail("exponent must be an integer in 0..=64");
                        }
                    };
                    Ok(base.pow(e))
                }
                _ => {
                    self.pos = self.pos.saturating_sub(1);
                    self.fail("exponent must be an integer in 0..=64")
                }
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<DiffPoly, ModelError> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(DiffPoly::constant(Rational::from(v)))
            }
            Some(Tok::Ident(name)) => {
                let n = match self.n {
                    Some(n) => n,
                    None => return self.fail("N must be declared before F"),
                };
                let index = name
                    .strip_prefix('v')
                    .and_then(|d| (!d.is_empty() && d.bytes().all(|b| b.is_ascii_digit())).then_some(d))
                    .and_then(|d| d.parse::<usize>().ok());
                match index {
                    Some(k) if 1 <= k && k <= n => {
                        self.pos += 1;
                        Ok(DiffPoly::var(jet(k as u8, 0)))
                    }
                    Some(k) => self.fail(format!("variable v{k} out of range for N={n}")),
                    None => self.fail(format!("unknown variable {name}")),
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            _ => self.fail("expected a number, variable, or '('"),
        }
    }
}

fn parse_model_text(text: &str) -> Result<(usize, DiffPoly), ModelError> {
    let Lexer { toks, end } = lex(text)?;
    let mut p = Parser { toks, end, pos: 0, n: None };
    let mut potential: Option<DiffPoly> = None;
    loop {
        while p.peek() == Some(&Tok::Sep) {
            p.pos += 1;
        }
        let Some(head) = p.peek().cloned() else { break };
        match head {
            Tok::Ident(name) if name == "N" => {
                if p.n.is_some() {
                    return p.fail("duplicate N statement");
                }
                p.pos += 1;
                p.expect(Tok::Equals, "'='")?;
                match p.bump() {
                    Some(Tok::Int(v)) => {
                        let v: usize = match v.try_into() {
                            Ok(v) if (1..=MAX_DIMENSION).contains(&v) => v,
                            _ => {
                                p.pos -= 1;
                                return p.fail(format!("N must be in 1..={MAX_DIMENSION}"));
                            }
                        };
                        p.n = Some(v);
                    }
                    _ => {
                        p.pos = p.pos.saturating_sub(1);
                        return p.fail("expected an integer dimension");
                    }
                }
            }
            Tok::Ident(name) if name == "F" => {
                if potential.is_some() {
                    return p.fail("duplicate F statement");
                }
                p.pos += 1;
                p.expect(Tok::Equals, "'='")?;
                potential = Some(p.expr()?);
            }
            _ => return p.fail("expected a statement 'N = ...' or 'F = ...'"),
        }
        match p.peek() {
            None | Some(Tok::Sep) => {}
            _ => return p.fail("expected end of statement"),
        }
    }
    let Some(n) = p.n else {
        return p.fail("missing N statement");
    };
    let Some(f) = potential else {
        return p.fail("missing F statement");
    };
    Ok((n, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};
    use proptest::prelude::*;

    fn v(alpha: u8) -> DiffPoly {
        DiffPoly::var(jet(alpha, 0))
    }

    #[test]
    fn point_model_parses() {
        let m = FrobeniusModel::point();
        assert_eq!(m.dimension(), 1);
        assert_eq!(*m.eta(1, 1), rat_int(1));
        assert_eq!(*m.c_lower(1, 1, 1), DiffPoly::one());
        assert_eq!(*m.potential(), v(1).pow(3).scale(&rat(1, 6)));
    }

    #[test]
    fn a2_model_parses() {
        let m = FrobeniusModel::a2();
        assert_eq!(m.dimension(), 2);
        assert_eq!(*m.eta(1, 2), rat_int(1));
        assert_eq!(*m.eta(2, 1), rat_int(1));
        assert_eq!(*m.eta(1, 1), rat_int(0));
        assert_eq!(*m.eta(2, 2), rat_int(0));
        assert!(m.wdvv_witness().is_none());
    }

    #[test]
    fn a3_model_parses() {
        let m = FrobeniusModel::a3();
        assert_eq!(m.dimension(), 3);
        for a in 1..=3u8 {
            for b in 1..=3u8 {
                let want = if a + b == 4 { rat_int(1) } else { rat_int(0) };
                assert_eq!(*m.eta(a, b), want, "eta({a},{b})");
                assert_eq!(*m.c_lower(1, a, b), DiffPoly::constant(want), "c(1,{a},{b})");
            }
        }
        assert!(m.wdvv_witness().is_none());
    }

    #[test]
    fn eta_must_be_constant() {
        assert_eq!(
            FrobeniusModel::parse("N=2; F = v1^2*v2^2"),
            Err(ModelError::EtaNotConstant),
        );
    }

    #[test]
    fn perturbed_a2_fails_eta_constancy_first() {
        // The cubic-breaking term v1*v2^3 already spoils ∂₁∂₂∂₂F, so the
        // constancy check fires before associativity is ever consulted.
        let r = FrobeniusModel::parse("N=2; F = 1/2*v1^2*v2 + 1/72*v2^4 + v1*v2^3");
        assert_eq!(r, Err(ModelError::EtaNotConstant));
    }

    #[test]
    fn eta_singular_detected() {
        assert_eq!(
            FrobeniusModel::parse("N=2; F = 1/6*v1^3"),
            Err(ModelError::EtaSingular),
        );
    }

    #[test]
    fn wdvv_violation_reports_witness() {
        // Constant invertible eta, broken associativity: the quartic
        // v2^2*v3^2 alone is not a Frobenius potential in three variables.
        let r = FrobeniusModel::parse("N=3; F = 1/2*v1^2*v3 + 1/2*v1*v2^2 + v2^2*v3^2");
        assert_eq!(
            r,
            Err(ModelError::Wdvv { alpha: 2, beta: 2, gamma: 3, delta: 3 }),
        );
    }

    #[test]
    fn parse_errors_carry_positions() {
        let at = |r: Result<FrobeniusModel, ModelError>| match r {
            Err(ModelError::Parse { line, col, msg }) => (line, col, msg),
            other => panic!("expected parse error, got {other:?}"),
        };

        let (l, c, m) = at(FrobeniusModel::parse("N=2; F = v1 + @"));
        assert_eq!((l, c), (1, 15));
        assert!(m.contains("unexpected character"), "{m}");

        let (l, c, m) = at(FrobeniusModel::parse("N=2; F = v3^2"));
        assert_eq!((l, c), (1, 10));
        assert_eq!(m, "variable v3 out of range for N=2");

        let (_, _, m) = at(FrobeniusModel::parse("F = v1^3; N=1"));
        assert_eq!(m, "N must be declared before F");

        let (_, _, m) = at(FrobeniusModel::parse("N=1; F = v1/v1"));
        assert_eq!(m, "divisor must be a nonzero integer literal");

        let (_, _, m) = at(FrobeniusModel::parse("N=1; F = v1^(2)"));
        assert_eq!(m, "exponent must be an integer in 0..=64");

        let (_, _, m) = at(FrobeniusModel::parse("N=1"));
        assert_eq!(m, "missing F statement");

        let (l, _, m) = at(FrobeniusModel::parse("N=1; F = v1^3\nN=2; F = v1"));
        assert_eq!(m, "duplicate N statement");
        assert_eq!(l, 2);
    }

    #[test]
    fn comments_and_layout_are_insignificant() {
        let m = FrobeniusModel::parse("# header\nN = 2\n\nF = 1/2*v1^2*v2 + 1/72*v2^4 # tail\n")
            .unwrap();
        assert_eq!(m.dimension(), 2);
        assert_eq!(m.potential(), FrobeniusModel::a2().potential());
    }

    #[test]
    fn theta_base_is_lowered_coordinate() {
        let ctx = ModelCtx::new(FrobeniusModel::a3());
        for alpha in 1..=3u8 {
            let mut want = DiffPoly::zero();
            for mu in 1..=3u8 {
                want = want + v(mu).scale(ctx.model().eta(alpha, mu));
            }
            assert_eq!(*ctx.theta(alpha, 0), want);
        }
    }

    #[test]
    fn point_theta_closed_form() {
        let ctx = ModelCtx::new(FrobeniusModel::point());
        for p in 0..=6u32 {
            let want = v(1)
                .pow(p + 1)
                .scale(&(rat_int(1) / Rational::from(crate::rational::factorial(p as u64 + 1))));
            assert_eq!(*ctx.theta(1, p), want, "theta p={p}");
        }
    }

    #[test]
    fn theta_one_hessian_matches_structure_constants() {
        for model in [FrobeniusModel::a2(), FrobeniusModel::a3()] {
            let n = model.dimension() as u8;
            let ctx = ModelCtx::new(model);
            for alpha in 1..=n {
                let t = ctx.theta(alpha, 1);
                for mu in 1..=n {
                    for nu in 1..=n {
                        assert_eq!(
                            t.partial(jet(mu, 0)).partial(jet(nu, 0)),
                            *ctx.model().c_lower(mu, nu, alpha),
                        );
                    }
                }
                // These potentials have no affine part in their gradients,
                // so the zero calibration pins theta to the gradient itself.
                assert_eq!(*t, ctx.model().potential().partial(jet(alpha, 0)));
            }
        }
    }

    #[test]
    fn omega_base_is_potential_hessian() {
        for model in [FrobeniusModel::a2(), FrobeniusModel::a3()] {
            let n = model.dimension() as u8;
            let ctx = ModelCtx::new(model);
            for a in 1..=n {
                for b in 1..=n {
                    let want = ctx.model().potential().partial(jet(a, 0)).partial(jet(b, 0));
                    assert_eq!(*ctx.omega(a, 0, b, 0), want, "omega({a},0;{b},0)");
                }
            }
        }
    }

    #[test]
    fn point_omega_closed_form() {
        let ctx = ModelCtx::new(FrobeniusModel::point());
        for p in 0..=4u32 {
            for q in 0..=4u32 {
                let denom = crate::rational::factorial(p as u64)
                    * crate::rational::factorial(q as u64)
                    * num_bigint::BigInt::from(p + q + 1);
                let want = v(1).pow(p + q + 1).scale(&(rat_int(1) / Rational::from(denom)));
                assert_eq!(*ctx.omega(1, p, 1, q), want, "omega(p={p},q={q})");
            }
        }
    }

    #[test]
    fn flow_base_matches_quantum_product() {
        for model in [FrobeniusModel::a2(), FrobeniusModel::a3()] {
            let n = model.dimension() as u8;
            let ctx = ModelCtx::new(model);
            for beta in 1..=n {
                let xs = ctx.flow_coeffs(beta, 0, 0);
                for g in 1..=n {
                    let mut want = DiffPoly::zero();
                    for d in 1..=n {
                        want = want + &ctx.model().c_upper(g, beta, d) * &DiffPoly::var(jet(d, 1));
                    }
                    assert_eq!(xs[g as usize - 1], want, "X^({g},0) for beta={beta}");
                }
            }
        }
    }

    #[test]
    fn unit_flow_is_total_derivative() {
        let ctx = ModelCtx::new(FrobeniusModel::a2());
        let f = &(&v(1).pow(2) * &DiffPoly::var(jet(2, 1))) + &DiffPoly::var(jet(1, 2)).pow(2);
        assert_eq!(ctx.apply_flow(1, 0, &f), f.dx());
    }

    #[test]
    fn point_flow_tower_is_dx_chain() {
        let ctx = ModelCtx::new(FrobeniusModel::point());
        for q in 0..=3u32 {
            let base = ctx.theta(1, q).as_ref().clone();
            for s in 0..=3u16 {
                let want = base.dx_n(s as u32 + 1);
                assert_eq!(ctx.flow_coeffs(1, q, s)[0], want, "q={q} s={s}");
            }
        }
    }

    #[test]
    fn three_point_correlator_formula() {
        let ctx = ModelCtx::new(FrobeniusModel::a2());
        for a in 1..=2u8 {
            for b in 1..=2u8 {
                for g in 1..=2u8 {
                    let got = ctx.correlator(&[(a, 0), (b, 0), (g, 0)]);
                    let mut want = DiffPoly::zero();
                    for mu in 1..=2u8 {
                        for d in 1..=2u8 {
                            want = want
                                + &(ctx.model().c_lower(a, b, mu) * &ctx.model().c_upper(mu, g, d))
                                    * &DiffPoly::var(jet(d, 1));
                        }
                    }
                    assert_eq!(got, want, "correlator({a},{b},{g})");
                }
            }
        }
    }

    #[test]
    fn point_low_correlators() {
        let ctx = ModelCtx::new(FrobeniusModel::point());
        assert_eq!(ctx.correlator(&[(1, 0), (1, 0), (1, 0)]), DiffPoly::var(jet(1, 1)));
        assert_eq!(
            ctx.correlator(&[(1, 0), (1, 0), (1, 0), (1, 0)]),
            DiffPoly::var(jet(1, 2)),
        );
    }

    #[test]
    fn genus_zero_topological_recursion() {
        for model in [FrobeniusModel::point(), FrobeniusModel::a2()] {
            let n = model.dimension() as u8;
            let ctx = ModelCtx::new(model);
            for alpha in 1..=n {
                for p in 1..=3u32 {
                    for b in 1..=n {
                        for g in 1..=n {
                            let lhs = ctx.correlator(&[(alpha, p), (b, 0), (g, 0)]);
                            let mut rhs = DiffPoly::zero();
                            for mu in 1..=n {
                                for nu in 1..=n {
                                    let w = ctx.model().eta_inv(mu, nu);
                                    if w.is_zero() {
                                        continue;
                                    }
                                    rhs = rhs
                                        + (&*ctx.omega(alpha, p - 1, mu, 0)
                                            * &ctx.correlator(&[(nu, 0), (b, 0), (g, 0)]))
                                            .scale(w);
                                }
                            }
                            assert_eq!(lhs, rhs, "TRR at ({alpha},{p};{b};{g})");
                        }
                    }
                }
            }
        }
    }

    fn a2_jet_poly() -> impl Strategy<Value = DiffPoly> {
        proptest::collection::vec(
            (
                proptest::collection::vec((1u8..=2, 0u16..=2, 1i32..=2), 1..=2),
                -3i64..=3,
            ),
            1..=3,
        )
        .prop_map(|terms| {
            let mut acc = DiffPoly::zero();
            for (factors, coeff) in terms {
                let mut m = DiffPoly::constant(rat_int(coeff));
                for (alpha, order, e) in factors {
                    m = &m * &DiffPoly::var(jet(alpha, order)).pow(e as u32);
                }
                acc = acc + m;
            }
            acc
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn omega_is_symmetric(
            a in 1u8..=2, p in 0u32..=3,
            b in 1u8..=2, q in 0u32..=3,
        ) {
            let ctx = ModelCtx::new(FrobeniusModel::a2());
            prop_assert_eq!(
                (*ctx.omega(a, p, b, q)).clone(),
                (*ctx.omega(b, q, a, p)).clone()
            );
        }

        #[test]
        fn flows_commute(
            a in 1u8..=2, p in 0u32..=2,
            b in 1u8..=2, q in 0u32..=2,
            f in a2_jet_poly(),
        ) {
            let ctx = ModelCtx::new(FrobeniusModel::a2());
            let ab = ctx.apply_flow(a, p, &ctx.apply_flow(b, q, &f));
            let ba = ctx.apply_flow(b, q, &ctx.apply_flow(a, p, &f));
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn correlator_order_and_seed_independent(
            ins in proptest::collection::vec((1u8..=2, 0u32..=2), 3..=5),
            seed in any::<u64>(),
        ) {
            let ctx = ModelCtx::new(FrobeniusModel::a2());
            let base = ctx.correlator(&ins);
            let mut shuffled = ins.clone();
            // Cheap deterministic shuffle; the claim is full S_n symmetry.
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s % (i as u64 + 1)) as usize);
            }
            prop_assert_eq!(ctx.correlator(&shuffled), base);
        }

        #[test]
        fn correlator_dx_degree_is_n_minus_2(
            ins in proptest::collection::vec((1u8..=2, 0u32..=2), 2..=5),
        ) {
            let ctx = ModelCtx::new(FrobeniusModel::a2());
            let c = ctx.correlator(&ins);
            if !c.is_zero() {
                let want: std::collections::BTreeSet<i64> =
                    [ins.len() as i64 - 2].into_iter().collect();
                prop_assert_eq!(c.dx_degrees(), want);
            }
        }

        // From two insertions up the unit flow is the total derivative, so
        // appending τ_{1,0} is exactly one dx. A single insertion restricts
        // to θ_{α,p+1}, whose dx has positive differential degree while the
        // two-point function is a function of v alone, so the property
        // genuinely starts at n = 2.
        #[test]
        fn dx_appends_a_unit_insertion(
            ins in proptest::collection::vec((1u8..=2, 0u32..=2), 2..=4),
        ) {
            let ctx = ModelCtx::new(FrobeniusModel::a2());
            let mut extended = ins.clone();
            extended.push((1, 0));
            prop_assert_eq!(ctx.correlator(&ins).dx(), ctx.correlator(&extended));
        }
    }
}
