//! Universal identities between tree operators, free energies, and
//! genus-0 correlators, checked exactly.
//!
//! The central statement: applying a tree operator with insertion levels
//! summing to `3g - 3 + n` to the genus-`g` free energy yields a closed
//! contraction of three-point functions, weighted by one rational number
//! from the loop-equation solution. Around it sit the genus-1 identity
//! for the refined operators, its single-operator generalization to
//! higher genus, and the genus-2 pair identity with the `29/5760` weight.
//! Every check returns an [`IdentityReport`] with both sides rendered and
//! the first differing monomial on failure.

use num_traits::Zero;

use crate::diffpoly::{jet, DiffFrac, DiffPoly};
use crate::frobenius::FrobeniusModel;
use crate::intersect::intersection_number;
use crate::kdv::{KdVTable, Partition};
use crate::linalg::det_adjugate;
use crate::operators::{a_operator_action, tree_operator_action, OpCtx, OperatorError};
use crate::rational::{rat, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    /// Exact free energies above genus 1 exist only on the one-dimensional
    /// model, where the loop equation provides them.
    #[error("free energy unavailable: genus {genus} needs the one-dimensional model")]
    FreeEnergyUnavailable { genus: u32 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Outcome of one identity check. Equality is exact: for polynomial sides
/// the difference must vanish term by term, for fractions the
/// cross-multiplied difference must.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityReport {
    pub name: String,
    pub params: String,
    pub lhs: String,
    pub rhs: String,
    pub equal: bool,
    /// First differing monomial of the (cross-multiplied) difference.
    pub witness: Option<String>,
}

/// Whether the loop-equation free energies apply to this model: they
/// describe the model with potential `v³/6` exactly, so the dimension
/// must be one and the metric unscaled.
pub fn has_kdv_free_energies(model: &FrobeniusModel) -> bool {
    model.dimension() == 1 && *model.eta(1, 1) == rat(1, 1)
}

fn report_polys(name: &str, params: String, lhs: &DiffPoly, rhs: &DiffPoly) -> IdentityReport {
    let diff = lhs - rhs;
    IdentityReport {
        name: name.to_string(),
        params,
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        equal: diff.is_zero(),
        witness: diff
            .first_term()
            .map(|(m, c)| DiffPoly::monomial(m.clone(), c.clone()).to_string()),
    }
}

fn report_fracs(name: &str, params: String, lhs: &DiffFrac, rhs: &DiffFrac) -> IdentityReport {
    let diff = &(lhs.num() * rhs.den()) - &(rhs.num() * lhs.den());
    IdentityReport {
        name: name.to_string(),
        params,
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        equal: diff.is_zero(),
        witness: diff
            .first_term()
            .map(|(m, c)| DiffPoly::monomial(m.clone(), c.clone()).to_string()),
    }
}

/// The once-contracted square of three-point functions,
/// `M^α_β = ⟨⟨τ^α_0 τ_{λ,0} τ_{μ,0}⟩⟩ ⟨⟨τ^λ_0 τ^μ_0 τ_{β,0}⟩⟩`,
/// raised to the `(g-1)`-th power; genus 1 gives the identity matrix. On
/// the one-dimensional model this is multiplication by `(v^{1,1})^{2g-2}`.
pub fn mg_matrix(ctx: &OpCtx, g: u32) -> Vec<Vec<DiffPoly>> {
    assert!(g >= 1, "the matrix tower starts at genus 1");
    let dim = ctx.model().dimension();
    let identity: Vec<Vec<DiffPoly>> = (0..dim)
        .map(|r| {
            (0..dim)
                .map(|c| if r == c { DiffPoly::one() } else { DiffPoly::zero() })
                .collect()
        })
        .collect();
    if g == 1 {
        return identity;
    }
    let base = base_m_matrix(ctx);
    let mut out = base.clone();
    for _ in 2..g {
        out = mat_mul(&out, &base);
    }
    out
}

fn base_m_matrix(ctx: &OpCtx) -> Vec<Vec<DiffPoly>> {
    let model = ctx.model();
    let dim = model.dimension() as u8;
    let mctx = ctx.model_ctx();
    let mut out = vec![vec![DiffPoly::zero(); dim as usize]; dim as usize];
    for a in 1..=dim {
        for b in 1..=dim {
            let mut acc = DiffPoly::zero();
            for lam in 1..=dim {
                for mu in 1..=dim {
                    let mut first = DiffPoly::zero();
                    for nu in 1..=dim {
                        let e = model.eta_inv(a, nu);
                        if !e.is_zero() {
                            first = first + mctx.correlator(&[(nu, 0), (lam, 0), (mu, 0)]).scale(e);
                        }
                    }
                    if first.is_zero() {
                        continue;
                    }
                    let mut second = DiffPoly::zero();
                    for rho in 1..=dim {
                        for sig in 1..=dim {
                            let e = model.eta_inv(lam, rho) * model.eta_inv(mu, sig);
                            if !e.is_zero() {
                                second = second
                                    + mctx.correlator(&[(rho, 0), (sig, 0), (b, 0)]).scale(&e);
                            }
                        }
                    }
                    acc = acc + &first * &second;
                }
            }
            out[a as usize - 1][b as usize - 1] = acc;
        }
    }
    out
}

fn mat_mul(a: &[Vec<DiffPoly>], b: &[Vec<DiffPoly>]) -> Vec<Vec<DiffPoly>> {
    let n = a.len();
    let mut out = vec![vec![DiffPoly::zero(); n]; n];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            for k in 0..n {
                *entry = &*entry + &(&a[r][k] * &b[k][c]);
            }
        }
    }
    out
}

/// Determinant of the jet-linear structure matrix `c_{αβγ} v^{γ,1}`. The
/// genus-1 free energy is `(1/24) log` of it, up to a function of the
/// flat coordinates that every operator here annihilates.
pub fn structure_determinant(model: &FrobeniusModel) -> DiffPoly {
    let dim = model.dimension() as u8;
    let mut m = vec![vec![DiffPoly::zero(); dim as usize]; dim as usize];
    for a in 1..=dim {
        for b in 1..=dim {
            let mut acc = DiffPoly::zero();
            for g in 1..=dim {
                acc = acc + model.c_lower(a, b, g) * &DiffPoly::var(jet(g, 1));
            }
            m[a as usize - 1][b as usize - 1] = acc;
        }
    }
    det_adjugate(&m).0
}

/// The transfer contraction on the right side of the universal identity:
/// `Σ_{γ₀..γₙ} M[g]^{γ₀}_{γₙ} ∏ᵢ ⟨⟨τ_{αᵢ,0} τ_{γ_{i-1},0} τ^{γᵢ}_0⟩⟩`.
fn universal_rhs(ctx: &OpCtx, g: u32, pairs: &[(u8, u32)]) -> DiffPoly {
    let dim = ctx.model().dimension() as u8;
    let mctx = ctx.model_ctx();
    let mg = mg_matrix(ctx, g);
    let mut out = DiffPoly::zero();
    for g0 in 1..=dim {
        let mut w: Vec<DiffPoly> = (1..=dim)
            .map(|x| if x == g0 { DiffPoly::one() } else { DiffPoly::zero() })
            .collect();
        for &(alpha, _) in pairs {
            w = (1..=dim)
                .map(|gi| {
                    let mut acc = DiffPoly::zero();
                    for prev in 1..=dim {
                        if w[prev as usize - 1].is_zero() {
                            continue;
                        }
                        for mu in 1..=dim {
                            let e = ctx.model().eta_inv(gi, mu);
                            if !e.is_zero() {
                                let link = mctx.correlator(&[(alpha, 0), (prev, 0), (mu, 0)]);
                                acc = acc + (&w[prev as usize - 1] * &link).scale(e);
                            }
                        }
                    }
                    acc
                })
                .collect();
        }
        for gn in 1..=dim {
            out = out + &mg[g0 as usize - 1][gn as usize - 1] * &w[gn as usize - 1];
        }
    }
    out
}

fn index_list<T: std::fmt::Display>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Checks the universal identity: the tree operator with insertions
/// `(αᵢ, kᵢ)` applied to the genus-`g` free energy equals the closed
/// transfer contraction, weighted by `|Aut(μ)| C_{g;μ}`. Admissible input
/// is genus 1 with the single level-1 insertion, or genus at least 2 with
/// all levels at least 2 summing to `3g - 3 + n`. Above genus 1 the free
/// energy only exists on the one-dimensional model.
pub fn check_universal(
    ctx: &OpCtx,
    kdv: &KdVTable,
    g: u32,
    mu: &[u32],
    alphas: &[u8],
) -> Result<IdentityReport, IdentityError> {
    let n = mu.len();
    assert_eq!(alphas.len(), n, "one coordinate index per insertion");
    if g == 1 {
        assert!(mu == [1], "genus 1 admits only the single level-1 insertion");
    } else {
        assert!(g >= 2 && mu.iter().all(|&k| k >= 2), "insertion levels must be at least 2");
        assert_eq!(
            mu.iter().sum::<u32>(),
            3 * g - 3 + n as u32,
            "insertion levels must sum to 3g - 3 + n"
        );
    }
    let pairs: Vec<(u8, u32)> = alphas.iter().zip(mu).map(|(&a, &k)| (a, k)).collect();
    let partition = if g == 1 { Partition::genus1() } else { Partition::new(mu.iter().copied()) };
    let coeff = kdv.get(g).coefficient(&partition) * Rational::from(partition.aut_order());
    let rhs = universal_rhs(ctx, g, &pairs).scale(&coeff);
    let params = format!("g={g} mu=({}) alphas=({})", index_list(mu), index_list(alphas));
    if g == 1 {
        let op = ctx.ex_operator(alphas[0], 1);
        assert!(
            op.kills_coordinates(ctx),
            "the operator must annihilate functions of the flat coordinates"
        );
        let d = structure_determinant(ctx.model());
        let num = op.apply(ctx, &d).scale(&rat(1, 24));
        let lhs = DiffFrac::new(num, d).expect("structure determinant vanishes");
        Ok(report_fracs("universal", params, &lhs, &DiffFrac::from_poly(rhs)))
    } else {
        if !has_kdv_free_energies(ctx.model()) {
            return Err(IdentityError::FreeEnergyUnavailable { genus: g });
        }
        let lhs = tree_operator_action(ctx, &pairs, kdv.get(g).realize());
        Ok(report_polys("universal", params, &lhs, &rhs))
    }
}

/// Checks the genus-1 identity for the base refined operator on any
/// model: `A⁰_{α,p}` applied to the genus-1 free energy equals
/// `(1/24) ⟨⟨τ_{α,p-1} τ^β_0 τ_{β,0}⟩⟩` for `p >= 1`.
pub fn check_genus1(ctx: &OpCtx, alpha: u8, p: u32) -> Result<IdentityReport, IdentityError> {
    let op = ctx.refined_operator(0, alpha, p)?;
    assert!(
        op.kills_coordinates(ctx),
        "the operator must annihilate functions of the flat coordinates"
    );
    let dim = ctx.model().dimension() as u8;
    let d = structure_determinant(ctx.model());
    let num = op.apply(ctx, &d).scale(&rat(1, 24));
    let lhs = DiffFrac::new(num, d).expect("structure determinant vanishes");
    let mut rhs = DiffPoly::zero();
    for beta in 1..=dim {
        for mu in 1..=dim {
            let e = ctx.model().eta_inv(beta, mu);
            if !e.is_zero() {
                rhs = rhs + ctx.model_ctx().correlator(&[(alpha, p - 1), (mu, 0), (beta, 0)]).scale(e);
            }
        }
    }
    let rhs = DiffFrac::from_poly(rhs.scale(&rat(1, 24)));
    let params = format!("dim={dim} alpha={alpha} p={p}");
    Ok(report_fracs("genus1", params, &lhs, &rhs))
}

/// Checks the single-operator identity at any genus: `A^{3g-3}_{α,p}`
/// applied to the genus-`g` free energy equals
/// `⟨⟨τ_{α,p-(3g-2)} τ^β_0 τ_{μ,0}⟩⟩ M[g]^μ_β` times the one-point
/// intersection number of the top psi power, for `p >= 3g - 2`. Genus 1
/// reduces to the genus-1 identity; higher genus needs the
/// one-dimensional model.
pub fn check_aop_single(
    ctx: &OpCtx,
    kdv: &KdVTable,
    g: u32,
    alpha: u8,
    p: u32,
) -> Result<IdentityReport, IdentityError> {
    assert!(g >= 1);
    let m = 3 * g - 3;
    let op = ctx.refined_operator(m, alpha, p)?;
    let s = p - (3 * g - 2);
    let dim = ctx.model().dimension() as u8;
    let mg = mg_matrix(ctx, g);
    let psi = intersection_number(g, &[3 * g - 2]).expect("one-point intersection is stable");
    let mut rhs = DiffPoly::zero();
    for beta in 1..=dim {
        for mu in 1..=dim {
            if mg[mu as usize - 1][beta as usize - 1].is_zero() {
                continue;
            }
            let mut corr = DiffPoly::zero();
            for nu in 1..=dim {
                let e = ctx.model().eta_inv(beta, nu);
                if !e.is_zero() {
                    corr = corr + ctx.model_ctx().correlator(&[(alpha, s), (nu, 0), (mu, 0)]).scale(e);
                }
            }
            rhs = rhs + &corr * &mg[mu as usize - 1][beta as usize - 1];
        }
    }
    let rhs = rhs.scale(&psi);
    let params = format!("g={g} alpha={alpha} p={p}");
    if g == 1 {
        assert!(
            op.kills_coordinates(ctx),
            "the operator must annihilate functions of the flat coordinates"
        );
        let d = structure_determinant(ctx.model());
        let num = op.apply(ctx, &d).scale(&rat(1, 24));
        let lhs = DiffFrac::new(num, d).expect("structure determinant vanishes");
        Ok(report_fracs("refined-single", params, &lhs, &DiffFrac::from_poly(rhs)))
    } else {
        if !has_kdv_free_energies(ctx.model()) {
            return Err(IdentityError::FreeEnergyUnavailable { genus: g });
        }
        let lhs = op.apply(ctx, kdv.get(g).realize());
        Ok(report_polys("refined-single", params, &lhs, &rhs))
    }
}

/// Checks the genus-2 pair identity on the one-dimensional model:
/// `A²_{1,p₂} ∘ A¹_{1,p₁}` applied to the genus-2 free energy equals
/// `29/5760` times a double three-point contraction through `M[2]`, for
/// `p₁ >= 2`, `p₂ >= 3`.
pub fn check_a21(
    ctx: &OpCtx,
    kdv: &KdVTable,
    p1: u32,
    p2: u32,
) -> Result<IdentityReport, IdentityError> {
    if !has_kdv_free_energies(ctx.model()) {
        return Err(IdentityError::FreeEnergyUnavailable { genus: 2 });
    }
    let specs = [(2u32, 1u8, p2), (1u32, 1u8, p1)];
    let lhs = a_operator_action(ctx, &specs, kdv.get(2).realize())?;
    let dim = ctx.model().dimension() as u8;
    let mg = mg_matrix(ctx, 2);
    let mctx = ctx.model_ctx();
    let mut rhs = DiffPoly::zero();
    for beta in 1..=dim {
        for mu in 1..=dim {
            for lam in 1..=dim {
                let mut first = DiffPoly::zero();
                for nu in 1..=dim {
                    let e = ctx.model().eta_inv(mu, nu);
                    if !e.is_zero() {
                        first = first + mctx.correlator(&[(1, p1 - 2), (beta, 0), (nu, 0)]).scale(e);
                    }
                }
                if first.is_zero() {
                    continue;
                }
                let mut second = DiffPoly::zero();
                for rho in 1..=dim {
                    let e = ctx.model().eta_inv(beta, rho);
                    if !e.is_zero() {
                        second = second + mctx.correlator(&[(1, p2 - 3), (rho, 0), (lam, 0)]).scale(e);
                    }
                }
                if second.is_zero() {
                    continue;
                }
                rhs = rhs + &(&first * &second) * &mg[lam as usize - 1][mu as usize - 1];
            }
        }
    }
    let rhs = rhs.scale(&rat(29, 5760));
    let params = format!("p1={p1} p2={p2}");
    Ok(report_polys("refined-pair", params, &lhs, &rhs))
}
