//! Exact linear algebra: a fraction-free solver over the rationals and
//! determinant/adjugate for small matrices of differential polynomials.
//!
//! The solver clears denominators row by row and then runs Bareiss
//! (fraction-free) forward elimination with full pivoting, so intermediate
//! entries stay integral and rank deficiency or inconsistency is detected
//! exactly. Overdetermined systems are the normal case here: the loop
//! equation produces many more coefficient equations than unknowns.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::diffpoly::DiffPoly;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinalgError {
    #[error("ragged matrix: row {row} has {got} columns, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("dimension mismatch: {rows} equations but {rhs} right-hand side entries")]
    RhsLen { rows: usize, rhs: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinearSolution {
    Unique(Vec<Rational>),
    Inconsistent,
    /// A particular solution plus a basis of the homogeneous solution space.
    Underdetermined {
        particular: Vec<Rational>,
        nullspace: Vec<Vec<Rational>>,
    },
}

/// Solves `a x = b` exactly. Rows of `a` may be fewer, equal, or more than
/// the number of unknowns; the three outcomes are distinguished exactly.
pub fn solve_linear_exact(
    a: &[Vec<Rational>],
    b: &[Rational],
) -> Result<LinearSolution, LinalgError> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    for (i, row) in a.iter().enumerate() {
        if row.len() != cols {
            return Err(LinalgError::Ragged { row: i, got: row.len(), expected: cols });
        }
    }
    if b.len() != rows {
        return Err(LinalgError::RhsLen { rows, rhs: b.len() });
    }

    // Integer matrix [A | b], each row scaled by the lcm of its denominators.
    let mut m: Vec<Vec<BigInt>> = Vec::with_capacity(rows);
    for (row, rhs) in a.iter().zip(b) {
        let mut lcm = BigInt::one();
        for x in row.iter().chain(std::iter::once(rhs)) {
            lcm = lcm.lcm(x.denom());
        }
        let scaled = |x: &Rational| x.numer() * (&lcm / x.denom());
        let mut out: Vec<BigInt> = row.iter().map(scaled).collect();
        out.push(scaled(rhs));
        m.push(out);
    }

    // Bareiss elimination with full pivoting. `col_of[j]` tracks which
    // original unknown lives in (swapped) column j.
    let mut col_of: Vec<usize> = (0..cols).collect();
    let mut prev = BigInt::one();
    let mut rank = 0;
    for step in 0..rows.min(cols) {
        let mut pivot: Option<(usize, usize, u64)> = None;
        for i in step..rows {
            for j in step..cols {
                if !m[i][j].is_zero() {
                    let bits = m[i][j].bits();
                    if pivot.as_ref().is_none_or(|&(_, _, pb)| bits < pb) {
                        pivot = Some((i, j, bits));
                    }
                }
            }
        }
        let Some((pi, pj, _)) = pivot else { break };
        m.swap(step, pi);
        if pj != step {
            for row in &mut m {
                row.swap(step, pj);
            }
            col_of.swap(step, pj);
        }
        for i in step + 1..rows {
            for j in step + 1..=cols {
                let num = &m[step][step] * &m[i][j] - &m[i][step] * &m[step][j];
                m[i][j] = num / &prev;
            }
            m[i][step] = BigInt::zero();
        }
        prev = m[step][step].clone();
        rank += 1;
    }

    // Rows below the rank are entirely zero on the left; a nonzero right-hand
    // entry there is a contradiction.
    if m.iter().skip(rank).any(|row| !row[cols].is_zero()) {
        return Ok(LinearSolution::Inconsistent);
    }

    // Back-substitution on the permuted triangle. Free variables (permuted
    // positions rank..cols) are prescribed per solve.
    let back_substitute = |free: &dyn Fn(usize) -> Rational, rhs_on: bool| -> Vec<Rational> {
        let mut xp = vec![Rational::zero(); cols];
        for j in rank..cols {
            xp[j] = free(j);
        }
        for j in (0..rank).rev() {
            let mut acc = if rhs_on {
                Rational::from(m[j][cols].clone())
            } else {
                Rational::zero()
            };
            for l in j + 1..cols {
                if !m[j][l].is_zero() && !xp[l].is_zero() {
                    acc -= Rational::from(m[j][l].clone()) * &xp[l];
                }
            }
            xp[j] = acc / Rational::from(m[j][j].clone());
        }
        let mut x = vec![Rational::zero(); cols];
        for (j, xj) in xp.into_iter().enumerate() {
            x[col_of[j]] = xj;
        }
        x
    };

    if rank == cols {
        return Ok(LinearSolution::Unique(back_substitute(&|_| Rational::zero(), true)));
    }
    let particular = back_substitute(&|_| Rational::zero(), true);
    let nullspace = (rank..cols)
        .map(|f| {
            back_substitute(
                &|j| if j == f { Rational::one() } else { Rational::zero() },
                false,
            )
        })
        .collect();
    Ok(LinearSolution::Underdetermined { particular, nullspace })
}

/// Inverse of a square rational matrix, or `None` if singular.
pub fn invert_rational_matrix(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut inv: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&i| !a[i][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] /= &p;
            inv[col][j] /= &p;
        }
        for i in 0..n {
            if i != col && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in 0..n {
                    let d = &f * &a[col][j];
                    a[i][j] -= d;
                    let d = &f * &inv[col][j];
                    inv[i][j] -= d;
                }
            }
        }
    }
    Some(inv)
}

/// Determinant and adjugate of a square matrix of differential polynomials,
/// by cofactor expansion. Intended for the small matrices that arise here
/// (metric contractions, up to 4x4 in tests); `det * Id == m * adj`.
pub fn det_adjugate(m: &[Vec<DiffPoly>]) -> (DiffPoly, Vec<Vec<DiffPoly>>) {
    let n = m.len();
    for row in m {
        assert_eq!(row.len(), n, "det_adjugate: matrix must be square");
    }
    if n == 0 {
        return (DiffPoly::one(), Vec::new());
    }
    let det = det_cofactor(m, &(0..n).collect::<Vec<_>>(), &(0..n).collect::<Vec<_>>());
    // adj[j][i] = (-1)^{i+j} * minor(i, j): cofactor matrix transposed.
    let adj: Vec<Vec<DiffPoly>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
                    let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
                    let minor = det_cofactor(m, &rows, &cols);
                    if (i + j) % 2 == 0 {
                        minor
                    } else {
                        -&minor
                    }
                })
                .collect()
        })
        .collect();
    (det, adj)
}

fn det_cofactor(m: &[Vec<DiffPoly>], rows: &[usize], cols: &[usize]) -> DiffPoly {
    match rows.len() {
        0 => DiffPoly::one(),
        1 => m[rows[0]][cols[0]].clone(),
        _ => {
            let mut acc = DiffPoly::zero();
            let sub_rows = &rows[1..];
            for (k, &c) in cols.iter().enumerate() {
                if m[rows[0]][c].is_zero() {
                    continue;
                }
                let rest: Vec<usize> =
                    cols.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &x)| x).collect();
                let term = &m[rows[0]][c] * &det_cofactor(m, sub_rows, &rest);
                if k % 2 == 0 {
                    acc = &acc + &term;
                } else {
                    acc = &acc - &term;
                }
            }
            acc
        }
    }
}
