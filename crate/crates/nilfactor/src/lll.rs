//! Exact lattice basis reduction (LLL with δ = 3/4) over big rationals.
//!
//! Used to steer the search for small frequency vectors when the exhaustive
//! box would be too large: the reduced basis of a suitably scaled lattice
//! points at integer combinations whose phases are near-integral.  All
//! arithmetic is exact, so the reduction itself can never introduce
//! numerical error; quality of the output only affects search effort.

use crate::scalar::Rat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(x, y)| x * y).fold(Rat::zero(), |s, v| s + v)
}

fn sub_scaled(a: &mut [Rat], b: &[Rat], c: &Rat) {
    for (x, y) in a.iter_mut().zip(b) {
        *x -= c * y;
    }
}

fn round_rat(r: &Rat) -> BigInt {
    let two = BigInt::from(2);
    let num = r.numer() * &two + r.denom();
    let den = r.denom() * &two;
    num.div_floor(&den)
}

/// LLL-reduce the rows of `basis` (must be linearly independent) with
/// δ = 3/4.  Returns the reduced rows; the spanned lattice is unchanged.
pub fn lll_reduce(mut basis: Vec<Vec<Rat>>) -> Vec<Vec<Rat>> {
    let n = basis.len();
    if n == 0 {
        return basis;
    }
    let delta = Rat::new(BigInt::from(3), BigInt::from(4));

    // Gram-Schmidt data, recomputed incrementally
    let mut ortho: Vec<Vec<Rat>> = Vec::new();
    let mut mu: Vec<Vec<Rat>> = vec![vec![Rat::zero(); n]; n];
    let mut norms: Vec<Rat> = vec![Rat::zero(); n];

    let gs = |basis: &Vec<Vec<Rat>>,
              ortho: &mut Vec<Vec<Rat>>,
              mu: &mut Vec<Vec<Rat>>,
              norms: &mut Vec<Rat>| {
        ortho.clear();
        for i in 0..basis.len() {
            let mut v = basis[i].clone();
            for j in 0..i {
                let m = if norms[j].is_zero() {
                    Rat::zero()
                } else {
                    dot(&basis[i], &ortho[j]) / &norms[j]
                };
                mu[i][j] = m.clone();
                sub_scaled(&mut v, &ortho[j], &m);
            }
            norms[i] = dot(&v, &v);
            ortho.push(v);
        }
    };

    gs(&basis, &mut ortho, &mut mu, &mut norms);
    let mut k = 1usize;
    while k < n {
        // size reduction
        for j in (0..k).rev() {
            let r = round_rat(&mu[k][j]);
            if !r.is_zero() {
                let c = Rat::from(r);
                let bj = basis[j].clone();
                sub_scaled(&mut basis[k], &bj, &c);
                gs(&basis, &mut ortho, &mut mu, &mut norms);
            }
        }
        // Lovász condition
        let lhs = norms[k].clone();
        let rhs = (&delta - &(&mu[k][k - 1] * &mu[k][k - 1])) * &norms[k - 1];
        if lhs >= rhs {
            k += 1;
        } else {
            basis.swap(k, k - 1);
            gs(&basis, &mut ortho, &mut mu, &mut norms);
            k = k.max(2) - 1;
        }
    }
    basis
}

/// Convenience: reduce an integer basis, returning integer rows.
pub fn lll_reduce_int(basis: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let rat: Vec<Vec<Rat>> = basis
        .iter()
        .map(|row| row.iter().map(|x| Rat::from(x.clone())).collect())
        .collect();
    lll_reduce(rat)
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|x| {
                    debug_assert!(x.is_integer());
                    x.to_integer()
                })
                .collect()
        })
        .collect()
}

/// Squared euclidean norm of an integer vector.
pub fn norm2_int(v: &[BigInt]) -> BigInt {
    v.iter().map(|x| x * x).sum()
}
