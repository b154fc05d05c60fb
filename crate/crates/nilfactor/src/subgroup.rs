//! Rational subgroups presented by charts.
//!
//! A chart is an ordered list of lattice directions `w_1, …, w_r` whose
//! ambient coordinate vectors are in echelon position (each direction's
//! first nonzero coordinate — its *pivot* — is strictly later than the
//! previous one's, and a direction is zero before its own pivot).  The chart
//! parametrises the subgroup
//!
//! ```text
//!     G' = { w_1^{t_1} · w_2^{t_2} · … · w_r^{t_r} : t ∈ R^r }
//! ```
//!
//! and its lattice `Γ' = Γ ∩ G'` by integer `t`.  Because corrections in the
//! ambient group law only consume strictly earlier coordinates, the pivot
//! coordinate of `w^t` is exactly `t · w_pivot`; this gives an exact peel
//! procedure recovering `t` from a group element, which is also the
//! membership test.
//!
//! Characters of the chart are integer vectors that annihilate the
//! `t`-coordinates of all pairwise commutators of the basis; their pairing
//! with `t` is then additive, which is re-verified here on random exact
//! points rather than assumed.  Descending a chart along the kernel of a
//! character produces the chart of the annihilated subgroup with the
//! dimension reduced by exactly one.

use crate::group::{FilteredGroup, GroupElement, GroupError, GroupRef};
use crate::polyseq::{newton_forward_coeffs, PolyPhase, PolySequence, SeqError};
use crate::scalar::{Rat, Scalar};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChartError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error("element is not in the chart span: residual coordinate {coord} = {value} after peeling")]
    NotAMember { coord: usize, value: String },
    #[error("chart directions must have strictly increasing pivots")]
    PivotOrder,
    #[error("chart direction {0} is zero")]
    ZeroDirection(usize),
    #[error("one-parameter fit for direction with pivot {pivot} failed up to degree {degree}")]
    OneParamFit { pivot: usize, degree: usize },
    #[error("character {0:?} failed the additivity check")]
    CharacterNotAdditive(Vec<BigInt>),
    #[error("kernel descent expects a nonzero character")]
    ZeroCharacter,
    #[error("lattice spot check failed: integer-exponent product has non-integer t-coordinates")]
    LatticeMismatch,
}

// ---------------------------------------------------------------------------
// integer linear algebra
// ---------------------------------------------------------------------------

/// Content (gcd of entries, nonnegative) of an integer vector.
pub fn content(v: &[BigInt]) -> BigInt {
    let mut g = BigInt::zero();
    for x in v {
        g = g.gcd(x);
    }
    g
}

/// Divide a vector by its content (no-op on the zero vector).
pub fn primitive_part(v: &[BigInt]) -> (BigInt, Vec<BigInt>) {
    let c = content(v);
    if c.is_zero() || c.is_one() {
        return (BigInt::one().max(c.clone()), v.to_vec());
    }
    (c.clone(), v.iter().map(|x| x / &c).collect())
}

/// Coefficients u with ⟨u, v⟩ = gcd(v) (gcd taken nonnegative).
/// Returns None for the zero vector.
pub fn ext_gcd_vec(v: &[BigInt]) -> Option<(BigInt, Vec<BigInt>)> {
    let mut g = BigInt::zero();
    let mut coeffs = vec![BigInt::zero(); v.len()];
    for (i, x) in v.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        if g.is_zero() {
            if x.is_negative() {
                g = -x.clone();
                coeffs[i] = BigInt::from(-1);
            } else {
                g = x.clone();
                coeffs[i] = BigInt::one();
            }
            continue;
        }
        let e = g.extended_gcd(x);
        // e.gcd = e.x * g + e.y * x
        for c in coeffs.iter_mut() {
            *c *= &e.x;
        }
        coeffs[i] = e.y.clone();
        g = e.gcd;
    }
    if g.is_zero() {
        None
    } else {
        Some((g, coeffs))
    }
}

/// Integer kernel basis of a rows×cols matrix: columns U_j of a unimodular
/// transform with (A·U)_j = 0 form a basis of { x ∈ Z^cols : A x = 0 }.
pub fn kernel_basis(rows: &[Vec<BigInt>], cols: usize) -> Vec<Vec<BigInt>> {
    // work on columns of A, tracking the transform in u
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    let mut u: Vec<Vec<BigInt>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect(); // u[j] is the j-th column (as a length-cols vector)
    let nrows = a.len();
    let mut pivot_col = 0usize;
    for r in 0..nrows {
        if pivot_col >= cols {
            break;
        }
        // clear row r across columns pivot_col..cols by gcd column ops
        loop {
            // find column with smallest nonzero |entry| in row r
            let mut best: Option<usize> = None;
            for j in pivot_col..cols {
                if !a[r][j].is_zero()
                    && best.map_or(true, |b| a[r][j].abs() < a[r][b].abs())
                {
                    best = Some(j);
                }
            }
            let Some(b) = best else { break };
            a.iter_mut().for_each(|row| row.swap(pivot_col, b));
            u.swap(pivot_col, b);
            let mut done = true;
            for j in pivot_col + 1..cols {
                if a[r][j].is_zero() {
                    continue;
                }
                let q = div_round(&a[r][j], &a[r][pivot_col]);
                if !q.is_zero() {
                    for row in a.iter_mut() {
                        let s = &row[pivot_col] * &q;
                        row[j] -= s;
                    }
                    let (uc, up);
                    // column op on u: u[j] -= q * u[pivot_col]
                    let qp = q.clone();
                    up = u[pivot_col].clone();
                    uc = u[j]
                        .iter()
                        .zip(&up)
                        .map(|(x, y)| x - &qp * y)
                        .collect::<Vec<_>>();
                    u[j] = uc;
                }
                if !a[r][j].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if !a[r][pivot_col].is_zero() {
            pivot_col += 1;
        }
    }
    // kernel = columns where all rows vanish
    let mut out = Vec::new();
    for j in 0..cols {
        if a.iter().all(|row| row[j].is_zero()) {
            out.push(u[j].clone());
        }
    }
    out
}

/// Rounded integer division (nearest, ties toward zero) used to keep
/// column-reduction entries small.
fn div_round(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_rem(b);
    let r2: BigInt = &r * 2;
    if r2.abs() > b.abs() {
        if (r.is_negative()) == (b.is_negative()) {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

/// Row Hermite normal form of a full-rank-by-rows lattice basis: rows span
/// the same lattice, leading entries positive at strictly increasing column
/// indices, entries above a leading entry reduced modulo it.
pub fn hnf_rows(rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let mut m: Vec<Vec<BigInt>> = rows.iter().filter(|r| !r.iter().all(|x| x.is_zero())).cloned().collect();
    if m.is_empty() {
        return m;
    }
    let cols = m[0].len();
    let mut row = 0usize;
    for col in 0..cols {
        if row >= m.len() {
            break;
        }
        // gcd all entries in this column below `row` into m[row]
        loop {
            let mut best: Option<usize> = None;
            for i in row..m.len() {
                if !m[i][col].is_zero()
                    && best.map_or(true, |b| m[i][col].abs() < m[b][col].abs())
                {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            m.swap(row, b);
            let mut done = true;
            for i in row + 1..m.len() {
                if m[i][col].is_zero() {
                    continue;
                }
                let q = div_round(&m[i][col], &m[row][col]);
                if !q.is_zero() {
                    let base = m[row].clone();
                    for (x, y) in m[i].iter_mut().zip(&base) {
                        *x -= &q * y;
                    }
                }
                if !m[i][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if m[row][col].is_zero() {
            continue;
        }
        if m[row][col].is_negative() {
            for x in m[row].iter_mut() {
                *x = -x.clone();
            }
        }
        // reduce entries above
        let base = m[row].clone();
        for i in 0..row {
            let q = m[i][col].div_floor(&base[col]);
            if !q.is_zero() {
                for (x, y) in m[i].iter_mut().zip(&base) {
                    *x -= &q * y;
                }
            }
        }
        row += 1;
    }
    m.truncate(row);
    m
}

// ---------------------------------------------------------------------------
// one-parameter subgroups
// ---------------------------------------------------------------------------

/// Coordinate polynomials of t ↦ w^t in the binomial basis C(t, j),
/// fitted from integer powers and verified both at fresh integer powers and
/// through the functional equation w^{1/2}·w^{1/2} = w.
#[derive(Clone, Debug)]
pub struct OneParam {
    /// coeffs[i][j]: coefficient of C(t,j) for ambient coordinate i.
    pub coeffs: Vec<Vec<Scalar>>,
}

impl OneParam {
    pub fn eval(&self, t: &Scalar) -> GroupElement {
        let deg = self.coeffs.iter().map(|c| c.len()).max().unwrap_or(0);
        // C(t, j) for j=0..deg
        let mut binom = Vec::with_capacity(deg);
        let mut cur = Scalar::one();
        binom.push(cur.clone());
        for j in 1..deg {
            let factor = t.sub(&Scalar::from_int(j as i64 - 1));
            cur = cur.mul(&factor).div_exact(&Rat::from(BigInt::from(j as i64)));
            binom.push(cur.clone());
        }
        let coords = self
            .coeffs
            .iter()
            .map(|cs| {
                let mut acc = Scalar::zero();
                for (j, c) in cs.iter().enumerate() {
                    if !c.is_exactly_zero() {
                        acc = acc.add(&c.mul(&binom[j]));
                    }
                }
                acc
            })
            .collect();
        GroupElement { coords }
    }
}

/// Fit the one-parameter coordinate polynomials through a lattice direction.
pub fn fit_one_param(group: &FilteredGroup, w: &GroupElement) -> Result<OneParam, ChartError> {
    let pivot = w.coords.iter().position(|c| !c.is_exactly_zero()).unwrap_or(0);
    let mut degree = group.step.max(1) + 1;
    let cap = group.degree * group.step.max(1) + 4;
    loop {
        let mut powers = Vec::with_capacity(degree + 4);
        let mut acc = group.identity();
        powers.push(acc.clone());
        for _ in 0..degree + 3 {
            acc = group.multiply(&acc, w)?;
            powers.push(acc.clone());
        }
        let mut coeffs = Vec::with_capacity(group.dim);
        let mut ok = true;
        for i in 0..group.dim {
            let vals: Vec<Scalar> =
                powers[..=degree].iter().map(|p| p.coords[i].clone()).collect();
            let cs = newton_forward_coeffs(&vals);
            for n in degree + 1..=degree + 3 {
                let predicted = crate::polyseq::eval_binomial_poly(&cs, &BigInt::from(n as i64));
                if !crate::polyseq::scalars_agree(&predicted, &powers[n].coords[i]) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                break;
            }
            coeffs.push(cs);
        }
        if ok {
            let op = OneParam { coeffs };
            // functional-equation oracle: the fitted map must really be a
            // homomorphism of the real line into the group
            let half = op.eval(&Scalar::ratio(1, 2));
            let sq = group.multiply(&half, &half)?;
            let w1 = op.eval(&Scalar::one());
            let s = op.eval(&Scalar::ratio(2, 3));
            let t = op.eval(&Scalar::ratio(5, 7));
            let st = group.multiply(&s, &t)?;
            let direct = op.eval(&Scalar::ratio(2 * 7 + 5 * 3, 21));
            if crate::polyseq::elements_agree(&sq, w)
                && crate::polyseq::elements_agree(&w1, w)
                && crate::polyseq::elements_agree(&st, &direct)
            {
                return Ok(op);
            }
        }
        degree *= 2;
        if degree > cap {
            return Err(ChartError::OneParamFit { pivot, degree: cap });
        }
    }
}

// ---------------------------------------------------------------------------
// charts
// ---------------------------------------------------------------------------

/// One chart direction.
#[derive(Clone, Debug)]
pub struct ChartDir {
    pub elem: GroupElement,
    pub pivot: usize,
    /// Value of the pivot coordinate (exact rational, nonzero).
    pub pivot_value: Rat,
    /// Deepest filtration level whose coordinate set contains the support.
    pub level: usize,
    pub one_param: OneParam,
}

/// A chart for a rational subgroup, including its character lattice.
#[derive(Clone, Debug)]
pub struct Chart {
    pub group: GroupRef,
    pub dirs: Vec<ChartDir>,
    /// Basis (rows) of the integer character lattice on t-coordinates.
    pub char_basis: Vec<Vec<BigInt>>,
    /// Characters were re-verified additive on random exact pairs.
    pub additive_checked: bool,
    /// Structural-zero snaps performed while peeling during construction.
    pub build_snaps: usize,
}

/// Result of a peel: the t-coordinates plus snap bookkeeping.
#[derive(Clone, Debug)]
pub struct TCoords {
    pub t: Vec<Scalar>,
    pub snaps: usize,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    /// The trivial chart of the full group: unit-vector directions.
    pub fn ambient(group: GroupRef) -> Result<Chart, ChartError> {
        let mut dirs = Vec::with_capacity(group.dim);
        for i in 0..group.dim {
            let mut e = group.identity();
            e.coords[i] = Scalar::one();
            let one_param = fit_one_param(&group, &e)?;
            dirs.push(ChartDir {
                elem: e,
                pivot: i,
                pivot_value: Rat::one(),
                level: group.coord_level(i).max(1),
                one_param,
            });
        }
        let mut chart = Chart {
            group,
            dirs,
            char_basis: vec![],
            additive_checked: false,
            build_snaps: 0,
        };
        chart.finish_build(0xC0FFEE)?;
        Ok(chart)
    }

    /// Rebuild a chart from stored direction elements (exact coordinates in
    /// echelon order, e.g. read back from a tree file).  The character
    /// lattice and all verification checks are recomputed, never trusted.
    pub fn from_basis(
        group: GroupRef,
        elems: Vec<GroupElement>,
        seed: u64,
    ) -> Result<Chart, ChartError> {
        let mut dirs = Vec::with_capacity(elems.len());
        let mut last_pivot: Option<usize> = None;
        for (idx, elem) in elems.into_iter().enumerate() {
            let pivot = elem
                .coords
                .iter()
                .position(|c| !c.is_exactly_zero())
                .ok_or(ChartError::ZeroDirection(idx))?;
            if let Some(lp) = last_pivot {
                if pivot <= lp {
                    return Err(ChartError::PivotOrder);
                }
            }
            last_pivot = Some(pivot);
            let pivot_value = match &elem.coords[pivot] {
                Scalar::Exact(r) => r.clone(),
                _ => return Err(ChartError::ZeroDirection(idx)),
            };
            let level = level_of_support(&group, &elem);
            let one_param = fit_one_param(&group, &elem)?;
            dirs.push(ChartDir { elem, pivot, pivot_value, level, one_param });
        }
        let mut chart = Chart {
            group,
            dirs,
            char_basis: vec![],
            additive_checked: false,
            build_snaps: 0,
        };
        chart.finish_build(seed)?;
        Ok(chart)
    }

    /// Compute the character lattice and run the additivity / lattice spot
    /// checks.  Called at the end of every construction path.
    fn finish_build(&mut self, seed: u64) -> Result<(), ChartError> {
        // pivots must be strictly increasing and nonzero directions
        for (idx, d) in self.dirs.iter().enumerate() {
            if d.elem.is_identity() {
                return Err(ChartError::ZeroDirection(idx));
            }
            if idx > 0 && self.dirs[idx - 1].pivot >= d.pivot {
                return Err(ChartError::PivotOrder);
            }
        }
        self.char_basis = self.compute_characters()?;
        self.additive_checked = self.verify_characters(seed)?;
        self.lattice_spot_check(seed ^ 0x5EED)?;
        Ok(())
    }

    /// Characters: integer kernel of the matrix of commutator t-coordinates.
    fn compute_characters(&self) -> Result<Vec<Vec<BigInt>>, ChartError> {
        let r = self.dirs.len();
        if r == 0 {
            return Ok(vec![]);
        }
        let mut rows: Vec<Vec<BigInt>> = Vec::new();
        for i in 0..r {
            for j in i + 1..r {
                let com =
                    self.group.commutator(&self.dirs[i].elem, &self.dirs[j].elem)?;
                if com.is_identity() {
                    continue;
                }
                let t = self.t_coords(&com)?;
                // clear denominators to an integer row
                let denom = t
                    .t
                    .iter()
                    .map(|s| match s {
                        Scalar::Exact(r) => r.denom().clone(),
                        _ => BigInt::one(),
                    })
                    .fold(BigInt::one(), |acc, d| acc.lcm(&d));
                let row: Vec<BigInt> = t
                    .t
                    .iter()
                    .map(|s| match s {
                        Scalar::Exact(r) => r.numer() * (&denom / r.denom()),
                        _ => BigInt::zero(),
                    })
                    .collect();
                if !row.iter().all(|x| x.is_zero()) {
                    rows.push(row);
                }
            }
        }
        let ker = if rows.is_empty() {
            // free: all of Z^r
            (0..r)
                .map(|j| {
                    (0..r)
                        .map(|i| if i == j { BigInt::one() } else { BigInt::zero() })
                        .collect()
                })
                .collect()
        } else {
            kernel_basis(&rows, r)
        };
        Ok(hnf_rows(&ker))
    }

    /// Verify each basis character is additive on random exact points of the
    /// chart span: ⟨λ, t(xy)⟩ = ⟨λ, t(x)⟩ + ⟨λ, t(y)⟩.
    fn verify_characters(&self, seed: u64) -> Result<bool, ChartError> {
        if self.char_basis.is_empty() {
            return Ok(true);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..24 {
            let tx: Vec<Scalar> = (0..self.dim())
                .map(|_| Scalar::ratio(rng.gen_range(-9i64..=9), rng.gen_range(1i64..=4)))
                .collect();
            let ty: Vec<Scalar> = (0..self.dim())
                .map(|_| Scalar::ratio(rng.gen_range(-9i64..=9), rng.gen_range(1i64..=4)))
                .collect();
            let x = self.point(&tx);
            let y = self.point(&ty);
            let xy = self.group.multiply(&x, &y)?;
            let txy = self.t_coords(&xy)?;
            for lam in &self.char_basis {
                let lhs = pair_int(lam, &txy.t);
                let rhs = pair_int(lam, &tx).add(&pair_int(lam, &ty));
                if !crate::polyseq::scalars_agree(&lhs, &rhs) {
                    return Err(ChartError::CharacterNotAdditive(lam.clone()));
                }
            }
        }
        Ok(true)
    }

    /// Random products of directions with integer exponents in shuffled
    /// order are lattice points of the subgroup; their t-coordinates must be
    /// integers for the chart/lattice correspondence to hold.
    fn lattice_spot_check(&self, seed: u64) -> Result<(), ChartError> {
        if self.dirs.is_empty() {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..16 {
            let mut x = self.group.identity();
            for _ in 0..6 {
                let i = rng.gen_range(0..self.dirs.len());
                let e = rng.gen_range(-3i64..=3);
                if e == 0 {
                    continue;
                }
                let p = self.group.power_i64(&self.dirs[i].elem, e)?;
                x = self.group.multiply(&x, &p)?;
            }
            let t = self.t_coords(&x)?;
            if t.t.iter().any(|s| s.as_integer().is_none()) {
                return Err(ChartError::LatticeMismatch);
            }
        }
        Ok(())
    }

    /// Build the chart point with the given t-coordinates.
    pub fn point(&self, t: &[Scalar]) -> GroupElement {
        let mut acc = self.group.identity();
        for (d, ti) in self.dirs.iter().zip(t) {
            if ti.is_exactly_zero() {
                continue;
            }
            let p = d.one_param.eval(ti);
            acc = self.group.multiply(&acc, &p).expect("chart dims fixed");
        }
        acc
    }

    /// Peel the t-coordinates of an element of the subgroup.  Residual
    /// coordinates that are balls straddling zero within the structural
    /// tolerance are snapped (and counted); anything else nonzero is a
    /// membership failure.
    pub fn t_coords(&self, x: &GroupElement) -> Result<TCoords, ChartError> {
        let tol = crate::polyseq::structural_zero_tol();
        let mut snaps = 0usize;
        let mut residual = x.clone();
        let mut t = Vec::with_capacity(self.dirs.len());
        for d in &self.dirs {
            let raw = residual.coords[d.pivot].clone();
            let ti = raw.div_exact(&d.pivot_value);
            let ti = match ti.snap_zero() {
                Some(sn) => {
                    if !ti.is_exactly_zero() {
                        snaps += 1;
                    }
                    sn
                }
                None => ti,
            };
            if !ti.is_exactly_zero() {
                let inv = d.one_param.eval(&ti.neg());
                residual = self.group.multiply(&inv, &residual)?;
            }
            t.push(ti);
        }
        for (i, c) in residual.coords.iter().enumerate() {
            if c.is_exactly_zero() {
                continue;
            }
            if c.contains_zero() && c.rad() <= tol {
                snaps += 1;
                continue;
            }
            return Err(ChartError::NotAMember { coord: i, value: format!("{c}") });
        }
        Ok(TCoords { t, snaps })
    }

    /// Membership test (peel succeeds).
    pub fn contains(&self, x: &GroupElement) -> bool {
        self.t_coords(x).is_ok()
    }

    /// Membership restricted to directions at filtration level >= j
    /// (used for adaptedness of Taylor coefficients).
    pub fn member_at_level(&self, x: &GroupElement, j: usize) -> Result<bool, ChartError> {
        match self.t_coords(x) {
            Err(ChartError::NotAMember { .. }) => Ok(false),
            Err(e) => Err(e),
            Ok(tc) => Ok(tc
                .t
                .iter()
                .zip(&self.dirs)
                .all(|(ti, d)| d.level >= j || ti.is_exactly_zero())),
        }
    }

    /// Pair an integer character with the t-coordinates of an element.
    pub fn character_phase(&self, k: &[BigInt], x: &GroupElement) -> Result<Scalar, ChartError> {
        let tc = self.t_coords(x)?;
        Ok(pair_int(k, &tc.t))
    }

    /// Compose a character with a sequence whose values lie in the chart
    /// span: the phase polynomial with coefficients ⟨k, t(g_j)⟩.
    /// Verified against directly peeled values at a few points.
    pub fn compose_character(
        &self,
        k: &[BigInt],
        seq: &PolySequence,
    ) -> Result<PolyPhase, ChartError> {
        let mut coeffs = Vec::with_capacity(seq.coeffs.len());
        for gj in &seq.coeffs {
            let tc = self.t_coords(gj)?;
            coeffs.push(pair_int(k, &tc.t));
        }
        let phase = PolyPhase { coeffs };
        for n in 0..3i64 {
            let v = seq.evaluate_i64(n)?;
            let direct = self.character_phase(k, &v)?;
            let predicted = phase.evaluate(&BigInt::from(n));
            if !crate::polyseq::scalars_agree(&direct, &predicted) {
                return Err(ChartError::CharacterNotAdditive(k.to_vec()));
            }
        }
        Ok(phase)
    }

    /// Is the integer vector k a character (inside the character lattice)?
    pub fn is_character(&self, k: &[BigInt]) -> bool {
        if k.len() != self.dim() {
            return false;
        }
        // solve over the HNF basis by forward substitution
        let mut rem = k.to_vec();
        for row in &self.char_basis {
            let lead = row.iter().position(|x| !x.is_zero()).unwrap();
            if rem[lead].is_zero() {
                continue;
            }
            let (q, r) = rem[lead].div_rem(&row[lead]);
            if !r.is_zero() {
                return false;
            }
            for (x, y) in rem.iter_mut().zip(row) {
                *x -= &q * y;
            }
        }
        rem.iter().all(|x| x.is_zero())
    }

    /// Direction indices whose filtration level is at least j.
    pub fn dirs_at_level(&self, j: usize) -> BTreeSet<usize> {
        self.dirs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.level >= j)
            .map(|(i, _)| i)
            .collect()
    }

    /// Kernel descent: the chart of { x : ⟨k*, t(x)⟩ = 0 } for a primitive
    /// character k*.  Dimension drops by exactly one.
    pub fn descend(&self, kstar: &[BigInt], seed: u64) -> Result<Chart, ChartError> {
        if kstar.iter().all(|x| x.is_zero()) {
            return Err(ChartError::ZeroCharacter);
        }
        let ker = kernel_basis(&[kstar.to_vec()], self.dim());
        let rows = hnf_rows(&ker);
        // build from the deepest pivot back so earlier directions can be
        // reduced against later ones into canonical position
        let mut new_dirs_rev: Vec<ChartDir> = Vec::with_capacity(rows.len());
        for row in rows.iter().rev() {
            let mut elem = self.group.identity();
            for (i, ui) in row.iter().enumerate() {
                if ui.is_zero() {
                    continue;
                }
                let p = self.group.power(&self.dirs[i].elem, ui)?;
                elem = self.group.multiply(&elem, &p)?;
            }
            // canonicalise: clear pivot coordinates of later directions when
            // the required exponent is integral (keeps the element in Γ)
            for later in new_dirs_rev.iter() {
                let c = &elem.coords[later.pivot];
                if c.is_exactly_zero() {
                    continue;
                }
                if let Scalar::Exact(v) = c {
                    let ratio = v / &later.pivot_value;
                    if ratio.is_integer() {
                        let p = self
                            .group
                            .power(&later.elem, &-ratio.to_integer())?;
                        elem = self.group.multiply(&elem, &p)?;
                    }
                }
            }
            let pivot = elem
                .coords
                .iter()
                .position(|c| !c.is_exactly_zero())
                .ok_or(ChartError::ZeroDirection(new_dirs_rev.len()))?;
            let pivot_value = match &elem.coords[pivot] {
                Scalar::Exact(r) => r.clone(),
                _ => return Err(ChartError::ZeroDirection(new_dirs_rev.len())),
            };
            let level = level_of_support(&self.group, &elem);
            let one_param = fit_one_param(&self.group, &elem)?;
            new_dirs_rev.push(ChartDir { elem, pivot, pivot_value, level, one_param });
        }
        new_dirs_rev.reverse();
        let mut chart = Chart {
            group: self.group.clone(),
            dirs: new_dirs_rev,
            char_basis: vec![],
            additive_checked: false,
            build_snaps: self.build_snaps,
        };
        chart.finish_build(seed)?;
        Ok(chart)
    }

    /// Check a sequence is adapted to the chart: every Taylor coefficient
    /// g_j lies in the span of directions at level >= j (the constant term
    /// only needs plain membership).
    pub fn sequence_adapted(&self, seq: &PolySequence) -> Result<bool, ChartError> {
        for (j, gj) in seq.coeffs.iter().enumerate() {
            if gj.is_identity() {
                continue;
            }
            if j == 0 {
                if !self.contains(gj) {
                    return Ok(false);
                }
                continue;
            }
            if !self.member_at_level(gj, j)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Human-readable summary of the chart basis (element coordinate lists).
    pub fn describe(&self) -> Vec<String> {
        self.dirs.iter().map(|d| format!("{}", d.elem)).collect()
    }
}

/// Deepest filtration level whose coordinate set contains the support.
pub fn level_of_support(group: &FilteredGroup, x: &GroupElement) -> usize {
    let sup = x.support();
    let mut lvl = 0;
    for i in 1..group.filtration.len() {
        if sup.is_subset(&group.filtration[i]) {
            lvl = i;
        }
    }
    lvl
}

/// ⟨k, t⟩ for integer k and scalar t.
pub fn pair_int(k: &[BigInt], t: &[Scalar]) -> Scalar {
    let mut acc = Scalar::zero();
    for (ki, ti) in k.iter().zip(t) {
        if ki.is_zero() {
            continue;
        }
        acc = acc.add(&ti.scale_int(ki));
    }
    acc
}
