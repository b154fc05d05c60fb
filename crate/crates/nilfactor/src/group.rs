//! Filtered nilpotent groups in Mal'cev coordinates of the second kind.
//!
//! A group of dimension `m` is presented by coordinate multiplication rules
//!
//! ```text
//!     (x · y)_i = x_i + y_i + P_i(x_0..x_{i-1}, y_0..y_{i-1})
//! ```
//!
//! where each correction `P_i` is a polynomial with rational coefficients in
//! strictly earlier coordinates only (no constant term).  This unitriangular
//! shape makes the identity the zero vector and lets inverses be solved by
//! back-substitution.  The lattice is `Γ = ℤ^m`; a preset is valid only if the
//! corrections map integer pairs to integers.
//!
//! A filtration `G = G_0 = G_1 ⊇ G_2 ⊇ … ⊇ G_{d+1} = {id}` is carried as the
//! coordinate index set of each subgroup `G_i`.  Polynomial sequences adapted
//! to the filtration live in `polyseq`.

use crate::scalar::{rat_to_f64, Rat, Scalar};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("dimension mismatch: element has {got} coordinates, group has {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("unknown group preset `{0}`")]
    UnknownPreset(String),
    #[error("group law validation failed: {0}")]
    LawValidation(String),
    #[error("filtration invalid: {0}")]
    FiltrationInvalid(String),
    #[error("operation requires exact rational coordinates")]
    NotExact,
    #[error("no power of the element lies in the lattice within bound {0}")]
    HeightOverflow(u64),
    #[error("element is not a member of the claimed span: {0}")]
    NotAMember(String),
    #[error("generated set is not closed under commutators: {0}")]
    ClosureFailure(String),
    #[error("subgroup basis height exceeds bound {0}")]
    BasisHeightOverflow(u64),
    #[error("one-parameter coordinate polynomials failed verification at t={0}")]
    OneParamMismatch(i64),
}

/// One monomial of a correction polynomial: coefficient times a product of
/// x-coordinates and y-coordinates raised to small powers.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coef: Rat,
    pub xexp: Vec<(usize, u32)>,
    pub yexp: Vec<(usize, u32)>,
}

/// Correction polynomial for one coordinate of the product.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoordPoly {
    pub terms: Vec<Monomial>,
}

impl CoordPoly {
    pub fn zero() -> Self {
        CoordPoly { terms: vec![] }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn eval(&self, x: &[Scalar], y: &[Scalar]) -> Scalar {
        let mut acc = Scalar::zero();
        for t in &self.terms {
            let mut v = Scalar::from_rat(t.coef.clone());
            for &(i, e) in &t.xexp {
                for _ in 0..e {
                    v = v.mul(&x[i]);
                }
            }
            for &(j, e) in &t.yexp {
                for _ in 0..e {
                    v = v.mul(&y[j]);
                }
            }
            acc = acc.add(&v);
        }
        acc
    }

    fn max_index(&self) -> Option<usize> {
        self.terms
            .iter()
            .flat_map(|t| t.xexp.iter().chain(t.yexp.iter()).map(|&(i, _)| i))
            .max()
    }
}

/// A group element: a coordinate vector of scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    pub coords: Vec<Scalar>,
}

impl GroupElement {
    pub fn new(coords: Vec<Scalar>) -> Self {
        GroupElement { coords }
    }

    pub fn from_rationals(rs: Vec<Rat>) -> Self {
        GroupElement { coords: rs.into_iter().map(Scalar::from_rat).collect() }
    }

    pub fn from_ints(ns: &[i64]) -> Self {
        GroupElement { coords: ns.iter().map(|&n| Scalar::from_int(n)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(|c| c.is_exactly_zero())
    }

    /// All coordinates exact integers (lattice membership).
    pub fn is_lattice_point(&self) -> bool {
        self.coords.iter().all(|c| c.as_integer().is_some())
    }

    /// All coordinates exact rationals.
    pub fn is_exact(&self) -> bool {
        self.coords.iter().all(|c| c.is_exact())
    }

    /// Coordinate support: indices of coordinates not exactly zero.
    pub fn support(&self) -> BTreeSet<usize> {
        self.coords
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_exactly_zero())
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest denominator among exact coordinates (1 for the identity).
    pub fn max_denominator(&self) -> Option<BigInt> {
        let mut best = BigInt::one();
        for c in &self.coords {
            match c {
                Scalar::Exact(r) => {
                    if r.denom() > &best {
                        best = r.denom().clone();
                    }
                }
                _ => return None,
            }
        }
        Some(best)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A filtered group presentation.
#[derive(Clone, Debug)]
pub struct FilteredGroup {
    pub name: String,
    pub dim: usize,
    /// Filtration degree d (the chain has d+1 proper terms).
    pub degree: usize,
    /// Nilpotency step (1 = abelian).
    pub step: usize,
    /// Rationality height of the presentation (denominator bound of the
    /// correction coefficients and standard generators).
    pub q0: u64,
    /// Correction polynomial per coordinate.
    pub corrections: Vec<CoordPoly>,
    /// Coordinate index set of G_i for i = 1..=degree (index 0 unused, kept
    /// equal to the full set).  G_1 must be the full set.
    pub filtration: Vec<BTreeSet<usize>>,
    /// Coordinates with zero correction polynomial: the abelianised
    /// directions.  Horizontal characters are supported here.
    pub ab_coords: Vec<usize>,
}

pub type GroupRef = Arc<FilteredGroup>;

impl PartialEq for FilteredGroup {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.dim == other.dim
            && self.degree == other.degree
            && self.corrections == other.corrections
    }
}

impl FilteredGroup {
    // -- presets ------------------------------------------------------------

    /// `torus:m` — the abelian group R^m / Z^m, filtration constant at the
    /// full group down to the requested degree.
    pub fn torus(m: usize, degree: usize) -> GroupRef {
        let full: BTreeSet<usize> = (0..m).collect();
        Arc::new(FilteredGroup {
            name: format!("torus:{m}"),
            dim: m,
            degree: degree.max(1),
            step: 1,
            q0: 1,
            corrections: vec![CoordPoly::zero(); m],
            filtration: vec![full.clone(); degree.max(1) + 1],
            ab_coords: (0..m).collect(),
        })
    }

    /// The Heisenberg group: coordinates (a, b, c) with
    /// `(a,b,c)·(a',b',c') = (a+a', b+b', c+c'+a·b')`.
    /// Filtration `G_1 = G`, `G_i = centre` for `2 <= i <= degree`.
    pub fn heisenberg(degree: usize) -> GroupRef {
        let degree = degree.max(2);
        let mut corrections = vec![CoordPoly::zero(), CoordPoly::zero()];
        corrections.push(CoordPoly {
            terms: vec![Monomial { coef: Rat::one(), xexp: vec![(0, 1)], yexp: vec![(1, 1)] }],
        });
        let full: BTreeSet<usize> = (0..3).collect();
        let centre: BTreeSet<usize> = [2].into_iter().collect();
        let mut filtration = vec![full.clone(), full];
        for _ in 2..=degree {
            filtration.push(centre.clone());
        }
        Arc::new(FilteredGroup {
            name: "heisenberg".into(),
            dim: 3,
            degree,
            step: 2,
            q0: 1,
            corrections,
            filtration,
            ab_coords: vec![0, 1],
        })
    }

    /// Direct product of two presentations (block coordinates).
    pub fn product(a: &FilteredGroup, b: &FilteredGroup) -> GroupRef {
        let degree = a.degree.max(b.degree);
        let dim = a.dim + b.dim;
        let mut corrections = a.corrections.clone();
        for p in &b.corrections {
            let shift = |v: &[(usize, u32)]| v.iter().map(|&(i, e)| (i + a.dim, e)).collect();
            corrections.push(CoordPoly {
                terms: p
                    .terms
                    .iter()
                    .map(|t| Monomial {
                        coef: t.coef.clone(),
                        xexp: shift(&t.xexp),
                        yexp: shift(&t.yexp),
                    })
                    .collect(),
            });
        }
        let mut filtration = Vec::with_capacity(degree + 1);
        for i in 0..=degree {
            let mut s: BTreeSet<usize> = BTreeSet::new();
            let ai = i.min(a.filtration.len() - 1);
            let bi = i.min(b.filtration.len() - 1);
            if i < a.filtration.len() || a.filtration.last().map_or(false, |_| false) {
                s.extend(a.filtration.get(ai).into_iter().flatten().copied());
            }
            if i >= a.filtration.len() {
                // a's chain has ended: contributes nothing
                s.retain(|x| *x >= a.dim);
            }
            if i < b.filtration.len() {
                s.extend(b.filtration.get(bi).into_iter().flatten().map(|j| j + a.dim));
            }
            filtration.push(s);
        }
        let mut ab = a.ab_coords.clone();
        ab.extend(b.ab_coords.iter().map(|j| j + a.dim));
        Arc::new(FilteredGroup {
            name: format!("product:{},{}", a.name, b.name),
            dim,
            degree,
            step: a.step.max(b.step),
            q0: a.q0.max(b.q0),
            corrections,
            filtration,
            ab_coords: ab,
        })
    }

    /// The zero-dimensional trivial group (legal everywhere; every operation
    /// on it returns identities).
    pub fn trivial() -> GroupRef {
        Arc::new(FilteredGroup {
            name: "torus:0".into(),
            dim: 0,
            degree: 1,
            step: 1,
            q0: 1,
            corrections: vec![],
            filtration: vec![BTreeSet::new(), BTreeSet::new()],
            ab_coords: vec![],
        })
    }

    /// Parse a preset identifier: `torus:m`, `heisenberg`,
    /// `product:<id>,<id>` (right-associated on the comma list).
    pub fn preset(id: &str, degree: usize) -> Result<GroupRef, GroupError> {
        let id = id.trim();
        if let Some(rest) = id.strip_prefix("torus:") {
            let m: usize = rest
                .parse()
                .map_err(|_| GroupError::UnknownPreset(id.into()))?;
            return Ok(if m == 0 { Self::trivial() } else { Self::torus(m, degree) });
        }
        if id == "heisenberg" {
            return Ok(Self::heisenberg(degree.max(2)));
        }
        if let Some(rest) = id.strip_prefix("product:") {
            let parts = split_product_list(rest);
            if parts.len() < 2 {
                return Err(GroupError::UnknownPreset(id.into()));
            }
            let mut acc = Self::preset(parts[0], degree)?;
            for p in &parts[1..] {
                let next = Self::preset(p, degree)?;
                acc = Self::product(&acc, &next);
            }
            return Ok(acc);
        }
        Err(GroupError::UnknownPreset(id.into()))
    }

    // -- core operations ----------------------------------------------------

    pub fn identity(&self) -> GroupElement {
        GroupElement { coords: vec![Scalar::zero(); self.dim] }
    }

    fn check_dim(&self, a: &GroupElement) -> Result<(), GroupError> {
        if a.dim() != self.dim {
            Err(GroupError::DimensionMismatch { got: a.dim(), want: self.dim })
        } else {
            Ok(())
        }
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let mut out = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut c = a.coords[i].add(&b.coords[i]);
            if !self.corrections[i].is_zero() {
                c = c.add(&self.corrections[i].eval(&a.coords, &b.coords));
            }
            out.push(c);
        }
        Ok(GroupElement { coords: out })
    }

    /// Inverse by back-substitution: solve (a · y) = id coordinate by
    /// coordinate, using that corrections only involve earlier coordinates.
    pub fn invert(&self, a: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check_dim(a)?;
        let mut y = vec![Scalar::zero(); self.dim];
        for i in 0..self.dim {
            let mut c = a.coords[i].neg();
            if !self.corrections[i].is_zero() {
                c = c.sub(&self.corrections[i].eval(&a.coords, &y));
            }
            y[i] = c;
        }
        Ok(GroupElement { coords: y })
    }

    /// Integer power by binary exponentiation (exponent may be any BigInt).
    pub fn power(&self, a: &GroupElement, e: &BigInt) -> Result<GroupElement, GroupError> {
        self.check_dim(a)?;
        let mut base = if e.is_negative() { self.invert(a)? } else { a.clone() };
        let mut k = e.abs().magnitude().clone();
        let mut acc = self.identity();
        while !k.is_zero() {
            if k.bit(0) {
                acc = self.multiply(&acc, &base)?;
            }
            k >>= 1;
            if !k.is_zero() {
                base = self.multiply(&base, &base)?;
            }
        }
        Ok(acc)
    }

    pub fn power_i64(&self, a: &GroupElement, e: i64) -> Result<GroupElement, GroupError> {
        self.power(a, &BigInt::from(e))
    }

    /// Fundamental-domain representative: the unique y with coordinates in
    /// [0, 1) and y = x·γ for some lattice γ.  Computed by ascending floor
    /// peeling — multiplying on the right by a power of the i-th unit vector
    /// normalises coordinate i without disturbing earlier ones.  A ball
    /// coordinate is floored at its midpoint, so representatives straddling
    /// an integer seam are resolved heuristically.
    pub fn reduce_mod_lattice(&self, x: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check_dim(x)?;
        let mut y = x.clone();
        for i in 0..self.dim {
            let f = y.coords[i].mid().floor().to_integer();
            if f.is_zero() {
                continue;
            }
            let mut unit = self.identity();
            unit.coords[i] = Scalar::from_int(1);
            let shift = self.power(&unit, &(-f))?;
            y = self.multiply(&y, &shift)?;
        }
        Ok(y)
    }

    pub fn commutator(
        &self,
        a: &GroupElement,
        b: &GroupElement,
    ) -> Result<GroupElement, GroupError> {
        let ab = self.multiply(a, b)?;
        let ia = self.invert(a)?;
        let ib = self.invert(b)?;
        self.multiply(&self.multiply(&ab, &ia)?, &ib)
    }

    /// Right-invariant coordinate quasi-metric: `|ψ(a · b^{-1})|_∞` as an
    /// upper bound over the scalar enclosures.  Comparable to a word metric
    /// on bounded sets up to a configuration factor; that factor is recorded
    /// by callers in their reports, not baked in here.
    pub fn quasi_metric(&self, a: &GroupElement, b: &GroupElement) -> Result<f64, GroupError> {
        let d = self.multiply(a, &self.invert(b)?)?;
        let mut best = Rat::zero();
        for c in &d.coords {
            let u = c.abs_upper();
            if u > best {
                best = u;
            }
        }
        Ok(rat_to_f64(&best))
    }

    /// Distance from the identity in the same quasi-metric.
    pub fn norm(&self, a: &GroupElement) -> Result<f64, GroupError> {
        self.quasi_metric(a, &self.identity())
    }

    /// Smallest `r <= bound` with `a^r` in the lattice.  Requires exact
    /// coordinates.  This is the rationality height of the point `a·Γ`.
    pub fn rationality_height(&self, a: &GroupElement, bound: u64) -> Result<u64, GroupError> {
        self.check_dim(a)?;
        if !a.is_exact() {
            return Err(GroupError::NotExact);
        }
        let mut acc = self.identity();
        for r in 1..=bound {
            acc = self.multiply(&acc, a)?;
            if acc.is_lattice_point() {
                return Ok(r);
            }
        }
        Err(GroupError::HeightOverflow(bound))
    }

    // -- filtration helpers ---------------------------------------------------

    /// Coordinate set of G_i (empty beyond the chain).
    pub fn filtration_coords(&self, i: usize) -> BTreeSet<usize> {
        if i == 0 {
            return (0..self.dim).collect();
        }
        self.filtration.get(i).cloned().unwrap_or_default()
    }

    /// Deepest filtration index whose coordinate set contains `coord`.
    pub fn coord_level(&self, coord: usize) -> usize {
        let mut lvl = 0;
        for i in 1..self.filtration.len() {
            if self.filtration[i].contains(&coord) {
                lvl = i;
            }
        }
        lvl
    }

    /// Largest Taylor index at which abelianised directions survive:
    /// the maximal degree of any horizontal character phase.
    pub fn ab_degree(&self) -> usize {
        let ab: BTreeSet<usize> = self.ab_coords.iter().copied().collect();
        (1..self.filtration.len())
            .filter(|&i| !self.filtration[i].is_disjoint(&ab))
            .max()
            .unwrap_or(0)
    }

    /// Abelianised part of an element (coordinates along `ab_coords`).
    pub fn ab_part(&self, a: &GroupElement) -> Vec<Scalar> {
        self.ab_coords.iter().map(|&i| a.coords[i].clone()).collect()
    }

    // -- validation -----------------------------------------------------------

    /// Structural and randomized checks of the presentation:
    /// * corrections depend only on earlier coordinates and have no constant
    ///   term (structural);
    /// * the filtration is a nested chain starting at the full set;
    /// * associativity and inverse laws hold on random exact triples;
    /// * integer pairs multiply to integer coordinates (lattice closure);
    /// * commutators of unit generators land inside the expected filtration
    ///   level.
    pub fn validate(&self, seed: u64, triples: usize) -> Result<(), GroupError> {
        // structural
        if self.corrections.len() != self.dim {
            return Err(GroupError::LawValidation("corrections/dim mismatch".into()));
        }
        for (i, p) in self.corrections.iter().enumerate() {
            if let Some(mx) = p.max_index() {
                if mx >= i {
                    return Err(GroupError::LawValidation(format!(
                        "correction of coordinate {i} touches coordinate {mx}"
                    )));
                }
            }
        }
        if self.dim > 0 {
            let full: BTreeSet<usize> = (0..self.dim).collect();
            if self.filtration.len() < 2 || self.filtration[1] != full {
                return Err(GroupError::FiltrationInvalid("G_1 must be the full group".into()));
            }
            for i in 2..self.filtration.len() {
                if !self.filtration[i].is_subset(&self.filtration[i - 1]) {
                    return Err(GroupError::FiltrationInvalid(format!(
                        "G_{i} is not contained in G_{}",
                        i - 1
                    )));
                }
            }
        }
        // randomized laws
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rand_elt = |rng: &mut ChaCha8Rng, int_only: bool| {
            let coords = (0..self.dim)
                .map(|_| {
                    let num = rng.gen_range(-12i64..=12);
                    let den = if int_only { 1 } else { rng.gen_range(1i64..=8) };
                    Scalar::ratio(num, den)
                })
                .collect();
            GroupElement { coords }
        };
        for _ in 0..triples {
            let a = rand_elt(&mut rng, false);
            let b = rand_elt(&mut rng, false);
            let c = rand_elt(&mut rng, false);
            let ab_c = self.multiply(&self.multiply(&a, &b)?, &c)?;
            let a_bc = self.multiply(&a, &self.multiply(&b, &c)?)?;
            if ab_c != a_bc {
                return Err(GroupError::LawValidation(format!(
                    "associativity fails at a={a}, b={b}, c={c}"
                )));
            }
            let inv = self.invert(&a)?;
            if !self.multiply(&a, &inv)?.is_identity() || !self.multiply(&inv, &a)?.is_identity() {
                return Err(GroupError::LawValidation(format!("inverse fails at a={a}")));
            }
            // lattice closure on integer points
            let p = rand_elt(&mut rng, true);
            let q = rand_elt(&mut rng, true);
            let pq = self.multiply(&p, &q)?;
            if !pq.is_lattice_point() {
                return Err(GroupError::LawValidation(format!(
                    "integer points do not multiply to integer points: {p} * {q} = {pq}"
                )));
            }
        }
        // commutator/filtration compatibility on unit generators
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut ei = self.identity();
                ei.coords[i] = Scalar::one();
                let mut ej = self.identity();
                ej.coords[j] = Scalar::one();
                let com = self.commutator(&ei, &ej)?;
                let li = self.coord_level(i);
                let lj = self.coord_level(j);
                let target = li + lj;
                let allowed = self.filtration_coords(target.min(self.filtration.len()));
                let allowed = if target >= self.filtration.len() {
                    BTreeSet::new()
                } else {
                    allowed
                };
                if !com.support().is_subset(&allowed) {
                    return Err(GroupError::FiltrationInvalid(format!(
                        "[e{i}, e{j}] = {com} leaves G_{target}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn split_product_list(s: &str) -> Vec<&str> {
    // split on commas that are not inside a nested product:..(no nesting
    // syntax today, so a plain split suffices)
    s.split(',').map(|p| p.trim()).filter(|p| !p.is_empty()).collect()
}

// ---------------------------------------------------------------------------
// custom groups from declarative data (used by the JSON run-spec)
// ---------------------------------------------------------------------------

/// Declarative monomial: `coef * Π x_i^e * Π y_j^f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coef: String,
    #[serde(default)]
    pub x: Vec<(usize, u32)>,
    #[serde(default)]
    pub y: Vec<(usize, u32)>,
}

/// Declarative group presentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomGroupSpec {
    pub dim: usize,
    pub degree: usize,
    pub step: usize,
    #[serde(default)]
    pub q0: Option<u64>,
    /// corrections[i] lists the monomials of P_i (may be empty).
    pub corrections: Vec<Vec<MonomialSpec>>,
    /// filtration[i] is the coordinate list of G_{i+2} (G_1 is always full).
    #[serde(default)]
    pub filtration_tail: Vec<Vec<usize>>,
}

impl CustomGroupSpec {
    pub fn build(&self, seed: u64) -> Result<GroupRef, GroupError> {
        if self.corrections.len() != self.dim {
            return Err(GroupError::LawValidation(
                "corrections list length must equal dim".into(),
            ));
        }
        let mut corrections = Vec::with_capacity(self.dim);
        for list in &self.corrections {
            let mut terms = Vec::with_capacity(list.len());
            for m in list {
                let coef = crate::scalar::parse_exact(&m.coef).ok_or_else(|| {
                    GroupError::LawValidation(format!("bad coefficient literal {}", m.coef))
                })?;
                terms.push(Monomial { coef, xexp: m.x.clone(), yexp: m.y.clone() });
            }
            corrections.push(CoordPoly { terms });
        }
        let full: BTreeSet<usize> = (0..self.dim).collect();
        let mut filtration = vec![full.clone(), full.clone()];
        for (idx, coords) in self.filtration_tail.iter().enumerate() {
            let s: BTreeSet<usize> = coords.iter().copied().collect();
            if s.iter().any(|&c| c >= self.dim) {
                return Err(GroupError::FiltrationInvalid(format!(
                    "G_{} lists a coordinate out of range",
                    idx + 2
                )));
            }
            filtration.push(s);
        }
        while filtration.len() < self.degree + 1 {
            let last = filtration.last().unwrap().clone();
            filtration.push(last);
        }
        filtration.truncate(self.degree + 1);
        let ab_coords: Vec<usize> =
            (0..self.dim).filter(|&i| corrections[i].is_zero()).collect();
        let g = FilteredGroup {
            name: "custom".into(),
            dim: self.dim,
            degree: self.degree.max(1),
            step: self.step.max(1),
            q0: self.q0.unwrap_or(1).max(1),
            corrections,
            filtration,
            ab_coords,
        };
        g.validate(seed, 1000)?;
        Ok(Arc::new(g))
    }
}
