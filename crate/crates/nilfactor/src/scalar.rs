//! Scalars: exact rationals, plus "ball" values (midpoint and error radius)
//! for irrational named constants evaluated to a configurable precision.
//!
//! All coordinate arithmetic in this crate runs on [`Scalar`].  Exact values
//! stay exact under ring operations; balls propagate rigorous radii (the true
//! value is always within `rad` of `mid`).  Radii are rounded *up* to short
//! dyadics after every operation so denominators stay small.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

pub type Rat = BigRational;

/// Default precision (bits) for named irrational constants.
pub const DEFAULT_PRECISION_BITS: u32 = 256;

/// An exact rational or a rigorously enclosed real.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scalar {
    Exact(Rat),
    /// True value lies in `[mid - rad, mid + rad]`, `rad >= 0`.
    Ball { mid: Rat, rad: Rat },
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(Rat::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(Rat::one())
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::Exact(Rat::from_integer(BigInt::from(n)))
    }

    pub fn from_rat(r: Rat) -> Self {
        Scalar::Exact(r)
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::Exact(Rat::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn ball(mid: Rat, rad: Rat) -> Self {
        debug_assert!(!rad.is_negative());
        Scalar::Ball { mid, rad: round_rad_up(&rad) }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn mid(&self) -> &Rat {
        match self {
            Scalar::Exact(r) => r,
            Scalar::Ball { mid, .. } => mid,
        }
    }

    pub fn rad(&self) -> Rat {
        match self {
            Scalar::Exact(_) => Rat::zero(),
            Scalar::Ball { rad, .. } => rad.clone(),
        }
    }

    /// Exactly the rational `r` (not merely containing it).
    pub fn is_exactly(&self, r: &Rat) -> bool {
        matches!(self, Scalar::Exact(x) if x == r)
    }

    pub fn is_exactly_zero(&self) -> bool {
        matches!(self, Scalar::Exact(x) if x.is_zero())
    }

    /// Whether the enclosure contains zero (trivially true radius-free at 0).
    pub fn contains_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Ball { mid, rad } => mid.abs() <= *rad,
        }
    }

    /// Exact integer value, if the scalar is exactly an integer.
    pub fn as_integer(&self) -> Option<BigInt> {
        match self {
            Scalar::Exact(r) if r.is_integer() => Some(r.to_integer()),
            _ => None,
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            _ => Scalar::ball(self.mid() + other.mid(), self.rad() + other.rad()),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(-a),
            Scalar::Ball { mid, rad } => Scalar::Ball { mid: -mid, rad: rad.clone() },
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            _ => {
                let (ma, ra) = (self.mid(), self.rad());
                let (mb, rb) = (other.mid(), other.rad());
                // |xy - ma*mb| <= |ma| rb + |mb| ra + ra rb
                let rad = ma.abs() * &rb + mb.abs() * &ra + &ra * &rb;
                Scalar::ball(ma * mb, rad)
            }
        }
    }

    pub fn scale(&self, r: &Rat) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(a * r),
            Scalar::Ball { mid, rad } => Scalar::ball(mid * r, rad * r.abs()),
        }
    }

    pub fn scale_int(&self, n: &BigInt) -> Scalar {
        self.scale(&Rat::from_integer(n.clone()))
    }

    /// Division by a nonzero exact rational.
    pub fn div_exact(&self, r: &Rat) -> Scalar {
        assert!(!r.is_zero(), "division by zero");
        self.scale(&r.recip())
    }

    /// Nearest integer to the midpoint (ties round away from zero).
    pub fn round_to_int(&self) -> BigInt {
        self.mid().round().to_integer()
    }

    /// Rigorous enclosure `[lo, hi]` of the distance to the nearest integer.
    /// Both bounds are clamped to `[0, 1/2]`.
    pub fn dist_to_int(&self) -> (Rat, Rat) {
        let nearest = Rat::from_integer(self.mid().round().to_integer());
        let d = (self.mid() - nearest).abs();
        let half = Rat::new(BigInt::one(), BigInt::from(2));
        let lo = if d <= self.rad() { Rat::zero() } else { &d - &self.rad() };
        let hi_raw = &d + &self.rad();
        let hi = if hi_raw > half { half } else { hi_raw };
        (lo, hi)
    }

    /// Upper bound for the absolute value.
    pub fn abs_upper(&self) -> Rat {
        self.mid().abs() + self.rad()
    }

    /// Lower bound for the absolute value (clamped at 0).
    pub fn abs_lower(&self) -> Rat {
        let d = self.mid().abs();
        if d <= self.rad() { Rat::zero() } else { d - self.rad() }
    }

    /// Midpoint as f64 (safe for arbitrarily large numerators/denominators).
    pub fn to_f64(&self) -> f64 {
        rat_to_f64(self.mid())
    }

    /// Midpoint reduced mod 1 into `[0, 1)`, as f64.
    pub fn frac_f64(&self) -> f64 {
        let fl = self.mid().floor();
        rat_to_f64(&(self.mid() - fl))
    }

    /// Collapse a ball that provably encloses zero to exact zero.  Intended
    /// for coordinates known to vanish identically by structure; returns
    /// `None` when the enclosure excludes zero.
    pub fn snap_zero(&self) -> Option<Scalar> {
        if self.contains_zero() { Some(Scalar::zero()) } else { None }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => write!(f, "{r}"),
            Scalar::Ball { mid, rad } => write!(f, "{mid}~{rad}"),
        }
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        Scalar::add(self, rhs)
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        Scalar::sub(self, rhs)
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        Scalar::mul(self, rhs)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::neg(self)
    }
}

/// Round a nonnegative rational up to `m / 2^k` with a 64-bit mantissa, so
/// radii keep short representations under long chains of operations.  The
/// mantissa must be wide enough that the per-operation relative inflation
/// (one ulp, 2^-63) stays negligible over walks of ~2^20 sequential ops;
/// a short mantissa compounds exponentially and manufactures phantom radius.
fn round_rad_up(r: &Rat) -> Rat {
    if r.is_zero() {
        return Rat::zero();
    }
    debug_assert!(r.is_positive());
    let nbits = r.numer().magnitude().bits() as i64;
    let dbits = r.denom().magnitude().bits() as i64;
    // r < 2^(nbits - dbits + 1); aim mantissa around 2^64.
    let e = (nbits - dbits + 1) - 64;
    let scale = pow2_rat(-e);
    let m = (r * &scale).ceil().to_integer();
    Rat::from_integer(m) * pow2_rat(e)
}

/// 2^e as an exact rational (e may be negative).
pub fn pow2_rat(e: i64) -> Rat {
    let one = BigInt::one();
    if e >= 0 {
        Rat::from_integer(one << (e as usize))
    } else {
        Rat::new(one.clone(), one << ((-e) as usize))
    }
}

/// Correctly scaled f64 conversion for big rationals (avoids inf/inf).
pub fn rat_to_f64(r: &Rat) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let neg = r.is_negative();
    let a = r.numer().magnitude().clone();
    let b = r.denom().magnitude().clone();
    let abits = a.bits() as i64;
    let bbits = b.bits() as i64;
    // Form floor(a * 2^s / b) with ~57 significant bits.
    let s = 57 - (abits - bbits);
    let q = if s >= 0 {
        (a << (s as u64)) / &b
    } else {
        a / (&b << ((-s) as u64))
    };
    let qf = q.to_f64().unwrap_or(f64::MAX);
    let v = qf * pow2_f64(-s);
    if neg { -v } else { v }
}

fn pow2_f64(e: i64) -> f64 {
    if e >= -1022 && e <= 1023 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e < -1022 {
        // subnormal / underflow territory: split
        f64::from_bits(1u64 << 52).powi(0) * 2f64.powi(e as i32)
    } else {
        f64::INFINITY
    }
}

// ---------------------------------------------------------------------------
// named constants
// ---------------------------------------------------------------------------

/// sqrt(k) enclosed to `bits` fractional bits.
fn sqrt_ball(k: u64, bits: u32) -> Scalar {
    let scaled = BigUint::from(k) << (2 * bits as u64);
    let s = scaled.sqrt(); // floor of the square root
    let mid = Rat::new(BigInt::from(s), BigInt::one() << (bits as usize));
    Scalar::Ball { mid, rad: pow2_rat(-(bits as i64)) }
}

/// The golden ratio (1 + sqrt 5)/2 to `bits` bits.
pub fn phi(bits: u32) -> Scalar {
    let s5 = sqrt_ball(5, bits + 2);
    let one = Scalar::one();
    one.add(&s5).scale(&Rat::new(BigInt::one(), BigInt::from(2)))
}

/// sqrt(2) to `bits` bits.
pub fn sqrt2(bits: u32) -> Scalar {
    sqrt_ball(2, bits)
}

/// Euler's number to `bits` bits, via the exponential series.
pub fn e_const(bits: u32) -> Scalar {
    let mut sum = Rat::zero();
    let mut term = Rat::one(); // 1/k!
    let cutoff = pow2_rat(-(bits as i64 + 2));
    let mut k: u64 = 0;
    loop {
        sum += &term;
        k += 1;
        term /= Rat::from_integer(BigInt::from(k));
        if term < cutoff {
            break;
        }
    }
    // remainder of the tail is < 2 * next term
    Scalar::ball(sum, term * Rat::from_integer(BigInt::from(2)))
}

/// Resolve a named constant at the given precision.
pub fn named_constant(name: &str, bits: u32) -> Option<Scalar> {
    match name {
        "phi" => Some(phi(bits)),
        "sqrt2" => Some(sqrt2(bits)),
        "e" => Some(e_const(bits)),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// parsing / serialization (canonical forms only; the run-spec grammar with
// arithmetic expressions lives in `io`)
// ---------------------------------------------------------------------------

/// Parse "p", "p/q" or a plain decimal like "-0.125" into an exact rational.
pub fn parse_exact(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Rat::new(p, q));
    }
    if let Some((ipart, fpart)) = s.split_once('.') {
        if fpart.is_empty() || !fpart.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let neg = ipart.starts_with('-');
        let istr = if ipart.is_empty() || ipart == "-" { "0" } else { ipart };
        let i: BigInt = istr.parse().ok()?;
        let f: BigInt = fpart.parse().ok()?;
        let den = BigInt::from(10u32).pow(fpart.len() as u32);
        let mag = i.abs() * &den + f;
        let signed = if neg { -mag } else { mag };
        return Some(Rat::new(signed, den));
    }
    let p: BigInt = s.parse().ok()?;
    Some(Rat::from_integer(p))
}

#[derive(Serialize, Deserialize)]
struct BallRepr {
    mid: String,
    rad: String,
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Scalar::Exact(r) => ser.serialize_str(&r.to_string()),
            Scalar::Ball { mid, rad } => {
                BallRepr { mid: mid.to_string(), rad: rad.to_string() }.serialize(ser)
            }
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            S(String),
            B(BallRepr),
        }
        match Repr::deserialize(de)? {
            Repr::S(s) => parse_exact(&s)
                .map(Scalar::Exact)
                .ok_or_else(|| D::Error::custom(format!("bad rational literal: {s}"))),
            Repr::B(b) => {
                let mid = parse_exact(&b.mid)
                    .ok_or_else(|| D::Error::custom("bad ball midpoint"))?;
                let rad = parse_exact(&b.rad)
                    .ok_or_else(|| D::Error::custom("bad ball radius"))?;
                if rad.is_negative() {
                    return Err(D::Error::custom("negative ball radius"));
                }
                Ok(Scalar::Ball { mid, rad })
            }
        }
    }
}

/// Continued-fraction convergent denominators of `x`, up to `max_den`.
/// Useful as candidate frequencies when hunting near-integer multiples.
pub fn convergent_denominators(x: &Rat, max_den: u64) -> Vec<BigInt> {
    let mut out = Vec::new();
    let mut a = x.clone();
    let (mut qm1, mut qm2) = (BigInt::one(), BigInt::zero());
    let bound = BigInt::from(max_den);
    for _ in 0..128 {
        let fl = a.floor().to_integer();
        let q = &fl * &qm1 + &qm2;
        if q > bound {
            break;
        }
        if q.is_positive() {
            out.push(q.clone());
        }
        let frac = &a - Rat::from_integer(fl);
        qm2 = qm1;
        qm1 = q;
        if frac.is_zero() {
            break;
        }
        a = frac.recip();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> Rat {
        Rat::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn exact_ring_ops_stay_exact() {
        let a = Scalar::ratio(1, 3);
        let b = Scalar::ratio(1, 6);
        assert_eq!(a.add(&b), Scalar::ratio(1, 2));
        assert_eq!(a.mul(&b), Scalar::ratio(1, 18));
        assert!(a.sub(&a).is_exactly_zero());
    }

    #[test]
    fn phi_satisfies_its_equation_within_radius() {
        let p = phi(128);
        // phi^2 - phi - 1 = 0
        let expr = p.mul(&p).sub(&p).sub(&Scalar::one());
        assert!(expr.contains_zero());
        assert!(expr.abs_upper() < r(1, 1i64 << 62) * r(1, 1i64 << 60));
    }

    #[test]
    fn sqrt2_squares_to_two() {
        let s = sqrt2(200);
        let expr = s.mul(&s).sub(&Scalar::from_int(2));
        assert!(expr.contains_zero());
    }

    #[test]
    fn e_known_digits() {
        let e = e_const(128);
        let v = e.to_f64();
        assert!((v - std::f64::consts::E).abs() < 1e-15);
        assert!(e.rad() < pow2_rat(-126));
    }

    #[test]
    fn dist_to_int_enclosure() {
        let x = Scalar::ratio(7, 3); // 2.333... -> dist 1/3
        let (lo, hi) = x.dist_to_int();
        assert_eq!(lo, r(1, 3));
        assert_eq!(hi, r(1, 3));
        let y = Scalar::ratio(1, 2);
        let (lo, hi) = y.dist_to_int();
        assert_eq!(lo, r(1, 2));
        assert_eq!(hi, r(1, 2));
    }

    #[test]
    fn f64_conversion_handles_big_values() {
        let big = Rat::new(BigInt::from(3) << 400, BigInt::one() << 399);
        assert!((rat_to_f64(&big) - 6.0).abs() < 1e-12);
        let tiny = Rat::new(BigInt::one(), BigInt::one() << 400);
        assert!(rat_to_f64(&tiny) >= 0.0);
        assert!(rat_to_f64(&tiny) < 1e-100);
    }

    #[test]
    fn parse_exact_forms() {
        assert_eq!(parse_exact("5/8"), Some(r(5, 8)));
        assert_eq!(parse_exact("-3"), Some(r(-3, 1)));
        assert_eq!(parse_exact("0.125"), Some(r(1, 8)));
        assert_eq!(parse_exact("-0.5"), Some(r(-1, 2)));
        assert_eq!(parse_exact("1/0"), None);
        assert_eq!(parse_exact("x"), None);
    }

    #[test]
    fn radius_rounding_only_grows() {
        let tiny = r(1, 3_000_000_007);
        let rounded = round_rad_up(&tiny);
        assert!(rounded >= tiny);
        assert!(rounded < &tiny * r(2, 1));
    }

    #[test]
    fn convergents_of_phi_are_fibonacci() {
        let p = phi(128);
        let dens = convergent_denominators(p.mid(), 100);
        // denominators are reported deduplicated, so the double 1 of the
        // first two convergents of the golden ratio collapses
        let fib: Vec<i64> = vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89];
        let got: Vec<i64> = dens.iter().map(|d| d.to_i64().unwrap()).collect();
        assert_eq!(&got[..fib.len().min(got.len())], &fib[..fib.len().min(got.len())]);
    }

    #[test]
    fn ball_serde_roundtrip() {
        let s = phi(64);
        let js = serde_json::to_string(&s).unwrap();
        let back: Scalar = serde_json::from_str(&js).unwrap();
        assert_eq!(s, back);
        let e = Scalar::ratio(-7, 12);
        let js = serde_json::to_string(&e).unwrap();
        assert_eq!(js, "\"-7/12\"");
        let back: Scalar = serde_json::from_str(&js).unwrap();
        assert_eq!(e, back);
    }
}
