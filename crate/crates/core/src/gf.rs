//! Arithmetic in GF(2^m) for 2 <= m <= 32.
//!
//! Elements use the polynomial basis `{1, x, x^2, ...}`: bit `i` of the
//! stored value is the coefficient of `x^i`. Addition is xor. Multiplication
//! goes through log/antilog tables for `m <= 16` and carry-less
//! shift-and-reduce above that.

use std::fmt;
use std::ops::{Add, AddAssign};

use thiserror::Error;

/// Largest supported extension degree.
pub const MAX_DEGREE: u32 = 32;

const TABLE_MAX_DEGREE: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("extension degree {0} outside 2..=32")]
    DegreeOutOfRange(u32),
    #[error("modulus {modulus:#x} does not have degree {m}")]
    ModulusDegree { m: u32, modulus: u64 },
    #[error("modulus {0:#x} is reducible over GF(2)")]
    Reducible(u64),
    #[error("value {value:#x} does not fit in {m} bits")]
    ElementOutOfRange { value: u64, m: u32 },
}

/// An element of GF(2^m), stored as its coordinate bit vector.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(u32);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    /// Wraps raw bits without checking them against a field. Use
    /// [`Field::element`] when the value comes from outside.
    pub const fn from_bits(bits: u32) -> Self {
        FieldElement(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl Add for FieldElement {
    type Output = FieldElement;

    fn add(self, rhs: FieldElement) -> FieldElement {
        FieldElement(self.0 ^ rhs.0)
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: FieldElement) {
        self.0 ^= rhs.0;
    }
}

/// Field addition. Subtraction is the same operation in characteristic 2.
pub fn add(a: FieldElement, b: FieldElement) -> FieldElement {
    a + b
}

#[derive(Clone)]
enum Multiplier {
    Tables { log: Vec<u32>, exp: Vec<u32> },
    ShiftReduce,
}

/// GF(2^m) defined by an irreducible modulus.
#[derive(Clone)]
pub struct Field {
    m: u32,
    modulus: u64,
    multiplier: Multiplier,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("m", &self.m)
            .field("modulus", &format_args!("{:#x}", self.modulus))
            .finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.modulus == other.modulus
    }
}

impl Eq for Field {}

/// The modulus used when none is given.
///
/// m = 4, 8, 16 and 32 are pinned (`x^4+x+1`, `x^8+x^4+x^3+x+1`,
/// `x^16+x^12+x^3+x+1`, `x^32+x^7+x^3+x^2+1`); other degrees take the
/// numerically smallest irreducible polynomial.
pub fn default_modulus(m: u32) -> Result<u64, FieldError> {
    if !(2..=MAX_DEGREE).contains(&m) {
        return Err(FieldError::DegreeOutOfRange(m));
    }
    let pinned = match m {
        4 => Some(0x13),
        8 => Some(0x11b),
        16 => Some(0x1100b),
        32 => Some(0x1_0000_008d),
        _ => None,
    };
    if let Some(p) = pinned {
        return Ok(p);
    }
    let top = 1u64 << m;
    // Odd candidates only: a polynomial without constant term is divisible by x.
    (top + 1..top << 1)
        .step_by(2)
        .find(|&p| is_irreducible(p))
        .ok_or(FieldError::Reducible(top))
}

fn degree(p: u64) -> u32 {
    63 - p.leading_zeros()
}

fn poly_mod(mut a: u64, b: u64) -> u64 {
    let db = degree(b);
    while a != 0 && degree(a) >= db {
        a ^= b << (degree(a) - db);
    }
    a
}

/// Trial division by every polynomial of degree `1..=deg(p)/2`.
pub fn is_irreducible(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let d = degree(p);
    if d == 0 {
        return false;
    }
    let limit = 1u64 << (d / 2 + 1);
    (2..limit).all(|q| poly_mod(p, q) != 0)
}

fn clmul_reduce(a: u32, b: u32, m: u32, modulus: u64) -> u32 {
    let mut acc: u64 = 0;
    let mut a = a as u64;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
    }
    for bit in (m..64).rev() {
        if acc >> bit & 1 == 1 {
            acc ^= modulus << (bit - m);
        }
    }
    acc as u32
}

fn prime_factors(mut v: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut f = 2;
    while f * f <= v {
        if v % f == 0 {
            out.push(f);
            while v % f == 0 {
                v /= f;
            }
        }
        f += 1;
    }
    if v > 1 {
        out.push(v);
    }
    out
}

fn pow_slow(mut base: u32, mut e: u64, m: u32, modulus: u64) -> u32 {
    let mut acc = 1u32;
    while e > 0 {
        if e & 1 == 1 {
            acc = clmul_reduce(acc, base, m, modulus);
        }
        base = clmul_reduce(base, base, m, modulus);
        e >>= 1;
    }
    acc
}

fn build_tables(m: u32, modulus: u64) -> Multiplier {
    let group = (1u64 << m) - 1;
    let factors = prime_factors(group);
    let generator = (2..=group as u32)
        .find(|&g| {
            factors
                .iter()
                .all(|&p| pow_slow(g, group / p, m, modulus) != 1)
        })
        .expect("multiplicative group of a field is cyclic");
    let size = group as usize;
    let mut log = vec![0u32; size + 1];
    let mut exp = vec![0u32; 2 * size];
    let mut x = 1u32;
    for i in 0..size {
        exp[i] = x;
        exp[i + size] = x;
        log[x as usize] = i as u32;
        x = clmul_reduce(x, generator, m, modulus);
    }
    Multiplier::Tables { log, exp }
}

impl Field {
    /// Builds GF(2^m) with an explicit modulus, checking irreducibility.
    pub fn new(m: u32, modulus: u64) -> Result<Self, FieldError> {
        if !(2..=MAX_DEGREE).contains(&m) {
            return Err(FieldError::DegreeOutOfRange(m));
        }
        if modulus >> m != 1 {
            return Err(FieldError::ModulusDegree { m, modulus });
        }
        if !is_irreducible(modulus) {
            return Err(FieldError::Reducible(modulus));
        }
        let multiplier = if m <= TABLE_MAX_DEGREE {
            build_tables(m, modulus)
        } else {
            Multiplier::ShiftReduce
        };
        Ok(Field {
            m,
            modulus,
            multiplier,
        })
    }

    pub fn with_default_modulus(m: u32) -> Result<Self, FieldError> {
        Field::new(m, default_modulus(m)?)
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Number of elements, `2^m`.
    pub fn order(&self) -> u64 {
        1u64 << self.m
    }

    pub fn contains(&self, a: FieldElement) -> bool {
        (a.0 as u64) < self.order()
    }

    pub fn element(&self, value: u64) -> Result<FieldElement, FieldError> {
        if value >= self.order() {
            return Err(FieldError::ElementOutOfRange { value, m: self.m });
        }
        Ok(FieldElement(value as u32))
    }

    /// Bytes needed to serialize one element.
    pub fn element_bytes(&self) -> usize {
        self.m.div_ceil(8) as usize
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        debug_assert!(self.contains(a) && self.contains(b));
        if a.0 == 0 || b.0 == 0 {
            return FieldElement::ZERO;
        }
        match &self.multiplier {
            Multiplier::Tables { log, exp } => {
                FieldElement(exp[(log[a.0 as usize] + log[b.0 as usize]) as usize])
            }
            Multiplier::ShiftReduce => FieldElement(clmul_reduce(a.0, b.0, self.m, self.modulus)),
        }
    }

    pub fn square(&self, a: FieldElement) -> FieldElement {
        self.mul(a, a)
    }

    /// `a^(2^j)`. The Frobenius map has order `m`, so only `j mod m`
    /// squarings are performed.
    pub fn frob_pow(&self, a: FieldElement, j: u32) -> FieldElement {
        (0..j % self.m).fold(a, |acc, _| self.square(acc))
    }

    pub fn pow(&self, a: FieldElement, mut e: u64) -> FieldElement {
        let mut base = a;
        let mut acc = FieldElement::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.square(base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: FieldElement) -> Option<FieldElement> {
        if a.is_zero() {
            return None;
        }
        match &self.multiplier {
            Multiplier::Tables { log, exp } => {
                let group = (self.order() - 1) as u32;
                let l = log[a.0 as usize];
                Some(FieldElement(exp[((group - l) % group) as usize]))
            }
            // a^(2^m - 2)
            Multiplier::ShiftReduce => Some(self.pow(a, self.order() - 2)),
        }
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Option<FieldElement> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    /// Rank of the elements viewed as m-bit vectors over GF(2).
    pub fn rank_over_f2(&self, vectors: &[FieldElement]) -> usize {
        rank_over_f2(vectors)
    }
}

/// Rank over GF(2) of a set of bit vectors, by elimination on the leading bit.
pub fn rank_over_f2(vectors: &[FieldElement]) -> usize {
    // pivots[b] holds a reduced vector whose leading bit is b.
    let mut pivots = [0u32; 32];
    let mut rank = 0;
    for v in vectors {
        let mut x = v.0;
        while x != 0 {
            let lead = 31 - x.leading_zeros() as usize;
            if pivots[lead] == 0 {
                pivots[lead] = x;
                rank += 1;
                break;
            }
            x ^= pivots[lead];
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fe(v: u32) -> FieldElement {
        FieldElement::from_bits(v)
    }

    fn gf16() -> Field {
        Field::with_default_modulus(4).unwrap()
    }

    #[test]
    fn add_examples() {
        assert_eq!(add(fe(0x3), fe(0x5)), fe(0x6));
        for a in 0..16 {
            assert_eq!(add(fe(a), fe(a)), FieldElement::ZERO);
            assert_eq!(add(fe(a), FieldElement::ZERO), fe(a));
        }
    }

    #[test]
    fn mul_by_hand() {
        // x * x^3 = x^4 = x + 1 mod x^4 + x + 1
        let f = gf16();
        assert_eq!(f.mul(fe(0x2), fe(0x8)), fe(0x3));
        for a in 0..16 {
            assert_eq!(f.mul(fe(a), FieldElement::ONE), fe(a));
        }
    }

    #[test]
    fn tables_agree_with_shift_reduce() {
        for m in [4, 8] {
            let f = Field::with_default_modulus(m).unwrap();
            for a in 0..(1u32 << m) {
                for b in 0..(1u32 << m) {
                    assert_eq!(
                        f.mul(fe(a), fe(b)).bits(),
                        clmul_reduce(a, b, m, f.modulus())
                    );
                }
            }
        }
    }

    #[test]
    fn commutativity_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in [4, 8, 16, 32] {
            let f = Field::with_default_modulus(m).unwrap();
            for _ in 0..100 {
                let a = fe(rng.gen::<u32>() & ((f.order() - 1) as u32));
                let b = fe(rng.gen::<u32>() & ((f.order() - 1) as u32));
                assert_eq!(f.mul(a, b), f.mul(b, a));
            }
        }
    }

    #[test]
    fn exhaustive_gf16_axioms() {
        let f = gf16();
        for a in 0..16 {
            for b in 0..16 {
                for c in 0..16 {
                    let (a, b, c) = (fe(a), fe(b), fe(c));
                    assert_eq!((a + b) + c, a + (b + c));
                    assert_eq!(f.mul(a, b + c), f.mul(a, b) + f.mul(a, c));
                }
            }
        }
        for a in 1..16 {
            let inv = f.inv(fe(a)).unwrap();
            assert_eq!(f.mul(fe(a), inv), FieldElement::ONE);
        }
        assert_eq!(f.inv(FieldElement::ZERO), None);
    }

    #[test]
    fn gf256_randomized_axioms() {
        let f = Field::with_default_modulus(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let a = fe(rng.gen_range(0..256));
            let b = fe(rng.gen_range(0..256));
            let c = fe(rng.gen_range(0..256));
            assert_eq!((a + b) + c, a + (b + c));
            assert_eq!(a + a, FieldElement::ZERO);
            assert_eq!(f.mul(a, b + c), f.mul(a, b) + f.mul(a, c));
        }
    }

    #[test]
    fn inverse_without_tables() {
        let f = Field::with_default_modulus(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = fe(rng.gen::<u32>() | 1);
            assert_eq!(f.mul(a, f.inv(a).unwrap()), FieldElement::ONE);
        }
    }

    #[test]
    fn frobenius() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in [4, 8, 16] {
            let f = Field::with_default_modulus(m).unwrap();
            let mask = (f.order() - 1) as u32;
            for _ in 0..200 {
                let a = fe(rng.gen::<u32>() & mask);
                let b = fe(rng.gen::<u32>() & mask);
                assert_eq!(f.frob_pow(a, 0), a);
                assert_eq!(f.frob_pow(a, m), a);
                for j in 0..m + 2 {
                    assert_eq!(f.frob_pow(a + b, j), f.frob_pow(a, j) + f.frob_pow(b, j));
                    let mut chain = a;
                    for _ in 0..j {
                        chain = f.mul(chain, chain);
                    }
                    assert_eq!(f.frob_pow(a, j), chain);
                }
            }
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_over_f2(&[fe(0b001), fe(0b010), fe(0b100)]), 3);
        assert_eq!(rank_over_f2(&[fe(0b001), fe(0b010), fe(0b011)]), 2);
        assert_eq!(rank_over_f2(&[]), 0);
        assert_eq!(rank_over_f2(&[FieldElement::ZERO]), 0);
    }

    #[test]
    fn default_moduli_are_irreducible() {
        for m in 2..=MAX_DEGREE {
            let p = default_modulus(m).unwrap();
            assert_eq!(degree(p), m);
            assert!(is_irreducible(p), "m={m}");
        }
        assert_eq!(default_modulus(2).unwrap(), 0b111);
        assert_eq!(default_modulus(3).unwrap(), 0b1011);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(Field::new(1, 0b11), Err(FieldError::DegreeOutOfRange(1))));
        assert!(matches!(Field::new(4, 0x15), Err(FieldError::Reducible(0x15))));
        assert!(matches!(Field::new(4, 0x7), Err(FieldError::ModulusDegree { .. })));
        let f = gf16();
        assert!(f.element(15).is_ok());
        assert!(matches!(f.element(16), Err(FieldError::ElementOutOfRange { .. })));
    }
}
