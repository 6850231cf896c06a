//! Prime field arithmetic for the constraint system.
//!
//! The field is F_p with p = 2^192 - 2^64 - 1 (the NIST P-192 base field
//! prime). The modulus is large enough that 64-bit amounts and 32-bit block
//! heights embed without wraparound, and sums of two amounts stay far below
//! p. Reduction uses the identity 2^192 = 2^64 + 1 (mod p).

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// Little-endian limbs of p = 2^192 - 2^64 - 1.
const MODULUS: [u64; 3] = [u64::MAX, u64::MAX - 1, u64::MAX];

/// An element of F_p, kept as the canonical representative in [0, p).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fp {
    // Little-endian limbs, always fully reduced.
    limbs: [u64; 3],
}

impl Fp {
    pub const ZERO: Fp = Fp { limbs: [0, 0, 0] };
    pub const ONE: Fp = Fp { limbs: [1, 0, 0] };
    /// 2^128, the radix used to split 256-bit digests into field limbs.
    pub const TWO_POW_128: Fp = Fp { limbs: [0, 0, 1] };

    pub fn from_u64(v: u64) -> Fp {
        Fp { limbs: [v, 0, 0] }
    }

    pub fn from_u128(v: u128) -> Fp {
        Fp {
            limbs: [v as u64, (v >> 64) as u64, 0],
        }
    }

    /// Interprets 24 big-endian bytes as an integer; must be < p.
    pub fn from_be24(bytes: &[u8; 24]) -> Option<Fp> {
        let limbs = [
            u64::from_be_bytes(bytes[16..24].try_into().unwrap()),
            u64::from_be_bytes(bytes[8..16].try_into().unwrap()),
            u64::from_be_bytes(bytes[0..8].try_into().unwrap()),
        ];
        let fp = Fp { limbs };
        if geq(&limbs, &MODULUS) {
            None
        } else {
            Some(fp)
        }
    }

    /// Canonical 24-byte big-endian encoding.
    pub fn to_be24(&self) -> [u8; 24] {
        let mut out = [0u8; 24];
        out[0..8].copy_from_slice(&self.limbs[2].to_be_bytes());
        out[8..16].copy_from_slice(&self.limbs[1].to_be_bytes());
        out[16..24].copy_from_slice(&self.limbs[0].to_be_bytes());
        out
    }

    /// Reduces an arbitrary 32-byte big-endian integer into the field.
    pub fn from_be32_reduced(bytes: &[u8; 32]) -> Fp {
        let mut wide = [0u64; 6];
        wide[3] = u64::from_be_bytes(bytes[0..8].try_into().unwrap());
        wide[2] = u64::from_be_bytes(bytes[8..16].try_into().unwrap());
        wide[1] = u64::from_be_bytes(bytes[16..24].try_into().unwrap());
        wide[0] = u64::from_be_bytes(bytes[24..32].try_into().unwrap());
        reduce_wide(wide)
    }

    pub fn is_zero(&self) -> bool {
        self.limbs == [0, 0, 0]
    }

    /// Truncation to u64; meaningful only for small embedded integers.
    pub fn as_u64(&self) -> u64 {
        self.limbs[0]
    }

    /// True if the element is < 2^64 (i.e. a faithfully embedded u64).
    pub fn fits_u64(&self) -> bool {
        self.limbs[1] == 0 && self.limbs[2] == 0
    }

    pub fn square(&self) -> Fp {
        *self * *self
    }

    /// Multiplicative inverse via Fermat's little theorem; None for zero.
    pub fn invert(&self) -> Option<Fp> {
        if self.is_zero() {
            return None;
        }
        // exponent p - 2
        let mut exp = MODULUS;
        exp[0] = exp[0].wrapping_sub(2);
        let mut result = Fp::ONE;
        let mut base = *self;
        for limb in exp {
            let mut bits = limb;
            for _ in 0..64 {
                if bits & 1 == 1 {
                    result *= base;
                }
                base = base.square();
                bits >>= 1;
            }
        }
        Some(result)
    }

    pub fn pow_u64(&self, mut e: u64) -> Fp {
        let mut result = Fp::ONE;
        let mut base = *self;
        while e > 0 {
            if e & 1 == 1 {
                result *= base;
            }
            base = base.square();
            e >>= 1;
        }
        result
    }

    /// Uniform random element via rejection sampling.
    pub fn random(rng: &mut impl rand::RngCore) -> Fp {
        loop {
            let limbs = [rng.next_u64(), rng.next_u64(), rng.next_u64()];
            if !geq(&limbs, &MODULUS) {
                return Fp { limbs };
            }
        }
    }
}

#[inline]
fn geq(a: &[u64; 3], b: &[u64; 3]) -> bool {
    for i in (0..3).rev() {
        if a[i] > b[i] {
            return true;
        }
        if a[i] < b[i] {
            return false;
        }
    }
    true
}

#[inline]
fn sub_limbs(a: &[u64; 3], b: &[u64; 3]) -> ([u64; 3], bool) {
    let mut out = [0u64; 3];
    let mut borrow = false;
    for i in 0..3 {
        let (d, b1) = a[i].overflowing_sub(b[i]);
        let (d, b2) = d.overflowing_sub(borrow as u64);
        out[i] = d;
        borrow = b1 || b2;
    }
    (out, borrow)
}

#[inline]
fn add_limbs(a: &[u64; 3], b: &[u64; 3]) -> ([u64; 3], bool) {
    let mut out = [0u64; 3];
    let mut carry = false;
    for i in 0..3 {
        let (s, c1) = a[i].overflowing_add(b[i]);
        let (s, c2) = s.overflowing_add(carry as u64);
        out[i] = s;
        carry = c1 || c2;
    }
    (out, carry)
}

/// Reduces a 6-limb little-endian integer modulo p using
/// 2^192 = 2^64 + 1 (mod p), folding twice and then subtracting.
fn reduce_wide(t: [u64; 6]) -> Fp {
    // First fold: t = lo + hi * 2^192 == lo + hi + (hi << 64).
    let lo = [t[0], t[1], t[2]];
    let hi = [t[3], t[4], t[5]];
    // acc (5 limbs) = lo + hi + (hi << 64); max ~2^257.
    let mut acc = [0u64; 5];
    let mut carry: u128 = 0;
    for i in 0..5 {
        let mut v: u128 = carry;
        if i < 3 {
            v += lo[i] as u128 + hi[i] as u128;
        }
        if (1..4).contains(&i) {
            v += hi[i - 1] as u128;
        }
        acc[i] = v as u64;
        carry = v >> 64;
    }
    debug_assert_eq!(carry, 0);
    // Second fold: hi2 < 2^66, so hi2 + (hi2 << 64) < 2^131.
    let lo2 = [acc[0], acc[1], acc[2]];
    let hi2 = [acc[3], acc[4], 0u64];
    let (mut r, mut carry2) = add_limbs(&lo2, &hi2);
    let shifted = [0, acc[3], acc[4]];
    let (r2, c) = add_limbs(&r, &shifted);
    r = r2;
    carry2 = carry2 || c;
    if carry2 {
        // value = 2^192 + r == r + 2^64 + 1 (mod p); cannot carry again.
        let (r3, c3) = add_limbs(&r, &[1, 1, 0]);
        debug_assert!(!c3);
        r = r3;
    }
    while geq(&r, &MODULUS) {
        let (d, _) = sub_limbs(&r, &MODULUS);
        r = d;
    }
    Fp { limbs: r }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, rhs: Fp) -> Fp {
        let (mut r, carry) = add_limbs(&self.limbs, &rhs.limbs);
        if carry {
            let (r2, c2) = add_limbs(&r, &[1, 1, 0]);
            debug_assert!(!c2);
            r = r2;
        }
        if geq(&r, &MODULUS) {
            let (d, _) = sub_limbs(&r, &MODULUS);
            r = d;
        }
        Fp { limbs: r }
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, rhs: Fp) -> Fp {
        let (r, borrow) = sub_limbs(&self.limbs, &rhs.limbs);
        if borrow {
            let (r2, _) = add_limbs(&r, &MODULUS);
            Fp { limbs: r2 }
        } else {
            Fp { limbs: r }
        }
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, rhs: Fp) -> Fp {
        let a = &self.limbs;
        let b = &rhs.limbs;
        let mut t = [0u64; 6];
        for i in 0..3 {
            let mut carry: u128 = 0;
            for j in 0..3 {
                let v = t[i + j] as u128 + a[i] as u128 * b[j] as u128 + carry;
                t[i + j] = v as u64;
                carry = v >> 64;
            }
            let mut k = i + 3;
            while carry > 0 {
                let v = t[k] as u128 + carry;
                t[k] = v as u64;
                carry = v >> 64;
                k += 1;
            }
        }
        reduce_wide(t)
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        Fp::ZERO - self
    }
}

impl AddAssign for Fp {
    fn add_assign(&mut self, rhs: Fp) {
        *self = *self + rhs;
    }
}

impl SubAssign for Fp {
    fn sub_assign(&mut self, rhs: Fp) {
        *self = *self - rhs;
    }
}

impl MulAssign for Fp {
    fn mul_assign(&mut self, rhs: Fp) {
        *self = *self * rhs;
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fp(0x{})", hex::encode(self.to_be24()))
    }
}

impl fmt::Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.to_be24()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn modulus_big() -> BigUint {
        (BigUint::from(1u8) << 192u32) - (BigUint::from(1u8) << 64u32) - BigUint::from(1u8)
    }

    fn to_big(x: &Fp) -> BigUint {
        BigUint::from_bytes_be(&x.to_be24())
    }

    fn from_big(x: &BigUint) -> Fp {
        let bytes = x.to_bytes_be();
        let mut buf = [0u8; 24];
        buf[24 - bytes.len()..].copy_from_slice(&bytes);
        Fp::from_be24(&buf).unwrap()
    }

    #[test]
    fn modulus_is_p192() {
        // p = 2^192 - 2^64 - 1
        let p = modulus_big();
        assert_eq!(
            p.to_str_radix(10),
            "6277101735386680763835789423207666416083908700390324961279"
        );
    }

    #[test]
    fn arithmetic_matches_bigint_oracle() {
        let p = modulus_big();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let a = Fp::random(&mut rng);
            let b = Fp::random(&mut rng);
            let (ab, bb) = (to_big(&a), to_big(&b));
            assert_eq!(to_big(&(a + b)), (&ab + &bb) % &p);
            assert_eq!(to_big(&(a - b)), ((&ab + &p) - &bb) % &p);
            assert_eq!(to_big(&(a * b)), (&ab * &bb) % &p);
        }
    }

    #[test]
    fn reduce_wide_matches_bigint_oracle() {
        let p = modulus_big();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for _ in 0..20_000 {
            let mut limbs = [0u64; 6];
            for l in limbs.iter_mut() {
                *l = rng.gen();
            }
            let mut big = BigUint::from(0u8);
            for l in limbs.iter().rev() {
                big = (big << 64u32) + BigUint::from(*l);
            }
            assert_eq!(to_big(&reduce_wide(limbs)), big % &p);
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..200 {
            let a = Fp::random(&mut rng);
            if a.is_zero() {
                continue;
            }
            assert_eq!(a * a.invert().unwrap(), Fp::ONE);
        }
        assert!(Fp::ZERO.invert().is_none());
    }

    #[test]
    fn digest_reduction_matches_oracle() {
        let p = modulus_big();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for _ in 0..5_000 {
            let mut bytes = [0u8; 32];
            rng.fill(&mut bytes);
            let expect = from_big(&(BigUint::from_bytes_be(&bytes) % &p));
            assert_eq!(Fp::from_be32_reduced(&bytes), expect);
        }
    }

    proptest! {
        #[test]
        fn encoding_roundtrip(seed in any::<u64>()) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let a = Fp::random(&mut rng);
            prop_assert_eq!(Fp::from_be24(&a.to_be24()).unwrap(), a);
        }

        #[test]
        fn addition_associates(s in any::<u64>()) {
            let mut rng = ChaCha20Rng::seed_from_u64(s);
            let (a, b, c) = (Fp::random(&mut rng), Fp::random(&mut rng), Fp::random(&mut rng));
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!((a * b) * c, a * (b * c));
            prop_assert_eq!(a * (b + c), a * b + a * c);
        }
    }
}
