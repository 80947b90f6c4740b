//! Arithmetic in a prime field Z_p with p below 2^128.
//!
//! Elements are plain canonical integers ([`Fe`]); the modulus lives in a
//! [`PrimeField`] context that performs every operation. Results are always
//! reduced to `[0, p)`.

use std::fmt;

use rand::Rng;

use crate::error::{param, Error, Result};

/// Largest 128-bit prime, 2^128 - 159.
pub const DEFAULT_MODULUS: u128 = u128::MAX - 158;

/// Default security parameter in bits.
pub const DEFAULT_LAMBDA: u32 = 128;

/// A canonical field element. Only meaningful together with the
/// [`PrimeField`] that produced it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fe(u128);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    #[inline]
    pub const fn value(self) -> u128 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Full 256-bit product of two 128-bit integers as (hi, lo).
#[inline]
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = u64::MAX as u128;
    let (a0, a1) = (a & MASK, a >> 64);
    let (b0, b1) = (b & MASK, b >> 64);
    let ll = a0 * b0;
    let lh = a0 * b1;
    let hl = a1 * b0;
    let hh = a1 * b1;
    let mid = (ll >> 64) + (lh & MASK) + (hl & MASK);
    let lo = (ll & MASK) | (mid << 64);
    let hi = hh + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (hi, lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reduction {
    /// p < 2^64: the product fits in a u128.
    Small,
    /// 2^128 mod p < 2^64: fold the high half twice.
    Fold(u128),
    /// Anything else: bitwise long reduction.
    Generic,
}

/// Modular reduction for an arbitrary odd modulus (need not be prime).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Modulus {
    p: u128,
    reduction: Reduction,
}

impl Modulus {
    pub(crate) fn new(p: u128) -> Self {
        assert!(p > 1, "modulus must exceed 1");
        let reduction = if p <= u64::MAX as u128 {
            Reduction::Small
        } else {
            // 2^128 mod p
            let c = p.wrapping_neg() % p;
            if c <= u64::MAX as u128 {
                Reduction::Fold(c)
            } else {
                Reduction::Generic
            }
        };
        Modulus { p, reduction }
    }

    #[inline]
    pub(crate) fn add(&self, a: u128, b: u128) -> u128 {
        let (s, overflow) = a.overflowing_add(b);
        if overflow || s >= self.p {
            s.wrapping_sub(self.p)
        } else {
            s
        }
    }

    #[inline]
    pub(crate) fn sub(&self, a: u128, b: u128) -> u128 {
        if a >= b {
            a - b
        } else {
            self.p - (b - a)
        }
    }

    #[inline]
    pub(crate) fn mul(&self, a: u128, b: u128) -> u128 {
        match self.reduction {
            Reduction::Small => (a * b) % self.p,
            Reduction::Fold(c) => {
                let (hi, lo) = mul_wide(a, b);
                // hi * 2^128 + lo == hi * c + lo (mod p)
                let (h2, l2) = mul_wide(hi, c);
                let (s, carry) = lo.overflowing_add(l2);
                let h2 = h2 + carry as u128;
                // h2 <= 2^64, so h2 * c < 2^128
                let (mut r, carry) = s.overflowing_add(h2 * c);
                if carry {
                    r += c;
                }
                if self.p > (1u128 << 127) {
                    if r >= self.p {
                        r -= self.p;
                    }
                    r
                } else {
                    r % self.p
                }
            }
            Reduction::Generic => {
                let (hi, lo) = mul_wide(a, b);
                let mut r = hi % self.p;
                for bit in (0..128).rev() {
                    r = self.add(r, r);
                    if (lo >> bit) & 1 == 1 {
                        r = self.add(r, 1 % self.p);
                    }
                }
                r
            }
        }
    }

    pub(crate) fn pow(&self, base: u128, mut exp: u128) -> u128 {
        let mut acc = 1 % self.p;
        let mut b = base % self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }
}

const SMALL_PRIMES: [u128; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Bound below which the first 13 prime bases make Miller-Rabin deterministic.
const MR_DETERMINISTIC_BOUND: u128 = 3_317_044_064_679_887_385_961_981;

/// Miller-Rabin primality test.
///
/// Deterministic below ~3.3e24 (bases 2..=41). Above that the first 24
/// primes are used as bases; no composite passing that set is known.
pub fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    for &q in &SMALL_PRIMES {
        if n == q {
            return true;
        }
        if n.is_multiple_of(q) {
            return false;
        }
    }
    let m = Modulus::new(n);
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let bases: &[u128] = if n < MR_DETERMINISTIC_BOUND {
        &SMALL_PRIMES[..13]
    } else {
        &SMALL_PRIMES
    };
    'witness: for &a in bases {
        let mut x = m.pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = m.mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The prime field Z_p.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeField {
    modulus: Modulus,
    bits: u32,
}

impl PrimeField {
    /// Builds the field for a prime `p`, rejecting composites.
    pub fn new(p: u128) -> Result<Self> {
        if !is_prime(p) {
            return Err(param(format!("modulus {p} is not prime")));
        }
        Ok(PrimeField {
            modulus: Modulus::new(p),
            bits: 128 - p.leading_zeros(),
        })
    }

    /// The field over the default modulus 2^128 - 159.
    pub fn default_128() -> Self {
        PrimeField {
            modulus: Modulus::new(DEFAULT_MODULUS),
            bits: 128,
        }
    }

    #[inline]
    pub fn modulus(&self) -> u128 {
        self.modulus.p
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Width of the fixed-size big-endian encoding.
    pub fn byte_len(&self) -> usize {
        self.bits.div_ceil(8) as usize
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn elem(&self, v: u128) -> Fe {
        Fe(v % self.modulus.p)
    }

    /// Accepts `v` only if it is already canonical.
    pub fn try_elem(&self, v: u128) -> Result<Fe> {
        if v < self.modulus.p {
            Ok(Fe(v))
        } else {
            Err(Error::Decode(format!("value {v:#x} is not below the modulus")))
        }
    }

    /// Maps a signed integer, so tests can write `-1` for p - 1.
    pub fn from_i128(&self, v: i128) -> Fe {
        let r = self.elem(v.unsigned_abs());
        if v < 0 {
            self.neg(r)
        } else {
            r
        }
    }

    #[inline]
    pub fn add(&self, x: Fe, y: Fe) -> Fe {
        debug_assert!(x.0 < self.modulus.p && y.0 < self.modulus.p);
        Fe(self.modulus.add(x.0, y.0))
    }

    #[inline]
    pub fn sub(&self, x: Fe, y: Fe) -> Fe {
        debug_assert!(x.0 < self.modulus.p && y.0 < self.modulus.p);
        Fe(self.modulus.sub(x.0, y.0))
    }

    #[inline]
    pub fn neg(&self, x: Fe) -> Fe {
        if x.0 == 0 {
            x
        } else {
            Fe(self.modulus.p - x.0)
        }
    }

    #[inline]
    pub fn mul(&self, x: Fe, y: Fe) -> Fe {
        debug_assert!(x.0 < self.modulus.p && y.0 < self.modulus.p);
        Fe(self.modulus.mul(x.0, y.0))
    }

    pub fn pow(&self, x: Fe, exp: u128) -> Fe {
        Fe(self.modulus.pow(x.0, exp))
    }

    /// Multiplicative inverse by Fermat's little theorem.
    pub fn inv(&self, x: Fe) -> Result<Fe> {
        if x.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.pow(x, self.modulus.p - 2))
    }

    pub fn sum<I: IntoIterator<Item = Fe>>(&self, items: I) -> Fe {
        items.into_iter().fold(Fe::ZERO, |acc, x| self.add(acc, x))
    }

    pub fn product<I: IntoIterator<Item = Fe>>(&self, items: I) -> Fe {
        items.into_iter().fold(self.one(), |acc, x| self.mul(acc, x))
    }

    pub fn one(&self) -> Fe {
        Fe(1 % self.modulus.p)
    }

    /// Uniform element of Z_p (rejection sampling).
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        let mask = if self.bits == 128 {
            u128::MAX
        } else {
            (1u128 << self.bits) - 1
        };
        loop {
            let v = rng.gen::<u128>() & mask;
            if v < self.modulus.p {
                return Fe(v);
            }
        }
    }

    /// Uniform element of Z_p \ {0}.
    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        loop {
            let v = self.random(rng);
            if !v.is_zero() {
                return v;
            }
        }
    }

    /// Fixed-width big-endian encoding.
    pub fn encode(&self, x: Fe) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_len());
        self.encode_into(x, &mut out);
        out
    }

    pub fn encode_into(&self, x: Fe, out: &mut Vec<u8>) {
        let bytes = x.0.to_be_bytes();
        out.extend_from_slice(&bytes[16 - self.byte_len()..]);
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<Fe> {
        if bytes.len() != self.byte_len() {
            return Err(Error::Decode(format!(
                "expected {} bytes, got {}",
                self.byte_len(),
                bytes.len()
            )));
        }
        let mut buf = [0u8; 16];
        buf[16 - bytes.len()..].copy_from_slice(bytes);
        self.try_elem(u128::from_be_bytes(buf))
    }

    /// Lowercase hex of the fixed-width encoding (32 chars for λ = 128).
    pub fn to_hex(&self, x: Fe) -> String {
        hex::encode(self.encode(x))
    }

    pub fn from_hex(&self, s: &str) -> Result<Fe> {
        let bytes = hex::decode(s).map_err(|e| Error::Decode(format!("bad hex {s:?}: {e}")))?;
        self.decode(&bytes)
    }
}

/// Public parameters: the prime modulus and the security parameter λ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchemeParams {
    field: PrimeField,
}

impl SchemeParams {
    /// Parameters over an explicit prime. λ is its bit length.
    pub fn new(p: u128) -> Result<Self> {
        Ok(SchemeParams {
            field: PrimeField::new(p)?,
        })
    }

    /// Parameters for λ bits, using the largest λ-bit prime.
    pub fn for_lambda(lambda: u32) -> Result<Self> {
        if lambda == DEFAULT_LAMBDA {
            return Ok(Self::default());
        }
        if !(2..=128).contains(&lambda) {
            return Err(param(format!("lambda must be in 2..=128, got {lambda}")));
        }
        let top = if lambda == 128 {
            u128::MAX
        } else {
            (1u128 << lambda) - 1
        };
        let floor = 1u128 << (lambda - 1);
        let mut candidate = top;
        while candidate >= floor {
            if is_prime(candidate) {
                return Self::new(candidate);
            }
            candidate -= 1;
        }
        Err(param(format!("no {lambda}-bit prime found")))
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn modulus(&self) -> u128 {
        self.field.modulus()
    }

    pub fn lambda(&self) -> u32 {
        self.field.bits()
    }

    /// Errors unless both parameter sets agree on the modulus.
    pub fn ensure_same(&self, other: &SchemeParams) -> Result<()> {
        if self.modulus() != other.modulus() {
            return Err(param(format!(
                "mismatched moduli {:#x} and {:#x}",
                self.modulus(),
                other.modulus()
            )));
        }
        Ok(())
    }
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            field: PrimeField::default_128(),
        }
    }
}
