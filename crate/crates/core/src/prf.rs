//! Keyed derivation of field elements from labels.
//!
//! `F_K(τ‖j)` is AES-128-CMAC over `len(τ) as u32 BE ‖ τ ‖ j`, read as a
//! big-endian 128-bit integer and reduced mod p. The length prefix makes the
//! (label, index) → input map injective across labels of different length.

use std::fmt;

use aes::Aes128;
use cmac::{Cmac, Mac};
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore};

use crate::error::{param, Error, Result};
use crate::field::{Fe, PrimeField};

/// Index byte for the first mask `a` (and `r1` under the MAC key).
pub const IDX_A: usize = 0;
/// Index byte for the second mask `b` (and `r2`).
pub const IDX_B: usize = 1;
/// Largest index representable in the single index byte.
pub const MAX_INDEX: usize = u8::MAX as usize;

/// 128-bit PRF seed.
#[derive(Clone, PartialEq, Eq)]
pub struct PrfKey([u8; 16]);

impl PrfKey {
    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        PrfKey(bytes)
    }

    /// Fresh key from the operating system CSPRNG.
    pub fn generate() -> Result<Self> {
        let mut bytes = [0u8; 16];
        OsRng
            .try_fill_bytes(&mut bytes)
            .map_err(|e| Error::Randomness(e.to_string()))?;
        Ok(PrfKey(bytes))
    }

    /// Key drawn from a caller-supplied CSPRNG (seeded runs and tests).
    pub fn generate_with<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 16];
        rng.fill_bytes(&mut bytes);
        PrfKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Decode(format!("bad key hex: {e}")))?;
        let arr: [u8; 16] = bytes
            .try_into()
            .map_err(|_| Error::Decode("PRF key must be 16 bytes".into()))?;
        Ok(PrfKey(arr))
    }
}

impl fmt::Debug for PrfKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrfKey(..)")
    }
}

/// A data label τ. Non-empty, compared as raw bytes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Vec<u8>);

impl Label {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(param("labels must be non-empty"));
        }
        if bytes.len() > u32::MAX as usize {
            return Err(param("label longer than 2^32-1 bytes"));
        }
        Ok(Label(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// UTF-8 view, if the label happens to be text.
    pub fn as_str(&self) -> Option<&str> {
        std::str::from_utf8(&self.0).ok()
    }
}

impl TryFrom<&str> for Label {
    type Error = Error;
    fn try_from(s: &str) -> Result<Self> {
        Label::new(s.as_bytes())
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_str() {
            Some(s) => write!(f, "Label({s:?})"),
            None => write!(f, "Label(0x{})", hex::encode(&self.0)),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_str() {
            Some(s) => f.write_str(s),
            None => write!(f, "0x{}", hex::encode(&self.0)),
        }
    }
}

/// The keyed function with its AES key schedule expanded once.
#[derive(Clone)]
pub struct Prf {
    mac: Cmac<Aes128>,
}

impl Prf {
    pub fn new(key: &PrfKey) -> Self {
        let mac = <Cmac<Aes128> as Mac>::new_from_slice(&key.0).expect("16-byte key");
        Prf { mac }
    }

    /// Raw 128-bit MAC of `len ‖ label ‖ index`.
    pub fn mac128(&self, label: &Label, index: usize) -> Result<u128> {
        if index > MAX_INDEX {
            return Err(param(format!("PRF index {index} exceeds {MAX_INDEX}")));
        }
        let mut mac = self.mac.clone();
        mac.update(&(label.0.len() as u32).to_be_bytes());
        mac.update(&label.0);
        mac.update(&[index as u8]);
        let tag: [u8; 16] = mac.finalize().into_bytes().into();
        Ok(u128::from_be_bytes(tag))
    }

    /// `F_K(τ‖index)` as an element of the field.
    pub fn eval(&self, field: &PrimeField, label: &Label, index: usize) -> Result<Fe> {
        Ok(field.elem(self.mac128(label, index)?))
    }

    /// Infallible evaluation for the fixed indices the schemes use.
    pub(crate) fn at(&self, field: &PrimeField, label: &Label, index: usize) -> Fe {
        debug_assert!(index <= MAX_INDEX);
        self.eval(field, label, index).expect("index in range")
    }
}

impl fmt::Debug for Prf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Prf(..)")
    }
}

/// One-shot `F_K(τ‖index)`.
pub fn prf_eval(field: &PrimeField, key: &PrfKey, label: &Label, index: usize) -> Result<Fe> {
    Prf::new(key).eval(field, label, index)
}

/// The two masks `(a, b) = (F_K(τ‖0), F_K(τ‖1))`.
pub fn derive_masks_2s(field: &PrimeField, key: &PrfKey, label: &Label) -> (Fe, Fe) {
    let prf = Prf::new(key);
    (prf.at(field, label, IDX_A), prf.at(field, label, IDX_B))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(s: &str) -> Label {
        Label::try_from(s).unwrap()
    }

    #[test]
    fn deterministic_and_index_separated() {
        let f = PrimeField::default_128();
        let k = PrfKey::from_bytes([7; 16]);
        let t = label("sensor-17");
        let x0 = prf_eval(&f, &k, &t, 0).unwrap();
        assert_eq!(x0, prf_eval(&f, &k, &t, 0).unwrap());
        assert_ne!(x0, prf_eval(&f, &k, &t, 1).unwrap());
        assert!(prf_eval(&f, &k, &t, 256).is_err());
    }

    #[test]
    fn length_prefix_separates_inputs() {
        let prf = Prf::new(&PrfKey::from_bytes([1; 16]));
        // ("x\0", 1) and ("x", 0) with an appended 1 would collide without the prefix
        let a = prf.mac128(&Label::new(b"x\x00".to_vec()).unwrap(), 1).unwrap();
        let b = prf.mac128(&label("x"), 0).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn masks_change_with_label() {
        let f = PrimeField::default_128();
        let k = PrfKey::from_bytes([3; 16]);
        let (a, b) = derive_masks_2s(&f, &k, &label("abc"));
        let (a2, b2) = derive_masks_2s(&f, &k, &label("abd"));
        assert_ne!(a, b);
        assert_ne!(a, a2);
        assert_ne!(b, b2);
        assert_eq!((a, b), derive_masks_2s(&f, &k, &label("abc")));
    }

    #[test]
    fn empty_label_rejected() {
        assert!(Label::new(Vec::new()).is_err());
    }

    #[test]
    fn key_hex_roundtrip() {
        let k = PrfKey::from_bytes([0xab; 16]);
        assert_eq!(PrfKey::from_hex(&k.to_hex()).unwrap(), k);
        assert!(PrfKey::from_hex("abcd").is_err());
    }
}
