//! Univariate polynomials over Z_p used as homomorphic MAC tags.
//!
//! A fresh tag `y` for payload `m` satisfies `y(0) = m` and `y(s) = r` where
//! `s` is the secret verification point and `r` a PRF output. Ring operations
//! on tags track the same operations on payloads (at 0) and on PRF outputs
//! (at `s`).

use crate::error::{Error, Result};
use crate::field::{Fe, PrimeField};

/// Coefficients stored constant-first. The vector length fixes the declared
/// degree; high coefficients may be zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagPolynomial {
    coeffs: Vec<Fe>,
}

impl TagPolynomial {
    pub fn new(coeffs: Vec<Fe>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Parameter("polynomial needs at least one coefficient".into()));
        }
        Ok(TagPolynomial { coeffs })
    }

    /// The zero polynomial with `degree + 1` coefficient slots.
    pub fn zero(degree: usize) -> Self {
        TagPolynomial {
            coeffs: vec![Fe::ZERO; degree + 1],
        }
    }

    pub fn constant(c: Fe) -> Self {
        TagPolynomial { coeffs: vec![c] }
    }

    /// Fresh degree-1 tag: `payload + (target - payload) * s_inv * x`.
    pub fn fresh(field: &PrimeField, payload: Fe, target: Fe, s_inv: Fe) -> Self {
        let slope = field.mul(field.sub(target, payload), s_inv);
        TagPolynomial {
            coeffs: vec![payload, slope],
        }
    }

    pub fn coeffs(&self) -> &[Fe] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Fe {
        self.coeffs.get(i).copied().unwrap_or(Fe::ZERO)
    }

    /// Declared degree (number of slots minus one).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, field: &PrimeField, x: Fe) -> Fe {
        self.coeffs
            .iter()
            .rev()
            .fold(Fe::ZERO, |acc, &c| field.add(field.mul(acc, x), c))
    }

    pub fn add(&self, field: &PrimeField, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        TagPolynomial {
            coeffs: (0..n).map(|i| field.add(self.coeff(i), other.coeff(i))).collect(),
        }
    }

    pub fn sub(&self, field: &PrimeField, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        TagPolynomial {
            coeffs: (0..n).map(|i| field.sub(self.coeff(i), other.coeff(i))).collect(),
        }
    }

    pub fn neg(&self, field: &PrimeField) -> Self {
        TagPolynomial {
            coeffs: self.coeffs.iter().map(|&c| field.neg(c)).collect(),
        }
    }

    pub fn mul(&self, field: &PrimeField, other: &Self) -> Self {
        let mut coeffs = vec![Fe::ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = field.add(coeffs[i + j], field.mul(a, b));
            }
        }
        TagPolynomial { coeffs }
    }

    pub fn scale(&self, field: &PrimeField, k: Fe) -> Self {
        TagPolynomial {
            coeffs: self.coeffs.iter().map(|&c| field.mul(c, k)).collect(),
        }
    }

    /// Extends with zero coefficients up to `degree`. Never truncates.
    pub fn padded(mut self, degree: usize) -> Self {
        if self.coeffs.len() < degree + 1 {
            self.coeffs.resize(degree + 1, Fe::ZERO);
        }
        self
    }

    /// `degree byte ‖ coefficients`, each in the field's fixed-width encoding.
    pub fn to_bytes(&self, field: &PrimeField) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.coeffs.len() * field.byte_len());
        out.push(self.degree() as u8);
        for &c in &self.coeffs {
            field.encode_into(c, &mut out);
        }
        out
    }

    pub fn from_bytes(field: &PrimeField, bytes: &[u8]) -> Result<Self> {
        let (&degree, rest) = bytes
            .split_first()
            .ok_or_else(|| Error::Decode("empty polynomial encoding".into()))?;
        let w = field.byte_len();
        let expected = (degree as usize + 1) * w;
        if rest.len() != expected {
            return Err(Error::Decode(format!(
                "degree-{degree} polynomial needs {expected} bytes, got {}",
                rest.len()
            )));
        }
        let coeffs = rest
            .chunks(w)
            .map(|c| field.decode(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(TagPolynomial { coeffs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_tag_interpolates() {
        let f = PrimeField::new(97).unwrap();
        let e = |v| f.elem(v);
        let s = e(7);
        let y = TagPolynomial::fresh(&f, e(3), e(10), f.inv(s).unwrap());
        assert_eq!(y.coeffs(), &[e(3), e(1)]);
        assert_eq!(y.eval(&f, Fe::ZERO), e(3));
        assert_eq!(y.eval(&f, s), e(10));
        // target == payload gives slope 0
        let flat = TagPolynomial::fresh(&f, e(5), e(5), f.inv(s).unwrap());
        assert_eq!(flat.coeff(1), Fe::ZERO);
    }

    #[test]
    fn product_by_hand() {
        let f = PrimeField::new(97).unwrap();
        let p = |c: &[u128]| TagPolynomial::new(c.iter().map(|&v| f.elem(v)).collect()).unwrap();
        let lhs = p(&[3, 1]).mul(&f, &p(&[2, 4]));
        let rhs = p(&[1, 0]).mul(&f, &p(&[1, 0]));
        assert_eq!(lhs.sub(&f, &rhs), p(&[5, 14, 4]));
    }

    #[test]
    fn bytes_roundtrip_and_rejects() {
        let f = PrimeField::default_128();
        let y = TagPolynomial::new(vec![f.elem(1), f.elem(2), f.elem(3)]).unwrap();
        let b = y.to_bytes(&f);
        assert_eq!(b.len(), 1 + 3 * 16);
        assert_eq!(TagPolynomial::from_bytes(&f, &b).unwrap(), y);
        assert!(TagPolynomial::from_bytes(&f, &b[..b.len() - 1]).is_err());
        assert!(TagPolynomial::from_bytes(&f, &[]).is_err());
    }
}
