//! Two-server delegation of quadratic programs on label-masked data.
//!
//! A message `m` under label `τ` with masks `a = F_K(τ‖0)`, `b = F_K(τ‖1)`
//! is split into `(m − a, a − b)` for server 1 and `(m − b, a)` for server 2.
//! For a product this works because
//!
//! ```text
//! m1·m2 = (m1−a1)(m2−a2) − (a1−b1)(a2−b2)      <- server 1
//!       + a1(m2−b2) + a2(m1−b1)                <- server 2
//!       + b1·b2                                <- client
//! ```
//!
//! The client recomputes every mask from the PRF and stores nothing per item.

use std::collections::HashSet;

use rand::{CryptoRng, RngCore};

use crate::error::{Error, Result};
use crate::exec::{fold_reduce, Execution};
use crate::field::{Fe, PrimeField, SchemeParams};
use crate::prf::{Label, Prf, PrfKey, IDX_A, IDX_B};
use crate::program::QuadraticProgram;

/// Type tag byte of a serialized [`Share1`].
pub const SHARE1_TAG: u8 = 0x01;
/// Type tag byte of a serialized [`Share2`].
pub const SHARE2_TAG: u8 = 0x02;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey2S {
    k: PrfKey,
}

impl SecretKey2S {
    pub fn from_key(k: PrfKey) -> Self {
        SecretKey2S { k }
    }

    pub fn key(&self) -> &PrfKey {
        &self.k
    }

    pub fn masks(&self, params: &SchemeParams, label: &Label) -> (Fe, Fe) {
        let prf = Prf::new(&self.k);
        let f = params.field();
        (prf.at(f, label, IDX_A), prf.at(f, label, IDX_B))
    }
}

/// Server 1's share `(m − a, a − b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Share1 {
    pub u: Fe,
    pub v: Fe,
}

/// Server 2's share `(m − b, a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Share2 {
    pub w: Fe,
    pub a: Fe,
}

fn pair_to_bytes(field: &PrimeField, tag: u8, x: Fe, y: Fe) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + 2 * field.byte_len());
    out.push(tag);
    field.encode_into(x, &mut out);
    field.encode_into(y, &mut out);
    out
}

fn pair_from_bytes(field: &PrimeField, tag: u8, bytes: &[u8]) -> Result<(Fe, Fe)> {
    let w = field.byte_len();
    if bytes.len() != 1 + 2 * w {
        return Err(Error::Decode(format!("share must be {} bytes, got {}", 1 + 2 * w, bytes.len())));
    }
    if bytes[0] != tag {
        return Err(Error::Decode(format!("share tag {:#04x}, expected {tag:#04x}", bytes[0])));
    }
    Ok((field.decode(&bytes[1..1 + w])?, field.decode(&bytes[1 + w..])?))
}

impl Share1 {
    pub fn to_bytes(&self, field: &PrimeField) -> Vec<u8> {
        pair_to_bytes(field, SHARE1_TAG, self.u, self.v)
    }

    pub fn from_bytes(field: &PrimeField, bytes: &[u8]) -> Result<Self> {
        let (u, v) = pair_from_bytes(field, SHARE1_TAG, bytes)?;
        Ok(Share1 { u, v })
    }
}

impl Share2 {
    pub fn to_bytes(&self, field: &PrimeField) -> Vec<u8> {
        pair_to_bytes(field, SHARE2_TAG, self.w, self.a)
    }

    pub fn from_bytes(field: &PrimeField, bytes: &[u8]) -> Result<Self> {
        let (w, a) = pair_from_bytes(field, SHARE2_TAG, bytes)?;
        Ok(Share2 { w, a })
    }
}

/// Fresh key over the parameters for `lambda` (the default prime at 128).
pub fn keygen(lambda: u32) -> Result<(SecretKey2S, SchemeParams)> {
    let params = SchemeParams::for_lambda(lambda)?;
    Ok((SecretKey2S { k: PrfKey::generate()? }, params))
}

pub fn keygen_with<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> SecretKey2S {
    SecretKey2S {
        k: PrfKey::generate_with(rng),
    }
}

/// Splits `m` given explicit masks. [`encrypt`] is this with PRF masks;
/// tests call it directly to substitute enumerated or truly random masks.
pub fn encrypt_with_masks(params: &SchemeParams, m: Fe, a: Fe, b: Fe) -> (Share1, Share2) {
    let f = params.field();
    (
        Share1 {
            u: f.sub(m, a),
            v: f.sub(a, b),
        },
        Share2 { w: f.sub(m, b), a },
    )
}

pub fn encrypt(params: &SchemeParams, sk: &SecretKey2S, label: &Label, m: Fe) -> (Share1, Share2) {
    let (a, b) = sk.masks(params, label);
    encrypt_with_masks(params, m, a, b)
}

/// One encrypted data item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encrypted2S {
    pub label: Label,
    pub share1: Share1,
    pub share2: Share2,
}

/// Encrypts a dataset, rejecting any label that appears twice.
pub fn encrypt_dataset(params: &SchemeParams, sk: &SecretKey2S, rows: &[(Label, Fe)]) -> Result<Vec<Encrypted2S>> {
    let mut seen = HashSet::with_capacity(rows.len());
    let prf = Prf::new(&sk.k);
    let f = params.field();
    rows.iter()
        .map(|(label, m)| {
            if !seen.insert(label) {
                return Err(Error::DuplicateLabel(label.to_string()));
            }
            let (a, b) = (prf.at(f, label, IDX_A), prf.at(f, label, IDX_B));
            let (share1, share2) = encrypt_with_masks(params, *m, a, b);
            Ok(Encrypted2S {
                label: label.clone(),
                share1,
                share2,
            })
        })
        .collect()
}

fn check_len(prog: &QuadraticProgram, got: usize) -> Result<()> {
    if prog.n() != got {
        return Err(Error::LengthMismatch {
            expected: prog.n(),
            actual: got,
        });
    }
    Ok(())
}

/// Server 1: `Σ α_{i,j} [u_i u_j − v_i v_j]`. Linear terms and γ are ignored,
/// so a linear program yields 0.
pub fn eval1(params: &SchemeParams, prog: &QuadraticProgram, shares: &[Share1]) -> Result<Fe> {
    eval1_with(Execution::default(), params, prog, shares)
}

pub fn eval1_with(exec: Execution, params: &SchemeParams, prog: &QuadraticProgram, shares: &[Share1]) -> Result<Fe> {
    check_len(prog, shares.len())?;
    let f = params.field();
    Ok(fold_reduce(
        exec,
        prog.quad(),
        || Fe::ZERO,
        |acc, t| {
            let (si, sj) = (&shares[t.i], &shares[t.j]);
            let inner = f.sub(f.mul(si.u, sj.u), f.mul(si.v, sj.v));
            f.add(acc, f.mul(t.alpha, inner))
        },
        |x, y| f.add(x, y),
    ))
}

/// Server 2: `Σ α_{i,j} [a_j w_i + a_i w_j] + Σ β_k w_k`.
pub fn eval2(params: &SchemeParams, prog: &QuadraticProgram, shares: &[Share2]) -> Result<Fe> {
    eval2_with(Execution::default(), params, prog, shares)
}

pub fn eval2_with(exec: Execution, params: &SchemeParams, prog: &QuadraticProgram, shares: &[Share2]) -> Result<Fe> {
    check_len(prog, shares.len())?;
    let f = params.field();
    let quad = fold_reduce(
        exec,
        prog.quad(),
        || Fe::ZERO,
        |acc, t| {
            let (si, sj) = (&shares[t.i], &shares[t.j]);
            let inner = f.add(f.mul(sj.a, si.w), f.mul(si.a, sj.w));
            f.add(acc, f.mul(t.alpha, inner))
        },
        |x, y| f.add(x, y),
    );
    let lin = prog
        .lin()
        .iter()
        .fold(Fe::ZERO, |acc, t| f.add(acc, f.mul(t.beta, shares[t.k].w)));
    Ok(f.add(quad, lin))
}

/// `c1 + c2 + f(b_1, …, b_n)` with the `b_i` recomputed from the key.
pub fn decrypt(params: &SchemeParams, sk: &SecretKey2S, prog: &QuadraticProgram, c1: Fe, c2: Fe) -> Fe {
    let prf = Prf::new(&sk.k);
    let f = params.field();
    let b: Vec<Fe> = prog.labels().iter().map(|l| prf.at(f, l, IDX_B)).collect();
    decrypt_with_masks(params, prog, &b, c1, c2).expect("one mask per label")
}

/// Decryption given the second masks explicitly.
pub fn decrypt_with_masks(params: &SchemeParams, prog: &QuadraticProgram, b: &[Fe], c1: Fe, c2: Fe) -> Result<Fe> {
    let f = params.field();
    let offset = prog.eval_plain(f, b)?;
    Ok(f.add(f.add(c1, c2), offset))
}
