//! Verifiable two-server delegation.
//!
//! Each share component travels as a degree-1 tag polynomial `y` with
//! `y(0)` the payload and `y(s)` a PRF output under a second key; server 1's
//! tags use the point `s1`, server 2's use `s2`. Servers run the 2S
//! evaluation with polynomial arithmetic, producing degree-2 tags. The client
//! recomputes what each tag must evaluate to at its secret point and rejects
//! on any mismatch.

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{fold_reduce, Execution};
use crate::field::{Fe, PrimeField, SchemeParams};
use crate::poly::TagPolynomial;
use crate::prf::{Label, Prf, PrfKey, IDX_A, IDX_B};
use crate::program::QuadraticProgram;

pub const VSHARE1_TAG: u8 = 0x11;
pub const VSHARE2_TAG: u8 = 0x12;

/// `(K1, K2, s1, s2)` with `s1, s2 ≠ 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey2V {
    k1: PrfKey,
    k2: PrfKey,
    s1: Fe,
    s2: Fe,
    s1_inv: Fe,
    s2_inv: Fe,
}

impl SecretKey2V {
    pub fn new(params: &SchemeParams, k1: PrfKey, k2: PrfKey, s1: Fe, s2: Fe) -> Result<Self> {
        let f = params.field();
        let s1_inv = f.inv(s1).map_err(|_| Error::Parameter("verification point s1 must be nonzero".into()))?;
        let s2_inv = f.inv(s2).map_err(|_| Error::Parameter("verification point s2 must be nonzero".into()))?;
        Ok(SecretKey2V {
            k1,
            k2,
            s1,
            s2,
            s1_inv,
            s2_inv,
        })
    }

    pub fn mask_key(&self) -> &PrfKey {
        &self.k1
    }

    pub fn mac_key(&self) -> &PrfKey {
        &self.k2
    }

    pub fn s1(&self) -> Fe {
        self.s1
    }

    pub fn s2(&self) -> Fe {
        self.s2
    }

    /// `(a, b, [r1, r2, r3, r4])` for one label.
    pub fn label_values(&self, params: &SchemeParams, label: &Label) -> (Fe, Fe, [Fe; 4]) {
        let f = params.field();
        let (p1, p2) = (Prf::new(&self.k1), Prf::new(&self.k2));
        (
            p1.at(f, label, IDX_A),
            p1.at(f, label, IDX_B),
            [0, 1, 2, 3].map(|j| p2.at(f, label, j)),
        )
    }
}

/// `(y1, y2)`: tags on `m − a` and `a − b` at point `s1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VShare1 {
    pub y1: TagPolynomial,
    pub y2: TagPolynomial,
}

/// `(y3, y4)`: tags on `m − b` and `a` at point `s2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VShare2 {
    pub y3: TagPolynomial,
    pub y4: TagPolynomial,
}

fn tags_to_bytes(field: &PrimeField, tag: u8, x: &TagPolynomial, y: &TagPolynomial) -> Vec<u8> {
    let mut out = vec![tag];
    out.extend(x.to_bytes(field));
    out.extend(y.to_bytes(field));
    out
}

fn tags_from_bytes(field: &PrimeField, tag: u8, bytes: &[u8]) -> Result<(TagPolynomial, TagPolynomial)> {
    // each fresh tag is degree byte + 2 coefficients
    let one = 1 + 2 * field.byte_len();
    if bytes.len() != 1 + 2 * one {
        return Err(Error::Decode(format!("verifiable share must be {} bytes, got {}", 1 + 2 * one, bytes.len())));
    }
    if bytes[0] != tag {
        return Err(Error::Decode(format!("share tag {:#04x}, expected {tag:#04x}", bytes[0])));
    }
    let x = TagPolynomial::from_bytes(field, &bytes[1..1 + one])?;
    let y = TagPolynomial::from_bytes(field, &bytes[1 + one..])?;
    if x.degree() != 1 || y.degree() != 1 {
        return Err(Error::Decode("fresh tags must have degree 1".into()));
    }
    Ok((x, y))
}

impl VShare1 {
    pub fn to_bytes(&self, field: &PrimeField) -> Vec<u8> {
        tags_to_bytes(field, VSHARE1_TAG, &self.y1, &self.y2)
    }

    pub fn from_bytes(field: &PrimeField, bytes: &[u8]) -> Result<Self> {
        let (y1, y2) = tags_from_bytes(field, VSHARE1_TAG, bytes)?;
        Ok(VShare1 { y1, y2 })
    }
}

impl VShare2 {
    pub fn to_bytes(&self, field: &PrimeField) -> Vec<u8> {
        tags_to_bytes(field, VSHARE2_TAG, &self.y3, &self.y4)
    }

    pub fn from_bytes(field: &PrimeField, bytes: &[u8]) -> Result<Self> {
        let (y3, y4) = tags_from_bytes(field, VSHARE2_TAG, bytes)?;
        Ok(VShare2 { y3, y4 })
    }
}

pub fn vkeygen(lambda: u32) -> Result<(SecretKey2V, SchemeParams)> {
    let params = SchemeParams::for_lambda(lambda)?;
    let mut rng = rand::rngs::OsRng;
    let f = params.field();
    let (s1, s2) = (f.random_nonzero(&mut rng), f.random_nonzero(&mut rng));
    let sk = SecretKey2V::new(&params, PrfKey::generate()?, PrfKey::generate()?, s1, s2)?;
    Ok((sk, params))
}

/// Key from a caller-supplied CSPRNG. `s1`, `s2` are resampled until nonzero.
pub fn vkeygen_with<R: RngCore + CryptoRng + ?Sized>(params: &SchemeParams, rng: &mut R) -> SecretKey2V {
    let k1 = PrfKey::generate_with(rng);
    let k2 = PrfKey::generate_with(rng);
    let f = params.field();
    let s1 = f.random_nonzero(rng);
    let s2 = f.random_nonzero(rng);
    SecretKey2V::new(params, k1, k2, s1, s2).expect("nonzero points")
}

/// Builds both shares from explicit masks and MAC targets.
pub fn vencrypt_with_values(params: &SchemeParams, sk: &SecretKey2V, m: Fe, a: Fe, b: Fe, r: [Fe; 4]) -> (VShare1, VShare2) {
    let f = params.field();
    let tag1 = |payload, target| TagPolynomial::fresh(f, payload, target, sk.s1_inv);
    let tag2 = |payload, target| TagPolynomial::fresh(f, payload, target, sk.s2_inv);
    (
        VShare1 {
            y1: tag1(f.sub(m, a), r[0]),
            y2: tag1(f.sub(a, b), r[1]),
        },
        VShare2 {
            y3: tag2(f.sub(m, b), r[2]),
            y4: tag2(a, r[3]),
        },
    )
}

pub fn vencrypt(params: &SchemeParams, sk: &SecretKey2V, label: &Label, m: Fe) -> (VShare1, VShare2) {
    let (a, b, r) = sk.label_values(params, label);
    vencrypt_with_values(params, sk, m, a, b, r)
}

type Lin = [Fe; 2];
type Quad = [Fe; 3];

#[inline]
fn lin_of(y: &TagPolynomial) -> Lin {
    [y.coeff(0), y.coeff(1)]
}

#[inline]
fn lin_mul(f: &PrimeField, x: Lin, y: Lin) -> Quad {
    [
        f.mul(x[0], y[0]),
        f.add(f.mul(x[0], y[1]), f.mul(x[1], y[0])),
        f.mul(x[1], y[1]),
    ]
}

#[inline]
fn quad_add(f: &PrimeField, x: Quad, y: Quad) -> Quad {
    [f.add(x[0], y[0]), f.add(x[1], y[1]), f.add(x[2], y[2])]
}

fn quad_to_tag(q: Quad) -> TagPolynomial {
    TagPolynomial::new(q.to_vec()).expect("three coefficients")
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

/// Server 1: `Σ α_{i,j} [y1_i·y1_j − y2_i·y2_j]` as a degree-2 tag.
pub fn veval1(params: &SchemeParams, prog: &QuadraticProgram, shares: &[VShare1]) -> Result<TagPolynomial> {
    veval1_with(Execution::default(), params, prog, shares)
}

pub fn veval1_with(exec: Execution, params: &SchemeParams, prog: &QuadraticProgram, shares: &[VShare1]) -> Result<TagPolynomial> {
    check_len(prog, shares.len())?;
    let f = params.field();
    let tags: Vec<(Lin, Lin)> = shares.iter().map(|s| (lin_of(&s.y1), lin_of(&s.y2))).collect();
    let zero = [Fe::ZERO; 3];
    let acc = fold_reduce(
        exec,
        prog.quad(),
        || zero,
        |acc, t| {
            let (xi, xj) = (&tags[t.i], &tags[t.j]);
            let p = lin_mul(f, xi.0, xj.0);
            let q = lin_mul(f, xi.1, xj.1);
            let d = [f.sub(p[0], q[0]), f.sub(p[1], q[1]), f.sub(p[2], q[2])];
            quad_add(f, acc, d.map(|c| f.mul(t.alpha, c)))
        },
        |x, y| quad_add(f, x, y),
    );
    Ok(quad_to_tag(acc))
}

/// Server 2: `Σ α_{i,j} [y3_i·y4_j + y4_i·y3_j] + Σ β_k y3_k` as a degree-2 tag.
pub fn veval2(params: &SchemeParams, prog: &QuadraticProgram, shares: &[VShare2]) -> Result<TagPolynomial> {
    veval2_with(Execution::default(), params, prog, shares)
}

pub fn veval2_with(exec: Execution, params: &SchemeParams, prog: &QuadraticProgram, shares: &[VShare2]) -> Result<TagPolynomial> {
    check_len(prog, shares.len())?;
    let f = params.field();
    let tags: Vec<(Lin, Lin)> = shares.iter().map(|s| (lin_of(&s.y3), lin_of(&s.y4))).collect();
    let zero = [Fe::ZERO; 3];
    let quad = fold_reduce(
        exec,
        prog.quad(),
        || zero,
        |acc, t| {
            let (xi, xj) = (&tags[t.i], &tags[t.j]);
            let s = quad_add(f, lin_mul(f, xi.0, xj.1), lin_mul(f, xi.1, xj.0));
            quad_add(f, acc, s.map(|c| f.mul(t.alpha, c)))
        },
        |x, y| quad_add(f, x, y),
    );
    let lin = prog.lin().iter().fold(zero, |acc, t| {
        let y3 = tags[t.k].0;
        quad_add(f, acc, [f.mul(t.beta, y3[0]), f.mul(t.beta, y3[1]), Fe::ZERO])
    });
    Ok(quad_to_tag(quad_add(f, quad, lin)))
}

/// Which verification equation failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    Server1,
    Server2,
    Both,
}

/// Outcome of verified decryption. `Reject` is ⊥, not an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Accept(Fe),
    Reject(RejectReason),
}

impl Decision {
    pub fn value(self) -> Option<Fe> {
        match self {
            Decision::Accept(v) => Some(v),
            Decision::Reject(_) => None,
        }
    }

    pub fn is_accept(self) -> bool {
        matches!(self, Decision::Accept(_))
    }
}

/// Expected tag values at the secret points, recomputed from `K2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MacTargets {
    pub r1: Fe,
    pub r2: Fe,
}

/// Per-server verification result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verification {
    pub server1: bool,
    pub server2: bool,
}

/// `R1 = Σ α [r_{i,1} r_{j,1} − r_{i,2} r_{j,2}]`,
/// `R2 = Σ α [r_{i,3} r_{j,4} + r_{i,4} r_{j,3}] + Σ β r_{k,3}`.
pub fn mac_targets(params: &SchemeParams, sk: &SecretKey2V, prog: &QuadraticProgram) -> MacTargets {
    let f = params.field();
    let prf = Prf::new(&sk.k2);
    let r: Vec<[Fe; 4]> = prog
        .labels()
        .iter()
        .map(|l| [0, 1, 2, 3].map(|j| prf.at(f, l, j)))
        .collect();
    mac_targets_from(f, prog, &r)
}

pub(crate) fn mac_targets_from(f: &PrimeField, prog: &QuadraticProgram, r: &[[Fe; 4]]) -> MacTargets {
    let mut r1 = Fe::ZERO;
    let mut r2 = Fe::ZERO;
    for t in prog.quad() {
        let (ri, rj) = (&r[t.i], &r[t.j]);
        let x = f.sub(f.mul(ri[0], rj[0]), f.mul(ri[1], rj[1]));
        let y = f.add(f.mul(ri[2], rj[3]), f.mul(ri[3], rj[2]));
        r1 = f.add(r1, f.mul(t.alpha, x));
        r2 = f.add(r2, f.mul(t.alpha, y));
    }
    for t in prog.lin() {
        r2 = f.add(r2, f.mul(t.beta, r[t.k][2]));
    }
    MacTargets { r1, r2 }
}

fn check_shape(c: &TagPolynomial) -> Result<()> {
    if c.degree() > 2 {
        return Err(Error::Parameter(format!(
            "evaluated tag must have degree at most 2, got {}",
            c.degree()
        )));
    }
    Ok(())
}

/// Checks each server's equation independently.
pub fn verify(params: &SchemeParams, sk: &SecretKey2V, prog: &QuadraticProgram, c1: &TagPolynomial, c2: &TagPolynomial) -> Result<Verification> {
    check_shape(c1)?;
    check_shape(c2)?;
    let f = params.field();
    let targets = mac_targets(params, sk, prog);
    Ok(Verification {
        server1: c1.eval(f, sk.s1) == targets.r1,
        server2: c2.eval(f, sk.s2) == targets.r2,
    })
}

/// Verified decryption: `c1(0) + c2(0) + f(b)` if both equations hold.
pub fn vdecrypt(params: &SchemeParams, sk: &SecretKey2V, prog: &QuadraticProgram, c1: &TagPolynomial, c2: &TagPolynomial) -> Result<Decision> {
    let v = verify(params, sk, prog, c1, c2)?;
    match (v.server1, v.server2) {
        (true, true) => {}
        (false, true) => return Ok(Decision::Reject(RejectReason::Server1)),
        (true, false) => return Ok(Decision::Reject(RejectReason::Server2)),
        (false, false) => return Ok(Decision::Reject(RejectReason::Both)),
    }
    let f = params.field();
    let prf = Prf::new(&sk.k1);
    let b: Vec<Fe> = prog.labels().iter().map(|l| prf.at(f, l, IDX_B)).collect();
    let offset = prog.eval_plain(f, &b)?;
    Ok(Decision::Accept(f.add(f.add(c1.coeff(0), c2.coeff(0)), offset)))
}
