//! Delegation of a degree-d monomial `∏ m_i` to d non-colluding servers.
//!
//! Every message `m_i` gets d masks `a_{i,1..d}` from the PRF. Server `j`
//! stores, for each row `i`, all masks in the clear except column `j`, which
//! holds `m_i − a_{i,j}` instead.
//!
//! Server 1 returns `S_1 = ∏_i (m_i − a_{i,1})`. Server `j ≥ 2` returns
//!
//! ```text
//! S_j = Σ_{|T| = j−1} c(T) · ∏_{i ∉ T} (m_i − a_{i,j})
//! ```
//!
//! where `T` ranges over (j−1)-subsets of rows and the cascade coefficient
//! `c(T)` is chosen so that the `m`-monomials over the complement of `T`
//! cancel against everything servers `1..j−1` produced:
//!
//! ```text
//! c(∅) = 1
//! c(V) = −Σ_{U ⊊ V} c(U) · ∏_{i ∈ V∖U} (−a_{i,|U|+1})
//! ```
//!
//! `c(V)` only reads mask columns `1..|V|`, all of which server `|V|+1` holds.
//! `Σ_j S_j` is then `∏ m_i` plus a constant the client recomputes from the
//! PRF by running the same formulas with every `m_i = 0`.

use crate::error::{Error, Result};
use crate::field::{Fe, PrimeField, SchemeParams};
use crate::poly::TagPolynomial;
use crate::prf::{Label, Prf, PrfKey};

/// Largest supported server count. Cost grows like `3^d`.
pub const MAX_SERVERS: usize = 16;

pub const ROW_TAG: u8 = 0x21;
pub const TAGGED_ROW_TAG: u8 = 0x22;

/// Commutative ring operations the cascade is written against.
pub trait Ring {
    type Elem: Clone;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn mul(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn neg(&self, x: &Self::Elem) -> Self::Elem;
}

impl Ring for PrimeField {
    type Elem = Fe;
    fn zero(&self) -> Fe {
        Fe::ZERO
    }
    fn one(&self) -> Fe {
        PrimeField::one(self)
    }
    fn add(&self, x: &Fe, y: &Fe) -> Fe {
        PrimeField::add(self, *x, *y)
    }
    fn mul(&self, x: &Fe, y: &Fe) -> Fe {
        PrimeField::mul(self, *x, *y)
    }
    fn neg(&self, x: &Fe) -> Fe {
        PrimeField::neg(self, *x)
    }
}

/// Tag polynomials under addition and multiplication.
#[derive(Clone, Copy, Debug)]
pub struct TagRing<'a>(pub &'a PrimeField);

impl Ring for TagRing<'_> {
    type Elem = TagPolynomial;
    fn zero(&self) -> TagPolynomial {
        TagPolynomial::zero(0)
    }
    fn one(&self) -> TagPolynomial {
        TagPolynomial::constant(self.0.one())
    }
    fn add(&self, x: &TagPolynomial, y: &TagPolynomial) -> TagPolynomial {
        x.add(self.0, y)
    }
    fn mul(&self, x: &TagPolynomial, y: &TagPolynomial) -> TagPolynomial {
        x.mul(self.0, y)
    }
    fn neg(&self, x: &TagPolynomial) -> TagPolynomial {
        x.neg(self.0)
    }
}

fn check_d(d: usize) -> Result<()> {
    if !(2..=MAX_SERVERS).contains(&d) {
        return Err(Error::Parameter(format!("server count must be in 2..={MAX_SERVERS}, got {d}")));
    }
    Ok(())
}

fn check_square<E>(m: &[Vec<E>]) -> Result<usize> {
    let d = m.len();
    check_d(d)?;
    if let Some(row) = m.iter().find(|r| r.len() != d) {
        return Err(Error::LengthMismatch {
            expected: d,
            actual: row.len(),
        });
    }
    Ok(d)
}

/// Cascade coefficients `c(V)` for every row subset `V` with `|V| ≤ max_size`,
/// indexed by bitmask. Entries for larger subsets are left at zero.
///
/// `view[i][k]` is the entry for row `i`, column `k` (both zero-based); only
/// columns `0..max_size` are read.
pub fn cascade<R: Ring>(ring: &R, view: &[Vec<R::Elem>], max_size: usize) -> Vec<R::Elem> {
    let d = view.len();
    let neg: Vec<Vec<R::Elem>> = (0..max_size.min(d))
        .map(|k| (0..d).map(|i| ring.neg(&view[i][k])).collect())
        .collect();
    let mut c = vec![ring.zero(); 1 << d];
    c[0] = ring.one();
    // numeric order visits every submask before its supersets
    for mask in 1usize..(1 << d) {
        if mask.count_ones() as usize > max_size {
            continue;
        }
        let mut sum = ring.zero();
        let mut sub = (mask - 1) & mask;
        loop {
            let col = &neg[sub.count_ones() as usize];
            let mut term = c[sub].clone();
            let mut rest = mask & !sub;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                term = ring.mul(&term, &col[i]);
                rest &= rest - 1;
            }
            sum = ring.add(&sum, &term);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & mask;
        }
        c[mask] = ring.neg(&sum);
    }
    c
}

/// `S_j` from server `j`'s view (`j` is one-based; column `j−1` holds the
/// masked values).
pub fn server_sum<R: Ring>(ring: &R, j: usize, view: &[Vec<R::Elem>]) -> Result<R::Elem> {
    let d = check_square(view)?;
    if !(1..=d).contains(&j) {
        return Err(Error::Parameter(format!("server index {j} outside 1..={d}")));
    }
    let c = cascade(ring, view, j - 1);
    let masked: Vec<R::Elem> = view.iter().map(|row| row[j - 1].clone()).collect();
    let full = (1usize << d) - 1;
    let mut total = ring.zero();
    for mask in 0usize..(1 << d) {
        if mask.count_ones() as usize != j - 1 {
            continue;
        }
        let mut term = c[mask].clone();
        let mut rest = full & !mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            term = ring.mul(&term, &masked[i]);
            rest &= rest - 1;
        }
        total = ring.add(&total, &term);
    }
    Ok(total)
}

/// One server's row for one label: masks in the clear except the owner's column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareMatrixRow {
    pub entries: Vec<Fe>,
}

impl ShareMatrixRow {
    /// `tag ‖ owner ‖ d ‖ entries`.
    pub fn to_bytes(&self, field: &PrimeField, owner: usize) -> Vec<u8> {
        let mut out = vec![ROW_TAG, owner as u8, self.entries.len() as u8];
        for &e in &self.entries {
            field.encode_into(e, &mut out);
        }
        out
    }

    /// Returns the row and its owning server.
    pub fn from_bytes(field: &PrimeField, bytes: &[u8]) -> Result<(Self, usize)> {
        let (owner, d, body) = row_header(bytes, ROW_TAG)?;
        let w = field.byte_len();
        if body.len() != d * w {
            return Err(Error::Decode(format!("row needs {} bytes, got {}", d * w, body.len())));
        }
        let entries = body.chunks(w).map(|c| field.decode(c)).collect::<Result<Vec<_>>>()?;
        Ok((ShareMatrixRow { entries }, owner))
    }
}

fn row_header(bytes: &[u8], tag: u8) -> Result<(usize, usize, &[u8])> {
    if bytes.len() < 3 || bytes[0] != tag {
        return Err(Error::Decode(format!("expected share-matrix row tagged {tag:#04x}")));
    }
    let (owner, d) = (bytes[1] as usize, bytes[2] as usize);
    check_d(d).map_err(|e| Error::Decode(e.to_string()))?;
    if !(1..=d).contains(&owner) {
        return Err(Error::Decode(format!("owner {owner} outside 1..={d}")));
    }
    Ok((owner, d, &bytes[3..]))
}

/// Server `owner`'s d×d table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareMatrix {
    owner: usize,
    rows: Vec<ShareMatrixRow>,
}

impl ShareMatrix {
    pub fn new(owner: usize, rows: Vec<ShareMatrixRow>) -> Result<Self> {
        let d = rows.len();
        check_d(d)?;
        if let Some(r) = rows.iter().find(|r| r.entries.len() != d) {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: r.entries.len(),
            });
        }
        if !(1..=d).contains(&owner) {
            return Err(Error::Parameter(format!("owner {owner} outside 1..={d}")));
        }
        Ok(ShareMatrix { owner, rows })
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn d(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[ShareMatrixRow] {
        &self.rows
    }

    fn view(&self) -> Vec<Vec<Fe>> {
        self.rows.iter().map(|r| r.entries.clone()).collect()
    }

    /// `owner ‖ d ‖ d² entries row-major`.
    pub fn to_bytes(&self, field: &PrimeField) -> Vec<u8> {
        let mut out = vec![self.owner as u8, self.d() as u8];
        for r in &self.rows {
            for &e in &r.entries {
                field.encode_into(e, &mut out);
            }
        }
        out
    }

    pub fn from_bytes(field: &PrimeField, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 2 {
            return Err(Error::Decode("share matrix too short".into()));
        }
        let (owner, d) = (bytes[0] as usize, bytes[1] as usize);
        let w = field.byte_len();
        if bytes.len() != 2 + d * d * w {
            return Err(Error::Decode(format!("share matrix needs {} bytes", 2 + d * d * w)));
        }
        let vals = bytes[2..].chunks(w).map(|c| field.decode(c)).collect::<Result<Vec<_>>>()?;
        let rows = vals.chunks(d).map(|r| ShareMatrixRow { entries: r.to_vec() }).collect();
        Self::new(owner, rows).map_err(|e| Error::Decode(e.to_string()))
    }
}

/// `a_{i,1..d}` for one label: `F_K(τ‖k)` for `k = 0..d−1`.
pub fn mask_row(params: &SchemeParams, key: &PrfKey, label: &Label, d: usize) -> Result<Vec<Fe>> {
    check_d(d)?;
    let prf = Prf::new(key);
    (0..d).map(|k| prf.eval(params.field(), label, k)).collect()
}

/// Rows of one message for every server, given its masks.
pub fn encrypt_row_with_masks(params: &SchemeParams, m: Fe, masks: &[Fe]) -> Vec<ShareMatrixRow> {
    let f = params.field();
    (0..masks.len())
        .map(|j| {
            let mut entries = masks.to_vec();
            entries[j] = f.sub(m, masks[j]);
            ShareMatrixRow { entries }
        })
        .collect()
}

/// Encrypts one labeled message into a row for each of the `d` servers.
pub fn ds_encrypt_item(params: &SchemeParams, key: &PrfKey, label: &Label, m: Fe, d: usize) -> Result<Vec<ShareMatrixRow>> {
    Ok(encrypt_row_with_masks(params, m, &mask_row(params, key, label, d)?))
}

fn transpose_rows<T>(per_item: Vec<Vec<T>>) -> Vec<Vec<T>> {
    let d = per_item.first().map_or(0, Vec::len);
    let mut out: Vec<Vec<T>> = (0..d).map(|_| Vec::with_capacity(per_item.len())).collect();
    for item in per_item {
        for (j, row) in item.into_iter().enumerate() {
            out[j].push(row);
        }
    }
    out
}

/// Builds all d payloads from an explicit mask matrix `masks[i][k]`.
pub fn ds_encrypt_with_masks(params: &SchemeParams, masks: &[Vec<Fe>], m: &[Fe]) -> Result<Vec<ShareMatrix>> {
    let d = check_square(masks)?;
    if m.len() != d {
        return Err(Error::LengthMismatch { expected: d, actual: m.len() });
    }
    let per_item: Vec<Vec<ShareMatrixRow>> = m
        .iter()
        .zip(masks)
        .map(|(&mi, row)| encrypt_row_with_masks(params, mi, row))
        .collect();
    transpose_rows(per_item)
        .into_iter()
        .enumerate()
        .map(|(j, rows)| ShareMatrix::new(j + 1, rows))
        .collect()
}

/// Encrypts `d` messages under `d` distinct labels into one payload per server.
pub fn ds_encrypt(params: &SchemeParams, key: &PrfKey, labels: &[Label], m: &[Fe]) -> Result<Vec<ShareMatrix>> {
    let masks = mask_matrix(params, key, labels)?;
    ds_encrypt_with_masks(params, &masks, m)
}

fn mask_matrix(params: &SchemeParams, key: &PrfKey, labels: &[Label]) -> Result<Vec<Vec<Fe>>> {
    let d = labels.len();
    check_d(d)?;
    let mut seen = std::collections::HashSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(Error::DuplicateLabel(l.to_string()));
        }
    }
    labels.iter().map(|l| mask_row(params, key, l, d)).collect()
}

/// Server `j`'s response.
pub fn compute_sj(params: &SchemeParams, j: usize, payload: &ShareMatrix) -> Result<Fe> {
    if payload.owner() != j {
        return Err(Error::Parameter(format!(
            "payload belongs to server {}, not {j}",
            payload.owner()
        )));
    }
    server_sum(params.field(), j, &payload.view())
}

/// Constant term of `Σ_j S_j` from an explicit mask matrix.
pub fn ds_offset_with_masks(params: &SchemeParams, masks: &[Vec<Fe>]) -> Result<Fe> {
    let d = check_square(masks)?;
    let f = params.field();
    let mut total = Fe::ZERO;
    for j in 1..=d {
        let view: Vec<Vec<Fe>> = masks
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r[j - 1] = f.neg(r[j - 1]);
                r
            })
            .collect();
        total = f.add(total, server_sum(f, j, &view)?);
    }
    Ok(total)
}

/// Constant term of `Σ_j S_j`, recomputed from the PRF.
pub fn ds_offset(params: &SchemeParams, key: &PrfKey, labels: &[Label]) -> Result<Fe> {
    ds_offset_with_masks(params, &mask_matrix(params, key, labels)?)
}

/// `Σ_j responses[j] − offset`.
pub fn ds_reconstruct(params: &SchemeParams, key: &PrfKey, labels: &[Label], responses: &[Fe]) -> Result<Fe> {
    if responses.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: responses.len(),
        });
    }
    let f = params.field();
    let offset = ds_offset(params, key, labels)?;
    Ok(f.sub(f.sum(responses.iter().copied()), offset))
}

// ---------------------------------------------------------------------------
// Verifiable variant

/// Mask key, MAC key and one nonzero verification point per server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DsVerifiableKey {
    mask: PrfKey,
    mac: PrfKey,
    points: Vec<Fe>,
    inverses: Vec<Fe>,
}

impl DsVerifiableKey {
    pub fn new(params: &SchemeParams, mask: PrfKey, mac: PrfKey, points: Vec<Fe>) -> Result<Self> {
        check_d(points.len())?;
        let inverses = points
            .iter()
            .map(|&s| params.field().inv(s))
            .collect::<Result<Vec<_>>>()
            .map_err(|_| Error::Parameter("verification points must be nonzero".into()))?;
        Ok(DsVerifiableKey {
            mask,
            mac,
            points,
            inverses,
        })
    }

    pub fn generate_with<R: rand::RngCore + rand::CryptoRng + ?Sized>(params: &SchemeParams, d: usize, rng: &mut R) -> Result<Self> {
        let mask = PrfKey::generate_with(rng);
        let mac = PrfKey::generate_with(rng);
        let points = (0..d).map(|_| params.field().random_nonzero(rng)).collect();
        Self::new(params, mask, mac, points)
    }

    pub fn d(&self) -> usize {
        self.points.len()
    }

    pub fn mask_key(&self) -> &PrfKey {
        &self.mask
    }

    pub fn mac_key(&self) -> &PrfKey {
        &self.mac
    }

    pub fn points(&self) -> &[Fe] {
        &self.points
    }

    /// MAC targets of server `j`'s row for `label`: index `(j−1)·d + k`.
    fn targets(&self, params: &SchemeParams, label: &Label, j: usize) -> Vec<Fe> {
        let d = self.d();
        let prf = Prf::new(&self.mac);
        (0..d).map(|k| prf.at(params.field(), label, (j - 1) * d + k)).collect()
    }
}

/// A share-matrix row where each entry carries a degree-1 tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedRow {
    pub entries: Vec<TagPolynomial>,
}

impl TaggedRow {
    /// `tag ‖ owner ‖ d ‖ d values ‖ d slopes`.
    pub fn to_bytes(&self, field: &PrimeField, owner: usize) -> Vec<u8> {
        let mut out = vec![TAGGED_ROW_TAG, owner as u8, self.entries.len() as u8];
        for t in &self.entries {
            field.encode_into(t.coeff(0), &mut out);
        }
        for t in &self.entries {
            field.encode_into(t.coeff(1), &mut out);
        }
        out
    }

    pub fn from_bytes(field: &PrimeField, bytes: &[u8]) -> Result<(Self, usize)> {
        let (owner, d, body) = row_header(bytes, TAGGED_ROW_TAG)?;
        let w = field.byte_len();
        if body.len() != 2 * d * w {
            return Err(Error::Decode(format!("tagged row needs {} bytes, got {}", 2 * d * w, body.len())));
        }
        let vals = body.chunks(w).map(|c| field.decode(c)).collect::<Result<Vec<_>>>()?;
        let entries = (0..d)
            .map(|k| TagPolynomial::new(vec![vals[k], vals[d + k]]))
            .collect::<Result<Vec<_>>>()?;
        Ok((TaggedRow { entries }, owner))
    }
}

/// Server `owner`'s tagged d×d table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedShareMatrix {
    owner: usize,
    rows: Vec<TaggedRow>,
}

impl TaggedShareMatrix {
    pub fn new(owner: usize, rows: Vec<TaggedRow>) -> Result<Self> {
        let d = rows.len();
        check_d(d)?;
        if let Some(r) = rows.iter().find(|r| r.entries.len() != d) {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: r.entries.len(),
            });
        }
        if !(1..=d).contains(&owner) {
            return Err(Error::Parameter(format!("owner {owner} outside 1..={d}")));
        }
        Ok(TaggedShareMatrix { owner, rows })
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn d(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[TaggedRow] {
        &self.rows
    }

    /// `owner ‖ d ‖ d² values ‖ d² slopes`, both row-major.
    pub fn to_bytes(&self, field: &PrimeField) -> Vec<u8> {
        let mut out = vec![self.owner as u8, self.d() as u8];
        for r in &self.rows {
            for t in &r.entries {
                field.encode_into(t.coeff(0), &mut out);
            }
        }
        for r in &self.rows {
            for t in &r.entries {
                field.encode_into(t.coeff(1), &mut out);
            }
        }
        out
    }
}

/// Tagged rows of one message for every server.
pub fn ds_vencrypt_item(params: &SchemeParams, key: &DsVerifiableKey, label: &Label, m: Fe) -> Result<Vec<TaggedRow>> {
    let f = params.field();
    let d = key.d();
    let plain = encrypt_row_with_masks(params, m, &mask_row(params, &key.mask, label, d)?);
    Ok(plain
        .into_iter()
        .enumerate()
        .map(|(jj, row)| {
            let targets = key.targets(params, label, jj + 1);
            TaggedRow {
                entries: row
                    .entries
                    .iter()
                    .zip(&targets)
                    .map(|(&v, &r)| TagPolynomial::fresh(f, v, r, key.inverses[jj]))
                    .collect(),
            }
        })
        .collect())
}

/// Encrypts `d` labeled messages into one tagged payload per server.
pub fn ds_vencrypt(params: &SchemeParams, key: &DsVerifiableKey, labels: &[Label], m: &[Fe]) -> Result<Vec<TaggedShareMatrix>> {
    let d = key.d();
    if labels.len() != d || m.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            actual: labels.len().min(m.len()),
        });
    }
    mask_matrix(params, &key.mask, labels)?;
    let per_item = labels
        .iter()
        .zip(m)
        .map(|(l, &mi)| ds_vencrypt_item(params, key, l, mi))
        .collect::<Result<Vec<_>>>()?;
    transpose_rows(per_item)
        .into_iter()
        .enumerate()
        .map(|(j, rows)| TaggedShareMatrix::new(j + 1, rows))
        .collect()
}

/// Server `j`'s verifiable response: `S_j` over tags, a degree-d polynomial.
pub fn ds_veval(params: &SchemeParams, j: usize, payload: &TaggedShareMatrix) -> Result<TagPolynomial> {
    if payload.owner() != j {
        return Err(Error::Parameter(format!(
            "payload belongs to server {}, not {j}",
            payload.owner()
        )));
    }
    let view: Vec<Vec<TagPolynomial>> = payload.rows.iter().map(|r| r.entries.clone()).collect();
    Ok(server_sum(&TagRing(params.field()), j, &view)?.padded(payload.d()))
}

/// Outcome of verified d-server reconstruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DsDecision {
    Accept(Fe),
    /// One-based indices of the servers whose tag failed its check.
    Reject(Vec<usize>),
}

/// Checks every server's tag at its point, then reconstructs from the tags'
/// constant terms.
pub fn ds_vdecrypt(params: &SchemeParams, key: &DsVerifiableKey, labels: &[Label], responses: &[TagPolynomial]) -> Result<DsDecision> {
    let d = key.d();
    if labels.len() != d || responses.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            actual: labels.len().min(responses.len()),
        });
    }
    if let Some(r) = responses.iter().find(|r| r.degree() > d) {
        return Err(Error::Parameter(format!("response degree {} exceeds {d}", r.degree())));
    }
    let f = params.field();
    let mut failed = Vec::new();
    for j in 1..=d {
        let view: Vec<Vec<Fe>> = labels.iter().map(|l| key.targets(params, l, j)).collect();
        let expected = server_sum(f, j, &view)?;
        if responses[j - 1].eval(f, key.points[j - 1]) != expected {
            failed.push(j);
        }
    }
    if !failed.is_empty() {
        return Ok(DsDecision::Reject(failed));
    }
    let constants: Vec<Fe> = responses.iter().map(|r| r.coeff(0)).collect();
    Ok(DsDecision::Accept(ds_reconstruct(params, &key.mask, labels, &constants)?))
}
