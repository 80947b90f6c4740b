//! Labeled programs: quadratic polynomials
//! `f(x) = Σ α_{i,j} x_i x_j + Σ β_k x_k + γ` over ordered index pairs, and
//! degree-d monomials for the d-server scheme.
//!
//! Indices are zero-based positions into the program's label list. Quadratic
//! terms are kept as ordered pairs: `(0,1)` and `(1,0)` are distinct terms that
//! both contribute `x_0 x_1`.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Fe, PrimeField};
use crate::prf::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadTerm {
    pub i: usize,
    pub j: usize,
    pub alpha: Fe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinTerm {
    pub k: usize,
    pub beta: Fe,
}

/// An unlabeled quadratic polynomial in `n` variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticForm {
    n: usize,
    quad: Vec<QuadTerm>,
    lin: Vec<LinTerm>,
    gamma: Fe,
}

impl QuadraticForm {
    /// Validates indices and uniqueness, then sorts terms by `(i, j)` and `k`.
    pub fn new(n: usize, mut quad: Vec<QuadTerm>, mut lin: Vec<LinTerm>, gamma: Fe) -> Result<Self> {
        for t in &quad {
            if t.i >= n || t.j >= n {
                return Err(Error::InvalidProgram(format!(
                    "quadratic term ({}, {}) out of range for {n} inputs",
                    t.i, t.j
                )));
            }
        }
        for t in &lin {
            if t.k >= n {
                return Err(Error::InvalidProgram(format!(
                    "linear term {} out of range for {n} inputs",
                    t.k
                )));
            }
        }
        quad.sort_unstable_by_key(|t| (t.i, t.j));
        lin.sort_unstable_by_key(|t| t.k);
        if let Some(w) = quad.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::InvalidProgram(format!(
                "duplicate quadratic term ({}, {})",
                w[0].i, w[0].j
            )));
        }
        if let Some(w) = lin.windows(2).find(|w| w[0].k == w[1].k) {
            return Err(Error::InvalidProgram(format!("duplicate linear term {}", w[0].k)));
        }
        Ok(QuadraticForm { n, quad, lin, gamma })
    }

    /// The constant polynomial over `n` inputs.
    pub fn constant(n: usize, gamma: Fe) -> Self {
        QuadraticForm {
            n,
            quad: Vec::new(),
            lin: Vec::new(),
            gamma,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn quad(&self) -> &[QuadTerm] {
        &self.quad
    }

    pub fn lin(&self) -> &[LinTerm] {
        &self.lin
    }

    pub fn gamma(&self) -> Fe {
        self.gamma
    }

    /// Degree judged by nonzero coefficients (0, 1 or 2).
    pub fn degree(&self) -> usize {
        if self.quad.iter().any(|t| !t.alpha.is_zero()) {
            2
        } else if self.lin.iter().any(|t| !t.beta.is_zero()) {
            1
        } else {
            0
        }
    }

    pub fn eval(&self, field: &PrimeField, values: &[Fe]) -> Result<Fe> {
        if values.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: values.len(),
            });
        }
        let q = self.quad.iter().fold(Fe::ZERO, |acc, t| {
            field.add(acc, field.mul(t.alpha, field.mul(values[t.i], values[t.j])))
        });
        let l = self
            .lin
            .iter()
            .fold(Fe::ZERO, |acc, t| field.add(acc, field.mul(t.beta, values[t.k])));
        Ok(field.add(field.add(q, l), self.gamma))
    }

    /// Multiplies every coefficient (γ included) by `c`.
    pub fn scaled(&self, field: &PrimeField, c: Fe) -> Self {
        QuadraticForm {
            n: self.n,
            quad: self
                .quad
                .iter()
                .map(|t| QuadTerm {
                    alpha: field.mul(t.alpha, c),
                    ..*t
                })
                .collect(),
            lin: self
                .lin
                .iter()
                .map(|t| LinTerm {
                    beta: field.mul(t.beta, c),
                    ..*t
                })
                .collect(),
            gamma: field.mul(self.gamma, c),
        }
    }
}

/// `P = (f, τ_1, …, τ_n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticProgram {
    form: QuadraticForm,
    labels: Vec<Label>,
}

impl QuadraticProgram {
    pub fn new(labels: Vec<Label>, quad: Vec<QuadTerm>, lin: Vec<LinTerm>, gamma: Fe) -> Result<Self> {
        let form = QuadraticForm::new(labels.len(), quad, lin, gamma)?;
        Self::from_form(form, labels)
    }

    pub fn from_form(form: QuadraticForm, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != form.n {
            return Err(Error::LengthMismatch {
                expected: form.n,
                actual: labels.len(),
            });
        }
        ensure_distinct(&labels)?;
        Ok(QuadraticProgram { form, labels })
    }

    /// The identity program `L_τ`.
    pub fn identity(field: &PrimeField, label: Label) -> Self {
        QuadraticProgram {
            form: QuadraticForm {
                n: 1,
                quad: Vec::new(),
                lin: vec![LinTerm { k: 0, beta: field.one() }],
                gamma: Fe::ZERO,
            },
            labels: vec![label],
        }
    }

    pub fn form(&self) -> &QuadraticForm {
        &self.form
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.form.n
    }

    pub fn quad(&self) -> &[QuadTerm] {
        &self.form.quad
    }

    pub fn lin(&self) -> &[LinTerm] {
        &self.form.lin
    }

    pub fn gamma(&self) -> Fe {
        self.form.gamma
    }

    pub fn degree(&self) -> usize {
        self.form.degree()
    }

    /// Exact value of f at a plaintext point.
    pub fn eval_plain(&self, field: &PrimeField, values: &[Fe]) -> Result<Fe> {
        self.form.eval(field, values)
    }

    pub fn to_json(&self, field: &PrimeField) -> Result<String> {
        let doc = ProgramDoc {
            labels: labels_to_strings(&self.labels)?,
            quad: self.quad().iter().map(|t| (t.i, t.j, field.to_hex(t.alpha))).collect(),
            lin: self.lin().iter().map(|t| (t.k, field.to_hex(t.beta))).collect(),
            gamma: field.to_hex(self.gamma()),
        };
        serde_json::to_string(&doc).map_err(|e| Error::Decode(e.to_string()))
    }

    pub fn from_json(field: &PrimeField, s: &str) -> Result<Self> {
        let doc: ProgramDoc = serde_json::from_str(s).map_err(|e| Error::Decode(e.to_string()))?;
        Self::from_doc(field, doc)
    }

    pub fn from_doc(field: &PrimeField, doc: ProgramDoc) -> Result<Self> {
        let labels = doc
            .labels
            .iter()
            .map(|s| Label::try_from(s.as_str()))
            .collect::<Result<Vec<_>>>()?;
        let quad = doc
            .quad
            .iter()
            .map(|(i, j, a)| Ok(QuadTerm { i: *i, j: *j, alpha: field.from_hex(a)? }))
            .collect::<Result<Vec<_>>>()?;
        let lin = doc
            .lin
            .iter()
            .map(|(k, b)| Ok(LinTerm { k: *k, beta: field.from_hex(b)? }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels, quad, lin, field.from_hex(&doc.gamma)?)
    }

    pub fn to_doc(&self, field: &PrimeField) -> Result<ProgramDoc> {
        Ok(ProgramDoc {
            labels: labels_to_strings(&self.labels)?,
            quad: self.quad().iter().map(|t| (t.i, t.j, field.to_hex(t.alpha))).collect(),
            lin: self.lin().iter().map(|t| (t.k, field.to_hex(t.beta))).collect(),
            gamma: field.to_hex(self.gamma()),
        })
    }
}

/// Serialized program: sorted term lists with hex coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramDoc {
    pub labels: Vec<String>,
    #[serde(default)]
    pub quad: Vec<(usize, usize, String)>,
    #[serde(default)]
    pub lin: Vec<(usize, String)>,
    pub gamma: String,
}

fn labels_to_strings(labels: &[Label]) -> Result<Vec<String>> {
    labels
        .iter()
        .map(|l| {
            l.as_str()
                .map(str::to_owned)
                .ok_or_else(|| Error::Decode(format!("label {l:?} is not UTF-8")))
        })
        .collect()
}

fn ensure_distinct(labels: &[Label]) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l) {
            return Err(Error::DuplicateLabel(l.to_string()));
        }
    }
    Ok(())
}

/// `∏ m_i` over `d ≥ 2` distinct labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialProgram {
    labels: Vec<Label>,
}

impl MonomialProgram {
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidProgram(format!(
                "monomial degree must be at least 2, got {}",
                labels.len()
            )));
        }
        ensure_distinct(&labels)?;
        Ok(MonomialProgram { labels })
    }

    pub fn degree(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn eval_plain(&self, field: &PrimeField, values: &[Fe]) -> Result<Fe> {
        if values.len() != self.labels.len() {
            return Err(Error::LengthMismatch {
                expected: self.labels.len(),
                actual: values.len(),
            });
        }
        Ok(field.product(values.iter().copied()))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = MonomialDoc {
            labels: labels_to_strings(&self.labels)?,
        };
        serde_json::to_string(&doc).map_err(|e| Error::Decode(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MonomialDoc = serde_json::from_str(s).map_err(|e| Error::Decode(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub fn from_doc(doc: MonomialDoc) -> Result<Self> {
        Self::new(
            doc.labels
                .iter()
                .map(|s| Label::try_from(s.as_str()))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn to_doc(&self) -> Result<MonomialDoc> {
        Ok(MonomialDoc {
            labels: labels_to_strings(&self.labels)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialDoc {
    pub labels: Vec<String>,
}

/// Dense-map form used while composing.
#[derive(Clone, Debug, Default)]
struct Expansion {
    quad: BTreeMap<(usize, usize), Fe>,
    lin: BTreeMap<usize, Fe>,
    constant: Fe,
}

impl Expansion {
    fn degree(&self) -> usize {
        if self.quad.values().any(|c| !c.is_zero()) {
            2
        } else if self.lin.values().any(|c| !c.is_zero()) {
            1
        } else {
            0
        }
    }

    fn add_quad(&mut self, field: &PrimeField, key: (usize, usize), c: Fe) {
        let e = self.quad.entry(key).or_insert(Fe::ZERO);
        *e = field.add(*e, c);
    }

    fn add_lin(&mut self, field: &PrimeField, k: usize, c: Fe) {
        let e = self.lin.entry(k).or_insert(Fe::ZERO);
        *e = field.add(*e, c);
    }

    /// `self += scale * other`
    fn accumulate(&mut self, field: &PrimeField, other: &Expansion, scale: Fe) {
        for (&key, &c) in &other.quad {
            self.add_quad(field, key, field.mul(c, scale));
        }
        for (&k, &c) in &other.lin {
            self.add_lin(field, k, field.mul(c, scale));
        }
        self.constant = field.add(self.constant, field.mul(other.constant, scale));
    }

    /// `self += scale * x * y` for expansions whose degrees sum to at most 2.
    fn accumulate_product(&mut self, field: &PrimeField, x: &Expansion, y: &Expansion, scale: Fe) {
        for (&(i, j), &c) in &x.quad {
            self.add_quad(field, (i, j), field.mul(scale, field.mul(c, y.constant)));
        }
        for (&(i, j), &c) in &y.quad {
            self.add_quad(field, (i, j), field.mul(scale, field.mul(c, x.constant)));
        }
        for (&a, &u) in &x.lin {
            for (&b, &v) in &y.lin {
                self.add_quad(field, (a, b), field.mul(scale, field.mul(u, v)));
            }
            self.add_lin(field, a, field.mul(scale, field.mul(u, y.constant)));
        }
        for (&b, &v) in &y.lin {
            self.add_lin(field, b, field.mul(scale, field.mul(v, x.constant)));
        }
        self.constant = field.add(self.constant, field.mul(scale, field.mul(x.constant, y.constant)));
    }
}

/// Composes `outer(inner_1, …, inner_t)`.
///
/// The result ranges over the distinct labels of the inner programs in order
/// of first appearance; inputs sharing a label collapse into one position.
/// Fails with [`Error::UnsupportedDegree`] when the result would exceed degree 2.
pub fn compose(field: &PrimeField, outer: &QuadraticForm, inner: &[QuadraticProgram]) -> Result<QuadraticProgram> {
    if inner.len() != outer.n() {
        return Err(Error::LengthMismatch {
            expected: outer.n(),
            actual: inner.len(),
        });
    }
    let mut labels: Vec<Label> = Vec::new();
    let mut position: HashMap<Label, usize> = HashMap::new();
    let expansions: Vec<Expansion> = inner
        .iter()
        .map(|p| {
            let map: Vec<usize> = p
                .labels()
                .iter()
                .map(|l| {
                    *position.entry(l.clone()).or_insert_with(|| {
                        labels.push(l.clone());
                        labels.len() - 1
                    })
                })
                .collect();
            let mut e = Expansion {
                constant: p.gamma(),
                ..Default::default()
            };
            for t in p.quad() {
                e.add_quad(field, (map[t.i], map[t.j]), t.alpha);
            }
            for t in p.lin() {
                e.add_lin(field, map[t.k], t.beta);
            }
            e
        })
        .collect();

    let mut out = Expansion {
        constant: outer.gamma(),
        ..Default::default()
    };
    for t in outer.lin() {
        out.accumulate(field, &expansions[t.k], t.beta);
    }
    for t in outer.quad() {
        if t.alpha.is_zero() {
            continue;
        }
        let (x, y) = (&expansions[t.i], &expansions[t.j]);
        let degree = x.degree() + y.degree();
        if degree > 2 {
            return Err(Error::UnsupportedDegree { degree, max: 2 });
        }
        out.accumulate_product(field, x, y, t.alpha);
    }

    let quad = out
        .quad
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((i, j), alpha)| QuadTerm { i, j, alpha })
        .collect();
    let lin = out
        .lin
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(k, beta)| LinTerm { k, beta })
        .collect();
    QuadraticProgram::new(labels, quad, lin, out.constant)
}

/// Seeded program generators for benchmarks and randomized tests.
pub mod generate {
    use super::*;

    /// Every pair `i ≤ j` and every linear term: n(n+1)/2 quadratic terms and
    /// n linear terms, all coefficients uniform.
    pub fn full_quadratic<R: Rng + ?Sized>(field: &PrimeField, labels: Vec<Label>, rng: &mut R) -> Result<QuadraticProgram> {
        let n = labels.len();
        let mut quad = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                quad.push(QuadTerm {
                    i,
                    j,
                    alpha: field.random(rng),
                });
            }
        }
        let lin = (0..n).map(|k| LinTerm { k, beta: field.random(rng) }).collect();
        QuadraticProgram::new(labels, quad, lin, field.random(rng))
    }

    /// Random sparse program with roughly `density` of all ordered pairs.
    pub fn sparse_quadratic<R: Rng + ?Sized>(
        field: &PrimeField,
        labels: Vec<Label>,
        density: f64,
        rng: &mut R,
    ) -> Result<QuadraticProgram> {
        let n = labels.len();
        let mut quad = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.gen_bool(density.clamp(0.0, 1.0)) {
                    quad.push(QuadTerm {
                        i,
                        j,
                        alpha: field.random(rng),
                    });
                }
            }
        }
        let mut lin = Vec::new();
        for k in 0..n {
            if rng.gen_bool(0.5) {
                lin.push(LinTerm { k, beta: field.random(rng) });
            }
        }
        QuadraticProgram::new(labels, quad, lin, field.random(rng))
    }

    /// `prefix-0, prefix-1, …`
    pub fn labels(prefix: &str, n: usize) -> Vec<Label> {
        (0..n)
            .map(|i| Label::new(format!("{prefix}-{i}").into_bytes()).expect("non-empty"))
            .collect()
    }
}
