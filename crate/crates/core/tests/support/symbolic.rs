use std::collections::BTreeMap;

use labelmask_core::schemeds::Ring;
use labelmask_core::{Fe, PrimeField};

/// Sparse multivariate polynomials over a prime field, keyed by exponent vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub BTreeMap<Vec<u8>, Fe>);

pub struct PolyRing<'a> {
    pub f: &'a PrimeField,
    pub vars: usize,
}

impl PolyRing<'_> {
    pub fn constant(&self, c: Fe) -> Poly {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert(vec![0; self.vars], c);
        }
        Poly(m)
    }

    pub fn var(&self, i: usize) -> Poly {
        let mut e = vec![0; self.vars];
        e[i] = 1;
        Poly(BTreeMap::from([(e, self.f.one())]))
    }

    pub fn degrees(p: &Poly) -> Vec<usize> {
        p.0.keys().map(|e| e.iter().map(|&x| x as usize).sum()).collect()
    }
}

impl Ring for PolyRing<'_> {
    type Elem = Poly;
    fn zero(&self) -> Poly {
        Poly(BTreeMap::new())
    }
    fn one(&self) -> Poly {
        self.constant(self.f.one())
    }
    fn add(&self, x: &Poly, y: &Poly) -> Poly {
        let mut out = x.0.clone();
        for (e, c) in &y.0 {
            let v = self.f.add(*out.get(e).unwrap_or(&Fe::ZERO), *c);
            if v.is_zero() {
                out.remove(e);
            } else {
                out.insert(e.clone(), v);
            }
        }
        Poly(out)
    }
    fn mul(&self, x: &Poly, y: &Poly) -> Poly {
        let mut out = self.zero();
        for (ex, cx) in &x.0 {
            for (ey, cy) in &y.0 {
                let e: Vec<u8> = ex.iter().zip(ey).map(|(a, b)| a + b).collect();
                out = self.add(&out, &Poly(BTreeMap::from([(e, self.f.mul(*cx, *cy))])));
            }
        }
        out
    }
    fn neg(&self, x: &Poly) -> Poly {
        Poly(x.0.iter().map(|(e, c)| (e.clone(), self.f.neg(*c))).collect())
    }
}

/// Server `j`'s matrix with symbolic messages: column `j` holds `m_i − a_{i,j}`
/// and every other column the bare mask.
pub fn server_view(ring: &PolyRing<'_>, masks: &[Vec<Fe>], j: usize) -> Vec<Vec<Poly>> {
    let f = ring.f;
    masks
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(k, &a)| {
                    if k == j - 1 {
                        ring.add(&ring.var(i), &ring.constant(f.neg(a)))
                    } else {
                        ring.constant(a)
                    }
                })
                .collect()
        })
        .collect()
}

/// Degrees strictly between `d − j` and `d` left in a partial sum through
/// server `j`; these must all have cancelled.
pub fn surviving_intermediate_degrees(partial: &Poly, d: usize, j: usize) -> Vec<usize> {
    PolyRing::degrees(partial)
        .into_iter()
        .filter(|&deg| deg + j > d && deg < d)
        .collect()
}
