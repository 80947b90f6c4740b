use std::collections::{BTreeMap, HashMap};

use labelmask_core::program::generate;
use labelmask_core::scheme2s;
use labelmask_core::schemeds::{
    cascade, compute_sj, ds_encrypt, ds_encrypt_with_masks, ds_offset_with_masks, ds_reconstruct, ds_vdecrypt, ds_vencrypt,
    ds_veval, server_sum, DsDecision, DsVerifiableKey, Ring, ShareMatrix,
};
use labelmask_core::{Fe, PrfKey, PrimeField, QuadTerm, QuadraticProgram, SchemeParams, TagPolynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

mod support;
use support::symbolic::{server_view, surviving_intermediate_degrees, Poly, PolyRing};

fn random_matrix(f: &PrimeField, d: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<Fe>> {
    (0..d).map(|_| (0..d).map(|_| f.random(rng)).collect()).collect()
}

fn sum_of_responses(params: &SchemeParams, masks: &[Vec<Fe>], m: &[Fe]) -> Fe {
    let f = params.field();
    let payloads = ds_encrypt_with_masks(params, masks, m).unwrap();
    f.sum(payloads.iter().map(|p| compute_sj(params, p.owner(), p).unwrap()))
}

#[test]
fn reconstruction_identity_random() {
    let mut rng = ChaCha20Rng::seed_from_u64(55);
    for (p, trials) in [(97u128, 200usize), (SchemeParams::default().modulus(), 50)] {
        let params = SchemeParams::new(p).unwrap();
        let f = params.field();
        for d in 2..=5 {
            for _ in 0..trials {
                let masks = random_matrix(f, d, &mut rng);
                let m: Vec<Fe> = (0..d).map(|_| f.random(&mut rng)).collect();
                let lhs = f.sub(sum_of_responses(&params, &masks, &m), f.product(m.iter().copied()));
                assert_eq!(lhs, ds_offset_with_masks(&params, &masks).unwrap(), "p={p} d={d}");
            }
        }
    }
}

#[test]
fn reconstruction_identity_all_masks_d3_z5() {
    let params = SchemeParams::new(5).unwrap();
    let f = params.field();
    let m = [f.elem(2), f.elem(3), f.elem(4)];
    let want = f.product(m);
    let mut masks = vec![vec![Fe::ZERO; 3]; 3];
    for code in 0..5u32.pow(9) {
        let mut c = code;
        for row in masks.iter_mut() {
            for e in row.iter_mut() {
                *e = f.elem((c % 5) as u128);
                c /= 5;
            }
        }
        let got = f.sub(sum_of_responses(&params, &masks, &m), ds_offset_with_masks(&params, &masks).unwrap());
        assert_eq!(got, want, "{masks:?}");
    }
}

/// Recomputes `c(V) + Σ_{U ⊊ V} c(U) ∏_{i ∈ V∖U} (−a_{i,|U|+1})` for every
/// subset, by plain enumeration, and expects zero.
#[test]
fn cascade_recursion_holds() {
    let f = PrimeField::new(97).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for d in 2..=6 {
        for _ in 0..20 {
            let view = random_matrix(&f, d, &mut rng);
            let c = cascade(&f, &view, d - 1);
            assert_eq!(c[0], f.one());
            for v in 1usize..(1 << d) {
                let size = v.count_ones() as usize;
                if size > d - 1 {
                    continue;
                }
                let mut total = c[v];
                for u in 0usize..(1 << d) {
                    if u & v != u || u == v {
                        continue;
                    }
                    let col = u.count_ones() as usize;
                    let mut term = c[u];
                    for i in 0..d {
                        if v & !u & (1 << i) != 0 {
                            term = f.mul(term, f.neg(view[i][col]));
                        }
                    }
                    total = f.add(total, term);
                }
                assert_eq!(total, Fe::ZERO, "d={d} V={v:b}");
            }
        }
    }
}

#[test]
fn partial_sums_eliminate_intermediate_degrees() {
    let f = PrimeField::new(97).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    for d in [2usize, 3, 4] {
        let ring = PolyRing { f: &f, vars: d };
        for _ in 0..10 {
            let masks = random_matrix(&f, d, &mut rng);
            let mut partial = ring.zero();
            for j in 1..=d {
                let view = server_view(&ring, &masks, j);
                partial = ring.add(&partial, &server_sum(&ring, j, &view).unwrap());
                let bad = surviving_intermediate_degrees(&partial, d, j);
                assert!(bad.is_empty(), "d={d} j={j}: degrees {bad:?} survive");
            }
            // what is left is ∏ m_i plus the offset
            let mut expected = ring.constant(ds_offset_with_masks(&SchemeParams::new(97).unwrap(), &masks).unwrap());
            expected = ring.add(&expected, &Poly(BTreeMap::from([(vec![1; d], f.one())])));
            assert_eq!(partial, expected);
        }
    }
}

#[test]
fn two_servers_match_the_two_server_scheme() {
    let params = SchemeParams::default();
    let f = params.field();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let labels = generate::labels("x", 2);
    let prog = QuadraticProgram::new(labels, vec![QuadTerm { i: 0, j: 1, alpha: f.one() }], vec![], Fe::ZERO).unwrap();
    for _ in 0..200 {
        let m = [f.random(&mut rng), f.random(&mut rng)];
        let masks = random_matrix(f, 2, &mut rng);
        let ds = f.sub(sum_of_responses(&params, &masks, &m), ds_offset_with_masks(&params, &masks).unwrap());

        let (s10, s20) = scheme2s::encrypt_with_masks(&params, m[0], masks[0][0], masks[0][1]);
        let (s11, s21) = scheme2s::encrypt_with_masks(&params, m[1], masks[1][0], masks[1][1]);
        let c1 = scheme2s::eval1(&params, &prog, &[s10, s11]).unwrap();
        let c2 = scheme2s::eval2(&params, &prog, &[s20, s21]).unwrap();
        let two = scheme2s::decrypt_with_masks(&params, &prog, &[masks[0][1], masks[1][1]], c1, c2).unwrap();
        assert_eq!(ds, two);
        assert_eq!(ds, f.mul(m[0], m[1]));
    }
}

#[test]
fn each_payload_is_message_independent_d2_z5() {
    let params = SchemeParams::new(5).unwrap();
    let f = params.field();
    let dist = |m: [Fe; 2]| {
        let mut per_server: Vec<HashMap<Vec<u128>, usize>> = vec![HashMap::new(); 2];
        for code in 0..625u32 {
            let v: Vec<Fe> = (0..4).map(|k| f.elem(((code / 5u32.pow(k)) % 5) as u128)).collect();
            let masks = vec![vec![v[0], v[1]], vec![v[2], v[3]]];
            for pl in ds_encrypt_with_masks(&params, &masks, &m).unwrap() {
                let flat: Vec<u128> = pl.rows().iter().flat_map(|r| r.entries.iter().map(|e| e.value())).collect();
                *per_server[pl.owner() - 1].entry(flat).or_insert(0) += 1;
            }
        }
        per_server
    };
    let base = dist([Fe::ZERO, Fe::ZERO]);
    for h in &base {
        assert_eq!(h.len(), 625);
    }
    for a in 0..5 {
        for b in 0..5 {
            assert_eq!(dist([f.elem(a), f.elem(b)]), base);
        }
    }
}

#[test]
fn prf_keyed_round_trip_and_bytes() {
    let params = SchemeParams::default();
    let f = params.field();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for d in 2..=6 {
        let key = PrfKey::generate_with(&mut rng);
        let labels = generate::labels("r", d);
        let m: Vec<Fe> = (0..d).map(|_| f.random(&mut rng)).collect();
        let payloads = ds_encrypt(&params, &key, &labels, &m).unwrap();
        let responses: Vec<Fe> = payloads
            .iter()
            .map(|p| {
                let back = ShareMatrix::from_bytes(f, &p.to_bytes(f)).unwrap();
                assert_eq!(&back, p);
                compute_sj(&params, back.owner(), &back).unwrap()
            })
            .collect();
        assert_eq!(ds_reconstruct(&params, &key, &labels, &responses).unwrap(), f.product(m.iter().copied()));
    }
}

#[test]
fn verifiable_variant_accepts_honest_and_names_the_cheater() {
    let params = SchemeParams::default();
    let f = params.field();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    for d in 2..=5 {
        let key = DsVerifiableKey::generate_with(&params, d, &mut rng).unwrap();
        let labels = generate::labels("v", d);
        let m: Vec<Fe> = (0..d).map(|_| f.random(&mut rng)).collect();
        let payloads = ds_vencrypt(&params, &key, &labels, &m).unwrap();
        let responses: Vec<TagPolynomial> = payloads
            .iter()
            .map(|p| ds_veval(&params, p.owner(), p).unwrap())
            .collect();
        assert!(responses.iter().all(|r| r.coeffs().len() == d + 1));
        assert_eq!(
            ds_vdecrypt(&params, &key, &labels, &responses).unwrap(),
            DsDecision::Accept(f.product(m.iter().copied()))
        );

        let j = rng.gen_range(0..d);
        let k = rng.gen_range(0..=d);
        let mut bad = responses.clone();
        let mut c = bad[j].coeffs().to_vec();
        c[k] = f.add(c[k], f.random_nonzero(&mut rng));
        bad[j] = TagPolynomial::new(c).unwrap();
        assert_eq!(
            ds_vdecrypt(&params, &key, &labels, &bad).unwrap(),
            DsDecision::Reject(vec![j + 1])
        );
    }
}
