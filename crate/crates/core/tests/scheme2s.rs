use std::collections::BTreeMap;

use labelmask_core::program::generate;
use labelmask_core::scheme2s::{self, SecretKey2S, Share1, Share2};
use labelmask_core::{Execution, Fe, LinTerm, PrfKey, PrimeField, QuadTerm, QuadraticProgram, SchemeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn params(p: u128) -> SchemeParams {
    SchemeParams::new(p).unwrap()
}

fn all(field: &PrimeField) -> impl Iterator<Item = Fe> + '_ {
    (0..field.modulus()).map(|v| field.elem(v))
}

fn run(params: &SchemeParams, sk: &SecretKey2S, prog: &QuadraticProgram, m: &[Fe]) -> Fe {
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    for (l, &v) in prog.labels().iter().zip(m) {
        let (a, b) = scheme2s::encrypt(params, sk, l, v);
        s1.push(a);
        s2.push(b);
    }
    let c1 = scheme2s::eval1(params, prog, &s1).unwrap();
    let c2 = scheme2s::eval2(params, prog, &s2).unwrap();
    scheme2s::decrypt(params, sk, prog, c1, c2)
}

#[test]
fn decrypt_equals_plain_evaluation() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for p in [97u128, 18_446_744_073_709_551_557, SchemeParams::default().modulus()] {
        let params = params(p);
        let f = params.field();
        for trial in 0..150 {
            let sk = scheme2s::keygen_with(&mut rng);
            let n = rng.gen_range(1..=50);
            let labels = generate::labels(&format!("t{trial}"), n);
            let prog = generate::sparse_quadratic(f, labels, rng.gen_range(0.0..0.3), &mut rng).unwrap();
            let m: Vec<Fe> = (0..n).map(|_| f.random(&mut rng)).collect();
            assert_eq!(run(&params, &sk, &prog, &m), prog.eval_plain(f, &m).unwrap(), "p={p} trial={trial}");
        }
    }
}

#[test]
fn linear_and_constant_programs() {
    let params = params(97);
    let f = params.field();
    let sk = SecretKey2S::from_key(PrfKey::from_bytes([3; 16]));
    let labels = generate::labels("lin", 3);
    let lin = QuadraticProgram::new(
        labels.clone(),
        vec![],
        vec![LinTerm { k: 0, beta: f.elem(5) }, LinTerm { k: 2, beta: f.elem(90) }],
        f.elem(4),
    )
    .unwrap();
    let m = [f.elem(10), f.elem(20), f.elem(30)];
    assert_eq!(run(&params, &sk, &lin, &m), f.elem((50 + 90 * 30 + 4) % 97));

    let konst = QuadraticProgram::new(labels, vec![], vec![], f.elem(42)).unwrap();
    assert_eq!(run(&params, &sk, &konst, &m), f.elem(42));
}

fn product_program(f: &PrimeField) -> QuadraticProgram {
    QuadraticProgram::new(
        generate::labels("pair", 2),
        vec![QuadTerm { i: 0, j: 1, alpha: f.one() }],
        vec![],
        Fe::ZERO,
    )
    .unwrap()
}

fn identity_holds(f: &PrimeField, prog: &QuadraticProgram, m: [Fe; 2], a: [Fe; 2], b: [Fe; 2]) {
    let direct = {
        let t1 = f.mul(f.sub(m[0], a[0]), f.sub(m[1], a[1]));
        let t2 = f.mul(f.sub(a[0], b[0]), f.sub(a[1], b[1]));
        let t3 = f.mul(a[0], f.sub(m[1], b[1]));
        let t4 = f.mul(a[1], f.sub(m[0], b[0]));
        let t5 = f.mul(b[0], b[1]);
        f.add(f.add(f.sub(t1, t2), f.add(t3, t4)), t5)
    };
    let want = f.mul(m[0], m[1]);
    assert_eq!(direct, want);

    let params = SchemeParams::new(f.modulus()).unwrap();
    let (s10, s20) = scheme2s::encrypt_with_masks(&params, m[0], a[0], b[0]);
    let (s11, s21) = scheme2s::encrypt_with_masks(&params, m[1], a[1], b[1]);
    let c1 = scheme2s::eval1(&params, prog, &[s10, s11]).unwrap();
    let c2 = scheme2s::eval2(&params, prog, &[s20, s21]).unwrap();
    assert_eq!(scheme2s::decrypt_with_masks(&params, prog, &b, c1, c2).unwrap(), want);
}

#[test]
fn product_decomposition_exhaustive_over_z5() {
    let f = PrimeField::new(5).unwrap();
    let prog = product_program(&f);
    let mut count = 0;
    for m1 in all(&f) {
        for m2 in all(&f) {
            for a1 in all(&f) {
                for a2 in all(&f) {
                    for b1 in all(&f) {
                        for b2 in all(&f) {
                            identity_holds(&f, &prog, [m1, m2], [a1, a2], [b1, b2]);
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    assert_eq!(count, 5usize.pow(6));
}

#[test]
fn product_decomposition_random_over_z97() {
    let f = PrimeField::new(97).unwrap();
    let prog = product_program(&f);
    let mut rng = ChaCha20Rng::seed_from_u64(97);
    for _ in 0..5000 {
        let mut r = || f.random(&mut rng);
        identity_holds(&f, &prog, [r(), r()], [r(), r()], [r(), r()]);
    }
}

fn histogram<K: Ord>(items: impl IntoIterator<Item = K>) -> BTreeMap<K, usize> {
    let mut h = BTreeMap::new();
    for k in items {
        *h.entry(k).or_insert(0) += 1;
    }
    h
}

/// Masks drawn from a true uniform source: every `(a, b)` exactly once.
#[test]
fn each_share_is_uniform_and_message_independent() {
    let params = params(5);
    let f = params.field();
    let masks: Vec<(Fe, Fe)> = all(f).flat_map(|a| all(f).map(move |b| (a, b))).collect();
    let dist = |m: Fe| {
        let shares: Vec<(Share1, Share2)> = masks
            .iter()
            .map(|&(a, b)| scheme2s::encrypt_with_masks(&params, m, a, b))
            .collect();
        let h1 = histogram(shares.iter().map(|(s, _)| (s.u.value(), s.v.value())));
        let h2 = histogram(shares.iter().map(|(_, s)| (s.w.value(), s.a.value())));
        (h1, h2)
    };
    let (h1_0, h2_0) = dist(f.elem(0));
    assert_eq!(h1_0.len(), 25);
    assert!(h1_0.values().all(|&c| c == 1));
    assert_eq!(h2_0.len(), 25);
    assert!(h2_0.values().all(|&c| c == 1));
    for m in all(f).skip(1) {
        let (h1, h2) = dist(m);
        assert_eq!(h1, h1_0);
        assert_eq!(h2, h2_0);
    }
}

/// Responses of both servers for every mask assignment of a two-input program.
fn responses(params: &SchemeParams, prog: &QuadraticProgram, m: [Fe; 2]) -> Vec<([Fe; 2], Fe, Fe)> {
    let f = params.field();
    let mut out = Vec::new();
    for a0 in all(f) {
        for a1 in all(f) {
            for b0 in all(f) {
                for b1 in all(f) {
                    let (s10, s20) = scheme2s::encrypt_with_masks(params, m[0], a0, b0);
                    let (s11, s21) = scheme2s::encrypt_with_masks(params, m[1], a1, b1);
                    let c1 = scheme2s::eval1(params, prog, &[s10, s11]).unwrap();
                    let c2 = scheme2s::eval2(params, prog, &[s20, s21]).unwrap();
                    out.push(([b0, b1], c1, c2));
                }
            }
        }
    }
    out
}

#[test]
fn context_hiding_linear_is_exact() {
    let params = params(5);
    let f = params.field();
    let prog = QuadraticProgram::new(
        generate::labels("ch", 2),
        vec![],
        vec![LinTerm { k: 0, beta: f.elem(2) }, LinTerm { k: 1, beta: f.elem(3) }],
        f.elem(1),
    )
    .unwrap();
    for m0 in all(f) {
        for m1 in all(f) {
            let m = prog.eval_plain(f, &[m0, m1]).unwrap();
            let real = histogram(responses(&params, &prog, [m0, m1]));
            // simulator output (0, m − f(b)) for the same b and key randomness
            let sim = histogram(responses(&params, &prog, [m0, m1]).into_iter().map(|(b, _, _)| {
                let fb = prog.eval_plain(f, &b).unwrap();
                (b, Fe::ZERO, f.sub(m, fb))
            }));
            assert_eq!(real, sim);
        }
    }
}

#[test]
fn context_hiding_quadratic_sum_and_marginals() {
    let params = params(5);
    let f = params.field();
    let p = f.modulus() as f64;
    let prog = QuadraticProgram::new(
        generate::labels("ch", 2),
        vec![QuadTerm { i: 0, j: 1, alpha: f.elem(3) }, QuadTerm { i: 0, j: 0, alpha: f.elem(1) }],
        vec![LinTerm { k: 1, beta: f.elem(4) }],
        f.elem(2),
    )
    .unwrap();
    let m_in = [f.elem(2), f.elem(4)];
    let m = prog.eval_plain(f, &m_in).unwrap();
    let real = responses(&params, &prog, m_in);
    let total = real.len() as f64;

    // the pair always sums to m − f(b), exactly as the simulator's does
    for (b, c1, c2) in &real {
        assert_eq!(f.add(*c1, *c2), f.sub(m, prog.eval_plain(f, b).unwrap()));
    }

    // simulator marginals are exactly uniform; the real ones differ from
    // uniform only by terms of order 1/p (vanishing for cryptographic p)
    for marginal in [0usize, 1] {
        let h = histogram(real.iter().map(|(_, c1, c2)| if marginal == 0 { c1.value() } else { c2.value() }));
        let sd: f64 = all(f)
            .map(|v| (*h.get(&v.value()).unwrap_or(&0) as f64 / total - 1.0 / p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(sd <= 2.0 / p, "marginal {marginal}: distance {sd}");
    }
}

#[test]
fn serialized_sizes_do_not_depend_on_program() {
    let params = SchemeParams::default();
    let f = params.field();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let sk = scheme2s::keygen_with(&mut rng);
    let tiny = QuadraticProgram::new(
        generate::labels("s", 1),
        vec![QuadTerm { i: 0, j: 0, alpha: f.one() }],
        vec![],
        Fe::ZERO,
    )
    .unwrap();
    let big = generate::full_quadratic(f, generate::labels("s", 1000), &mut rng).unwrap();
    assert_eq!(big.quad().len(), 500_500);

    let mut sizes = Vec::new();
    for prog in [&tiny, &big] {
        let (s1, s2): (Vec<Share1>, Vec<Share2>) = prog
            .labels()
            .iter()
            .map(|l| scheme2s::encrypt(&params, &sk, l, f.random(&mut rng)))
            .unzip();
        for s in &s1 {
            assert_eq!(s.to_bytes(f).len(), 1 + 2 * f.byte_len());
        }
        for s in &s2 {
            assert_eq!(s.to_bytes(f).len(), 1 + 2 * f.byte_len());
        }
        let c1 = scheme2s::eval1(&params, prog, &s1).unwrap();
        let c2 = scheme2s::eval2(&params, prog, &s2).unwrap();
        sizes.push((f.encode(c1).len(), f.encode(c2).len()));
    }
    assert_eq!(sizes[0], sizes[1]);
    assert_eq!(sizes[0], (16, 16));
}

#[test]
fn sequential_and_parallel_agree() {
    let params = SchemeParams::default();
    let f = params.field();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let sk = scheme2s::keygen_with(&mut rng);
    let prog = generate::full_quadratic(f, generate::labels("par", 200), &mut rng).unwrap();
    let (s1, s2): (Vec<Share1>, Vec<Share2>) = prog
        .labels()
        .iter()
        .map(|l| scheme2s::encrypt(&params, &sk, l, f.random(&mut rng)))
        .unzip();
    assert_eq!(
        scheme2s::eval1_with(Execution::Sequential, &params, &prog, &s1).unwrap(),
        scheme2s::eval1_with(Execution::Parallel, &params, &prog, &s1).unwrap()
    );
    assert_eq!(
        scheme2s::eval2_with(Execution::Sequential, &params, &prog, &s2).unwrap(),
        scheme2s::eval2_with(Execution::Parallel, &params, &prog, &s2).unwrap()
    );
}

#[test]
fn share_count_must_match_program() {
    let params = params(97);
    let prog = product_program(params.field());
    let (s1, s2) = scheme2s::encrypt_with_masks(&params, Fe::ONE, Fe::ONE, Fe::ONE);
    assert!(scheme2s::eval1(&params, &prog, &[s1]).is_err());
    assert!(scheme2s::eval2(&params, &prog, &[s2, s2, s2]).is_err());
}
