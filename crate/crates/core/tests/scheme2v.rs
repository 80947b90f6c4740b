use labelmask_core::game::{run_unforgeability_game, GameConfig};
use labelmask_core::program::generate;
use labelmask_core::scheme2s::{self, Share1, Share2};
use labelmask_core::scheme2v::{self, Decision, RejectReason, VShare1, VShare2};
use labelmask_core::{Execution, Fe, QuadraticProgram, SchemeParams, TagPolynomial};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

struct Setup {
    params: SchemeParams,
    sk: scheme2v::SecretKey2V,
    prog: QuadraticProgram,
    m: Vec<Fe>,
    s1: Vec<VShare1>,
    s2: Vec<VShare2>,
}

fn setup(p: u128, seed: u64, n: usize, density: f64) -> Setup {
    let params = SchemeParams::new(p).unwrap();
    let f = params.field();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sk = scheme2v::vkeygen_with(&params, &mut rng);
    let prog = generate::sparse_quadratic(f, generate::labels("v", n), density, &mut rng).unwrap();
    let m: Vec<Fe> = (0..n).map(|_| f.random(&mut rng)).collect();
    let (s1, s2) = prog
        .labels()
        .iter()
        .zip(&m)
        .map(|(l, &v)| scheme2v::vencrypt(&params, &sk, l, v))
        .unzip();
    Setup { params, sk, prog, m, s1, s2 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn payload_and_mac_consistency(seed in any::<u64>(), n in 1usize..30, density in 0.0f64..0.5, small in any::<bool>()) {
        let p = if small { 97 } else { SchemeParams::default().modulus() };
        let s = setup(p, seed, n, density);
        let f = s.params.field();
        let c1 = scheme2v::veval1(&s.params, &s.prog, &s.s1).unwrap();
        let c2 = scheme2v::veval2(&s.params, &s.prog, &s.s2).unwrap();

        // constant coefficients run the unverified scheme
        let p1: Vec<Share1> = s.s1.iter().map(|v| Share1 { u: v.y1.coeff(0), v: v.y2.coeff(0) }).collect();
        let p2: Vec<Share2> = s.s2.iter().map(|v| Share2 { w: v.y3.coeff(0), a: v.y4.coeff(0) }).collect();
        prop_assert_eq!(c1.eval(f, Fe::ZERO), scheme2s::eval1(&s.params, &s.prog, &p1).unwrap());
        prop_assert_eq!(c2.eval(f, Fe::ZERO), scheme2s::eval2(&s.params, &s.prog, &p2).unwrap());

        let t = scheme2v::mac_targets(&s.params, &s.sk, &s.prog);
        prop_assert_eq!(c1.eval(f, s.sk.s1()), t.r1);
        prop_assert_eq!(c2.eval(f, s.sk.s2()), t.r2);

        let d = scheme2v::vdecrypt(&s.params, &s.sk, &s.prog, &c1, &c2).unwrap();
        prop_assert_eq!(d, Decision::Accept(s.prog.eval_plain(f, &s.m).unwrap()));
    }
}

#[test]
fn tampering_is_attributed_to_the_right_server() {
    let s = setup(SchemeParams::default().modulus(), 9, 12, 0.4);
    let f = s.params.field();
    let c1 = scheme2v::veval1(&s.params, &s.prog, &s.s1).unwrap();
    let c2 = scheme2v::veval2(&s.params, &s.prog, &s.s2).unwrap();
    let bump = |c: &TagPolynomial, k: usize| {
        let mut v = c.coeffs().to_vec();
        v[k] = f.add(v[k], Fe::ONE);
        TagPolynomial::new(v).unwrap()
    };
    for k in 0..3 {
        let r = scheme2v::vdecrypt(&s.params, &s.sk, &s.prog, &bump(&c1, k), &c2).unwrap();
        assert_eq!(r, Decision::Reject(RejectReason::Server1));
        let r = scheme2v::vdecrypt(&s.params, &s.sk, &s.prog, &c1, &bump(&c2, k)).unwrap();
        assert_eq!(r, Decision::Reject(RejectReason::Server2));
        let r = scheme2v::vdecrypt(&s.params, &s.sk, &s.prog, &bump(&c1, k), &bump(&c2, k)).unwrap();
        assert_eq!(r, Decision::Reject(RejectReason::Both));
    }
    // swapping the two answers is also caught
    let r = scheme2v::vdecrypt(&s.params, &s.sk, &s.prog, &c2, &c1).unwrap();
    assert!(!r.is_accept());
}

#[test]
fn evaluated_tags_have_three_coefficients_for_any_program() {
    let small = setup(SchemeParams::default().modulus(), 1, 1, 1.0);
    let params = SchemeParams::default();
    let f = params.field();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let sk = scheme2v::vkeygen_with(&params, &mut rng);
    let big = generate::full_quadratic(f, generate::labels("b", 1000), &mut rng).unwrap();
    let (b1, b2): (Vec<VShare1>, Vec<VShare2>) = big
        .labels()
        .iter()
        .map(|l| scheme2v::vencrypt(&params, &sk, l, f.random(&mut rng)))
        .unzip();

    let fresh = 1 + 2 * (1 + 2 * f.byte_len());
    assert_eq!(small.s1[0].to_bytes(f).len(), fresh);
    assert_eq!(b2[999].to_bytes(f).len(), fresh);

    let sizes: Vec<usize> = [
        scheme2v::veval1(&params, &small.prog, &small.s1).unwrap(),
        scheme2v::veval2(&params, &small.prog, &small.s2).unwrap(),
        scheme2v::veval1(&params, &big, &b1).unwrap(),
        scheme2v::veval2(&params, &big, &b2).unwrap(),
    ]
    .iter()
    .map(|c| {
        assert_eq!(c.coeffs().len(), 3);
        c.to_bytes(f).len()
    })
    .collect();
    assert!(sizes.iter().all(|&s| s == 1 + 3 * f.byte_len()));
}

#[test]
fn sequential_and_parallel_agree() {
    let s = setup(SchemeParams::default().modulus(), 6, 150, 1.0);
    for exec in [Execution::Sequential, Execution::Parallel] {
        assert_eq!(
            scheme2v::veval1_with(exec, &s.params, &s.prog, &s.s1).unwrap(),
            scheme2v::veval1(&s.params, &s.prog, &s.s1).unwrap()
        );
        assert_eq!(
            scheme2v::veval2_with(exec, &s.params, &s.prog, &s.s2).unwrap(),
            scheme2v::veval2(&s.params, &s.prog, &s.s2).unwrap()
        );
    }
}

#[test]
fn forgery_game_is_seed_deterministic() {
    let cfg = GameConfig {
        trials: 400,
        honest_runs: 20,
        seed: 77,
        ..Default::default()
    };
    let params = SchemeParams::default();
    let a = run_unforgeability_game(&params, &cfg).unwrap();
    let b = run_unforgeability_game(&params, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.passed());
    assert!(a.type1_trials > 0 && a.type2_trials > 0);
}

#[test]
fn random_tags_rarely_pass_over_a_tiny_field() {
    // over Z_p a uniformly random tag satisfies one fixed equation with
    // probability 1/p; check the harness sees roughly that rate
    let cfg = GameConfig {
        trials: 20_000,
        honest_runs: 10,
        seed: 3,
        ..Default::default()
    };
    let r = run_unforgeability_game(&SchemeParams::new(11).unwrap(), &cfg).unwrap();
    let rate = r.forgeries_accepted as f64 / r.trials as f64;
    assert!((rate - 1.0 / 11.0).abs() < 0.02, "rate {rate}");
    assert_eq!(r.honest_accepted, 10);
}
