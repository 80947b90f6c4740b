use std::collections::HashMap;

use labelmask_core::program::{compose, generate};
use labelmask_core::{Error, Fe, Label, LinTerm, MonomialProgram, PrimeField, QuadTerm, QuadraticForm, QuadraticProgram};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn field() -> PrimeField {
    PrimeField::new(1_000_003).unwrap()
}

fn random_form(f: &PrimeField, n: usize, quadratic: bool, rng: &mut ChaCha20Rng) -> QuadraticForm {
    let mut quad = Vec::new();
    if quadratic {
        for i in 0..n {
            for j in i..n {
                if rng.gen_bool(0.5) {
                    quad.push(QuadTerm { i, j, alpha: f.random(rng) });
                }
            }
        }
    }
    let lin = (0..n).map(|k| LinTerm { k, beta: f.random(rng) }).collect();
    QuadraticForm::new(n, quad, lin, f.random(rng)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn scaling_coefficients_scales_output(seed in any::<u64>(), n in 1usize..12, c in 0u128..1_000_003) {
        let f = field();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let form = random_form(&f, n, true, &mut rng);
        let m: Vec<Fe> = (0..n).map(|_| f.random(&mut rng)).collect();
        let c = f.elem(c);
        prop_assert_eq!(form.scaled(&f, c).eval(&f, &m).unwrap(), f.mul(c, form.eval(&f, &m).unwrap()));
    }

    #[test]
    fn composition_commutes_with_evaluation(seed in any::<u64>(), outer_n in 1usize..5, quadratic_outer in any::<bool>()) {
        let f = field();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pool = generate::labels("v", 6);
        let values: HashMap<Label, Fe> = pool.iter().map(|l| (l.clone(), f.random(&mut rng))).collect();

        let outer = random_form(&f, outer_n, quadratic_outer, &mut rng);
        let inner: Vec<QuadraticProgram> = (0..outer_n)
            .map(|_| {
                let k = rng.gen_range(1..=3);
                let idx = rand::seq::index::sample(&mut rng, pool.len(), k).into_vec();
                let labels = idx.into_iter().map(|i| pool[i].clone()).collect();
                let form = random_form(&f, k, !quadratic_outer, &mut rng);
                QuadraticProgram::from_form(form, labels).unwrap()
            })
            .collect();

        let composed = compose(&f, &outer, &inner).unwrap();
        let inner_out: Vec<Fe> = inner
            .iter()
            .map(|p| {
                let m: Vec<Fe> = p.labels().iter().map(|l| values[l]).collect();
                p.eval_plain(&f, &m).unwrap()
            })
            .collect();
        let m: Vec<Fe> = composed.labels().iter().map(|l| values[l]).collect();
        prop_assert_eq!(composed.eval_plain(&f, &m).unwrap(), outer.eval(&f, &inner_out).unwrap());
    }
}

#[test]
fn composing_quadratics_under_a_product_is_refused() {
    let f = field();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let sq = generate::full_quadratic(&f, generate::labels("q", 2), &mut rng).unwrap();
    let outer = QuadraticForm::new(2, vec![QuadTerm { i: 0, j: 1, alpha: f.one() }], vec![], Fe::ZERO).unwrap();
    assert!(matches!(
        compose(&f, &outer, &[sq.clone(), sq]),
        Err(Error::UnsupportedDegree { .. })
    ));
}

#[test]
fn json_round_trip() {
    let f = PrimeField::default_128();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let prog = generate::sparse_quadratic(&f, generate::labels("j", 8), 0.4, &mut rng).unwrap();
    let text = prog.to_json(&f).unwrap();
    assert_eq!(QuadraticProgram::from_json(&f, &text).unwrap(), prog);

    let mono = MonomialProgram::new(generate::labels("m", 4)).unwrap();
    assert_eq!(MonomialProgram::from_json(&mono.to_json().unwrap()).unwrap(), mono);
}

#[test]
fn generated_sizes() {
    let f = field();
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    for n in [1usize, 10, 50] {
        let p = generate::full_quadratic(&f, generate::labels("g", n), &mut rng).unwrap();
        assert_eq!(p.quad().len(), n * (n + 1) / 2);
        assert_eq!(p.lin().len(), n);
    }
}
