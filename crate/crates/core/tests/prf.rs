use std::collections::HashSet;

use labelmask_core::prf::{derive_masks_2s, prf_eval, Prf, IDX_A, IDX_B, MAX_INDEX};
use labelmask_core::{Label, PrfKey, PrimeField};

struct Vector {
    key: PrfKey,
    label: Label,
    index: usize,
    expected: u128,
}

fn vectors() -> Vec<Vector> {
    let text = include_str!("data/prf_vectors.csv");
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 4, "{line}");
            Vector {
                key: PrfKey::from_hex(cols[0]).unwrap(),
                label: Label::new(hex::decode(cols[1]).unwrap()).unwrap(),
                index: cols[2].parse().unwrap(),
                expected: u128::from_str_radix(cols[3], 16).unwrap(),
            }
        })
        .collect()
}

#[test]
fn golden_vectors() {
    let f = PrimeField::default_128();
    let vs = vectors();
    assert!(vs.len() >= 40);
    for v in &vs {
        let prf = Prf::new(&v.key);
        assert_eq!(prf.mac128(&v.label, v.index).unwrap(), v.expected, "{:?} {}", v.label, v.index);
        assert_eq!(
            prf_eval(&f, &v.key, &v.label, v.index).unwrap(),
            f.elem(v.expected)
        );
    }
}

#[test]
fn masks_are_indices_zero_and_one() {
    let f = PrimeField::default_128();
    for v in vectors().iter().filter(|v| v.index == 0) {
        let (a, b) = derive_masks_2s(&f, &v.key, &v.label);
        assert_eq!(a, prf_eval(&f, &v.key, &v.label, IDX_A).unwrap());
        assert_eq!(b, prf_eval(&f, &v.key, &v.label, IDX_B).unwrap());
        assert_ne!(a, b);
    }
}

#[test]
fn distinct_inputs_give_distinct_outputs() {
    // labels that would collide under plain concatenation with the index byte
    let key = PrfKey::from_bytes([7; 16]);
    let prf = Prf::new(&key);
    let mut seen = HashSet::new();
    let labels = [b"a".to_vec(), b"a\x00".to_vec(), b"a\x01".to_vec(), b"ab".to_vec(), vec![0u8], vec![0u8, 0]];
    for l in labels {
        let l = Label::new(l).unwrap();
        for idx in 0..4 {
            assert!(seen.insert(prf.mac128(&l, idx).unwrap()));
        }
    }
}

#[test]
fn index_range() {
    let prf = Prf::new(&PrfKey::from_bytes([0; 16]));
    let l = Label::new("x").unwrap();
    assert!(prf.mac128(&l, MAX_INDEX).is_ok());
    assert!(prf.mac128(&l, MAX_INDEX + 1).is_err());
}
