//! Scripted forgery experiment against the verifiable two-server scheme.
//!
//! The challenger encrypts a dataset, then a malicious server (alternating
//! between the two roles) submits forged evaluated tags. Following the
//! verification-query convention, the honest side's ciphertext is replaced by
//! the zero polynomial and only the adversary's equation is inspected. Any
//! forged tag that passes its equation counts as a successful forgery.
//!
//! Analytic bound after `Q` verification queries: `2(Q+1)/(p−2Q)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{Fe, SchemeParams};
use crate::poly::TagPolynomial;
use crate::prf::Label;
use crate::program::{generate, QuadraticProgram};
use crate::scheme2v::{self, VShare1, VShare2};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    /// Number of forged evaluated ciphertexts submitted.
    pub trials: usize,
    /// Honest end-to-end runs checked alongside.
    pub honest_runs: usize,
    /// Size of the encrypted dataset `T`.
    pub dataset: usize,
    /// Labels per delegated program.
    pub program_inputs: usize,
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            trials: 100_000,
            honest_runs: 1_000,
            dataset: 32,
            program_inputs: 4,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub seed: u64,
    pub modulus: String,
    pub trials: usize,
    pub rejections: usize,
    pub forgeries_accepted: usize,
    /// Forgeries whose program touches a label never encrypted.
    pub type1_trials: usize,
    /// Forgeries over fully encrypted labels.
    pub type2_trials: usize,
    pub honest_runs: usize,
    pub honest_accepted: usize,
    pub honest_correct: usize,
    /// `2(Q+1)/(p−2Q)` with `Q = trials`, as an f64 (documented, not measured).
    pub analytic_bound: f64,
}

impl GameReport {
    pub fn passed(&self) -> bool {
        self.forgeries_accepted == 0 && self.honest_accepted == self.honest_runs && self.honest_correct == self.honest_runs
    }
}

/// Runs the experiment single-threaded from `config.seed`.
pub fn run_unforgeability_game(params: &SchemeParams, config: &GameConfig) -> Result<GameReport> {
    let f = params.field();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let sk = scheme2v::vkeygen_with(params, &mut rng);

    // ciphertext queries
    let labels = generate::labels("game", config.dataset.max(2));
    let values: Vec<Fe> = labels.iter().map(|_| f.random(&mut rng)).collect();
    let shares: Vec<(VShare1, VShare2)> = labels
        .iter()
        .zip(&values)
        .map(|(l, &m)| scheme2v::vencrypt(params, &sk, l, m))
        .collect();

    let inputs = config.program_inputs.clamp(1, labels.len());
    let pick = |rng: &mut ChaCha20Rng| -> Vec<usize> {
        rand::seq::index::sample(rng, labels.len(), inputs).into_vec()
    };

    let mut report = GameReport {
        seed: config.seed,
        modulus: format!("{:#x}", params.modulus()),
        trials: config.trials,
        rejections: 0,
        forgeries_accepted: 0,
        type1_trials: 0,
        type2_trials: 0,
        honest_runs: config.honest_runs,
        honest_accepted: 0,
        honest_correct: 0,
        analytic_bound: {
            let p = params.modulus() as f64;
            let q = config.trials as f64;
            2.0 * (q + 1.0) / (p - 2.0 * q)
        },
    };

    let zero = TagPolynomial::zero(2);
    for trial in 0..config.trials {
        let attack_server1 = trial % 2 == 0;
        let type1 = trial % 4 >= 2;
        let idx = pick(&mut rng);
        let mut prog_labels: Vec<Label> = idx.iter().map(|&i| labels[i].clone()).collect();
        if type1 {
            prog_labels[0] = Label::new(format!("unqueried-{trial}").into_bytes())?;
            report.type1_trials += 1;
        } else {
            report.type2_trials += 1;
        }
        let prog = generate::sparse_quadratic(f, prog_labels, 0.6, &mut rng)?;

        // Half of the type-2 forgeries perturb the honest answer, the rest
        // (and every type-1 forgery) are uniformly random triples.
        let forged = if !type1 && trial % 8 < 2 {
            let honest = honest_eval(params, &prog, &idx, &shares, attack_server1)?;
            let mut delta: Vec<Fe> = (0..3).map(|_| f.random(&mut rng)).collect();
            if delta.iter().all(|d| d.is_zero()) {
                delta[0] = Fe::ONE;
            }
            honest.add(f, &TagPolynomial::new(delta)?)
        } else {
            TagPolynomial::new((0..3).map(|_| f.random(&mut rng)).collect())?
        };

        let (c1, c2) = if attack_server1 { (&forged, &zero) } else { (&zero, &forged) };
        let v = scheme2v::verify(params, &sk, &prog, c1, c2)?;
        let accepted = if attack_server1 { v.server1 } else { v.server2 };
        if accepted {
            report.forgeries_accepted += 1;
        } else {
            report.rejections += 1;
        }
    }

    for _ in 0..config.honest_runs {
        let idx = pick(&mut rng);
        let prog_labels: Vec<Label> = idx.iter().map(|&i| labels[i].clone()).collect();
        let prog = generate::sparse_quadratic(f, prog_labels, rng.gen_range(0.0..1.0), &mut rng)?;
        let c1 = honest_eval(params, &prog, &idx, &shares, true)?;
        let c2 = honest_eval(params, &prog, &idx, &shares, false)?;
        if let scheme2v::Decision::Accept(v) = scheme2v::vdecrypt(params, &sk, &prog, &c1, &c2)? {
            report.honest_accepted += 1;
            let m: Vec<Fe> = idx.iter().map(|&i| values[i]).collect();
            if v == prog.eval_plain(f, &m)? {
                report.honest_correct += 1;
            }
        }
    }
    Ok(report)
}

fn honest_eval(
    params: &SchemeParams,
    prog: &QuadraticProgram,
    idx: &[usize],
    shares: &[(VShare1, VShare2)],
    server1: bool,
) -> Result<TagPolynomial> {
    if server1 {
        let s: Vec<VShare1> = idx.iter().map(|&i| shares[i].0.clone()).collect();
        scheme2v::veval1(params, prog, &s)
    } else {
        let s: Vec<VShare2> = idx.iter().map(|&i| shares[i].1.clone()).collect();
        scheme2v::veval2(params, prog, &s)
    }
}
