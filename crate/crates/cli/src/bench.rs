//! In-process timing of the two-server schemes and the request-queue model.
//!
//! Only the algorithm bodies sit inside the timed regions: key generation,
//! encryption and program generation happen before the clock starts.

use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use labelmask_core::program::generate;
use labelmask_core::scheme2s::{self, SecretKey2S, Share1, Share2};
use labelmask_core::scheme2v::{self, VShare1, VShare2};
use labelmask_core::{Execution, Fe, QuadraticProgram, SchemeParams};
use labelmask_net::Scheme;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TABLE_SIZES: [usize; 5] = [10, 50, 100, 500, 1000];
pub const MIN_REPS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scheme: String,
    pub n: usize,
    pub quad_terms: usize,
    pub lin_terms: usize,
    pub eval1_s: f64,
    pub eval2_s: f64,
    pub dec_s: f64,
    pub reps: usize,
    pub seed: u64,
    pub correct: bool,
    pub hardware: String,
}

impl BenchReport {
    /// Both servers' evaluation time.
    pub fn eval_s(&self) -> f64 {
        self.eval1_s + self.eval2_s
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        (xs[mid - 1] + xs[mid]) / 2.0
    }
}

fn time<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = std::hint::black_box(f());
    (out, start.elapsed().as_secs_f64())
}

/// CPU model, core count and target, best effort.
pub fn hardware_note() -> String {
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_owned())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let cores = thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!("{model}; {cores} threads; {}-{}", std::env::consts::ARCH, std::env::consts::OS)
}

struct Workload {
    prog: QuadraticProgram,
    values: Vec<Fe>,
}

fn workload(params: &SchemeParams, n: usize, seed: u64) -> Result<(Workload, ChaCha20Rng)> {
    let f = params.field();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let labels = generate::labels("bench", n);
    let values = labels.iter().map(|_| f.random(&mut rng)).collect();
    let prog = generate::full_quadratic(f, labels, &mut rng)?;
    Ok((Workload { prog, values }, rng))
}

/// One row of the timing table: the full quadratic program over `n` inputs.
pub fn run(params: &SchemeParams, scheme: Scheme, n: usize, reps: usize, seed: u64) -> Result<BenchReport> {
    if n == 0 {
        return Err(CliError::Usage("bench sizes must be positive".into()));
    }
    let reps = reps.max(MIN_REPS);
    let (w, mut rng) = workload(params, n, seed)?;
    let f = params.field();
    let expected = w.prog.eval_plain(f, &w.values)?;
    let exec = Execution::Sequential;

    let mut t1 = Vec::with_capacity(reps);
    let mut t2 = Vec::with_capacity(reps);
    let mut td = Vec::with_capacity(reps);
    let mut correct = true;
    match scheme {
        Scheme::TwoServer => {
            let sk = scheme2s::keygen_with(&mut rng);
            let (s1, s2): (Vec<Share1>, Vec<Share2>) = w
                .prog
                .labels()
                .iter()
                .zip(&w.values)
                .map(|(l, &m)| scheme2s::encrypt(params, &sk, l, m))
                .unzip();
            for _ in 0..reps {
                let (c1, a) = time(|| scheme2s::eval1_with(exec, params, &w.prog, &s1));
                let (c2, b) = time(|| scheme2s::eval2_with(exec, params, &w.prog, &s2));
                let (c1, c2) = (c1?, c2?);
                let (m, c) = time(|| scheme2s::decrypt(params, &sk, &w.prog, c1, c2));
                correct &= m == expected;
                t1.push(a);
                t2.push(b);
                td.push(c);
            }
        }
        Scheme::TwoServerVerifiable => {
            let sk = scheme2v::vkeygen_with(params, &mut rng);
            let (s1, s2): (Vec<VShare1>, Vec<VShare2>) = w
                .prog
                .labels()
                .iter()
                .zip(&w.values)
                .map(|(l, &m)| scheme2v::vencrypt(params, &sk, l, m))
                .unzip();
            for _ in 0..reps {
                let (c1, a) = time(|| scheme2v::veval1_with(exec, params, &w.prog, &s1));
                let (c2, b) = time(|| scheme2v::veval2_with(exec, params, &w.prog, &s2));
                let (c1, c2) = (c1?, c2?);
                let (d, c) = time(|| scheme2v::vdecrypt(params, &sk, &w.prog, &c1, &c2));
                correct &= d?.value() == Some(expected);
                t1.push(a);
                t2.push(b);
                td.push(c);
            }
        }
        other => return Err(CliError::Usage(format!("bench covers 2S and 2V, not {other}"))),
    }
    Ok(BenchReport {
        scheme: scheme.to_string(),
        n,
        quad_terms: w.prog.quad().len(),
        lin_terms: w.prog.lin().len(),
        eval1_s: median(&mut t1),
        eval2_s: median(&mut t2),
        dec_s: median(&mut td),
        reps,
        seed,
        correct,
        hardware: hardware_note(),
    })
}

pub fn write_csv<W: std::io::Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares line through the points: `(slope, intercept, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueReport {
    pub t: usize,
    pub n: usize,
    /// Mean time from submission to the client holding the decrypted value.
    pub mean_latency_s: f64,
    pub mean_service_s: f64,
    /// `(t+1)/2 · service` for t simultaneous arrivals at one worker.
    pub analytic_s: f64,
    pub correct: bool,
    pub seed: u64,
}

/// Submits `t` identical 2S delegations at once to a single worker that
/// serves them in arrival order.
pub fn queue_sim(params: &SchemeParams, t: usize, n: usize, seed: u64) -> Result<QueueReport> {
    if t == 0 || n == 0 {
        return Err(CliError::Usage("queue-sim needs t ≥ 1 and n ≥ 1".into()));
    }
    let (w, mut rng) = workload(params, n, seed)?;
    let expected = w.prog.eval_plain(params.field(), &w.values)?;
    let sk: SecretKey2S = scheme2s::keygen_with(&mut rng);
    let (s1, s2): (Vec<Share1>, Vec<Share2>) = w
        .prog
        .labels()
        .iter()
        .zip(&w.values)
        .map(|(l, &m)| scheme2s::encrypt(params, &sk, l, m))
        .unzip();
    let shared = Arc::new((w.prog, s1, s2, sk, *params));

    let (tx, rx) = mpsc::channel::<Instant>();
    let (done_tx, done_rx) = mpsc::channel::<(Duration, Duration, bool)>();
    let worker = {
        let shared = Arc::clone(&shared);
        thread::spawn(move || {
            let (prog, s1, s2, sk, params) = &*shared;
            for submitted in rx {
                let start = Instant::now();
                let ok = (|| -> labelmask_core::Result<Fe> {
                    let c1 = scheme2s::eval1_with(Execution::Sequential, params, prog, s1)?;
                    let c2 = scheme2s::eval2_with(Execution::Sequential, params, prog, s2)?;
                    Ok(scheme2s::decrypt(params, sk, prog, c1, c2))
                })()
                .is_ok_and(|m| m == expected);
                let end = Instant::now();
                if done_tx.send((end - submitted, end - start, ok)).is_err() {
                    break;
                }
            }
        })
    };

    let arrival = Instant::now();
    for _ in 0..t {
        tx.send(arrival).expect("worker alive");
    }
    drop(tx);
    let mut latency = 0.0;
    let mut service = 0.0;
    let mut correct = true;
    for _ in 0..t {
        let (l, s, ok) = done_rx
            .recv()
            .map_err(|_| CliError::Data("queue worker stopped early".into()))?;
        latency += l.as_secs_f64();
        service += s.as_secs_f64();
        correct &= ok;
    }
    worker
        .join()
        .map_err(|_| CliError::Data("queue worker panicked".into()))?;
    let mean_service = service / t as f64;
    Ok(QueueReport {
        t,
        n,
        mean_latency_s: latency / t as f64,
        mean_service_s: mean_service,
        analytic_s: (t as f64 + 1.0) / 2.0 * mean_service,
        correct,
        seed,
    })
}
