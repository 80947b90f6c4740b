use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use labelmask_core::game::{self, GameConfig};
use labelmask_core::program::generate;
use labelmask_core::scheme2v::Decision;
use labelmask_core::schemeds::DsDecision;
use labelmask_core::{Execution, Fe, Label, MonomialProgram, SchemeParams};
use labelmask_net::store::default_data_dir;
use labelmask_net::{Client, ClientConfig, Scheme, ServerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::bench;
use crate::data::{self, Program};
use crate::error::{CliError, Result};
use crate::keyfile::{KeyFile, Keys};

#[derive(Debug, Parser)]
#[command(name = "labelmask", version, about = "Delegate quadratic computations on label-masked data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a fresh secret key file.
    Keygen {
        #[arg(long, value_parser = parse_scheme)]
        scheme: Scheme,
        /// Server count for DS and DV.
        #[arg(long, default_value_t = 2)]
        servers: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        lambda: u32,
    },
    /// Run one share-storing server until killed.
    Serve {
        /// One-based server index.
        #[arg(long)]
        role: usize,
        #[arg(long, default_value = "127.0.0.1:7401")]
        listen: String,
        /// Defaults to $LABELMASK_DATA_DIR, else ./labelmask-data.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        lambda: u32,
        /// Evaluate without the thread pool.
        #[arg(long)]
        sequential: bool,
    },
    /// Encrypt a CSV or JSONL file of rows and store the shares.
    EncryptUpload {
        #[arg(long)]
        key: PathBuf,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        input: PathBuf,
    },
    /// Ask the servers to evaluate a program file and print the result.
    Delegate {
        #[arg(long)]
        key: PathBuf,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        program: PathBuf,
    },
    /// Evaluate a program on plaintext rows locally.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        program: PathBuf,
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Print a seeded random program over the labels of a data file.
    GenProgram {
        #[arg(long, value_enum, default_value_t = ProgramKind::Full)]
        kind: ProgramKind,
        /// Take labels from this data file.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Use only the first n labels (or generate n labels without --input).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "item")]
        prefix: String,
        #[arg(long, default_value_t = 0.1)]
        density: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Time Eval and Dec over the full quadratic program at each size.
    Bench {
        #[arg(long, value_delimiter = ',', value_parser = parse_scheme, default_value = "2S,2V")]
        scheme: Vec<Scheme>,
        #[arg(long, value_delimiter = ',', default_value = "10,50,100,500,1000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = bench::MIN_REPS)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        lambda: u32,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean latency of t simultaneous requests at a single worker.
    QueueSim {
        #[arg(long, value_delimiter = ',', default_value = "10,100")]
        t: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        lambda: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the forgery experiment against the verifiable two-server scheme.
    Game {
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 1_000)]
        honest: usize,
        #[arg(long, default_value_t = 32)]
        dataset: usize,
        #[arg(long, default_value_t = 4)]
        inputs: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        lambda: u32,
    },
}

#[derive(Debug, Args)]
pub struct NetArgs {
    /// Server endpoints in role order, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub servers: Vec<String>,
    /// Per-request timeout in seconds; 0 waits forever.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 0)]
    pub retries: u32,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Take the modulus from this key file.
    #[arg(long, conflicts_with = "lambda")]
    pub key: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProgramKind {
    Full,
    Sparse,
    Monomial,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse()
}

fn params_for(lambda: u32) -> Result<SchemeParams> {
    SchemeParams::for_lambda(lambda).map_err(|e| CliError::Usage(e.to_string()))
}

impl FieldArgs {
    fn params(&self) -> Result<SchemeParams> {
        match (&self.key, self.lambda) {
            (Some(path), _) => Ok(KeyFile::read(path)?.1),
            (None, Some(l)) => params_for(l),
            (None, None) => Ok(SchemeParams::default()),
        }
    }
}

impl NetArgs {
    fn client(&self, params: SchemeParams) -> Result<Client> {
        if !(self.timeout >= 0.0 && self.timeout.is_finite()) {
            return Err(CliError::Usage("--timeout must be a non-negative number of seconds".into()));
        }
        let config = ClientConfig {
            timeout: (self.timeout > 0.0).then(|| Duration::from_secs_f64(self.timeout)),
            retries: self.retries,
        };
        Ok(Client::new(self.servers.clone(), params, config))
    }
}

fn check_servers(keys: &Keys, net: &NetArgs) -> Result<()> {
    if keys.servers() != net.servers.len() {
        return Err(CliError::Usage(format!(
            "{} key expects {} servers, got {}",
            keys.scheme(),
            keys.servers(),
            net.servers.len()
        )));
    }
    Ok(())
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(CliError::file(p))?),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Keygen {
            scheme,
            servers,
            out,
            lambda,
        } => {
            let params = params_for(lambda)?;
            let servers = if matches!(scheme, Scheme::TwoServer | Scheme::TwoServerVerifiable) {
                2
            } else {
                servers
            };
            let keys = Keys::generate(&params, scheme, servers)?;
            keys.to_file(&params).write(&out)?;
            eprintln!("wrote {scheme} key for {servers} servers to {}", out.display());
            Ok(())
        }
        Command::Serve {
            role,
            listen,
            data_dir,
            lambda,
            sequential,
        } => {
            if role == 0 {
                return Err(CliError::Usage("--role is one-based".into()));
            }
            let mut config = ServerConfig::new(role, data_dir.unwrap_or_else(default_data_dir));
            config.params = params_for(lambda)?;
            config.listen = listen;
            if sequential {
                config.exec = Execution::Sequential;
            }
            let handle = labelmask_net::spawn(config)?;
            let rec = handle.recovery();
            let mut out = io::stdout().lock();
            writeln!(out, "listening on {} role={role}", handle.local_addr())?;
            out.flush()?;
            drop(out);
            eprintln!("replayed {} records, cut {} torn bytes", rec.records, rec.truncated_bytes);
            handle.wait();
            Ok(())
        }
        Command::EncryptUpload { key, net, input } => {
            let (keys, params) = KeyFile::read(&key)?;
            check_servers(&keys, &net)?;
            let rows = data::read_rows(params.field(), &input)?;
            let client = net.client(params)?;
            match &keys {
                Keys::TwoServer(sk) => client.upload_2s(sk, &rows)?,
                Keys::TwoServerVerifiable(sk) => client.upload_2v(sk, &rows)?,
                Keys::MultiServer { key, .. } => client.upload_ds(key, &rows)?,
                Keys::MultiServerVerifiable(k) => client.upload_dv(k, &rows)?,
            }
            eprintln!("uploaded {} rows", rows.len());
            Ok(())
        }
        Command::Delegate { key, net, program } => {
            let (keys, params) = KeyFile::read(&key)?;
            check_servers(&keys, &net)?;
            let prog = data::read_program(params.field(), &program)?;
            let client = net.client(params)?;
            let value = delegate(&client, &keys, prog)?;
            println!("{}", value.value());
            Ok(())
        }
        Command::Oracle { input, program, field } => {
            let params = field.params()?;
            let rows = data::read_rows(params.field(), &input)?;
            let prog = data::read_program(params.field(), &program)?;
            println!("{}", data::evaluate(params.field(), &prog, &rows)?.value());
            Ok(())
        }
        Command::GenProgram {
            kind,
            input,
            n,
            prefix,
            density,
            seed,
            field,
        } => {
            let params = field.params()?;
            let f = params.field();
            let mut labels: Vec<Label> = match (&input, n) {
                (Some(path), _) => data::read_rows(f, path)?.into_iter().map(|(l, _)| l).collect(),
                (None, Some(n)) => generate::labels(&prefix, n),
                (None, None) => return Err(CliError::Usage("gen-program needs --input or --n".into())),
            };
            if let Some(n) = n {
                if n > labels.len() {
                    return Err(CliError::Usage(format!("--n {n} exceeds the {} available labels", labels.len())));
                }
                labels.truncate(n);
            }
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let prog = match kind {
                ProgramKind::Full => Program::Quadratic(generate::full_quadratic(f, labels, &mut rng)?),
                ProgramKind::Sparse => Program::Quadratic(generate::sparse_quadratic(f, labels, density, &mut rng)?),
                ProgramKind::Monomial => Program::Monomial(MonomialProgram::new(labels)?),
            };
            let text = serde_json::to_string(&prog.to_file(f)?).map_err(|e| CliError::Data(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
        Command::Bench {
            scheme,
            sizes,
            reps,
            seed,
            lambda,
            out,
        } => {
            let params = params_for(lambda)?;
            let mut reports = Vec::new();
            for &s in &scheme {
                for &n in &sizes {
                    let r = bench::run(&params, s, n, reps, seed)?;
                    eprintln!("{} n={} eval={:.6}s dec={:.6}s", r.scheme, r.n, r.eval_s(), r.dec_s);
                    reports.push(r);
                }
            }
            bench::write_csv(output(out.as_ref())?, &reports)?;
            if reports.iter().any(|r| !r.correct) {
                return Err(CliError::Data("a benchmark run decrypted to the wrong value".into()));
            }
            Ok(())
        }
        Command::QueueSim {
            t,
            n,
            seed,
            lambda,
            out,
        } => {
            let params = params_for(lambda)?;
            let reports = t
                .iter()
                .map(|&t| bench::queue_sim(&params, t, n, seed))
                .collect::<Result<Vec<_>>>()?;
            bench::write_csv(output(out.as_ref())?, &reports)
        }
        Command::Game {
            trials,
            honest,
            dataset,
            inputs,
            seed,
            lambda,
        } => {
            let params = params_for(lambda)?;
            let config = GameConfig {
                trials,
                honest_runs: honest,
                dataset,
                program_inputs: inputs,
                seed,
            };
            let report = game::run_unforgeability_game(&params, &config)?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))?;
            println!("{text}");
            if !report.passed() {
                return Err(CliError::Data("the game recorded a forgery or a failed honest run".into()));
            }
            Ok(())
        }
    }
}

fn wrong_program(keys: &Keys) -> CliError {
    let want = match keys.scheme() {
        Scheme::TwoServer | Scheme::TwoServerVerifiable => "a quadratic program",
        _ => "a monomial label list",
    };
    CliError::Usage(format!("{} keys need {want}", keys.scheme()))
}

/// Runs one delegation; a failed verification becomes [`CliError::Reject`]
/// after `REJECT` is printed.
pub fn delegate(client: &Client, keys: &Keys, prog: Program) -> Result<Fe> {
    let reject = |detail: String| {
        println!("REJECT");
        CliError::Reject(detail)
    };
    match (keys, prog) {
        (Keys::TwoServer(sk), Program::Quadratic(p)) => Ok(client.delegate_2s(sk, &p)?),
        (Keys::TwoServerVerifiable(sk), Program::Quadratic(p)) => match client.delegate_2v(sk, &p)? {
            Decision::Accept(v) => Ok(v),
            Decision::Reject(r) => Err(reject(format!("{r:?}"))),
        },
        (Keys::MultiServer { key, .. }, Program::Monomial(p)) => Ok(client.delegate_ds(key, &p)?),
        (Keys::MultiServerVerifiable(k), Program::Monomial(p)) => match client.delegate_dv(k, &p)? {
            DsDecision::Accept(v) => Ok(v),
            DsDecision::Reject(servers) => Err(reject(format!("servers {servers:?}"))),
        },
        (keys, _) => Err(wrong_program(keys)),
    }
}
