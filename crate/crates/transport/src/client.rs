//! Client side: upload shares and delegate programs.
//!
//! Every delegation opens one connection per server, sends EVAL to all of
//! them concurrently and waits for every answer. Any transport failure aborts
//! the whole call; a verifiable REJECT is a successful call whose decision is
//! a rejection.

use std::io::{self, BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use labelmask_core::scheme2s::{self, SecretKey2S};
use labelmask_core::scheme2v::{self, Decision, SecretKey2V};
use labelmask_core::schemeds::{self, DsDecision, DsVerifiableKey};
use labelmask_core::{Fe, Label, MonomialProgram, PrfKey, QuadraticProgram, SchemeParams, TagPolynomial};

use crate::error::{NetError, Result};
use crate::wire::{self, Frame, Scheme};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientConfig {
    /// Per-server connect and read/write timeout.
    pub timeout: Option<Duration>,
    /// Extra attempts after a transport failure. Zero means fail fast.
    pub retries: u32,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            timeout: Some(Duration::from_secs(60)),
            retries: 0,
        }
    }
}

fn io_err(addr: &str, e: io::Error) -> NetError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => NetError::Timeout(addr.to_string()),
        _ => NetError::Io(io::Error::new(e.kind(), format!("{addr}: {e}"))),
    }
}

fn lift(addr: &str, e: NetError) -> NetError {
    match e {
        NetError::Io(e) => io_err(addr, e),
        other => other,
    }
}

/// One open, greeted connection to a server.
pub struct Connection {
    addr: String,
    role: usize,
    modulus: u128,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Connection {
    pub fn open(addr: &str, config: &ClientConfig) -> Result<Connection> {
        let sock = addr
            .to_socket_addrs()
            .map_err(|e| io_err(addr, e))?
            .next()
            .ok_or_else(|| NetError::Protocol(format!("{addr}: no address")))?;
        let stream = match config.timeout {
            Some(t) => TcpStream::connect_timeout(&sock, t),
            None => TcpStream::connect(sock),
        }
        .map_err(|e| io_err(addr, e))?;
        stream.set_read_timeout(config.timeout).map_err(|e| io_err(addr, e))?;
        stream.set_write_timeout(config.timeout).map_err(|e| io_err(addr, e))?;
        let _ = stream.set_nodelay(true);
        let mut reader = BufReader::new(stream.try_clone().map_err(|e| io_err(addr, e))?);
        let mut writer = BufWriter::new(stream);
        writeln!(writer, "{}", wire::CLIENT_HELLO).map_err(|e| io_err(addr, e))?;
        writer.flush().map_err(|e| io_err(addr, e))?;
        let hello = wire::read_line(&mut reader)
            .map_err(|e| lift(addr, e))?
            .ok_or_else(|| NetError::Protocol(format!("{addr}: closed before greeting")))?;
        let (role, modulus) = wire::parse_server_hello(&hello)?;
        Ok(Connection {
            addr: addr.to_string(),
            role,
            modulus,
            reader,
            writer,
        })
    }

    pub fn role(&self) -> usize {
        self.role
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    /// Sends one frame and returns the reply, turning ERROR frames into
    /// [`NetError::Server`].
    pub fn request(&mut self, frame: &Frame) -> Result<Vec<String>> {
        wire::write_frame(&mut self.writer, frame).map_err(|e| lift(&self.addr, e))?;
        match wire::read_frame(&mut self.reader).map_err(|e| lift(&self.addr, e))? {
            Some(Frame::Result { payload }) => Ok(payload),
            Some(Frame::Error { code, detail }) => Err(NetError::Server { code, detail }),
            Some(other) => Err(NetError::Protocol(format!("{}: unexpected reply {other:?}", self.addr))),
            None => Err(NetError::Protocol(format!("{}: connection closed", self.addr))),
        }
    }

    pub fn store(&mut self, label: &Label, scheme: Scheme, share: &[u8]) -> Result<()> {
        let label = label
            .as_str()
            .ok_or_else(|| NetError::Protocol(format!("label {label:?} is not UTF-8")))?
            .to_string();
        let payload = self.request(&Frame::Store {
            label,
            scheme,
            share: hex::encode(share),
        })?;
        if !payload.is_empty() {
            return Err(NetError::Protocol(format!("{}: STORE ack carried a payload", self.addr)));
        }
        Ok(())
    }
}

/// Endpoints in role order: `endpoints[j-1]` is server `j`.
#[derive(Clone, Debug)]
pub struct Client {
    endpoints: Vec<String>,
    params: SchemeParams,
    config: ClientConfig,
}

impl Client {
    pub fn new(endpoints: Vec<String>, params: SchemeParams, config: ClientConfig) -> Self {
        Client {
            endpoints,
            params,
            config,
        }
    }

    pub fn endpoints(&self) -> &[String] {
        &self.endpoints
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    fn need(&self, servers: usize) -> Result<()> {
        if self.endpoints.len() != servers {
            return Err(NetError::Protocol(format!(
                "scheme needs {servers} servers, {} endpoints given",
                self.endpoints.len()
            )));
        }
        Ok(())
    }

    fn connect(&self, j: usize) -> Result<Connection> {
        let addr = &self.endpoints[j];
        let conn = Connection::open(addr, &self.config)?;
        if conn.role() != j + 1 {
            return Err(NetError::Protocol(format!("{addr} is server {}, expected {}", conn.role(), j + 1)));
        }
        if conn.modulus() != self.params.modulus() {
            return Err(NetError::Protocol(format!(
                "{addr} uses modulus {:#x}, client uses {:#x}",
                conn.modulus(),
                self.params.modulus()
            )));
        }
        Ok(conn)
    }

    /// Runs `job` against every server at once; all must succeed.
    fn fan_out<T, F>(&self, job: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &mut Connection) -> Result<T> + Sync,
    {
        let mut attempt = 0;
        loop {
            let results: Vec<Result<T>> = thread::scope(|s| {
                let handles: Vec<_> = (0..self.endpoints.len())
                    .map(|j| {
                        let job = &job;
                        s.spawn(move || {
                            let mut conn = self.connect(j)?;
                            job(j, &mut conn)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(NetError::Protocol("worker panicked".into()))))
                    .collect()
            });
            let failed = results.iter().any(|r| matches!(r, Err(e) if e.is_transport()));
            if failed && attempt < self.config.retries {
                attempt += 1;
                continue;
            }
            return results.into_iter().collect();
        }
    }

    fn eval_all(&self, scheme: Scheme, program: serde_json::Value, width: usize) -> Result<Vec<Vec<Fe>>> {
        let f = self.params.field();
        let frame = Frame::Eval { scheme, program };
        self.fan_out(|j, conn| {
            let payload = conn.request(&frame)?;
            if payload.len() != width {
                return Err(NetError::Protocol(format!(
                    "server {} returned {} elements, expected {width}",
                    j + 1,
                    payload.len()
                )));
            }
            wire::decode_elems(f, &payload)
        })
    }

    fn upload(&self, scheme: Scheme, items: Vec<(Label, Vec<Vec<u8>>)>) -> Result<()> {
        self.fan_out(|j, conn| {
            for (label, shares) in &items {
                conn.store(label, scheme, &shares[j])?;
            }
            Ok(())
        })?;
        Ok(())
    }

    fn quad_doc(&self, prog: &QuadraticProgram) -> Result<serde_json::Value> {
        let doc = prog.to_doc(self.params.field())?;
        serde_json::to_value(doc).map_err(|e| NetError::Protocol(e.to_string()))
    }

    fn mono_doc(&self, prog: &MonomialProgram) -> Result<serde_json::Value> {
        serde_json::to_value(prog.to_doc()?).map_err(|e| NetError::Protocol(e.to_string()))
    }

    pub fn upload_2s(&self, sk: &SecretKey2S, rows: &[(Label, Fe)]) -> Result<()> {
        self.need(2)?;
        let f = self.params.field();
        let items = scheme2s::encrypt_dataset(&self.params, sk, rows)?
            .into_iter()
            .map(|e| (e.label, vec![e.share1.to_bytes(f), e.share2.to_bytes(f)]))
            .collect();
        self.upload(Scheme::TwoServer, items)
    }

    pub fn upload_2v(&self, sk: &SecretKey2V, rows: &[(Label, Fe)]) -> Result<()> {
        self.need(2)?;
        ensure_distinct(rows.iter().map(|(l, _)| l))?;
        let f = self.params.field();
        let items = rows
            .iter()
            .map(|(l, m)| {
                let (s1, s2) = scheme2v::vencrypt(&self.params, sk, l, *m);
                (l.clone(), vec![s1.to_bytes(f), s2.to_bytes(f)])
            })
            .collect();
        self.upload(Scheme::TwoServerVerifiable, items)
    }

    /// Uploads rows for a d-server deployment, `d` being the endpoint count.
    pub fn upload_ds(&self, key: &PrfKey, rows: &[(Label, Fe)]) -> Result<()> {
        let d = self.endpoints.len();
        ensure_distinct(rows.iter().map(|(l, _)| l))?;
        let f = self.params.field();
        let items = rows
            .iter()
            .map(|(l, m)| {
                let per_server = schemeds::ds_encrypt_item(&self.params, key, l, *m, d)?;
                let bytes = per_server.iter().enumerate().map(|(j, r)| r.to_bytes(f, j + 1)).collect();
                Ok((l.clone(), bytes))
            })
            .collect::<Result<Vec<_>>>()?;
        self.upload(Scheme::MultiServer, items)
    }

    pub fn upload_dv(&self, key: &DsVerifiableKey, rows: &[(Label, Fe)]) -> Result<()> {
        self.need(key.d())?;
        ensure_distinct(rows.iter().map(|(l, _)| l))?;
        let f = self.params.field();
        let items = rows
            .iter()
            .map(|(l, m)| {
                let per_server = schemeds::ds_vencrypt_item(&self.params, key, l, *m)?;
                let bytes = per_server.iter().enumerate().map(|(j, r)| r.to_bytes(f, j + 1)).collect();
                Ok((l.clone(), bytes))
            })
            .collect::<Result<Vec<_>>>()?;
        self.upload(Scheme::MultiServerVerifiable, items)
    }

    /// The servers' raw answers for a 2S program.
    pub fn eval_2s(&self, prog: &QuadraticProgram) -> Result<(Fe, Fe)> {
        self.need(2)?;
        let r = self.eval_all(Scheme::TwoServer, self.quad_doc(prog)?, 1)?;
        Ok((r[0][0], r[1][0]))
    }

    pub fn delegate_2s(&self, sk: &SecretKey2S, prog: &QuadraticProgram) -> Result<Fe> {
        let (c1, c2) = self.eval_2s(prog)?;
        Ok(scheme2s::decrypt(&self.params, sk, prog, c1, c2))
    }

    pub fn eval_2v(&self, prog: &QuadraticProgram) -> Result<(TagPolynomial, TagPolynomial)> {
        self.need(2)?;
        let mut r = self.eval_all(Scheme::TwoServerVerifiable, self.quad_doc(prog)?, 3)?;
        let c2 = TagPolynomial::new(r.pop().unwrap_or_default())?;
        let c1 = TagPolynomial::new(r.pop().unwrap_or_default())?;
        Ok((c1, c2))
    }

    pub fn delegate_2v(&self, sk: &SecretKey2V, prog: &QuadraticProgram) -> Result<Decision> {
        let (c1, c2) = self.eval_2v(prog)?;
        Ok(scheme2v::vdecrypt(&self.params, sk, prog, &c1, &c2)?)
    }

    pub fn eval_ds(&self, prog: &MonomialProgram) -> Result<Vec<Fe>> {
        self.need(prog.degree())?;
        let r = self.eval_all(Scheme::MultiServer, self.mono_doc(prog)?, 1)?;
        Ok(r.into_iter().map(|v| v[0]).collect())
    }

    pub fn delegate_ds(&self, key: &PrfKey, prog: &MonomialProgram) -> Result<Fe> {
        let responses = self.eval_ds(prog)?;
        Ok(schemeds::ds_reconstruct(&self.params, key, prog.labels(), &responses)?)
    }

    pub fn eval_dv(&self, prog: &MonomialProgram) -> Result<Vec<TagPolynomial>> {
        let d = prog.degree();
        self.need(d)?;
        self.eval_all(Scheme::MultiServerVerifiable, self.mono_doc(prog)?, d + 1)?
            .into_iter()
            .map(|c| Ok(TagPolynomial::new(c)?))
            .collect()
    }

    pub fn delegate_dv(&self, key: &DsVerifiableKey, prog: &MonomialProgram) -> Result<DsDecision> {
        let responses = self.eval_dv(prog)?;
        Ok(schemeds::ds_vdecrypt(&self.params, key, prog.labels(), &responses)?)
    }
}

fn ensure_distinct<'a>(labels: impl Iterator<Item = &'a Label>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(labelmask_core::Error::DuplicateLabel(l.to_string()).into());
        }
    }
    Ok(())
}
