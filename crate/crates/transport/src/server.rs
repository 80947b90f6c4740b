//! Share-storing daemon.
//!
//! One daemon plays one server role. Its configuration names only its own
//! listen address, role and data directory: there is no way to point it at
//! another server, and no frame asks for stored shares back.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};

use labelmask_core::program::{MonomialDoc, ProgramDoc};
use labelmask_core::scheme2s::{self, Share1, Share2};
use labelmask_core::scheme2v::{self, VShare1, VShare2};
use labelmask_core::schemeds::{self, ShareMatrix, ShareMatrixRow, TaggedRow, TaggedShareMatrix, MAX_SERVERS};
use labelmask_core::{Execution, Fe, Label, MonomialProgram, QuadraticProgram, SchemeParams};

use crate::error::{NetError, Result};
use crate::store::{Recovery, ShareLog, StoreRecord};
use crate::wire::{self, ErrorCode, Frame, Scheme};

#[derive(Clone, Debug)]
pub struct ServerConfig {
    /// One-based server index.
    pub role: usize,
    pub params: SchemeParams,
    pub data_dir: PathBuf,
    /// `host:port`; port 0 picks a free one.
    pub listen: String,
    pub exec: Execution,
}

impl ServerConfig {
    pub fn new(role: usize, data_dir: impl Into<PathBuf>) -> Self {
        ServerConfig {
            role,
            params: SchemeParams::default(),
            data_dir: data_dir.into(),
            listen: "127.0.0.1:0".into(),
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug)]
enum Stored {
    Share1(Share1),
    Share2(Share2),
    VShare1(VShare1),
    VShare2(VShare2),
    Row(ShareMatrixRow),
    Tagged(TaggedRow),
}

/// Each stored share's variant is fixed by its (scheme, role) key.
macro_rules! expect {
    ($s:expr, $variant:path) => {
        match &**$s {
            $variant(x) => x.clone(),
            _ => unreachable!("index holds a share of another scheme"),
        }
    };
}

type Index = HashMap<(Scheme, Label), Arc<Stored>>;
/// Open client connections, kept so shutdown can close them.
type Conns = Arc<Mutex<Vec<(TcpStream, JoinHandle<()>)>>>;

struct State {
    role: usize,
    params: SchemeParams,
    exec: Execution,
    log: Mutex<ShareLog>,
    index: RwLock<Index>,
}

/// Rejection carried back to the client as an ERROR frame.
struct Refusal(ErrorCode, String);

impl From<labelmask_core::Error> for Refusal {
    fn from(e: labelmask_core::Error) -> Self {
        use labelmask_core::Error as E;
        let code = match e {
            E::UnsupportedDegree { .. } => ErrorCode::UnsupportedDegree,
            E::DuplicateLabel(_) => ErrorCode::DuplicateLabel,
            _ => ErrorCode::Malformed,
        };
        Refusal(code, e.to_string())
    }
}

fn parse_share(params: &SchemeParams, role: usize, scheme: Scheme, bytes: &[u8]) -> Result<Stored, Refusal> {
    let f = params.field();
    let wrong_role = |owner: usize| Refusal(ErrorCode::WrongRole, format!("share is for server {owner}, this is server {role}"));
    Ok(match (scheme, role) {
        (Scheme::TwoServer, 1) => Stored::Share1(Share1::from_bytes(f, bytes)?),
        (Scheme::TwoServer, 2) => Stored::Share2(Share2::from_bytes(f, bytes)?),
        (Scheme::TwoServerVerifiable, 1) => Stored::VShare1(VShare1::from_bytes(f, bytes)?),
        (Scheme::TwoServerVerifiable, 2) => Stored::VShare2(VShare2::from_bytes(f, bytes)?),
        (Scheme::TwoServer | Scheme::TwoServerVerifiable, _) => {
            return Err(Refusal(ErrorCode::WrongRole, format!("{scheme} has two servers, this is server {role}")))
        }
        (Scheme::MultiServer, _) => {
            let (row, owner) = ShareMatrixRow::from_bytes(f, bytes)?;
            if owner != role {
                return Err(wrong_role(owner));
            }
            Stored::Row(row)
        }
        (Scheme::MultiServerVerifiable, _) => {
            let (row, owner) = TaggedRow::from_bytes(f, bytes)?;
            if owner != role {
                return Err(wrong_role(owner));
            }
            Stored::Tagged(row)
        }
    })
}

impl State {
    fn store(&self, label: String, scheme: Scheme, share_hex: &str) -> Result<Frame, Refusal> {
        let label = Label::new(label.into_bytes()).map_err(|e| Refusal(ErrorCode::Malformed, e.to_string()))?;
        let bytes = hex::decode(share_hex).map_err(|e| Refusal(ErrorCode::Malformed, format!("share hex: {e}")))?;
        let parsed = parse_share(&self.params, self.role, scheme, &bytes)?;

        // the log mutex makes check-append-insert one step
        let mut log = self.log.lock().map_err(|_| Refusal(ErrorCode::Internal, "log lock poisoned".into()))?;
        let key = (scheme, label);
        if self.index.read().map_err(|_| poisoned())?.contains_key(&key) {
            return Err(Refusal(ErrorCode::DuplicateLabel, key.1.to_string()));
        }
        let rec = StoreRecord::new(key.1.clone(), scheme, self.role, bytes);
        log.append(&rec).map_err(|e| Refusal(ErrorCode::Storage, e.to_string()))?;
        self.index.write().map_err(|_| poisoned())?.insert(key, Arc::new(parsed));
        Ok(Frame::ack())
    }

    fn lookup(&self, scheme: Scheme, labels: &[Label]) -> Result<Vec<Arc<Stored>>, Refusal> {
        let index = self.index.read().map_err(|_| poisoned())?;
        let mut found = Vec::with_capacity(labels.len());
        let mut missing = Vec::new();
        for l in labels {
            match index.get(&(scheme, l.clone())) {
                Some(s) => found.push(Arc::clone(s)),
                None => missing.push(l.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Refusal(ErrorCode::MissingLabels, missing.join(",")));
        }
        Ok(found)
    }

    fn eval(&self, scheme: Scheme, program: serde_json::Value) -> Result<Frame, Refusal> {
        let p = &self.params;
        let f = p.field();
        let malformed = |e: serde_json::Error| Refusal(ErrorCode::Malformed, format!("program: {e}"));
        let payload: Vec<Fe> = match scheme {
            Scheme::TwoServer | Scheme::TwoServerVerifiable => {
                let doc: ProgramDoc = serde_json::from_value(program).map_err(malformed)?;
                let prog = QuadraticProgram::from_doc(f, doc)?;
                let shares = self.lookup(scheme, prog.labels())?;
                match (scheme, self.role) {
                    (Scheme::TwoServer, 1) => {
                        let s: Vec<Share1> = shares.iter().map(|s| expect!(s, Stored::Share1)).collect();
                        vec![scheme2s::eval1_with(self.exec, p, &prog, &s)?]
                    }
                    (Scheme::TwoServer, _) => {
                        let s: Vec<Share2> = shares.iter().map(|s| expect!(s, Stored::Share2)).collect();
                        vec![scheme2s::eval2_with(self.exec, p, &prog, &s)?]
                    }
                    (_, 1) => {
                        let s: Vec<VShare1> = shares.iter().map(|s| expect!(s, Stored::VShare1)).collect();
                        scheme2v::veval1_with(self.exec, p, &prog, &s)?.coeffs().to_vec()
                    }
                    _ => {
                        let s: Vec<VShare2> = shares.iter().map(|s| expect!(s, Stored::VShare2)).collect();
                        scheme2v::veval2_with(self.exec, p, &prog, &s)?.coeffs().to_vec()
                    }
                }
            }
            Scheme::MultiServer | Scheme::MultiServerVerifiable => {
                let doc: MonomialDoc = serde_json::from_value(program).map_err(malformed)?;
                let prog = MonomialProgram::from_doc(doc)?;
                let d = prog.degree();
                if self.role > d {
                    return Err(Refusal(
                        ErrorCode::WrongRole,
                        format!("degree-{d} product has no server {}", self.role),
                    ));
                }
                let shares = self.lookup(scheme, prog.labels())?;
                let width_err = |w: usize| {
                    Refusal(
                        ErrorCode::UnsupportedDegree,
                        format!("stored rows are for {w} servers, program has degree {d}"),
                    )
                };
                if scheme == Scheme::MultiServer {
                    let rows: Vec<ShareMatrixRow> = shares.iter().map(|s| expect!(s, Stored::Row)).collect();
                    if let Some(r) = rows.iter().find(|r| r.entries.len() != d) {
                        return Err(width_err(r.entries.len()));
                    }
                    let m = ShareMatrix::new(self.role, rows)?;
                    vec![schemeds::compute_sj(p, self.role, &m)?]
                } else {
                    let rows: Vec<TaggedRow> = shares.iter().map(|s| expect!(s, Stored::Tagged)).collect();
                    if let Some(r) = rows.iter().find(|r| r.entries.len() != d) {
                        return Err(width_err(r.entries.len()));
                    }
                    let m = TaggedShareMatrix::new(self.role, rows)?;
                    schemeds::ds_veval(p, self.role, &m)?.coeffs().to_vec()
                }
            }
        };
        Ok(Frame::Result {
            payload: wire::encode_elems(f, &payload),
        })
    }

    fn handle(&self, frame: Frame) -> Frame {
        let res = match frame {
            Frame::Store { label, scheme, share } => self.store(label, scheme, &share),
            Frame::Eval { scheme, program } => self.eval(scheme, program),
            Frame::Result { .. } | Frame::Error { .. } => {
                Err(Refusal(ErrorCode::Malformed, "servers accept only STORE and EVAL".into()))
            }
        };
        res.unwrap_or_else(|Refusal(code, detail)| Frame::Error { code, detail })
    }
}

fn poisoned() -> Refusal {
    Refusal(ErrorCode::Internal, "index lock poisoned".into())
}

fn serve_connection(state: &State, stream: TcpStream) -> Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    match wire::read_line(&mut reader)? {
        Some(line) if line == wire::CLIENT_HELLO => {}
        Some(line) => {
            let detail = format!("expected {:?}, got {line:?}", wire::CLIENT_HELLO);
            return wire::write_frame(&mut writer, &Frame::error(ErrorCode::BadHeader, detail));
        }
        None => return Ok(()),
    }
    writeln!(writer, "{}", wire::server_hello(state.role, state.params.modulus()))?;
    writer.flush()?;
    loop {
        let line = match wire::read_line(&mut reader)? {
            Some(l) => l,
            None => return Ok(()),
        };
        let reply = match serde_json::from_str::<Frame>(&line) {
            Ok(frame) => state.handle(frame),
            Err(e) => Frame::error(ErrorCode::Malformed, format!("bad frame: {e}")),
        };
        wire::write_frame(&mut writer, &reply)?;
    }
}

/// A running daemon.
pub struct ServerHandle {
    addr: SocketAddr,
    recovery: Recovery,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
    conns: Conns,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// What was replayed from the log at startup.
    pub fn recovery(&self) -> &Recovery {
        &self.recovery
    }

    /// Blocks until the acceptor exits (that is, forever unless shut down).
    pub fn wait(mut self) {
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }

    /// Stops accepting, closes open connections and waits for their threads.
    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        let conns = std::mem::take(&mut *self.conns.lock().unwrap_or_else(|e| e.into_inner()));
        for (s, _) in &conns {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
        for (_, h) in conns {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.acceptor.is_some() {
            self.stop_now();
        }
    }
}

/// Opens the log, rebuilds the index and starts listening.
pub fn spawn(config: ServerConfig) -> Result<ServerHandle> {
    if !(1..=MAX_SERVERS).contains(&config.role) {
        return Err(NetError::Store(format!("role must be in 1..={MAX_SERVERS}")));
    }
    let (log, records, recovery) = ShareLog::open(&config.data_dir, config.role, config.params.modulus())?;
    let mut index = Index::new();
    for rec in records {
        let parsed = parse_share(&config.params, config.role, rec.scheme, &rec.share)
            .map_err(|Refusal(_, d)| NetError::Store(format!("unreadable record for {}: {d}", rec.label)))?;
        index.entry((rec.scheme, rec.label)).or_insert_with(|| Arc::new(parsed));
    }
    let state = Arc::new(State {
        role: config.role,
        params: config.params,
        exec: config.exec,
        log: Mutex::new(log),
        index: RwLock::new(index),
    });

    let listener = TcpListener::bind(&config.listen)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let conns: Conns = Arc::default();

    let acceptor = {
        let stop = Arc::clone(&stop);
        let conns = Arc::clone(&conns);
        thread::Builder::new()
            .name(format!("labelmask-accept-{}", config.role))
            .spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let _ = stream.set_nodelay(true);
                    let Ok(peer) = stream.try_clone() else { continue };
                    let state = Arc::clone(&state);
                    let h = thread::spawn(move || {
                        let _ = serve_connection(&state, stream);
                    });
                    let mut list = conns.lock().unwrap_or_else(|e| e.into_inner());
                    list.retain(|(_, h)| !h.is_finished());
                    list.push((peer, h));
                }
            })?
    };

    Ok(ServerHandle {
        addr,
        recovery,
        stop,
        acceptor: Some(acceptor),
        conns,
    })
}
