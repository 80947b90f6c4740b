//! Man-in-the-middle relay for fault-injection tests.
//!
//! Forwards one server's traffic unchanged, except that when tampering is on
//! it flips one random bit of one field element in every non-empty RESULT,
//! keeping the element inside the field so the frame still parses.

use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::Result;
use crate::wire::{self, Frame};

pub struct TamperProxy {
    addr: SocketAddr,
    tamper: Arc<AtomicBool>,
    flipped: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
    streams: Arc<Mutex<Vec<TcpStream>>>,
}

impl TamperProxy {
    /// Listens on a free local port and relays to `upstream`.
    pub fn spawn(upstream: SocketAddr, seed: u64) -> Result<TamperProxy> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let tamper = Arc::new(AtomicBool::new(false));
        let flipped = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let streams: Arc<Mutex<Vec<TcpStream>>> = Arc::default();
        let acceptor = {
            let (tamper, flipped, stop, streams) = (tamper.clone(), flipped.clone(), stop.clone(), streams.clone());
            thread::spawn(move || {
                let rng = Arc::new(Mutex::new(StdRng::seed_from_u64(seed)));
                for client in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(client) = client else { continue };
                    let Ok(server) = TcpStream::connect(upstream) else {
                        let _ = client.shutdown(Shutdown::Both);
                        continue;
                    };
                    if let (Ok(c), Ok(s)) = (client.try_clone(), server.try_clone()) {
                        streams.lock().unwrap_or_else(|e| e.into_inner()).extend([c, s]);
                    }
                    let (tamper, flipped, rng) = (tamper.clone(), flipped.clone(), rng.clone());
                    thread::spawn(move || relay(client, server, &tamper, &flipped, &rng));
                }
            })
        };
        Ok(TamperProxy {
            addr,
            tamper,
            flipped,
            stop,
            acceptor: Some(acceptor),
            streams,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn set_tamper(&self, on: bool) {
        self.tamper.store(on, Ordering::SeqCst);
    }

    /// Number of RESULT frames altered so far.
    pub fn flipped(&self) -> usize {
        self.flipped.load(Ordering::SeqCst)
    }
}

impl Drop for TamperProxy {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        for s in self.streams.lock().unwrap_or_else(|e| e.into_inner()).drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

fn relay(client: TcpStream, server: TcpStream, tamper: &AtomicBool, flipped: &AtomicUsize, rng: &Mutex<StdRng>) {
    // client to server is copied verbatim
    if let (Ok(mut from), Ok(mut to)) = (client.try_clone(), server.try_clone()) {
        thread::spawn(move || {
            let _ = std::io::copy(&mut from, &mut to);
            let _ = to.shutdown(Shutdown::Write);
        });
    }
    let mut reader = BufReader::new(server);
    let mut writer = BufWriter::new(client);
    let mut modulus = None;
    while let Ok(Some(line)) = wire::read_line(&mut reader) {
        let out = if modulus.is_none() {
            modulus = wire::parse_server_hello(&line).ok().map(|(_, p)| p);
            line
        } else if tamper.load(Ordering::SeqCst) {
            match (serde_json::from_str::<Frame>(&line), modulus) {
                (Ok(Frame::Result { mut payload }), Some(p)) if !payload.is_empty() => {
                    let mut rng = rng.lock().unwrap_or_else(|e| e.into_inner());
                    let i = rng.gen_range(0..payload.len());
                    if let Some(v) = flip(&payload[i], p, &mut *rng) {
                        payload[i] = v;
                        flipped.fetch_add(1, Ordering::SeqCst);
                    }
                    serde_json::to_string(&Frame::Result { payload }).unwrap_or(line)
                }
                _ => line,
            }
        } else {
            line
        };
        if writeln!(writer, "{out}").and_then(|()| writer.flush()).is_err() {
            break;
        }
    }
    let _ = writer.get_ref().shutdown(Shutdown::Both);
}

fn flip<R: Rng>(hex_elem: &str, p: u128, rng: &mut R) -> Option<String> {
    let v = u128::from_str_radix(hex_elem, 16).ok()?;
    let bits = 128 - p.leading_zeros();
    for _ in 0..64 {
        let w = v ^ (1u128 << rng.gen_range(0..bits));
        if w < p {
            return Some(format!("{w:0width$x}", width = hex_elem.len()));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_changes_exactly_one_bit_and_stays_in_field() {
        let mut rng = StdRng::seed_from_u64(1);
        let p = u128::MAX - 158;
        let x = format!("{:032x}", p - 1);
        for _ in 0..1000 {
            let y = flip(&x, p, &mut rng).unwrap();
            assert_eq!(y.len(), 32);
            let (a, b) = (u128::from_str_radix(&x, 16).unwrap(), u128::from_str_radix(&y, 16).unwrap());
            assert_eq!((a ^ b).count_ones(), 1);
            assert!(b < p);
        }
    }
}
