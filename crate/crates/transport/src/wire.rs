//! Line-oriented frame protocol.
//!
//! A connection opens with the client sending `LABELMASK 1` and the server
//! answering `LABELMASK 1 role=<j> p=<modulus hex>`. After that each line is
//! one JSON object, and every request gets exactly one response:
//!
//! ```text
//! > {"type":"STORE","label":"x","scheme":"2S","share":"01…"}
//! < {"type":"RESULT","payload":[]}
//! > {"type":"EVAL","scheme":"2S","program":{"labels":["x","y"],"quad":[[0,1,"…01"]],"lin":[],"gamma":"…00"}}
//! < {"type":"RESULT","payload":["3b0e…"]}
//! > {"type":"STORE","label":"x","scheme":"2S","share":"01…"}
//! < {"type":"ERROR","code":"DUPLICATE_LABEL","detail":"x"}
//! ```
//!
//! Field elements travel as fixed-width lowercase hex, 32 characters for the
//! 128-bit prime. Share payloads are the hex of the share's byte encoding.

use std::fmt;
use std::io::{BufRead, Read, Write};

use labelmask_core::{Fe, PrimeField};
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

pub const PROTOCOL_VERSION: u32 = 1;
pub const CLIENT_HELLO: &str = "LABELMASK 1";
/// Upper bound on a single frame, generous enough for a full quadratic
/// program over a few thousand inputs.
pub const MAX_FRAME: usize = 512 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "2S")]
    TwoServer,
    #[serde(rename = "2V")]
    TwoServerVerifiable,
    #[serde(rename = "DS")]
    MultiServer,
    #[serde(rename = "DV")]
    MultiServerVerifiable,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::TwoServer,
        Scheme::TwoServerVerifiable,
        Scheme::MultiServer,
        Scheme::MultiServerVerifiable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::TwoServer => "2S",
            Scheme::TwoServerVerifiable => "2V",
            Scheme::MultiServer => "DS",
            Scheme::MultiServerVerifiable => "DV",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Scheme::TwoServer => 1,
            Scheme::TwoServerVerifiable => 2,
            Scheme::MultiServer => 3,
            Scheme::MultiServerVerifiable => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.tag() == tag)
    }

    pub fn is_verifiable(self) -> bool {
        matches!(self, Scheme::TwoServerVerifiable | Scheme::MultiServerVerifiable)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scheme {s:?} (expected 2S, 2V, DS or DV)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    BadHeader,
    Malformed,
    DuplicateLabel,
    MissingLabels,
    UnsupportedDegree,
    WrongRole,
    Storage,
    Internal,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("UNKNOWN"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Frame {
    Store {
        label: String,
        scheme: Scheme,
        share: String,
    },
    /// `program` is a quadratic program document for 2S/2V and a monomial
    /// document for DS/DV.
    Eval {
        scheme: Scheme,
        program: serde_json::Value,
    },
    /// Empty payload acknowledges a STORE.
    Result {
        payload: Vec<String>,
    },
    Error {
        code: ErrorCode,
        detail: String,
    },
}

impl Frame {
    pub fn ack() -> Frame {
        Frame::Result { payload: Vec::new() }
    }

    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Frame {
        Frame::Error {
            code,
            detail: detail.into(),
        }
    }
}

/// Reads one newline-terminated line; `None` on a clean end of stream.
pub fn read_line<R: BufRead>(reader: &mut R) -> Result<Option<String>> {
    let mut buf = Vec::new();
    let n = (&mut *reader).take(MAX_FRAME as u64 + 1).read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() != Some(&b'\n') {
        if buf.len() > MAX_FRAME {
            return Err(NetError::Protocol(format!("frame exceeds {MAX_FRAME} bytes")));
        }
        return Err(NetError::Protocol("connection closed mid-frame".into()));
    }
    buf.pop();
    if buf.last() == Some(&b'\r') {
        buf.pop();
    }
    String::from_utf8(buf)
        .map(Some)
        .map_err(|_| NetError::Protocol("frame is not UTF-8".into()))
}

pub fn read_frame<R: BufRead>(reader: &mut R) -> Result<Option<Frame>> {
    match read_line(reader)? {
        None => Ok(None),
        Some(line) => serde_json::from_str(&line)
            .map(Some)
            .map_err(|e| NetError::Protocol(format!("bad frame: {e}"))),
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<()> {
    let mut line = serde_json::to_vec(frame).map_err(|e| NetError::Protocol(e.to_string()))?;
    line.push(b'\n');
    w.write_all(&line)?;
    w.flush()?;
    Ok(())
}

pub fn server_hello(role: usize, modulus: u128) -> String {
    format!("{CLIENT_HELLO} role={role} p={modulus:x}")
}

/// Parses the server's greeting into `(role, modulus)`.
pub fn parse_server_hello(line: &str) -> Result<(usize, u128)> {
    let bad = || NetError::Protocol(format!("unexpected greeting {line:?}"));
    let rest = line.strip_prefix(CLIENT_HELLO).ok_or_else(bad)?;
    if !rest.starts_with(' ') {
        return Err(bad());
    }
    let mut role = None;
    let mut modulus = None;
    for part in rest.split_whitespace() {
        if let Some(v) = part.strip_prefix("role=") {
            role = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("p=") {
            modulus = u128::from_str_radix(v, 16).ok();
        }
    }
    Ok((role.ok_or_else(bad)?, modulus.ok_or_else(bad)?))
}

pub fn encode_elems(field: &PrimeField, xs: &[Fe]) -> Vec<String> {
    xs.iter().map(|&x| field.to_hex(x)).collect()
}

pub fn decode_elems(field: &PrimeField, xs: &[String]) -> Result<Vec<Fe>> {
    xs.iter()
        .map(|s| field.from_hex(s).map_err(|e| NetError::Protocol(format!("bad field element: {e}"))))
        .collect()
}
