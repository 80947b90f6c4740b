//! Secret key files: one JSON object tagged by scheme, written owner-only.

use std::fs;
use std::io::Write;
use std::path::Path;

use labelmask_core::scheme2s::SecretKey2S;
use labelmask_core::scheme2v::SecretKey2V;
use labelmask_core::schemeds::{DsVerifiableKey, MAX_SERVERS};
use labelmask_core::{PrfKey, SchemeParams};
use labelmask_net::Scheme;
use rand::rngs::OsRng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme")]
pub enum KeyFile {
    #[serde(rename = "2S")]
    TwoServer { modulus: String, k: String },
    #[serde(rename = "2V")]
    TwoServerVerifiable {
        modulus: String,
        k1: String,
        k2: String,
        s1: String,
        s2: String,
    },
    #[serde(rename = "DS")]
    MultiServer { modulus: String, k: String, servers: usize },
    #[serde(rename = "DV")]
    MultiServerVerifiable {
        modulus: String,
        mask: String,
        mac: String,
        points: Vec<String>,
    },
}

/// A loaded key with its parameters.
#[derive(Clone, Debug)]
pub enum Keys {
    TwoServer(SecretKey2S),
    TwoServerVerifiable(SecretKey2V),
    MultiServer { key: PrfKey, servers: usize },
    MultiServerVerifiable(DsVerifiableKey),
}

impl Keys {
    pub fn scheme(&self) -> Scheme {
        match self {
            Keys::TwoServer(_) => Scheme::TwoServer,
            Keys::TwoServerVerifiable(_) => Scheme::TwoServerVerifiable,
            Keys::MultiServer { .. } => Scheme::MultiServer,
            Keys::MultiServerVerifiable(_) => Scheme::MultiServerVerifiable,
        }
    }

    pub fn servers(&self) -> usize {
        match self {
            Keys::TwoServer(_) | Keys::TwoServerVerifiable(_) => 2,
            Keys::MultiServer { servers, .. } => *servers,
            Keys::MultiServerVerifiable(k) => k.d(),
        }
    }

    /// Fresh keys from the operating system's generator.
    pub fn generate(params: &SchemeParams, scheme: Scheme, servers: usize) -> Result<Keys> {
        let mut rng = OsRng;
        if matches!(scheme, Scheme::MultiServer | Scheme::MultiServerVerifiable) && !(2..=MAX_SERVERS).contains(&servers) {
            return Err(CliError::Usage(format!("--servers must be in 2..={MAX_SERVERS}")));
        }
        Ok(match scheme {
            Scheme::TwoServer => Keys::TwoServer(labelmask_core::scheme2s::keygen_with(&mut rng)),
            Scheme::TwoServerVerifiable => {
                Keys::TwoServerVerifiable(labelmask_core::scheme2v::vkeygen_with(params, &mut rng))
            }
            Scheme::MultiServer => Keys::MultiServer {
                key: PrfKey::generate_with(&mut rng),
                servers,
            },
            Scheme::MultiServerVerifiable => {
                Keys::MultiServerVerifiable(DsVerifiableKey::generate_with(params, servers, &mut rng)?)
            }
        })
    }

    pub fn to_file(&self, params: &SchemeParams) -> KeyFile {
        let f = params.field();
        let modulus = format!("{:#x}", params.modulus());
        match self {
            Keys::TwoServer(sk) => KeyFile::TwoServer {
                modulus,
                k: sk.key().to_hex(),
            },
            Keys::TwoServerVerifiable(sk) => KeyFile::TwoServerVerifiable {
                modulus,
                k1: sk.mask_key().to_hex(),
                k2: sk.mac_key().to_hex(),
                s1: f.to_hex(sk.s1()),
                s2: f.to_hex(sk.s2()),
            },
            Keys::MultiServer { key, servers } => KeyFile::MultiServer {
                modulus,
                k: key.to_hex(),
                servers: *servers,
            },
            Keys::MultiServerVerifiable(k) => KeyFile::MultiServerVerifiable {
                modulus,
                mask: k.mask_key().to_hex(),
                mac: k.mac_key().to_hex(),
                points: k.points().iter().map(|&s| f.to_hex(s)).collect(),
            },
        }
    }
}

pub fn parse_modulus(s: &str) -> Result<u128> {
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u128::from_str_radix(h, 16),
        None => s.parse(),
    };
    r.map_err(|e| CliError::Data(format!("bad modulus {s:?}: {e}")))
}

impl KeyFile {
    fn modulus(&self) -> &str {
        match self {
            KeyFile::TwoServer { modulus, .. }
            | KeyFile::TwoServerVerifiable { modulus, .. }
            | KeyFile::MultiServer { modulus, .. }
            | KeyFile::MultiServerVerifiable { modulus, .. } => modulus,
        }
    }

    pub fn load(&self) -> Result<(Keys, SchemeParams)> {
        let params = SchemeParams::new(parse_modulus(self.modulus())?)?;
        let f = params.field();
        let keys = match self {
            KeyFile::TwoServer { k, .. } => Keys::TwoServer(SecretKey2S::from_key(PrfKey::from_hex(k)?)),
            KeyFile::TwoServerVerifiable { k1, k2, s1, s2, .. } => Keys::TwoServerVerifiable(SecretKey2V::new(
                &params,
                PrfKey::from_hex(k1)?,
                PrfKey::from_hex(k2)?,
                f.from_hex(s1)?,
                f.from_hex(s2)?,
            )?),
            KeyFile::MultiServer { k, servers, .. } => {
                if !(2..=MAX_SERVERS).contains(servers) {
                    return Err(CliError::Data(format!("key file names {servers} servers")));
                }
                Keys::MultiServer {
                    key: PrfKey::from_hex(k)?,
                    servers: *servers,
                }
            }
            KeyFile::MultiServerVerifiable { mask, mac, points, .. } => {
                let points = points.iter().map(|p| f.from_hex(p)).collect::<labelmask_core::Result<Vec<_>>>()?;
                Keys::MultiServerVerifiable(DsVerifiableKey::new(
                    &params,
                    PrfKey::from_hex(mask)?,
                    PrfKey::from_hex(mac)?,
                    points,
                )?)
            }
        };
        Ok((keys, params))
    }

    pub fn read(path: &Path) -> Result<(Keys, SchemeParams)> {
        let text = fs::read_to_string(path).map_err(CliError::file(path))?;
        let file: KeyFile =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        file.load()
    }

    /// Writes with mode 0600 on Unix; refuses to overwrite.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut opts = fs::OpenOptions::new();
        opts.write(true).create_new(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut file = opts.open(path).map_err(CliError::file(path))?;
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Data(e.to_string()))?;
        file.write_all(text.as_bytes()).map_err(CliError::file(path))?;
        file.write_all(b"\n").map_err(CliError::file(path))?;
        file.sync_all().map_err(CliError::file(path))?;
        Ok(())
    }
}
