//! Delegation of computation on label-masked data to non-colluding servers.
//!
//! A storage-light client masks each data item with PRF outputs derived from
//! its label, hands one share to each server, and later asks the servers to
//! evaluate a program. Each server's answer alone is uniformly distributed;
//! the client combines the answers with a correction it recomputes from the
//! PRF.
//!
//! * [`scheme2s`]: two servers, quadratic programs.
//! * [`scheme2v`]: the same with homomorphic MAC tags so the client can
//!   detect a cheating server.
//! * [`schemeds`]: d servers, degree-d monomials, plain and verifiable.

pub mod error;
pub mod exec;
pub mod field;
pub mod game;
pub mod poly;
pub mod prf;
pub mod program;
pub mod scheme2s;
pub mod scheme2v;
pub mod schemeds;

pub use error::{Error, Result};
pub use exec::Execution;
pub use field::{Fe, PrimeField, SchemeParams};
pub use poly::TagPolynomial;
pub use prf::{Label, PrfKey};
pub use program::{LinTerm, MonomialProgram, QuadTerm, QuadraticForm, QuadraticProgram};
