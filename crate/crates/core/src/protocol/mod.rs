//! The three-party rotation protocol.
//!
//! A trusted third party ([`Ttp`]) issues pseudonyms: signed temporary
//! identities that each carry a freshly drawn random face encrypted to the
//! client. At enrollment the client morphs its face with one random face and
//! the [`Server`] stores the embedding of that morph. Every verification is a
//! four-message session:
//!
//! 1. `M1`: client nonce, an unused pseudonym and the current temporary id.
//! 2. `M2`: server nonce and the current tid encrypted under the current key,
//!    which the client checks to authenticate the server.
//! 3. `M3`: under the current key, the morph with the current random face
//!    (the probe), the morph with the pseudonym's random face (the next
//!    reference) and the next key `kdf(tid_new, n_c, n_s)`.
//! 4. `M4`: under the next key, the new tid if the probe matched (and the
//!    server rotated to the next reference) or the old tid if it did not.
//!
//! Each random face protects exactly one reference epoch. [`session`] drives
//! the two parties through a session with optional message faults and
//! records a JSON-lines trace.

mod client;
pub mod crypto;
mod messages;
mod server;
pub mod session;
mod ttp;
pub mod wire;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;
use thiserror::Error;

pub use client::{Client, Credentials, Finalized};
pub use crypto::{
    CryptoError, CryptoProvider, KeyPair, Nonce, PublicKey, SecretKey, SimCrypto, StdCrypto,
    SymKey, TemporaryId,
};
pub use messages::{
    hybrid_decrypt, hybrid_encrypt, EnrollRequest, EnrollResponse, Pseudonym, RandomFace,
    Refusal, RefusalReason, RespPayload, M1, M2, M3, M4,
};
pub use session::{run_session, Fault, FaultPlan, Outcome, Presentation, SessionReport, WireRecord};
pub use server::{HistoryEntry, Server, ServerRecord, ServerSession, Verdict};
pub use ttp::{
    check_pseudonym, mask_lower_face, verify_pseudonym, DirectoryFaces, FaceDomain,
    RandomFaceSource, SyntheticFaces, Ttp,
};

use crate::matcher::MatchError;
use crate::morph::MorphError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed {what}: {detail}")]
    Wire { what: &'static str, detail: String },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("pseudonym pool is empty")]
    PoolEmpty,
    #[error("client is not enrolled")]
    NotEnrolled,
    #[error("message arrived out of phase: expected {expected}, client is {actual}")]
    OutOfPhase {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("server failed to prove knowledge of the current key")]
    ServerAuthFailed,
    #[error("server refused the request")]
    Refused,
    #[error("random-face source: {0}")]
    FaceSource(String),
}

/// Time source in absolute seconds, injected wherever lifetimes are checked.
pub trait Clock {
    fn now(&self) -> u64;
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(t: u64) -> Self {
        Self(AtomicU64::new(t))
    }

    pub fn set(&self, t: u64) {
        self.0.store(t, Ordering::SeqCst);
    }

    pub fn advance(&self, dt: u64) {
        self.0.fetch_add(dt, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// One logged protocol step or check, as rendered in traces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEvent {
    pub party: &'static str,
    pub step: &'static str,
    pub check: &'static str,
    pub ok: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl TraceEvent {
    pub(crate) fn new(party: &'static str, step: &'static str, check: &'static str, ok: bool) -> Self {
        Self {
            party,
            step,
            check,
            ok,
            detail: String::new(),
        }
    }

    pub(crate) fn with(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}
