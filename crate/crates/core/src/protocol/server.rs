use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::Serialize;

use crate::matcher::{distance, Embedder, Embedding, MatchDecision};
use crate::raster::Image;

use super::crypto::{sha256, CryptoProvider, Nonce, PublicKey, SymKey, TemporaryId};
use super::messages::{
    EnrollRequest, EnrollResponse, Pseudonym, Refusal, RefusalReason, RespPayload, M1, M2, M3, M4,
};
use super::ttp::check_pseudonym;
use super::{ProtocolError, TraceEvent};

/// Live reference for one enrolled client.
#[derive(Clone, Debug)]
pub struct ServerRecord {
    pub tid: TemporaryId,
    pub reference: Embedding,
    pub sk: SymKey,
    /// Number of rotations since enrollment.
    pub epoch: u64,
    /// Simulator bookkeeping handle, stable across rotations.
    pub account: u64,
}

/// One reference the server has held.
#[derive(Clone, Debug, Serialize)]
pub struct HistoryEntry {
    pub account: u64,
    pub epoch: u64,
    pub tid: String,
    /// SHA-256 of the encrypted random-face payload of the pseudonym whose
    /// tid this reference is stored under.
    pub rf_payload: String,
    pub reference: String,
}

/// Outcome of the matching step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub decision: MatchDecision,
    /// Epoch of the account after this session.
    pub epoch: u64,
}

struct State {
    crypto: Box<dyn CryptoProvider>,
    records: HashMap<TemporaryId, ServerRecord>,
    accounts: HashMap<u64, TemporaryId>,
    seen: HashSet<TemporaryId>,
    busy: HashSet<TemporaryId>,
    history: Vec<HistoryEntry>,
    log: Vec<TraceEvent>,
    next_account: u64,
}

struct Inner {
    id: String,
    ttp_pub: PublicKey,
    embedder: Arc<dyn Embedder>,
    state: Mutex<State>,
}

/// Verification server. Cloning shares the same store.
#[derive(Clone)]
pub struct Server {
    inner: Arc<Inner>,
}

const PARTY: &str = "server";

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

impl State {
    fn event(&mut self, step: &'static str, check: &'static str, ok: bool, detail: impl Into<String>) {
        self.log.push(TraceEvent::new(PARTY, step, check, ok).with(detail));
    }

    fn refuse(&mut self, step: &'static str, reason: RefusalReason) -> Refusal {
        self.event(step, "refusal", false, reason.as_str());
        Refusal { reason }
    }

    fn check_pseudonym(
        &mut self,
        step: &'static str,
        pn: &Pseudonym,
        ttp_pub: &PublicKey,
        now: u64,
    ) -> Result<(), Refusal> {
        if let Err(reason) = check_pseudonym(self.crypto.as_ref(), pn, ttp_pub, now) {
            let check = if reason == RefusalReason::Expired { "lifetime" } else { "signature" };
            self.event(step, check, false, "");
            return Err(self.refuse(step, reason));
        }
        self.event(step, "lifetime", true, "");
        self.event(step, "signature", true, "");
        if self.seen.contains(&pn.tid) || self.records.contains_key(&pn.tid) {
            return Err(self.refuse(step, RefusalReason::ReusedTid));
        }
        Ok(())
    }

    fn store(&mut self, record: ServerRecord, pn: &Pseudonym) {
        self.history.push(HistoryEntry {
            account: record.account,
            epoch: record.epoch,
            tid: record.tid.to_hex(),
            rf_payload: hex(&pn.payload_digest()),
            reference: hex(&sha256(&record.reference.to_bytes())),
        });
        self.seen.insert(record.tid);
        self.accounts.insert(record.account, record.tid);
        self.records.insert(record.tid, record);
    }
}

impl Server {
    pub fn new(
        id: impl Into<String>,
        ttp_pub: PublicKey,
        crypto: Box<dyn CryptoProvider>,
        embedder: Arc<dyn Embedder>,
    ) -> Self {
        Self {
            inner: Arc::new(Inner {
                id: id.into(),
                ttp_pub,
                embedder,
                state: Mutex::new(State {
                    crypto,
                    records: HashMap::new(),
                    accounts: HashMap::new(),
                    seen: HashSet::new(),
                    busy: HashSet::new(),
                    history: Vec::new(),
                    log: Vec::new(),
                    next_account: 0,
                }),
            }),
        }
    }

    fn state(&self) -> MutexGuard<'_, State> {
        self.inner.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn id(&self) -> &str {
        &self.inner.id
    }

    /// Enrollment: checks the pseudonym, embeds the morph and stores a fresh
    /// key. Returns the response and the new account handle.
    pub fn enroll(&self, req: &EnrollRequest, now: u64) -> Result<(EnrollResponse, u64), Refusal> {
        self.state()
            .check_pseudonym("enroll-2", &req.pn, &self.inner.ttp_pub, now)?;
        let reference = match self.inner.embedder.embed(&req.mf) {
            Ok(e) => e,
            Err(e) => {
                let mut st = self.state();
                st.event("enroll-2", "embed", false, e.to_string());
                return Err(st.refuse("enroll-2", RefusalReason::Malformed));
            }
        };
        let mut st = self.state();
        // Re-check under the lock that stores.
        if st.seen.contains(&req.pn.tid) {
            return Err(st.refuse("enroll-2", RefusalReason::ReusedTid));
        }
        let sk = st.crypto.random_key();
        let n_s = st.crypto.random_nonce();
        let account = st.next_account;
        st.next_account += 1;
        st.store(
            ServerRecord {
                tid: req.pn.tid,
                reference,
                sk,
                epoch: 0,
                account,
            },
            &req.pn,
        );
        st.event("enroll-2", "store", true, format!("account {account}"));
        Ok((
            EnrollResponse {
                id_s: self.inner.id.clone(),
                n_s,
                sk,
            },
            account,
        ))
    }

    /// Answers M1. On success the returned session pins the client's current
    /// tid until it is dropped; a second M1 for that tid is refused meanwhile.
    pub fn session_m2(&self, m1: &M1, now: u64) -> Result<(ServerSession, M2), Refusal> {
        let mut st = self.state();
        st.event("M1", "receive", true, "");
        st.check_pseudonym("M2", &m1.pn, &self.inner.ttp_pub, now)?;
        let Some(record) = st.records.get(&m1.tid_prev).cloned() else {
            st.event("M2", "tid_prev", false, "unknown");
            return Err(st.refuse("M2", RefusalReason::UnknownTid));
        };
        if !st.busy.insert(m1.tid_prev) {
            return Err(st.refuse("M2", RefusalReason::Busy));
        }
        st.event("M2", "tid_prev", true, "");
        let n_s = st.crypto.random_nonce();
        let resp_s = st.crypto.sym_encrypt(&record.sk, m1.tid_prev.as_bytes());
        st.event("M2", "send", true, "");
        let session = ServerSession {
            server: self.clone(),
            tid_prev: m1.tid_prev,
            sk_prev: record.sk,
            n_c: m1.n_c,
            n_s,
            pn: m1.pn.clone(),
            done: false,
        };
        Ok((
            session,
            M2 {
                id_s: self.inner.id.clone(),
                n_s,
                resp_s,
            },
        ))
    }

    pub fn record(&self, tid: &TemporaryId) -> Option<ServerRecord> {
        self.state().records.get(tid).cloned()
    }

    pub fn resolves(&self, tid: &TemporaryId) -> bool {
        self.state().records.contains_key(tid)
    }

    pub fn account_record(&self, account: u64) -> Option<ServerRecord> {
        let st = self.state();
        let tid = st.accounts.get(&account)?;
        st.records.get(tid).cloned()
    }

    pub fn record_count(&self) -> usize {
        self.state().records.len()
    }

    /// Dissimilarity of an arbitrary probe against an account's live
    /// reference: the score an observer of the matcher output would see.
    pub fn leak_score(&self, account: u64, probe: &Image) -> Result<(f64, u64), ProtocolError> {
        let record = self.account_record(account).ok_or(ProtocolError::NotEnrolled)?;
        let e = self.inner.embedder.embed(probe)?;
        Ok((distance(&e, &record.reference)?, record.epoch))
    }

    pub fn history(&self) -> Vec<HistoryEntry> {
        self.state().history.clone()
    }

    pub fn log_len(&self) -> usize {
        self.state().log.len()
    }

    pub fn log_since(&self, start: usize) -> Vec<TraceEvent> {
        let st = self.state();
        st.log.get(start..).map(<[_]>::to_vec).unwrap_or_default()
    }
}

/// Server half of one verification session.
pub struct ServerSession {
    server: Server,
    tid_prev: TemporaryId,
    sk_prev: SymKey,
    n_c: Nonce,
    n_s: Nonce,
    pn: Pseudonym,
    done: bool,
}

impl std::fmt::Debug for ServerSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServerSession")
            .field("tid_prev", &self.tid_prev)
            .field("done", &self.done)
            .finish()
    }
}

impl ServerSession {
    /// Answers M3: authenticate `resp_c`, check the derived key, match the probe
    /// and rotate on accept. Only the first M3 is processed.
    pub fn m4(&mut self, m3: &M3, threshold: f64) -> Result<(M4, Verdict), Refusal> {
        let inner = &self.server.inner;
        let payload = {
            let mut st = self.server.state();
            if self.done {
                st.event("M3", "phase", false, "session already answered");
                return Err(st.refuse("M4", RefusalReason::Malformed));
            }
            self.done = true;
            st.event("M3", "receive", true, "");
            let plain = match st.crypto.sym_decrypt(&self.sk_prev, &m3.resp_c) {
                Ok(p) => p,
                Err(_) => {
                    st.event("M3", "resp_c", false, "authenticated decryption failed");
                    return Err(st.refuse("M4", RefusalReason::DecryptFailed));
                }
            };
            st.event("M3", "resp_c", true, "");
            let payload = match RespPayload::decode(&plain) {
                Ok(p) => p,
                Err(e) => {
                    st.event("M3", "payload", false, e.to_string());
                    return Err(st.refuse("M4", RefusalReason::Malformed));
                }
            };
            let expected = st.crypto.kdf(&[
                self.pn.tid.as_bytes(),
                self.n_c.as_bytes(),
                self.n_s.as_bytes(),
            ]);
            if expected != payload.sk_new {
                st.event("M3", "sk_new", false, "derived key differs");
                return Err(st.refuse("M4", RefusalReason::KeyMismatch));
            }
            st.event("M3", "sk_new", true, "");
            payload
        };

        let embedded = inner
            .embedder
            .embed(&payload.mf_current)
            .and_then(|p| inner.embedder.embed(&payload.mf_next).map(|n| (p, n)));
        let mut st = self.server.state();
        let (probe, next) = match embedded {
            Ok(v) => v,
            Err(e) => {
                st.event("M4", "embed", false, e.to_string());
                return Err(st.refuse("M4", RefusalReason::Malformed));
            }
        };
        let Some(record) = st.records.get(&self.tid_prev).cloned() else {
            return Err(st.refuse("M4", RefusalReason::UnknownTid));
        };
        let decision = match distance(&probe, &record.reference) {
            Ok(score) => MatchDecision::from_score(score, threshold),
            Err(e) => {
                st.event("M4", "match", false, e.to_string());
                return Err(st.refuse("M4", RefusalReason::Malformed));
            }
        };
        st.event("M4", "match", decision.accepted, format!("score {:.6}", decision.score));
        if !decision.accepted {
            let resp_s = st.crypto.sym_encrypt(&payload.sk_new, self.tid_prev.as_bytes());
            st.event("M4", "send", true, "reject");
            return Ok((
                M4 { resp_s },
                Verdict {
                    decision,
                    epoch: record.epoch,
                },
            ));
        }
        if st.seen.contains(&self.pn.tid) {
            return Err(st.refuse("M4", RefusalReason::ReusedTid));
        }
        st.records.remove(&self.tid_prev);
        let epoch = record.epoch + 1;
        st.store(
            ServerRecord {
                tid: self.pn.tid,
                reference: next,
                sk: payload.sk_new,
                epoch,
                account: record.account,
            },
            &self.pn,
        );
        st.event("M4", "rotate", true, format!("epoch {epoch}"));
        let resp_s = st.crypto.sym_encrypt(&payload.sk_new, self.pn.tid.as_bytes());
        st.event("M4", "send", true, "accept");
        Ok((M4 { resp_s }, Verdict { decision, epoch }))
    }
}

impl Drop for ServerSession {
    fn drop(&mut self) {
        self.server.state().busy.remove(&self.tid_prev);
    }
}
