use crate::morph::{morph, MorphParams};
use crate::raster::Image;
use crate::synthface::Capture;

use super::crypto::{CryptoProvider, KeyPair, Nonce, PublicKey, SymKey, TemporaryId};
use super::messages::{
    hybrid_decrypt, EnrollRequest, EnrollResponse, Pseudonym, RandomFace, RespPayload, M1, M2,
    M3, M4,
};
use super::{ProtocolError, TraceEvent};

/// The client's current triple.
#[derive(Clone, Debug)]
pub struct Credentials {
    pub tid: TemporaryId,
    pub rf: RandomFace,
    pub sk: SymKey,
}

#[derive(Debug)]
enum Phase {
    Idle,
    Enrolling {
        pn: Pseudonym,
        rf: RandomFace,
    },
    AwaitM2 {
        pn: Pseudonym,
        n_c: Nonce,
    },
    AwaitM4 {
        pn: Pseudonym,
        rf_new: RandomFace,
        sk_new: SymKey,
    },
}

impl Phase {
    fn name(&self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Enrolling { .. } => "enrolling",
            Phase::AwaitM2 { .. } => "await-m2",
            Phase::AwaitM4 { .. } => "await-m4",
        }
    }
}

/// Result of processing M4.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Finalized {
    /// The server accepted; the client rotated to the new triple.
    Committed,
    /// The server rejected (or M4 did not decrypt); old credentials kept.
    Rejected,
}

/// Client device: key pair, current credentials, pseudonym pool and the
/// single-session state machine.
pub struct Client {
    id: String,
    keys: KeyPair,
    crypto: Box<dyn CryptoProvider>,
    alpha: MorphParams,
    creds: Option<Credentials>,
    pool: Vec<Pseudonym>,
    phase: Phase,
    log: Vec<TraceEvent>,
    committed: Vec<[u8; 32]>,
    desync_suspected: bool,
}

const PARTY: &str = "client";

impl Client {
    pub fn new(id: impl Into<String>, mut crypto: Box<dyn CryptoProvider>) -> Self {
        let keys = crypto.generate_keypair();
        Self {
            id: id.into(),
            keys,
            crypto,
            alpha: MorphParams::HALF,
            creds: None,
            pool: Vec::new(),
            phase: Phase::Idle,
            log: Vec::new(),
            committed: Vec::new(),
            desync_suspected: false,
        }
    }

    /// Morph weight of the random face (one half unless set).
    pub fn with_alpha(mut self, alpha: MorphParams) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public
    }

    pub fn add_pseudonyms(&mut self, set: impl IntoIterator<Item = Pseudonym>) {
        self.pool.extend(set);
    }

    /// Drops pooled pseudonyms that are expired at `now`.
    pub fn discard_expired(&mut self, now: u64) -> usize {
        let before = self.pool.len();
        self.pool.retain(|p| p.lifetime > now);
        before - self.pool.len()
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    pub fn credentials(&self) -> Option<&Credentials> {
        self.creds.as_ref()
    }

    pub fn phase(&self) -> &'static str {
        self.phase.name()
    }

    pub fn log(&self) -> &[TraceEvent] {
        &self.log
    }

    /// Digests of every random face that became current, in order.
    pub fn committed_rf_digests(&self) -> &[[u8; 32]] {
        &self.committed
    }

    /// Set when a session was abandoned after M3 was sent: the server may
    /// have rotated without the client learning of it.
    pub fn desync_suspected(&self) -> bool {
        self.desync_suspected
    }

    fn event(&mut self, step: &'static str, check: &'static str, ok: bool, detail: impl Into<String>) {
        self.log.push(TraceEvent::new(PARTY, step, check, ok).with(detail));
    }

    fn take_pseudonym(&mut self) -> Result<Pseudonym, ProtocolError> {
        if self.pool.is_empty() {
            return Err(ProtocolError::PoolEmpty);
        }
        let mut b = [0u8; 8];
        self.crypto.fill_random(&mut b);
        let i = (u64::from_be_bytes(b) % self.pool.len() as u64) as usize;
        Ok(self.pool.swap_remove(i))
    }

    fn open_pseudonym(&self, pn: &Pseudonym) -> Result<RandomFace, ProtocolError> {
        let plain = hybrid_decrypt(self.crypto.as_ref(), &self.keys.secret, &pn.enc_rf)?;
        RandomFace::decode(&plain)
    }

    fn morph_with(&self, face: &Capture, rf: &RandomFace) -> Result<Image, ProtocolError> {
        Ok(morph(&face.image, &face.landmarks, &rf.image, &rf.landmarks, self.alpha)?)
    }

    fn expect_idle(&self, expected: &'static str) -> Result<(), ProtocolError> {
        match self.phase {
            Phase::Idle => Ok(()),
            _ => Err(ProtocolError::OutOfPhase {
                expected,
                actual: self.phase.name(),
            }),
        }
    }

    /// Enrollment request: morph of `face` with a pooled pseudonym's random face.
    pub fn enroll_request(&mut self, face: &Capture) -> Result<EnrollRequest, ProtocolError> {
        self.expect_idle("idle")?;
        let pn = self.take_pseudonym()?;
        let prepared = self
            .open_pseudonym(&pn)
            .and_then(|rf| self.morph_with(face, &rf).map(|mf| (rf, mf)));
        match prepared {
            Ok((rf, mf)) => {
                let req = EnrollRequest {
                    id_c: self.id.clone(),
                    mf,
                    pn: pn.clone(),
                };
                self.phase = Phase::Enrolling { pn, rf };
                self.event("enroll-1", "request", true, "");
                Ok(req)
            }
            Err(e) => {
                self.pool.push(pn);
                self.event("enroll-1", "request", false, e.to_string());
                Err(e)
            }
        }
    }

    /// Stores the first triple and drops the enrollment pseudonym.
    pub fn enroll_finish(&mut self, resp: &EnrollResponse) -> Result<(), ProtocolError> {
        match std::mem::replace(&mut self.phase, Phase::Idle) {
            Phase::Enrolling { pn, rf } => {
                self.committed.push(rf.digest());
                self.creds = Some(Credentials {
                    tid: pn.tid,
                    rf,
                    sk: resp.sk,
                });
                self.event("enroll-3", "store-credentials", true, "");
                Ok(())
            }
            other => {
                let actual = other.name();
                self.phase = other;
                Err(ProtocolError::OutOfPhase {
                    expected: "enrolling",
                    actual,
                })
            }
        }
    }

    /// Opens a session: picks a pseudonym, draws `n_c`, announces the current tid.
    pub fn session_m1(&mut self) -> Result<M1, ProtocolError> {
        self.expect_idle("idle")?;
        let tid_prev = self.creds.as_ref().ok_or(ProtocolError::NotEnrolled)?.tid;
        let pn = self.take_pseudonym()?;
        let n_c = self.crypto.random_nonce();
        let m1 = M1 {
            id_c: self.id.clone(),
            n_c,
            pn: pn.clone(),
            tid_prev,
        };
        self.phase = Phase::AwaitM2 { pn, n_c };
        self.event("M1", "send", true, "");
        Ok(m1)
    }

    /// Answers M2 for an honest presentation of `face`.
    pub fn session_m3(&mut self, m2: &M2, face: &Capture) -> Result<M3, ProtocolError> {
        self.respond(m2, face, None)
    }

    /// Answers M2 with the probe morph replaced by `probe`, as by an attacker who
    /// controls the device's biometric pipeline. Keys and the next reference
    /// are computed honestly.
    pub fn session_m3_injected(
        &mut self,
        m2: &M2,
        face: &Capture,
        probe: &Image,
    ) -> Result<M3, ProtocolError> {
        self.respond(m2, face, Some(probe))
    }

    fn respond(&mut self, m2: &M2, face: &Capture, probe: Option<&Image>) -> Result<M3, ProtocolError> {
        let Phase::AwaitM2 { .. } = self.phase else {
            return Err(ProtocolError::OutOfPhase {
                expected: "await-m2",
                actual: self.phase.name(),
            });
        };
        let Phase::AwaitM2 { pn, n_c } = std::mem::replace(&mut self.phase, Phase::Idle) else {
            unreachable!("phase checked above");
        };
        let creds = self.creds.clone().ok_or(ProtocolError::NotEnrolled)?;
        // The server proves it holds the current key.
        let proved = self
            .crypto
            .sym_decrypt(&creds.sk, &m2.resp_s)
            .map(|t| t == creds.tid.as_bytes())
            .unwrap_or(false);
        if !proved {
            self.event("M2", "resp_s", false, "decryption under the current key did not yield the current tid");
            self.pool.push(pn);
            return Err(ProtocolError::ServerAuthFailed);
        }
        self.event("M2", "resp_s", true, "");
        let built = self.build_response(&creds, &pn, face, probe, &n_c, m2);
        match built {
            Ok((m3, rf_new, sk_new)) => {
                self.phase = Phase::AwaitM4 { pn, rf_new, sk_new };
                self.event("M3", "send", true, if probe.is_some() { "injected probe" } else { "" });
                Ok(m3)
            }
            Err(e) => {
                self.pool.push(pn);
                self.event("M3", "build", false, e.to_string());
                Err(e)
            }
        }
    }

    fn build_response(
        &mut self,
        creds: &Credentials,
        pn: &Pseudonym,
        face: &Capture,
        probe: Option<&Image>,
        n_c: &Nonce,
        m2: &M2,
    ) -> Result<(M3, RandomFace, SymKey), ProtocolError> {
        let mf_current = match probe {
            Some(img) => img.clone(),
            None => self.morph_with(face, &creds.rf)?,
        };
        let rf_new = self.open_pseudonym(pn)?;
        let mf_next = self.morph_with(face, &rf_new)?;
        let sk_new = self
            .crypto
            .kdf(&[pn.tid.as_bytes(), n_c.as_bytes(), m2.n_s.as_bytes()]);
        let payload = RespPayload {
            mf_current,
            mf_next,
            sk_new,
        };
        let resp_c = self.crypto.sym_encrypt(&creds.sk, &payload.encode());
        Ok((M3 { resp_c }, rf_new, sk_new))
    }

    /// Handles M4: commit on the new tid, otherwise keep the old triple.
    pub fn session_finalize(&mut self, m4: &M4) -> Result<Finalized, ProtocolError> {
        let Phase::AwaitM4 { .. } = self.phase else {
            return Err(ProtocolError::OutOfPhase {
                expected: "await-m4",
                actual: self.phase.name(),
            });
        };
        let Phase::AwaitM4 { pn, rf_new, sk_new } = std::mem::replace(&mut self.phase, Phase::Idle)
        else {
            unreachable!("phase checked above");
        };
        let plain = self.crypto.sym_decrypt(&sk_new, &m4.resp_s).ok();
        if plain.as_deref() == Some(pn.tid.as_bytes().as_slice()) {
            self.committed.push(rf_new.digest());
            self.creds = Some(Credentials {
                tid: pn.tid,
                rf: rf_new,
                sk: sk_new,
            });
            self.desync_suspected = false;
            self.event("M4", "commit", true, "rotated to the new triple");
            return Ok(Finalized::Committed);
        }
        let detail = match plain {
            Some(t) if self.creds.as_ref().is_some_and(|c| t == c.tid.as_bytes()) => "server rejected the probe",
            Some(_) => "M4 names neither tid",
            None => "M4 did not decrypt under the next key",
        };
        self.event("M4", "commit", false, detail);
        self.pool.push(pn);
        Ok(Finalized::Rejected)
    }

    /// The server answered with a refusal; the in-flight pseudonym returns to
    /// the pool.
    pub fn on_refusal(&mut self) {
        let phase = std::mem::replace(&mut self.phase, Phase::Idle);
        let step = match &phase {
            Phase::AwaitM2 { .. } => "M2",
            Phase::AwaitM4 { .. } => "M4",
            Phase::Enrolling { .. } => "enroll-2",
            Phase::Idle => "idle",
        };
        if step == "M2" && self.desync_suspected {
            self.event("M2", "desync", false, "desync-confirmed: server no longer knows the current tid");
        }
        self.event(step, "refusal", false, "server refused");
        self.return_in_flight(phase);
    }

    /// Gives up on the current exchange (timeout, lost message). Returns
    /// whether a desynchronization is now suspected.
    pub fn abort(&mut self) -> bool {
        let phase = std::mem::replace(&mut self.phase, Phase::Idle);
        if let Phase::AwaitM4 { .. } = phase {
            self.desync_suspected = true;
            self.event("M4", "desync", false, "desync-suspected: M3 sent but no verdict received");
        } else if !matches!(phase, Phase::Idle) {
            self.event(phase.name(), "abort", false, "");
        }
        self.return_in_flight(phase);
        self.desync_suspected
    }

    fn return_in_flight(&mut self, phase: Phase) {
        match phase {
            Phase::Idle => {}
            Phase::Enrolling { pn, .. } | Phase::AwaitM2 { pn, .. } | Phase::AwaitM4 { pn, .. } => {
                self.pool.push(pn)
            }
        }
    }
}
