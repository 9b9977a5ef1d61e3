//! Drives one verification session between a [`Client`] and a [`Server`],
//! optionally dropping, duplicating or replaying individual messages, and
//! renders what happened as a JSON-lines trace record.
//!
//! Every message crosses the simulated network as its wire encoding, so the
//! codec is exercised on every run.

use serde::{Deserialize, Serialize};

use crate::raster::Image;
use crate::synthface::Capture;

use super::crypto::sha256;
use super::{Client, Finalized, ProtocolError, Server, TraceEvent, M1, M2, M3, M4};

/// Network misbehavior applied to one message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fault {
    /// The message never arrives; the waiting party times out.
    Drop,
    /// The message arrives twice in a row.
    Duplicate,
    /// The message arrives once on time and again after the session ended.
    Replay,
}

/// Faults for M1..M4.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan(pub [Option<Fault>; 4]);

impl FaultPlan {
    pub fn none() -> Self {
        Self::default()
    }

    /// A single fault on message `m` (1-based).
    pub fn at(m: usize, fault: Fault) -> Self {
        let mut p = Self::default();
        p.0[m - 1] = Some(fault);
        p
    }

    fn get(&self, m: usize) -> Option<Fault> {
        self.0[m - 1]
    }
}

/// What the client presents when answering M2.
#[derive(Clone, Copy, Debug)]
pub enum Presentation<'a> {
    Genuine(&'a Capture),
    /// `probe` replaces the probe morph; `face` still feeds the next reference.
    Injected { face: &'a Capture, probe: &'a Image },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Accepted,
    Rejected,
    Refused,
    ServerAuthFailed,
    Aborted,
    ClientError(String),
}

/// One transmitted message.
#[derive(Clone, Debug, Serialize)]
pub struct WireRecord {
    pub msg: &'static str,
    pub bytes: usize,
    pub sha256: String,
    pub delivered: bool,
}

/// Everything observable about one session.
#[derive(Clone, Debug, Serialize)]
pub struct SessionReport {
    pub session: u64,
    pub faults: FaultPlan,
    pub outcome: Outcome,
    pub score: Option<f64>,
    pub epoch: Option<u64>,
    /// The server no longer resolves the tid the client started with.
    pub server_rotated: bool,
    /// The client left the session holding a different tid.
    pub client_committed: bool,
    /// The two sides disagree on the current tid.
    pub desync: bool,
    /// The client flagged a possible desynchronization.
    pub desync_logged: bool,
    /// A replayed message led to an acceptance.
    pub replay_accepted: bool,
    pub wire: Vec<WireRecord>,
    pub client_events: Vec<TraceEvent>,
    pub server_events: Vec<TraceEvent>,
}

impl SessionReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn record(wire: &mut Vec<WireRecord>, msg: &'static str, bytes: &[u8], delivered: bool) {
    let digest = sha256(bytes);
    wire.push(WireRecord {
        msg,
        bytes: bytes.len(),
        sha256: digest[..8].iter().map(|b| format!("{b:02x}")).collect(),
        delivered,
    });
}

/// Runs a session at time `now` with match threshold `threshold`.
///
/// Fails only when the client cannot start (not enrolled, empty pool);
/// everything after M1 is reported through [`SessionReport::outcome`].
pub fn run_session(
    session: u64,
    client: &mut Client,
    server: &Server,
    presentation: Presentation<'_>,
    threshold: f64,
    now: u64,
    plan: FaultPlan,
) -> Result<SessionReport, ProtocolError> {
    let c0 = client.log().len();
    let s0 = server.log_len();
    let tid_before = client.credentials().ok_or(ProtocolError::NotEnrolled)?.tid;
    let m1 = client.session_m1()?;

    let mut wire = Vec::new();
    let mut score = None;
    let mut epoch = None;
    let mut replay_accepted = false;
    let mut sent: [Option<Vec<u8>>; 4] = Default::default();

    let outcome = 'run: {
        let m1_bytes = m1.encode();
        let lost = plan.get(1) == Some(Fault::Drop);
        record(&mut wire, "M1", &m1_bytes, !lost);
        sent[0] = Some(m1_bytes.clone());
        if lost {
            client.abort();
            break 'run Outcome::Aborted;
        }
        let m1r = M1::decode(&m1_bytes)?;
        let (mut srv, m2) = match server.session_m2(&m1r, now) {
            Ok(v) => v,
            Err(refusal) => {
                record(&mut wire, "refusal", &refusal.encode(), true);
                client.on_refusal();
                break 'run Outcome::Refused;
            }
        };
        if plan.get(1) == Some(Fault::Duplicate) {
            // The pinned tid makes the copy bounce.
            if let Err(r) = server.session_m2(&m1r, now) {
                record(&mut wire, "refusal", &r.encode(), true);
            }
        }

        let m2_bytes = m2.encode();
        let lost = plan.get(2) == Some(Fault::Drop);
        record(&mut wire, "M2", &m2_bytes, !lost);
        sent[1] = Some(m2_bytes.clone());
        if lost {
            client.abort();
            break 'run Outcome::Aborted;
        }
        let m2r = M2::decode(&m2_bytes)?;
        let m3 = match respond(client, &m2r, presentation) {
            Ok(m3) => m3,
            Err(ProtocolError::ServerAuthFailed) => break 'run Outcome::ServerAuthFailed,
            Err(e) => break 'run Outcome::ClientError(e.to_string()),
        };
        if plan.get(2) == Some(Fault::Duplicate) {
            let _ = respond(client, &m2r, presentation);
        }

        let m3_bytes = m3.encode();
        let lost = plan.get(3) == Some(Fault::Drop);
        record(&mut wire, "M3", &m3_bytes, !lost);
        sent[2] = Some(m3_bytes.clone());
        if lost {
            client.abort();
            break 'run Outcome::Aborted;
        }
        let m3r = M3::decode(&m3_bytes)?;
        let (m4, verdict) = match srv.m4(&m3r, threshold) {
            Ok(v) => v,
            Err(refusal) => {
                record(&mut wire, "refusal", &refusal.encode(), true);
                client.on_refusal();
                break 'run Outcome::Refused;
            }
        };
        score = Some(verdict.decision.score);
        epoch = Some(verdict.epoch);
        let dup_refusal = (plan.get(3) == Some(Fault::Duplicate))
            .then(|| srv.m4(&m3r, threshold).err())
            .flatten();
        drop(srv);

        let m4_bytes = m4.encode();
        let lost = plan.get(4) == Some(Fault::Drop);
        record(&mut wire, "M4", &m4_bytes, !lost);
        sent[3] = Some(m4_bytes.clone());
        if lost {
            client.abort();
            break 'run Outcome::Aborted;
        }
        let m4r = M4::decode(&m4_bytes)?;
        let fin = client.session_finalize(&m4r);
        if plan.get(4) == Some(Fault::Duplicate) {
            let _ = client.session_finalize(&m4r);
        }
        if let Some(r) = dup_refusal {
            // Arrives after M4; the client is idle again and ignores it.
            record(&mut wire, "refusal", &r.encode(), true);
            client.on_refusal();
        }
        match fin {
            Ok(Finalized::Committed) => Outcome::Accepted,
            Ok(Finalized::Rejected) => Outcome::Rejected,
            Err(e) => Outcome::ClientError(e.to_string()),
        }
    };

    // Late copies, as an eavesdropper replaying captured traffic would send.
    for m in 1..=4 {
        if plan.get(m) != Some(Fault::Replay) {
            continue;
        }
        let Some(bytes) = sent[m - 1].as_deref() else {
            continue;
        };
        match m {
            1 | 3 => {
                let m1r = M1::decode(sent[0].as_deref().expect("M1 always sent"))?;
                if let Ok((mut s, _)) = server.session_m2(&m1r, now) {
                    if m == 3 {
                        let m3r = M3::decode(bytes)?;
                        replay_accepted |= s
                            .m4(&m3r, threshold)
                            .is_ok_and(|(_, v)| v.decision.accepted);
                    }
                }
            }
            2 => {
                let _ = respond(client, &M2::decode(bytes)?, presentation);
            }
            _ => {
                let _ = client.session_finalize(&M4::decode(bytes)?);
            }
        }
    }

    let tid_after = client.credentials().map(|c| c.tid);
    let client_committed = tid_after != Some(tid_before);
    let server_rotated = !server.resolves(&tid_before);
    Ok(SessionReport {
        session,
        faults: plan,
        outcome,
        score,
        epoch,
        server_rotated,
        client_committed,
        desync: server_rotated != client_committed,
        desync_logged: client.desync_suspected(),
        replay_accepted,
        wire,
        client_events: client.log()[c0..].to_vec(),
        server_events: server.log_since(s0),
    })
}

fn respond(client: &mut Client, m2: &M2, p: Presentation<'_>) -> Result<M3, ProtocolError> {
    match p {
        Presentation::Genuine(face) => client.session_m3(m2, face),
        Presentation::Injected { face, probe } => client.session_m3_injected(m2, face, probe),
    }
}
