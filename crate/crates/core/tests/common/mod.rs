//! Shared fixture: a TTP, a server and one enrolled client on synthetic faces.

#![allow(dead_code)]

pub mod oracles;

use std::sync::Arc;

use otb_morph::matcher::ToyEmbedder;
use otb_morph::protocol::{
    run_session, Client, Clock, CryptoProvider, FaceDomain, FaultPlan, ManualClock, Presentation,
    RespPayload, Server, SessionReport, StdCrypto, SyntheticFaces, Ttp, M3,
};
use otb_morph::rng;
use otb_morph::synthface::{render_capture, sample_identity, Capture, IdentityParams};

pub const THRESHOLD: f64 = 0.35;
pub const TTL: u64 = 3_600;
pub const JITTER: f64 = 0.05;

pub struct World {
    pub ttp: Ttp,
    pub server: Server,
    pub client: Client,
    pub clock: ManualClock,
    pub id: IdentityParams,
    pub account: u64,
    next_session: u64,
}

impl World {
    pub fn new(seed: u64) -> Self {
        let ttp = Ttp::new(
            "ttp",
            Box::new(StdCrypto::from_seed(rng::derive(seed, "ttp"))),
            Box::new(SyntheticFaces::new(seed, FaceDomain::Plain)),
            TTL,
        );
        let server = Server::new(
            "server",
            ttp.public_key(),
            Box::new(StdCrypto::from_seed(rng::derive(seed, "server"))),
            Arc::new(ToyEmbedder),
        );
        let client = Client::new("alice", Box::new(StdCrypto::from_seed(rng::derive(seed, "client"))));
        let mut w = Self {
            ttp,
            server,
            client,
            clock: ManualClock::new(10_000),
            id: sample_identity(rng::derive(seed, "alice")),
            account: 0,
            next_session: 0,
        };
        w.refill(24);
        let req = w.client.enroll_request(&w.capture(0)).expect("enroll request");
        let (resp, account) = w.server.enroll(&req, w.clock.now()).expect("enrollment accepted");
        w.client.enroll_finish(&resp).expect("enroll finish");
        w.account = account;
        w
    }

    pub fn refill(&mut self, n: usize) {
        let set = self
            .ttp
            .issue(&self.client.public_key(), n, self.clock.now())
            .expect("issue pseudonyms");
        self.client.add_pseudonyms(set);
    }

    pub fn capture(&self, k: u64) -> Capture {
        render_capture(&self.id, rng::derive_index(self.id.seed, k), JITTER).expect("capture")
    }

    pub fn session(&mut self, plan: FaultPlan) -> SessionReport {
        self.next_session += 1;
        self.clock.advance(30);
        let face = self.capture(self.next_session);
        run_session(
            self.next_session,
            &mut self.client,
            &self.server,
            Presentation::Genuine(&face),
            THRESHOLD,
            self.clock.now(),
            plan,
        )
        .expect("session starts")
    }
}

pub fn has_event(events: &[otb_morph::protocol::TraceEvent], step: &str, check: &str, ok: bool) -> bool {
    events.iter().any(|e| e.step == step && e.check == check && e.ok == ok)
}

/// A crypto provider holding none of the parties' secrets.
pub fn outsider() -> StdCrypto {
    StdCrypto::from_seed(0xbad)
}

/// Re-encrypts the client's payload under the current key after `edit`.
pub fn rewrap(w: &World, m3: &M3, edit: impl FnOnce(&mut RespPayload)) -> M3 {
    let sk = w.client.credentials().unwrap().sk;
    let mut c = outsider();
    let mut payload = RespPayload::decode(&c.sym_decrypt(&sk, &m3.resp_c).unwrap()).unwrap();
    edit(&mut payload);
    M3 {
        resp_c: c.sym_encrypt(&sk, &payload.encode()),
    }
}
