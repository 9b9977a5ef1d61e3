//! Every accepted session stores its reference under a fresh random face.

mod common;

use std::collections::HashSet;

use common::World;
use otb_morph::protocol::{FaultPlan, Outcome};

#[test]
fn ten_sessions_use_ten_distinct_random_faces() {
    let mut w = World::new(77);
    let k = 10;
    for s in 0..k {
        assert_eq!(w.session(FaultPlan::none()).outcome, Outcome::Accepted, "session {s}");
    }
    let history = w.server.history();
    assert_eq!(history.len(), k + 1, "enrollment plus one rotation per session");
    let rotated = &history[1..];
    let payloads: HashSet<_> = rotated.iter().map(|h| h.rf_payload.as_str()).collect();
    let tids: HashSet<_> = history.iter().map(|h| h.tid.as_str()).collect();
    let refs: HashSet<_> = history.iter().map(|h| h.reference.as_str()).collect();
    assert_eq!(payloads.len(), k);
    assert_eq!(tids.len(), k + 1);
    assert_eq!(refs.len(), k + 1);
    assert!(history.iter().enumerate().all(|(e, h)| h.epoch == e as u64));

    // The client's side includes the enrollment face.
    let faces: HashSet<_> = w.client.committed_rf_digests().iter().collect();
    assert_eq!(faces.len(), k + 1);
    // Only the newest record survives on the server.
    assert_eq!(w.server.record_count(), 1);
}

#[test]
fn rejected_and_aborted_sessions_do_not_consume_faces() {
    let mut w = World::new(78);
    w.session(FaultPlan::at(2, otb_morph::protocol::Fault::Drop));
    w.session(FaultPlan::none());
    assert_eq!(w.server.history().len(), 2);
    assert_eq!(w.client.committed_rf_digests().len(), 2);
}
