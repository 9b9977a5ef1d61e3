//! Enrolls one client and runs verification sessions through the rotation
//! protocol, including a lost verdict that leaves the two sides out of step.
//!
//! ```text
//! cargo run --example protocol_session
//! ```

use std::sync::Arc;

use otb_morph::matcher::ToyEmbedder;
use otb_morph::protocol::{
    run_session, Client, Clock, FaceDomain, Fault, FaultPlan, ManualClock, Presentation, Server, StdCrypto,
    SyntheticFaces, Ttp,
};
use otb_morph::synthface::{render_capture, sample_identity};

const THRESHOLD: f64 = 0.35;

fn main() -> otb_morph::Result<()> {
    let clock = ManualClock::new(1_700_000_000);
    let mut ttp = Ttp::new(
        "ttp",
        Box::new(StdCrypto::from_seed(1)),
        Box::new(SyntheticFaces::new(1, FaceDomain::Masked)),
        86_400,
    );
    let server = Server::new("server", ttp.public_key(), Box::new(StdCrypto::from_seed(2)), Arc::new(ToyEmbedder));
    let mut client = Client::new("alice", Box::new(StdCrypto::from_seed(3)));
    client.add_pseudonyms(ttp.issue(&client.public_key(), 8, clock.now())?);

    let alice = sample_identity(11);
    let capture = |k: u64| render_capture(&alice, k, 0.05);
    let req = client.enroll_request(&capture(0)?)?;
    let (resp, account) = server
        .enroll(&req, clock.now())
        .map_err(|r| otb_morph::Error::Runtime(format!("enrollment refused: {}", r.reason.as_str())))?;
    client.enroll_finish(&resp)?;
    println!("enrolled account {account}, tid {}", client.credentials().unwrap().tid.to_hex());

    let plans = [
        ("honest", FaultPlan::none()),
        ("honest", FaultPlan::none()),
        ("M3 replayed", FaultPlan::at(3, Fault::Replay)),
        ("M4 lost", FaultPlan::at(4, Fault::Drop)),
        ("after loss", FaultPlan::none()),
    ];
    for (k, (label, plan)) in plans.into_iter().enumerate() {
        clock.advance(60);
        let face = capture(k as u64 + 1)?;
        let r = run_session(k as u64 + 1, &mut client, &server, Presentation::Genuine(&face), THRESHOLD, clock.now(), plan)?;
        println!(
            "{label:<12} outcome {:<10} score {:<8} server rotated {:<5} client committed {:<5} desync {}",
            format!("{:?}", r.outcome),
            r.score.map_or("-".into(), |s| format!("{s:.4}")),
            r.server_rotated,
            r.client_committed,
            r.desync
        );
    }

    println!("\nclient log tail:");
    for e in client.log().iter().rev().take(4).rev() {
        println!("  {} {} ok={} {}", e.step, e.check, e.ok, e.detail);
    }
    println!("\nserver reference history:");
    for h in server.history() {
        println!("  epoch {} tid {} rf {}", h.epoch, &h.tid[..8], &h.rf_payload[..12]);
    }
    Ok(())
}
