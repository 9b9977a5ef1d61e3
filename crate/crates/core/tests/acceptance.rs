//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.
//!
//! ```text
//! cargo test --test acceptance
//! ```

mod common;

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::oracles::{all_collinear, f, hull_area2, incircle, oracle_eer, oracle_frr_at, orient, same_cut, P};
use common::{outsider, rewrap, World, THRESHOLD};
use otb_morph::attack::{run_scenario, ScenarioKind, ScenarioSpec};
use otb_morph::eval::{eer, frr_at_far};
use otb_morph::morph::{delaunay, delaunay_points, morph, warp_to, LandmarkSet, MorphError, MorphParams, Point};
use otb_morph::protocol::{
    Clock, CryptoProvider, Fault, FaultPlan, Outcome, ProtocolError, RefusalReason, SymKey, M2,
};
use otb_morph::raster::{mse, ssim};
use otb_morph::rng;
use otb_morph::synthface::{render_capture, sample_identity};
use otb_morph::transforms::{apply_transform, TransformKind, TransformSpec};
use otb_morph::Image;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn max_diff(a: &Image, b: &Image) -> u8 {
    a.data().iter().zip(b.data()).map(|(&x, &y)| x.abs_diff(y)).max().unwrap_or(0)
}

fn geometry() -> Check {
    let t0 = Instant::now();
    let sets = prop::collection::btree_set((0i64..48, 0i64..48), 3..=40)
        .prop_map(|s: BTreeSet<P>| s.into_iter().collect::<Vec<P>>());
    runner(200)
        .run(&sets, |pts| {
            let input: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
            let res = delaunay_points(&input);
            if all_collinear(&pts) {
                prop_assert!(matches!(res, Err(MorphError::Collinear)));
                return Ok(());
            }
            let tri = res.map_err(|e| TestCaseError::fail(e.to_string()))?;
            let mut area = 0;
            for t in tri.triangles() {
                let [a, b, c] = t.map(|k| pts[k]);
                prop_assert!(orient(a, b, c) > 0);
                area += orient(a, b, c);
                for (k, &d) in pts.iter().enumerate() {
                    prop_assert!(t.contains(&k) || incircle(a, b, c, d) <= 0, "{:?} in circle of {:?}", d, t);
                }
            }
            prop_assert_eq!(area, hull_area2(&pts));
            Ok(())
        })
        .map_err(|e| format!("delaunay: {e}"))?;

    let frames = prop::collection::vec((1.0f64..63.0, 1.0f64..47.0), 3..24);
    runner(50)
        .run(&frames, |raw| {
            let set = LandmarkSet::new(raw.into_iter().map(|(x, y)| Point::new(x, y)).collect(), (64, 48)).unwrap();
            let cov = delaunay(&set).unwrap().coverage(64, 48);
            prop_assert!(cov.iter().all(|&c| c == 1));
            Ok(())
        })
        .map_err(|e| format!("coverage: {e}"))?;

    for s in 0..10u64 {
        let face = |k: u64| {
            let id = sample_identity(rng::derive(s, &format!("acceptance/{k}")));
            render_capture(&id, id.seed, 0.05).unwrap()
        };
        let (a, b) = (face(0), face(1));
        let tri = delaunay(&a.landmarks).unwrap();
        let w = warp_to(&a.image, &a.landmarks, &a.landmarks, &tri).unwrap();
        ensure!(max_diff(&w, &a.image) <= 1, "warp identity off by {}", max_diff(&w, &a.image));
        let m = |x: f64| morph(&a.image, &a.landmarks, &b.image, &b.landmarks, MorphParams::new(x).unwrap()).unwrap();
        ensure!(max_diff(&m(0.0), &a.image) <= 1, "alpha 0 endpoint");
        ensure!(max_diff(&m(1.0), &b.image) <= 1, "alpha 1 endpoint");
        let p = MorphParams::new(0.1 + 0.08 * s as f64).unwrap();
        let back = morph(&b.image, &b.landmarks, &a.image, &a.landmarks, p.complement()).unwrap();
        ensure!(morph(&a.image, &a.landmarks, &b.image, &b.landmarks, p).unwrap() == back, "alpha symmetry");
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1}s");
    Ok(format!("200 point sets, 50 meshes, 10 morph pairs in {secs:.1}s"))
}

fn metric_oracle() -> Check {
    let scores = || prop::collection::vec(0i32..25, 1..40);
    runner(100)
        .run(&(scores(), scores()), |(g, i)| {
            let (rate, t) = eer(&f(&g), &f(&i)).unwrap();
            let (want, wt) = oracle_eer(&g, &i);
            prop_assert_eq!(rate, want);
            prop_assert!(same_cut(&g, &i, t, wt));
            for target in [0.1, 0.01, 0.001] {
                let (frr, t) = frr_at_far(&f(&g), &f(&i), target).unwrap();
                let (want, wt) = oracle_frr_at(&g, &i, target);
                prop_assert_eq!(frr, want);
                prop_assert!(same_cut(&g, &i, t, wt));
            }
            Ok(())
        })
        .map_err(|e| format!("sweep: {e}"))?;

    let (rate, _) = eer(&[0.1, 0.2, 0.3, 0.4], &[0.25, 0.35, 0.45, 0.55]).map_err(|e| e.to_string())?;
    ensure!(rate == 0.25, "hand case EER {rate}");

    let a = Image::from_fn(40, 30, |x, y| (x * 5 + y * 3) as u8);
    let b = Image::from_fn(40, 30, |x, y| (x * y % 251) as u8);
    let q = |r: Result<f64, _>| r.map_err(|e: otb_morph::raster::RasterError| e.to_string());
    ensure!(q(mse(&a, &a))? == 0.0, "mse identity");
    ensure!((q(ssim(&a, &a))? - 1.0).abs() < 1e-12, "ssim identity");
    ensure!(q(mse(&a, &b))? == q(mse(&b, &a))?, "mse symmetry");
    ensure!((q(ssim(&a, &b))? - q(ssim(&b, &a))?).abs() < 1e-12, "ssim symmetry");
    Ok("100 score sets match the sweep oracle; hand case EER 0.25".into())
}

fn protocol() -> Check {
    let mut w = World::new(101);
    for k in 1..=3 {
        let before = w.client.credentials().unwrap().tid;
        let r = w.session(FaultPlan::none());
        ensure!(r.outcome == Outcome::Accepted, "honest session {k}: {:?}", r.outcome);
        let after = w.client.credentials().unwrap().tid;
        let rec = w.server.record(&after).ok_or("server lacks the new tid")?;
        ensure!(
            after != before && !w.server.resolves(&before) && rec.sk == w.client.credentials().unwrap().sk,
            "rotation inconsistent after session {k}"
        );
    }

    // Client-side proof of the server's current key: pass, then a forgery.
    let m1 = w.client.session_m1().unwrap();
    let (_s, m2) = w.server.session_m2(&m1, w.clock.now()).unwrap();
    ensure!(w.client.session_m3(&m2, &w.capture(50)).is_ok(), "honest M2 refused");
    w.client.abort();
    let m1 = w.client.session_m1().unwrap();
    drop(_s);
    let (_s, m2) = w.server.session_m2(&m1, w.clock.now()).unwrap();
    let forged = M2 {
        resp_s: outsider().sym_encrypt(&outsider().random_key(), m1.tid_prev.as_bytes()),
        ..m2
    };
    ensure!(
        matches!(w.client.session_m3(&forged, &w.capture(51)), Err(ProtocolError::ServerAuthFailed)),
        "forged M2 accepted"
    );
    drop(_s);

    // Server-side checks on resp_c: authenticated decryption and key binding.
    let mut w = World::new(102);
    let m1 = w.client.session_m1().unwrap();
    let (mut s, m2) = w.server.session_m2(&m1, w.clock.now()).unwrap();
    let mut m3 = w.client.session_m3(&m2, &w.capture(1)).unwrap();
    m3.resp_c[10] ^= 1;
    ensure!(
        s.m4(&m3, THRESHOLD).map_err(|r| r.reason).err() == Some(RefusalReason::DecryptFailed),
        "tampered resp_c not refused"
    );
    drop(s);
    w.client.abort();
    let m1 = w.client.session_m1().unwrap();
    let (mut s, m2) = w.server.session_m2(&m1, w.clock.now()).unwrap();
    let m3 = w.client.session_m3(&m2, &w.capture(2)).unwrap();
    let wrong: SymKey = outsider().random_key();
    ensure!(
        s.m4(&rewrap(&w, &m3, |p| p.sk_new = wrong), THRESHOLD).map_err(|r| r.reason).err()
            == Some(RefusalReason::KeyMismatch),
        "wrong derived key not refused"
    );
    drop(s);
    w.client.abort();
    let m1 = w.client.session_m1().unwrap();
    let (mut s, m2) = w.server.session_m2(&m1, w.clock.now()).unwrap();
    let m3 = w.client.session_m3(&m2, &w.capture(3)).unwrap();
    let m3 = rewrap(&w, &m3, |_| {});
    let (m4, v) = s.m4(&m3, THRESHOLD).map_err(|r| format!("honest M3 refused: {}", r.reason.as_str()))?;
    ensure!(v.decision.accepted, "honest probe rejected");
    drop(s);
    w.client.session_finalize(&m4).unwrap();

    // Replay and tampering.
    ensure!(w.server.session_m2(&m1, w.clock.now()).is_err(), "replayed M1 accepted after rotation");
    for m in [1, 3] {
        ensure!(!w.session(FaultPlan::at(m, Fault::Replay)).replay_accepted, "replayed M{m} accepted");
    }
    let mut bad = w.client.session_m1().unwrap();
    bad.pn.lifetime += 60;
    ensure!(
        w.server.session_m2(&bad, w.clock.now()).map(|_| ()).map_err(|r| r.reason) == Err(RefusalReason::BadSignature),
        "tampered pseudonym accepted"
    );
    w.client.on_refusal();

    // Message loss.
    for m in 1..=4 {
        let mut w = World::new(110 + m as u64);
        let r = w.session(FaultPlan::at(m, Fault::Drop));
        if m < 4 {
            ensure!(!r.desync, "drop M{m} desynchronized");
            ensure!(w.session(FaultPlan::none()).outcome == Outcome::Accepted, "no recovery after drop M{m}");
        } else {
            ensure!(r.desync && r.desync_logged, "M4 loss not flagged");
            let next = w.session(FaultPlan::none());
            ensure!(
                next.client_events.iter().any(|e| e.detail.starts_with("desync-confirmed")),
                "M4 loss not confirmed on the next session"
            );
        }
    }
    Ok("rotation, 3 checks both ways, replay, tamper, 4 drop points".into())
}

fn one_time() -> Check {
    let mut w = World::new(120);
    for k in 0..10 {
        let r = w.session(FaultPlan::none());
        ensure!(r.outcome == Outcome::Accepted, "session {k}: {:?}", r.outcome);
    }
    let history = w.server.history();
    let hashes: HashSet<_> = history[1..].iter().map(|h| h.rf_payload.clone()).collect();
    ensure!(hashes.len() == 10, "{} distinct payloads in 10 sessions", hashes.len());
    ensure!(!hashes.contains(&history[0].rf_payload), "enrollment face reused");
    Ok("10 sessions, 10 distinct random-face payloads".into())
}

fn attack_ordering() -> Check {
    let t0 = Instant::now();
    let mut baseline_asr = Vec::new();
    let mut otb_asr = Vec::new();
    let mut finals = Vec::new();
    for spec in ScenarioSpec::standard_suite() {
        ensure!(spec.attack.budget == 180, "{}: budget {}", spec.name, spec.attack.budget);
        let run = run_scenario(&spec, &spec.attack.seeds(20), false).map_err(|e| e.to_string())?;
        let m = run.metrics().map_err(|e| e.to_string())?;
        let asr = m.asr_at.get("eer").copied().flatten().ok_or("missing ASR@EER")?;
        let scores: Vec<f64> = run.traces.iter().filter_map(|t| t.final_score()).collect();
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        finals.push((spec.name.clone(), mean));
        if spec.kind == ScenarioKind::Otb {
            otb_asr.push((spec.name.clone(), asr));
        } else {
            baseline_asr.push((spec.name.clone(), asr));
        }
    }
    let elapsed = t0.elapsed();
    let get = |v: &[(String, f64)], n: &str| v.iter().find(|(k, _)| k == n).map(|x| x.1);
    let unprotected = get(&baseline_asr, "unprotected").ok_or("no unprotected scenario")?;
    let fmt = |v: &[(String, f64)]| v.iter().map(|(k, x)| format!("{k} {x:.2}")).collect::<Vec<_>>().join(", ");
    let summary = format!("ASR@EER: {}, {}", fmt(&baseline_asr), fmt(&otb_asr));
    ensure!(unprotected >= 0.8, "unprotected ASR {unprotected:.2} < 0.8; {summary}");
    let weakest = baseline_asr.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    for (name, a) in &otb_asr {
        ensure!(*a < weakest, "{name} ASR {a:.2} not below every baseline; {summary}");
        let (mo, mu) = (get(&finals, name).unwrap(), get(&finals, "unprotected").unwrap());
        ensure!(mo > mu, "{name} mean final score {mo:.3} <= unprotected {mu:.3}");
    }
    ensure!(elapsed < Duration::from_secs(600), "took {:.0}s", elapsed.as_secs_f64());
    Ok(format!("{summary}; final score {}; {:.0}s", fmt(&finals), elapsed.as_secs_f64()))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let otbm = |args: &[String]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_otbm")).args(args).output().map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "otbm {:?}: {}", args, String::from_utf8_lossy(&out.stderr));
        Ok(())
    };
    let suite = dir.path().join("suite.json");
    otbm(&["suite".into(), "--out".into(), p(&suite)])?;
    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        let out = dir.path().join(run);
        let summary = out.join("summary.json");
        otbm(&[
            "attack", "--scenario", &p(&suite), "--budget", "40", "--seeds", "4", "--out", &p(&out),
        ]
        .map(String::from))?;
        otbm(&["report", "--in", &p(&out), "--out", &p(&summary)].map(String::from))?;
        outputs.push(std::fs::read(&summary).map_err(|e| e.to_string())?);
    }
    ensure!(outputs[0] == outputs[1], "summary.json differs between runs");
    Ok(format!("summary.json identical ({} bytes)", outputs[0].len()))
}

fn baseline_transforms() -> Check {
    let kinds = [TransformKind::Gaussian, TransformKind::Laplacian, TransformKind::Spread, TransformKind::Implode];
    for s in 0..5u64 {
        let id = sample_identity(s);
        let img = render_capture(&id, id.seed, 0.05).unwrap().image;
        for kind in kinds {
            let spec = TransformSpec::with_default_strength(kind, s);
            let a = apply_transform(&img, &spec).map_err(|e| e.to_string())?;
            let b = apply_transform(&img, &spec).map_err(|e| e.to_string())?;
            ensure!(a == b, "{kind:?} not repeatable");
            let zero = TransformSpec::new(kind, s, 0.0).map_err(|e| e.to_string())?;
            let z = apply_transform(&img, &zero).map_err(|e| e.to_string())?;
            ensure!(max_diff(&z, &img) <= 1, "{kind:?} at zero strength is not identity");
        }
    }
    Ok("4 transforms x 5 images".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("geometry", geometry),
        ("metric-oracle", metric_oracle),
        ("protocol", protocol),
        ("one-time", one_time),
        ("attack-ordering", attack_ordering),
        ("determinism", determinism),
        ("baseline-transforms", baseline_transforms),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
