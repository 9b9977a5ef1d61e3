//! One seeded hill-climbing run against an unprotected system and against
//! the rotation protocol, printing the leaked score every 20 sessions.
//!
//! ```text
//! cargo run --release --example hill_climb_attack -- [seed]
//! ```

use otb_morph::attack::{build_embedder, calibrate, run_attack, Population, ScenarioKind, ScenarioSpec};
use otb_morph::protocol::FaceDomain;

fn main() -> otb_morph::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    for spec in [ScenarioSpec::baseline(ScenarioKind::Unprotected), ScenarioSpec::otb("otb-plain", FaceDomain::Plain)] {
        let cal = calibrate(&spec)?;
        let embedder = build_embedder(&spec.embedder)?;
        let population = Population::load(&spec.population)?;
        let run = run_attack(&spec, embedder, &population, cal.threshold, seed, false)?;
        println!("{} (threshold {:.4})", spec.name, cal.threshold);
        for r in run.trace.records.iter().filter(|r| r.session % 20 == 0 || r.accepted) {
            println!(
                "  session {:>3}  leaked {:.4}  best {:.4}  epoch {:>3}{}",
                r.session,
                r.score,
                r.best,
                r.epoch,
                if r.accepted { "  <- accepted" } else { "" }
            );
            if r.accepted {
                break;
            }
        }
    }
    Ok(())
}
