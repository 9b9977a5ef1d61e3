//! Runs the standard scenario suite and prints error rates and attack
//! success rates side by side.
//!
//! ```text
//! cargo run --release --example evaluate_scenarios -- [runs] [budget]
//! ```

use std::time::Instant;

use otb_morph::attack::{run_scenario, ScenarioSpec};

fn main() -> otb_morph::Result<()> {
    let mut args = std::env::args().skip(1);
    let runs: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let budget: Option<usize> = args.next().and_then(|a| a.parse().ok());

    println!(
        "{:<12} {:>7} {:>9} {:>8} {:>8} {:>8} {:>9} {:>11} {:>7}",
        "scenario", "EER", "thresh", "ASR@EER", "ASR@.01", "ASR@.001", "final", "genuine-acc", "secs"
    );
    for mut spec in ScenarioSpec::standard_suite() {
        if let Some(b) = budget {
            spec.attack.budget = b;
        }
        let t0 = Instant::now();
        let seeds = spec.attack.seeds(runs);
        let run = run_scenario(&spec, &seeds, false)?;
        let m = run.metrics()?;
        let cell = |k: &str| match m.asr_at.get(k).copied().flatten() {
            Some(v) => format!("{v:.2}"),
            None => "-".to_string(),
        };
        let finals: Vec<f64> = run.traces.iter().filter_map(|t| t.final_score()).collect();
        let mean_final = finals.iter().sum::<f64>() / finals.len() as f64;
        let (acc, total) = run.traces.iter().flat_map(|t| &t.records).fold((0, 0), |(a, n), r| {
            let ok = r.genuine.is_some_and(|g| g <= run.calibration.threshold);
            (a + usize::from(ok), n + 1)
        });
        println!(
            "{:<12} {:>7.4} {:>9.4} {:>8} {:>8} {:>8} {:>9.4} {:>11.3} {:>7.1}",
            spec.name,
            m.eer,
            run.calibration.threshold,
            cell("eer"),
            cell("0.01"),
            cell("0.001"),
            mean_final,
            acc as f64 / total as f64,
            t0.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
