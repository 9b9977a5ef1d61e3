//! `otbm`: command-line front end of the otb-morph simulator.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for runtime
//! failures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otb_morph::attack::{calibrate, load_scenarios, run_scenario, ScenarioError, ScenarioSpec};
use otb_morph::eval::{read_run, write_atomic, write_run, write_summary, CalibrationEntry};
use otb_morph::raster::{mse, read_image, ssim, write_image};
use otb_morph::synthface::{render_capture, sample_identity, MAX_JITTER};
use otb_morph::{rng, Error};

#[derive(Parser)]
#[command(name = "otbm", version, about = "One-time biometrics via morphing: simulator CLI")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a synthetic face dataset: DIR/id_NNNN/cap_NNN.pgm plus `.lm` sidecars.
    GenSynth {
        #[arg(long, default_value_t = 20)]
        identities: usize,
        #[arg(long, default_value_t = 5)]
        captures: usize,
        #[arg(long, default_value_t = 0.05)]
        jitter: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the seven standard scenarios to a scenario file.
    Suite {
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute genuine/impostor scores, EER and FRR@FAR for each scenario.
    Calibrate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the leakage attack: score logs, traces and calibration into DIR.
    Attack {
        #[arg(long)]
        scenario: PathBuf,
        /// Sessions per run; overrides each scenario's attack budget.
        #[arg(long)]
        budget: Option<usize>,
        /// Number of seeded runs per scenario.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the first run's protocol transcripts (rotation scenarios).
        #[arg(long)]
        protocol_trace: bool,
    },
    /// Summarize an attack output directory into JSON plus plot-ready CSVs.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// MSE and SSIM between two PGM/PPM images, printed as JSON.
    Quality { a: PathBuf, b: PathBuf },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Scenario(_) | Error::Transform(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn scenarios(path: &Path) -> Result<Vec<ScenarioSpec>, Failure> {
    load_scenarios(path).map_err(|e| Failure::Config(e.to_string()))
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn gen_synth(identities: usize, captures: usize, jitter: f64, seed: u64, out: &Path) -> Result<(), Failure> {
    if identities == 0 || captures == 0 {
        return Err(Failure::Config("identities and captures must be at least 1".into()));
    }
    if !(0.0..=MAX_JITTER).contains(&jitter) {
        return Err(Failure::Config(format!("jitter must lie in [0, {MAX_JITTER}]")));
    }
    let key = rng::derive(seed, "population");
    for i in 0..identities {
        let id = sample_identity(rng::derive_index(key, i as u64));
        let dir = out.join(format!("id_{i:04}"));
        std::fs::create_dir_all(&dir)?;
        for j in 0..captures {
            let cap = render_capture(&id, rng::derive_index(id.seed, j as u64), jitter).map_err(Error::from)?;
            let img = dir.join(format!("cap_{j:03}.pgm"));
            write_image(&cap.image, &img).map_err(Error::from)?;
            write_atomic(&img.with_extension("lm"), cap.landmarks.to_sidecar().as_bytes())?;
        }
    }
    println!("wrote {identities} identities x {captures} captures to {}", out.display());
    Ok(())
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::GenSynth {
            identities,
            captures,
            jitter,
            seed,
            out,
        } => gen_synth(identities, captures, jitter, seed, &out),
        Cmd::Suite { out } => {
            let suite = serde_json::json!({ "scenarios": ScenarioSpec::standard_suite() });
            write_atomic(&out, &json_bytes(&suite)?)?;
            Ok(())
        }
        Cmd::Calibrate { scenario, out } => {
            let mut entries = BTreeMap::new();
            for spec in scenarios(&scenario)? {
                let cal = calibrate(&spec)?;
                eprintln!(
                    "{}: EER {:.4} at threshold {}",
                    spec.name, cal.report.eer, cal.report.eer_threshold
                );
                entries.insert(spec.name.clone(), CalibrationEntry::new(&spec, &cal));
            }
            write_atomic(&out, &json_bytes(&entries)?)?;
            Ok(())
        }
        Cmd::Attack {
            scenario,
            budget,
            seeds,
            out,
            protocol_trace,
        } => {
            if seeds == 0 {
                return Err(Failure::Config("--seeds must be at least 1".into()));
            }
            let mut specs = scenarios(&scenario)?;
            if let Some(b) = budget {
                for s in &mut specs {
                    s.attack.budget = b;
                    s.validate().map_err(|e: ScenarioError| Failure::Config(e.to_string()))?;
                }
            }
            let mut runs = Vec::with_capacity(specs.len());
            for spec in &specs {
                let run = run_scenario(spec, &spec.attack.seeds(seeds), protocol_trace)?;
                let broken = run.traces.iter().filter(|t| t.records.iter().any(|r| r.accepted)).count();
                eprintln!("{}: {broken}/{seeds} runs crossed the threshold", spec.name);
                runs.push(run);
            }
            write_run(&out, &runs)?;
            Ok(())
        }
        Cmd::Report { input, out } => {
            let data = read_run(&input)?;
            let summary = write_summary(&out, &data)?;
            for (name, s) in &summary.scenarios {
                let asr = s.metrics.asr_at.get("eer").copied().flatten();
                eprintln!("{name}: EER {:.4}, ASR@EER {}", s.metrics.eer, asr.map_or("-".into(), |v| format!("{v:.2}")));
            }
            Ok(())
        }
        Cmd::Quality { a, b } => {
            let read = |p: &Path| read_image(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())));
            let (ia, ib) = (read(&a)?, read(&b)?);
            let m = mse(&ia, &ib).map_err(|e| Failure::Config(e.to_string()))?;
            let s = ssim(&ia, &ib).map_err(|e| Failure::Config(e.to_string()))?;
            println!("{}", serde_json::json!({ "mse": m, "ssim": s }));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
