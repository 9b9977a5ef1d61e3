use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::{AttackTrace, Calibration, ScenarioRun, ScenarioSpec, ThresholdPolicy};
use crate::error::Result;

use super::{threshold_serde, EvalError, MetricsReport};

pub const SCORES_CSV: &str = "scores.csv";
pub const TRACES_JSONL: &str = "traces.jsonl";
pub const CALIBRATION_JSON: &str = "calibration.json";
pub const SCENARIOS_JSON: &str = "scenarios.json";
pub const PROTOCOL_JSONL: &str = "protocol.jsonl";
pub const EVOLUTION_CSV: &str = "evolution.csv";
pub const DISTRIBUTIONS_CSV: &str = "distributions.csv";

const SCORES_HEADER: &str = "session,role,score,epoch,scenario,seed";
const HIST_BINS: usize = 50;
const HIST_MAX: f64 = 2.0;

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

/// Origin of a score row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreRole {
    /// Calibration genuine comparison.
    Genuine,
    /// Calibration impostor comparison.
    Impostor,
    /// The victim's own verification during an attack run.
    Victim,
    /// Lowest score leaked to the attacker in a session.
    Attack,
}

impl ScoreRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreRole::Genuine => "genuine",
            ScoreRole::Impostor => "impostor",
            ScoreRole::Victim => "victim",
            ScoreRole::Attack => "attack",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "genuine" => ScoreRole::Genuine,
            "impostor" => ScoreRole::Impostor,
            "victim" => ScoreRole::Victim,
            "attack" => ScoreRole::Attack,
            _ => return None,
        })
    }
}

/// One line of `scores.csv`. Calibration rows carry session 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub session: u64,
    pub role: ScoreRole,
    pub score: f64,
    pub epoch: u64,
    pub scenario: String,
    pub seed: u64,
}

impl ScoreRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.session,
            self.role.as_str(),
            self.score,
            self.epoch,
            self.scenario,
            self.seed
        )
    }

    fn parse(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(format!("expected 6 fields, found {}", f.len()));
        }
        let num = |s: &str, what: &str| s.parse::<u64>().map_err(|e| format!("{what}: {e}"));
        Ok(Self {
            session: num(f[0], "session")?,
            role: ScoreRole::parse(f[1]).ok_or_else(|| format!("unknown role {:?}", f[1]))?,
            score: f[2].parse().map_err(|e| format!("score: {e}"))?,
            epoch: num(f[3], "epoch")?,
            scenario: f[4].to_string(),
            seed: num(f[5], "seed")?,
        })
    }
}

/// Operating point and calibration metrics of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub threshold_policy: ThresholdPolicy,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub budget: usize,
    pub metrics: MetricsReport,
}

impl CalibrationEntry {
    pub fn new(spec: &ScenarioSpec, cal: &Calibration) -> Self {
        Self {
            threshold_policy: spec.threshold_policy,
            threshold: cal.threshold,
            budget: spec.attack.budget,
            metrics: cal.report.clone(),
        }
    }
}

fn score_rows(run: &ScenarioRun) -> Vec<ScoreRow> {
    let name = &run.spec.name;
    let cal = |role, scores: &[f64]| {
        scores
            .iter()
            .map(|&score| ScoreRow {
                session: 0,
                role,
                score,
                epoch: 0,
                scenario: name.clone(),
                seed: 0,
            })
            .collect::<Vec<_>>()
    };
    let mut rows = cal(ScoreRole::Genuine, &run.calibration.genuine);
    rows.extend(cal(ScoreRole::Impostor, &run.calibration.impostor));
    for t in &run.traces {
        for r in &t.records {
            if let Some(g) = r.genuine {
                rows.push(ScoreRow {
                    session: r.session,
                    role: ScoreRole::Victim,
                    score: g,
                    epoch: r.epoch,
                    scenario: name.clone(),
                    seed: t.seed,
                });
            }
            rows.push(ScoreRow {
                session: r.session,
                role: ScoreRole::Attack,
                score: r.score,
                epoch: r.epoch,
                scenario: name.clone(),
                seed: t.seed,
            });
        }
    }
    rows
}

#[derive(Serialize)]
struct ProtocolLine<'a> {
    scenario: &'a str,
    report: &'a crate::protocol::SessionReport,
}

/// Writes `scores.csv`, `traces.jsonl`, `calibration.json`,
/// `scenarios.json` and, when transcripts were recorded, `protocol.jsonl`.
pub fn write_run(dir: &Path, runs: &[ScenarioRun]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut scores = String::from(SCORES_HEADER);
    scores.push('\n');
    let mut traces = String::new();
    let mut protocol = String::new();
    let mut calibration = BTreeMap::new();
    for run in runs {
        for row in score_rows(run) {
            scores.push_str(&row.to_csv());
            scores.push('\n');
        }
        for t in &run.traces {
            traces.push_str(&t.to_json_line());
            traces.push('\n');
        }
        for report in &run.protocol {
            let line = ProtocolLine {
                scenario: &run.spec.name,
                report,
            };
            protocol.push_str(&serde_json::to_string(&line)?);
            protocol.push('\n');
        }
        calibration.insert(run.spec.name.clone(), CalibrationEntry::new(&run.spec, &run.calibration));
    }
    let specs: Vec<&ScenarioSpec> = runs.iter().map(|r| &r.spec).collect();
    write_atomic(&dir.join(SCORES_CSV), scores.as_bytes())?;
    write_atomic(&dir.join(TRACES_JSONL), traces.as_bytes())?;
    write_atomic(
        &dir.join(CALIBRATION_JSON),
        serde_json::to_string_pretty(&calibration)?.as_bytes(),
    )?;
    write_atomic(
        &dir.join(SCENARIOS_JSON),
        serde_json::to_string_pretty(&serde_json::json!({ "scenarios": specs }))?.as_bytes(),
    )?;
    if !protocol.is_empty() {
        write_atomic(&dir.join(PROTOCOL_JSONL), protocol.as_bytes())?;
    }
    Ok(())
}

/// Calibration scores and operating point of one scenario, as read back.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScenarioData {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub traces: Vec<AttackTrace>,
    pub threshold: f64,
    pub threshold_policy: ThresholdPolicy,
    pub budget: usize,
}

/// Contents of an attack output directory, keyed by scenario name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunData {
    pub scenarios: BTreeMap<String, ScenarioData>,
}

fn parse_err(path: &Path, line: usize, detail: impl Into<String>) -> EvalError {
    EvalError::Parse {
        path: path.display().to_string(),
        line,
        detail: detail.into(),
    }
}

/// Reads what [`write_run`] produced.
pub fn read_run(dir: &Path) -> Result<RunData> {
    let cal_path = dir.join(CALIBRATION_JSON);
    let cal: BTreeMap<String, CalibrationEntry> =
        serde_json::from_str(&std::fs::read_to_string(&cal_path)?)?;
    let mut data = RunData::default();
    for (name, entry) in cal {
        data.scenarios.insert(
            name,
            ScenarioData {
                threshold: entry.threshold,
                threshold_policy: entry.threshold_policy,
                budget: entry.budget,
                ..ScenarioData::default()
            },
        );
    }

    let scores_path = dir.join(SCORES_CSV);
    let text = std::fs::read_to_string(&scores_path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SCORES_HEADER => {}
        _ => return Err(parse_err(&scores_path, 1, "missing or unexpected header").into()),
    }
    for (k, line) in lines {
        let row = ScoreRow::parse(line).map_err(|e| parse_err(&scores_path, k + 1, e))?;
        let s = data
            .scenarios
            .get_mut(&row.scenario)
            .ok_or_else(|| parse_err(&scores_path, k + 1, format!("unknown scenario {:?}", row.scenario)))?;
        match row.role {
            ScoreRole::Genuine => s.genuine.push(row.score),
            ScoreRole::Impostor => s.impostor.push(row.score),
            ScoreRole::Victim | ScoreRole::Attack => {}
        }
    }

    let traces_path = dir.join(TRACES_JSONL);
    let text = std::fs::read_to_string(&traces_path)?;
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let t: AttackTrace = serde_json::from_str(line)
            .map_err(|e| parse_err(&traces_path, k + 1, e.to_string()))?;
        data.scenarios
            .get_mut(&t.scenario)
            .ok_or_else(|| parse_err(&traces_path, k + 1, format!("unknown scenario {:?}", t.scenario)))?
            .traces
            .push(t);
    }
    Ok(data)
}

/// Headline numbers of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub threshold_policy: ThresholdPolicy,
    /// Threshold the attacked system operated at.
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub budget: usize,
    pub metrics: MetricsReport,
    pub runs: usize,
    /// Runs in which some leaked score reached the operating threshold.
    pub broken_runs: usize,
    /// Mean of each run's last leaked score.
    pub mean_final_score: Option<f64>,
    /// Mean of each run's lowest leaked score.
    pub mean_min_score: Option<f64>,
    /// Mean session of the first crossing, over broken runs.
    pub mean_sessions_to_break: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenarios: BTreeMap<String, ScenarioSummary>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (n, s) = xs.into_iter().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

pub fn summarize(data: &RunData) -> Result<Summary> {
    let mut scenarios = BTreeMap::new();
    for (name, s) in &data.scenarios {
        let metrics = MetricsReport::compute(&s.genuine, &s.impostor, &s.traces)?;
        let first_break: Vec<u64> = s
            .traces
            .iter()
            .filter_map(|t| t.records.iter().find(|r| r.score <= s.threshold).map(|r| r.session))
            .collect();
        scenarios.insert(
            name.clone(),
            ScenarioSummary {
                threshold_policy: s.threshold_policy,
                threshold: s.threshold,
                budget: s.budget,
                metrics,
                runs: s.traces.len(),
                broken_runs: first_break.len(),
                mean_final_score: mean(s.traces.iter().filter_map(AttackTrace::final_score)),
                mean_min_score: mean(s.traces.iter().filter_map(AttackTrace::min_score)),
                mean_sessions_to_break: mean(first_break.iter().map(|&k| k as f64)),
            },
        );
    }
    Ok(Summary { scenarios })
}

fn evolution_csv(data: &RunData) -> String {
    let mut out =
        String::from("scenario,session,mean_score,mean_best,min_score,max_score,mean_genuine,threshold,mean_epoch\n");
    for (name, s) in &data.scenarios {
        let sessions = s.traces.iter().map(|t| t.records.len()).max().unwrap_or(0);
        for k in 0..sessions {
            let recs: Vec<_> = s.traces.iter().filter_map(|t| t.records.get(k)).collect();
            let scores = recs.iter().map(|r| r.score);
            let min = scores.clone().fold(f64::INFINITY, f64::min);
            let max = scores.clone().fold(f64::NEG_INFINITY, f64::max);
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{name},{},{},{},{min},{max},{},{},{}",
                k + 1,
                opt(mean(scores)),
                opt(mean(recs.iter().map(|r| r.best))),
                opt(mean(recs.iter().filter_map(|r| r.genuine))),
                s.threshold,
                opt(mean(recs.iter().map(|r| r.epoch as f64))),
            );
        }
    }
    out
}

fn distributions_csv(data: &RunData) -> String {
    let mut out = String::from("scenario,role,bin_lo,bin_hi,count\n");
    let width = HIST_MAX / HIST_BINS as f64;
    for (name, s) in &data.scenarios {
        let finals: Vec<f64> = s.traces.iter().filter_map(AttackTrace::final_score).collect();
        for (role, xs) in [("genuine", &s.genuine), ("impostor", &s.impostor), ("attack-final", &finals)] {
            let mut counts = [0usize; HIST_BINS];
            for &x in xs.iter() {
                let b = ((x / width).floor().max(0.0) as usize).min(HIST_BINS - 1);
                counts[b] += 1;
            }
            for (b, c) in counts.iter().enumerate() {
                let lo = b as f64 * width;
                let _ = writeln!(out, "{name},{role},{lo},{},{c}", lo + width);
            }
        }
    }
    out
}

/// Writes `out` (the summary JSON) plus `evolution.csv` and
/// `distributions.csv` in the same directory.
pub fn write_summary(out: &Path, data: &RunData) -> Result<Summary> {
    let summary = summarize(data)?;
    let dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_atomic(out, json.as_bytes())?;
    write_atomic(&dir.join(EVOLUTION_CSV), evolution_csv(data).as_bytes())?;
    write_atomic(&dir.join(DISTRIBUTIONS_CSV), distributions_csv(data).as_bytes())?;
    Ok(summary)
}
