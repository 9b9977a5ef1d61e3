//! Error-rate metrics, attack success rates and the on-disk result formats.

mod metrics;
mod report;

pub use metrics::{asr, eer, far_frr, far_key, frr_at_far, Counts, FarPoint, MetricsReport, FAR_TARGETS};
pub use report::{
    read_run, summarize, write_atomic, write_run, write_summary, CalibrationEntry, RunData,
    ScenarioData, ScenarioSummary, ScoreRole, ScoreRow, Summary, CALIBRATION_JSON,
    DISTRIBUTIONS_CSV, EVOLUTION_CSV, PROTOCOL_JSONL, SCENARIOS_JSON, SCORES_CSV, TRACES_JSONL,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no {0} to evaluate")]
    Empty(&'static str),
    #[error("{0} contain NaN")]
    NonFinite(&'static str),
    #[error("FAR target {0} must lie strictly between 0 and 1")]
    InvalidTarget(f64),
    #[error("metric invariant violated: {0}")]
    Invariant(String),
    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },
}

/// Threshold that may be infinite; infinities serialize as `"inf"`/`"-inf"`.
pub(crate) mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_finite() {
            Repr::Num(*t).serialize(s)
        } else if *t > 0.0 {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Text("-inf".into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad threshold {t:?}"))),
        }
    }
}
