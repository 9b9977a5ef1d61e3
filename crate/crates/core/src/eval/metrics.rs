use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attack::{AttackTrace, ThresholdPolicy};

use super::{threshold_serde, EvalError};

/// FAR operating points reported alongside the EER.
pub const FAR_TARGETS: [f64; 3] = [0.1, 0.01, 0.001];

/// Report key for a FAR target (`0.1` -> `"0.1"`).
pub fn far_key(far: f64) -> String {
    format!("{far}")
}

fn sorted(xs: &[f64], what: &'static str) -> Result<Vec<f64>, EvalError> {
    if xs.is_empty() {
        return Err(EvalError::Empty(what));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(EvalError::NonFinite(what));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Candidate thresholds: negative infinity, the midpoints between
/// consecutive distinct scores of the merged set, positive infinity.
fn candidates(g: &[f64], i: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = g.iter().chain(i).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut out = Vec::with_capacity(all.len() + 1);
    out.push(f64::NEG_INFINITY);
    out.extend(all.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    out.push(f64::INFINITY);
    out
}

fn count_le(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|&x| x <= t)
}

/// `(FAR, FRR)` at threshold `t` for sorted inputs: impostors at or below
/// `t` are falsely accepted, genuine scores above `t` are falsely rejected.
fn rates_sorted(g: &[f64], i: &[f64], t: f64) -> (f64, f64) {
    let far = count_le(i, t) as f64 / i.len() as f64;
    let frr = (g.len() - count_le(g, t)) as f64 / g.len() as f64;
    (far, frr)
}

/// `(FAR, FRR)` at threshold `t`.
pub fn far_frr(genuine: &[f64], impostor: &[f64], t: f64) -> Result<(f64, f64), EvalError> {
    let g = sorted(genuine, "genuine scores")?;
    let i = sorted(impostor, "impostor scores")?;
    Ok(rates_sorted(&g, &i, t))
}

/// Equal error rate and its threshold.
///
/// Sweeps every candidate threshold, picks the one minimizing
/// `|FAR - FRR|` (the smaller threshold on ties) and reports
/// `(FAR + FRR) / 2` there.
pub fn eer(genuine: &[f64], impostor: &[f64]) -> Result<(f64, f64), EvalError> {
    let g = sorted(genuine, "genuine scores")?;
    let i = sorted(impostor, "impostor scores")?;
    let mut best: Option<(f64, f64, f64)> = None;
    for t in candidates(&g, &i) {
        let (far, frr) = rates_sorted(&g, &i, t);
        let gap = (far - frr).abs();
        if best.is_none_or(|(b, _, _)| gap < b) {
            best = Some((gap, t, (far + frr) / 2.0));
        }
    }
    let (_, t, rate) = best.expect("candidate set is never empty");
    Ok((rate, t))
}

/// FRR at the largest candidate threshold whose FAR does not exceed `far_target`.
pub fn frr_at_far(
    genuine: &[f64],
    impostor: &[f64],
    far_target: f64,
) -> Result<(f64, f64), EvalError> {
    if !(far_target > 0.0 && far_target < 1.0) {
        return Err(EvalError::InvalidTarget(far_target));
    }
    let g = sorted(genuine, "genuine scores")?;
    let i = sorted(impostor, "impostor scores")?;
    let mut chosen = f64::NEG_INFINITY;
    for t in candidates(&g, &i) {
        if rates_sorted(&g, &i, t).0 <= far_target {
            chosen = t;
        } else {
            break;
        }
    }
    Ok((rates_sorted(&g, &i, chosen).1, chosen))
}

/// Fraction of traces in which some leaked score reached `threshold`.
pub fn asr(traces: &[AttackTrace], threshold: f64) -> Result<f64, EvalError> {
    if traces.is_empty() {
        return Err(EvalError::Empty("attack traces"));
    }
    let broken = traces
        .iter()
        .filter(|t| t.records.iter().any(|r| r.score <= threshold))
        .count();
    Ok(broken as f64 / traces.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarPoint {
    pub frr: f64,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub genuine: usize,
    pub impostor: usize,
    pub traces: usize,
}

/// EER, FRR at the FAR grid and ASR at each of those thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub eer: f64,
    #[serde(with = "threshold_serde")]
    pub eer_threshold: f64,
    /// Keyed by FAR target (`"0.1"`, `"0.01"`, `"0.001"`).
    pub frr_at_far: BTreeMap<String, FarPoint>,
    /// Keyed by `"eer"` and the FAR targets. Empty without traces; the
    /// FAR=0.1 cell is null when the EER exceeds the FRR at FAR=0.1.
    pub asr_at: BTreeMap<String, Option<f64>>,
    pub counts: Counts,
}

impl MetricsReport {
    pub fn compute(
        genuine: &[f64],
        impostor: &[f64],
        traces: &[AttackTrace],
    ) -> Result<Self, EvalError> {
        let (eer_rate, eer_threshold) = eer(genuine, impostor)?;
        let mut frr_map = BTreeMap::new();
        for far in FAR_TARGETS {
            let (frr, threshold) = frr_at_far(genuine, impostor, far)?;
            frr_map.insert(far_key(far), FarPoint { frr, threshold });
        }
        let mut asr_at = BTreeMap::new();
        if !traces.is_empty() {
            asr_at.insert("eer".to_string(), Some(asr(traces, eer_threshold)?));
            for far in FAR_TARGETS {
                let point = frr_map[&far_key(far)];
                let omit = far == 0.1 && eer_rate > point.frr;
                let cell = if omit { None } else { Some(asr(traces, point.threshold)?) };
                asr_at.insert(far_key(far), cell);
            }
        }
        let report = Self {
            eer: eer_rate,
            eer_threshold,
            frr_at_far: frr_map,
            asr_at,
            counts: Counts {
                genuine: genuine.len(),
                impostor: impostor.len(),
                traces: traces.len(),
            },
        };
        report.check()?;
        Ok(report)
    }

    pub fn threshold(&self, policy: ThresholdPolicy) -> f64 {
        match policy.far() {
            None => self.eer_threshold,
            Some(far) => self.frr_at_far[&far_key(far)].threshold,
        }
    }

    /// Fractions lie in `[0, 1]` and thresholds shrink as the FAR target does.
    pub fn check(&self) -> Result<(), EvalError> {
        let fractions = std::iter::once(self.eer)
            .chain(self.frr_at_far.values().map(|p| p.frr))
            .chain(self.asr_at.values().flatten().copied());
        for f in fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(EvalError::Invariant(format!("fraction {f} outside [0, 1]")));
            }
        }
        let ts: Vec<f64> = FAR_TARGETS
            .iter()
            .map(|&f| self.frr_at_far[&far_key(f)].threshold)
            .collect();
        if ts.windows(2).any(|w| w[0] < w[1]) {
            return Err(EvalError::Invariant(format!(
                "thresholds not monotone over the FAR grid: {ts:?}"
            )));
        }
        Ok(())
    }
}
