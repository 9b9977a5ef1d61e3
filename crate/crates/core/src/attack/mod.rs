//! Score-leakage hill climbing and the scenario runner.
//!
//! The attacker never sees images or embeddings of the victim: its only view
//! of the system is a [`ScoreOracle`] that returns one dissimilarity per
//! query. Each verification session leaks a fixed number of scores. Between
//! queries the attacker perturbs a random square patch of its current image
//! and keeps the perturbation only when the leaked score strictly improves
//! on the best score seen so far.

mod runner;
mod scenario;

pub use runner::{
    build_embedder, calibrate, calibration_scores, impostor_pairs, run_attack, run_scenario,
    AttackRun, Calibration, Population, Protector, ScenarioRun, Subject, PSEUDONYM_TTL,
    SESSION_INTERVAL,
};
pub use scenario::{
    load_scenarios, EmbedderSpec, PopulationSpec, RandomFaceSpec, ScenarioError, ScenarioKind,
    ScenarioSpec, ThresholdPolicy,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::raster::{quantize, Image};
use crate::rng::SimRng;

/// Attack budget and perturbation operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// Verification sessions attacked.
    pub budget: usize,
    /// Leaked scores per session.
    pub perturbations_per_session: usize,
    /// Largest intensity offset applied to a patch.
    pub step: f64,
    /// Side of the square patch, in pixels.
    pub patch: usize,
    /// Base seed; run `i` uses `seed + i`.
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            budget: 180,
            perturbations_per_session: 1,
            step: 16.0,
            patch: 32,
            seed: 1,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(format!("attack: {m}")));
        if self.budget == 0 {
            return bad("budget must be at least 1");
        }
        if self.perturbations_per_session == 0 {
            return bad("perturbations_per_session must be at least 1");
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return bad("step must be positive");
        }
        if self.patch == 0 {
            return bad("patch must be at least 1 px");
        }
        Ok(())
    }

    /// Seeds of `runs` independent runs.
    pub fn seeds(&self, runs: usize) -> Vec<u64> {
        (0..runs as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

/// The attacker's only window into the system: one dissimilarity per query.
pub trait ScoreOracle {
    fn query(&mut self, probe: &Image) -> crate::Result<f64>;
}

impl<F: FnMut(&Image) -> crate::Result<f64>> ScoreOracle for F {
    fn query(&mut self, probe: &Image) -> crate::Result<f64> {
        self(probe)
    }
}

/// Adds one uniform offset in `[-step, step]` to a random `patch`-sized
/// square (clipped to the frame), clamping to the 8-bit range.
pub fn perturb(img: &Image, cfg: &AttackConfig, rng: &mut SimRng) -> Image {
    let (w, h, ch) = img.dims();
    let p = cfg.patch.min(w).min(h);
    let x0 = rng.gen_range(0..=w - p);
    let y0 = rng.gen_range(0..=h - p);
    let delta = rng.gen_range(-cfg.step..=cfg.step);
    let mut out = img.clone();
    let data = out.data_mut();
    for y in y0..y0 + p {
        let row = (y * w + x0) * ch;
        for v in &mut data[row..row + p * ch] {
            *v = quantize(f64::from(*v) + delta);
        }
    }
    out
}

/// Result of one greedy step.
#[derive(Clone, Debug)]
pub struct Step {
    /// Retained image after the step.
    pub image: Image,
    /// Retained score: the best accepted score so far.
    pub score: f64,
    /// Score the oracle returned for the proposal.
    pub queried: f64,
    pub improved: bool,
}

/// Proposes one perturbation of `current` and keeps it iff the oracle's
/// score is strictly below `current_score`.
pub fn hill_climb_step(
    current: &Image,
    current_score: f64,
    oracle: &mut dyn ScoreOracle,
    cfg: &AttackConfig,
    rng: &mut SimRng,
) -> crate::Result<Step> {
    let proposal = perturb(current, cfg, rng);
    let queried = oracle.query(&proposal)?;
    Ok(if queried < current_score {
        Step {
            image: proposal,
            score: queried,
            queried,
            improved: true,
        }
    } else {
        Step {
            image: current.clone(),
            score: current_score,
            queried,
            improved: false,
        }
    })
}

/// One attacked verification session.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    /// 1-based session index.
    pub session: u64,
    /// Lowest score leaked to the attacker in this session.
    pub score: f64,
    /// Best score the attacker has retained so far.
    pub best: f64,
    #[serde(with = "crate::eval::threshold_serde")]
    pub threshold: f64,
    /// Whether some leaked score of this session was at or below the threshold.
    pub accepted: bool,
    /// Reference epoch the attacker's queries ran against.
    pub epoch: u64,
    /// Score of the victim's own verification in this session.
    pub genuine: Option<f64>,
}

/// Per-session attack records of one seeded run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    pub scenario: String,
    pub seed: u64,
    pub records: Vec<SessionRecord>,
}

impl AttackTrace {
    /// Lowest leaked score, if any session ran.
    pub fn min_score(&self) -> Option<f64> {
        self.records.iter().map(|r| r.score).reduce(f64::min)
    }

    pub fn final_score(&self) -> Option<f64> {
        self.records.last().map(|r| r.score)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn perturb_touches_one_patch_with_one_offset() {
        let img = Image::filled(32, 32, 100);
        let cfg = AttackConfig {
            patch: 5,
            step: 40.0,
            ..AttackConfig::default()
        };
        let mut rng = stream(1, "t");
        for _ in 0..50 {
            let out = perturb(&img, &cfg, &mut rng);
            let changed: Vec<u8> = out.data().iter().copied().filter(|&v| v != 100).collect();
            assert!(changed.len() == 25 || changed.is_empty());
            assert!(changed.windows(2).all(|w| w[0] == w[1]));
            assert!(changed.iter().all(|&v| (60..=140).contains(&v)));
        }
    }

    #[test]
    fn patch_larger_than_frame_is_clipped() {
        let img = Image::filled(4, 3, 10);
        let cfg = AttackConfig {
            patch: 50,
            ..AttackConfig::default()
        };
        let out = perturb(&img, &cfg, &mut stream(2, "t"));
        assert_eq!(out.dims(), (4, 3, 1));
    }

    #[test]
    fn greedy_sequence_never_increases() {
        let target = Image::from_fn(16, 16, |x, y| ((x * 16 + y) % 256) as u8);
        let mut oracle = |p: &Image| -> crate::Result<f64> {
            Ok(crate::raster::mse(p, &target)?)
        };
        let cfg = AttackConfig {
            patch: 4,
            step: 30.0,
            ..AttackConfig::default()
        };
        let mut rng = stream(3, "t");
        let mut img = Image::filled(16, 16, 128);
        let mut score = oracle.query(&img).unwrap();
        let start = score;
        for _ in 0..300 {
            let s = hill_climb_step(&img, score, &mut oracle, &cfg, &mut rng).unwrap();
            assert!(s.score <= score);
            assert_eq!(s.improved, s.score < score);
            img = s.image;
            score = s.score;
        }
        assert!(score < start);
    }

    #[test]
    fn flat_oracle_keeps_the_image() {
        let img = Image::filled(8, 8, 255);
        let mut oracle = |_: &Image| -> crate::Result<f64> { Ok(1.0) };
        let cfg = AttackConfig {
            step: 1e6,
            ..AttackConfig::default()
        };
        let mut rng = stream(4, "t");
        for _ in 0..20 {
            let s = hill_climb_step(&img, 1.0, &mut oracle, &cfg, &mut rng).unwrap();
            assert_eq!(s.image, img);
            assert_eq!(s.score, 1.0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::default().validate().is_ok());
        for bad in [
            AttackConfig { budget: 0, ..Default::default() },
            AttackConfig { step: 0.0, ..Default::default() },
            AttackConfig { step: f64::NAN, ..Default::default() },
            AttackConfig { patch: 0, ..Default::default() },
            AttackConfig { perturbations_per_session: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
