use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morph::MorphParams;
use crate::protocol::FaceDomain;
use crate::synthface::MAX_JITTER;
use crate::transforms::{TransformKind, TransformSpec};

use super::AttackConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot read scenario file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse scenario file {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Unprotected,
    Gaussian,
    Laplacian,
    Spread,
    Implode,
    Otb,
}

impl ScenarioKind {
    /// The static transform a baseline kind applies; `None` for `otb`.
    pub fn transform_kind(self) -> Option<TransformKind> {
        match self {
            ScenarioKind::Unprotected => Some(TransformKind::None),
            ScenarioKind::Gaussian => Some(TransformKind::Gaussian),
            ScenarioKind::Laplacian => Some(TransformKind::Laplacian),
            ScenarioKind::Spread => Some(TransformKind::Spread),
            ScenarioKind::Implode => Some(TransformKind::Implode),
            ScenarioKind::Otb => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbedderSpec {
    #[default]
    Toy,
    Remote { endpoint: String },
}

/// Where client faces come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum PopulationSpec {
    Synthetic {
        identities: usize,
        captures: usize,
        jitter: f64,
        seed: u64,
    },
    /// `path/<identity>/<capture>.pgm` with `.lm` sidecars, as written by `gen-synth`.
    Directory { path: PathBuf },
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec::Synthetic {
            identities: 2,
            captures: 10,
            jitter: 0.14,
            seed: 1,
        }
    }
}

/// Where an `otb` scenario's random faces come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum RandomFaceSpec {
    Synthetic {
        #[serde(default)]
        domain: FaceDomain,
        seed: u64,
    },
    Directory { path: PathBuf },
}

/// Operating point the protocol's threshold is taken from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdPolicy {
    #[default]
    #[serde(rename = "eer")]
    Eer,
    #[serde(rename = "far=0.1")]
    Far1,
    #[serde(rename = "far=0.01")]
    Far01,
    #[serde(rename = "far=0.001")]
    Far001,
}

impl ThresholdPolicy {
    /// Target FAR, or `None` for the EER point.
    pub fn far(self) -> Option<f64> {
        match self {
            ThresholdPolicy::Eer => None,
            ThresholdPolicy::Far1 => Some(0.1),
            ThresholdPolicy::Far01 => Some(0.01),
            ThresholdPolicy::Far001 => Some(0.001),
        }
    }
}

fn default_pair_cap() -> usize {
    1000
}

/// One experimental configuration. A scenario file holds either one spec or
/// `{"scenarios": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub kind: ScenarioKind,
    /// Baselines only; defaults to the kind's default strength and seed 7.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformSpec>,
    /// `otb` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<MorphParams>,
    /// `otb` only, required.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_faces: Option<RandomFaceSpec>,
    #[serde(default)]
    pub embedder: EmbedderSpec,
    #[serde(default)]
    pub population: PopulationSpec,
    #[serde(default)]
    pub threshold_policy: ThresholdPolicy,
    #[serde(default = "default_pair_cap")]
    pub impostor_pair_cap: usize,
    #[serde(default)]
    pub attack: AttackConfig,
}

const DEFAULT_AD_SEED: u64 = 7;

impl ScenarioSpec {
    fn base(name: &str, kind: ScenarioKind) -> Self {
        Self {
            name: name.into(),
            kind,
            transform: None,
            alpha: None,
            random_faces: None,
            embedder: EmbedderSpec::Toy,
            population: PopulationSpec::default(),
            threshold_policy: ThresholdPolicy::Eer,
            impostor_pair_cap: default_pair_cap(),
            attack: AttackConfig::default(),
        }
    }

    /// A baseline with its transform at default strength.
    pub fn baseline(kind: ScenarioKind) -> Self {
        let tk = kind.transform_kind().expect("baseline kind");
        let name = match kind {
            ScenarioKind::Unprotected => "unprotected",
            ScenarioKind::Gaussian => "gaussian",
            ScenarioKind::Laplacian => "laplacian",
            ScenarioKind::Spread => "spread",
            _ => "implode",
        };
        let mut s = Self::base(name, kind);
        s.transform = Some(TransformSpec::with_default_strength(tk, DEFAULT_AD_SEED));
        s
    }

    /// The rotation scheme with synthetic random faces of `domain`.
    pub fn otb(name: &str, domain: FaceDomain) -> Self {
        let mut s = Self::base(name, ScenarioKind::Otb);
        s.alpha = Some(MorphParams::HALF);
        s.random_faces = Some(RandomFaceSpec::Synthetic { domain, seed: 11 });
        s
    }

    /// The seven standard scenarios: unprotected, four static transforms and
    /// the rotation scheme with plain and masked random faces.
    pub fn standard_suite() -> Vec<Self> {
        vec![
            Self::baseline(ScenarioKind::Unprotected),
            Self::baseline(ScenarioKind::Gaussian),
            Self::baseline(ScenarioKind::Laplacian),
            Self::baseline(ScenarioKind::Spread),
            Self::baseline(ScenarioKind::Implode),
            Self::otb("otb-plain", FaceDomain::Plain),
            Self::otb("otb-masked", FaceDomain::Masked),
        ]
    }

    /// Effective static transform for baselines.
    pub fn effective_transform(&self) -> Option<TransformSpec> {
        let tk = self.kind.transform_kind()?;
        Some(
            self.transform
                .unwrap_or_else(|| TransformSpec::with_default_strength(tk, DEFAULT_AD_SEED)),
        )
    }

    pub fn effective_alpha(&self) -> MorphParams {
        self.alpha.unwrap_or(MorphParams::HALF)
    }

    /// Rejects inconsistent configurations before anything runs.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(format!("{}: {m}", self.name)));
        if self.name.is_empty() || self.name.contains([',', '\n', '/', '\\']) {
            return bad("name must be non-empty without commas, slashes or newlines".into());
        }
        match self.kind {
            ScenarioKind::Otb => {
                if self.random_faces.is_none() {
                    return bad("otb requires random_faces".into());
                }
                if self.transform.is_some() {
                    return bad("otb takes no static transform".into());
                }
            }
            kind => {
                if self.random_faces.is_some() || self.alpha.is_some() {
                    return bad("random_faces and alpha apply to otb only".into());
                }
                if let Some(t) = self.transform {
                    if Some(t.kind) != kind.transform_kind() {
                        return bad(format!("transform kind {:?} does not match scenario kind", t.kind));
                    }
                    t.validate()
                        .map_err(|e| ScenarioError::Invalid(format!("{}: {e}", self.name)))?;
                }
            }
        }
        match &self.population {
            PopulationSpec::Synthetic {
                identities,
                captures,
                jitter,
                ..
            } => {
                if *identities < 2 {
                    return bad("population needs at least 2 identities".into());
                }
                if *captures < 2 {
                    return bad("population needs at least 2 captures per identity".into());
                }
                if !(0.0..=MAX_JITTER).contains(jitter) {
                    return bad(format!("jitter must lie in [0, {MAX_JITTER}]"));
                }
            }
            PopulationSpec::Directory { path } => {
                if !path.is_dir() {
                    return bad(format!("population directory {} not found", path.display()));
                }
            }
        }
        if let Some(RandomFaceSpec::Directory { path }) = &self.random_faces {
            if !path.is_dir() {
                return bad(format!("random-face directory {} not found", path.display()));
            }
        }
        if let EmbedderSpec::Remote { endpoint } = &self.embedder {
            if !endpoint.starts_with("http://") {
                return bad("remote endpoint must be an http:// URL".into());
            }
        }
        if self.impostor_pair_cap == 0 {
            return bad("impostor_pair_cap must be at least 1".into());
        }
        self.attack.validate()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    Many { scenarios: Vec<ScenarioSpec> },
    One(Box<ScenarioSpec>),
}

/// Parses and validates a scenario file. Relative directory paths resolve
/// against the file's directory.
pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<ScenarioSpec>, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let parsed: ScenarioFile = serde_json::from_str(&text).map_err(|source| ScenarioError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let mut specs = match parsed {
        ScenarioFile::Many { scenarios } => scenarios,
        ScenarioFile::One(s) => vec![*s],
    };
    if specs.is_empty() {
        return Err(ScenarioError::Invalid("scenario file lists no scenarios".into()));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    for s in &mut specs {
        if let PopulationSpec::Directory { path } = &mut s.population {
            *path = base.join(&*path);
        }
        if let Some(RandomFaceSpec::Directory { path }) = &mut s.random_faces {
            *path = base.join(&*path);
        }
        s.validate()?;
    }
    let mut names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(ScenarioError::Invalid("scenario names must be unique".into()));
    }
    Ok(specs)
}
