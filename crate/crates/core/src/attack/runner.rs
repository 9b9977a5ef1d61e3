use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::matcher::{distance, Embedder, Embedding, RemoteEmbedder, ToyEmbedder};
use crate::morph::{morph, LandmarkSet, MorphParams};
use crate::protocol::{
    run_session, Client, Clock, DirectoryFaces, FaultPlan, ManualClock, Outcome, Presentation,
    RandomFace, RandomFaceSource, Server, SessionReport, StdCrypto, SyntheticFaces, Ttp,
};
use crate::raster::{read_image, Image};
use crate::rng;
use crate::synthface::{render_capture, sample_identity, Capture, IdentityParams};
use crate::transforms::{apply_transform, TransformSpec};

use super::scenario::{EmbedderSpec, PopulationSpec, RandomFaceSpec, ScenarioError, ScenarioKind, ScenarioSpec};
use super::{hill_climb_step, AttackConfig, AttackTrace, SessionRecord};

/// Simulated seconds between consecutive verification sessions.
pub const SESSION_INTERVAL: u64 = 60;
/// Pseudonym lifetime granted by the simulated TTP.
pub const PSEUDONYM_TTL: u64 = 7 * 24 * 3600;
const POOL_BATCH: usize = 16;
const START_TIME: u64 = 1_000_000;

/// Embedder described by a scenario.
pub fn build_embedder(spec: &EmbedderSpec) -> Result<Arc<dyn Embedder>> {
    Ok(match spec {
        EmbedderSpec::Toy => Arc::new(ToyEmbedder),
        EmbedderSpec::Remote { endpoint } => Arc::new(RemoteEmbedder::connect(endpoint)?),
    })
}

/// A source of captures for one person.
#[derive(Clone, Debug)]
pub enum Subject {
    Synthetic { id: IdentityParams, jitter: f64 },
    /// Image files with `.lm` sidecars, cycled in order.
    Files(Vec<PathBuf>),
}

impl Subject {
    /// The `k`-th capture. Capture 0 is the enrollment capture.
    pub fn capture(&self, k: usize) -> Result<Capture> {
        match self {
            Subject::Synthetic { id, jitter } => Ok(render_capture(
                id,
                rng::derive_index(id.seed, k as u64),
                *jitter,
            )?),
            Subject::Files(files) => load_capture(&files[k % files.len()]),
        }
    }

    pub fn captures(&self, default: usize) -> usize {
        match self {
            Subject::Synthetic { .. } => default,
            Subject::Files(f) => f.len(),
        }
    }
}

fn load_capture(path: &Path) -> Result<Capture> {
    let image = read_image(path)?;
    let landmarks =
        LandmarkSet::read_sidecar(path.with_extension("lm"), (image.width(), image.height()))?;
    let identity_id = path
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Capture {
        image,
        landmarks,
        identity_id,
    })
}

/// The calibration population.
#[derive(Clone, Debug)]
pub struct Population {
    subjects: Vec<Subject>,
    captures: usize,
}

impl Population {
    /// Synthetic identities, or a directory holding one subdirectory per
    /// identity with `*.pgm`/`*.ppm` captures and `.lm` sidecars.
    pub fn load(spec: &PopulationSpec) -> Result<Self> {
        match spec {
            PopulationSpec::Synthetic {
                identities,
                captures,
                jitter,
                seed,
            } => {
                let key = rng::derive(*seed, "population");
                let subjects = (0..*identities as u64)
                    .map(|i| Subject::Synthetic {
                        id: sample_identity(rng::derive_index(key, i)),
                        jitter: *jitter,
                    })
                    .collect();
                Ok(Self {
                    subjects,
                    captures: *captures,
                })
            }
            PopulationSpec::Directory { path } => Self::from_dir(path),
        }
    }

    fn from_dir(dir: &Path) -> Result<Self> {
        let invalid = |m: String| Error::Scenario(ScenarioError::Invalid(m));
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        dirs.retain(|p| p.is_dir());
        dirs.sort();
        let mut subjects = Vec::new();
        for d in dirs {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&d)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            files.retain(|p| {
                matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm"))
                    && p.with_extension("lm").is_file()
            });
            files.sort();
            if files.len() < 2 {
                return Err(invalid(format!(
                    "{}: each identity needs at least 2 captures with sidecars",
                    d.display()
                )));
            }
            subjects.push(Subject::Files(files));
        }
        if subjects.len() < 2 {
            return Err(invalid(format!("{}: need at least 2 identity directories", dir.display())));
        }
        Ok(Self {
            subjects,
            captures: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn subject(&self, i: usize) -> &Subject {
        &self.subjects[i]
    }

    /// Victim and attacker of attack run `seed`: two distinct members,
    /// the victim cycling through the population.
    pub fn attack_pair(&self, seed: u64) -> (Subject, Subject) {
        let n = self.len() as u64;
        let v = seed % n;
        let a = (v + 1 + (seed / n) % (n - 1)) % n;
        (
            self.subjects[v as usize].clone(),
            self.subjects[a as usize].clone(),
        )
    }

    fn captures_of(&self, i: usize) -> usize {
        self.subjects[i].captures(self.captures)
    }
}

/// Per-identity protection applied before embedding.
#[derive(Clone, Debug)]
pub enum Protector {
    Static(TransformSpec),
    Morph { rf: RandomFace, alpha: MorphParams },
}

impl Protector {
    pub fn apply(&self, c: &Capture) -> Result<Image> {
        match self {
            Protector::Static(t) => Ok(apply_transform(&c.image, t)?),
            Protector::Morph { rf, alpha } => Ok(morph(
                &c.image,
                &c.landmarks,
                &rf.image,
                &rf.landmarks,
                *alpha,
            )?),
        }
    }
}

fn face_source(spec: &RandomFaceSpec, label: &str) -> Result<Box<dyn RandomFaceSource>> {
    Ok(match spec {
        RandomFaceSpec::Synthetic { domain, seed } => {
            Box::new(SyntheticFaces::new(rng::derive(*seed, label), *domain))
        }
        RandomFaceSpec::Directory { path } => {
            Box::new(DirectoryFaces::open(path, rng::derive(0, label))?)
        }
    })
}

fn protectors(spec: &ScenarioSpec, n: usize) -> Result<Vec<Protector>> {
    if let Some(t) = spec.effective_transform() {
        return Ok((0..n as u64)
            .map(|i| {
                Protector::Static(TransformSpec {
                    seed: rng::derive_index(t.seed, i),
                    ..t
                })
            })
            .collect());
    }
    let rf_spec = spec
        .random_faces
        .as_ref()
        .ok_or_else(|| ScenarioError::Invalid(format!("{}: otb requires random_faces", spec.name)))?;
    let mut source = face_source(rf_spec, "calibration")?;
    let alpha = spec.effective_alpha();
    (0..n)
        .map(|_| {
            Ok(Protector::Morph {
                rf: source.next_face()?,
                alpha,
            })
        })
        .collect()
}

/// Ordered impostor pairs `(probe identity, reference identity)`, thinned
/// with an even stride when more than `cap` exist.
pub fn impostor_pairs(identities: usize, cap: usize) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = (0..identities)
        .flat_map(|r| (0..identities).filter(move |&p| p != r).map(move |p| (p, r)))
        .collect();
    if all.len() <= cap {
        return all;
    }
    (0..cap).map(|k| all[k * all.len() / cap]).collect()
}

/// Genuine and impostor dissimilarities over the population.
///
/// Each identity enrolls capture 0 under its own protector. Genuine probes
/// are its remaining captures; impostors present their capture 0 through
/// the reference identity's protector, as a holder of that identity's
/// auxiliary data would.
pub fn calibration_scores(
    spec: &ScenarioSpec,
    population: &Population,
    embedder: &dyn Embedder,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = population.len();
    let prot = protectors(spec, n)?;
    let protected_embedding = |subject: usize, capture: usize, via: usize| -> Result<Embedding> {
        let c = population.subject(subject).capture(capture)?;
        Ok(embedder.embed(&prot[via].apply(&c)?)?)
    };
    let refs: Vec<Embedding> = (0..n)
        .into_par_iter()
        .map(|i| protected_embedding(i, 0, i))
        .collect::<Result<_>>()?;
    let genuine: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (1..population.captures_of(i))
                .map(|j| Ok(distance(&protected_embedding(i, j, i)?, &refs[i])?))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let impostor: Vec<f64> = impostor_pairs(n, spec.impostor_pair_cap)
        .into_par_iter()
        .map(|(p, r)| Ok(distance(&protected_embedding(p, 0, r)?, &refs[r])?))
        .collect::<Result<_>>()?;
    Ok((genuine.into_iter().flatten().collect(), impostor))
}

/// Calibration scores, their metrics and the operating threshold.
#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub report: MetricsReport,
    #[serde(with = "crate::eval::threshold_serde")]
    pub threshold: f64,
}

impl Calibration {
    pub fn from_scores(spec: &ScenarioSpec, genuine: Vec<f64>, impostor: Vec<f64>) -> Result<Self> {
        let report = MetricsReport::compute(&genuine, &impostor, &[])?;
        let threshold = report.threshold(spec.threshold_policy);
        Ok(Self {
            genuine,
            impostor,
            report,
            threshold,
        })
    }
}

/// Validates `spec`, builds its embedder and population, and calibrates.
pub fn calibrate(spec: &ScenarioSpec) -> Result<Calibration> {
    spec.validate()?;
    let embedder = build_embedder(&spec.embedder)?;
    let population = Population::load(&spec.population)?;
    let (g, i) = calibration_scores(spec, &population, embedder.as_ref())?;
    Calibration::from_scores(spec, g, i)
}

/// The system as seen from one attack run.
trait Target {
    /// Runs the victim's own verification for `session`; returns its score.
    fn genuine(&mut self, session: u64) -> Result<Option<f64>>;
    /// Score leaked for an injected probe, with the reference epoch.
    fn leak(&mut self, probe: &Image) -> Result<(f64, u64)>;
}

struct StaticTarget<'a> {
    embedder: &'a dyn Embedder,
    transform: TransformSpec,
    reference: Embedding,
    victim: Subject,
}

impl StaticTarget<'_> {
    fn score(&self, img: &Image) -> Result<f64> {
        let e = self.embedder.embed(&apply_transform(img, &self.transform)?)?;
        Ok(distance(&e, &self.reference)?)
    }
}

impl Target for StaticTarget<'_> {
    fn genuine(&mut self, session: u64) -> Result<Option<f64>> {
        let c = self.victim.capture(session as usize)?;
        Ok(Some(self.score(&c.image)?))
    }

    /// The transform and its auxiliary data are static, so the attacker
    /// runs its probe through them before injecting.
    fn leak(&mut self, probe: &Image) -> Result<(f64, u64)> {
        Ok((self.score(probe)?, 0))
    }
}

struct OtbTarget {
    client: Client,
    server: Server,
    ttp: Ttp,
    clock: ManualClock,
    account: u64,
    victim: Subject,
    threshold: f64,
    record: bool,
    reports: Vec<SessionReport>,
}

impl OtbTarget {
    fn enroll(mut self) -> Result<Self> {
        self.refill()?;
        let req = self.client.enroll_request(&self.victim.capture(0)?)?;
        let (resp, account) = self
            .server
            .enroll(&req, self.clock.now())
            .map_err(|r| Error::Runtime(format!("enrollment refused: {}", r.reason.as_str())))?;
        self.client.enroll_finish(&resp)?;
        self.account = account;
        Ok(self)
    }

    fn refill(&mut self) -> Result<()> {
        let now = self.clock.now();
        self.client.discard_expired(now);
        if self.client.pool_len() < 2 {
            let set = self.ttp.issue(&self.client.public_key(), POOL_BATCH, now)?;
            self.client.add_pseudonyms(set);
        }
        Ok(())
    }
}

impl Target for OtbTarget {
    fn genuine(&mut self, session: u64) -> Result<Option<f64>> {
        self.clock.advance(SESSION_INTERVAL);
        self.refill()?;
        let capture = self.victim.capture(session as usize)?;
        let report = run_session(
            session,
            &mut self.client,
            &self.server,
            Presentation::Genuine(&capture),
            self.threshold,
            self.clock.now(),
            FaultPlan::none(),
        )?;
        if !matches!(report.outcome, Outcome::Accepted | Outcome::Rejected) {
            return Err(Error::Runtime(format!(
                "session {session} ended with {:?}",
                report.outcome
            )));
        }
        let score = report.score;
        if self.record {
            self.reports.push(report);
        }
        Ok(score)
    }

    fn leak(&mut self, probe: &Image) -> Result<(f64, u64)> {
        Ok(self.server.leak_score(self.account, probe)?)
    }
}

/// One seeded attack run.
#[derive(Clone, Debug)]
pub struct AttackRun {
    pub trace: AttackTrace,
    /// Protocol transcripts of the victim's sessions, when recorded.
    pub protocol: Vec<SessionReport>,
}

/// Attacks one victim for `spec.attack.budget` sessions.
///
/// Every session first runs the victim's genuine verification, then leaks
/// the scores of the attacker's probes against the live reference. Static
/// baselines pass the probe through the victim's transform; under rotation
/// the random face is unknown to the attacker, who injects the probe at the
/// comparator input.
pub fn run_attack(
    spec: &ScenarioSpec,
    embedder: Arc<dyn Embedder>,
    population: &Population,
    threshold: f64,
    seed: u64,
    record_protocol: bool,
) -> Result<AttackRun> {
    let (victim, attacker) = population.attack_pair(seed);
    let start = attacker.capture(0)?.image;
    let cfg = spec.attack;
    if spec.kind == ScenarioKind::Otb {
        let rf_spec = spec.random_faces.as_ref().ok_or_else(|| {
            ScenarioError::Invalid(format!("{}: otb requires random_faces", spec.name))
        })?;
        let key = rng::derive(seed, "attack/crypto");
        let faces = face_source(rf_spec, &format!("attack/{seed}"))?;
        let ttp = Ttp::new(
            "ttp",
            Box::new(StdCrypto::from_seed(rng::derive(key, "ttp"))),
            faces,
            PSEUDONYM_TTL,
        );
        let server = Server::new(
            "server",
            ttp.public_key(),
            Box::new(StdCrypto::from_seed(rng::derive(key, "server"))),
            embedder,
        );
        let client = Client::new(
            "victim",
            Box::new(StdCrypto::from_seed(rng::derive(key, "client"))),
        )
        .with_alpha(spec.effective_alpha());
        let mut target = OtbTarget {
            client,
            server,
            ttp,
            clock: ManualClock::new(START_TIME),
            account: 0,
            victim,
            threshold,
            record: record_protocol,
            reports: Vec::new(),
        }
        .enroll()?;
        let trace = drive(&mut target, start, &cfg, threshold, spec, seed)?;
        Ok(AttackRun {
            trace,
            protocol: target.reports,
        })
    } else {
        let t = spec.effective_transform().expect("baseline has a transform");
        let transform = TransformSpec {
            seed: rng::derive(seed, "attack/ad"),
            ..t
        };
        let reference = embedder.embed(&apply_transform(&victim.capture(0)?.image, &transform)?)?;
        let mut target = StaticTarget {
            embedder: embedder.as_ref(),
            transform,
            reference,
            victim,
        };
        let trace = drive(&mut target, start, &cfg, threshold, spec, seed)?;
        Ok(AttackRun {
            trace,
            protocol: Vec::new(),
        })
    }
}

fn drive(
    target: &mut dyn Target,
    start: Image,
    cfg: &AttackConfig,
    threshold: f64,
    spec: &ScenarioSpec,
    seed: u64,
) -> Result<AttackTrace> {
    let mut rng = rng::stream(seed, "attack/perturb");
    let mut current = start;
    let mut best: Option<f64> = None;
    let mut records = Vec::with_capacity(cfg.budget);
    for session in 1..=cfg.budget as u64 {
        let genuine = target.genuine(session)?;
        let mut lowest = f64::INFINITY;
        let mut epoch = 0;
        for _ in 0..cfg.perturbations_per_session {
            let queried = match best {
                None => {
                    let (s, e) = target.leak(&current)?;
                    epoch = e;
                    best = Some(s);
                    s
                }
                Some(b) => {
                    let mut oracle = |p: &Image| -> Result<f64> {
                        let (s, e) = target.leak(p)?;
                        epoch = e;
                        Ok(s)
                    };
                    let step = hill_climb_step(&current, b, &mut oracle, cfg, &mut rng)?;
                    current = step.image;
                    best = Some(step.score);
                    step.queried
                }
            };
            lowest = lowest.min(queried);
        }
        records.push(SessionRecord {
            session,
            score: lowest,
            best: best.unwrap_or(lowest),
            threshold,
            accepted: lowest <= threshold,
            epoch,
            genuine,
        });
    }
    Ok(AttackTrace {
        scenario: spec.name.clone(),
        seed,
        records,
    })
}

/// Calibration plus every seeded attack run of one scenario.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub spec: ScenarioSpec,
    pub calibration: Calibration,
    pub traces: Vec<AttackTrace>,
    /// Protocol transcripts of the first seed, when requested.
    pub protocol: Vec<SessionReport>,
}

impl ScenarioRun {
    /// Metrics over the calibration scores and attack traces.
    pub fn metrics(&self) -> Result<MetricsReport> {
        Ok(MetricsReport::compute(
            &self.calibration.genuine,
            &self.calibration.impostor,
            &self.traces,
        )?)
    }
}

/// Calibrates `spec` and runs one attack per seed, in parallel.
pub fn run_scenario(spec: &ScenarioSpec, seeds: &[u64], record_protocol: bool) -> Result<ScenarioRun> {
    spec.validate()?;
    let embedder = build_embedder(&spec.embedder)?;
    let population = Population::load(&spec.population)?;
    let (g, i) = calibration_scores(spec, &population, embedder.as_ref())?;
    let calibration = Calibration::from_scores(spec, g, i)?;
    let threshold = calibration.threshold;
    let runs: Vec<AttackRun> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            run_attack(
                spec,
                Arc::clone(&embedder),
                &population,
                threshold,
                seed,
                record_protocol && k == 0,
            )
        })
        .collect::<Result<_>>()?;
    let mut protocol = Vec::new();
    let mut traces = Vec::with_capacity(runs.len());
    for run in runs {
        if protocol.is_empty() {
            protocol = run.protocol;
        }
        traces.push(run.trace);
    }
    Ok(ScenarioRun {
        spec: spec.clone(),
        calibration,
        traces,
        protocol,
    })
}
