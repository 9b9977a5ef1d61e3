use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::morph::LandmarkSet;
use crate::raster::{read_image, Image};
use crate::rng;
use crate::synthface::{render_capture, sample_identity};

use super::crypto::{CryptoProvider, KeyPair, PublicKey};
use super::messages::{hybrid_encrypt, Pseudonym, RandomFace, RefusalReason};
use super::ProtocolError;

/// Supplier of random faces for pseudonyms.
pub trait RandomFaceSource: Send {
    fn next_face(&mut self) -> Result<RandomFace, ProtocolError>;
}

/// Visual family of synthetic random faces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceDomain {
    /// Plain toy faces from a seed domain disjoint from the client population.
    #[default]
    Plain,
    /// Toy faces with the lower face covered by a flat mask.
    Masked,
}

/// Canonical toy faces drawn from an endless seeded sequence.
#[derive(Clone, Debug)]
pub struct SyntheticFaces {
    key: u64,
    domain: FaceDomain,
    next: u64,
}

impl SyntheticFaces {
    pub fn new(seed: u64, domain: FaceDomain) -> Self {
        let label = match domain {
            FaceDomain::Plain => "random-faces/plain",
            FaceDomain::Masked => "random-faces/masked",
        };
        Self {
            key: rng::derive(seed, label),
            domain,
            next: 0,
        }
    }
}

impl RandomFaceSource for SyntheticFaces {
    fn next_face(&mut self) -> Result<RandomFace, ProtocolError> {
        let id = sample_identity(rng::derive_index(self.key, self.next));
        self.next += 1;
        let cap = render_capture(&id, 0, 0.0).map_err(|e| ProtocolError::FaceSource(e.to_string()))?;
        let mut face = RandomFace {
            image: cap.image,
            landmarks: cap.landmarks,
        };
        if self.domain == FaceDomain::Masked {
            face.image = mask_lower_face(&face.image, &face.landmarks);
        }
        Ok(face)
    }
}

/// Light flat mask over the face below the nose, located from the 16-point
/// toy landmark layout (oval points 0..8, nose tip 12).
pub fn mask_lower_face(img: &Image, lm: &LandmarkSet) -> Image {
    const MASK_LEVEL: u8 = 225;
    let p = lm.points();
    if p.len() < 13 {
        return img.clone();
    }
    let cx = (p[0].x + p[4].x) / 2.0;
    let cy = (p[2].y + p[6].y) / 2.0;
    let a = ((p[0].x - p[4].x) / 2.0).abs().max(1.0);
    let b = ((p[2].y - p[6].y) / 2.0).abs().max(1.0);
    let top = p[12].y + 2.0;
    let mut out = img.clone();
    let (w, ch) = (img.width(), img.channels());
    let data = out.data_mut();
    for y in 0..img.height() {
        let py = y as f64 + 0.5;
        if py < top {
            continue;
        }
        for x in 0..w {
            let (u, v) = ((x as f64 + 0.5 - cx) / a, (py - cy) / b);
            if u * u + v * v <= 1.0 {
                let i = (y * w + x) * ch;
                data[i..i + ch].fill(MASK_LEVEL);
            }
        }
    }
    out
}

/// Random faces read from a directory of `*.pgm`/`*.ppm` images, each with a
/// `.lm` landmark sidecar of the same stem. Files are visited in a seeded
/// shuffled order without repetition.
#[derive(Clone, Debug)]
pub struct DirectoryFaces {
    files: Vec<PathBuf>,
    next: usize,
}

impl DirectoryFaces {
    pub fn open(dir: impl AsRef<Path>, seed: u64) -> Result<Self, ProtocolError> {
        let mut files = Vec::new();
        collect_images(dir.as_ref(), &mut files)
            .map_err(|e| ProtocolError::FaceSource(format!("{}: {e}", dir.as_ref().display())))?;
        files.sort();
        if files.is_empty() {
            return Err(ProtocolError::FaceSource(format!(
                "no PGM/PPM images with landmark sidecars under {}",
                dir.as_ref().display()
            )));
        }
        files.shuffle(&mut rng::stream(seed, "random-faces/directory"));
        Ok(Self { files, next: 0 })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

fn collect_images(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_images(&path, out)?;
        } else if matches!(path.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm"))
            && path.with_extension("lm").is_file()
        {
            out.push(path);
        }
    }
    Ok(())
}

impl RandomFaceSource for DirectoryFaces {
    fn next_face(&mut self) -> Result<RandomFace, ProtocolError> {
        let path = self
            .files
            .get(self.next)
            .ok_or_else(|| ProtocolError::FaceSource("random-face directory exhausted".into()))?;
        self.next += 1;
        let err = |e: String| ProtocolError::FaceSource(format!("{}: {e}", path.display()));
        let image = read_image(path).map_err(|e| err(e.to_string()))?;
        let landmarks = LandmarkSet::read_sidecar(path.with_extension("lm"), (image.width(), image.height()))
            .map_err(|e| err(e.to_string()))?;
        Ok(RandomFace { image, landmarks })
    }
}

/// Trusted third party issuing pseudonym sets.
pub struct Ttp {
    pid: String,
    keys: KeyPair,
    crypto: Box<dyn CryptoProvider>,
    ttl: u64,
    faces: Box<dyn RandomFaceSource>,
    issued_tids: HashSet<[u8; 16]>,
    issued_faces: HashSet<[u8; 32]>,
}

/// Consecutive duplicate faces tolerated before the source counts as exhausted.
const MAX_DUPLICATE_DRAWS: usize = 64;

impl Ttp {
    /// `ttl` is the pseudonym lifetime in seconds from issuance.
    pub fn new(
        pid: impl Into<String>,
        mut crypto: Box<dyn CryptoProvider>,
        faces: Box<dyn RandomFaceSource>,
        ttl: u64,
    ) -> Self {
        let keys = crypto.generate_keypair();
        Self {
            pid: pid.into(),
            keys,
            crypto,
            ttl,
            faces,
            issued_tids: HashSet::new(),
            issued_faces: HashSet::new(),
        }
    }

    pub fn pid(&self) -> &str {
        &self.pid
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public
    }

    /// Issues `n` pseudonyms for the holder of `client_pub`. Random faces are
    /// never repeated across everything this TTP has issued.
    pub fn issue(
        &mut self,
        client_pub: &PublicKey,
        n: usize,
        now: u64,
    ) -> Result<Vec<Pseudonym>, ProtocolError> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let rf = self.fresh_face()?;
            let tid = loop {
                let t = self.crypto.random_tid();
                if self.issued_tids.insert(t.0) {
                    break t;
                }
            };
            let enc_rf = hybrid_encrypt(self.crypto.as_mut(), client_pub, &rf.encode());
            let lifetime = now.saturating_add(self.ttl);
            let sig = self.crypto.sign(
                &self.keys.secret,
                &Pseudonym::signed_bytes(&tid, &enc_rf, &self.pid, lifetime),
            );
            out.push(Pseudonym {
                tid,
                enc_rf,
                pid_ttp: self.pid.clone(),
                lifetime,
                sig,
            });
        }
        Ok(out)
    }

    fn fresh_face(&mut self) -> Result<RandomFace, ProtocolError> {
        for _ in 0..MAX_DUPLICATE_DRAWS {
            let rf = self.faces.next_face()?;
            if self.issued_faces.insert(rf.digest()) {
                return Ok(rf);
            }
        }
        Err(ProtocolError::FaceSource(
            "random-face source keeps repeating faces".into(),
        ))
    }
}

/// Lifetime and signature check; `Err` carries the logged refusal reason.
pub fn check_pseudonym(
    crypto: &dyn CryptoProvider,
    pn: &Pseudonym,
    ttp_pub: &PublicKey,
    now: u64,
) -> Result<(), RefusalReason> {
    if now >= pn.lifetime {
        return Err(RefusalReason::Expired);
    }
    if !crypto.verify(ttp_pub, &pn.to_be_signed(), &pn.sig) {
        return Err(RefusalReason::BadSignature);
    }
    Ok(())
}

pub fn verify_pseudonym(
    crypto: &dyn CryptoProvider,
    pn: &Pseudonym,
    ttp_pub: &PublicKey,
    now: u64,
) -> bool {
    check_pseudonym(crypto, pn, ttp_pub, now).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::crypto::SimCrypto;
    use crate::protocol::messages::hybrid_decrypt;

    fn ttp() -> Ttp {
        Ttp::new(
            "ttp-1",
            Box::new(SimCrypto::from_seed(1)),
            Box::new(SyntheticFaces::new(9, FaceDomain::Plain)),
            3600,
        )
    }

    #[test]
    fn issues_distinct_verifiable_pseudonyms() {
        let mut t = ttp();
        let mut c = SimCrypto::from_seed(2);
        let client = c.generate_keypair();
        let set = t.issue(&client.public, 5, 1000).unwrap();
        assert_eq!(set.len(), 5);
        let tids: HashSet<_> = set.iter().map(|p| p.tid).collect();
        assert_eq!(tids.len(), 5);
        let mut faces = HashSet::new();
        for pn in &set {
            assert!(verify_pseudonym(&c, pn, &t.public_key(), 1000));
            assert_eq!(pn.lifetime, 4600);
            let rf = RandomFace::decode(&hybrid_decrypt(&c, &client.secret, &pn.enc_rf).unwrap()).unwrap();
            assert!(faces.insert(rf.digest()));
        }
    }

    #[test]
    fn pseudonym_checks() {
        let mut t = ttp();
        let mut c = SimCrypto::from_seed(2);
        let client = c.generate_keypair();
        let pn = t.issue(&client.public, 1, 1000).unwrap().remove(0);
        let pk = t.public_key();
        assert_eq!(check_pseudonym(&c, &pn, &pk, 4599), Ok(()));
        assert_eq!(check_pseudonym(&c, &pn, &pk, 4600), Err(RefusalReason::Expired));
        let mut bad = pn.clone();
        bad.enc_rf[10] ^= 1;
        assert_eq!(check_pseudonym(&c, &bad, &pk, 1000), Err(RefusalReason::BadSignature));
        let mut bad = pn.clone();
        bad.pid_ttp = "ttp-2".into();
        assert!(!verify_pseudonym(&c, &bad, &pk, 1000));
        let mut bad = pn.clone();
        bad.lifetime += 1;
        assert!(!verify_pseudonym(&c, &bad, &pk, 1000));
        let other = c.generate_keypair();
        assert!(!verify_pseudonym(&c, &pn, &other.public, 1000));
    }

    #[test]
    fn masked_domain_differs_and_covers_lower_face() {
        let plain = SyntheticFaces::new(3, FaceDomain::Plain).next_face().unwrap();
        let masked = SyntheticFaces::new(3, FaceDomain::Masked).next_face().unwrap();
        assert_ne!(plain.image, masked.image);
        let m = masked.landmarks.points()[14];
        assert_eq!(masked.image.at(m.x as usize, m.y as usize), 225);
    }

    #[test]
    fn repeating_source_is_detected() {
        struct Same(RandomFace);
        impl RandomFaceSource for Same {
            fn next_face(&mut self) -> Result<RandomFace, ProtocolError> {
                Ok(self.0.clone())
            }
        }
        let face = SyntheticFaces::new(1, FaceDomain::Plain).next_face().unwrap();
        let mut t = Ttp::new("t", Box::new(SimCrypto::from_seed(1)), Box::new(Same(face)), 10);
        let pk = SimCrypto::from_seed(5).generate_keypair().public;
        assert!(t.issue(&pk, 1, 0).is_ok());
        assert!(matches!(t.issue(&pk, 1, 0), Err(ProtocolError::FaceSource(_))));
    }
}
