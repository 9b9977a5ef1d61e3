use serde::Serialize;

use crate::morph::LandmarkSet;
use crate::raster::{decode_pnm, encode_pnm, Image};

use super::crypto::{
    length_prefixed, sha256, CryptoProvider, Nonce, PublicKey, SecretKey, SymKey, TemporaryId,
};
use super::wire::{self, Reader, Writer};
use super::ProtocolError;

/// A random face (the rotating auxiliary data) with its landmarks.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomFace {
    pub image: Image,
    pub landmarks: LandmarkSet,
}

impl RandomFace {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new(wire::TAG_RANDOM_FACE)
            .bytes(&encode_pnm(&self.image))
            .str(&self.landmarks.to_sidecar())
            .finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(buf, wire::TAG_RANDOM_FACE, "random face")?;
        let image = decode_image(r.bytes()?, "random face")?;
        let text = r.str()?;
        r.end()?;
        let landmarks = LandmarkSet::from_sidecar(&text, (image.width(), image.height()))
            .map_err(|e| ProtocolError::Wire {
                what: "random face",
                detail: e.to_string(),
            })?;
        Ok(Self { image, landmarks })
    }

    /// SHA-256 of the canonical encoding.
    pub fn digest(&self) -> [u8; 32] {
        sha256(&self.encode())
    }
}

fn decode_image(b: &[u8], what: &'static str) -> Result<Image, ProtocolError> {
    decode_pnm(b).map_err(|e| ProtocolError::Wire {
        what,
        detail: e.to_string(),
    })
}

/// Asymmetrically wraps a fresh content key and encrypts `msg` under it.
pub fn hybrid_encrypt(crypto: &mut dyn CryptoProvider, pk: &PublicKey, msg: &[u8]) -> Vec<u8> {
    let content_key = crypto.random_key();
    let wrapped = crypto.asym_encrypt(pk, content_key.as_bytes());
    let body = crypto.sym_encrypt(&content_key, msg);
    Writer::new(wire::TAG_HYBRID)
        .bytes(&wrapped)
        .bytes(&body)
        .finish()
}

pub fn hybrid_decrypt(
    crypto: &dyn CryptoProvider,
    sk: &SecretKey,
    ct: &[u8],
) -> Result<Vec<u8>, ProtocolError> {
    let mut r = Reader::new(ct, wire::TAG_HYBRID, "hybrid ciphertext")?;
    let wrapped = r.bytes()?;
    let body = r.bytes()?;
    r.end()?;
    let key = crypto.asym_decrypt(sk, wrapped)?;
    let key = SymKey::from_slice(&key).ok_or(ProtocolError::Wire {
        what: "hybrid ciphertext",
        detail: "content key is not 32 bytes".into(),
    })?;
    Ok(crypto.sym_decrypt(&key, body)?)
}

/// TTP-signed temporary identity carrying an encrypted random face.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pseudonym {
    pub tid: TemporaryId,
    pub enc_rf: Vec<u8>,
    pub pid_ttp: String,
    /// Expiry, absolute seconds.
    pub lifetime: u64,
    pub sig: Vec<u8>,
}

impl Pseudonym {
    /// The signed tuple: everything except the signature itself.
    pub fn signed_bytes(tid: &TemporaryId, enc_rf: &[u8], pid_ttp: &str, lifetime: u64) -> Vec<u8> {
        length_prefixed(&[
            tid.as_bytes(),
            enc_rf,
            pid_ttp.as_bytes(),
            &lifetime.to_be_bytes(),
        ])
    }

    pub fn to_be_signed(&self) -> Vec<u8> {
        Self::signed_bytes(&self.tid, &self.enc_rf, &self.pid_ttp, self.lifetime)
    }

    /// SHA-256 of the encrypted random-face payload.
    pub fn payload_digest(&self) -> [u8; 32] {
        sha256(&self.enc_rf)
    }

    pub fn encode(&self) -> Vec<u8> {
        Writer::new(wire::TAG_PSEUDONYM)
            .bytes(self.tid.as_bytes())
            .bytes(&self.enc_rf)
            .str(&self.pid_ttp)
            .u64(self.lifetime)
            .bytes(&self.sig)
            .finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(buf, wire::TAG_PSEUDONYM, "pseudonym")?;
        let pn = Self {
            tid: r.tid()?,
            enc_rf: r.bytes()?.to_vec(),
            pid_ttp: r.str()?,
            lifetime: r.u64()?,
            sig: r.bytes()?.to_vec(),
        };
        r.end()?;
        Ok(pn)
    }
}

/// Client to server at enrollment: identity label, enrollment morph, pseudonym.
#[derive(Clone, Debug, PartialEq)]
pub struct EnrollRequest {
    pub id_c: String,
    pub mf: Image,
    pub pn: Pseudonym,
}

impl EnrollRequest {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new(wire::TAG_ENROLL_REQUEST)
            .str(&self.id_c)
            .bytes(&encode_pnm(&self.mf))
            .bytes(&self.pn.encode())
            .finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(buf, wire::TAG_ENROLL_REQUEST, "enroll request")?;
        let id_c = r.str()?;
        let mf = decode_image(r.bytes()?, "enroll request")?;
        let pn = Pseudonym::decode(r.bytes()?)?;
        r.end()?;
        Ok(Self { id_c, mf, pn })
    }
}

/// Server to client at enrollment, over the assumed secure channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnrollResponse {
    pub id_s: String,
    pub n_s: Nonce,
    pub sk: SymKey,
}

impl EnrollResponse {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new(wire::TAG_ENROLL_RESPONSE)
            .str(&self.id_s)
            .bytes(self.n_s.as_bytes())
            .bytes(self.sk.as_bytes())
            .finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(buf, wire::TAG_ENROLL_RESPONSE, "enroll response")?;
        let m = Self {
            id_s: r.str()?,
            n_s: r.nonce()?,
            sk: r.key()?,
        };
        r.end()?;
        Ok(m)
    }
}

/// Session opener: client label, client nonce, fresh pseudonym, current tid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct M1 {
    pub id_c: String,
    pub n_c: Nonce,
    pub pn: Pseudonym,
    pub tid_prev: TemporaryId,
}

impl M1 {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new(wire::TAG_M1)
            .str(&self.id_c)
            .bytes(self.n_c.as_bytes())
            .bytes(&self.pn.encode())
            .bytes(self.tid_prev.as_bytes())
            .finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(buf, wire::TAG_M1, "M1")?;
        let m = Self {
            id_c: r.str()?,
            n_c: r.nonce()?,
            pn: Pseudonym::decode(r.bytes()?)?,
            tid_prev: r.tid()?,
        };
        r.end()?;
        Ok(m)
    }
}

/// Server challenge: `resp_s` is the current tid encrypted under the current key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct M2 {
    pub id_s: String,
    pub n_s: Nonce,
    pub resp_s: Vec<u8>,
}

impl M2 {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new(wire::TAG_M2)
            .str(&self.id_s)
            .bytes(self.n_s.as_bytes())
            .bytes(&self.resp_s)
            .finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(buf, wire::TAG_M2, "M2")?;
        let m = Self {
            id_s: r.str()?,
            n_s: r.nonce()?,
            resp_s: r.bytes()?.to_vec(),
        };
        r.end()?;
        Ok(m)
    }
}

/// Client response carrying both morphs and the derived next key, encrypted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct M3 {
    pub resp_c: Vec<u8>,
}

impl M3 {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new(wire::TAG_M3).bytes(&self.resp_c).finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(buf, wire::TAG_M3, "M3")?;
        let m = Self {
            resp_c: r.bytes()?.to_vec(),
        };
        r.end()?;
        Ok(m)
    }
}

/// Verdict: the new tid (accept) or the old tid (reject), under the next key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct M4 {
    pub resp_s: Vec<u8>,
}

impl M4 {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new(wire::TAG_M4).bytes(&self.resp_s).finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(buf, wire::TAG_M4, "M4")?;
        let m = Self {
            resp_s: r.bytes()?.to_vec(),
        };
        r.end()?;
        Ok(m)
    }
}

/// Plaintext of `resp_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct RespPayload {
    /// Morph with the current random face: the probe.
    pub mf_current: Image,
    /// Morph with the incoming random face: the next reference.
    pub mf_next: Image,
    pub sk_new: SymKey,
}

impl RespPayload {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new(wire::TAG_RESP_C)
            .bytes(&encode_pnm(&self.mf_current))
            .bytes(&encode_pnm(&self.mf_next))
            .bytes(self.sk_new.as_bytes())
            .finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(buf, wire::TAG_RESP_C, "resp_c")?;
        let m = Self {
            mf_current: decode_image(r.bytes()?, "resp_c")?,
            mf_next: decode_image(r.bytes()?, "resp_c")?,
            sk_new: r.key()?,
        };
        r.end()?;
        Ok(m)
    }
}

/// Why the server refused. Logged in full; on the wire every refusal is the
/// same single byte.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefusalReason {
    Expired,
    BadSignature,
    UnknownTid,
    ReusedTid,
    Busy,
    DecryptFailed,
    Malformed,
    KeyMismatch,
}

impl RefusalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RefusalReason::Expired => "expired",
            RefusalReason::BadSignature => "bad-signature",
            RefusalReason::UnknownTid => "unknown-tid",
            RefusalReason::ReusedTid => "reused-tid",
            RefusalReason::Busy => "busy",
            RefusalReason::DecryptFailed => "decrypt-failed",
            RefusalReason::Malformed => "malformed",
            RefusalReason::KeyMismatch => "key-mismatch",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Refusal {
    pub reason: RefusalReason,
}

impl Refusal {
    pub fn encode(&self) -> Vec<u8> {
        vec![wire::TAG_REFUSAL]
    }

    pub fn is_refusal(buf: &[u8]) -> bool {
        buf == [wire::TAG_REFUSAL]
    }
}
