//! Cryptographic primitives behind a provider trait.
//!
//! [`StdCrypto`] uses X25519 + ChaCha20-Poly1305 for public-key encryption,
//! ChaCha20-Poly1305 for symmetric authenticated encryption, Ed25519 for
//! signatures and HKDF-SHA256 for key derivation. [`SimCrypto`] is a fast,
//! fully deterministic stand-in built from SHA-256 that keeps the functional
//! contracts (round trips, tamper detection) but offers no security: anyone
//! holding a public key can decrypt and forge. It exists for unit tests and
//! large simulations only.

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::ChaCha20Poly1305;
use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use hkdf::Hkdf;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng::SimRng;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("authenticated decryption failed")]
    Decrypt,
    #[error("ciphertext too short")]
    Truncated,
}

macro_rules! fixed_bytes {
    ($(#[$m:meta])* $name:ident, $n:expr) => {
        $(#[$m])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub struct $name(pub [u8; $n]);

        impl $name {
            pub const LEN: usize = $n;

            pub fn as_bytes(&self) -> &[u8; $n] {
                &self.0
            }

            pub fn from_slice(b: &[u8]) -> Option<Self> {
                b.try_into().ok().map(Self)
            }

            pub fn to_hex(&self) -> String {
                self.0.iter().map(|b| format!("{b:02x}")).collect()
            }
        }

        impl std::fmt::Debug for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }
    };
}

fixed_bytes!(
    /// 128-bit opaque temporary identity.
    TemporaryId,
    16
);
fixed_bytes!(
    /// Single-use session nonce.
    Nonce,
    16
);
fixed_bytes!(
    /// 256-bit symmetric key.
    SymKey,
    32
);

/// Encryption and verification halves of a party's public key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKey {
    pub enc: [u8; 32],
    pub sig: [u8; 32],
}

#[derive(Clone)]
pub struct SecretKey {
    enc: [u8; 32],
    sig: [u8; 32],
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

/// Injected cryptography. Methods that consume randomness take `&mut self`.
pub trait CryptoProvider: Send {
    fn generate_keypair(&mut self) -> KeyPair;

    fn asym_encrypt(&mut self, pk: &PublicKey, msg: &[u8]) -> Vec<u8>;

    fn asym_decrypt(&self, sk: &SecretKey, ct: &[u8]) -> Result<Vec<u8>, CryptoError>;

    fn sign(&self, sk: &SecretKey, msg: &[u8]) -> Vec<u8>;

    fn verify(&self, pk: &PublicKey, msg: &[u8], sig: &[u8]) -> bool;

    fn sym_encrypt(&mut self, key: &SymKey, msg: &[u8]) -> Vec<u8>;

    fn sym_decrypt(&self, key: &SymKey, ct: &[u8]) -> Result<Vec<u8>, CryptoError>;

    /// Derives a key from the unambiguous length-prefixed concatenation of `parts`.
    fn kdf(&self, parts: &[&[u8]]) -> SymKey;

    fn fill_random(&mut self, out: &mut [u8]);

    fn random_nonce(&mut self) -> Nonce {
        let mut b = [0u8; 16];
        self.fill_random(&mut b);
        Nonce(b)
    }

    fn random_key(&mut self) -> SymKey {
        let mut b = [0u8; 32];
        self.fill_random(&mut b);
        SymKey(b)
    }

    fn random_tid(&mut self) -> TemporaryId {
        let mut b = [0u8; 16];
        self.fill_random(&mut b);
        TemporaryId(b)
    }
}

/// `u32` big-endian length followed by the bytes, for each part.
pub fn length_prefixed(parts: &[&[u8]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len() + 4).sum());
    for p in parts {
        out.extend_from_slice(&(p.len() as u32).to_be_bytes());
        out.extend_from_slice(p);
    }
    out
}

pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

/// Production primitives driven by a ChaCha20 CSPRNG.
pub struct StdCrypto {
    rng: ChaCha20Rng,
}

impl StdCrypto {
    /// Seeded instance; reproducible, for simulations.
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Instance seeded from the operating system.
    pub fn from_entropy() -> Self {
        Self {
            rng: ChaCha20Rng::from_entropy(),
        }
    }

    fn aead(key: &[u8; 32]) -> ChaCha20Poly1305 {
        ChaCha20Poly1305::new(key.into())
    }

    fn ecies_key(shared: &[u8; 32], eph: &[u8; 32], recipient: &[u8; 32]) -> [u8; 32] {
        let hk = Hkdf::<Sha256>::new(None, shared);
        let mut okm = [0u8; 32];
        let info = [b"otbm/ecies".as_slice(), eph, recipient].concat();
        hk.expand(&info, &mut okm).expect("32 bytes is a valid HKDF length");
        okm
    }
}

const AEAD_NONCE: usize = 12;

impl CryptoProvider for StdCrypto {
    fn generate_keypair(&mut self) -> KeyPair {
        let mut enc = [0u8; 32];
        let mut sig = [0u8; 32];
        self.rng.fill_bytes(&mut enc);
        self.rng.fill_bytes(&mut sig);
        let enc_pub = x25519_dalek::PublicKey::from(&x25519_dalek::StaticSecret::from(enc));
        let sig_pub = SigningKey::from_bytes(&sig).verifying_key();
        KeyPair {
            public: PublicKey {
                enc: enc_pub.to_bytes(),
                sig: sig_pub.to_bytes(),
            },
            secret: SecretKey { enc, sig },
        }
    }

    fn asym_encrypt(&mut self, pk: &PublicKey, msg: &[u8]) -> Vec<u8> {
        let mut eph = [0u8; 32];
        self.rng.fill_bytes(&mut eph);
        let eph = x25519_dalek::StaticSecret::from(eph);
        let eph_pub = x25519_dalek::PublicKey::from(&eph).to_bytes();
        let shared = eph.diffie_hellman(&x25519_dalek::PublicKey::from(pk.enc));
        let key = Self::ecies_key(shared.as_bytes(), &eph_pub, &pk.enc);
        // The key is unique per message, so a fixed nonce is safe.
        let ct = Self::aead(&key)
            .encrypt(&[0u8; AEAD_NONCE].into(), msg)
            .expect("in-memory encryption");
        [eph_pub.as_slice(), &ct].concat()
    }

    fn asym_decrypt(&self, sk: &SecretKey, ct: &[u8]) -> Result<Vec<u8>, CryptoError> {
        if ct.len() < 32 + 16 {
            return Err(CryptoError::Truncated);
        }
        let (eph_pub, body) = ct.split_at(32);
        let eph_pub: [u8; 32] = eph_pub.try_into().expect("split at 32");
        let secret = x25519_dalek::StaticSecret::from(sk.enc);
        let own_pub = x25519_dalek::PublicKey::from(&secret).to_bytes();
        let shared = secret.diffie_hellman(&x25519_dalek::PublicKey::from(eph_pub));
        let key = Self::ecies_key(shared.as_bytes(), &eph_pub, &own_pub);
        Self::aead(&key)
            .decrypt(&[0u8; AEAD_NONCE].into(), body)
            .map_err(|_| CryptoError::Decrypt)
    }

    fn sign(&self, sk: &SecretKey, msg: &[u8]) -> Vec<u8> {
        SigningKey::from_bytes(&sk.sig).sign(msg).to_bytes().to_vec()
    }

    fn verify(&self, pk: &PublicKey, msg: &[u8], sig: &[u8]) -> bool {
        let Ok(vk) = VerifyingKey::from_bytes(&pk.sig) else {
            return false;
        };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(sig) else {
            return false;
        };
        vk.verify_strict(msg, &sig).is_ok()
    }

    fn sym_encrypt(&mut self, key: &SymKey, msg: &[u8]) -> Vec<u8> {
        let mut nonce = [0u8; AEAD_NONCE];
        self.rng.fill_bytes(&mut nonce);
        let ct = Self::aead(&key.0)
            .encrypt(&nonce.into(), msg)
            .expect("in-memory encryption");
        [nonce.as_slice(), &ct].concat()
    }

    fn sym_decrypt(&self, key: &SymKey, ct: &[u8]) -> Result<Vec<u8>, CryptoError> {
        if ct.len() < AEAD_NONCE + 16 {
            return Err(CryptoError::Truncated);
        }
        let (nonce, body) = ct.split_at(AEAD_NONCE);
        let nonce: [u8; AEAD_NONCE] = nonce.try_into().expect("split at nonce length");
        Self::aead(&key.0)
            .decrypt(&nonce.into(), body)
            .map_err(|_| CryptoError::Decrypt)
    }

    fn kdf(&self, parts: &[&[u8]]) -> SymKey {
        let hk = Hkdf::<Sha256>::new(Some(b"otbm/kdf"), &length_prefixed(parts));
        let mut okm = [0u8; 32];
        hk.expand(b"session key", &mut okm)
            .expect("32 bytes is a valid HKDF length");
        SymKey(okm)
    }

    fn fill_random(&mut self, out: &mut [u8]) {
        self.rng.fill_bytes(out);
    }
}

/// Deterministic, insecure test double. See the module docs.
pub struct SimCrypto {
    rng: SimRng,
}

impl SimCrypto {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: SimRng::seed_from_u64(seed),
        }
    }

    fn tagged(tag: &[u8], parts: &[&[u8]]) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(tag);
        h.update(length_prefixed(parts));
        h.finalize().into()
    }

    fn keystream_xor(key: &[u8], nonce: &[u8], data: &mut [u8]) {
        for (i, chunk) in data.chunks_mut(32).enumerate() {
            let block = Self::tagged(b"sim/stream", &[key, nonce, &(i as u64).to_be_bytes()]);
            for (d, k) in chunk.iter_mut().zip(block) {
                *d ^= k;
            }
        }
    }

    fn seal(key: &[u8], nonce: &[u8; 16], msg: &[u8]) -> Vec<u8> {
        let mut body = msg.to_vec();
        Self::keystream_xor(key, nonce, &mut body);
        let tag = Self::tagged(b"sim/tag", &[key, nonce, &body]);
        [nonce.as_slice(), &body, &tag[..16]].concat()
    }

    fn open(key: &[u8], ct: &[u8]) -> Result<Vec<u8>, CryptoError> {
        if ct.len() < 32 {
            return Err(CryptoError::Truncated);
        }
        let (nonce, rest) = ct.split_at(16);
        let (body, tag) = rest.split_at(rest.len() - 16);
        if Self::tagged(b"sim/tag", &[key, nonce, body])[..16] != *tag {
            return Err(CryptoError::Decrypt);
        }
        let mut out = body.to_vec();
        Self::keystream_xor(key, nonce, &mut out);
        Ok(out)
    }

    fn public_of(secret: &SecretKey) -> PublicKey {
        PublicKey {
            enc: Self::tagged(b"sim/enc-pub", &[&secret.enc]),
            sig: Self::tagged(b"sim/sig-pub", &[&secret.sig]),
        }
    }
}

impl CryptoProvider for SimCrypto {
    fn generate_keypair(&mut self) -> KeyPair {
        let mut secret = SecretKey {
            enc: [0; 32],
            sig: [0; 32],
        };
        self.rng.fill_bytes(&mut secret.enc);
        self.rng.fill_bytes(&mut secret.sig);
        KeyPair {
            public: Self::public_of(&secret),
            secret,
        }
    }

    fn asym_encrypt(&mut self, pk: &PublicKey, msg: &[u8]) -> Vec<u8> {
        let mut nonce = [0u8; 16];
        self.rng.fill_bytes(&mut nonce);
        Self::seal(&pk.enc, &nonce, msg)
    }

    fn asym_decrypt(&self, sk: &SecretKey, ct: &[u8]) -> Result<Vec<u8>, CryptoError> {
        Self::open(&Self::public_of(sk).enc, ct)
    }

    fn sign(&self, sk: &SecretKey, msg: &[u8]) -> Vec<u8> {
        Self::tagged(b"sim/sig", &[&Self::public_of(sk).sig, msg]).to_vec()
    }

    fn verify(&self, pk: &PublicKey, msg: &[u8], sig: &[u8]) -> bool {
        Self::tagged(b"sim/sig", &[&pk.sig, msg]).as_slice() == sig
    }

    fn sym_encrypt(&mut self, key: &SymKey, msg: &[u8]) -> Vec<u8> {
        let mut nonce = [0u8; 16];
        self.rng.fill_bytes(&mut nonce);
        Self::seal(&key.0, &nonce, msg)
    }

    fn sym_decrypt(&self, key: &SymKey, ct: &[u8]) -> Result<Vec<u8>, CryptoError> {
        Self::open(&key.0, ct)
    }

    fn kdf(&self, parts: &[&[u8]]) -> SymKey {
        SymKey(Self::tagged(b"sim/kdf", parts))
    }

    fn fill_random(&mut self, out: &mut [u8]) {
        self.rng.fill_bytes(out);
    }
}
