//! Simulation-grade cryptography: SHA-256 hashing, hash commitments and a
//! registry-mediated signature scheme.
//!
//! The signature is an HMAC-SHA256 tag under the signer's secret key; verification
//! goes through a trusted [`KeyRegistry`] that maps a public identifier to the
//! certified node and its verification secret. The registry stands in for a PKI:
//! a node that holds no certificate has no entry and cannot produce a verifiable
//! signature.

use std::collections::BTreeMap;
use std::fmt;

use hmac::{Hmac, Mac};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::model::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("commitment opening does not match")]
    OpeningMismatch,
    #[error("public key {0} is not registered")]
    UnknownKey(Digest),
    #[error("cannot commit to an empty bit string")]
    EmptyCommitment,
}

/// 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s).ok()?;
        Some(Self(v.try_into().ok()?))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex digits"))
    }
}

pub fn hash(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

/// Hashes a sequence of byte slices with length framing, so that
/// `["ab", "c"]` and `["a", "bc"]` differ.
pub fn hash_parts<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// A fixed-length string of bits.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let word = rng.next_u64();
            out.extend((0..64).map(|i| word >> i & 1 == 1).take(len - out.len()));
        }
        Self(out)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    /// Bitwise XOR; `None` on length mismatch.
    pub fn xor(&self, other: &Bits) -> Option<Bits> {
        (self.len() == other.len()).then(|| Bits(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect()))
    }

    pub fn flip(&self, index: usize) -> Bits {
        let mut b = self.clone();
        b.0[index] = !b.0[index];
        b
    }

    pub fn concat(parts: &[Bits]) -> Bits {
        Bits(parts.iter().flat_map(|b| b.0.iter().copied()).collect())
    }

    /// Splits into `len`-sized chunks. The length must divide evenly.
    pub fn chunks(&self, len: usize) -> Vec<Bits> {
        self.0.chunks(len.max(1)).map(|c| Bits(c.to_vec())).collect()
    }

    /// Length-prefixed packed encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = (self.len() as u64).to_le_bytes().to_vec();
        for chunk in self.0.chunks(8) {
            out.push(chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b as u8) << i));
        }
        out
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Bits {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid bit character {other:?}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bits)
    }
}

impl Serialize for Bits {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

pub const BLINDING_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Commitment(pub Digest);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opening {
    pub bits: Bits,
    #[serde(with = "hex_bytes")]
    pub blinding: [u8; BLINDING_LEN],
}

fn commitment_digest(bits: &Bits, blinding: &[u8; BLINDING_LEN]) -> Digest {
    hash_parts([b"commit".as_slice(), &bits.to_bytes(), blinding])
}

/// Commits to `bits` with a fresh 16-byte blinding value drawn from `rng`.
pub fn commit<R: RngCore + ?Sized>(bits: &Bits, rng: &mut R) -> Result<(Commitment, Opening), CryptoError> {
    if bits.is_empty() {
        return Err(CryptoError::EmptyCommitment);
    }
    let mut blinding = [0u8; BLINDING_LEN];
    rng.fill_bytes(&mut blinding);
    let c = Commitment(commitment_digest(bits, &blinding));
    Ok((c, Opening { bits: bits.clone(), blinding }))
}

/// Returns the committed bits if the opening matches.
pub fn open(commitment: &Commitment, opening: &Opening) -> Result<Bits, CryptoError> {
    if commitment_digest(&opening.bits, &opening.blinding) == commitment.0 {
        Ok(opening.bits.clone())
    } else {
        Err(CryptoError::OpeningMismatch)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; 32]);

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PublicKey(pub Digest);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature(pub Digest);

#[derive(Debug, Clone)]
pub struct KeyPair {
    pub secret: SecretKey,
    pub public: PublicKey,
}

impl KeyPair {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut sk = [0u8; 32];
        rng.fill_bytes(&mut sk);
        let public = PublicKey(hash_parts([b"public-key".as_slice(), &sk]));
        Self { secret: SecretKey(sk), public }
    }
}

pub fn sign(sk: &SecretKey, message: &[u8]) -> Signature {
    let mut mac = Hmac::<Sha256>::new_from_slice(&sk.0).expect("hmac accepts any key length");
    mac.update(message);
    Signature(Digest(mac.finalize().into_bytes().into()))
}

/// A certificate binding a public key to a node identity.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub node: NodeId,
    pub public: PublicKey,
    secret: SecretKey,
}

/// Trusted key directory, immutable once built.
#[derive(Debug, Clone, Default)]
pub struct KeyRegistry {
    entries: BTreeMap<PublicKey, Certificate>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, node: NodeId, keys: &KeyPair) {
        self.entries.insert(keys.public, Certificate { node, public: keys.public, secret: keys.secret.clone() });
    }

    pub fn certificate(&self, pk: &PublicKey) -> Option<&Certificate> {
        self.entries.get(pk)
    }

    /// Verifies `sig` on `message` under `pk`. Unregistered keys are an error,
    /// not merely a failed verification.
    pub fn verify(&self, pk: &PublicKey, message: &[u8], sig: &Signature) -> Result<bool, CryptoError> {
        let cert = self.entries.get(pk).ok_or(CryptoError::UnknownKey(pk.0))?;
        Ok(sign(&cert.secret, message) == *sig)
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 16], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 16], D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| serde::de::Error::custom("expected 32 hex digits"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn hash_is_deterministic() {
        assert_eq!(hash(b"abc"), hash(b"abc"));
    }

    #[test]
    fn one_bit_difference_changes_digest() {
        assert_ne!(hash(&[0b0000_0001]), hash(&[0b0000_0000]));
    }

    #[test]
    fn empty_input_is_sha256_constant() {
        assert_eq!(hash(b"").to_hex(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn commit_open_round_trip() {
        let bits: Bits = "1011".parse().unwrap();
        let (c, o) = commit(&bits, &mut rng()).unwrap();
        assert_eq!(open(&c, &o).unwrap(), bits);
    }

    #[test]
    fn flipped_bit_is_rejected() {
        let bits: Bits = "1011".parse().unwrap();
        let (c, mut o) = commit(&bits, &mut rng()).unwrap();
        o.bits = o.bits.flip(2);
        assert_eq!(open(&c, &o), Err(CryptoError::OpeningMismatch));
    }

    #[test]
    fn blinding_hides_equal_bits() {
        let bits: Bits = "0110".parse().unwrap();
        let mut r = rng();
        let (a, _) = commit(&bits, &mut r).unwrap();
        let (b, _) = commit(&bits, &mut r).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn empty_commitment_rejected() {
        assert_eq!(commit(&Bits::zeros(0), &mut rng()), Err(CryptoError::EmptyCommitment));
    }

    #[test]
    fn signatures() {
        let mut r = rng();
        let alice = KeyPair::generate(&mut r);
        let bob = KeyPair::generate(&mut r);
        let mallory = KeyPair::generate(&mut r);
        let mut reg = KeyRegistry::new();
        reg.register(NodeId(0), &alice);
        reg.register(NodeId(1), &bob);

        let sig = sign(&alice.secret, b"transcript");
        assert_eq!(reg.verify(&alice.public, b"transcript", &sig), Ok(true));
        assert_eq!(reg.verify(&bob.public, b"transcript", &sig), Ok(false));
        assert_eq!(reg.verify(&alice.public, b"transcript!", &sig), Ok(false));

        // node without a certificate
        let forged = sign(&mallory.secret, b"transcript");
        assert_eq!(reg.verify(&mallory.public, b"transcript", &forged), Err(CryptoError::UnknownKey(mallory.public.0)));
    }

    #[test]
    fn bits_text_round_trip() {
        let b: Bits = "100101".parse().unwrap();
        assert_eq!(b.to_string(), "100101");
        assert!("10a".parse::<Bits>().is_err());
    }

    proptest! {
        #[test]
        fn tampered_openings_reject(raw in proptest::collection::vec(any::<bool>(), 1..96), seed in any::<u64>(), idx in any::<prop::sample::Index>()) {
            let bits = Bits::new(raw);
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let (c, o) = commit(&bits, &mut r).unwrap();
            prop_assert_eq!(open(&c, &o).unwrap(), bits.clone());
            let tampered = Opening { bits: bits.flip(idx.index(bits.len())), ..o.clone() };
            prop_assert!(open(&c, &tampered).is_err());
            let mut blinding = o.blinding;
            blinding[0] ^= 1;
            let reblinded = Opening { blinding, ..o };
            prop_assert!(open(&c, &reblinded).is_err());
        }

        #[test]
        fn signature_binds_exact_sequence(msgs in proptest::collection::vec(any::<u8>(), 2..32), seed in any::<u64>()) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let kp = KeyPair::generate(&mut r);
            let mut reg = KeyRegistry::new();
            reg.register(NodeId(3), &kp);
            let sig = sign(&kp.secret, &msgs);
            let mut swapped = msgs.clone();
            swapped.swap(0, 1);
            prop_assert!(reg.verify(&kp.public, &msgs, &sig).unwrap());
            if swapped != msgs {
                prop_assert!(!reg.verify(&kp.public, &swapped, &sig).unwrap());
            }
        }
    }
}
