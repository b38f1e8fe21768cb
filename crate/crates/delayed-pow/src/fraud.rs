//! Transactions, double-spend detection, and fraud proofs.
//!
//! Signatures are simulated with a keyed deterministic tag rather than real
//! asymmetric cryptography: a signature can only be produced by the holder
//! of the signer's secret seed, and the [`KeyRegistry`] stands in for the
//! public-key infrastructure that lets the protocol verify tags it did not
//! produce. A fraud proof is a pair of conflicting transactions (same
//! signer, same spent output, different id) and verifies in O(1).

use crate::protocol::MinerId;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

/// 32-byte opaque digest used for transaction ids and signature tags.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }
}

impl std::fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest32 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest32 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))?;
        Ok(Digest32(arr))
    }
}

/// Secret half of a simulated key pair, bound to the identity it belongs to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretSeed {
    pub owner: MinerId,
    pub key: [u8; 32],
}

impl SecretSeed {
    /// Derives a seed deterministically from a label and a numeric salt.
    pub fn derive(owner: MinerId, salt: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"seed/");
        h.update(owner.as_str().as_bytes());
        h.update(salt.to_le_bytes());
        SecretSeed {
            owner,
            key: h.finalize().into(),
        }
    }
}

/// Maps public identities to verification keys. Stands in for the PKI:
/// the protocol can check any registered identity's tags, while agents
/// only ever hold their own seeds.
#[derive(Clone, Debug, Default)]
pub struct KeyRegistry {
    keys: BTreeMap<MinerId, [u8; 32]>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, seed: &SecretSeed) {
        self.keys.insert(seed.owner.clone(), seed.key);
    }

    pub fn contains(&self, id: &MinerId) -> bool {
        self.keys.contains_key(id)
    }

    /// Recomputes the tag for `tx` and compares. Unknown signers fail.
    pub fn verify_signature(&self, tx: &Transaction) -> bool {
        match self.keys.get(&tx.signer) {
            Some(key) => signature_tag(key, &tx.signer, &tx.spent_output, tx.amount, tx.tx_id) == tx.signature,
            None => false,
        }
    }
}

/// A signed spend of one output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub tx_id: Digest32,
    pub signer: MinerId,
    pub spent_output: String,
    pub amount: f64,
    pub signature: Digest32,
}

#[derive(Debug, Error, PartialEq)]
pub enum FraudError {
    #[error("secret seed belongs to `{seed_owner}`, not signer `{signer}`")]
    SeedMismatch { seed_owner: MinerId, signer: MinerId },
    #[error("transaction amount must be positive, got {0}")]
    NonPositiveAmount(f64),
}

fn tx_id_for(signer: &MinerId, spent_output: &str, amount: f64) -> Digest32 {
    let mut h = Sha256::new();
    h.update(b"tx/");
    h.update(signer.as_str().as_bytes());
    h.update(b"/");
    h.update(spent_output.as_bytes());
    h.update(amount.to_bits().to_le_bytes());
    Digest32(h.finalize().into())
}

fn signature_tag(
    key: &[u8; 32],
    signer: &MinerId,
    spent_output: &str,
    amount: f64,
    tx_id: Digest32,
) -> Digest32 {
    let mut h = Sha256::new();
    h.update(b"sig/");
    h.update(key);
    h.update(signer.as_str().as_bytes());
    h.update(b"/");
    h.update(spent_output.as_bytes());
    h.update(amount.to_bits().to_le_bytes());
    h.update(tx_id.0);
    Digest32(h.finalize().into())
}

/// Builds a signed transaction. Deterministic: identical inputs yield a
/// byte-identical transaction.
pub fn sign_transaction(
    seed: &SecretSeed,
    signer: &MinerId,
    spent_output: &str,
    amount: f64,
) -> Result<Transaction, FraudError> {
    if &seed.owner != signer {
        return Err(FraudError::SeedMismatch {
            seed_owner: seed.owner.clone(),
            signer: signer.clone(),
        });
    }
    if !amount.is_finite() || amount <= 0.0 {
        return Err(FraudError::NonPositiveAmount(amount));
    }
    let tx_id = tx_id_for(signer, spent_output, amount);
    let signature = signature_tag(&seed.key, signer, spent_output, amount, tx_id);
    Ok(Transaction {
        tx_id,
        signer: signer.clone(),
        spent_output: spent_output.to_string(),
        amount,
        signature,
    })
}

/// True iff the two transactions double-spend: same signer, same spent
/// output, different id. Constant time per pair.
pub fn detect_conflict(a: &Transaction, b: &Transaction) -> bool {
    a.signer == b.signer && a.spent_output == b.spent_output && a.tx_id != b.tx_id
}

/// Evidence of a double spend: two conflicting transactions plus the
/// accused and reporting identities.
///
/// Serialized field order is fixed: accused, reporter, round, tx_a, tx_b.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FraudProof {
    pub accused: MinerId,
    pub reporter: MinerId,
    pub round_submitted: u64,
    pub tx_a: Transaction,
    pub tx_b: Transaction,
}

/// Checks a fraud proof: both signatures must verify, the transactions must
/// conflict, and the accused must be the common signer. Malformed proofs
/// return false rather than aborting.
pub fn verify_fraud_proof(proof: &FraudProof, registry: &KeyRegistry) -> bool {
    registry.verify_signature(&proof.tx_a)
        && registry.verify_signature(&proof.tx_b)
        && detect_conflict(&proof.tx_a, &proof.tx_b)
        && proof.accused == proof.tx_a.signer
}
