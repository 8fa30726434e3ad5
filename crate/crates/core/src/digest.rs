//! SHA-256 digests used to bind artifacts to each other.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn of_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn of_str(text: &str) -> String {
    of_bytes(text.as_bytes())
}

/// Digest of the compact JSON serialization of `value`.
pub fn of_json<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    of_bytes(&bytes)
}

/// First eight bytes of the SHA-256 digest, as an integer index key.
pub fn short(text: &str) -> u64 {
    let d = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(d[..8].try_into().unwrap())
}
