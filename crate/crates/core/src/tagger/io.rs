//! Binary model container.
//!
//! ```text
//! magic    8 bytes  "CLFCRF\0\0"
//! version  u32 LE   container version
//! features u32 LE   feature template version
//! width    u8       scalar width in bytes (4 or 8)
//! sha256   32 bytes digest of the payload
//! length   u64 LE   payload length
//! payload:
//!   u32 metadata JSON length, metadata JSON
//!   u32 label count, labels as u32-length-prefixed UTF-8
//!   u32 feature count, features as u32-length-prefixed UTF-8
//!   emission weights, start weights, transition weights (LE, `width` bytes each)
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::features::FEATURE_VERSION;
use super::train::Params;
use super::{ModelMetadata, TaggerModel};
use crate::annotation::BioLabel;
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"CLFCRF\0\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 1 + 32 + 8;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model built with feature templates version {found}, this build uses {expected}")]
    FeatureVersion { found: u32, expected: u32 },
    #[error("model stores {found}-byte scalars, expected {expected}")]
    ScalarWidth { found: u8, expected: u8 },
    #[error("checksum mismatch: model file is corrupted")]
    Checksum,
    #[error("malformed model payload: {0}")]
    Malformed(String),
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| ModelError::Malformed("unexpected end of payload".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, ModelError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| ModelError::Malformed(e.to_string()))
    }

    fn scalars<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>, ModelError> {
        let w = T::WIDTH as usize;
        let bytes = self.take(n.checked_mul(w).ok_or_else(|| ModelError::Malformed("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(w).map(T::from_le_slice).collect())
    }
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl<T: Scalar> TaggerModel<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        let meta = serde_json::to_string(&self.metadata).expect("metadata serializes");
        put_string(&mut payload, &meta);
        payload.extend_from_slice(&(BioLabel::ALPHABET.len() as u32).to_le_bytes());
        for l in BioLabel::ALPHABET {
            put_string(&mut payload, &l.to_string());
        }
        payload.extend_from_slice(&(self.features.len() as u32).to_le_bytes());
        for f in &self.features {
            put_string(&mut payload, f);
        }
        for w in self.params.flat() {
            payload.extend(w.to_le_vec());
        }

        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.push(T::WIDTH);
        out.extend_from_slice(&Sha256::digest(&payload));
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend(payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(ModelError::BadMagic);
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != FORMAT_VERSION {
            return Err(ModelError::Version { found: version, expected: FORMAT_VERSION });
        }
        let feature_version = u32_at(12);
        if feature_version != FEATURE_VERSION {
            return Err(ModelError::FeatureVersion { found: feature_version, expected: FEATURE_VERSION });
        }
        if bytes[16] != T::WIDTH {
            return Err(ModelError::ScalarWidth { found: bytes[16], expected: T::WIDTH });
        }
        let digest = &bytes[17..49];
        let len = u64::from_le_bytes(bytes[49..57].try_into().unwrap()) as usize;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != len || Sha256::digest(payload).as_slice() != digest {
            return Err(ModelError::Checksum);
        }

        let mut r = Reader { buf: payload, pos: 0 };
        let metadata: ModelMetadata =
            serde_json::from_str(&r.string()?).map_err(|e| ModelError::Malformed(e.to_string()))?;
        let n_labels = r.u32()? as usize;
        let labels = (0..n_labels).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
        let expected: Vec<String> = BioLabel::ALPHABET.iter().map(|l| l.to_string()).collect();
        if labels != expected {
            return Err(ModelError::Malformed(format!("label alphabet {:?} does not match", labels)));
        }
        let n_features = r.u32()? as usize;
        let features = (0..n_features).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
        let mut params = Params::zeros(n_features, n_labels);
        let flat = r.scalars::<T>(params.flat().len())?;
        params.set_flat(&flat);
        if r.pos != payload.len() {
            return Err(ModelError::Malformed("trailing bytes after weights".into()));
        }
        Ok(TaggerModel::from_parts(features, params, metadata))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
