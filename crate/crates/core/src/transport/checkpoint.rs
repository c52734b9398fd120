//! Versioned checkpoint files.
//!
//! Layout: one header line `knudsen-checkpoint <format> <sha256 of body>`
//! followed by a JSON body. Floats round-trip exactly.

use super::Ensemble;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "knudsen-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub tool_version: String,
    pub ensemble: Ensemble,
    /// Free-form run context (resolved configuration, schedule position).
    pub context: serde_json::Value,
}

impl Checkpoint {
    pub fn new(ensemble: Ensemble, context: serde_json::Value) -> Self {
        Checkpoint {
            format: FORMAT_VERSION,
            tool_version: crate::VERSION.to_string(),
            ensemble,
            context,
        }
    }

    pub fn to_string(&self) -> Result<String> {
        let body = serde_json::to_string(self)?;
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        Ok(format!("{MAGIC} {FORMAT_VERSION} {digest}\n{body}"))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (header, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != MAGIC {
            return Err(Error::Checkpoint("not a knudsen checkpoint".into()));
        }
        let format: u32 = fields[1]
            .parse()
            .map_err(|_| Error::Checkpoint("unreadable format version".into()))?;
        if format != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {format} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        if digest != fields[2] {
            return Err(Error::Checkpoint("checksum mismatch: record is corrupted".into()));
        }
        let ck: Checkpoint = serde_json::from_str(body)?;
        if ck.format != format {
            return Err(Error::Checkpoint("header and body disagree on the format version".into()));
        }
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::InitialData;
    use crate::{Domain, WallModel};

    fn sample() -> Checkpoint {
        let d = Domain::unit_disk();
        let w = WallModel::diffuse(&d, 1.0, 0.5).unwrap();
        let mut e = Ensemble::sample(&InitialData::UniformMaxwellian { theta0: 1.0 }, &d, 50, 3).unwrap();
        e.advance(2.0, &d, &w).unwrap();
        Checkpoint::new(e, serde_json::json!({"note": "x"}))
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::parse(&c.to_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn corruption_and_version_are_detected() {
        let text = sample().to_string().unwrap();
        let corrupted = text.replacen("\"clock\":2.0", "\"clock\":2.5", 1);
        assert_ne!(corrupted, text);
        assert!(matches!(Checkpoint::parse(&corrupted), Err(Error::Checkpoint(m)) if m.contains("checksum")));
        let wrong = text.replacen("knudsen-checkpoint 1 ", "knudsen-checkpoint 9 ", 1);
        assert!(matches!(Checkpoint::parse(&wrong), Err(Error::Checkpoint(m)) if m.contains("version")));
    }
}
