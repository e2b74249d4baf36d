//! Cloud checkpoints.
//!
//! JSON files hold `{"format_version": 1, "cloud": {...}}`. Binary files
//! start with the four bytes `EPCC`, then the format version as a
//! little-endian `u32`, then the bincode encoding of the cloud.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::smc2::PosteriorCloud;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"EPCC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointFormat {
    #[default]
    Json,
    Binary,
}

#[derive(Serialize, Deserialize)]
struct Envelope<C> {
    format_version: u32,
    cloud: C,
}

pub fn encode(cloud: &PosteriorCloud, format: CheckpointFormat) -> Result<Vec<u8>> {
    match format {
        CheckpointFormat::Json => Ok(serde_json::to_vec(&Envelope { format_version: FORMAT_VERSION, cloud })?),
        CheckpointFormat::Binary => {
            let mut out = MAGIC.to_vec();
            out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
            bincode::serialize_into(&mut out, cloud).map_err(|e| Error::Checkpoint(e.to_string()))?;
            Ok(out)
        }
    }
}

/// Decodes either format, detected from the leading bytes.
pub fn decode(bytes: &[u8]) -> Result<PosteriorCloud> {
    if let Some(rest) = bytes.strip_prefix(MAGIC.as_slice()) {
        let (ver, body) = rest.split_at_checked(4).ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
        let ver = u32::from_le_bytes(ver.try_into().expect("four bytes"));
        check_version(ver)?;
        return bincode::deserialize(body).map_err(|e| Error::Checkpoint(e.to_string()));
    }
    let env: Envelope<PosteriorCloud> = serde_json::from_slice(bytes)?;
    check_version(env.format_version)?;
    Ok(env.cloud)
}

fn check_version(v: u32) -> Result<()> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(Error::Checkpoint(format!("unsupported checkpoint version {v}, expected {FORMAT_VERSION}")))
    }
}

pub fn save(cloud: &PosteriorCloud, path: &Path, format: CheckpointFormat) -> Result<()> {
    let bytes = encode(cloud, format)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<PosteriorCloud> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActionLevel, CompartmentState, ModelParams, Observation, VaccinationStream};
    use crate::smc::Smc2Config;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud() -> PosteriorCloud {
        let base = ModelParams::default().with_population(10_000);
        let x0 = CompartmentState::seeded(10_000, 50, 50).unwrap();
        let cfg = Smc2Config { n_theta: 8, n_x: 4, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = PosteriorCloud::from_prior(&base, x0, &cfg, &mut rng).unwrap();
        c.assimilate(Observation::new(1, 3), ActionLevel::NONE, &VaccinationStream::zeros(4), &mut rng).unwrap()
    }

    #[test]
    fn both_formats_round_trip() {
        let c = cloud();
        for fmt in [CheckpointFormat::Json, CheckpointFormat::Binary] {
            let back = decode(&encode(&c, fmt).unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let mut bytes = encode(&cloud(), CheckpointFormat::Binary).unwrap();
        bytes[4] = 9;
        assert!(matches!(decode(&bytes), Err(Error::Checkpoint(_))));
        let json = br#"{"format_version": 2, "cloud": null}"#;
        assert!(decode(json).is_err());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.bin");
        let c = cloud();
        save(&c, &path, CheckpointFormat::Binary).unwrap();
        assert_eq!(load(&path).unwrap(), c);
        assert!(matches!(load(&dir.path().join("nope")), Err(Error::MissingFile(_))));
    }
}
