//! JSON documents for particle sets and meta-policy state.
//!
//! Float arrays are stored as base64 of little-endian IEEE-754 bytes so a
//! save/load round trip is bit-exact.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::filter::{FilterConfig, HumanPolicyEstimate, ParticleSet};
use crate::model::{Dims, PropensityTensor};
use crate::policy::MetaPolicyState;
use crate::rng::RngState;

pub const F64_ENCODING: &str = "base64-f64le";

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(text)
        .map_err(|e| Error::Decode(format!("base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Decode(format!("{} bytes is not a whole number of f64s", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSetDocument {
    pub dims: Dims,
    pub alpha: f64,
    pub n_particles: usize,
    pub encoding: String,
    /// Row-major thetas, one particle after another.
    pub thetas: String,
    pub weights: String,
    pub rng_state: Option<RngState>,
}

impl ParticleSetDocument {
    pub fn new(ps: &ParticleSet, alpha: f64, rng_state: Option<RngState>) -> Self {
        ParticleSetDocument {
            dims: ps.dims(),
            alpha,
            n_particles: ps.n_particles(),
            encoding: F64_ENCODING.to_string(),
            thetas: encode_f64s(ps.thetas()),
            weights: encode_f64s(ps.weights()),
            rng_state,
        }
    }

    pub fn particles(&self) -> Result<ParticleSet> {
        if self.encoding != F64_ENCODING {
            return Err(Error::Decode(format!("unsupported encoding {:?}", self.encoding)));
        }
        let ps = ParticleSet::new(self.dims, decode_f64s(&self.thetas)?, decode_f64s(&self.weights)?)?;
        if ps.n_particles() != self.n_particles {
            return Err(Error::Decode(format!(
                "document claims {} particles but holds {}",
                self.n_particles,
                ps.n_particles()
            )));
        }
        Ok(ps)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Serializable form of [`MetaPolicyState`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MetaPolicyDocument {
    Ardent {
        dims: Dims,
        config: FilterConfig,
        particles: EncodedParticlesDoc,
        human: HumanPolicyEstimate,
    },
    Random {
        dims: Dims,
    },
    Oracle {
        q_true: PropensityTensor,
    },
    Fixed {
        dims: Dims,
        favourite: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedParticlesDoc {
    pub encoding: String,
    pub thetas: String,
    pub weights: String,
}

impl From<&MetaPolicyState> for MetaPolicyDocument {
    fn from(state: &MetaPolicyState) -> Self {
        match state {
            MetaPolicyState::Ardent {
                particles,
                human,
                config,
            } => MetaPolicyDocument::Ardent {
                dims: particles.dims(),
                config: config.clone(),
                particles: EncodedParticlesDoc {
                    encoding: F64_ENCODING.to_string(),
                    thetas: encode_f64s(particles.thetas()),
                    weights: encode_f64s(particles.weights()),
                },
                human: human.clone(),
            },
            MetaPolicyState::Random { dims } => MetaPolicyDocument::Random { dims: *dims },
            MetaPolicyState::Oracle { q_true } => MetaPolicyDocument::Oracle { q_true: q_true.clone() },
            MetaPolicyState::Fixed { dims, favourite } => MetaPolicyDocument::Fixed {
                dims: *dims,
                favourite: *favourite,
            },
        }
    }
}

impl TryFrom<MetaPolicyDocument> for MetaPolicyState {
    type Error = Error;

    fn try_from(doc: MetaPolicyDocument) -> Result<Self> {
        Ok(match doc {
            MetaPolicyDocument::Ardent {
                dims,
                config,
                particles,
                human,
            } => {
                if particles.encoding != F64_ENCODING {
                    return Err(Error::Decode(format!("unsupported encoding {:?}", particles.encoding)));
                }
                let ps = ParticleSet::new(dims, decode_f64s(&particles.thetas)?, decode_f64s(&particles.weights)?)?;
                MetaPolicyState::ardent_from(config, ps, Some(human))?
            }
            MetaPolicyDocument::Random { dims } => MetaPolicyState::Random { dims },
            MetaPolicyDocument::Oracle { q_true } => MetaPolicyState::Oracle { q_true },
            MetaPolicyDocument::Fixed { dims, favourite } => MetaPolicyState::fixed(dims, favourite)?,
        })
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// SHA-256 over the exact bits of a particle set.
pub fn particle_set_digest(ps: &ParticleSet) -> String {
    let d = ps.dims();
    let mut bytes = Vec::with_capacity(24 + 8 * (ps.thetas().len() + ps.weights().len()));
    for n in [d.n_explainers, d.n_contexts, d.n_actions] {
        bytes.extend((n as u64).to_le_bytes());
    }
    for v in ps.thetas().iter().chain(ps.weights()) {
        bytes.extend(v.to_bits().to_le_bytes());
    }
    hex_digest(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::init_particles;
    use crate::rng::seeded;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn f64_encoding_is_bit_exact(values in proptest::collection::vec(any::<f64>(), 0..64)) {
            let back = decode_f64s(&encode_f64s(&values)).unwrap();
            prop_assert_eq!(values.len(), back.len());
            for (a, b) in values.iter().zip(&back) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn particle_document_round_trip() {
        let cfg = FilterConfig {
            n_particles: 64,
            ..Default::default()
        };
        let ps = init_particles(&cfg, Dims::new(2, 2, 2).unwrap(), &mut seeded(1, 0)).unwrap();
        let rng = seeded(9, 2);
        let doc = ParticleSetDocument::new(&ps, cfg.alpha, Some(RngState::capture(&rng)));
        let json = serde_json::to_string(&doc).unwrap();
        for field in ["\"dims\"", "\"alpha\"", "\"thetas\"", "\"weights\"", "\"rng_state\""] {
            assert!(json.contains(field), "{field}");
        }
        let back: ParticleSetDocument = serde_json::from_str(&json).unwrap();
        let ps2 = back.particles().unwrap();
        assert_eq!(particle_set_digest(&ps), particle_set_digest(&ps2));
        assert_eq!(back.rng_state.unwrap().restore().unwrap(), rng);
    }

    #[test]
    fn meta_policy_document_round_trip() {
        let cfg = FilterConfig {
            n_particles: 16,
            ..Default::default()
        };
        let state = MetaPolicyState::ardent(cfg, Dims::new(3, 1, 2).unwrap(), &mut seeded(0, 0)).unwrap();
        let doc = MetaPolicyDocument::from(&state);
        let json = serde_json::to_string(&doc).unwrap();
        let back: MetaPolicyState = serde_json::from_str::<MetaPolicyDocument>(&json)
            .unwrap()
            .try_into()
            .unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn corrupt_payload_is_rejected() {
        assert!(decode_f64s("AAAA").is_err());
        assert!(decode_f64s("not base64!").is_err());
    }
}
