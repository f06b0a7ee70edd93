//! `CKP1` checkpoints: magic, u32 little-endian header length, JSON header,
//! then every tensor as little-endian f32 in header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Discriminator, Generator, ModelConfig, ParamSet};
use super::tensor::Tensor;
use super::NeuralError;

pub const CKP1_MAGIC: &[u8; 4] = b"CKP1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub step: u64,
    pub vocab_hash: String,
    pub config: ModelConfig,
    pub tensors: Vec<TensorEntry>,
}

/// Generator and discriminator parameters, `g.`/`d.`-prefixed.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub vocab_hash: String,
    pub config: ModelConfig,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_models(step: u64, vocab_hash: &str, g: &Generator, d: &Discriminator) -> Self {
        let mut tensors = Vec::new();
        for (prefix, ps) in [("g", &g.params), ("d", &d.params)] {
            for (n, t) in ps.names().iter().zip(ps.tensors()) {
                tensors.push((format!("{prefix}.{n}"), t.clone()));
            }
        }
        Checkpoint {
            step,
            vocab_hash: vocab_hash.to_string(),
            config: g.cfg,
            tensors,
        }
    }

    fn fill(&self, prefix: &str, ps: &mut ParamSet) -> Result<(), NeuralError> {
        let mut found = 0;
        for (name, t) in &self.tensors {
            let Some(local) = name.strip_prefix(prefix) else {
                continue;
            };
            let Some(i) = ps.position(local) else {
                return Err(NeuralError::Checkpoint(format!(
                    "unexpected tensor `{name}`"
                )));
            };
            let slot = &mut ps.tensors_mut()[i];
            if slot.shape() != t.shape() {
                return Err(NeuralError::Checkpoint(format!(
                    "`{name}` has shape {:?}, expected {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t.clone();
            found += 1;
        }
        if found != ps.len() {
            return Err(NeuralError::Checkpoint(format!(
                "{} of {} `{prefix}` tensors present",
                found,
                ps.len()
            )));
        }
        Ok(())
    }

    pub fn generator(&self) -> Result<Generator, NeuralError> {
        let mut g = Generator::new(self.config, 0)?;
        self.fill("g.", &mut g.params)?;
        Ok(g)
    }

    pub fn discriminator(&self) -> Result<Discriminator, NeuralError> {
        let mut d = Discriminator::new(self.config, 0)?;
        self.fill("d.", &mut d.params)?;
        Ok(d)
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let header = CheckpointHeader {
            version: 1,
            step: self.step,
            vocab_hash: self.vocab_hash.clone(),
            config: self.config,
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| TensorEntry {
                    name: n.clone(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        w.write_all(CKP1_MAGIC)?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        for (_, t) in &self.tensors {
            let bytes: Vec<u8> = t
                .data()
                .iter()
                .flat_map(|&x| (x as f32).to_le_bytes())
                .collect();
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, NeuralError> {
        let bad = |m: String| NeuralError::Checkpoint(m);
        let io = |e: std::io::Error| NeuralError::Checkpoint(format!("truncated checkpoint: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CKP1_MAGIC {
            return Err(bad(format!("bad magic {magic:?}")));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len).map_err(io)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json).map_err(io)?;
        let header: CheckpointHeader =
            serde_json::from_slice(&json).map_err(|e| bad(format!("header: {e}")))?;
        if header.version != 1 {
            return Err(bad(format!("unsupported version {}", header.version)));
        }
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in &header.tensors {
            let mut buf = vec![0u8; e.rows * e.cols * 4];
            r.read_exact(&mut buf).map_err(io)?;
            let data = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            tensors.push((e.name.clone(), Tensor::from_vec(e.rows, e.cols, data)));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(io)? != 0 {
            return Err(bad("trailing bytes after last tensor".into()));
        }
        Ok(Checkpoint {
            step: header.step,
            vocab_hash: header.vocab_hash,
            config: header.config,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let file = std::fs::File::create(path).map_err(|e| NeuralError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| NeuralError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let file = std::fs::File::open(path).map_err(|e| NeuralError::io(path, e))?;
        Checkpoint::read_from(&mut std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_f32_precision() {
        let cfg = ModelConfig::micro(12);
        let g = Generator::new(cfg, 1).unwrap();
        let d = Discriminator::new(cfg, 2).unwrap();
        let ck = Checkpoint::from_models(7, "abc", &g, &d);
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        let back = Checkpoint::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.step, 7);
        let g2 = back.generator().unwrap();
        for (a, b) in g.params.tensors().iter().zip(g2.params.tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        back.discriminator().unwrap();
    }

    #[test]
    fn corruption_is_detected() {
        let cfg = ModelConfig::micro(12);
        let ck = Checkpoint::from_models(
            0,
            "",
            &Generator::new(cfg, 1).unwrap(),
            &Discriminator::new(cfg, 2).unwrap(),
        );
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        assert!(Checkpoint::read_from(&mut &bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::read_from(&mut extra.as_slice()).is_err());
        bytes[0] = b'X';
        assert!(Checkpoint::read_from(&mut bytes.as_slice()).is_err());
    }
}
