//! Unit-norm embedding matrices and the EMB1 binary format.
//!
//! EMB1 layout (little-endian): `b"EMB1"`, `u32` count, `u32` dim, then
//! `count * dim` IEEE-754 `f32` values row-major. Row ids live in a sidecar
//! JSON-lines file of `{"row": int, "id": string}`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AlignError;

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    rows: Vec<f32>,
    lookup: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct SidecarLine {
    row: usize,
    id: String,
}

pub(crate) fn l2_norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

impl EmbeddingMatrix {
    /// Validates ids, shape and unit norms.
    pub fn new(ids: Vec<String>, dim: usize, rows: Vec<f32>) -> Result<Self, AlignError> {
        if dim == 0 {
            return Err(AlignError::Format("dimension must be positive".into()));
        }
        if rows.len() != ids.len() * dim {
            return Err(AlignError::Format(format!(
                "{} ids with dim {dim} need {} values, got {}",
                ids.len(),
                ids.len() * dim,
                rows.len()
            )));
        }
        let mut lookup = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if lookup.insert(id.clone(), i).is_some() {
                return Err(AlignError::DuplicateId(id.clone()));
            }
        }
        for (i, row) in rows.chunks_exact(dim).enumerate() {
            let norm = l2_norm(row);
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(AlignError::NotUnitNorm {
                    id: ids[i].clone(),
                    norm,
                });
            }
        }
        Ok(EmbeddingMatrix {
            ids,
            dim,
            rows,
            lookup,
        })
    }

    /// Normalizes each row before validating; zero rows are rejected.
    pub fn from_raw_rows(
        ids: Vec<String>,
        dim: usize,
        mut rows: Vec<f32>,
    ) -> Result<Self, AlignError> {
        for (i, row) in rows.chunks_exact_mut(dim).enumerate() {
            let norm = l2_norm(row);
            if norm == 0.0 {
                return Err(AlignError::ZeroVector { index: i });
            }
            row.iter_mut()
                .for_each(|x| *x = (f64::from(*x) / norm) as f32);
        }
        Self::new(ids, dim, rows)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> &[f32] {
        &self.rows
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.position(id).map(|i| self.row(i))
    }

    pub fn write_emb1(&self, path: &Path) -> Result<(), AlignError> {
        let file = File::create(path).map_err(|e| AlignError::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| AlignError::io(path, e);
        w.write_all(EMB1_MAGIC).map_err(io)?;
        w.write_all(&(self.ids.len() as u32).to_le_bytes())
            .map_err(io)?;
        w.write_all(&(self.dim as u32).to_le_bytes()).map_err(io)?;
        for x in &self.rows {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)?;

        let side = sidecar_path(path);
        let file = File::create(&side).map_err(|e| AlignError::io(&side, e))?;
        let mut w = BufWriter::new(file);
        for (row, id) in self.ids.iter().enumerate() {
            let line = serde_json::to_string(&SidecarLine {
                row,
                id: id.clone(),
            })
            .expect("sidecar serializes");
            writeln!(w, "{line}").map_err(|e| AlignError::io(&side, e))?;
        }
        w.flush().map_err(|e| AlignError::io(&side, e))
    }

    /// Reads an EMB1 file and its sidecar (located with [`sidecar_path`]).
    pub fn read_emb1(path: &Path) -> Result<Self, AlignError> {
        Self::read_emb1_with_ids(path, &sidecar_path(path))
    }

    pub fn read_emb1_with_ids(path: &Path, ids_path: &Path) -> Result<Self, AlignError> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| AlignError::io(path, e))?;
        if bytes.len() < 12 || &bytes[..4] != EMB1_MAGIC {
            return Err(AlignError::Format(format!(
                "{}: missing EMB1 header",
                path.display()
            )));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let payload = &bytes[12..];
        if payload.len() != count * dim * 4 {
            return Err(AlignError::Format(format!(
                "{}: header says {count}x{dim} floats ({} bytes) but payload has {} bytes",
                path.display(),
                count * dim * 4,
                payload.len()
            )));
        }
        let rows: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();

        let file = File::open(ids_path).map_err(|e| AlignError::io(ids_path, e))?;
        let mut ids = vec![None; count];
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| AlignError::io(ids_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let l: SidecarLine = serde_json::from_str(&line).map_err(|e| AlignError::Json {
                path: ids_path.display().to_string(),
                line: i + 1,
                source: e,
            })?;
            let slot = ids
                .get_mut(l.row)
                .ok_or_else(|| AlignError::Format(format!("sidecar row {} out of range", l.row)))?;
            if slot.replace(l.id).is_some() {
                return Err(AlignError::Format(format!(
                    "sidecar lists row {} twice",
                    l.row
                )));
            }
        }
        let ids = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| {
                id.ok_or_else(|| AlignError::Format(format!("sidecar has no id for row {i}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if dim == 0 && count == 0 {
            return Ok(EmbeddingMatrix {
                ids,
                dim: 0,
                rows,
                lookup: HashMap::new(),
            });
        }
        Self::new(ids, dim, rows)
    }
}

/// `emb.bin` -> `emb.ids.jsonl`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.ids.jsonl"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_unit_rows() {
        let err = EmbeddingMatrix::new(vec!["a".into()], 2, vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, AlignError::NotUnitNorm { .. }));
    }

    #[test]
    fn rejects_duplicates() {
        let err =
            EmbeddingMatrix::new(vec!["a".into(), "a".into()], 1, vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, AlignError::DuplicateId(_)));
    }

    #[test]
    fn truncated_payload_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        let m = EmbeddingMatrix::from_raw_rows(vec!["a".into()], 3, vec![1.0, 2.0, 2.0]).unwrap();
        m.write_emb1(&p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(
            EmbeddingMatrix::read_emb1(&p),
            Err(AlignError::Format(_))
        ));
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(
            sidecar_path(Path::new("/x/emb.bin")),
            PathBuf::from("/x/emb.ids.jsonl")
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn emb1_roundtrip(raw in proptest::collection::vec(proptest::collection::vec(0.1f32..1.0, 4), 1..20)) {
            let ids: Vec<String> = (0..raw.len()).map(|i| format!("id{i}")).collect();
            let m = EmbeddingMatrix::from_raw_rows(ids, 4, raw.concat()).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.bin");
            m.write_emb1(&p).unwrap();
            let back = EmbeddingMatrix::read_emb1(&p).unwrap();
            prop_assert_eq!(back, m.clone());
            let len = std::fs::metadata(&p).unwrap().len() as usize;
            prop_assert_eq!(len, 12 + m.len() * m.dim() * 4);
        }
    }
}
