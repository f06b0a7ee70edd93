//! Top-1 cosine search over unit vectors.
//!
//! Distances are `1 - cosine`, clamped to `[0, 2]`. Equal distances resolve to
//! the lexicographically smallest id. Partitioned mode clusters rows around
//! `k` centroids (10 rounds of spherical mean reassignment from seeded rows)
//! and scans only the `n_probe` buckets whose centroids are nearest the query.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matrix::{dot, l2_norm, NORM_TOLERANCE};
use super::{AlignError, EmbeddingMatrix};

pub const KMEANS_ROUNDS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexMode {
    Exact,
    Partitioned {
        k_clusters: usize,
        n_probe: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug)]
struct Partitions {
    centroids: Vec<Vec<f32>>,
    members: Vec<Vec<usize>>,
    n_probe: usize,
}

#[derive(Clone, Debug)]
pub struct CosineIndex {
    matrix: EmbeddingMatrix,
    partitions: Option<Partitions>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub row: usize,
    pub distance: f64,
}

/// `1 - a·b` clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> f64 {
    (1.0 - dot(a, b)).clamp(0.0, 2.0)
}

/// True when `(d1, id1)` should win over `(d2, id2)`.
fn better(d1: f64, id1: &str, d2: f64, id2: &str) -> bool {
    d1 < d2 || (d1 == d2 && id1 < id2)
}

pub fn build_index(matrix: EmbeddingMatrix, mode: IndexMode) -> Result<CosineIndex, AlignError> {
    if matrix.is_empty() {
        return Err(AlignError::EmptyIndex);
    }
    let partitions = match mode {
        IndexMode::Exact => None,
        IndexMode::Partitioned {
            k_clusters,
            n_probe,
            seed,
        } => {
            if k_clusters == 0 || k_clusters > matrix.len() {
                return Err(AlignError::TooManyClusters {
                    k: k_clusters,
                    rows: matrix.len(),
                });
            }
            Some(kmeans(
                &matrix,
                k_clusters,
                n_probe.clamp(1, k_clusters),
                seed,
            ))
        }
    };
    Ok(CosineIndex { matrix, partitions })
}

fn nearest_centroid(centroids: &[Vec<f32>], v: &[f32]) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let s = dot(centroid, v);
        if s > best_sim {
            best_sim = s;
            best = c;
        }
    }
    best
}

fn kmeans(m: &EmbeddingMatrix, k: usize, n_probe: usize, seed: u64) -> Partitions {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, m.len(), k).into_vec();
    picks.sort_unstable();
    let mut centroids: Vec<Vec<f32>> = picks.iter().map(|&i| m.row(i).to_vec()).collect();
    let dim = m.dim();
    let assign = |centroids: &[Vec<f32>]| -> Vec<usize> {
        (0..m.len())
            .map(|i| nearest_centroid(centroids, m.row(i)))
            .collect()
    };
    for _ in 0..KMEANS_ROUNDS {
        let labels = assign(&centroids);
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, &x) in sums[c].iter_mut().zip(m.row(i)) {
                *s += f64::from(x);
            }
        }
        for c in 0..k {
            let norm = sums[c].iter().map(|x| x * x).sum::<f64>().sqrt();
            // Empty or degenerate clusters keep their previous centroid.
            if counts[c] > 0 && norm > 0.0 {
                centroids[c] = sums[c].iter().map(|x| (x / norm) as f32).collect();
            }
        }
    }
    let mut members = vec![Vec::new(); k];
    for (i, c) in assign(&centroids).into_iter().enumerate() {
        members[c].push(i);
    }
    Partitions {
        centroids,
        members,
        n_probe,
    }
}

impl CosineIndex {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    fn check_query(&self, query: &[f32]) -> Result<(), AlignError> {
        if query.len() != self.dim() {
            return Err(AlignError::DimensionMismatch {
                expected: self.dim(),
                found: query.len(),
            });
        }
        let norm = l2_norm(query);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(AlignError::NotUnitNorm {
                id: "<query>".into(),
                norm,
            });
        }
        Ok(())
    }

    fn scan(&self, query: &[f32], rows: impl Iterator<Item = usize>) -> Option<Neighbor> {
        let mut best: Option<(usize, f64)> = None;
        for r in rows {
            let d = cosine_distance(self.matrix.row(r), query);
            let wins = match best {
                None => true,
                Some((b, bd)) => better(d, &self.matrix.ids()[r], bd, &self.matrix.ids()[b]),
            };
            if wins {
                best = Some((r, d));
            }
        }
        best.map(|(row, distance)| Neighbor {
            id: self.matrix.ids()[row].clone(),
            row,
            distance,
        })
    }

    /// Nearest stored row to `query`.
    pub fn nearest(&self, query: &[f32]) -> Result<Neighbor, AlignError> {
        self.check_query(query)?;
        let found = match &self.partitions {
            None => self.scan(query, 0..self.len()),
            Some(p) => {
                let mut order: Vec<(usize, f64)> = p
                    .centroids
                    .iter()
                    .enumerate()
                    .map(|(c, v)| (c, dot(v, query)))
                    .collect();
                order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let rows = order
                    .iter()
                    .take(p.n_probe)
                    .flat_map(|&(c, _)| p.members[c].iter().copied());
                self.scan(query, rows)
            }
        };
        // Probed buckets can all be empty only if every member sits elsewhere.
        found
            .or_else(|| self.scan(query, 0..self.len()))
            .ok_or(AlignError::EmptyIndex)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(ids: &[&str], rows: Vec<f32>, dim: usize) -> EmbeddingMatrix {
        EmbeddingMatrix::from_raw_rows(ids.iter().map(|s| s.to_string()).collect(), dim, rows)
            .unwrap()
    }

    #[test]
    fn singleton_always_wins() {
        let idx = build_index(unit(&["only"], vec![1.0, 0.0], 2), IndexMode::Exact).unwrap();
        assert_eq!(idx.nearest(&[0.0, 1.0]).unwrap().id, "only");
        assert_eq!(idx.nearest(&[-1.0, 0.0]).unwrap().distance, 2.0);
    }

    #[test]
    fn self_match_is_zero() {
        let m = unit(&["a", "b"], vec![0.6, 0.8, 0.8, 0.6], 2);
        let q = m.row(1).to_vec();
        let n = build_index(m, IndexMode::Exact)
            .unwrap()
            .nearest(&q)
            .unwrap();
        assert_eq!(n.id, "b");
        assert!(n.distance.abs() < 1e-6);
    }

    #[test]
    fn orthogonal_query_picks_the_other_row() {
        // e1 and e2 orthonormal, plus one row leaning toward e3.
        let m = unit(
            &["e1", "e2", "lean"],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.6, 0.8],
            3,
        );
        let n = build_index(m, IndexMode::Exact)
            .unwrap()
            .nearest(&[0.0, 0.0, 1.0])
            .unwrap();
        assert_eq!(n.id, "lean");
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let m = unit(&["zeta", "alpha"], vec![1.0, 0.0, 0.0, 1.0], 2);
        let q = [
            std::f32::consts::FRAC_1_SQRT_2,
            std::f32::consts::FRAC_1_SQRT_2,
        ];
        assert_eq!(
            build_index(m, IndexMode::Exact)
                .unwrap()
                .nearest(&q)
                .unwrap()
                .id,
            "alpha"
        );
    }

    #[test]
    fn errors() {
        let m = unit(&["a"], vec![1.0, 0.0], 2);
        let idx = build_index(m.clone(), IndexMode::Exact).unwrap();
        assert!(matches!(
            idx.nearest(&[1.0, 0.0, 0.0]),
            Err(AlignError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            idx.nearest(&[2.0, 0.0]),
            Err(AlignError::NotUnitNorm { .. })
        ));
        let err = build_index(
            m,
            IndexMode::Partitioned {
                k_clusters: 2,
                n_probe: 1,
                seed: 0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, AlignError::TooManyClusters { k: 2, rows: 1 }));
    }
}
