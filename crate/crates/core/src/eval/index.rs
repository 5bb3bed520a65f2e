//! Exact nearest-neighbour index over global descriptors.
//!
//! File layout (little-endian): magic `SVIX`, `u32` version, `u64` M, `u64` D,
//! then the `M × D` `f32` matrix, then M records of `u64` id and three `f64`
//! position coordinates.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::ingest::DistanceMetric;
use crate::parallel;
use crate::real::Real;

pub const INDEX_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SVIX";
pub const UNIT_NORM_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEntry {
    pub id: usize,
    pub position: [f64; 3],
}

/// Database side of retrieval, sorted by frame id and immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
    data: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    /// Euclidean descriptor distance.
    pub distance: f64,
    /// Ground-truth distance between the query and database poses, metres.
    pub geo_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub query_id: usize,
    pub neighbors: Vec<Neighbor>,
    /// Distance from the query pose to the closest database pose, metres.
    pub nearest_geo_m: f64,
}

impl RetrievalResult {
    /// Whether a database frame within `threshold_m` exists at all.
    pub fn has_true_match(&self, threshold_m: f64) -> bool {
        self.nearest_geo_m <= threshold_m
    }

    /// Whether one of the first `n` neighbours lies within `threshold_m`.
    pub fn success(&self, n: usize, threshold_m: f64) -> bool {
        self.neighbors.iter().take(n).any(|nb| nb.geo_m <= threshold_m)
    }

    /// Top-1 success flag for each threshold.
    pub fn success_flags(&self, thresholds_m: &[f64]) -> Vec<bool> {
        thresholds_m.iter().map(|&t| self.success(1, t)).collect()
    }
}

impl DescriptorIndex {
    /// Builds an index from index-aligned ids, positions and descriptors.
    ///
    /// Descriptors must be unit-norm; the all-zero descriptor of an empty frame
    /// is also accepted.
    pub fn build<T: Real>(ids: &[usize], positions: &[[f64; 3]], descriptors: &[Vec<T>]) -> Result<Self> {
        if descriptors.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        if ids.len() != descriptors.len() || positions.len() != descriptors.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids, {} positions, {} descriptors",
                ids.len(),
                positions.len(),
                descriptors.len()
            )));
        }
        let dim = descriptors[0].len();
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by_key(|&i| ids[i]);
        let mut entries = Vec::with_capacity(ids.len());
        let mut data = Vec::with_capacity(ids.len() * dim);
        for (k, &i) in order.iter().enumerate() {
            if k > 0 && ids[order[k - 1]] == ids[i] {
                return Err(Error::DuplicateId(ids[i]));
            }
            let d = &descriptors[i];
            if d.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: d.len(),
                });
            }
            let norm = d.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt();
            if norm != 0.0 && (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnitNorm { id: ids[i], norm });
            }
            entries.push(IndexEntry {
                id: ids[i],
                position: positions[i],
            });
            data.extend(d.iter().map(|x| x.as_f64() as f32));
        }
        Ok(DescriptorIndex { dim, entries, data })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn descriptor(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// Exact top-`top_n` by Euclidean distance, ties by ascending id.
    ///
    /// The query is rounded to `f32` like the stored matrix, so a query equal
    /// to a stored descriptor is found at distance 0.
    pub fn query<T: Real>(
        &self,
        query_id: usize,
        position: [f64; 3],
        g: &[T],
        top_n: usize,
    ) -> Result<RetrievalResult> {
        if g.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: g.len(),
            });
        }
        let q: Vec<f64> = g.iter().map(|x| x.as_f64() as f32 as f64).collect();
        let metric = DistanceMetric::Euclidean3d;
        let mut all: Vec<Neighbor> = self
            .entries
            .iter()
            .enumerate()
            .map(|(row, e)| {
                let d2: f64 = self
                    .descriptor(row)
                    .iter()
                    .zip(&q)
                    .map(|(&a, &b)| (a as f64 - b) * (a as f64 - b))
                    .sum();
                Neighbor {
                    id: e.id,
                    distance: d2.sqrt(),
                    geo_m: metric.between(position, e.position),
                }
            })
            .collect();
        let nearest_geo_m = all.iter().map(|n| n.geo_m).fold(f64::INFINITY, f64::min);
        // Entries are id-sorted, so a stable sort on distance keeps ascending ids among ties.
        all.sort_by(|a, b| a.distance.total_cmp(&b.distance));
        all.truncate(top_n);
        Ok(RetrievalResult {
            query_id,
            neighbors: all,
            nearest_geo_m,
        })
    }

    /// Queries in parallel; results keep the input order.
    pub fn query_all<T: Real>(
        &self,
        queries: &[(usize, [f64; 3], Vec<T>)],
        top_n: usize,
    ) -> Result<Vec<RetrievalResult>> {
        parallel::map(queries, |(id, pos, g)| self.query(*id, *pos, g, top_n))
            .into_iter()
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(24 + 4 * self.data.len() + 32 * self.len());
        buf.extend_from_slice(MAGIC);
        buf.write_u32::<LittleEndian>(INDEX_VERSION)?;
        buf.write_u64::<LittleEndian>(self.len() as u64)?;
        buf.write_u64::<LittleEndian>(self.dim as u64)?;
        let start = buf.len();
        buf.resize(start + 4 * self.data.len(), 0);
        LittleEndian::write_f32_into(&self.data, &mut buf[start..]);
        for e in &self.entries {
            buf.write_u64::<LittleEndian>(e.id as u64)?;
            for c in e.position {
                buf.write_f64::<LittleEndian>(c)?;
            }
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::unreadable(path, e))?;
        let bad = |reason: String| Error::malformed(path, reason);
        if bytes.len() < 24 || &bytes[..4] != MAGIC {
            return Err(bad("not an index file".into()));
        }
        let mut cur = &bytes[4..];
        let version = cur.read_u32::<LittleEndian>()?;
        if version != INDEX_VERSION {
            return Err(bad(format!("index version {version}, expected {INDEX_VERSION}")));
        }
        let m = cur.read_u64::<LittleEndian>()? as usize;
        let dim = cur.read_u64::<LittleEndian>()? as usize;
        let expected = m
            .checked_mul(dim)
            .and_then(|md| md.checked_mul(4))
            .and_then(|b| b.checked_add(32 * m))
            .ok_or_else(|| bad("header sizes overflow".into()))?;
        if cur.len() != expected {
            return Err(bad(format!("{} payload bytes, expected {expected}", cur.len())));
        }
        if m == 0 {
            return Err(Error::EmptyDatabase);
        }
        let mut data = vec![0.0f32; m * dim];
        LittleEndian::read_f32_into(&cur[..4 * m * dim], &mut data);
        cur = &cur[4 * m * dim..];
        let mut entries = Vec::with_capacity(m);
        for _ in 0..m {
            let id = cur.read_u64::<LittleEndian>()? as usize;
            let mut position = [0.0; 3];
            for c in &mut position {
                *c = cur.read_f64::<LittleEndian>()?;
            }
            entries.push(IndexEntry { id, position });
        }
        if entries.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(bad("ids are not strictly increasing".into()));
        }
        Ok(DescriptorIndex { dim, entries, data })
    }
}
