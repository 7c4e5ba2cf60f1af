//! Per-entity raw multimodal feature vectors.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Where an entity's feature vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Read from a feature file.
    Extracted,
    /// Absent from the feature file; Xavier-uniform filled.
    XavierFallback,
    /// Generated for the whole dataset (no real features).
    Synthetic,
}

/// Dense table of `entity_count × dim` features, stored as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    dim: usize,
    data: Vec<f32>,
    provenance: Vec<Provenance>,
}

/// Xavier-uniform bound for a feature vector treated as a `1 × dim` fan.
pub fn xavier_feature_bound(dim: usize) -> f64 {
    libm::sqrt(6.0 / (1.0 + dim as f64))
}

/// The fallback vector for one entity. Depends only on `(seed, entity, dim)`.
pub fn xavier_feature(seed: u64, entity: u32, dim: usize) -> Vec<f32> {
    let bound = xavier_feature_bound(dim);
    let mut rng = rng::stream(seed, &[0xFEA7, u64::from(entity)]);
    (0..dim).map(|_| rng.gen_range(-bound..bound) as f32).collect()
}

impl FeatureTable {
    /// Builds a table from `(entity, vector)` records. Entities without a
    /// record receive a seeded Xavier vector flagged
    /// [`Provenance::XavierFallback`].
    pub fn from_records<I>(entity_count: usize, dim: usize, records: I, fallback_seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, Vec<f32>)>,
    {
        if dim == 0 {
            return Err(Error::ZeroDimension("feature dim"));
        }
        let mut data = vec![0.0f32; entity_count * dim];
        let mut seen = vec![false; entity_count];
        for (id, v) in records {
            let idx = id as usize;
            if idx >= entity_count {
                return Err(Error::EntityOutOfRange { id, count: entity_count });
            }
            if seen[idx] {
                return Err(Error::DuplicateFeature(id));
            }
            if v.len() != dim {
                return Err(Error::DimensionMismatch { what: "feature vector", expected: dim, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteFeature(id));
            }
            seen[idx] = true;
            data[idx * dim..(idx + 1) * dim].copy_from_slice(&v);
        }
        let mut provenance = Vec::with_capacity(entity_count);
        for (idx, present) in seen.into_iter().enumerate() {
            if present {
                provenance.push(Provenance::Extracted);
            } else {
                let v = xavier_feature(fallback_seed, idx as u32, dim);
                data[idx * dim..(idx + 1) * dim].copy_from_slice(&v);
                provenance.push(Provenance::XavierFallback);
            }
        }
        Ok(Self { dim, data, provenance })
    }

    /// Whole-dataset synthetic features drawn like the fallback.
    pub fn xavier(entity_count: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut table = Self::from_records(entity_count, dim, core::iter::empty(), seed)?;
        table.provenance.fill(Provenance::Synthetic);
        Ok(table)
    }

    pub fn zeros(entity_count: usize, dim: usize) -> Result<Self> {
        Self::from_dense(entity_count, dim, vec![0.0; entity_count * dim])
    }

    /// Wraps a row-major `entity_count × dim` buffer as synthetic features.
    pub fn from_dense(entity_count: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension("feature dim"));
        }
        if data.len() != entity_count * dim {
            return Err(Error::DimensionMismatch {
                what: "feature buffer",
                expected: entity_count * dim,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteFeature((pos / dim) as u32));
        }
        Ok(Self { dim, data, provenance: vec![Provenance::Synthetic; entity_count] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entity_count(&self) -> usize {
        self.provenance.len()
    }

    pub fn get(&self, entity: u32) -> &[f32] {
        let i = entity as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn provenance(&self, entity: u32) -> Provenance {
        self.provenance[entity as usize]
    }

    pub fn fallback_count(&self) -> usize {
        self.provenance.iter().filter(|p| **p == Provenance::XavierFallback).count()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_coverage_has_no_fallbacks() {
        let recs = (0..5u32).map(|i| (i, vec![i as f32; 768]));
        let t = FeatureTable::from_records(5, 768, recs, 0).unwrap();
        assert_eq!(t.fallback_count(), 0);
        assert_eq!(t.get(3)[767], 3.0);
        assert_eq!(t.provenance(4), Provenance::Extracted);
    }

    #[test]
    fn empty_file_falls_back_within_xavier_bound() {
        let dim = 768;
        let t = FeatureTable::from_records(40, dim, core::iter::empty(), 17).unwrap();
        assert_eq!(t.fallback_count(), 40);
        let bound = xavier_feature_bound(dim) as f32;
        let max = t.as_slice().iter().cloned().fold(f32::MIN, f32::max);
        let min = t.as_slice().iter().cloned().fold(f32::MAX, f32::min);
        assert!(max <= bound && min >= -bound);
        // 30720 uniform draws should reach close to both ends.
        assert!(max > 0.99 * bound && min < -0.99 * bound);
    }

    #[test]
    fn fallback_is_seeded_per_entity() {
        let a = FeatureTable::from_records(3, 8, [(1, vec![0.5; 8])], 5).unwrap();
        let b = FeatureTable::from_records(3, 8, core::iter::empty(), 5).unwrap();
        assert_eq!(a.get(0), b.get(0));
        assert_eq!(a.get(2), b.get(2));
        assert_ne!(a.get(0), a.get(2));
    }

    #[test]
    fn bad_records() {
        assert_eq!(
            FeatureTable::from_records(2, 4, [(2, vec![0.0; 4])], 0).unwrap_err(),
            Error::EntityOutOfRange { id: 2, count: 2 }
        );
        assert_eq!(
            FeatureTable::from_records(2, 4, [(1, vec![0.0; 4]), (1, vec![0.0; 4])], 0).unwrap_err(),
            Error::DuplicateFeature(1)
        );
        assert!(matches!(
            FeatureTable::from_records(2, 4, [(1, vec![0.0; 3])], 0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(
            FeatureTable::from_records(2, 2, [(0, vec![f32::NAN, 0.0])], 0).unwrap_err(),
            Error::NonFiniteFeature(0)
        );
        assert_eq!(
            FeatureTable::from_records(2, 0, core::iter::empty(), 0).unwrap_err(),
            Error::ZeroDimension("feature dim")
        );
    }
}
