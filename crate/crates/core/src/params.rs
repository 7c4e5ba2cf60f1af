//! Trainable parameters: structural entity embeddings, relation embeddings
//! and the feature projection matrix.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub entity_count: usize,
    pub relation_count: usize,
    /// Structural / multimodal embedding size.
    pub d_e: usize,
    /// Raw feature size.
    pub d_m: usize,
}

impl Dims {
    pub fn new(entity_count: usize, relation_count: usize, d_e: usize, d_m: usize) -> Self {
        Self { entity_count, relation_count, d_e, d_m }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entity_count == 0 {
            return Err(Error::ZeroDimension("entity count"));
        }
        if self.relation_count == 0 {
            return Err(Error::ZeroDimension("relation count"));
        }
        if self.d_e == 0 {
            return Err(Error::ZeroDimension("d_e"));
        }
        if self.d_m == 0 {
            return Err(Error::ZeroDimension("d_m"));
        }
        Ok(())
    }
}

/// Row-major parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    dims: Dims,
    /// `entity_count × d_e`
    pub struct_emb: Vec<T>,
    /// `relation_count × d_e`
    pub rel_emb: Vec<T>,
    /// `d_e × d_m`, maps a raw feature to a multimodal embedding.
    pub proj: Vec<T>,
}

fn xavier_fill<T: Real>(out: &mut Vec<T>, len: usize, fan_in: usize, fan_out: usize, seed: u64, tag: u64) {
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let mut rng = rng::stream(seed, &[tag]);
    out.extend((0..len).map(|_| T::from_f64(rng.gen_range(-bound..bound))));
}

impl<T: Real> ModelParams<T> {
    /// Xavier-uniform initialization. Embedding rows use fan `(d_e, d_e)`,
    /// the projection uses `(d_m, d_e)`. Deterministic in `seed`.
    pub fn init(dims: Dims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut struct_emb = Vec::with_capacity(dims.entity_count * dims.d_e);
        let mut rel_emb = Vec::with_capacity(dims.relation_count * dims.d_e);
        let mut proj = Vec::with_capacity(dims.d_e * dims.d_m);
        xavier_fill(&mut struct_emb, dims.entity_count * dims.d_e, dims.d_e, dims.d_e, seed, 1);
        xavier_fill(&mut rel_emb, dims.relation_count * dims.d_e, dims.d_e, dims.d_e, seed, 2);
        xavier_fill(&mut proj, dims.d_e * dims.d_m, dims.d_m, dims.d_e, seed, 3);
        Ok(Self { dims, struct_emb, rel_emb, proj })
    }

    pub fn from_parts(dims: Dims, struct_emb: Vec<T>, rel_emb: Vec<T>, proj: Vec<T>) -> Result<Self> {
        dims.validate()?;
        for (what, v, expected) in [
            ("struct_emb", &struct_emb, dims.entity_count * dims.d_e),
            ("rel_emb", &rel_emb, dims.relation_count * dims.d_e),
            ("proj", &proj, dims.d_e * dims.d_m),
        ] {
            if v.len() != expected {
                return Err(Error::DimensionMismatch { what, expected, found: v.len() });
            }
        }
        Ok(Self { dims, struct_emb, rel_emb, proj })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn d_e(&self) -> usize {
        self.dims.d_e
    }

    pub fn d_m(&self) -> usize {
        self.dims.d_m
    }

    pub fn entity(&self, id: u32) -> &[T] {
        let d = self.dims.d_e;
        let i = id as usize;
        &self.struct_emb[i * d..(i + 1) * d]
    }

    pub fn entity_mut(&mut self, id: u32) -> &mut [T] {
        let d = self.dims.d_e;
        let i = id as usize;
        &mut self.struct_emb[i * d..(i + 1) * d]
    }

    pub fn relation(&self, id: u32) -> &[T] {
        let d = self.dims.d_e;
        let i = id as usize;
        &self.rel_emb[i * d..(i + 1) * d]
    }

    pub fn relation_mut(&mut self, id: u32) -> &mut [T] {
        let d = self.dims.d_e;
        let i = id as usize;
        &mut self.rel_emb[i * d..(i + 1) * d]
    }

    pub fn proj_row(&self, row: usize) -> &[T] {
        let d = self.dims.d_m;
        &self.proj[row * d..(row + 1) * d]
    }

    pub fn is_finite(&self) -> bool {
        self.struct_emb.iter().chain(&self.rel_emb).chain(&self.proj).all(|x| x.is_finite())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.to_f64().unwrap_or(f64::NAN))).collect();
        ModelParams {
            dims: self.dims,
            struct_emb: conv(&self.struct_emb),
            rel_emb: conv(&self.rel_emb),
            proj: conv(&self.proj),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let dims = Dims::new(10, 3, 8, 12);
        let a = ModelParams::<f32>::init(dims, 42).unwrap();
        let b = ModelParams::<f32>::init(dims, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, ModelParams::<f32>::init(dims, 43).unwrap());
        assert_eq!(a.proj.len(), 8 * 12);
    }

    #[test]
    fn init_respects_xavier_bounds() {
        let dims = Dims::new(200, 20, 128, 768);
        let p = ModelParams::<f64>::init(dims, 1).unwrap();
        let emb_bound = libm::sqrt(6.0 / 256.0);
        let proj_bound = libm::sqrt(6.0 / (768.0 + 128.0));
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let emb_max = max_abs(&p.struct_emb).max(max_abs(&p.rel_emb));
        assert!(emb_max <= emb_bound && emb_max > 0.99 * emb_bound);
        let proj_max = max_abs(&p.proj);
        assert!(proj_max <= proj_bound && proj_max > 0.99 * proj_bound);
    }

    #[test]
    fn degenerate_dims() {
        assert_eq!(
            ModelParams::<f32>::init(Dims::new(0, 1, 4, 4), 0).unwrap_err(),
            Error::ZeroDimension("entity count")
        );
        assert_eq!(ModelParams::<f32>::init(Dims::new(1, 1, 0, 4), 0).unwrap_err(), Error::ZeroDimension("d_e"));
        assert!(ModelParams::<f32>::from_parts(
            Dims::new(1, 1, 2, 2),
            alloc::vec![0.0; 2],
            alloc::vec![0.0; 2],
            alloc::vec![0.0; 3]
        )
        .is_err());
    }
}
