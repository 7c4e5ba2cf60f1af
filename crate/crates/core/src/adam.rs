//! Adam with lazy row updates: embedding rows absent from a step's gradient
//! are not touched (neither the parameter nor its moments), the projection
//! is stepped whenever the gradient carries it.

use alloc::vec;
use alloc::vec::Vec;

use crate::params::ModelParams;
use crate::real::Real;
use crate::train::Gradients;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 2e-5, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    step: u64,
    m_ent: Vec<T>,
    v_ent: Vec<T>,
    m_rel: Vec<T>,
    v_rel: Vec<T>,
    m_proj: Vec<T>,
    v_proj: Vec<T>,
}

struct StepScalars<T> {
    lr: T,
    b1: T,
    b2: T,
    eps: T,
    c1: T,
    c2: T,
}

#[inline]
fn update<T: Real>(theta: &mut [T], m: &mut [T], v: &mut [T], g: &[T], s: &StepScalars<T>) {
    let one = T::one();
    for i in 0..theta.len() {
        m[i] = s.b1 * m[i] + (one - s.b1) * g[i];
        v[i] = s.b2 * v[i] + (one - s.b2) * g[i] * g[i];
        let m_hat = m[i] / s.c1;
        let v_hat = v[i] / s.c2;
        theta[i] -= s.lr * m_hat / (v_hat.sqrt() + s.eps);
    }
}

impl<T: Real> Adam<T> {
    pub fn new(params: &ModelParams<T>, cfg: AdamConfig) -> Self {
        let z = |n| vec![T::zero(); n];
        Self {
            cfg,
            step: 0,
            m_ent: z(params.struct_emb.len()),
            v_ent: z(params.struct_emb.len()),
            m_rel: z(params.rel_emb.len()),
            v_rel: z(params.rel_emb.len()),
            m_proj: z(params.proj.len()),
            v_proj: z(params.proj.len()),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one step. A gradient with no rows and no projection is a no-op
    /// and does not advance the step counter.
    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &Gradients<T>, freeze_projection: bool) {
        if grads.is_empty() {
            return;
        }
        self.step += 1;
        let t = self.step as i32;
        let s = StepScalars {
            lr: T::from_f64(self.cfg.learning_rate),
            b1: T::from_f64(self.cfg.beta1),
            b2: T::from_f64(self.cfg.beta2),
            eps: T::from_f64(self.cfg.epsilon),
            c1: T::from_f64(1.0 - libm::pow(self.cfg.beta1, t as f64)),
            c2: T::from_f64(1.0 - libm::pow(self.cfg.beta2, t as f64)),
        };
        let d = params.d_e();
        for (&id, g) in &grads.entity {
            let r = id as usize * d..(id as usize + 1) * d;
            update(params.entity_mut(id), &mut self.m_ent[r.clone()], &mut self.v_ent[r], g, &s);
        }
        for (&id, g) in &grads.relation {
            let r = id as usize * d..(id as usize + 1) * d;
            update(params.relation_mut(id), &mut self.m_rel[r.clone()], &mut self.v_rel[r], g, &s);
        }
        if let (Some(g), false) = (&grads.proj, freeze_projection) {
            update(&mut params.proj, &mut self.m_proj, &mut self.v_proj, g, &s);
        }
    }
}
