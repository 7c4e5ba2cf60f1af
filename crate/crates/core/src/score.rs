//! Projection and the five-part TransE composite score.
//!
//! For a triple with head `(h_s, h_m)`, relation `r` and tail `(t_s, t_m)`:
//!
//! | component | head        | tail        |
//! |-----------|-------------|-------------|
//! | `ss`      | `h_s`       | `t_s`       |
//! | `mm`      | `h_m`       | `t_m`       |
//! | `sm`      | `h_s`       | `t_m`       |
//! | `ms`      | `h_m`       | `t_s`       |
//! | `all`     | `h_s + h_m` | `t_s + t_m` |
//!
//! each scored with `f(h, r, t) = -||h + r - t||_p`. `ss` and `mm` are the
//! unimodal terms, the other three the multimodal terms.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::graph::Triple;
use crate::params::ModelParams;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NormOrder {
    #[default]
    L1,
    L2,
}

impl NormOrder {
    pub fn from_p(p: u32) -> Result<Self> {
        match p {
            1 => Ok(NormOrder::L1),
            2 => Ok(NormOrder::L2),
            other => Err(Error::InvalidConfig(alloc::format!("norm order must be 1 or 2, got {other}"))),
        }
    }

    pub fn p(self) -> u32 {
        match self {
            NormOrder::L1 => 1,
            NormOrder::L2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Ss,
    Mm,
    Sm,
    Ms,
    All,
}

impl Component {
    /// Canonical summation order.
    pub const ALL: [Component; 5] = [Component::Ss, Component::Mm, Component::Sm, Component::Ms, Component::All];

    pub fn name(self) -> &'static str {
        match self {
            Component::Ss => "ss",
            Component::Mm => "mm",
            Component::Sm => "sm",
            Component::Ms => "ms",
            Component::All => "all",
        }
    }

    pub fn is_unimodal(self) -> bool {
        matches!(self, Component::Ss | Component::Mm)
    }

    /// (uses structural, uses multimodal) on the head side.
    pub fn head_parts(self) -> (bool, bool) {
        match self {
            Component::Ss | Component::Sm => (true, false),
            Component::Mm | Component::Ms => (false, true),
            Component::All => (true, true),
        }
    }

    /// (uses structural, uses multimodal) on the tail side.
    pub fn tail_parts(self) -> (bool, bool) {
        match self {
            Component::Ss | Component::Ms => (true, false),
            Component::Mm | Component::Sm => (false, true),
            Component::All => (true, true),
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Which of the five components contribute to the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScoreMask([bool; 5]);

impl ScoreMask {
    pub const FULL: ScoreMask = ScoreMask([true; 5]);

    pub fn new(ss: bool, mm: bool, sm: bool, ms: bool, all: bool) -> Result<Self> {
        let m = [ss, mm, sm, ms, all];
        if m.iter().any(|b| *b) {
            Ok(Self(m))
        } else {
            Err(Error::EmptyMask)
        }
    }

    pub fn only(c: Component) -> Self {
        let mut m = [false; 5];
        m[c.index()] = true;
        Self(m)
    }

    pub fn from_components(cs: &[Component]) -> Result<Self> {
        let mut m = [false; 5];
        for c in cs {
            m[c.index()] = true;
        }
        Self::new(m[0], m[1], m[2], m[3], m[4])
    }

    /// Parses `full`, or a comma/plus separated component list such as
    /// `ss,mm` or `sm+ms`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "full" {
            return Ok(Self::FULL);
        }
        let mut m = [false; 5];
        for part in s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()) {
            let c = Component::ALL
                .into_iter()
                .find(|c| c.name() == part)
                .ok_or_else(|| Error::UnknownComponent(part.to_string()))?;
            m[c.index()] = true;
        }
        Self::new(m[0], m[1], m[2], m[3], m[4])
    }

    pub fn enabled(&self, c: Component) -> bool {
        self.0[c.index()]
    }

    pub fn components(&self) -> impl Iterator<Item = Component> + '_ {
        Component::ALL.into_iter().filter(|c| self.enabled(*c))
    }

    pub fn with(mut self, c: Component, on: bool) -> Result<Self> {
        self.0[c.index()] = on;
        Self::new(self.0[0], self.0[1], self.0[2], self.0[3], self.0[4])
    }

    /// True if any enabled component reads a multimodal embedding.
    pub fn needs_multimodal(&self) -> bool {
        self.components().any(|c| c != Component::Ss)
    }
}

impl Default for ScoreMask {
    fn default() -> Self {
        Self::FULL
    }
}

impl fmt::Display for ScoreMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::FULL {
            return f.write_str("full");
        }
        let mut first = true;
        for c in self.components() {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            f.write_str(c.name())?;
        }
        Ok(())
    }
}

const LANES: usize = 8;

/// Sums `|d_i|` or `d_i²` over `n` elements with eight interleaved
/// accumulators combined pairwise. All scoring paths go through this so
/// that cached and uncached evaluation agree bit for bit.
#[inline(always)]
fn reduce<T: Real>(n: usize, p: NormOrder, d: impl Fn(usize) -> T) -> T {
    let mut acc = [T::zero(); LANES];
    let full = n - n % LANES;
    let mut rest = T::zero();
    match p {
        NormOrder::L1 => {
            for base in (0..full).step_by(LANES) {
                for (j, a) in acc.iter_mut().enumerate() {
                    *a += d(base + j).abs();
                }
            }
            for i in full..n {
                rest += d(i).abs();
            }
        }
        NormOrder::L2 => {
            for base in (0..full).step_by(LANES) {
                for (j, a) in acc.iter_mut().enumerate() {
                    let x = d(base + j);
                    *a += x * x;
                }
            }
            for i in full..n {
                let x = d(i);
                rest += x * x;
            }
        }
    }
    let s = lane_sum(&acc, rest);
    match p {
        NormOrder::L1 => s,
        NormOrder::L2 => s.sqrt(),
    }
}

/// `||h + r - t||_p`, lengths assumed equal.
#[inline]
pub fn translation_norm<T: Real>(h: &[T], r: &[T], t: &[T], p: NormOrder) -> T {
    let n = h.len();
    let (h, r, t) = (&h[..n], &r[..n], &t[..n]);
    reduce(n, p, |i| (h[i] + r[i]) - t[i])
}

/// `||(hs + hm) + r - (ts + tm)||_p` without materializing the sums.
#[inline]
fn combined_norm<T: Real>(hs: &[T], hm: &[T], r: &[T], ts: &[T], tm: &[T], p: NormOrder) -> T {
    let n = r.len();
    let (hs, hm, r, ts, tm) = (&hs[..n], &hm[..n], &r[..n], &ts[..n], &tm[..n]);
    reduce(n, p, |i| ((hs[i] + hm[i]) + r[i]) - (ts[i] + tm[i]))
}

/// TransE base score `-||h + r - t||_p`. Zero is the maximum.
pub fn base_score<T: Real>(h: &[T], r: &[T], t: &[T], p: NormOrder) -> Result<T> {
    for (what, v) in [("relation", r), ("tail", t)] {
        if v.len() != h.len() {
            return Err(Error::DimensionMismatch { what, expected: h.len(), found: v.len() });
        }
    }
    Ok(-translation_norm(h, r, t, p))
}

/// Multimodal embedding `W · feature`.
pub fn project<T: Real + From<F>, F: Copy>(params: &ModelParams<T>, feature: &[F]) -> Result<Vec<T>> {
    if feature.len() != params.d_m() {
        return Err(Error::DimensionMismatch { what: "feature", expected: params.d_m(), found: feature.len() });
    }
    let mut out = vec![T::zero(); params.d_e()];
    project_into(params, feature, &mut out);
    Ok(out)
}

pub(crate) fn project_into<T: Real + From<F>, F: Copy>(params: &ModelParams<T>, feature: &[F], out: &mut [T]) {
    for (row, o) in out.iter_mut().enumerate() {
        *o = reduce_dot(params.proj_row(row), feature);
    }
}

#[inline]
fn reduce_dot<T: Real + From<F>, F: Copy>(w: &[T], x: &[F]) -> T {
    let n = w.len();
    let x = &x[..n];
    let mut acc = [T::zero(); LANES];
    let full = n - n % LANES;
    for base in (0..full).step_by(LANES) {
        for (j, a) in acc.iter_mut().enumerate() {
            *a += w[base + j] * <T as From<F>>::from(x[base + j]);
        }
    }
    let mut rest = T::zero();
    for i in full..n {
        rest += w[i] * <T as From<F>>::from(x[i]);
    }
    lane_sum(&acc, rest)
}

/// Embeddings of one (possibly corrupted) triple.
#[derive(Debug, Clone, Copy)]
pub struct TripleView<'a, T> {
    pub hs: &'a [T],
    pub hm: &'a [T],
    pub r: &'a [T],
    pub ts: &'a [T],
    pub tm: &'a [T],
}

impl<T: Real> TripleView<'_, T> {
    /// Norm `||H + r - T||_p` for one component.
    #[inline]
    pub fn norm(&self, c: Component, p: NormOrder) -> T {
        match c {
            Component::Ss => translation_norm(self.hs, self.r, self.ts, p),
            Component::Mm => translation_norm(self.hm, self.r, self.tm, p),
            Component::Sm => translation_norm(self.hs, self.r, self.tm, p),
            Component::Ms => translation_norm(self.hm, self.r, self.ts, p),
            Component::All => combined_norm(self.hs, self.hm, self.r, self.ts, self.tm, p),
        }
    }

    pub fn component(&self, c: Component, p: NormOrder) -> T {
        -self.norm(c, p)
    }

    /// The difference vector `d = H + r - T` of a component.
    pub fn diff(&self, c: Component, out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = match c {
                Component::Ss => (self.hs[i] + self.r[i]) - self.ts[i],
                Component::Mm => (self.hm[i] + self.r[i]) - self.tm[i],
                Component::Sm => (self.hs[i] + self.r[i]) - self.tm[i],
                Component::Ms => (self.hm[i] + self.r[i]) - self.ts[i],
                Component::All => ((self.hs[i] + self.hm[i]) + self.r[i]) - (self.ts[i] + self.tm[i]),
            };
        }
    }

    /// The five component scores in canonical order (all computed,
    /// regardless of any mask).
    pub fn parts(&self, p: NormOrder) -> [T; 5] {
        Component::ALL.map(|c| self.component(c, p))
    }
}

#[inline(always)]
fn lane_sum<T: Real>(acc: &[T; LANES], rest: T) -> T {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + rest
}

/// All five norms of a view in one pass over the coordinates. Per-component
/// accumulation matches the single-component kernel, so results equal [`TripleView::norm`]
/// bit for bit.
#[inline]
pub fn fused_norms<T: Real>(v: &TripleView<'_, T>, p: NormOrder) -> [T; 5] {
    match p {
        NormOrder::L1 => fused_norms_impl::<T, true>(v),
        NormOrder::L2 => fused_norms_impl::<T, false>(v),
    }
}

#[inline(always)]
#[allow(clippy::needless_range_loop)]
fn fused_norms_impl<T: Real, const L1: bool>(v: &TripleView<'_, T>) -> [T; 5] {
    let n = v.r.len();
    let (hs, hm, r, ts, tm) = (&v.hs[..n], &v.hm[..n], &v.r[..n], &v.ts[..n], &v.tm[..n]);
    let mut acc = [[T::zero(); LANES]; 5];
    let mut rest = [T::zero(); 5];
    let term = |x: T| if L1 { x.abs() } else { x * x };
    let diffs = |i: usize| {
        let a = hs[i] + r[i];
        let b = hm[i] + r[i];
        let c = (hs[i] + hm[i]) + r[i];
        let tt = ts[i] + tm[i];
        [a - ts[i], b - tm[i], a - tm[i], b - ts[i], c - tt]
    };
    let full = n - n % LANES;
    for base in (0..full).step_by(LANES) {
        for j in 0..LANES {
            let d = diffs(base + j);
            for c in 0..5 {
                acc[c][j] += term(d[c]);
            }
        }
    }
    for i in full..n {
        let d = diffs(i);
        for c in 0..5 {
            rest[c] += term(d[c]);
        }
    }
    core::array::from_fn(|c| {
        let s = lane_sum(&acc[c], rest[c]);
        if L1 {
            s
        } else {
            s.sqrt()
        }
    })
}

/// [`masked_score`] for a single view with every component enabled.
#[inline]
pub fn full_score<T: Real>(v: &TripleView<'_, T>, p: NormOrder) -> T {
    let norms = fused_norms(v, p);
    let mut acc = T::zero();
    for n in norms {
        acc += -n;
    }
    acc
}

/// Subgradient of `f = -||d||_p` with respect to `d`, written into `d`.
/// `p = 1` uses `sign(0) = 0`; `p = 2` uses `0` at `d = 0`.
pub fn score_subgradient<T: Real>(d: &mut [T], p: NormOrder) {
    match p {
        NormOrder::L1 => {
            for x in d.iter_mut() {
                *x = if *x > T::zero() {
                    -T::one()
                } else if *x < T::zero() {
                    T::one()
                } else {
                    T::zero()
                };
            }
        }
        NormOrder::L2 => {
            let norm = d.iter().map(|x| *x * *x).sum::<T>().sqrt();
            if norm > T::zero() {
                for x in d.iter_mut() {
                    *x = -*x / norm;
                }
            } else {
                d.fill(T::zero());
            }
        }
    }
}

/// Masked sum where unimodal components read `uni` and multimodal
/// components read `multi`. For an ordinary triple both views are the same.
#[inline]
pub fn masked_score<T: Real>(uni: &TripleView<'_, T>, multi: &TripleView<'_, T>, mask: ScoreMask, p: NormOrder) -> T {
    let mut acc = T::zero();
    for c in Component::ALL {
        if mask.enabled(c) {
            let view = if c.is_unimodal() { uni } else { multi };
            acc += view.component(c, p);
        }
    }
    acc
}

/// Full composite score of a triple, projecting both features on the fly.
pub fn composite_score<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    triple: &Triple,
    mask: ScoreMask,
    p: NormOrder,
) -> Result<T> {
    let dims = params.dims();
    for id in [triple.head, triple.tail] {
        if id as usize >= dims.entity_count {
            return Err(Error::EntityOutOfRange { id, count: dims.entity_count });
        }
    }
    if triple.relation as usize >= dims.relation_count {
        return Err(Error::RelationOutOfRange { id: triple.relation, count: dims.relation_count });
    }
    let hm = project(params, features.get(triple.head))?;
    let tm = project(params, features.get(triple.tail))?;
    let view = TripleView {
        hs: params.entity(triple.head),
        hm: &hm,
        r: params.relation(triple.relation),
        ts: params.entity(triple.tail),
        tm: &tm,
    };
    Ok(masked_score(&view, &view, mask, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Dims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn base_score_examples() {
        let h = [1.0f64, 0.0];
        let r = [0.0, 1.0];
        let t = [0.0, 0.0];
        assert_eq!(base_score(&h, &r, &t, NormOrder::L1).unwrap(), -2.0);
        assert_eq!(base_score(&h, &r, &t, NormOrder::L2).unwrap(), -libm::sqrt(2.0));
        assert_eq!(base_score(&h, &r, &[1.0, 1.0], NormOrder::L2).unwrap(), 0.0);
        assert!(base_score(&h, &r, &[0.0], NormOrder::L1).is_err());
    }

    #[test]
    fn reduce_matches_naive_sum_for_odd_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1usize, 7, 8, 9, 23, 128] {
            let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let l1: f64 = (0..n).map(|i| (h[i] + r[i] - t[i]).abs()).sum();
            let l2: f64 = (0..n).map(|i| (h[i] + r[i] - t[i]).powi(2)).sum::<f64>().sqrt();
            assert!(rel_close(translation_norm(&h, &r, &t, NormOrder::L1), l1, 1e-12));
            assert!(rel_close(translation_norm(&h, &r, &t, NormOrder::L2), l2, 1e-12));
        }
    }

    #[test]
    fn project_zero_and_identity() {
        let dims = Dims::new(1, 1, 4, 4);
        let zero = ModelParams::<f64>::from_parts(dims, vec![0.0; 4], vec![0.0; 4], vec![0.0; 16]).unwrap();
        assert_eq!(project(&zero, &[1.0f32, 2.0, 3.0, 4.0]).unwrap(), vec![0.0; 4]);
        let mut eye = vec![0.0; 16];
        for i in 0..4 {
            eye[i * 4 + i] = 1.0;
        }
        let ident = ModelParams::<f64>::from_parts(dims, vec![0.0; 4], vec![0.0; 4], eye).unwrap();
        assert_eq!(project(&ident, &[1.5f32, -2.0, 3.25, 4.0]).unwrap(), vec![1.5, -2.0, 3.25, 4.0]);
        assert!(project(&ident, &[1.0f32; 3]).is_err());
    }

    #[test]
    fn project_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dims = Dims::new(1, 1, 3, 4);
        let w: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let params = ModelParams::from_parts(dims, vec![0.0; 3], vec![0.0; 3], w.clone()).unwrap();
        let got = project(&params, &x).unwrap();
        for i in 0..3 {
            let mut expected = 0.0;
            for j in 0..4 {
                expected += w[i * 4 + j] * x[j];
            }
            assert!(rel_close(got[i], expected, 1e-14));
        }
    }

    #[test]
    fn subgradient_sign_convention() {
        let mut d = [2.0f64, -1.0, 0.0];
        score_subgradient(&mut d, NormOrder::L1);
        assert_eq!(d, [-1.0, 1.0, 0.0]);
        let mut d = [3.0f64, 4.0];
        score_subgradient(&mut d, NormOrder::L2);
        assert_eq!(d, [-0.6, -0.8]);
        let mut d = [0.0f64, 0.0];
        score_subgradient(&mut d, NormOrder::L2);
        assert_eq!(d, [0.0, 0.0]);
    }

    #[test]
    fn mask_parse_and_display() {
        assert_eq!(ScoreMask::parse("full").unwrap(), ScoreMask::FULL);
        assert_eq!(ScoreMask::parse("ss").unwrap(), ScoreMask::only(Component::Ss));
        let s5 = ScoreMask::parse("sm+ms").unwrap();
        assert!(s5.enabled(Component::Sm) && s5.enabled(Component::Ms) && !s5.enabled(Component::All));
        assert_eq!(alloc::format!("{s5}"), "sm,ms");
        assert_eq!(ScoreMask::parse("").unwrap_err(), Error::EmptyMask);
        assert!(matches!(ScoreMask::parse("xx"), Err(Error::UnknownComponent(_))));
        assert!(!ScoreMask::only(Component::Ss).needs_multimodal());
        assert!(ScoreMask::only(Component::All).needs_multimodal());
        assert_eq!(ScoreMask::only(Component::Ss).with(Component::Ss, false).unwrap_err(), Error::EmptyMask);
    }

    #[test]
    fn norm_order_from_p() {
        assert_eq!(NormOrder::from_p(1).unwrap(), NormOrder::L1);
        assert_eq!(NormOrder::from_p(2).unwrap().p(), 2);
        assert!(NormOrder::from_p(3).is_err());
    }
}
