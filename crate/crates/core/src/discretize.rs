//! Random discretization of hypotheses.
//!
//! A draw `(A, t)` consists of a `k x d` Gaussian matrix with `N(0, 1/k)`
//! entries and `k` uniform offsets. A hypothesis `w` is projected to `Aw` and
//! every coordinate is snapped to the offset grid
//! `{ (z + 1/2) / (10 sqrt k) : z in Z }`, rounding down with the probability
//! that makes the snapped coordinate an unbiased estimate of `(Aw)_i`.
//!
//! Grid vectors are stored by their integer indices `z`; real coordinates are
//! rebuilt on demand so membership questions are answered in exact integer
//! arithmetic.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::margins::{dot, Label, UnitVector};
use crate::rng::{self, TrialRng};
use crate::stats::Estimate;
use crate::{Error, Result};

/// Grid spacing `(10 sqrt k)^-1`.
pub fn grid_pitch(k: usize) -> f64 {
    1.0 / (10.0 * (k as f64).sqrt())
}

/// Realized grid coordinate `(1/2)(10 sqrt k)^-1 + z (10 sqrt k)^-1`.
pub fn grid_coordinate(z: i64, k: usize) -> f64 {
    (z as f64 + 0.5) / (10.0 * (k as f64).sqrt())
}

/// Left grid index and round-down probability for a value `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rounding {
    /// Unique integer with `grid(z) <= v < grid(z + 1)`.
    pub z: i64,
    /// Probability of rounding down to `grid(z)`; solves
    /// `v = p grid(z) + (1 - p) grid(z + 1)`.
    pub p: f64,
}

impl Rounding {
    /// Grid index chosen for offset `t`: down iff `t <= p`.
    pub fn resolve(self, t: f64) -> i64 {
        if t <= self.p {
            self.z
        } else {
            self.z + 1
        }
    }
}

/// Bracketing grid cell and round-down probability of `v` (finite).
pub fn rounding_probability(v: f64, k: usize) -> Rounding {
    debug_assert!(v.is_finite(), "rounding a non-finite value");
    let scale = 10.0 * (k as f64).sqrt();
    let mut z = (v * scale - 0.5).floor() as i64;
    // The floor can land one cell off when v sits within an ulp of a grid
    // point; fix the bracket against the realized coordinates.
    while grid_coordinate(z, k) > v {
        z -= 1;
    }
    while grid_coordinate(z + 1, k) <= v {
        z += 1;
    }
    let lo = grid_coordinate(z, k);
    let hi = grid_coordinate(z + 1, k);
    let p = ((hi - v) / (hi - lo)).clamp(0.0, 1.0);
    Rounding { z, p }
}

/// Snaps a single value with offset `t`, returning its grid index.
pub fn snap_value(v: f64, k: usize, t: f64) -> i64 {
    rounding_probability(v, k).resolve(t)
}

/// A vector of the offset grid in `R^k`, held as integer indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridVector {
    z: Vec<i64>,
}

impl GridVector {
    pub fn from_indices(z: Vec<i64>) -> Self {
        assert!(!z.is_empty(), "grid vector needs k >= 1");
        GridVector { z }
    }

    /// Snaps every coordinate of `v` using the matching offset in `t`.
    pub fn snap(v: &[f64], t: &[f64]) -> Self {
        assert_eq!(v.len(), t.len(), "one offset per coordinate");
        let k = v.len();
        GridVector {
            z: v.iter().zip(t).map(|(&vi, &ti)| snap_value(vi, k, ti)).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.z.len()
    }

    pub fn indices(&self) -> &[i64] {
        &self.z
    }

    pub fn coords(&self) -> Vec<f64> {
        let k = self.k();
        self.z.iter().map(|&z| grid_coordinate(z, k)).collect()
    }

    /// `sum (2 z_i + 1)^2 = 400 k ||g||^2`, exact.
    pub fn scaled_norm_sq(&self) -> u128 {
        self.z
            .iter()
            .map(|&z| {
                let o = (2 * z as i128 + 1).unsigned_abs();
                o * o
            })
            .sum()
    }

    pub fn norm(&self) -> f64 {
        (self.scaled_norm_sq() as f64 / (400.0 * self.k() as f64)).sqrt()
    }

    pub fn level(&self) -> GridFamilyIndex {
        grid_level(self)
    }
}

/// Index `i` of the grid family `G_i = { g : ||g|| <= 4 * 2^i }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridFamilyIndex(pub u32);

/// `400 k (4 * 2^i)^2`: the squared radius of `G_i` in scaled units.
fn family_radius_scaled(k: usize, level: u32) -> u128 {
    6400u128 * k as u128 * (1u128 << (2 * level))
}

/// Smallest `i` with `||g|| <= 2^i * 4` (closed boundary).
pub fn grid_level(g: &GridVector) -> GridFamilyIndex {
    let s = g.scaled_norm_sq();
    let mut level = 0u32;
    while family_radius_scaled(g.k(), level) < s {
        level += 1;
    }
    GridFamilyIndex(level)
}

/// Exact size of `G_i` together with the counting bound `2^(2^(i+7) k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCount {
    pub count: u128,
    /// Exponent of the bound: `2^(i+7) * k`.
    pub bound_log2: u128,
    pub within_bound: bool,
}

/// Largest enumeration accepted (outer loop iterations).
const MAX_ENUMERATION_WORK: u128 = 200_000_000;

/// Number of odd integers `o` with `o^2 <= r`.
fn odd_count(r: u128) -> u128 {
    let s = isqrt(r);
    if s == 0 {
        0
    } else {
        let m = if s % 2 == 1 { s } else { s - 1 };
        m + 1
    }
}

fn isqrt(r: u128) -> u128 {
    let mut s = (r as f64).sqrt() as u128;
    while s * s > r {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= r {
        s += 1;
    }
    s
}

/// Counts `z in Z^dims` with `sum (2 z_j + 1)^2 <= r`.
fn count_odd_vectors(dims: usize, r: u128) -> u128 {
    if dims == 1 {
        return odd_count(r);
    }
    let s = isqrt(r);
    let mut total = 0;
    let mut o: u128 = 1;
    while o <= s {
        // +o and -o
        total += 2 * count_odd_vectors(dims - 1, r - o * o);
        o += 2;
    }
    total
}

/// Exact lattice count of `G_i` for `k <= 3`, checked against the bound.
pub fn grid_count(k: usize, level: u32) -> Result<GridCount> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if k > 3 {
        return Err(Error::EnumerationTooLarge(format!(
            "exact enumeration supports k <= 3, got k = {k}"
        )));
    }
    if level > 40 {
        return Err(Error::EnumerationTooLarge(format!("level {level} too large")));
    }
    let r = family_radius_scaled(k, level);
    let per_axis = isqrt(r);
    let work = per_axis.pow(k.saturating_sub(1) as u32);
    if work > MAX_ENUMERATION_WORK {
        return Err(Error::EnumerationTooLarge(format!(
            "k = {k}, level = {level} needs ~{work} iterations"
        )));
    }
    let count = count_odd_vectors(k, r);
    let bound_log2 = (1u128 << (level + 7)) * k as u128;
    let bits = 128 - count.leading_zeros() as u128;
    // count < 2^bits, so bits <= exponent implies count <= 2^exponent.
    let within_bound = bits <= bound_log2 || count <= 1;
    Ok(GridCount {
        count,
        bound_log2,
        within_bound,
    })
}

/// One realization of the projection matrix and rounding offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationDraw {
    k: usize,
    d: usize,
    /// Row-major `k x d`.
    a: Vec<f64>,
    t: Vec<f64>,
}

impl DiscretizationDraw {
    pub fn sample<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if d == 0 {
            return Err(Error::param("d", "must be at least 1"));
        }
        let sd = 1.0 / (k as f64).sqrt();
        let a = (0..k * d)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let t = (0..k).map(|_| rng.random::<f64>()).collect();
        Ok(DiscretizationDraw { k, d, a, t })
    }

    pub fn from_parts(k: usize, d: usize, a: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        if k == 0 || d == 0 || a.len() != k * d || t.len() != k {
            return Err(Error::param("draw", "inconsistent matrix or offset shape"));
        }
        if t.iter().any(|ti| !(0.0..=1.0).contains(ti)) {
            return Err(Error::param("t", "offsets must lie in [0, 1]"));
        }
        Ok(DiscretizationDraw { k, d, a, t })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn offsets(&self) -> &[f64] {
        &self.t
    }

    pub fn with_offsets(&self, t: Vec<f64>) -> Result<Self> {
        Self::from_parts(self.k, self.d, self.a.clone(), t)
    }

    /// `A v`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: v.len(),
            });
        }
        Ok(self.a.chunks_exact(self.d).map(|row| dot(row, v)).collect())
    }

    /// `h_{A,t}(w)`.
    pub fn snap(&self, w: &UnitVector) -> Result<GridVector> {
        let aw = self.project(w.as_slice())?;
        Ok(GridVector::snap(&aw, &self.t))
    }
}

/// Deterministic draw from a seed.
pub fn sample_draw(k: usize, d: usize, seed: u64) -> Result<DiscretizationDraw> {
    DiscretizationDraw::sample(k, d, &mut rng::stream_rng(seed, 0))
}

/// How `y <h_{A,t}(w), A x>` is sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginSampler {
    /// Uses only `alpha = y <w, x>` through the Gaussian `X / Y / Z`
    /// construction.
    DimensionFree { alpha: f64 },
    /// Draws the full `k x d` matrix and offsets for an explicit `(w, x, y)`
    /// with unit-norm `x`.
    Direct { w: UnitVector, x: Vec<f64>, y: Label },
}

impl MarginSampler {
    pub fn dimension_free(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(MarginSampler::DimensionFree { alpha })
    }

    pub fn direct(w: UnitVector, x: Vec<f64>, y: Label) -> Result<Self> {
        if x.len() != w.dim() {
            return Err(Error::DimensionMismatch {
                expected: w.dim(),
                got: x.len(),
            });
        }
        Ok(MarginSampler::Direct { w, x, y })
    }

    pub fn alpha(&self) -> f64 {
        match self {
            MarginSampler::DimensionFree { alpha } => *alpha,
            MarginSampler::Direct { w, x, y } => y.value() * dot(w.as_slice(), x),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> f64 {
        match self {
            MarginSampler::DimensionFree { alpha } => dimension_free_margin(*alpha, k, rng),
            MarginSampler::Direct { w, x, y } => direct_margin(w.as_slice(), x, *y, k, rng),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha.abs() > 1.0 {
        return Err(Error::param("alpha", format!("|{alpha}| exceeds 1")));
    }
    Ok(())
}

/// One draw of `<X', Z>` with `X_i ~ N(0, 1/k)`, `Y_i ~ N(0, (1-a^2)/k)`,
/// `Z = a X + Y` and `X'` the randomized snap of `X`.
///
/// Per coordinate the stream consumes `X_i`, then the standard normal behind
/// `Y_i`, then the offset, so equal seeds couple draws across `alpha`.
pub fn dimension_free_margin<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> f64 {
    let sd = 1.0 / (k as f64).sqrt();
    let y_sd = (1.0 - alpha * alpha).max(0.0).sqrt() * sd;
    let mut acc = 0.0;
    for _ in 0..k {
        let x = sd * rng.sample::<f64, _>(StandardNormal);
        let y = y_sd * rng.sample::<f64, _>(StandardNormal);
        let t: f64 = rng.random();
        let xp = grid_coordinate(snap_value(x, k, t), k);
        acc += xp * (alpha * x + y);
    }
    acc
}

/// One draw of `y <h_{A,t}(w), A x>` through the full pipeline, one matrix
/// row at a time.
pub fn direct_margin<R: Rng + ?Sized>(w: &[f64], x: &[f64], y: Label, k: usize, rng: &mut R) -> f64 {
    let sd = 1.0 / (k as f64).sqrt();
    let mut acc = 0.0;
    for _ in 0..k {
        let mut aw = 0.0;
        let mut ax = 0.0;
        for (wj, xj) in w.iter().zip(x) {
            let a = sd * rng.sample::<f64, _>(StandardNormal);
            aw += a * wj;
            ax += a * xj;
        }
        let t: f64 = rng.random();
        let h = grid_coordinate(snap_value(aw, k, t), k);
        acc += h * ax;
    }
    y.value() * acc
}

/// Single draw of the margin distribution from a seed.
pub fn sample_margin(alpha: f64, k: usize, seed: u64) -> Result<f64> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    Ok(dimension_free_margin(alpha, k, &mut rng::stream_rng(seed, 0)))
}

/// `samples` independent margin draws, in trial order.
pub fn margin_samples(sampler: &MarginSampler, k: usize, samples: u64, seed: u64) -> Vec<f64> {
    rng::par_trials(samples, seed, |_, r: &mut TrialRng| sampler.draw(k, r))
}

/// Monte Carlo estimate of `Pr[|<h, Ax> - alpha| > gamma]` for
/// `y <w, x> = alpha`, using the dimension-free sampler.
pub fn estimate_preservation(alpha: f64, gamma: f64, k: usize, trials: u64, seed: u64) -> Result<Estimate> {
    estimate_preservation_with(&MarginSampler::dimension_free(alpha)?, gamma, k, trials, seed)
}

/// As [`estimate_preservation`] with an explicit sampler.
pub fn estimate_preservation_with(
    sampler: &MarginSampler,
    gamma: f64,
    k: usize,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param("gamma", format!("{gamma} is not in (0, 1]")));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let alpha = sampler.alpha();
    let hits = rng::par_count(trials, seed, |_, r| (sampler.draw(k, r) - alpha).abs() > gamma);
    Ok(Estimate::proportion(hits, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_point_rounds_down_with_certainty() {
        for k in [1, 2, 7, 64, 1000] {
            for z in [-30, -1, 0, 1, 17] {
                let v = grid_coordinate(z, k);
                let r = rounding_probability(v, k);
                assert_eq!(r.z, z);
                assert_eq!(r.p, 1.0);
                assert_eq!(snap_value(v, k, 1.0), z);
            }
        }
    }

    #[test]
    fn midpoint_is_a_fair_coin() {
        for k in [1, 3, 64] {
            let v = grid_coordinate(4, k) + 0.5 * grid_pitch(k);
            let r = rounding_probability(v, k);
            assert_eq!(r.z, 4);
            assert_abs_diff_eq!(r.p, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_level_examples() {
        for k in [1, 5, 100] {
            let g = GridVector::from_indices(vec![0; k]);
            assert_abs_diff_eq!(g.norm(), 0.05, epsilon = 1e-15);
            assert_eq!(grid_level(&g), GridFamilyIndex(0));
        }
        // k = 1: coordinate (z + 1/2)/10. z = 39 -> 3.95 (level 0), z = 49 -> 4.95 (level 1), z = 80 -> 8.05 (level 2).
        assert_eq!(GridVector::from_indices(vec![39]).level(), GridFamilyIndex(0));
        assert_eq!(GridVector::from_indices(vec![40]).level(), GridFamilyIndex(1));
        assert_eq!(GridVector::from_indices(vec![49]).level(), GridFamilyIndex(1));
        assert_eq!(GridVector::from_indices(vec![80]).level(), GridFamilyIndex(2));
    }

    #[test]
    fn grid_level_boundary_is_closed() {
        // k = 8 with odd parts (1,1,1,1,37,37,37,217): sum of squares 51200, norm exactly 4.
        let g = GridVector::from_indices(vec![0, 0, 0, 0, 18, 18, 18, 108]);
        assert_eq!(g.scaled_norm_sq(), 51200);
        assert_eq!(g.level(), GridFamilyIndex(0));
        let g = GridVector::from_indices(vec![0, 0, 0, 0, 18, 18, 18, 109]);
        assert_eq!(g.level(), GridFamilyIndex(1));
    }

    #[test]
    fn grid_count_examples() {
        let c = grid_count(1, 0).unwrap();
        assert_eq!(c.count, 80);
        assert_eq!(c.bound_log2, 128);
        assert!(c.within_bound);
        let c2 = grid_count(2, 0).unwrap();
        assert_eq!(c2.bound_log2, 256);
        assert!(c2.within_bound);
        assert!(matches!(grid_count(4, 0), Err(Error::EnumerationTooLarge(_))));
    }

    #[test]
    fn draws_are_deterministic() {
        let a = sample_draw(8, 5, 42).unwrap();
        let b = sample_draw(8, 5, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_draw(8, 5, 43).unwrap());
        assert!(a.offsets().iter().all(|t| (0.0..=1.0).contains(t)));
    }

    #[test]
    fn draw_shape_errors() {
        assert!(DiscretizationDraw::from_parts(2, 2, vec![0.0; 3], vec![0.5; 2]).is_err());
        assert!(DiscretizationDraw::from_parts(1, 1, vec![0.0], vec![1.5]).is_err());
        let draw = sample_draw(3, 2, 1).unwrap();
        assert!(draw.project(&[1.0]).is_err());
    }

    #[test]
    fn snap_stays_within_one_pitch() {
        let draw = sample_draw(16, 6, 9).unwrap();
        let w = UnitVector::normalize(vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0]).unwrap();
        let aw = draw.project(w.as_slice()).unwrap();
        let h = draw.snap(&w).unwrap().coords();
        let pitch = grid_pitch(16);
        let mut sq = 0.0;
        for (hi, vi) in h.iter().zip(&aw) {
            assert!((hi - vi).abs() <= pitch);
            sq += (hi - vi).powi(2);
        }
        assert!(sq.sqrt() <= 0.1 + 1e-12);
    }

    #[test]
    fn alpha_one_margin_mean_is_one() {
        let s = MarginSampler::dimension_free(1.0).unwrap();
        let v = margin_samples(&s, 32, 100_000, 5);
        let m = Estimate::mean(&v);
        assert!((m.value - 1.0).abs() <= 3.0 * m.stderr, "{m:?}");
    }

    #[test]
    fn alpha_zero_margin_mean_is_zero() {
        let s = MarginSampler::dimension_free(0.0).unwrap();
        let v = margin_samples(&s, 32, 100_000, 6);
        let m = Estimate::mean(&v);
        assert!(m.value.abs() <= 3.0 * m.stderr, "{m:?}");
    }

    #[test]
    fn sampler_rejects_bad_alpha() {
        assert!(MarginSampler::dimension_free(1.5).is_err());
        assert!(sample_margin(f64::NAN, 4, 1).is_err());
        assert!(estimate_preservation(0.0, 0.0, 4, 10, 1).is_err());
    }

    #[test]
    fn preservation_small_at_large_k() {
        let e = estimate_preservation(0.0, 0.5, 512, 20_000, 3).unwrap();
        assert!(e.value < 0.01, "{e:?}");
    }

    proptest! {
        #[test]
        fn rounding_identity(v in -50.0f64..50.0, k in 1usize..5000) {
            let r = rounding_probability(v, k);
            let lo = grid_coordinate(r.z, k);
            let hi = grid_coordinate(r.z + 1, k);
            prop_assert!(lo <= v && v < hi);
            prop_assert!((0.0..=1.0).contains(&r.p));
            prop_assert!((r.p * lo + (1.0 - r.p) * hi - v).abs() < 1e-12);
        }

        #[test]
        fn snapped_coordinates_never_zero(v in prop::collection::vec(-2.0f64..2.0, 1..64), seed in any::<u64>()) {
            let mut r = rng::stream_rng(seed, 0);
            let t: Vec<f64> = v.iter().map(|_| r.random()).collect();
            let g = GridVector::snap(&v, &t);
            // odd multiples of half a pitch
            prop_assert!(g.coords().iter().all(|c| *c != 0.0));
            prop_assert!(g.norm() >= 0.05 - 1e-15);
            let lvl = g.level().0;
            prop_assert!(g.norm() <= 4.0 * 2f64.powi(lvl as i32) + 1e-12);
            if lvl > 0 {
                prop_assert!(g.norm() > 4.0 * 2f64.powi(lvl as i32 - 1) - 1e-12);
            }
        }
    }
}
