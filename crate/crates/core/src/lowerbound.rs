//! The adversarial lower-bound distribution and its witness hyperplanes.
//!
//! Levels `i = 1..k` hold point sets `X_i` of size `2^i / tau_i`. A point is
//! `(2^(-4/2), 2^(-5/2), ..., 2^(-(k+3)/2))` in its first `k` coordinates,
//! `1/sqrt 2` in one designated coordinate of its own, and 0 elsewhere. The
//! ambient dimension is `k + m` with `m` the total number of points. All
//! labels are `+1` and the distribution is uniform over the points.
//!
//! For a level `i` and a set `T` of `2^i` points of `X_i`, the witness `w`
//! has `w_i = 1/sqrt 2` and `-1/sqrt(2^(i+1))` on the designated coordinate
//! of every point in `T`. Every point outside `T` then has margin exactly
//! `gamma_i = 2^(-(i+4)/2)` and every point of `T` has margin
//! `gamma_i - 2^(-(i+2)/2) < 0`.

use rand::Rng;

use crate::margins::{self, DiscreteDistribution, Label, LabeledPoint, Sample, UnitVector};
use crate::rng::{self, TrialRng};
use crate::{Error, Result};

/// Largest support accepted by [`LowerBoundConfig::new`].
pub const MAX_SUPPORT: usize = 1 << 16;

/// Tolerance when checking that `2^i / tau_i` is an integer.
const INTEGRALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundConfig {
    taus: Vec<f64>,
    sizes: Vec<usize>,
}

impl LowerBoundConfig {
    /// `taus[i - 1]` is `tau_i`; `k = taus.len()`.
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::param("tau", "need at least one level"));
        }
        let mut sizes = Vec::with_capacity(taus.len());
        for (idx, &tau) in taus.iter().enumerate() {
            let level = idx as i32 + 1;
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::param("tau", format!("tau_{level} = {tau} is not in (0, 1]")));
            }
            let size = 2f64.powi(level) / tau;
            let rounded = size.round();
            if (size - rounded).abs() > INTEGRALITY_TOLERANCE * size.max(1.0) || rounded < 1.0 {
                return Err(Error::param(
                    "tau",
                    format!("2^{level} / tau_{level} = {size} is not a positive integer"),
                ));
            }
            sizes.push(rounded as usize);
        }
        let m: usize = sizes.iter().sum();
        if m > MAX_SUPPORT {
            return Err(Error::param("tau", format!("support size {m} exceeds {MAX_SUPPORT}")));
        }
        Ok(LowerBoundConfig { taus, sizes })
    }

    /// Number of levels.
    pub fn k(&self) -> usize {
        self.taus.len()
    }

    pub fn tau(&self, level: usize) -> f64 {
        self.taus[level - 1]
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    /// `|X_i|`.
    pub fn level_size(&self, level: usize) -> usize {
        self.sizes[level - 1]
    }

    /// Total support size `m`.
    pub fn support_size(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Ambient dimension `k + m`.
    pub fn dim(&self) -> usize {
        self.k() + self.support_size()
    }

    /// Global index of the first point of level `i`.
    pub fn level_offset(&self, level: usize) -> usize {
        self.sizes[..level - 1].iter().sum()
    }

    /// Level of the point with global index `p`.
    pub fn level_of(&self, p: usize) -> usize {
        let mut acc = 0;
        for (idx, &s) in self.sizes.iter().enumerate() {
            acc += s;
            if p < acc {
                return idx + 1;
            }
        }
        panic!("point index {p} out of range");
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.k() {
            return Err(Error::param("level", format!("{level} is not in 1..={}", self.k())));
        }
        Ok(())
    }

    /// The point with global index `p`.
    pub fn point(&self, p: usize) -> Vec<f64> {
        let k = self.k();
        let mut x = vec![0.0; self.dim()];
        for (j, xj) in x.iter_mut().take(k).enumerate() {
            *xj = 2f64.powf(-((j + 1) as f64 + 3.0) / 2.0);
        }
        x[k + p] = std::f64::consts::FRAC_1_SQRT_2;
        x
    }
}

/// Level and the chosen set `T` (local indices into `X_i`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessSpec {
    level: usize,
    t: Vec<usize>,
}

impl WitnessSpec {
    pub fn new(cfg: &LowerBoundConfig, level: usize, mut t: Vec<usize>) -> Result<Self> {
        cfg.check_level(level)?;
        t.sort_unstable();
        t.dedup();
        let want = 1usize << level;
        if t.len() != want {
            return Err(Error::param("T", format!("needs {want} distinct points, got {}", t.len())));
        }
        if let Some(&bad) = t.iter().find(|&&j| j >= cfg.level_size(level)) {
            return Err(Error::param("T", format!("index {bad} outside X_{level}")));
        }
        Ok(WitnessSpec { level, t })
    }

    /// The first `2^i` points of `X_i`.
    pub fn first(cfg: &LowerBoundConfig, level: usize) -> Result<Self> {
        Self::new(cfg, level, (0..1usize << level).collect())
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn members(&self) -> &[usize] {
        &self.t
    }

    /// Whether the global point index `p` lies in `T`.
    pub fn contains(&self, cfg: &LowerBoundConfig, p: usize) -> bool {
        let off = cfg.level_offset(self.level);
        p >= off && self.t.binary_search(&(p - off)).is_ok()
    }
}

/// `gamma_i = 2^(-(i+4)/2)`.
pub fn gamma_level(level: usize) -> Result<f64> {
    if level == 0 {
        return Err(Error::param("level", "must be at least 1"));
    }
    Ok(2f64.powf(-(level as f64 + 4.0) / 2.0))
}

/// Uniform distribution over all points, labels `+1`, in global index order.
pub fn build_distribution(cfg: &LowerBoundConfig) -> Result<DiscreteDistribution> {
    let points = (0..cfg.support_size())
        .map(|p| LabeledPoint::new(cfg.point(p), Label::Positive))
        .collect::<Result<Vec<_>>>()?;
    DiscreteDistribution::uniform(points)
}

/// Witness hyperplane for `spec`.
pub fn witness(cfg: &LowerBoundConfig, spec: &WitnessSpec) -> Result<UnitVector> {
    cfg.check_level(spec.level)?;
    let k = cfg.k();
    let mut w = vec![0.0; cfg.dim()];
    w[spec.level - 1] = std::f64::consts::FRAC_1_SQRT_2;
    let off = cfg.level_offset(spec.level);
    let v = -(2f64.powi(spec.level as i32 + 1)).sqrt().recip();
    for &j in &spec.t {
        w[k + off + j] = v;
    }
    UnitVector::new(w)
}

/// Largest deviations of the witness geometry from its closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryReport {
    pub norm_error: f64,
    /// `max |<w, x> - gamma_i|` over points outside `T`.
    pub outside_error: f64,
    /// `max <w, x>` over points in `T`.
    pub inside_max: f64,
    /// `max |<w, x> - (gamma_i - 2^(-(i+2)/2))|` over `T`.
    pub inside_error: f64,
    /// `max ||x|| - 1` over the support.
    pub max_point_norm_excess: f64,
}

impl GeometryReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.norm_error <= tol
            && self.outside_error <= tol
            && self.inside_error <= tol
            && self.inside_max < 0.0
            && self.max_point_norm_excess <= tol
    }
}

/// Measures the witness geometry over the whole support.
pub fn check_geometry(cfg: &LowerBoundConfig, spec: &WitnessSpec) -> Result<GeometryReport> {
    let w = witness(cfg, spec)?;
    let g = gamma_level(spec.level)?;
    let inside_target = g - 2f64.powf(-(spec.level as f64 + 2.0) / 2.0);
    let mut rep = GeometryReport {
        norm_error: (margins::norm(w.as_slice()) - 1.0).abs(),
        outside_error: 0.0,
        inside_max: f64::NEG_INFINITY,
        inside_error: 0.0,
        max_point_norm_excess: f64::NEG_INFINITY,
    };
    for p in 0..cfg.support_size() {
        let x = cfg.point(p);
        rep.max_point_norm_excess = rep.max_point_norm_excess.max(margins::norm(&x) - 1.0);
        let ip = margins::dot(w.as_slice(), &x);
        if spec.contains(cfg, p) {
            rep.inside_max = rep.inside_max.max(ip);
            rep.inside_error = rep.inside_error.max((ip - inside_target).abs());
        } else {
            rep.outside_error = rep.outside_error.max((ip - g).abs());
        }
    }
    Ok(rep)
}

/// Threshold used for `L^{gamma_i}_S` in the gap experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarginConvention {
    /// `gamma_i (1 - 1e-9)`: points at margin exactly `gamma_i` are not
    /// losses.
    #[default]
    Shrunk,
    /// `gamma_i` with the closed comparison; margins equal to `gamma_i` up
    /// to `1e-12` count as losses.
    Closed,
}

impl MarginConvention {
    pub fn threshold(self, gamma_i: f64) -> f64 {
        match self {
            MarginConvention::Shrunk => gamma_i * (1.0 - 1e-9),
            MarginConvention::Closed => gamma_i + 1e-12,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MarginConvention::Shrunk => "shrunk",
            MarginConvention::Closed => "closed",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "shrunk" => Some(MarginConvention::Shrunk),
            "closed" => Some(MarginConvention::Closed),
            _ => None,
        }
    }
}

/// One trial of the gap experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct GapTrial {
    /// `L^{gamma_i}_S(w)` under the chosen convention.
    pub sample_loss: f64,
    /// `L_D(w)`, exact.
    pub true_loss: f64,
    /// `Pr[sign <w, x> != y | x in X_i]`; equals `tau_i`.
    pub level_loss: f64,
    /// `true_loss - sample_loss`.
    pub gap: f64,
    /// Whether `T` avoided the sample.
    pub disjoint: bool,
}

/// `T` = the `2^i` points of `X_i` with the fewest occurrences in the
/// sample, ties broken by index.
pub fn least_represented(cfg: &LowerBoundConfig, level: usize, sample_idx: &[usize]) -> Result<WitnessSpec> {
    cfg.check_level(level)?;
    let off = cfg.level_offset(level);
    let size = cfg.level_size(level);
    let mut counts = vec![0usize; size];
    for &p in sample_idx {
        if p >= off && p < off + size {
            counts[p - off] += 1;
        }
    }
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by_key(|&j| (counts[j], j));
    order.truncate(1 << level);
    WitnessSpec::new(cfg, level, order)
}

/// Runs `trials` independent trials with samples of size `n`.
pub fn gap_experiment(
    cfg: &LowerBoundConfig,
    level: usize,
    n: usize,
    trials: u64,
    seed: u64,
    convention: MarginConvention,
) -> Result<Vec<GapTrial>> {
    cfg.check_level(level)?;
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    let dist = build_distribution(cfg)?;
    let gamma = gamma_level(level)?;
    let threshold = convention.threshold(gamma);
    let m = cfg.support_size();
    let level_points: Vec<usize> = (cfg.level_offset(level)..cfg.level_offset(level) + cfg.level_size(level)).collect();
    rng::par_trials(trials, seed, |_, r: &mut TrialRng| {
        let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..m)).collect();
        let spec = least_represented(cfg, level, &idx)?;
        let w = witness(cfg, &spec)?;
        let sample = Sample::new(idx.iter().map(|&p| dist.support()[p].0.clone()).collect())?;
        let sample_loss = margins::margin_loss_sample(&w, &sample, threshold)?;
        let true_loss = margins::true_loss(&w, &dist)?;
        let level_errors = level_points
            .iter()
            .filter(|&&p| margins::margin(&w, &dist.support()[p].0).map(|v| v <= 0.0).unwrap_or(true))
            .count();
        let disjoint = idx.iter().all(|&p| !spec.contains(cfg, p));
        Ok(GapTrial {
            sample_loss,
            true_loss,
            level_loss: level_errors as f64 / level_points.len() as f64,
            gap: true_loss - sample_loss,
            disjoint,
        })
    })
    .into_iter()
    .collect()
}

/// Exact probability that at least `2^i` points of `X_i` are absent from a
/// uniform sample of size `n`, by an occupancy recursion.
pub fn disjoint_probability(cfg: &LowerBoundConfig, level: usize, n: usize) -> Result<f64> {
    cfg.check_level(level)?;
    let size = cfg.level_size(level);
    let need_missing = 1usize << level;
    let q = size as f64 / cfg.support_size() as f64;
    // occ[r] = Pr[r distinct points of X_i hit], advanced one draw at a time.
    let mut occ = vec![0.0; size + 1];
    occ[0] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; size + 1];
        for (r, &pr) in occ.iter().enumerate() {
            if pr == 0.0 {
                continue;
            }
            let hit_new = q * (size - r) as f64 / size as f64;
            next[r] += pr * (1.0 - hit_new);
            if r < size {
                next[r + 1] += pr * hit_new;
            }
        }
        occ = next;
    }
    Ok(occ.iter().take(size - need_missing + 1).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::stats::Estimate;

    #[test]
    fn single_level_example() {
        let cfg = LowerBoundConfig::new(vec![0.5]).unwrap();
        assert_eq!(cfg.support_size(), 4);
        assert_eq!(cfg.dim(), 5);
        let d = build_distribution(&cfg).unwrap();
        for (p, w) in d.support() {
            assert_eq!(p.y(), Label::Positive);
            assert_abs_diff_eq!(*w, 0.25);
            assert_abs_diff_eq!(p.x()[0], 0.25, epsilon = 1e-15);
            assert_abs_diff_eq!(margins::dot(p.x(), p.x()), 0.5625, epsilon = 1e-15);
        }
        let w = witness(&cfg, &WitnessSpec::first(&cfg, 1).unwrap()).unwrap();
        assert_abs_diff_eq!(margins::margin_loss_dist(&w, &d, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(margins::true_loss(&w, &d).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn gamma_levels() {
        assert_abs_diff_eq!(gamma_level(1).unwrap(), 0.17677669529663687, epsilon = 1e-15);
        assert_abs_diff_eq!(gamma_level(2).unwrap(), 0.125, epsilon = 1e-15);
        for i in 1..10 {
            let r = gamma_level(i + 1).unwrap() / gamma_level(i).unwrap();
            assert_abs_diff_eq!(r, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        }
        assert!(gamma_level(0).is_err());
    }

    #[test]
    fn witness_inner_products_level_one() {
        let cfg = LowerBoundConfig::new(vec![0.25, 0.5]).unwrap();
        let spec = WitnessSpec::first(&cfg, 1).unwrap();
        let w = witness(&cfg, &spec).unwrap();
        let inside = 2f64.powf(-2.5) - 2f64.powf(-1.5);
        for p in 0..cfg.support_size() {
            let ip = margins::dot(w.as_slice(), &cfg.point(p));
            if spec.contains(&cfg, p) {
                assert_abs_diff_eq!(ip, inside, epsilon = 1e-15);
                assert_abs_diff_eq!(ip, -0.1767766952966369, epsilon = 1e-12);
            } else {
                assert_abs_diff_eq!(ip, 0.1767766952966369, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(LowerBoundConfig::new(vec![]).is_err());
        assert!(LowerBoundConfig::new(vec![0.3]).is_err());
        assert!(LowerBoundConfig::new(vec![1.5]).is_err());
        let cfg = LowerBoundConfig::new(vec![1.0 / 3.0, 0.5]).unwrap();
        assert_eq!(cfg.level_size(1), 6);
        assert_eq!(cfg.level_size(2), 8);
        assert_eq!(cfg.level_of(5), 1);
        assert_eq!(cfg.level_of(6), 2);
        assert!(WitnessSpec::new(&cfg, 1, vec![0]).is_err());
        assert!(WitnessSpec::new(&cfg, 1, vec![0, 6]).is_err());
        assert!(WitnessSpec::new(&cfg, 3, vec![0]).is_err());
    }

    #[test]
    fn geometry_holds_on_small_configs() {
        for taus in [vec![1.0], vec![0.5, 0.25], vec![0.25, 0.5, 1.0 / 3.0]] {
            let cfg = LowerBoundConfig::new(taus).unwrap();
            for level in 1..=cfg.k() {
                let rep = check_geometry(&cfg, &WitnessSpec::first(&cfg, level).unwrap()).unwrap();
                assert!(rep.holds(1e-12), "{rep:?}");
            }
        }
    }

    #[test]
    fn least_represented_prefers_absent_points() {
        let cfg = LowerBoundConfig::new(vec![0.25]).unwrap();
        let spec = least_represented(&cfg, 1, &[0, 0, 1, 3, 5, 6, 7]).unwrap();
        assert_eq!(spec.members(), &[2, 4]);
        let spec = least_represented(&cfg, 1, &[0, 1, 2, 3, 4, 5, 6, 7, 0]).unwrap();
        assert_eq!(spec.members(), &[1, 2]);
    }

    #[test]
    fn conventions() {
        let cfg = LowerBoundConfig::new(vec![0.125]).unwrap();
        let shrunk = gap_experiment(&cfg, 1, 2, 50, 11, MarginConvention::Shrunk).unwrap();
        let closed = gap_experiment(&cfg, 1, 2, 50, 11, MarginConvention::Closed).unwrap();
        for (s, c) in shrunk.iter().zip(&closed) {
            assert_eq!(c.sample_loss, 1.0);
            assert_abs_diff_eq!(s.true_loss, 0.125, epsilon = 1e-15);
            if s.disjoint {
                assert_eq!(s.sample_loss, 0.0);
                assert!(s.gap >= 0.0);
            }
        }
        assert_eq!(shrunk, gap_experiment(&cfg, 1, 2, 50, 11, MarginConvention::Shrunk).unwrap());
    }

    #[test]
    fn disjoint_frequency_matches_occupancy_oracle() {
        let cfg = LowerBoundConfig::new(vec![0.125, 0.25]).unwrap();
        let level = 1;
        let n = cfg.level_size(level) / 4;
        let exact = disjoint_probability(&cfg, level, n).unwrap();
        let trials = 20_000;
        let runs = gap_experiment(&cfg, level, n, trials, 3, MarginConvention::Shrunk).unwrap();
        let hits = runs.iter().filter(|t| t.disjoint).count() as u64;
        let est = Estimate::proportion(hits, trials);
        assert!((est.value - exact).abs() <= 3.0 * est.stderr.max(1e-3), "{est:?} vs {exact}");
        // A fixed T of 2^i points avoids the sample with probability (1 - 2^i/m)^n.
        let fixed = (1.0 - 2.0 / cfg.support_size() as f64).powi(n as i32);
        assert!(exact >= fixed);
    }

    #[test]
    fn occupancy_oracle_small_case() {
        // X_1 of 2 points, m = 2, |T| = 2: disjoint iff no draw at all lands in X_1.
        let cfg = LowerBoundConfig::new(vec![1.0]).unwrap();
        assert_abs_diff_eq!(disjoint_probability(&cfg, 1, 0).unwrap(), 1.0);
        assert_abs_diff_eq!(disjoint_probability(&cfg, 1, 1).unwrap(), 0.0);
    }
}
