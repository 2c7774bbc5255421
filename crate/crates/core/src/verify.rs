//! Monte Carlo and exact checks of the probabilistic facts behind the
//! discretization argument.
//!
//! Every check returns a [`CheckReport`] made of labelled lines. A line
//! compares an estimate against a threshold with an explicit allowance of
//! [`SIGMA`] standard errors. Reports are reproducible from their seed and
//! independent of the number of worker threads.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::discretize::{self, grid_coordinate, grid_pitch, rounding_probability, DiscretizationDraw, MarginSampler};
use crate::margins::{self, DiscreteDistribution, Label, Sample, UnitVector, DEFAULT_C_GAMMA};
use crate::rng::{self, derive_seed, TrialRng};
use crate::stats::{self, Estimate};
use crate::{Error, Result};

/// Allowance, in standard errors, on every statistical comparison.
pub const SIGMA: f64 = 3.0;

/// KS p-value below which two samples are declared different.
pub const KS_ALPHA: f64 = 0.01;

/// Margin-preservation tail constant: failure probability and Lipschitz
/// budgets use `C exp(-gamma^2 k / C)`.
pub const C_TAIL: f64 = 800.0;

/// Exponent constant of the chi-square based preservation estimate
/// `exp(-k gamma^2 / 72)`; also fixes the minimum `k` for the Lipschitz check.
pub const C_JL: f64 = 72.0;

/// Chi-square tail constant: `Pr[|Y/k - 1| >= x] <= 2 exp(-k x^2 / 8)`.
pub const C_CHI: f64 = 8.0;

/// Fraction of the threshold that finite-difference noise may occupy before
/// a Lipschitz line is reported inconclusive.
pub const NOISE_BUDGET: f64 = 0.1;

/// Named constants used in check thresholds.
pub const CONSTANTS: &[(&str, f64, &str)] = &[
    ("sigma", SIGMA, "standard-error allowance on every statistical comparison"),
    ("ks_alpha", KS_ALPHA, "KS p-value threshold"),
    ("c_tail", C_TAIL, "margin-preservation tail C exp(-gamma^2 k / C); Lipschitz budget prefactor"),
    ("c_jl", C_JL, "exp(-k gamma^2 / 72) preservation rate; Lipschitz check needs k >= 72 ln 2 / gamma^2"),
    ("c_chi", C_CHI, "chi-square tail 2 exp(-k x^2 / 8)"),
    ("noise_budget", NOISE_BUDGET, "2 stderr / h must stay below this fraction of the Lipschitz threshold"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckStatus {
    Pass,
    Inconclusive,
    Fail,
}

impl CheckStatus {
    pub fn name(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Inconclusive => "inconclusive",
            CheckStatus::Fail => "fail",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }
}

/// One compared quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub label: String,
    pub estimate: f64,
    pub stderr: f64,
    pub threshold: f64,
    pub status: CheckStatus,
}

impl CheckLine {
    fn new(label: impl Into<String>, estimate: f64, stderr: f64, threshold: f64, status: CheckStatus) -> Self {
        CheckLine {
            label: label.into(),
            estimate,
            stderr,
            threshold,
            status,
        }
    }

    /// `estimate <= threshold + SIGMA * stderr`.
    fn at_most(label: impl Into<String>, e: Estimate, threshold: f64) -> Self {
        let ok = e.value <= threshold + SIGMA * e.stderr;
        Self::new(label, e.value, e.stderr, threshold, CheckStatus::from_bool(ok))
    }

    /// `estimate >= threshold - SIGMA * stderr`.
    fn at_least(label: impl Into<String>, e: Estimate, threshold: f64) -> Self {
        let ok = e.value >= threshold - SIGMA * e.stderr;
        Self::new(label, e.value, e.stderr, threshold, CheckStatus::from_bool(ok))
    }

    /// `|estimate - target| <= SIGMA * stderr`.
    fn close_to(label: impl Into<String>, e: Estimate, target: f64) -> Self {
        let ok = (e.value - target).abs() <= SIGMA * e.stderr;
        Self::new(label, e.value, e.stderr, target, CheckStatus::from_bool(ok))
    }

    fn exact(label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let ok = (value - target).abs() <= tol;
        Self::new(label, value, 0.0, target, CheckStatus::from_bool(ok))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub lines: Vec<CheckLine>,
    pub trials: u64,
    pub seed: u64,
}

impl CheckReport {
    fn new(name: &str, trials: u64, seed: u64) -> Self {
        CheckReport {
            name: name.to_string(),
            lines: Vec::new(),
            trials,
            seed,
        }
    }

    /// Fail if any line fails, else inconclusive if any line is, else pass.
    pub fn status(&self) -> CheckStatus {
        self.lines.iter().map(|l| l.status).max().unwrap_or(CheckStatus::Pass)
    }

    pub fn passed(&self) -> bool {
        self.status() == CheckStatus::Pass
    }

    pub fn line(&self, label: &str) -> Option<&CheckLine> {
        self.lines.iter().find(|l| l.label == label)
    }

    pub const CSV_HEADER: &'static str = "check,label,estimate,stderr,threshold,status,trials,seed";

    /// One CSV record per line, without header.
    pub fn csv_rows(&self) -> Vec<String> {
        self.lines
            .iter()
            .map(|l| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    self.name,
                    l.label,
                    l.estimate,
                    l.stderr,
                    l.threshold,
                    l.status.name(),
                    self.trials,
                    self.seed
                )
            })
            .collect()
    }
}

/// Combined status of several reports.
pub fn overall_status(reports: &[CheckReport]) -> CheckStatus {
    reports.iter().map(CheckReport::status).max().unwrap_or(CheckStatus::Pass)
}

fn positive(name: &'static str, v: u64) -> Result<()> {
    if v == 0 {
        return Err(Error::param(name, "must be at least 1"));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha.abs() > 1.0 {
        return Err(Error::param("alpha", format!("|{alpha}| exceeds 1")));
    }
    Ok(())
}

/// Round-down probabilities over random `(v, k)` stay in `[0, 1]`; grid
/// points round down surely and midpoints are fair coins.
pub fn check_p_in_unit(trials: u64, seed: u64) -> Result<CheckReport> {
    positive("trials", trials)?;
    let mut rep = CheckReport::new("p-in-unit", trials, seed);
    let per_trial = |r: &mut TrialRng| {
        let k = 1 + (r.random::<f64>() * 14.0).exp2() as usize;
        let scale = 10f64.powf(r.random_range(-3.0..3.0));
        let v = r.random_range(-1.0..1.0) * scale;
        let z = r.random_range(-1000i64..1000);
        let outside = {
            let p = rounding_probability(v, k).p;
            !(0.0..=1.0).contains(&p)
        };
        let grid = rounding_probability(grid_coordinate(z, k), k);
        let grid_bad = grid.z != z || grid.p != 1.0;
        let mid = rounding_probability(grid_coordinate(z, k) + 0.5 * grid_pitch(k), k);
        let mid_bad = (mid.p - 0.5).abs() > 1e-9 || mid.z != z;
        (outside, grid_bad, mid_bad)
    };
    let flags = rng::par_trials(trials, seed, |_, r| per_trial(r));
    let count = |f: fn(&(bool, bool, bool)) -> bool| flags.iter().filter(|x| f(x)).count() as f64;
    rep.lines.push(CheckLine::exact("p_outside_unit", count(|x| x.0), 0.0, 0.0));
    rep.lines.push(CheckLine::exact("grid_point_not_sure", count(|x| x.1), 0.0, 0.0));
    rep.lines.push(CheckLine::exact("midpoint_not_half", count(|x| x.2), 0.0, 0.0));
    Ok(rep)
}

/// Ambient dimensions cycled through by the determinism check.
pub const DETERMINISM_DIMS: [usize; 5] = [3, 7, 16, 32, 50];

/// Explicit unit `(w, x)` with label `y` and `y <w, x> = alpha`, in
/// dimension `d`, randomly rotated by `seed`.
pub fn configuration(alpha: f64, d: usize, y: Label, seed: u64) -> Result<(UnitVector, Vec<f64>)> {
    check_alpha(alpha)?;
    if d < 2 {
        return Err(Error::param("d", "needs at least 2 dimensions"));
    }
    let mut r = rng::stream_rng(seed, 0);
    let mut gauss = |d: usize| -> Vec<f64> { (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect() };
    let w = UnitVector::normalize(gauss(d))?;
    let mut u = gauss(d);
    let proj = margins::dot(&u, w.as_slice());
    for (ui, wi) in u.iter_mut().zip(w.as_slice()) {
        *ui -= proj * wi;
    }
    let u = UnitVector::normalize(u)?;
    let along = y.value() * alpha;
    let perp = (1.0 - alpha * alpha).max(0.0).sqrt();
    let x = w
        .as_slice()
        .iter()
        .zip(u.as_slice())
        .map(|(wi, ui)| along * wi + perp * ui)
        .collect();
    Ok((w, x))
}

/// KS-tests `pairs` full-pipeline configurations with `y <w, x> = alpha`
/// against the dimension-free sampler at the same `alpha`.
pub fn check_dist_determinism(alpha: f64, k: usize, samples: u64, pairs: usize, seed: u64) -> Result<CheckReport> {
    check_dist_determinism_against(alpha, alpha, k, samples, pairs, seed)
}

/// As [`check_dist_determinism`], with the dimension-free reference drawn at
/// `reference_alpha`. A reference different from `alpha` must fail.
pub fn check_dist_determinism_against(
    alpha: f64,
    reference_alpha: f64,
    k: usize,
    samples: u64,
    pairs: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_alpha(alpha)?;
    positive("samples", samples)?;
    positive("k", k as u64)?;
    let name = if alpha == reference_alpha {
        "dist-determinism"
    } else {
        "dist-determinism-mismatch"
    };
    let mut rep = CheckReport::new(name, samples, seed);
    let reference = MarginSampler::dimension_free(reference_alpha)?;
    let ref_draws = discretize::margin_samples(&reference, k, samples, derive_seed(seed, 0));
    for j in 0..pairs {
        let d = DETERMINISM_DIMS[j % DETERMINISM_DIMS.len()];
        let y = if j % 2 == 0 { Label::Positive } else { Label::Negative };
        let (w, x) = configuration(alpha, d, y, derive_seed(seed, 1000 + j as u64))?;
        let direct = MarginSampler::direct(w, x, y)?;
        let draws = discretize::margin_samples(&direct, k, samples, derive_seed(seed, 1 + j as u64));
        let ks = stats::ks_two_sample(&draws, &ref_draws);
        let label = format!("ks_d{d}_y{}", if y == Label::Positive { "pos" } else { "neg" });
        rep.lines.push(CheckLine::new(
            label,
            ks.p_value,
            0.0,
            KS_ALPHA,
            CheckStatus::from_bool(ks.p_value > KS_ALPHA),
        ));
    }
    Ok(rep)
}

/// `Pr[margin draw > threshold | y <w, x> = alpha]`; equal seeds couple the
/// estimates across `alpha`.
pub fn exceed_probability(alpha: f64, threshold: f64, k: usize, samples: u64, seed: u64) -> Result<Estimate> {
    let sampler = MarginSampler::dimension_free(alpha)?;
    positive("samples", samples)?;
    positive("k", k as u64)?;
    let hits = rng::par_count(samples, seed, |_, r| sampler.draw(k, r) > threshold);
    Ok(Estimate::proportion(hits, samples))
}

/// `q(alpha) = Pr[margin > gamma_i / 2]` must be nondecreasing over the
/// grid and `1 - q` nonincreasing, within [`SIGMA`] pooled standard errors.
pub fn check_monotonicity(k: usize, gamma_i: f64, alphas: &[f64], samples: u64, seed: u64) -> Result<CheckReport> {
    if !(gamma_i > 0.0 && gamma_i <= DEFAULT_C_GAMMA / 2.0) {
        return Err(Error::Precondition(format!(
            "gamma_i = {gamma_i} must lie in (0, c_gamma / 2]"
        )));
    }
    if alphas.iter().any(|a| !(0.0..=gamma_i).contains(a)) {
        return Err(Error::Precondition("alpha grid must lie in [0, gamma_i]".into()));
    }
    if alphas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Precondition("alpha grid must be ascending".into()));
    }
    monotonicity_on_grid(k, gamma_i, alphas, samples, seed)
}

/// Monotonicity comparisons on an arbitrary grid; a descending grid is the
/// inversion case.
pub fn monotonicity_on_grid(k: usize, gamma_i: f64, alphas: &[f64], samples: u64, seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("monotonicity", samples, seed);
    let q = alphas
        .iter()
        .map(|&a| exceed_probability(a, gamma_i / 2.0, k, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    for (j, pair) in q.windows(2).enumerate() {
        let se = stats::pooled(pair[0], pair[1]);
        let up = Estimate {
            value: pair[1].value - pair[0].value,
            stderr: se,
        };
        let down = Estimate {
            value: (1.0 - pair[1].value) - (1.0 - pair[0].value),
            stderr: se,
        };
        let tag = format!("{}_{}", alphas[j], alphas[j + 1]);
        rep.lines.push(CheckLine::at_least(format!("q_increase_{tag}"), up, 0.0));
        rep.lines.push(CheckLine::at_most(format!("complement_decrease_{tag}"), down, 0.0));
    }
    Ok(rep)
}

/// Surrogate function parameters shared by [`estimate_phi`] and
/// [`estimate_rho`].
fn check_surrogate_args(alpha: f64, gamma_i: f64, c_gamma: f64) -> Result<()> {
    if !(c_gamma > 0.0 && c_gamma < 1.0) {
        return Err(Error::param("c_gamma", format!("{c_gamma} is not in (0, 1)")));
    }
    if !(gamma_i > 0.0 && gamma_i < c_gamma) {
        return Err(Error::param("gamma_i", format!("{gamma_i} is not in (0, c_gamma)")));
    }
    if alpha.is_nan() || alpha.abs() > c_gamma + 1e-15 {
        return Err(Error::param("alpha", format!("{alpha} is outside [-c_gamma, c_gamma]")));
    }
    Ok(())
}

/// `phi(alpha)`: the exceedance probability `Pr[margin > gamma_i / 2]` for
/// `alpha <= 0`, its value at 0 scaled by `(gamma_i - alpha) / gamma_i` on
/// `(0, gamma_i]`, and exactly 0 above `gamma_i`.
pub fn estimate_phi(alpha: f64, gamma_i: f64, k: usize, samples: u64, seed: u64) -> Result<Estimate> {
    estimate_phi_with(alpha, gamma_i, k, samples, seed, DEFAULT_C_GAMMA)
}

pub fn estimate_phi_with(alpha: f64, gamma_i: f64, k: usize, samples: u64, seed: u64, c_gamma: f64) -> Result<Estimate> {
    check_surrogate_args(alpha, gamma_i, c_gamma)?;
    let t = gamma_i / 2.0;
    if alpha <= 0.0 {
        exceed_probability(alpha, t, k, samples, seed)
    } else if alpha <= gamma_i {
        let anchor = exceed_probability(0.0, t, k, samples, seed)?;
        Ok(anchor.scale((gamma_i - alpha) / gamma_i))
    } else {
        Ok(Estimate::exact(0.0))
    }
}

/// `rho(alpha)`: exactly 0 for `alpha <= 0`, `alpha / gamma_i` times the
/// value at `gamma_i` on `(0, gamma_i]`, and `Pr[margin <= gamma_i / 2]`
/// above `gamma_i`.
pub fn estimate_rho(alpha: f64, gamma_i: f64, k: usize, samples: u64, seed: u64) -> Result<Estimate> {
    estimate_rho_with(alpha, gamma_i, k, samples, seed, DEFAULT_C_GAMMA)
}

pub fn estimate_rho_with(alpha: f64, gamma_i: f64, k: usize, samples: u64, seed: u64, c_gamma: f64) -> Result<Estimate> {
    check_surrogate_args(alpha, gamma_i, c_gamma)?;
    let t = gamma_i / 2.0;
    let below = |a: f64| -> Result<Estimate> {
        let e = exceed_probability(a, t, k, samples, seed)?;
        Ok(Estimate {
            value: 1.0 - e.value,
            stderr: e.stderr,
        })
    };
    if alpha <= 0.0 {
        Ok(Estimate::exact(0.0))
    } else if alpha <= gamma_i {
        Ok(below(gamma_i)?.scale(alpha / gamma_i))
    } else {
        below(alpha)
    }
}

/// Lipschitz budget `C exp(-gamma_i^2 k / C) (sqrt k + 1/gamma_i)`.
pub fn lipschitz_threshold(gamma_i: f64, k: usize) -> f64 {
    C_TAIL * (-gamma_i * gamma_i * k as f64 / C_TAIL).exp() * ((k as f64).sqrt() + 1.0 / gamma_i)
}

/// Number of interior finite-difference points per Monte Carlo branch.
pub const LIPSCHITZ_POINTS: usize = 3;

/// Central finite differences of `phi` and `rho` on every branch against the
/// Lipschitz budget.
///
/// Monte Carlo slopes use the conservative standard error
/// `sqrt 2 * (0.5 / sqrt samples) / (2 h)`. When `2 * 0.5 / sqrt(samples) / h`
/// reaches [`NOISE_BUDGET`] times the budget the slope lines are
/// inconclusive.
pub fn check_lipschitz(gamma_i: f64, k: usize, h: f64, samples: u64, seed: u64) -> Result<CheckReport> {
    positive("samples", samples)?;
    let min_k = C_JL * std::f64::consts::LN_2 / (gamma_i * gamma_i);
    if (k as f64) < min_k {
        return Err(Error::Precondition(format!("k = {k} is below 72 ln 2 / gamma_i^2 = {min_k:.1}")));
    }
    let c = DEFAULT_C_GAMMA;
    if !(gamma_i > 0.0 && gamma_i < c) {
        return Err(Error::param("gamma_i", format!("{gamma_i} is not in (0, c_gamma)")));
    }
    if !(h > 0.0 && h < gamma_i / 4.0) {
        return Err(Error::param("h", format!("step {h} must lie in (0, gamma_i / 4)")));
    }
    let threshold = lipschitz_threshold(gamma_i, k);
    let se = stats::worst_case_stderr(samples);
    let slope_se = std::f64::consts::SQRT_2 * se / (2.0 * h);
    let noisy = 2.0 * se / h >= NOISE_BUDGET * threshold;
    let mut rep = CheckReport::new("lipschitz", samples, seed);

    let interior = |lo: f64, hi: f64| -> Vec<f64> {
        (1..=LIPSCHITZ_POINTS)
            .map(|j| lo + (hi - lo) * j as f64 / (LIPSCHITZ_POINTS + 1) as f64)
            .collect()
    };
    let mc_slope = |rep: &mut CheckReport, label: String, f: &dyn Fn(f64) -> Result<Estimate>, a: f64| -> Result<()> {
        let slope = (f(a + h)?.value - f(a - h)?.value) / (2.0 * h);
        let status = if noisy {
            CheckStatus::Inconclusive
        } else {
            CheckStatus::from_bool(slope.abs() <= threshold + SIGMA * slope_se)
        };
        rep.lines.push(CheckLine::new(label, slope.abs(), slope_se, threshold, status));
        Ok(())
    };
    let phi = |a: f64| estimate_phi(a, gamma_i, k, samples, seed);
    let rho = |a: f64| estimate_rho(a, gamma_i, k, samples, seed);

    for a in interior(-c, 0.0) {
        mc_slope(&mut rep, format!("phi_mc_{a:.4}"), &phi, a)?;
    }
    for a in interior(gamma_i, c) {
        mc_slope(&mut rep, format!("rho_mc_{a:.4}"), &rho, a)?;
    }

    let phi_anchor = exceed_probability(0.0, gamma_i / 2.0, k, samples, seed)?.value;
    let rho_anchor = 1.0 - exceed_probability(gamma_i, gamma_i / 2.0, k, samples, seed)?.value;
    for a in interior(0.0, gamma_i) {
        let fd_phi = (phi(a + h)?.value - phi(a - h)?.value) / (2.0 * h);
        let fd_rho = (rho(a + h)?.value - rho(a - h)?.value) / (2.0 * h);
        let tol = 1e-9 * (1.0 + phi_anchor / gamma_i);
        rep.lines.push(CheckLine::exact(format!("phi_linear_{a:.4}"), fd_phi, -phi_anchor / gamma_i, tol));
        let tol = 1e-9 * (1.0 + rho_anchor / gamma_i);
        rep.lines.push(CheckLine::exact(format!("rho_linear_{a:.4}"), fd_rho, rho_anchor / gamma_i, tol));
        for (name, slope) in [("phi", fd_phi), ("rho", fd_rho)] {
            rep.lines.push(CheckLine::new(
                format!("{name}_linear_budget_{a:.4}"),
                slope.abs(),
                0.0,
                threshold,
                CheckStatus::from_bool(slope.abs() <= threshold),
            ));
        }
    }
    for a in interior(gamma_i, c) {
        let fd = (phi(a + h)?.value - phi(a - h)?.value) / (2.0 * h);
        rep.lines.push(CheckLine::exact(format!("phi_flat_{a:.4}"), fd, 0.0, 0.0));
    }
    for a in interior(-c, 0.0) {
        let fd = (rho(a + h)?.value - rho(a - h)?.value) / (2.0 * h);
        rep.lines.push(CheckLine::exact(format!("rho_flat_{a:.4}"), fd, 0.0, 0.0));
    }
    Ok(rep)
}

/// `2 exp(-k x^2 / 8)`.
pub fn chi_square_tail_bound(k: usize, x: f64) -> f64 {
    chi_square_tail_bound_with(k, x, C_CHI)
}

pub fn chi_square_tail_bound_with(k: usize, x: f64, constant: f64) -> f64 {
    2.0 * (-(k as f64) * x * x / constant).exp()
}

/// Empirical `Pr[|Y/k - 1| >= x]` for `Y ~ chi^2_k` against
/// `2 exp(-k x^2 / 8)`, plus `E[Y/k] = 1`.
pub fn check_chi_square_tail(k: usize, x: f64, trials: u64, seed: u64) -> Result<CheckReport> {
    check_chi_square_tail_with(k, x, trials, seed, C_CHI)
}

/// As [`check_chi_square_tail`] with the exponent constant replaced; a
/// constant far below 8 gives a bound that the simulation violates.
pub fn check_chi_square_tail_with(k: usize, x: f64, trials: u64, seed: u64, constant: f64) -> Result<CheckReport> {
    positive("trials", trials)?;
    positive("k", k as u64)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::param("x", format!("{x} is not in (0, 1)")));
    }
    let mut rep = CheckReport::new("chi-square", trials, seed);
    let ratios = rng::par_trials(trials, seed, |_, r| {
        (0..k).map(|_| r.sample::<f64, _>(StandardNormal).powi(2)).sum::<f64>() / k as f64
    });
    let hits = ratios.iter().filter(|y| (*y - 1.0).abs() >= x).count() as u64;
    let tail = Estimate::proportion(hits, trials);
    let bound = chi_square_tail_bound_with(k, x, constant);
    rep.lines.push(CheckLine::at_most(format!("tail_k{k}_x{x}"), tail, bound));
    rep.lines.push(CheckLine::close_to("mean_ratio", Estimate::mean(&ratios), 1.0));
    Ok(rep)
}

/// `sqrt(8 L ln(1/delta) / n) + 2 ln(1/delta) / n`.
pub fn bernstein_threshold(loss: f64, n: usize, delta: f64) -> f64 {
    let l = (1.0 / delta).ln();
    (8.0 * loss * l / n as f64).sqrt() + 2.0 * l / n as f64
}

/// Projected margin loss of `h` at `gamma` for every support point:
/// `y <h, A x> <= gamma`.
fn projected_losses(d: &DiscreteDistribution, draw: &DiscretizationDraw, h: &[f64], gamma: f64) -> Result<Vec<bool>> {
    d.support()
        .iter()
        .map(|(p, _)| {
            let ax = draw.project(p.x())?;
            Ok(p.y().value() * margins::dot(h, &ax) <= gamma)
        })
        .collect()
}

/// Resampling check of the Bernstein deviation of the projected margin loss
/// of `h = snap(draw, w)`.
#[allow(clippy::too_many_arguments)]
pub fn check_bernstein_margin(
    d: &DiscreteDistribution,
    w: &UnitVector,
    gamma: f64,
    draw: &DiscretizationDraw,
    n: usize,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<CheckReport> {
    check_bernstein_margin_scaled(d, w, gamma, draw, n, delta, trials, seed, 1.0)
}

/// As [`check_bernstein_margin`] with the deviation threshold multiplied by
/// `scale`; a small scale must produce violations above `delta`.
#[allow(clippy::too_many_arguments)]
pub fn check_bernstein_margin_scaled(
    d: &DiscreteDistribution,
    w: &UnitVector,
    gamma: f64,
    draw: &DiscretizationDraw,
    n: usize,
    delta: f64,
    trials: u64,
    seed: u64,
    scale: f64,
) -> Result<CheckReport> {
    positive("trials", trials)?;
    positive("n", n as u64)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("delta", format!("{delta} is not in (0, 1]")));
    }
    let h = draw.snap(w)?.coords();
    let losses = projected_losses(d, draw, &h, gamma)?;
    let population: f64 = d.support().iter().zip(&losses).filter(|(_, l)| **l).map(|((_, wt), _)| wt).sum();
    let threshold = scale * bernstein_threshold(population, n, delta);
    let cumulative = d.cumulative_weights();
    let violations = rng::par_count(trials, seed, |_, r| {
        let hits = (0..n)
            .filter(|_| losses[DiscreteDistribution::index_for(&cumulative, r.random::<f64>())])
            .count();
        (population - hits as f64 / n as f64).abs() > threshold
    });
    let freq = Estimate::proportion(violations, trials);
    let allowance = Estimate {
        value: freq.value,
        stderr: (delta * (1.0 - delta) / trials as f64).sqrt(),
    };
    let mut rep = CheckReport::new("bernstein", trials, seed);
    rep.lines.push(CheckLine::exact("projected_loss", population, population, 0.0));
    rep.lines.push(CheckLine::exact("deviation_threshold", threshold, threshold, 0.0));
    rep.lines.push(CheckLine::at_most("violation_frequency", allowance, delta));
    Ok(rep)
}

/// Direction of a sandwich inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    AtMost,
    AtLeast,
}

/// Monte Carlo check of the four inequalities relating the discretized
/// event probabilities under `D` and `S` to the expectations of
/// `phi` and `rho`.
///
/// Point-wise probabilities come from the dimension-free sampler with one
/// shared seed, so `phi` and the event probability coincide exactly on the
/// branches where they are defined by the same expression.
#[allow(clippy::too_many_arguments)]
pub fn check_phirho_sandwich(
    d: &DiscreteDistribution,
    s: &Sample,
    w: &UnitVector,
    gamma_i: f64,
    gamma: f64,
    k: usize,
    samples: u64,
    seed: u64,
) -> Result<CheckReport> {
    sandwich(d, s, w, gamma_i, gamma, k, samples, seed, false)
}

/// The sandwich check with every inequality reversed; strict cases must fail.
#[allow(clippy::too_many_arguments)]
pub fn check_phirho_sandwich_reversed(
    d: &DiscreteDistribution,
    s: &Sample,
    w: &UnitVector,
    gamma_i: f64,
    gamma: f64,
    k: usize,
    samples: u64,
    seed: u64,
) -> Result<CheckReport> {
    sandwich(d, s, w, gamma_i, gamma, k, samples, seed, true)
}

#[allow(clippy::too_many_arguments)]
fn sandwich(
    d: &DiscreteDistribution,
    s: &Sample,
    w: &UnitVector,
    gamma_i: f64,
    gamma: f64,
    k: usize,
    samples: u64,
    seed: u64,
    reversed: bool,
) -> Result<CheckReport> {
    if !(gamma > gamma_i && gamma <= 2.0 * gamma_i) {
        return Err(Error::Precondition(format!("gamma = {gamma} must lie in (gamma_i, 2 gamma_i]")));
    }
    let c = DEFAULT_C_GAMMA;
    let t = gamma_i / 2.0;
    let weighted = |pts: Vec<(f64, f64)>| -> Result<Vec<(f64, f64)>> {
        for &(a, _) in &pts {
            if a.abs() > c + 1e-12 {
                return Err(Error::Precondition(format!("margin {a} exceeds c_gamma; lift the data first")));
            }
        }
        Ok(pts)
    };
    let dpts = weighted(
        d.support()
            .iter()
            .map(|(p, wt)| Ok((margins::margin(w, p)?, *wt)))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let inv_n = 1.0 / s.len() as f64;
    let spts = weighted(
        s.points()
            .iter()
            .map(|p| Ok((margins::margin(w, p)?, inv_n)))
            .collect::<Result<Vec<_>>>()?,
    )?;

    // Weighted sum of per-point estimates; standard errors add in quadrature.
    let combine = |terms: Vec<(f64, Estimate)>| -> Estimate {
        let value = terms.iter().map(|(wt, e)| wt * e.value).sum();
        let var: f64 = terms.iter().map(|(wt, e)| (wt * e.stderr).powi(2)).sum();
        Estimate {
            value,
            stderr: var.sqrt(),
        }
    };
    let exceed = |a: f64| exceed_probability(a, t, k, samples, seed);
    let below = |a: f64| -> Result<Estimate> {
        let e = exceed(a)?;
        Ok(Estimate {
            value: 1.0 - e.value,
            stderr: e.stderr,
        })
    };
    let phi = |a: f64| estimate_phi(a, gamma_i, k, samples, seed);
    let rho = |a: f64| estimate_rho(a, gamma_i, k, samples, seed);
    let zero = Estimate::exact(0.0);

    let side = |lhs: Vec<(f64, Estimate)>, rhs: Vec<(f64, Estimate)>| -> (Estimate, Estimate) { (combine(lhs), combine(rhs)) };
    let mut ineqs: Vec<(&str, Side, (Estimate, Estimate))> = Vec::new();

    let mut l1 = Vec::new();
    let mut r1 = Vec::new();
    for &(a, wt) in &dpts {
        l1.push((wt, if a <= 0.0 { exceed(a)? } else { zero }));
        r1.push((wt, phi(a)?));
    }
    ineqs.push(("phi_dist_upper", Side::AtMost, side(l1, r1)));

    let mut l2 = Vec::new();
    let mut r2 = Vec::new();
    for &(a, wt) in &spts {
        l2.push((wt, if a <= gamma { exceed(a)? } else { zero }));
        r2.push((wt, phi(a)?));
    }
    ineqs.push(("phi_sample_lower", Side::AtLeast, side(l2, r2)));

    let mut l3 = Vec::new();
    let mut r3 = Vec::new();
    for &(a, wt) in &spts {
        l3.push((wt, if a > gamma { below(a)? } else { zero }));
        r3.push((wt, rho(a)?));
    }
    ineqs.push(("rho_sample_upper", Side::AtMost, side(l3, r3)));

    let mut l4 = Vec::new();
    let mut r4 = Vec::new();
    for &(a, wt) in &dpts {
        l4.push((wt, if a > 0.0 { below(a)? } else { zero }));
        r4.push((wt, rho(a)?));
    }
    ineqs.push(("rho_dist_lower", Side::AtLeast, side(l4, r4)));

    let mut rep = CheckReport::new("phirho-sandwich", samples, seed);
    for (label, dir, (lhs, rhs)) in ineqs {
        let diff = Estimate {
            value: lhs.value - rhs.value,
            stderr: stats::pooled(lhs, rhs),
        };
        let dir = match (dir, reversed) {
            (Side::AtMost, false) | (Side::AtLeast, true) => Side::AtMost,
            _ => Side::AtLeast,
        };
        rep.lines.push(match dir {
            Side::AtMost => CheckLine::at_most(label, diff, 0.0),
            Side::AtLeast => CheckLine::at_least(label, diff, 0.0),
        });
    }
    Ok(rep)
}

/// Preservation failure probability against `C exp(-gamma^2 k / C)` over a
/// doubling sequence of `k`, with nonincrease in `k` within [`SIGMA`].
pub fn check_preservation(alpha: f64, gamma: f64, ks: &[usize], trials: u64, seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("preservation", trials, seed);
    let mut prev: Option<(usize, Estimate)> = None;
    for &k in ks {
        let e = discretize::estimate_preservation(alpha, gamma, k, trials, derive_seed(seed, k as u64))?;
        let bound = C_TAIL * (-gamma * gamma * k as f64 / C_TAIL).exp();
        rep.lines.push(CheckLine::at_most(format!("tail_k{k}"), e, bound));
        if let Some((pk, pe)) = prev {
            let diff = Estimate {
                value: e.value - pe.value,
                stderr: stats::pooled(e, pe),
            };
            rep.lines.push(CheckLine::at_most(format!("nonincreasing_k{pk}_k{k}"), diff, 0.0));
        }
        prev = Some((k, e));
    }
    Ok(rep)
}

/// Per-coordinate mean of the snapped vector over fresh offsets, for a
/// fixed matrix, against `(Aw)_i`.
pub fn check_unbiased_rounding(k: usize, d: usize, trials: u64, seed: u64) -> Result<CheckReport> {
    positive("trials", trials)?;
    let draw = discretize::sample_draw(k, d, derive_seed(seed, 0))?;
    let w = UnitVector::normalize(
        (0..d)
            .map(|j| ((j * 7 + 3) % 11) as f64 - 5.0)
            .collect(),
    )?;
    let aw = draw.project(w.as_slice())?;
    let snapped = rng::par_trials(trials, derive_seed(seed, 1), |_, r| {
        let t: Vec<f64> = (0..k).map(|_| r.random::<f64>()).collect();
        discretize::GridVector::snap(&aw, &t).coords()
    });
    let mut rep = CheckReport::new("unbiased-rounding", trials, seed);
    for (i, target) in aw.iter().enumerate() {
        let col: Vec<f64> = snapped.iter().map(|h| h[i]).collect();
        rep.lines.push(CheckLine::close_to(format!("coord_{i}"), Estimate::mean(&col), *target));
    }
    Ok(rep)
}
