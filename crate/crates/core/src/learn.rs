//! Margin perceptron and bound-versus-gap experiments on synthetic data.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bounds::{self, BoundKind, BoundOptions, BoundRow};
use crate::margins::{self, DiscreteDistribution, Label, LabeledPoint, Sample, UnitVector};
use crate::rng::{self, derive_seed, TrialRng};
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    /// Update whenever `y <w, x> <= target_margin * ||w||`.
    pub target_margin: f64,
    pub max_epochs: usize,
    /// Seeds the per-epoch visiting order.
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(target_margin: f64, max_epochs: usize, seed: u64) -> Result<Self> {
        if !(target_margin >= 0.0 && target_margin.is_finite()) {
            return Err(Error::param("target_margin", format!("{target_margin} is negative")));
        }
        if max_epochs == 0 {
            return Err(Error::param("max_epochs", "must be at least 1"));
        }
        Ok(LearnerConfig {
            target_margin,
            max_epochs,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptronFit {
    pub w: UnitVector,
    pub updates: usize,
    pub epochs: usize,
    /// An epoch passed without any update.
    pub converged: bool,
}

/// Margin perceptron. Points with `x = 0` never trigger updates. Without
/// convergence the hypothesis with the lowest `L^gamma_S` seen at the end of
/// an epoch is returned.
pub fn margin_perceptron(s: &Sample, cfg: &LearnerConfig) -> Result<PerceptronFit> {
    let d = s.dim();
    let gamma = cfg.target_margin;
    let mut w = vec![0.0; d];
    let mut w_norm = 0.0;
    let mut order: Vec<usize> = (0..s.len()).collect();
    let mut r = rng::stream_rng(cfg.seed, 0);
    let mut updates = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut r);
        let mut changed = false;
        for &i in &order {
            let p = &s.points()[i];
            if p.x().iter().all(|v| *v == 0.0) {
                continue;
            }
            let y = p.y().value();
            if y * margins::dot(&w, p.x()) <= gamma * w_norm {
                for (wj, xj) in w.iter_mut().zip(p.x()) {
                    *wj += y * xj;
                }
                w_norm = margins::norm(&w);
                updates += 1;
                changed = true;
            }
        }
        if w_norm == 0.0 {
            return Err(Error::Degenerate("every point is the origin".into()));
        }
        if !changed {
            return Ok(PerceptronFit {
                w: UnitVector::normalize(w)?,
                updates,
                epochs: epoch,
                converged: true,
            });
        }
        let u = UnitVector::normalize(w.clone())?;
        let loss = margins::margin_loss_sample(&u, s, gamma)?;
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, w.clone()));
        }
    }
    let (_, bw) = best.expect("at least one epoch ran");
    Ok(PerceptronFit {
        w: UnitVector::normalize(bw)?,
        updates,
        epochs: cfg.max_epochs,
        converged: false,
    })
}

/// Uniform distribution over `support` points of the unit ball in `R^d`
/// with `|<w*, x>| >= margin`, labelled by `sign <w*, x>`; each label is
/// then flipped independently with probability `noise`.
pub fn planted_margin_distribution(d: usize, support: usize, margin: f64, noise: f64, seed: u64) -> Result<(DiscreteDistribution, UnitVector)> {
    if d < 2 {
        return Err(Error::param("d", "needs at least 2 dimensions"));
    }
    if support == 0 {
        return Err(Error::param("support", "must be at least 1"));
    }
    if !(0.0..0.9).contains(&margin) {
        return Err(Error::param("margin", format!("{margin} is not in [0, 0.9)")));
    }
    if !(0.0..=0.5).contains(&noise) {
        return Err(Error::param("noise", format!("{noise} is not in [0, 0.5]")));
    }
    let mut r = rng::stream_rng(seed, 0);
    let gauss = |r: &mut TrialRng| -> Vec<f64> { (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect() };
    let w_star = UnitVector::normalize(gauss(&mut r))?;
    let mut points = Vec::with_capacity(support);
    while points.len() < support {
        let dir = UnitVector::normalize(gauss(&mut r))?;
        let radius = r.random::<f64>().powf(1.0 / d as f64);
        let x: Vec<f64> = dir.as_slice().iter().map(|v| v * radius).collect();
        let a = margins::dot(w_star.as_slice(), &x);
        if a.abs() < margin || a == 0.0 {
            continue;
        }
        let mut y = Label::from_sign(a)?;
        if r.random::<f64>() < noise {
            y = y.flip();
        }
        points.push(LabeledPoint::new(x, y)?);
    }
    Ok((DiscreteDistribution::uniform(points)?, w_star))
}

/// One trial of [`gap_vs_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub trial: u64,
    pub sample_loss: f64,
    pub true_loss: f64,
    pub gap: f64,
    pub updates: usize,
    pub bounds: BoundRow,
}

impl GapRow {
    /// Whether `gap <= tight` (false where the tight bound is undefined).
    pub fn covered_by(&self, kind: BoundKind) -> bool {
        self.bounds.get(kind).is_some_and(|b| self.gap <= b)
    }
}

/// Quantiles of one column across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnQuantiles {
    pub column: String,
    pub values: Vec<(f64, f64)>,
}

pub const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    pub quantiles: Vec<ColumnQuantiles>,
}

impl GapReport {
    /// Fraction of trials with `gap <= bound`.
    pub fn coverage(&self, kind: BoundKind) -> f64 {
        if self.rows.is_empty() {
            return f64::NAN;
        }
        self.rows.iter().filter(|r| r.covered_by(kind)).count() as f64 / self.rows.len() as f64
    }
}

/// Per trial: `S ~ D^n`, `w` from the margin perceptron, `L^gamma_S(w)`,
/// the exact `L_D(w)`, and every bound evaluated at `L = L^gamma_S(w)`.
#[allow(clippy::too_many_arguments)]
pub fn gap_vs_bounds(
    d: &DiscreteDistribution,
    n: usize,
    gamma: f64,
    delta: f64,
    trials: u64,
    seed: u64,
    learner: &LearnerConfig,
    opts: &BoundOptions,
) -> Result<GapReport> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    bounds::BoundInputs::new(gamma, n as f64, delta, 0.0, 1.0)?;
    let rows = rng::par_trials(trials, seed, |i, r| -> Result<GapRow> {
        let s = d.draw_sample(n, r)?;
        let cfg = LearnerConfig {
            seed: derive_seed(learner.seed, i),
            ..*learner
        };
        let fit = margin_perceptron(&s, &cfg)?;
        let sample_loss = margins::margin_loss_sample(&fit.w, &s, gamma)?;
        let true_loss = margins::true_loss(&fit.w, d)?;
        let bounds = bounds::evaluate_all(gamma, n as f64, delta, sample_loss, opts)?;
        Ok(GapRow {
            trial: i,
            sample_loss,
            true_loss,
            gap: true_loss - sample_loss,
            updates: fit.updates,
            bounds,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let quantiles = if rows.is_empty() { Vec::new() } else { column_quantiles(&rows) };
    Ok(GapReport { rows, quantiles })
}

fn column_quantiles(rows: &[GapRow]) -> Vec<ColumnQuantiles> {
    let mut cols: Vec<(String, Vec<f64>)> = vec![
        ("sample_loss".into(), rows.iter().map(|r| r.sample_loss).collect()),
        ("true_loss".into(), rows.iter().map(|r| r.true_loss).collect()),
        ("gap".into(), rows.iter().map(|r| r.gap).collect()),
    ];
    for kind in BoundKind::ALL {
        let v: Vec<f64> = rows.iter().filter_map(|r| r.bounds.get(kind)).collect();
        if !v.is_empty() {
            cols.push((kind.name().into(), v));
        }
    }
    cols.into_iter()
        .map(|(column, v)| ColumnQuantiles {
            column,
            values: QUANTILES.iter().map(|&q| (q, stats::quantile(&v, q))).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: Vec<f64>, y: Label) -> LabeledPoint {
        LabeledPoint::new(x, y).unwrap()
    }

    #[test]
    fn separates_two_points() {
        let s = Sample::new(vec![pt(vec![1.0, 0.0], Label::Positive), pt(vec![-1.0, 0.0], Label::Negative)]).unwrap();
        let fit = margin_perceptron(&s, &LearnerConfig::new(0.0, 10, 1).unwrap()).unwrap();
        assert!(fit.converged);
        assert_eq!(margins::margin_loss_sample(&fit.w, &s, 0.0).unwrap(), 0.0);
        assert!((margins::norm(fit.w.as_slice()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn origin_points_are_skipped() {
        let s = Sample::new(vec![pt(vec![0.0, 0.0], Label::Positive), pt(vec![0.0, 0.5], Label::Positive)]).unwrap();
        let fit = margin_perceptron(&s, &LearnerConfig::new(0.1, 5, 1).unwrap()).unwrap();
        assert!(fit.converged);
        let zero = Sample::new(vec![pt(vec![0.0, 0.0], Label::Positive)]).unwrap();
        assert!(matches!(margin_perceptron(&zero, &LearnerConfig::new(0.1, 5, 1).unwrap()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mistake_budget_on_planted_margin() {
        for seed in 0..5 {
            let g = 0.2;
            let (d, _) = planted_margin_distribution(10, 300, g, 0.0, seed).unwrap();
            let s = d.draw_sample(300, &mut rng::stream_rng(seed, 9)).unwrap();
            let fit = margin_perceptron(&s, &LearnerConfig::new(g / 2.0, 10_000, seed).unwrap()).unwrap();
            assert!(fit.converged);
            assert!(fit.updates as f64 <= (2.0 / g).powi(2), "{} updates", fit.updates);
            assert_eq!(margins::margin_loss_sample(&fit.w, &s, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn noisy_data_returns_unit_best_so_far() {
        let (d, _) = planted_margin_distribution(5, 100, 0.1, 0.3, 2).unwrap();
        let s = d.draw_sample(100, &mut rng::stream_rng(2, 1)).unwrap();
        let fit = margin_perceptron(&s, &LearnerConfig::new(0.1, 3, 1).unwrap()).unwrap();
        assert!(!fit.converged);
        assert!((margins::norm(fit.w.as_slice()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_distribution_has_margin() {
        let (d, w) = planted_margin_distribution(6, 200, 0.25, 0.0, 3).unwrap();
        for (p, _) in d.support() {
            assert!(margins::margin(&w, p).unwrap() >= 0.25);
            assert!(margins::norm(p.x()) <= 1.0);
        }
    }

    #[test]
    fn gap_report_is_deterministic() {
        let (d, _) = planted_margin_distribution(5, 200, 0.3, 0.05, 4).unwrap();
        let cfg = LearnerConfig::new(0.2, 20, 7).unwrap();
        let run = || gap_vs_bounds(&d, 100, 0.2, 0.1, 10, 5, &cfg, &BoundOptions::default()).unwrap();
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.rows.len(), 10);
        assert_eq!(a.quantiles.iter().find(|q| q.column == "gap").unwrap().values.len(), QUANTILES.len());
        for r in &a.rows {
            assert!((r.gap - (r.true_loss - r.sample_loss)).abs() < 1e-15);
        }
        let empty = gap_vs_bounds(&d, 100, 0.2, 0.1, 0, 5, &cfg, &BoundOptions::default()).unwrap();
        assert!(empty.rows.is_empty() && empty.quantiles.is_empty());
    }
}
