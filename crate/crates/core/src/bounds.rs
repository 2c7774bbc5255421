//! Closed-form margin generalization bounds.
//!
//! Every evaluator takes a [`BoundInputs`] bundle. The absolute constants are
//! never fixed by the underlying theory, so each bound carries an explicit
//! multiplier `c` (default 1). Logarithms are natural; `ln(e/x)` is computed
//! as `1 - ln x` and `x ln(e/x)` is taken as 0 at `x = 0`.

use crate::{Error, Result};

/// Which bound a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    BartlettHard,
    BartlettSoft,
    McAllester,
    Sota,
    Tight,
    Lower,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::BartlettHard,
        BoundKind::BartlettSoft,
        BoundKind::McAllester,
        BoundKind::Sota,
        BoundKind::Tight,
        BoundKind::Lower,
    ];

    /// CSV column name.
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::BartlettHard => "bartlett_hard",
            BoundKind::BartlettSoft => "bartlett_soft",
            BoundKind::McAllester => "mcallester",
            BoundKind::Sota => "sota",
            BoundKind::Tight => "tight",
            BoundKind::Lower => "lower",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Scalar inputs shared by all bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// Margin, in `(0, 1]`.
    pub gamma: f64,
    /// Sample size, `>= 1`. Real-valued so that closed forms at e.g. `n = e`
    /// can be evaluated.
    pub n: f64,
    /// Failure probability, in `(0, 1]`.
    pub delta: f64,
    /// Empirical margin loss, in `[0, 1]`.
    pub empirical_loss: f64,
    /// Multiplier on the non-loss terms, `> 0`.
    pub c: f64,
}

impl BoundInputs {
    pub fn new(gamma: f64, n: f64, delta: f64, empirical_loss: f64, c: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::param("gamma", format!("{gamma} is not in (0, 1]")));
        }
        if !(n >= 1.0 && n.is_finite()) {
            return Err(Error::param("n", format!("{n} is not a finite value >= 1")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::param("delta", format!("{delta} is not in (0, 1]")));
        }
        if !(0.0..=1.0).contains(&empirical_loss) {
            return Err(Error::param("loss", format!("{empirical_loss} is not in [0, 1]")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", format!("{c} is not a positive finite value")));
        }
        Ok(BoundInputs {
            gamma,
            n,
            delta,
            empirical_loss,
            c,
        })
    }

    pub fn with_c(self, c: f64) -> Result<Self> {
        Self::new(self.gamma, self.n, self.delta, self.empirical_loss, c)
    }

    pub fn with_loss(self, loss: f64) -> Result<Self> {
        Self::new(self.gamma, self.n, self.delta, loss, self.c)
    }

    /// `gamma^2 n`.
    fn gn(&self) -> f64 {
        self.gamma * self.gamma * self.n
    }

    /// `ln(e/delta)`.
    fn log_delta(&self) -> f64 {
        ln_e_over(self.delta)
    }
}

/// `ln(e/x) = 1 - ln x`.
pub fn ln_e_over(x: f64) -> f64 {
    1.0 - x.ln()
}

/// `x ln(e/x)`, continuous at 0.
pub fn x_ln_e_over(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * ln_e_over(x)
    }
}

/// Hard-margin bound `c (ln^2 n / (gamma^2 n) + ln(e/delta) / n)`; requires
/// zero empirical loss.
pub fn bartlett_hard(b: &BoundInputs) -> Result<f64> {
    if b.empirical_loss != 0.0 {
        return Err(Error::Precondition(format!(
            "hard-margin bound needs zero empirical loss, got {}",
            b.empirical_loss
        )));
    }
    let ln_n = b.n.ln();
    Ok(b.c * (ln_n * ln_n / b.gn() + b.log_delta() / b.n))
}

/// Soft-margin variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SoftVariant {
    /// `ln^2 n` in the complexity term.
    #[default]
    LogSquared,
    /// Rademacher improvement: `ln^2 n` replaced by 1.
    Rademacher,
}

/// `L + c sqrt(ln^2 n / (gamma^2 n) + ln(e/delta) / n)`.
pub fn bartlett_soft(b: &BoundInputs, variant: SoftVariant) -> f64 {
    let complexity = match variant {
        SoftVariant::LogSquared => {
            let ln_n = b.n.ln();
            ln_n * ln_n
        }
        SoftVariant::Rademacher => 1.0,
    };
    b.empirical_loss + b.c * (complexity / b.gn() + b.log_delta() / b.n).sqrt()
}

/// `L + c (sqrt(L ln n / (gamma^2 n)) + ln n / (gamma^2 n) + sqrt((ln n + ln(e/delta)) / n))`.
pub fn mcallester(b: &BoundInputs) -> f64 {
    let l = b.empirical_loss;
    let ln_n = b.n.ln();
    let gn = b.gn();
    l + b.c * ((l * ln_n / gn).sqrt() + ln_n / gn + ((ln_n + b.log_delta()) / b.n).sqrt())
}

/// `L + c (sqrt(L (ln n / (gamma^2 n) + ln(e/delta)/n)) + ln n / (gamma^2 n) + ln(e/delta)/n)`.
pub fn sota(b: &BoundInputs) -> f64 {
    let l = b.empirical_loss;
    let ln_n = b.n.ln();
    let gn = b.gn();
    let ld = b.log_delta() / b.n;
    l + b.c * ((l * (ln_n / gn + ld)).sqrt() + ln_n / gn + ld)
}

/// Relative slack accepted on `gamma >= n^(-1/2)`.
const TIGHT_RANGE_TOLERANCE: f64 = 1e-12;

/// `L + c (sqrt(L ln(e/L) / (gamma^2 n) + L ln(e/delta)/n) + ln(e gamma^2 n) / (gamma^2 n) + ln(e/delta)/n)`;
/// requires `gamma >= n^(-1/2)`.
pub fn tight(b: &BoundInputs) -> Result<f64> {
    let gn = b.gn();
    if gn < 1.0 - TIGHT_RANGE_TOLERANCE {
        return Err(Error::Precondition(format!(
            "gamma = {} is below n^(-1/2) = {}",
            b.gamma,
            b.n.powf(-0.5)
        )));
    }
    let l = b.empirical_loss;
    let ld = b.log_delta() / b.n;
    let radical = (x_ln_e_over(l) / gn + l * ld).sqrt();
    Ok(l + b.c * (radical + (1.0 + gn.ln()) / gn + ld))
}

/// Lower bound `c (sqrt(tau ln(e/tau) / (gamma^2 n)) + ln(gamma^2 n) / (gamma^2 n))`.
///
/// The range constant `range_c` and the bound multiplier `b.c` are separate
/// inputs; the range requirement is `range_c n^(-1/2) < gamma < 1 / range_c`.
pub fn lower(b: &BoundInputs, tau: f64, range_c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::param("tau", format!("{tau} is not in [0, 1]")));
    }
    if !(range_c > 0.0 && range_c.is_finite()) {
        return Err(Error::param("range_c", format!("{range_c} is not positive")));
    }
    let lo = range_c / b.n.sqrt();
    let hi = 1.0 / range_c;
    if !(lo < b.gamma && b.gamma < hi) {
        return Err(Error::Precondition(format!(
            "gamma = {} outside ({lo}, {hi})",
            b.gamma
        )));
    }
    let gn = b.gn();
    Ok(b.c * ((x_ln_e_over(tau) / gn).sqrt() + gn.ln() / gn))
}

/// Per-bound multipliers and evaluation options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub c_bartlett_hard: f64,
    pub c_bartlett_soft: f64,
    pub c_mcallester: f64,
    pub c_sota: f64,
    pub c_tight: f64,
    pub c_lower: f64,
    /// Range constant of the lower bound.
    pub lower_range_c: f64,
    pub soft_variant: SoftVariant,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            c_bartlett_hard: 1.0,
            c_bartlett_soft: 1.0,
            c_mcallester: 1.0,
            c_sota: 1.0,
            c_tight: 1.0,
            c_lower: 1.0,
            lower_range_c: 1.0,
            soft_variant: SoftVariant::LogSquared,
        }
    }
}

impl BoundOptions {
    pub fn c(&self, kind: BoundKind) -> f64 {
        match kind {
            BoundKind::BartlettHard => self.c_bartlett_hard,
            BoundKind::BartlettSoft => self.c_bartlett_soft,
            BoundKind::McAllester => self.c_mcallester,
            BoundKind::Sota => self.c_sota,
            BoundKind::Tight => self.c_tight,
            BoundKind::Lower => self.c_lower,
        }
    }

    pub fn set_c(&mut self, kind: BoundKind, value: f64) {
        let slot = match kind {
            BoundKind::BartlettHard => &mut self.c_bartlett_hard,
            BoundKind::BartlettSoft => &mut self.c_bartlett_soft,
            BoundKind::McAllester => &mut self.c_mcallester,
            BoundKind::Sota => &mut self.c_sota,
            BoundKind::Tight => &mut self.c_tight,
            BoundKind::Lower => &mut self.c_lower,
        };
        *slot = value;
    }
}

/// All six bounds at one parameter point; `None` where a precondition fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub gamma: f64,
    pub n: f64,
    pub delta: f64,
    pub loss: f64,
    pub values: [Option<f64>; 6],
}

impl BoundRow {
    pub fn get(&self, kind: BoundKind) -> Option<f64> {
        self.values[BoundKind::ALL.iter().position(|k| *k == kind).unwrap()]
    }
}

/// Evaluates every bound, using `tau = L` for the lower bound.
pub fn evaluate_all(gamma: f64, n: f64, delta: f64, loss: f64, opts: &BoundOptions) -> Result<BoundRow> {
    let base = BoundInputs::new(gamma, n, delta, loss, 1.0)?;
    let mut values = [None; 6];
    for (slot, kind) in values.iter_mut().zip(BoundKind::ALL) {
        let b = base.with_c(opts.c(kind))?;
        *slot = match kind {
            BoundKind::BartlettHard => bartlett_hard(&b).ok(),
            BoundKind::BartlettSoft => Some(bartlett_soft(&b, opts.soft_variant)),
            BoundKind::McAllester => Some(mcallester(&b)),
            BoundKind::Sota => Some(sota(&b)),
            BoundKind::Tight => tight(&b).ok(),
            BoundKind::Lower => lower(&b, loss, opts.lower_range_c).ok(),
        };
    }
    Ok(BoundRow {
        gamma,
        n,
        delta,
        loss,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn inp(gamma: f64, n: f64, delta: f64, l: f64) -> BoundInputs {
        BoundInputs::new(gamma, n, delta, l, 1.0).unwrap()
    }

    #[test]
    fn bartlett_hard_example() {
        let v = bartlett_hard(&inp(1.0, E * E, 1.0, 0.0)).unwrap();
        assert_relative_eq!(v, 5.0 / (E * E), max_relative = 1e-12);
        assert_relative_eq!(v, 0.6767, epsilon = 1e-4);
        assert!(bartlett_hard(&inp(0.5, 100.0, 0.1, 0.1)).is_err());
    }

    #[test]
    fn bartlett_hard_monotone_in_n_and_delta() {
        for n in [8.0, 16.0, 100.0, 1e4] {
            let a = bartlett_hard(&inp(0.3, n, 0.1, 0.0)).unwrap();
            let b = bartlett_hard(&inp(0.3, 2.0 * n, 0.1, 0.0)).unwrap();
            assert!(b < a);
        }
        let a = bartlett_hard(&inp(0.3, 100.0, 0.1, 0.0)).unwrap();
        let b = bartlett_hard(&inp(0.3, 100.0, 0.01, 0.0)).unwrap();
        assert!(b > a);
    }

    #[test]
    fn bartlett_soft_examples() {
        let b = inp(0.2, 500.0, 0.05, 0.0);
        let hard = bartlett_hard(&b).unwrap();
        assert_relative_eq!(bartlett_soft(&b, SoftVariant::LogSquared), hard.sqrt(), max_relative = 1e-12);
        let v = bartlett_soft(&inp(1.0, 100.0, 1.0, 0.0), SoftVariant::Rademacher);
        assert_relative_eq!(v, 0.02f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(v, 0.14142, epsilon = 1e-5);
        assert!(bartlett_soft(&inp(0.2, 500.0, 0.05, 0.3), SoftVariant::LogSquared) >= 0.3);
    }

    #[test]
    fn mcallester_examples() {
        let v = mcallester(&inp(1.0, E, 1.0, 0.0));
        assert_relative_eq!(v, 1.0 / E + (2.0 / E).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(v, 1.2257, epsilon = 1e-4);
        let b = inp(0.3, 1000.0, 0.1, 0.0);
        let ln_n = 1000f64.ln();
        let expect = ln_n / (0.09 * 1000.0) + ((ln_n + ln_e_over(0.1)) / 1000.0).sqrt();
        assert_relative_eq!(mcallester(&b), expect, max_relative = 1e-12);
    }

    #[test]
    fn sota_examples() {
        let v = sota(&inp(1.0, E, 1.0, 0.0));
        assert_relative_eq!(v, 2.0 / E, max_relative = 1e-12);
        assert_relative_eq!(v, 0.7358, epsilon = 1e-4);
        for e in 3..=6 {
            let b = inp(0.2, 10f64.powi(e), 0.1, 0.0);
            assert!(sota(&b) < mcallester(&b));
        }
    }

    #[test]
    fn tight_examples() {
        let v = tight(&inp(0.1, 100.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(v, 1.01, max_relative = 1e-12);
        let b = inp(0.2, 400.0, 0.1, 1.0);
        let gn = 0.04 * 400.0;
        let ld = ln_e_over(0.1) / 400.0;
        let expect = 1.0 + (1.0 / gn + ld).sqrt() + (1.0 + gn.ln()) / gn + ld;
        assert_relative_eq!(tight(&b).unwrap(), expect, max_relative = 1e-12);
        assert!(tight(&inp(0.05, 100.0, 0.1, 0.0)).is_err());
    }

    #[test]
    fn tight_radical_below_sota_radical() {
        for l in [0.01, 0.05, 0.1, 0.3] {
            for c in [0.5, 1.0, 4.0] {
                let n_min = (E / l).ceil();
                for n in [n_min, 2.0 * n_min, 1e4, 1e6] {
                    for g in [0.1, 0.5, 1.0] {
                        let b = BoundInputs::new(g, n.max(1.0 / (g * g)), 0.1, l, c).unwrap();
                        let gn = b.gn();
                        let ld = b.log_delta() / b.n;
                        let t = c * (l * ln_e_over(l) / gn + l * ld).sqrt();
                        let s = c * (l * (b.n.ln() / gn + ld)).sqrt();
                        assert!(t <= s, "l={l} n={} g={g}", b.n);
                    }
                }
            }
        }
    }

    #[test]
    fn lower_examples() {
        let b = inp(0.3, 1000.0, 0.1, 0.0);
        let gn: f64 = 90.0;
        assert_relative_eq!(lower(&b, 0.0, 1.0).unwrap(), gn.ln() / gn, max_relative = 1e-12);
        assert_relative_eq!(
            lower(&b, 1.0, 1.0).unwrap(),
            (1.0 / gn).sqrt() + gn.ln() / gn,
            max_relative = 1e-12
        );
        assert!(lower(&b, 0.1, 4.0).is_err());
        assert!(lower(&inp(1.0, 1000.0, 0.1, 0.0), 0.1, 1.0).is_err());
    }

    #[test]
    fn evaluate_all_blanks_hard_margin_with_loss() {
        let row = evaluate_all(0.1, 100.0, 1.0, 0.0, &BoundOptions::default()).unwrap();
        assert_relative_eq!(row.get(BoundKind::Tight).unwrap(), 1.01, max_relative = 1e-12);
        let row = evaluate_all(0.1, 100.0, 1.0, 0.2, &BoundOptions::default()).unwrap();
        assert!(row.get(BoundKind::BartlettHard).is_none());
        assert!(row.get(BoundKind::Sota).is_some());
    }

    #[test]
    fn input_validation() {
        assert!(BoundInputs::new(0.0, 10.0, 0.1, 0.0, 1.0).is_err());
        assert!(BoundInputs::new(0.5, 0.5, 0.1, 0.0, 1.0).is_err());
        assert!(BoundInputs::new(0.5, 10.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundInputs::new(0.5, 10.0, 0.1, 1.5, 1.0).is_err());
        assert!(BoundInputs::new(0.5, 10.0, 0.1, 0.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn tight_beats_sota_at_zero_loss(g in 0.01f64..0.6, n in 10.0f64..1e7, c in 0.1f64..10.0) {
            prop_assume!(g * g * n >= 1.0);
            let b = BoundInputs::new(g, n, 0.1, 0.0, c).unwrap();
            prop_assert!(tight(&b).unwrap() < sota(&b));
        }

        #[test]
        fn lower_below_tight(g in 0.01f64..0.99, n in 10.0f64..1e7, tau in 0.0f64..=1.0, c in 0.1f64..10.0) {
            prop_assume!(g * g * n > 1.0);
            let b = BoundInputs::new(g, n, 0.1, tau, c).unwrap();
            prop_assert!(lower(&b, tau, 1.0).unwrap() <= tight(&b).unwrap());
        }

        #[test]
        fn all_finite_and_nonnegative(g in 0.01f64..=1.0, n in 1.0f64..1e8, d in 1e-12f64..=1.0, l in 0.0f64..=1.0) {
            let row = evaluate_all(g, n, d, l, &BoundOptions::default()).unwrap();
            for v in row.values.iter().flatten() {
                prop_assert!(v.is_finite() && *v >= 0.0);
            }
        }
    }
}
