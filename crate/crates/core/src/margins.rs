//! Margins, margin losses and the true (0-1) loss of unit-norm halfspaces,
//! plus the lifting embedding that puts every point on the unit sphere while
//! shrinking all margins by a common factor.

use crate::{Error, Result};

/// Tolerance on `| ||v|| - 1 |` accepted at construction.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Tolerance on distribution weights summing to one.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Default lifting factor: the largest value for which the surrogate losses
/// keep their Lipschitz guarantees.
pub const DEFAULT_C_GAMMA: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sign with `sign(0) = 0`, so a point on the hyperplane is never classified
/// correctly.
pub fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if coords.is_empty() || !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotUnitNorm { norm: n });
        }
        Ok(UnitVector(coords))
    }

    /// Rescales a nonzero vector to unit length.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Degenerate(format!("cannot normalize vector of norm {n}")));
        }
        coords.iter_mut().for_each(|c| *c /= n);
        Ok(UnitVector(coords))
    }

    /// Standard basis vector `e_i` in dimension `d`.
    pub fn basis(d: usize, i: usize) -> Self {
        assert!(i < d, "basis index {i} out of range for dimension {d}");
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        UnitVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    pub fn from_sign(v: f64) -> Result<Self> {
        match sign(v) {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            _ => Err(Error::param("label", format!("{v} is not a valid label"))),
        }
    }
}

/// A point of the unit ball with a binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    x: Vec<f64>,
    y: Label,
}

impl LabeledPoint {
    pub fn new(x: Vec<f64>, y: Label) -> Result<Self> {
        let n = norm(&x);
        if x.is_empty() || !n.is_finite() || n > 1.0 + NORM_TOLERANCE {
            return Err(Error::OutsideUnitBall { norm: n });
        }
        Ok(LabeledPoint { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> Label {
        self.y
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Ordered multiset of labeled points; `(x, y) ~ S` draws uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    points: Vec<LabeledPoint>,
}

impl Sample {
    pub fn new(points: Vec<LabeledPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        let d = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.dim(),
            });
        }
        Ok(Sample { points })
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// The uniform distribution over the sample, one support entry per
    /// point (duplicates are kept as separate entries).
    pub fn to_uniform(&self) -> DiscreteDistribution {
        let w = 1.0 / self.len() as f64;
        DiscreteDistribution {
            support: self.points.iter().cloned().map(|p| (p, w)).collect(),
        }
    }
}

/// Finitely supported distribution over labeled points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    support: Vec<(LabeledPoint, f64)>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<(LabeledPoint, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let d = support[0].0.dim();
        let mut total = 0.0;
        for (p, w) in &support {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.dim(),
                });
            }
            if !(*w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidDistribution(format!("non-positive weight {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(DiscreteDistribution { support })
    }

    pub fn uniform(points: Vec<LabeledPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let w = 1.0 / points.len() as f64;
        Self::new(points.into_iter().map(|p| (p, w)).collect())
    }

    pub fn support(&self) -> &[(LabeledPoint, f64)] {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.support[0].0.dim()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cumulative weights used for inverse-CDF resampling.
    pub fn cumulative_weights(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.support
            .iter()
            .map(|(_, w)| {
                acc += w;
                acc
            })
            .collect()
    }

    /// Index of the support point selected by a uniform draw `u` in `[0, 1)`.
    pub fn index_for(cumulative: &[f64], u: f64) -> usize {
        let idx = cumulative.partition_point(|&c| c <= u);
        idx.min(cumulative.len() - 1)
    }

    /// Draws a sample of `n` points i.i.d. from the distribution.
    pub fn draw_sample<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Sample> {
        let cumulative = self.cumulative_weights();
        let points = (0..n)
            .map(|_| {
                let i = Self::index_for(&cumulative, rng.random::<f64>());
                self.support[i].0.clone()
            })
            .collect();
        Sample::new(points)
    }
}

fn check_dim(w: &UnitVector, p: &LabeledPoint) -> Result<()> {
    if w.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: p.dim(),
        });
    }
    Ok(())
}

/// `y <w, x>`.
pub fn margin(w: &UnitVector, p: &LabeledPoint) -> Result<f64> {
    check_dim(w, p)?;
    Ok(p.y.value() * dot(w.as_slice(), &p.x))
}

/// Fraction of the sample with margin `<= gamma` (ties count as losses).
pub fn margin_loss_sample(w: &UnitVector, s: &Sample, gamma: f64) -> Result<f64> {
    let mut losses = 0usize;
    for p in s.points() {
        if margin(w, p)? <= gamma {
            losses += 1;
        }
    }
    Ok(losses as f64 / s.len() as f64)
}

/// `Pr_{(x,y)~D}[y <w, x> <= gamma]`, summed exactly over the support.
pub fn margin_loss_dist(w: &UnitVector, d: &DiscreteDistribution, gamma: f64) -> Result<f64> {
    let mut loss = 0.0;
    for (p, weight) in d.support() {
        if margin(w, p)? <= gamma {
            loss += weight;
        }
    }
    Ok(loss)
}

/// `Pr[sign(<w, x>) != y]` with `sign(0) = 0` counted as an error.
pub fn true_loss(w: &UnitVector, d: &DiscreteDistribution) -> Result<f64> {
    let mut loss = 0.0;
    for (p, weight) in d.support() {
        check_dim(w, p)?;
        if sign(dot(w.as_slice(), p.x())) != p.y.as_i8() {
            loss += weight;
        }
    }
    Ok(loss)
}

fn check_c_gamma(c_gamma: f64) -> Result<()> {
    if !(c_gamma > 0.0 && c_gamma < 1.0) {
        return Err(Error::param("c_gamma", format!("{c_gamma} is not in (0, 1)")));
    }
    Ok(())
}

/// `(c x, sqrt(1 - c^2 ||x||^2))`: a unit vector whose first `d`
/// coordinates have norm at most `c`.
pub fn lift_point(x: &[f64], c_gamma: f64) -> Result<Vec<f64>> {
    check_c_gamma(c_gamma)?;
    let n = norm(x);
    if n > 1.0 + NORM_TOLERANCE {
        return Err(Error::OutsideUnitBall { norm: n });
    }
    let mut out: Vec<f64> = x.iter().map(|v| c_gamma * v).collect();
    let tail = (1.0 - c_gamma * c_gamma * n * n).max(0.0).sqrt();
    out.push(tail);
    Ok(out)
}

/// `w x {0}`.
pub fn lift_hypothesis(w: &UnitVector) -> UnitVector {
    let mut v = w.as_slice().to_vec();
    v.push(0.0);
    UnitVector(v)
}

pub fn lift_labeled(p: &LabeledPoint, c_gamma: f64) -> Result<LabeledPoint> {
    LabeledPoint::new(lift_point(p.x(), c_gamma)?, p.y())
}

/// Applies [`lift_point`] to every support point, keeping weights.
pub fn lift_distribution(d: &DiscreteDistribution, c_gamma: f64) -> Result<DiscreteDistribution> {
    let support = d
        .support()
        .iter()
        .map(|(p, w)| Ok((lift_labeled(p, c_gamma)?, *w)))
        .collect::<Result<Vec<_>>>()?;
    DiscreteDistribution::new(support)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pt(x: &[f64], y: Label) -> LabeledPoint {
        LabeledPoint::new(x.to_vec(), y).unwrap()
    }

    #[test]
    fn margin_examples() {
        let e1 = UnitVector::basis(2, 0);
        assert_eq!(margin(&e1, &pt(&[1.0, 0.0], Label::Positive)).unwrap(), 1.0);
        assert_eq!(margin(&e1, &pt(&[1.0, 0.0], Label::Negative)).unwrap(), -1.0);
        let diag = UnitVector::normalize(vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            margin(&diag, &pt(&[1.0, 0.0], Label::Positive)).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn margin_dimension_mismatch() {
        let e1 = UnitVector::basis(3, 0);
        assert!(matches!(
            margin(&e1, &pt(&[1.0, 0.0], Label::Positive)),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(UnitVector::new(vec![1.0, 1.0]).is_err());
        assert!(UnitVector::new(vec![1.0 + 1e-10]).is_ok());
        assert!(LabeledPoint::new(vec![1.0, 0.1], Label::Positive).is_err());
        assert!(matches!(Sample::new(vec![]), Err(Error::EmptySample)));
        let p = pt(&[0.5], Label::Positive);
        assert!(DiscreteDistribution::new(vec![(p.clone(), 0.5)]).is_err());
        assert!(DiscreteDistribution::new(vec![(p.clone(), 1.0), (p, 0.0)]).is_err());
    }

    #[test]
    fn margin_loss_sample_examples() {
        let e1 = UnitVector::basis(2, 0);
        let s = Sample::new(vec![pt(&[1.0, 0.0], Label::Positive), pt(&[-1.0, 0.0], Label::Positive)]).unwrap();
        assert_eq!(margin_loss_sample(&e1, &s, 0.0).unwrap(), 0.5);
        assert_eq!(margin_loss_sample(&e1, &s, 1.0).unwrap(), 1.0);
        let s1 = Sample::new(vec![pt(&[1.0, 0.0], Label::Positive)]).unwrap();
        assert_eq!(margin_loss_sample(&e1, &s1, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn margin_loss_dist_examples() {
        let e1 = UnitVector::basis(2, 0);
        let d = DiscreteDistribution::uniform(vec![
            pt(&[1.0, 0.0], Label::Positive),
            pt(&[-1.0, 0.0], Label::Positive),
        ])
        .unwrap();
        assert_eq!(margin_loss_dist(&e1, &d, 0.0).unwrap(), 0.5);
        assert_eq!(margin_loss_dist(&e1, &d, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn true_loss_counts_zero_margin_as_error() {
        let e1 = UnitVector::basis(2, 0);
        let on = DiscreteDistribution::uniform(vec![pt(&[1.0, 0.0], Label::Positive)]).unwrap();
        let off = DiscreteDistribution::uniform(vec![pt(&[0.0, 1.0], Label::Positive)]).unwrap();
        assert_eq!(true_loss(&e1, &on).unwrap(), 0.0);
        assert_eq!(true_loss(&e1, &off).unwrap(), 1.0);
        // margin loss at 0 also counts it
        assert_eq!(margin_loss_dist(&e1, &off, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift_point(&[0.0, 0.0], 0.5).unwrap(), vec![0.0, 0.0, 1.0]);
        let lifted = lift_point(&[1.0, 0.0], 0.5).unwrap();
        assert_abs_diff_eq!(lifted[2], 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert!(lift_point(&[1.1], 0.5).is_err());
        assert!(lift_point(&[0.1], 1.0).is_err());
        let w = lift_hypothesis(&UnitVector::basis(2, 0));
        assert_eq!(w.as_slice(), &[1.0, 0.0, 0.0]);
    }

    fn unit_vec(d: usize) -> impl Strategy<Value = UnitVector> {
        prop::collection::vec(-1.0f64..1.0, d)
            .prop_filter("nonzero", |v| norm(v) > 1e-3)
            .prop_map(|v| UnitVector::normalize(v).unwrap())
    }

    fn ball_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
        (prop::collection::vec(-1.0f64..1.0, d), 0.0f64..=1.0).prop_map(|(v, r)| {
            let n = norm(&v);
            if n == 0.0 {
                v
            } else {
                v.iter().map(|c| c * r / n).collect()
            }
        })
    }

    fn labeled(d: usize) -> impl Strategy<Value = LabeledPoint> {
        (ball_point(d), any::<bool>()).prop_map(|(x, pos)| {
            LabeledPoint::new(x, if pos { Label::Positive } else { Label::Negative }).unwrap()
        })
    }

    proptest! {
        #[test]
        fn lifting_scales_margins_and_preserves_sign(
            w in unit_vec(4),
            p in labeled(4),
            c in 0.05f64..0.95,
        ) {
            let wl = lift_hypothesis(&w);
            let pl = lift_labeled(&p, c).unwrap();
            prop_assert!((norm(wl.as_slice()) - 1.0).abs() < 1e-12);
            prop_assert!((norm(pl.x()) - 1.0).abs() < 1e-12);
            prop_assert!(norm(&pl.x()[..4]) <= c + 1e-12);
            let m = margin(&w, &p).unwrap();
            let ml = margin(&wl, &pl).unwrap();
            prop_assert!((ml - c * m).abs() < 1e-12);
            prop_assert_eq!(sign(dot(w.as_slice(), p.x())), sign(dot(wl.as_slice(), pl.x())));
        }

        #[test]
        fn loss_relations(
            w in unit_vec(3),
            pts in prop::collection::vec(labeled(3), 1..20),
            g1 in 0.0f64..1.0,
            g2 in 0.0f64..1.0,
        ) {
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let s = Sample::new(pts).unwrap();
            let d = s.to_uniform();
            let l_lo = margin_loss_sample(&w, &s, lo).unwrap();
            let l_hi = margin_loss_sample(&w, &s, hi).unwrap();
            prop_assert!(l_lo <= l_hi);
            let ld = margin_loss_dist(&w, &d, lo).unwrap();
            prop_assert!((ld - l_lo).abs() < 1e-12);
            let tl = true_loss(&w, &d).unwrap();
            prop_assert!(tl <= margin_loss_dist(&w, &d, 0.0).unwrap() + 1e-12);
            let lifted = lift_distribution(&d, DEFAULT_C_GAMMA).unwrap();
            let tll = true_loss(&lift_hypothesis(&w), &lifted).unwrap();
            prop_assert!((tl - tll).abs() < 1e-12);
        }
    }
}
