//! Small statistics toolkit: Monte Carlo estimates with standard errors,
//! the two-sample Kolmogorov-Smirnov test and empirical quantiles.

/// A Monte Carlo estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    /// Proportion `hits / trials` with the binomial standard error.
    pub fn proportion(hits: u64, trials: u64) -> Self {
        assert!(trials > 0, "proportion over zero trials");
        let n = trials as f64;
        let p = hits as f64 / n;
        Estimate {
            value: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
        }
    }

    /// Sample mean with standard error `s / sqrt(n)`, summed in slice order.
    pub fn mean(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "mean of empty slice");
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() == 1 {
            return Estimate::exact(mean);
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            value: mean,
            stderr: (var / n).sqrt(),
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        Estimate {
            value: self.value * factor,
            stderr: self.stderr * factor.abs(),
        }
    }
}

/// Standard error of a proportion at its worst case p = 1/2.
pub fn worst_case_stderr(trials: u64) -> f64 {
    0.5 / (trials as f64).sqrt()
}

/// Standard error of a difference of two independent estimates.
pub fn pooled(a: Estimate, b: Estimate) -> f64 {
    (a.stderr * a.stderr + b.stderr * b.stderr).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    /// sup |F1 - F2| over the pooled sample.
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
}

/// Exact two-sample KS statistic with the asymptotic p-value
/// `Q(D * sqrt(n m / (n + m)))`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsOutcome {
    assert!(!a.is_empty() && !b.is_empty(), "KS test needs non-empty samples");
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = if xs[i] <= ys[j] { xs[i] } else { ys[j] };
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(diff);
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    KsOutcome {
        statistic: d,
        p_value: kolmogorov_survival(en * d),
    }
}

/// `Pr[K > lambda]` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Small-lambda series converges faster: CDF = sqrt(2 pi)/lambda * sum exp(-(2j-1)^2 pi^2 / (8 lambda^2))
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for j in 1..=20 {
            let odd = (2 * j - 1) as f64;
            cdf += (c * odd * odd).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Linear-interpolation quantile (type 7) of an unsorted slice.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}
