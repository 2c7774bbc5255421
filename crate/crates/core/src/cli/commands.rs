//! Command implementations behind the CLI.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::str::FromStr;

use super::config::ExperimentConfig;
use super::output::{cell, CsvTable};
use super::CliError;
use crate::bounds::{self, BoundKind, BoundOptions, SoftVariant};
use crate::discretize;
use crate::learn::{self, LearnerConfig, QUANTILES};
use crate::lowerbound::{self, LowerBoundConfig, MarginConvention, WitnessSpec};
use crate::margins::{DiscreteDistribution, Label, LabeledPoint, UnitVector};
use crate::rng::{self, derive_seed};
use crate::verify::{self, CheckReport, CheckStatus};

/// Typed access to `[params]`, rejecting keys that no command reads.
struct Params<'a> {
    cfg: &'a ExperimentConfig,
    used: RefCell<BTreeSet<&'static str>>,
}

impl<'a> Params<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Params {
            cfg,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn raw(&self, key: &'static str) -> Option<&'a str> {
        self.used.borrow_mut().insert(key);
        self.cfg.param(key)
    }

    fn get<T: FromStr>(&self, key: &'static str, default: T) -> Result<T, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("parameter `{key}`: cannot parse `{v}`"))),
        }
    }

    fn list<T: FromStr + Clone>(&self, key: &'static str, default: &[T]) -> Result<Vec<T>, CliError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|_| CliError::Usage(format!("parameter `{key}`: cannot parse `{s}`")))
                })
                .collect(),
        }
    }

    fn text(&self, key: &'static str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        if let Some(k) = self.cfg.params.keys().find(|k| !used.contains(k.as_str())) {
            return Err(CliError::Usage(format!("unknown parameter `{k}`")));
        }
        Ok(())
    }

    fn seed(&self) -> u64 {
        self.cfg.seed.unwrap_or(0)
    }

    fn trials(&self, default: u64) -> u64 {
        self.cfg.trials.unwrap_or(default)
    }
}

pub type CommandResult = Result<(CsvTable, CheckStatus), CliError>;

/// Runs the command named in `cfg`.
pub fn dispatch(cfg: &ExperimentConfig) -> CommandResult {
    match cfg.command.as_deref() {
        Some("bounds-table") => bounds_table(cfg),
        Some("verify") => verify_cmd(cfg),
        Some("lowerbound") => lowerbound_cmd(cfg),
        Some("gap") => gap_cmd(cfg),
        Some(other) => Err(CliError::Usage(format!("unknown command `{other}`"))),
        None => Err(CliError::Usage("no command given".into())),
    }
}

fn bound_options(cfg: &ExperimentConfig, p: &Params) -> Result<BoundOptions, CliError> {
    let mut opts = BoundOptions::default();
    for (k, v) in &cfg.constants {
        let kind = BoundKind::from_name(k).ok_or_else(|| CliError::Usage(format!("unknown bound constant `{k}`")))?;
        let c: f64 = v
            .parse()
            .map_err(|_| CliError::Usage(format!("constant `{k}`: cannot parse `{v}`")))?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(CliError::Usage(format!("constant `{k}` must be positive")));
        }
        opts.set_c(kind, c);
    }
    opts.lower_range_c = p.get("lower_range_c", 1.0)?;
    opts.soft_variant = match p.text("soft_variant", "log-squared") {
        "log-squared" => SoftVariant::LogSquared,
        "rademacher" => SoftVariant::Rademacher,
        other => return Err(CliError::Usage(format!("unknown soft_variant `{other}`"))),
    };
    Ok(opts)
}

pub const BOUNDS_HEADER: &str = "gamma,n,delta,loss,bartlett_hard,bartlett_soft,mcallester,sota,tight,lower";

fn bounds_table(cfg: &ExperimentConfig) -> CommandResult {
    let p = Params::new(cfg);
    let gammas: Vec<f64> = p.list("gamma", &[0.1])?;
    let ns: Vec<f64> = p.list("n", &[100.0])?;
    let deltas: Vec<f64> = p.list("delta", &[1.0])?;
    let losses: Vec<f64> = p.list("loss", &[0.0])?;
    let opts = bound_options(cfg, &p)?;
    p.finish()?;
    let mut table = CsvTable::new(cfg, BOUNDS_HEADER);
    for &g in &gammas {
        for &n in &ns {
            for &d in &deltas {
                for &l in &losses {
                    let row = bounds::evaluate_all(g, n, d, l, &opts)?;
                    let vals: Vec<String> = row.values.iter().map(|v| cell(*v)).collect();
                    table.push(format!("{g},{n},{d},{l},{}", vals.join(",")));
                }
            }
        }
    }
    Ok((table, CheckStatus::Pass))
}

/// Names accepted by `verify`.
pub const CHECKS: [&str; 9] = [
    "p-in-unit",
    "unbiased-rounding",
    "preservation",
    "dist-determinism",
    "monotonicity",
    "lipschitz",
    "chi-square",
    "bernstein",
    "phirho-sandwich",
];

fn sandwich_points(margins: &[f64]) -> Result<Vec<LabeledPoint>, CliError> {
    margins
        .iter()
        .map(|&a| {
            let rest = (0.9 - a * a).max(0.0).sqrt();
            LabeledPoint::new(vec![a, rest], Label::Positive).map_err(CliError::from)
        })
        .collect()
}

/// Runs one named check from config parameters.
pub fn run_check(cfg: &ExperimentConfig) -> Result<CheckReport, CliError> {
    let p = Params::new(cfg);
    let seed = p.seed();
    let check = p.text("check", "p-in-unit");
    let rep = match check {
        "p-in-unit" => {
            p.finish()?;
            verify::check_p_in_unit(p.trials(1_000_000), seed)?
        }
        "unbiased-rounding" => {
            let k = p.get("k", 16)?;
            let d = p.get("d", 8)?;
            p.finish()?;
            verify::check_unbiased_rounding(k, d, p.trials(100_000), seed)?
        }
        "preservation" => {
            let alpha = p.get("alpha", 0.0)?;
            let gamma = p.get("gamma", 0.25)?;
            let ks: Vec<usize> = p.list("k", &[64, 128, 256, 512])?;
            p.finish()?;
            verify::check_preservation(alpha, gamma, &ks, p.trials(100_000), seed)?
        }
        "dist-determinism" => {
            let alpha = p.get("alpha", 0.0)?;
            let reference = p.get("reference_alpha", alpha)?;
            let k = p.get("k", 64)?;
            let pairs = p.get("pairs", 5)?;
            p.finish()?;
            verify::check_dist_determinism_against(alpha, reference, k, p.trials(100_000), pairs, seed)?
        }
        "monotonicity" => {
            let k = p.get("k", 512)?;
            let gamma_i = p.get("gamma_i", 0.1)?;
            let alphas: Vec<f64> = p.list("alphas", &[0.0, 0.025, 0.05, 0.075, 0.1])?;
            p.finish()?;
            verify::check_monotonicity(k, gamma_i, &alphas, p.trials(100_000), seed)?
        }
        "lipschitz" => {
            let gamma_i = p.get("gamma_i", 0.2)?;
            let k = p.get("k", 4096)?;
            let h = p.get("h", 0.01)?;
            p.finish()?;
            verify::check_lipschitz(gamma_i, k, h, p.trials(50_000), seed)?
        }
        "chi-square" => {
            let k = p.get("k", 100)?;
            let x = p.get("x", 0.5)?;
            let constant = p.get("constant", verify::C_CHI)?;
            p.finish()?;
            verify::check_chi_square_tail_with(k, x, p.trials(100_000), seed, constant)?
        }
        "bernstein" => {
            let d = p.get("d", 10)?;
            let support = p.get("support", 50)?;
            let noise = p.get("noise", 0.2)?;
            let k = p.get("k", 64)?;
            let gamma = p.get("gamma", 0.1)?;
            let n = p.get("n", 1000)?;
            let delta = p.get("delta", 0.1)?;
            let scale = p.get("scale", 1.0)?;
            p.finish()?;
            let (dist, w) = learn::planted_margin_distribution(d, support, 0.0, noise, derive_seed(seed, 1))?;
            let draw = discretize::sample_draw(k, d, derive_seed(seed, 2))?;
            verify::check_bernstein_margin_scaled(&dist, &w, gamma, &draw, n, delta, p.trials(10_000), seed, scale)?
        }
        "phirho-sandwich" => {
            let margins: Vec<f64> = p.list("margins", &[0.6, 0.05, -0.3, 0.12])?;
            let n = p.get("n", 12)?;
            let k = p.get("k", 256)?;
            let gamma_i = p.get("gamma_i", 0.1)?;
            let gamma = p.get("gamma", 0.15)?;
            let reversed = p.get("reversed", false)?;
            p.finish()?;
            let dist = DiscreteDistribution::uniform(sandwich_points(&margins)?)?;
            let s = dist.draw_sample(n, &mut rng::stream_rng(derive_seed(seed, 1), 0))?;
            let w = UnitVector::basis(2, 0);
            let samples = p.trials(10_000);
            if reversed {
                verify::check_phirho_sandwich_reversed(&dist, &s, &w, gamma_i, gamma, k, samples, seed)?
            } else {
                verify::check_phirho_sandwich(&dist, &s, &w, gamma_i, gamma, k, samples, seed)?
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown check `{other}`; expected one of {}",
                CHECKS.join(", ")
            )))
        }
    };
    Ok(rep)
}

fn verify_cmd(cfg: &ExperimentConfig) -> CommandResult {
    let rep = run_check(cfg)?;
    let mut table = CsvTable::new(cfg, CheckReport::CSV_HEADER);
    for row in rep.csv_rows() {
        table.push(row);
    }
    Ok((table, rep.status()))
}

pub const LOWERBOUND_HEADER: &str = "trial,sample_loss,true_loss,level_loss,gap,disjoint,convention";

fn lowerbound_cmd(cfg: &ExperimentConfig) -> CommandResult {
    let p = Params::new(cfg);
    let taus: Vec<f64> = p.list("tau", &[0.5])?;
    let level = p.get("level", 1usize)?;
    let n = p.get("n", 2usize)?;
    let name = p.text("convention", "shrunk");
    let convention =
        MarginConvention::from_name(name).ok_or_else(|| CliError::Usage(format!("unknown convention `{name}`")))?;
    p.finish()?;
    let lb = LowerBoundConfig::new(taus)?;
    let geometry = lowerbound::check_geometry(&lb, &WitnessSpec::first(&lb, level)?)?;
    let ok = geometry.holds(1e-12);
    eprintln!(
        "preflight: max |<w,x> - gamma_i| outside T = {:e}, max <w,x> on T = {}",
        geometry.outside_error, geometry.inside_max
    );
    let trials = lowerbound::gap_experiment(&lb, level, n, p.trials(100), p.seed(), convention)?;
    let mut table = CsvTable::new(cfg, LOWERBOUND_HEADER);
    table.comment(format!(
        "preflight: level={level} gamma_i={} max_outside_error={:e} max_inside={} norm_error={:e}",
        lowerbound::gamma_level(level)?,
        geometry.outside_error,
        geometry.inside_max,
        geometry.norm_error
    ));
    for (i, t) in trials.iter().enumerate() {
        table.push(format!(
            "{i},{},{},{},{},{},{}",
            t.sample_loss,
            t.true_loss,
            t.level_loss,
            t.gap,
            t.disjoint,
            convention.name()
        ));
    }
    Ok((table, if ok { CheckStatus::Pass } else { CheckStatus::Fail }))
}

pub const GAP_HEADER: &str =
    "row,trial,quantile,sample_loss,true_loss,gap,bartlett_hard,bartlett_soft,mcallester,sota,tight,lower";

fn gap_cmd(cfg: &ExperimentConfig) -> CommandResult {
    let p = Params::new(cfg);
    let distribution = p.text("distribution", "planted");
    if distribution != "planted" {
        return Err(CliError::Usage(format!("unknown distribution `{distribution}`")));
    }
    let d = p.get("d", 10usize)?;
    let support = p.get("support", 200usize)?;
    let margin = p.get("margin", 0.3)?;
    let noise = p.get("noise", 0.05)?;
    let dist_seed = p.get("dist_seed", 0u64)?;
    let n = p.get("n", 500usize)?;
    let gamma = p.get("gamma", 0.2)?;
    let delta = p.get("delta", 0.1)?;
    let target = p.get("target_margin", gamma)?;
    let epochs = p.get("max_epochs", 50usize)?;
    let opts = bound_options(cfg, &p)?;
    p.finish()?;
    let (dist, _) = learn::planted_margin_distribution(d, support, margin, noise, dist_seed)?;
    let seed = p.seed();
    let learner = LearnerConfig::new(target, epochs, derive_seed(seed, 1))?;
    let report = learn::gap_vs_bounds(&dist, n, gamma, delta, p.trials(100), seed, &learner, &opts)?;
    let mut table = CsvTable::new(cfg, GAP_HEADER);
    for r in &report.rows {
        let vals: Vec<String> = r.bounds.values.iter().map(|v| cell(*v)).collect();
        table.push(format!(
            "trial,{},,{},{},{},{}",
            r.trial,
            r.sample_loss,
            r.true_loss,
            r.gap,
            vals.join(",")
        ));
    }
    if !report.rows.is_empty() {
        let cols = ["sample_loss", "true_loss", "gap"]
            .into_iter()
            .chain(BoundKind::ALL.iter().map(|k| k.name()));
        let cols: Vec<&str> = cols.collect();
        for (qi, q) in QUANTILES.iter().enumerate() {
            let vals: Vec<String> = cols
                .iter()
                .map(|c| {
                    cell(
                        report
                            .quantiles
                            .iter()
                            .find(|cq| cq.column == *c)
                            .map(|cq| cq.values[qi].1),
                    )
                })
                .collect();
            table.push(format!("quantile,,{q},{}", vals.join(",")));
        }
        table.comment(format!("tight_coverage: {}", report.coverage(BoundKind::Tight)));
    }
    Ok((table, CheckStatus::Pass))
}
