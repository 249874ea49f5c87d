//! The experiments. Each returns its records together with the acceptance
//! checks evaluated on them.

mod chain;
mod toric;

pub use chain::{run_additivity, run_density, run_epsilon_limit, run_ghz_gap};
pub use toric::{run_phi_sweeps, run_prop1, run_toric_ground};

use uncle_forge_core::CoreError;

use crate::config::{Experiment, ExperimentConfig, VERSION};
use crate::error::{CliError, Result};
use crate::record::{Check, RecordBuilder, ResultRecord, RunDocument};
use crate::store::Store;

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub records: Vec<ResultRecord>,
    pub checks: Vec<Check>,
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    match config.experiment {
        Experiment::GhzGap => run_ghz_gap(config),
        Experiment::Density => run_density(config),
        Experiment::EpsilonLimit => run_epsilon_limit(config),
        Experiment::ToricGround => run_toric_ground(config),
        Experiment::PhiSweep => run_phi_sweeps(config),
        Experiment::Prop1 => run_prop1(config),
        Experiment::Additivity => run_additivity(config),
    }
}

pub fn document(config: &ExperimentConfig, outcome: Outcome) -> RunDocument {
    RunDocument {
        experiment: config.experiment.name().to_string(),
        config: config.clone(),
        records: outcome.records,
        checks: outcome.checks,
        version: VERSION.to_string(),
    }
}

/// Cached document unless `force`; fresh results are persisted.
pub fn run_cached(config: &ExperimentConfig, store: &Store, force: bool) -> Result<(RunDocument, bool)> {
    if !force {
        if let Some(doc) = store.load(config)? {
            return Ok((doc, true));
        }
    }
    let doc = document(config, run(config)?);
    store.save(&doc)?;
    Ok((doc, false))
}

/// Budget overruns become skip markers; anything else is an error.
fn or_skip(config: &ExperimentConfig, kind: &str, r: Result<ResultRecord>, tag: impl FnOnce(RecordBuilder) -> RecordBuilder) -> Result<ResultRecord> {
    match r {
        Err(CliError::Core(e @ CoreError::BudgetExceeded { .. })) => {
            Ok(tag(RecordBuilder::new(config, kind)).skipped(e.to_string()).finish())
        }
        other => other,
    }
}

/// Least-squares slope and intercept of `ln y` against `ln x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        let (s, c) = loglog_fit(&xs, &ys).unwrap();
        assert!((s + 1.5).abs() < 1e-12 && (c.exp() - 3.0).abs() < 1e-12);
        assert!(loglog_fit(&[1.0], &[1.0]).is_none());
        assert!(loglog_fit(&[1.0, 2.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn decreasing() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
    }
}
