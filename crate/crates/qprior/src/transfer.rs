//! Reusing a learned prior as the starting point for prior learning on a
//! modified map.
//!
//! A prior distilled on one layout can seed the prior table when the same
//! distillation is run on a variant of that layout: walls shared between
//! the two maps are already marked, so early temporal-difference errors
//! shrink. The experiment learns the prior per seed on the variant map —
//! from freshly trained source tasks for that map — once starting from the
//! stored table and once from zeros, and compares the absolute TD traces.

use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::MapSpec;
use crate::learner::{learn_prior_offpolicy, Behavior, MetricsLog};
use crate::mdp::{DiscountedParams, QTable};
use crate::prior::{PriorMode, PriorModel, SourceTable};
use crate::rng::RngStream;

/// How the prior table starts before learning on the new map.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum InitMode {
    /// Start from a prior learned elsewhere.
    FromSource,
    /// Start from zeros.
    Scratch,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InitMode::FromSource => "from_source",
            InitMode::Scratch => "scratch",
        }
    }
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "from_source" => Ok(InitMode::FromSource),
            "scratch" => Ok(InitMode::Scratch),
            other => Err(Error::config(format!(
                "unknown init mode {other:?}; expected \"from_source\" or \"scratch\""
            ))),
        }
    }
}

/// Parameters of one transfer arm.
#[derive(Copy, Clone, Debug)]
pub struct TransferConfig {
    pub init: InitMode,
    pub episodes: usize,
    pub horizon: usize,
    pub threshold: f64,
    pub params: DiscountedParams,
    pub mode: PriorMode,
}

/// Learns a prior on `env` once per seed, starting from `init_table` or
/// from zeros per `cfg.init`, and returns the per-seed logs whose
/// `prior_td` column traces adaptation.
///
/// `sources` must be value tables for `env`'s own goal set — transfer
/// reuses only the prior table, never the source policies.
pub fn run_transfer(
    env: &MapSpec,
    sources: &[SourceTable],
    init_table: Option<&QTable>,
    cfg: &TransferConfig,
    seeds: &[u64],
) -> Result<Vec<MetricsLog>> {
    if seeds.is_empty() {
        return Err(Error::config("at least one seed is required"));
    }
    let init = match (cfg.init, init_table) {
        (InitMode::FromSource, Some(q)) => Some(q),
        (InitMode::FromSource, None) => {
            return Err(Error::config(
                "from_source initialization needs a stored prior table",
            ))
        }
        (InitMode::Scratch, _) => None,
    };
    seeds
        .par_iter()
        .map(|&seed| {
            let mut model = PriorModel::new(sources.to_vec(), cfg.threshold, cfg.params, cfg.mode)?;
            if let Some(q) = init {
                model.set_q(q.clone())?;
            }
            let mut rng = RngStream::new(seed);
            learn_prior_offpolicy(
                env,
                &mut model,
                &Behavior::UniformRandom,
                cfg.episodes,
                cfg.horizon,
                &mut rng,
            )
        })
        .collect()
}

/// Mean absolute prior TD error over episodes `[start, start + window)` of
/// one log.
pub fn windowed_mean_td(log: &MetricsLog, start: usize, window: usize) -> Result<f64> {
    if window == 0 || start + window > log.rows.len() {
        return Err(Error::config(format!(
            "window {start}..{} exceeds the {}-episode log",
            start + window,
            log.rows.len()
        )));
    }
    let slice = &log.rows[start..start + window];
    let mut sum = 0.0;
    for row in slice {
        sum += row
            .prior_td
            .ok_or_else(|| Error::config("log lacks prior TD errors; not a prior-learning run"))?;
    }
    Ok(sum / window as f64)
}

/// Mean of [`windowed_mean_td`] over the first `window` episodes across
/// seeds.
pub fn first_window_mean(runs: &[MetricsLog], window: usize) -> Result<f64> {
    window_mean_at(runs, 0, window)
}

/// Mean of [`windowed_mean_td`] over the last `window` episodes across
/// seeds.
pub fn last_window_mean(runs: &[MetricsLog], window: usize) -> Result<f64> {
    let len = runs
        .first()
        .ok_or_else(|| Error::config("no runs given"))?
        .rows
        .len();
    if window > len {
        return Err(Error::config(format!(
            "window {window} exceeds the {len}-episode logs"
        )));
    }
    window_mean_at(runs, len - window, window)
}

fn window_mean_at(runs: &[MetricsLog], start: usize, window: usize) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::config("no runs given"));
    }
    let mut sum = 0.0;
    for run in runs {
        sum += windowed_mean_td(run, start, window)?;
    }
    Ok(sum / runs.len() as f64)
}
