//! Safety metrics for learned priors and verification of the closed-form
//! reduction in unsafe exploratory actions.
//!
//! A prior table declares an action unsafe when its value falls below the
//! state's row mean. Comparing those sets against the map's ground-truth
//! collision actions yields a confusion count and a correctness score; the
//! closed-form ratio predicts how much a bias of strength `rho` built on a
//! prior of that correctness reduces the probability of drawing an unsafe
//! exploratory action, and a Monte-Carlo simulation of the same draw
//! process checks the formula point by point.

use crate::error::{Error, Result};
use crate::grid::MapSpec;
use crate::learner::MetricsLog;
use crate::mdp::{ActionId, QTable, StateId};
use crate::prior::PriorModel;
use crate::rng::RngStream;

/// Actions the prior rates strictly below the state's row mean.
pub fn prior_unsafe_set(q_p: &QTable, s: StateId) -> Vec<ActionId> {
    let mean = q_p.mean_q(s);
    (0..q_p.action_count())
        .map(ActionId)
        .filter(|&a| q_p.get(s, a) < mean)
        .collect()
}

/// Tally of a prior's unsafe declarations against ground truth.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    /// State-action pairs the prior declares unsafe.
    pub identified: u64,
    /// Declared unsafe but actually safe.
    pub false_positives: u64,
    /// Declared safe but actually unsafe.
    pub false_negatives: u64,
}

impl ConfusionCounts {
    /// Declared unsafe and actually unsafe.
    pub fn true_positives(&self) -> u64 {
        self.identified - self.false_positives
    }
}

/// `1 - n_FN / (n_I - n_FP + n_FN)`: the probability that the prior does
/// not call a truly unsafe action safe. Undefined when no truly unsafe
/// pairs exist, which is reported as an error rather than defaulted.
pub fn correctness(counts: &ConfusionCounts) -> Result<f64> {
    if counts.false_positives > counts.identified {
        return Err(Error::config(format!(
            "false positives ({}) exceed identified pairs ({})",
            counts.false_positives, counts.identified
        )));
    }
    let denominator = counts.true_positives() + counts.false_negatives;
    if denominator == 0 {
        return Err(Error::UndefinedCorrectness);
    }
    Ok(1.0 - counts.false_negatives as f64 / denominator as f64)
}

/// One state's declared-unsafe actions next to the ground truth.
#[derive(Clone, Debug)]
pub struct StateDetail {
    pub state: StateId,
    pub declared: Vec<ActionId>,
    pub actual: Vec<ActionId>,
}

/// A prior's confusion counts over a map, with per-state detail.
#[derive(Clone, Debug)]
pub struct PriorEvaluation {
    pub counts: ConfusionCounts,
    pub states: Vec<StateDetail>,
}

/// Compares the prior's unsafe sets against the map's collision actions
/// over every cell the agent can act from.
pub fn evaluate_prior(q_p: &QTable, env: &MapSpec) -> Result<PriorEvaluation> {
    if q_p.state_count() != env.state_count() {
        return Err(Error::dimension(format!(
            "prior table has {} states, map has {}",
            q_p.state_count(),
            env.state_count()
        )));
    }
    let mut counts = ConfusionCounts::default();
    let mut states = Vec::new();
    for s in env.acting_states() {
        let declared = prior_unsafe_set(q_p, s);
        let actual = env.collision_actions(s);
        counts.identified += declared.len() as u64;
        counts.false_positives += declared.iter().filter(|a| !actual.contains(a)).count() as u64;
        counts.false_negatives += actual.iter().filter(|a| !declared.contains(a)).count() as u64;
        states.push(StateDetail {
            state: s,
            declared,
            actual,
        });
    }
    Ok(PriorEvaluation { counts, states })
}

/// How many consensus-selected pairs point at real collision actions.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SelectionQuality {
    pub selected: usize,
    pub collision_hits: usize,
}

impl SelectionQuality {
    /// Fraction of selected pairs that are true collision actions; `None`
    /// when nothing was selected.
    pub fn precision(&self) -> Option<f64> {
        (self.selected > 0).then(|| self.collision_hits as f64 / self.selected as f64)
    }
}

/// Scores the prior's consensus-selected pairs against the map's collision
/// actions over every cell the agent can act from.
pub fn selection_quality(model: &PriorModel, env: &MapSpec) -> SelectionQuality {
    let mut quality = SelectionQuality {
        selected: 0,
        collision_hits: 0,
    };
    for (s, a) in model.selected_pairs(env.acting_states()) {
        quality.selected += 1;
        quality.collision_hits += usize::from(env.collision_actions(s).contains(&a));
    }
    quality
}

/// Fraction of consensus-selected pairs whose noise-free move strictly
/// reduces Manhattan distance to the common-reward cell. Blocked moves
/// leave the agent in place and count as non-reducing.
pub fn distance_reducing_fraction(model: &PriorModel, env: &MapSpec) -> Result<f64> {
    let common = env
        .common_state()
        .ok_or_else(|| Error::config("map has no common-reward cell"))?;
    let pairs = model.selected_pairs(env.acting_states());
    if pairs.is_empty() {
        return Err(Error::config(
            "no pairs selected; distance-reducing fraction is undefined",
        ));
    }
    let reducing = pairs
        .iter()
        .filter(|&&(s, a)| {
            if env.collision_actions(s).contains(&a) {
                return false;
            }
            let (x, y) = env.coords(s);
            let (dx, dy) = crate::grid::action_delta(a);
            let next = env.state_at((x as i64 + dx) as usize, (y as i64 + dy) as usize);
            env.manhattan(next, common) < env.manhattan(s, common)
        })
        .count();
    Ok(reducing as f64 / pairs.len() as f64)
}

/// Parameters of the unsafe-exploration reduction bound: action-set size,
/// number of truly unsafe actions, prior correctness, and bias strength.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RatioParams {
    pub action_count: u32,
    pub unsafe_count: u32,
    pub correctness: f64,
    pub rho: f64,
}

impl RatioParams {
    pub fn new(action_count: u32, unsafe_count: u32, correctness: f64, rho: f64) -> Result<Self> {
        if action_count < 2 {
            return Err(Error::config(format!(
                "action count must be at least 2, got {action_count}"
            )));
        }
        if unsafe_count == 0 || unsafe_count >= action_count {
            return Err(Error::config(format!(
                "unsafe count must be in [1, {}], got {unsafe_count}",
                action_count - 1
            )));
        }
        if !(0.0..=1.0).contains(&correctness) {
            return Err(Error::config(format!(
                "correctness must be in [0, 1], got {correctness}"
            )));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::config(format!("rho must be in [0, 1], got {rho}")));
        }
        Ok(RatioParams {
            action_count,
            unsafe_count,
            correctness,
            rho,
        })
    }

    /// Probability that a uniform draw over the full action set is unsafe.
    pub fn uniform_unsafe_prob(&self) -> f64 {
        f64::from(self.unsafe_count) / f64::from(self.action_count)
    }

    /// Probability that a uniform draw over the prior-safe actions is
    /// unsafe, given a prior that flags exactly `unsafe_count` actions and
    /// misses truly unsafe ones at rate `1 - correctness`. Exceeds 1 when
    /// the missed mass outnumbers the prior-safe slots; no concrete action
    /// set realizes that regime, but the closed form still extends to it.
    pub fn biased_unsafe_mass(&self) -> f64 {
        let safe_slots = f64::from(self.action_count - self.unsafe_count);
        f64::from(self.unsafe_count) * (1.0 - self.correctness) / safe_slots
    }
}

/// The closed-form ratio of unsafe-exploratory-action probabilities,
/// biased over uniform: `1 - rho * (|A| * C - U) / (|A| - U)`.
pub fn closed_form_unsafe_ratio(p: &RatioParams) -> f64 {
    let a = f64::from(p.action_count);
    let u = f64::from(p.unsafe_count);
    1.0 - p.rho * (a * p.correctness - u) / (a - u)
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Copy, Clone, Debug)]
pub struct RatioEstimate {
    pub estimate: f64,
    pub std_err: f64,
}

/// Simulates the draw process behind [`closed_form_unsafe_ratio`] and
/// estimates the same ratio.
///
/// Each sample takes the biased branch with probability `rho` — a uniform
/// draw over the prior-safe actions, unsafe with the planted false-negative
/// probability — and otherwise a uniform draw over all actions. The mean
/// unsafe mass divided by the uniform baseline estimates the ratio. When
/// the planted mass exceeds 1 (see [`RatioParams::biased_unsafe_mass`]) the
/// biased branch contributes that mass directly instead of an indicator
/// draw, keeping the estimator consistent everywhere the closed form is
/// defined.
pub fn monte_carlo_unsafe_ratio(
    p: &RatioParams,
    samples: u64,
    rng: &mut RngStream,
) -> Result<RatioEstimate> {
    if samples < 10_000 {
        return Err(Error::config(format!(
            "at least 10000 samples required, got {samples}"
        )));
    }
    let uniform_p = p.uniform_unsafe_prob();
    let biased_mass = p.biased_unsafe_mass();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let x = if rng.coin(p.rho) {
            if biased_mass > 1.0 {
                biased_mass
            } else {
                f64::from(rng.coin(biased_mass))
            }
        } else {
            f64::from(rng.coin(uniform_p))
        };
        sum += x;
        sum_sq += x * x;
    }
    let n = samples as f64;
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    Ok(RatioEstimate {
        estimate: mean / uniform_p,
        std_err: (variance / n).sqrt() / uniform_p,
    })
}

/// Mean of a non-empty sample.
pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of an empty sample");
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean; zero for a single observation.
pub fn std_err(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// One episode's across-seed aggregate.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AggregatePoint {
    pub episode: usize,
    pub mean: f64,
    pub std_err: f64,
}

fn aggregate_by(
    runs: &[MetricsLog],
    value: impl Fn(&MetricsLog, usize) -> f64,
) -> Result<Vec<AggregatePoint>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::config("no runs to aggregate"))?;
    let episodes = first.rows.len();
    for run in runs {
        if run.rows.len() != episodes {
            return Err(Error::dimension(format!(
                "runs disagree on episode count: {} vs {episodes}",
                run.rows.len()
            )));
        }
    }
    Ok((0..episodes)
        .map(|e| {
            let xs: Vec<f64> = runs.iter().map(|run| value(run, e)).collect();
            AggregatePoint {
                episode: first.rows[e].episode,
                mean: mean(&xs),
                std_err: std_err(&xs),
            }
        })
        .collect())
}

/// Per-episode mean and standard error of returns across runs.
pub fn aggregate_returns(runs: &[MetricsLog]) -> Result<Vec<AggregatePoint>> {
    aggregate_by(runs, |run, e| run.rows[e].ret)
}

/// Per-episode mean and standard error of collision counts across runs.
pub fn aggregate_collisions(runs: &[MetricsLog]) -> Result<Vec<AggregatePoint>> {
    aggregate_by(runs, |run, e| f64::from(run.rows[e].collisions))
}

/// Per-episode mean and standard error of *cumulative* collisions.
pub fn aggregate_cumulative_collisions(runs: &[MetricsLog]) -> Result<Vec<AggregatePoint>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::config("no runs to aggregate"))?;
    let episodes = first.rows.len();
    for run in runs {
        if run.rows.len() != episodes {
            return Err(Error::dimension(format!(
                "runs disagree on episode count: {} vs {episodes}",
                run.rows.len()
            )));
        }
    }
    let mut totals = vec![0.0; runs.len()];
    Ok((0..episodes)
        .map(|e| {
            for (total, run) in totals.iter_mut().zip(runs) {
                *total += f64::from(run.rows[e].collisions);
            }
            AggregatePoint {
                episode: first.rows[e].episode,
                mean: mean(&totals),
                std_err: std_err(&totals),
            }
        })
        .collect())
}

/// Per-episode mean and standard error of the absolute prior TD error.
/// Every run must carry a TD column of the same length.
pub fn td_error_trace(runs: &[MetricsLog]) -> Result<Vec<AggregatePoint>> {
    for run in runs {
        if run.rows.iter().any(|r| r.prior_td.is_none()) {
            return Err(Error::config(
                "a run lacks prior TD errors; the trace needs prior-learning logs",
            ));
        }
    }
    aggregate_by(runs, |run, e| run.rows[e].prior_td.unwrap())
}

/// Renders aggregate points as CSV with an `episode,mean,std_err` header.
pub fn aggregate_to_csv(points: &[AggregatePoint]) -> String {
    let mut out = String::from("episode,mean,std_err\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.episode, p.mean, p.std_err));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::EpisodeRecord;

    fn row_table(row: &[f64]) -> QTable {
        let mut q = QTable::zeros(1, row.len());
        for (a, &v) in row.iter().enumerate() {
            q.set(StateId(0), ActionId(a), v);
        }
        q
    }

    #[test]
    fn unsafe_set_is_strictly_below_mean() {
        assert!(prior_unsafe_set(&row_table(&[0.3, 0.3, 0.3, 0.3]), StateId(0)).is_empty());
        assert_eq!(
            prior_unsafe_set(&row_table(&[-1.0, 0.0, 0.0, 0.0]), StateId(0)),
            vec![ActionId(0)]
        );
        assert_eq!(
            prior_unsafe_set(&row_table(&[-2.0, -1.0, 1.0, 2.0]), StateId(0)),
            vec![ActionId(0), ActionId(1)]
        );
    }

    #[test]
    fn correctness_examples() {
        let c = correctness(&ConfusionCounts {
            identified: 7,
            false_positives: 3,
            false_negatives: 0,
        })
        .unwrap();
        assert_eq!(c, 1.0);
        let c = correctness(&ConfusionCounts {
            identified: 10,
            false_positives: 2,
            false_negatives: 2,
        })
        .unwrap();
        assert!((c - 0.8).abs() < 1e-15);
        let c = correctness(&ConfusionCounts {
            identified: 0,
            false_positives: 0,
            false_negatives: 5,
        })
        .unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn correctness_zero_denominator_is_an_error() {
        let err = correctness(&ConfusionCounts::default()).unwrap_err();
        assert!(matches!(err, Error::UndefinedCorrectness));
        let err = correctness(&ConfusionCounts {
            identified: 2,
            false_positives: 2,
            false_negatives: 0,
        })
        .unwrap_err();
        assert!(matches!(err, Error::UndefinedCorrectness));
        assert!(correctness(&ConfusionCounts {
            identified: 1,
            false_positives: 2,
            false_negatives: 0,
        })
        .is_err());
    }

    fn cross_map() -> MapSpec {
        crate::grid::parse_map(".#.\n...\nG#.\n").unwrap()
    }

    #[test]
    fn zero_prior_misses_every_collision() {
        let env = cross_map();
        let q = QTable::zeros(env.state_count(), 4);
        let eval = evaluate_prior(&q, &env).unwrap();
        let total_true: u64 = env
            .acting_states()
            .iter()
            .map(|&s| env.collision_actions(s).len() as u64)
            .sum();
        assert_eq!(eval.counts.identified, 0);
        assert_eq!(eval.counts.false_positives, 0);
        assert_eq!(eval.counts.false_negatives, total_true);
        assert_eq!(correctness(&eval.counts).unwrap(), 0.0);
    }

    #[test]
    fn oracle_built_prior_is_fully_correct() {
        let env = cross_map();
        let mut q = QTable::zeros(env.state_count(), 4);
        for s in env.acting_states() {
            for a in env.collision_actions(s) {
                q.set(s, a, -1.0);
            }
        }
        // No acting cell on this map is blocked on all four sides, so each
        // row keeps at least one zero and the mean separates the classes.
        let eval = evaluate_prior(&q, &env).unwrap();
        assert_eq!(eval.counts.false_positives, 0);
        assert_eq!(eval.counts.false_negatives, 0);
        assert_eq!(correctness(&eval.counts).unwrap(), 1.0);
    }

    #[test]
    fn evaluation_rejects_mismatched_tables() {
        let env = cross_map();
        assert!(evaluate_prior(&QTable::zeros(2, 4), &env).is_err());
    }

    #[test]
    fn ratio_params_are_validated() {
        assert!(RatioParams::new(4, 1, 0.9, 0.95).is_ok());
        assert!(RatioParams::new(1, 1, 0.9, 0.95).is_err());
        assert!(RatioParams::new(4, 0, 0.9, 0.95).is_err());
        assert!(RatioParams::new(4, 4, 0.9, 0.95).is_err());
        assert!(RatioParams::new(4, 1, 1.1, 0.95).is_err());
        assert!(RatioParams::new(4, 1, 0.9, -0.5).is_err());
    }

    #[test]
    fn closed_form_frozen_values() {
        let p = RatioParams::new(4, 1, 0.9, 0.0).unwrap();
        assert_eq!(closed_form_unsafe_ratio(&p), 1.0);
        let p = RatioParams::new(4, 1, 1.0, 1.0).unwrap();
        assert_eq!(closed_form_unsafe_ratio(&p), 0.0);
        let p = RatioParams::new(4, 1, 0.9, 0.95).unwrap();
        let r = closed_form_unsafe_ratio(&p);
        assert!((r - 0.17666666666666675).abs() < 1e-15);
        assert!((r - 0.17667).abs() < 1e-5);
    }

    #[test]
    fn closed_form_is_monotone_in_correctness_and_rho() {
        for u in 1..4u32 {
            let mut last = f64::INFINITY;
            for c in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let p = RatioParams::new(4, u, c, 0.9).unwrap();
                let r = closed_form_unsafe_ratio(&p);
                assert!(r < last);
                last = r;
            }
        }
        let mut last = f64::INFINITY;
        for rho in [0.0, 0.3, 0.6, 1.0] {
            let p = RatioParams::new(4, 1, 0.9, rho).unwrap();
            let r = closed_form_unsafe_ratio(&p);
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn monte_carlo_matches_closed_form_at_reference_point() {
        let p = RatioParams::new(4, 1, 0.9, 0.95).unwrap();
        let mut rng = RngStream::new(2024);
        let est = monte_carlo_unsafe_ratio(&p, 1_000_000, &mut rng).unwrap();
        let closed = closed_form_unsafe_ratio(&p);
        assert!(
            (est.estimate - closed).abs() < 3.0 * est.std_err + 1e-9,
            "estimate {} vs closed {closed} (3se {})",
            est.estimate,
            3.0 * est.std_err
        );
        assert!((est.estimate - 0.17667).abs() < 0.005);
        assert!(est.std_err > 0.0);
    }

    #[test]
    fn monte_carlo_degenerate_branches() {
        let mut rng = RngStream::new(3);
        let p = RatioParams::new(4, 2, 0.5, 0.0).unwrap();
        let est = monte_carlo_unsafe_ratio(&p, 200_000, &mut rng).unwrap();
        assert!((est.estimate - 1.0).abs() < 3.0 * est.std_err + 1e-9);

        let p = RatioParams::new(4, 1, 1.0, 1.0).unwrap();
        let est = monte_carlo_unsafe_ratio(&p, 10_000, &mut rng).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn monte_carlo_handles_unrealizable_planting() {
        // With 3 of 4 actions unsafe and correctness 0.5 the planted
        // false-negative mass is 1.5 over a single prior-safe slot, so the
        // closed form exceeds 1 and the biased branch is deterministic.
        let p = RatioParams::new(4, 3, 0.5, 1.0).unwrap();
        assert!(p.biased_unsafe_mass() > 1.0);
        let closed = closed_form_unsafe_ratio(&p);
        assert!((closed - 2.0).abs() < 1e-15);
        let mut rng = RngStream::new(5);
        let est = monte_carlo_unsafe_ratio(&p, 100_000, &mut rng).unwrap();
        assert!((est.estimate - closed).abs() < 3.0 * est.std_err + 1e-9);
    }

    #[test]
    fn monte_carlo_rejects_small_samples() {
        let p = RatioParams::new(4, 1, 0.9, 0.95).unwrap();
        let mut rng = RngStream::new(1);
        assert!(monte_carlo_unsafe_ratio(&p, 9_999, &mut rng).is_err());
    }

    fn log_with_tds(seed: u64, tds: &[f64]) -> MetricsLog {
        let mut log = MetricsLog::new(seed);
        for (i, &td) in tds.iter().enumerate() {
            log.rows.push(EpisodeRecord {
                episode: i,
                ret: -0.5,
                collisions: 1,
                steps: 10,
                epsilon: 1.0,
                prior_td: Some(td),
            });
        }
        log
    }

    #[test]
    fn td_trace_of_a_single_run_is_the_run_itself() {
        let trace = td_error_trace(&[log_with_tds(0, &[0.5, 0.25])]).unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace[0].mean, 0.5);
        assert_eq!(trace[0].std_err, 0.0);
        assert_eq!(trace[1].mean, 0.25);
    }

    #[test]
    fn td_trace_of_identical_runs_has_zero_spread() {
        let runs = [log_with_tds(0, &[0.5, 0.25]), log_with_tds(1, &[0.5, 0.25])];
        let trace = td_error_trace(&runs).unwrap();
        assert!(trace.iter().all(|p| p.std_err == 0.0));
        let runs = [log_with_tds(0, &[0.4, 0.2]), log_with_tds(1, &[0.6, 0.4])];
        let trace = td_error_trace(&runs).unwrap();
        assert!((trace[0].mean - 0.5).abs() < 1e-15);
        assert!(trace[0].std_err > 0.0);
    }

    #[test]
    fn td_trace_input_validation() {
        assert!(td_error_trace(&[]).is_err());
        let mut no_td = log_with_tds(0, &[0.5]);
        no_td.rows[0].prior_td = None;
        assert!(td_error_trace(&[no_td]).is_err());
        let runs = [log_with_tds(0, &[0.5]), log_with_tds(1, &[0.5, 0.25])];
        assert!(td_error_trace(&runs).is_err());
    }

    #[test]
    fn cumulative_collision_aggregation() {
        let mut a = log_with_tds(0, &[0.1, 0.1, 0.1]);
        let mut b = log_with_tds(1, &[0.1, 0.1, 0.1]);
        for (log, cols) in [(&mut a, [2u32, 0, 1]), (&mut b, [4u32, 2, 3])] {
            for (row, c) in log.rows.iter_mut().zip(cols) {
                row.collisions = c;
            }
        }
        let agg = aggregate_cumulative_collisions(&[a, b]).unwrap();
        assert_eq!(agg[0].mean, 3.0);
        assert_eq!(agg[1].mean, 4.0);
        assert_eq!(agg[2].mean, 6.0);
    }

    #[test]
    fn aggregate_csv_layout() {
        let csv = aggregate_to_csv(&[AggregatePoint {
            episode: 0,
            mean: 1.5,
            std_err: 0.25,
        }]);
        assert_eq!(csv, "episode,mean,std_err\n0,1.5,0.25\n");
    }

    #[test]
    fn stats_helpers() {
        assert_eq!(mean(&[1.0, 3.0]), 2.0);
        assert_eq!(std_err(&[2.0]), 0.0);
        let se = std_err(&[1.0, 3.0]);
        assert!((se - 1.0).abs() < 1e-12);
    }
}
