//! Epsilon-greedy action selection and prior-guided exploration.
//!
//! The prior table reshapes only the *exploratory* draws of an
//! epsilon-greedy learner: with probability `rho` an exploratory action that
//! the prior rates below its state's row mean is redrawn until a safe one
//! comes up. Greedy exploitation of the task's own Q-table is untouched, so
//! the bias can only change which untried actions get sampled, never what
//! the learner concludes from their outcomes.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, QTable, StateId};
use crate::rng::RngStream;

/// How exploratory actions are reshaped by a prior table.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum BiasMode {
    /// Plain epsilon-greedy; the prior is ignored.
    None,
    /// Redraw exploratory actions that the prior rates below the row mean.
    AvoidUnsafe,
    /// Follow the prior's greedy action on exploratory draws.
    SeekDesirable,
}

impl BiasMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasMode::None => "none",
            BiasMode::AvoidUnsafe => "avoid",
            BiasMode::SeekDesirable => "seek",
        }
    }
}

impl FromStr for BiasMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(BiasMode::None),
            "avoid" => Ok(BiasMode::AvoidUnsafe),
            "seek" => Ok(BiasMode::SeekDesirable),
            other => Err(Error::config(format!(
                "unknown bias mode {other:?}; expected \"none\", \"avoid\" or \"seek\""
            ))),
        }
    }
}

/// Exploration schedule and bias parameters for one training run.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ExploreConfig {
    pub epsilon0: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub rho: f64,
    pub mode: BiasMode,
}

impl ExploreConfig {
    pub fn new(
        epsilon0: f64,
        epsilon_decay: f64,
        epsilon_min: f64,
        rho: f64,
        mode: BiasMode,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon0) {
            return Err(Error::config(format!(
                "epsilon0 must be in [0, 1], got {epsilon0}"
            )));
        }
        if !(0.0..=1.0).contains(&epsilon_decay) {
            return Err(Error::config(format!(
                "epsilon_decay must be in [0, 1], got {epsilon_decay}"
            )));
        }
        if !(0.0..=1.0).contains(&epsilon_min) || epsilon_min > epsilon0 {
            return Err(Error::config(format!(
                "epsilon_min must be in [0, epsilon0], got {epsilon_min}"
            )));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::config(format!("rho must be in [0, 1], got {rho}")));
        }
        Ok(ExploreConfig {
            epsilon0,
            epsilon_decay,
            epsilon_min,
            rho,
            mode,
        })
    }

    /// Defaults used across the experiments: epsilon 1.0 decaying by 0.995
    /// per episode down to 0.05, bias strength 0.95.
    pub fn standard(mode: BiasMode) -> Self {
        ExploreConfig {
            epsilon0: 1.0,
            epsilon_decay: 0.995,
            epsilon_min: 0.05,
            rho: 0.95,
            mode,
        }
    }
}

/// Exploration rate for episode `k` (0-based): `max(min, e0 * decay^k)`.
pub fn epsilon_schedule(episode: usize, cfg: &ExploreConfig) -> f64 {
    (cfg.epsilon0 * cfg.epsilon_decay.powi(episode as i32)).max(cfg.epsilon_min)
}

/// Draws an action epsilon-greedily from `q` at `s`. The flag is true when
/// the draw was exploratory (uniform) rather than greedy.
pub fn epsilon_greedy(
    q: &QTable,
    s: StateId,
    epsilon: f64,
    rng: &mut RngStream,
) -> (ActionId, bool) {
    if rng.coin(epsilon) {
        (ActionId(rng.pick(q.action_count())), true)
    } else {
        (q.greedy_action(s), false)
    }
}

/// Reshapes an exploratory action with the prior: with probability
/// `1 - rho` the proposal passes through unchanged; otherwise actions the
/// prior rates strictly below the state's row mean are redrawn uniformly
/// from the full action set until a safe one appears.
pub fn bias_exploratory_action(
    q_prior: &QTable,
    s: StateId,
    proposed: ActionId,
    rho: f64,
    rng: &mut RngStream,
) -> ActionId {
    if !rng.coin(rho) {
        return proposed;
    }
    let mean = q_prior.mean_q(s);
    let mut action = proposed;
    while q_prior.get(s, action) < mean {
        action = ActionId(rng.pick(q_prior.action_count()));
    }
    action
}

/// Exploration that *follows* a prior: with probability `rho` the prior's
/// greedy action, otherwise a uniform draw.
pub fn greedy_prior_exploration(
    q_prior: &QTable,
    s: StateId,
    rho: f64,
    rng: &mut RngStream,
) -> ActionId {
    if rng.coin(rho) {
        q_prior.greedy_action(s)
    } else {
        ActionId(rng.pick(q_prior.action_count()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior_with_row(row: &[f64]) -> QTable {
        let mut q = QTable::zeros(1, row.len());
        for (a, &v) in row.iter().enumerate() {
            q.set(StateId(0), ActionId(a), v);
        }
        q
    }

    #[test]
    fn schedule_decays_to_floor() {
        let cfg = ExploreConfig::standard(BiasMode::None);
        assert_eq!(epsilon_schedule(0, &cfg), 1.0);
        assert!((epsilon_schedule(1, &cfg) - 0.995).abs() < 1e-12);
        assert!(epsilon_schedule(10, &cfg) < epsilon_schedule(5, &cfg));
        assert_eq!(epsilon_schedule(5000, &cfg), 0.05);
    }

    #[test]
    fn config_validation() {
        assert!(ExploreConfig::new(1.5, 0.995, 0.05, 0.95, BiasMode::None).is_err());
        assert!(ExploreConfig::new(1.0, 1.5, 0.05, 0.95, BiasMode::None).is_err());
        assert!(ExploreConfig::new(0.5, 0.995, 0.6, 0.95, BiasMode::None).is_err());
        assert!(ExploreConfig::new(1.0, 0.995, 0.05, -0.1, BiasMode::None).is_err());
        assert!(ExploreConfig::new(1.0, 0.995, 0.05, 0.95, BiasMode::AvoidUnsafe).is_ok());
    }

    #[test]
    fn epsilon_extremes_are_deterministic() {
        let q = prior_with_row(&[0.0, 1.0, 0.0, 0.0]);
        let mut rng = RngStream::new(7);
        for _ in 0..50 {
            let (a, exploratory) = epsilon_greedy(&q, StateId(0), 0.0, &mut rng);
            assert_eq!(a, ActionId(1));
            assert!(!exploratory);
        }
        let mut seen = [false; 4];
        for _ in 0..200 {
            let (a, exploratory) = epsilon_greedy(&q, StateId(0), 1.0, &mut rng);
            assert!(exploratory);
            seen[a.0] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn zero_rho_passes_proposals_through() {
        let q = prior_with_row(&[-1.0, 0.0, 0.0, 0.0]);
        let mut rng = RngStream::new(3);
        for a in 0..4 {
            let out = bias_exploratory_action(&q, StateId(0), ActionId(a), 0.0, &mut rng);
            assert_eq!(out, ActionId(a));
        }
    }

    #[test]
    fn full_rho_redraw_never_returns_below_mean_actions() {
        // Row mean is -0.25; only action 0 sits below it. The redraw is
        // uniform over all four actions, so the safe three come out at 1/3.
        let q = prior_with_row(&[-1.0, 0.0, 0.0, 0.0]);
        let mut rng = RngStream::new(41);
        let mut counts = [0u32; 4];
        let trials = 100_000;
        for i in 0..trials {
            let proposed = ActionId((i % 4) as usize);
            let a = bias_exploratory_action(&q, StateId(0), proposed, 1.0, &mut rng);
            counts[a.0] += 1;
        }
        assert_eq!(counts[0], 0);
        for &c in &counts[1..] {
            let frac = f64::from(c) / f64::from(trials);
            assert!(
                (frac - 1.0 / 3.0).abs() < 0.01,
                "expected ~1/3, got {frac} (counts {counts:?})"
            );
        }
    }

    #[test]
    fn safe_proposals_survive_the_bias() {
        let q = prior_with_row(&[-1.0, 0.0, 0.0, 0.0]);
        let mut rng = RngStream::new(5);
        for _ in 0..100 {
            let a = bias_exploratory_action(&q, StateId(0), ActionId(2), 1.0, &mut rng);
            assert_eq!(a, ActionId(2), "an at-or-above-mean proposal is kept");
        }
    }

    #[test]
    fn uniform_prior_rows_never_redraw() {
        let q = prior_with_row(&[0.5, 0.5, 0.5, 0.5]);
        let mut rng = RngStream::new(9);
        for a in 0..4 {
            let out = bias_exploratory_action(&q, StateId(0), ActionId(a), 1.0, &mut rng);
            assert_eq!(out, ActionId(a));
        }
    }

    #[test]
    fn greedy_prior_exploration_mixes_greedy_and_uniform() {
        let q = prior_with_row(&[0.0, 2.0, 0.0, 0.0]);
        let mut rng = RngStream::new(13);
        for _ in 0..50 {
            assert_eq!(
                greedy_prior_exploration(&q, StateId(0), 1.0, &mut rng),
                ActionId(1)
            );
        }
        let mut seen = [false; 4];
        for _ in 0..400 {
            seen[greedy_prior_exploration(&q, StateId(0), 0.0, &mut rng).0] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn bias_mode_parses() {
        assert_eq!("avoid".parse::<BiasMode>().unwrap(), BiasMode::AvoidUnsafe);
        assert_eq!("seek".parse::<BiasMode>().unwrap(), BiasMode::SeekDesirable);
        assert_eq!("none".parse::<BiasMode>().unwrap(), BiasMode::None);
        assert!("greedy".parse::<BiasMode>().is_err());
    }
}
