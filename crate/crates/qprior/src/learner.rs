//! Q-learning on grid tasks, with optional prior biasing or in-tandem
//! prior learning, plus the per-episode metrics the experiments consume.
//!
//! [`train_task`] runs one epsilon-greedy Q-learner on a map. Its prior
//! handle decides what else happens on each transition: a frozen prior
//! reshapes exploratory draws, while a learning prior receives every
//! transition as an update of its own. [`learn_prior_offpolicy`] feeds a
//! prior from rollouts of a fixed behaviour policy instead, which is how
//! priors are distilled from already-solved tasks and re-fitted on map
//! variants.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::explore::{
    bias_exploratory_action, epsilon_greedy, epsilon_schedule, greedy_prior_exploration, BiasMode,
    ExploreConfig,
};
use crate::grid::{MapSpec, StepOutcome, ACTION_COUNT};
use crate::mdp::{ActionId, DiscountedParams, QTable, StateId};
use crate::prior::PriorModel;
use crate::rng::RngStream;

/// Parameters for one training run.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub params: DiscountedParams,
    pub explore: ExploreConfig,
}

impl TrainConfig {
    pub fn new(
        episodes: usize,
        horizon: usize,
        params: DiscountedParams,
        explore: ExploreConfig,
    ) -> Result<Self> {
        if episodes == 0 || horizon == 0 {
            return Err(Error::config(format!(
                "episodes and horizon must be positive, got {episodes} and {horizon}"
            )));
        }
        Ok(TrainConfig {
            episodes,
            horizon,
            params,
            explore,
        })
    }

    /// Defaults used across the experiments: 2000 episodes of up to 500
    /// steps, learning rate 0.05, discount 0.95.
    pub fn standard(mode: BiasMode) -> Self {
        TrainConfig {
            episodes: 2000,
            horizon: 500,
            params: DiscountedParams::new(0.05, 0.95).expect("valid defaults"),
            explore: ExploreConfig::standard(mode),
        }
    }
}

/// What a training run does with a prior on each transition.
pub enum PriorHandle<'a> {
    /// No prior involved.
    None,
    /// A fixed prior table that reshapes exploratory draws.
    Frozen(&'a QTable),
    /// A prior still being learned; it receives every observed transition.
    Learning(&'a mut PriorModel),
}

/// Per-episode metrics recorded by every training loop.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Discounted return of the episode.
    pub ret: f64,
    pub collisions: u32,
    pub steps: u32,
    pub epsilon: f64,
    /// Mean absolute prior TD error over the episode's updates, when a
    /// prior was learning.
    pub prior_td: Option<f64>,
}

/// All episode records of one run, labelled by the seed that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsLog {
    pub seed: u64,
    pub rows: Vec<EpisodeRecord>,
}

impl MetricsLog {
    pub fn new(seed: u64) -> Self {
        MetricsLog {
            seed,
            rows: Vec::new(),
        }
    }

    /// Renders the rows as CSV with an `episode,return,collisions,steps,
    /// epsilon,prior_td` header; the last column is empty when no prior was
    /// learning.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,return,collisions,steps,epsilon,prior_td\n");
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                r.episode, r.ret, r.collisions, r.steps, r.epsilon
            );
            match r.prior_td {
                Some(td) => {
                    let _ = writeln!(out, ",{td}");
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Mean return over episodes `[start, end)` (clamped to the log length).
    pub fn mean_return(&self, start: usize, end: usize) -> f64 {
        let slice = &self.rows[start.min(self.rows.len())..end.min(self.rows.len())];
        assert!(!slice.is_empty(), "empty episode window {start}..{end}");
        slice.iter().map(|r| r.ret).sum::<f64>() / slice.len() as f64
    }

    /// Collisions accumulated over episodes `0..=episode`.
    pub fn cumulative_collisions(&self, episode: usize) -> u64 {
        self.rows
            .iter()
            .take_while(|r| r.episode <= episode)
            .map(|r| u64::from(r.collisions))
            .sum()
    }
}

/// Discounted sum of an episode's rewards in step order.
pub fn episode_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut ret = 0.0;
    let mut discount = 1.0;
    for &r in rewards {
        ret += discount * r;
        discount *= gamma;
    }
    ret
}

fn check_prior_dims(env: &MapSpec, q: &QTable) -> Result<()> {
    if q.state_count() != env.state_count() || q.action_count() != ACTION_COUNT {
        return Err(Error::dimension(format!(
            "prior table is {}x{}, map needs {}x{}",
            q.state_count(),
            q.action_count(),
            env.state_count(),
            ACTION_COUNT
        )));
    }
    Ok(())
}

/// Trains a Q-learner on `env` for `cfg.episodes` episodes.
///
/// With [`PriorHandle::Frozen`], exploratory actions are reshaped according
/// to `cfg.explore.mode`; with [`PriorHandle::Learning`], the prior receives
/// every transition and the per-episode mean absolute prior TD error is
/// recorded. Returns the learned table and the per-episode metrics.
pub fn train_task(
    env: &MapSpec,
    cfg: &TrainConfig,
    mut prior: PriorHandle<'_>,
    rng: &mut RngStream,
) -> Result<(QTable, MetricsLog)> {
    match (&prior, cfg.explore.mode) {
        (PriorHandle::None, BiasMode::AvoidUnsafe | BiasMode::SeekDesirable) => {
            return Err(Error::config(
                "a bias mode other than \"none\" needs a frozen prior table",
            ))
        }
        (PriorHandle::Frozen(q), _) => check_prior_dims(env, q)?,
        _ => {}
    }

    let mut q = QTable::zeros(env.state_count(), ACTION_COUNT);
    let mut log = MetricsLog::new(rng.seed());
    let learning_prior = matches!(prior, PriorHandle::Learning(_));

    for episode in 0..cfg.episodes {
        let epsilon = epsilon_schedule(episode, &cfg.explore);
        let mut pose = env.reset(rng);
        let mut state = env.state_of_pose(pose);
        let mut rewards = Vec::with_capacity(cfg.horizon.min(1024));
        let mut collisions = 0u32;
        let mut prior_td_sum = 0.0;
        let mut steps = 0u32;

        for _ in 0..cfg.horizon {
            let (mut action, exploratory) = epsilon_greedy(&q, state, epsilon, rng);
            if exploratory {
                action = match (&prior, cfg.explore.mode) {
                    (PriorHandle::Frozen(p), BiasMode::AvoidUnsafe) => {
                        bias_exploratory_action(p, state, action, cfg.explore.rho, rng)
                    }
                    (PriorHandle::Frozen(p), BiasMode::SeekDesirable) => {
                        greedy_prior_exploration(p, state, cfg.explore.rho, rng)
                    }
                    _ => action,
                };
            }

            let StepOutcome {
                pose: next_pose,
                state: next,
                reward,
                terminal,
                collided,
            } = env.step(pose, action, rng);

            q.q_update(state, action, reward, next, terminal, &cfg.params);
            if let PriorHandle::Learning(model) = &mut prior {
                let step = model.update_step(state, action, next, terminal);
                prior_td_sum += step.td_error.abs();
            }

            rewards.push(reward);
            collisions += u32::from(collided);
            steps += 1;
            pose = next_pose;
            state = next;
            if terminal {
                break;
            }
        }

        log.rows.push(EpisodeRecord {
            episode,
            ret: episode_return(&rewards, cfg.params.gamma),
            collisions,
            steps,
            epsilon,
            prior_td: learning_prior.then(|| prior_td_sum / f64::from(steps.max(1))),
        });
    }

    Ok((q, log))
}

/// The policy that generates transitions for off-policy prior learning.
pub enum Behavior {
    /// Uniform over the action set every step.
    UniformRandom,
    /// Greedy with respect to a fixed table.
    Greedy(QTable),
}

impl Behavior {
    fn act(&self, s: StateId, rng: &mut RngStream) -> ActionId {
        match self {
            Behavior::UniformRandom => ActionId(rng.pick(ACTION_COUNT)),
            Behavior::Greedy(q) => q.greedy_action(s),
        }
    }

    fn epsilon(&self) -> f64 {
        match self {
            Behavior::UniformRandom => 1.0,
            Behavior::Greedy(_) => 0.0,
        }
    }
}

/// Feeds a prior model from rollouts of `behavior` on `env`. The
/// environment's own rewards are logged but never enter the prior; each
/// transition is scored and updated through the model's pseudo-rewards.
pub fn learn_prior_offpolicy(
    env: &MapSpec,
    model: &mut PriorModel,
    behavior: &Behavior,
    episodes: usize,
    horizon: usize,
    rng: &mut RngStream,
) -> Result<MetricsLog> {
    if episodes == 0 || horizon == 0 {
        return Err(Error::config(format!(
            "episodes and horizon must be positive, got {episodes} and {horizon}"
        )));
    }
    check_prior_dims(env, model.q())?;
    if let Behavior::Greedy(q) = behavior {
        check_prior_dims(env, q)?;
    }

    let gamma = model.params().gamma;
    let mut log = MetricsLog::new(rng.seed());
    for episode in 0..episodes {
        let mut pose = env.reset(rng);
        let mut state = env.state_of_pose(pose);
        let mut rewards = Vec::new();
        let mut collisions = 0u32;
        let mut td_sum = 0.0;
        let mut steps = 0u32;

        for _ in 0..horizon {
            let action = behavior.act(state, rng);
            let out = env.step(pose, action, rng);
            let step = model.update_step(state, action, out.state, out.terminal);
            td_sum += step.td_error.abs();
            rewards.push(out.reward);
            collisions += u32::from(out.collided);
            steps += 1;
            pose = out.pose;
            state = out.state;
            if out.terminal {
                break;
            }
        }

        log.rows.push(EpisodeRecord {
            episode,
            ret: episode_return(&rewards, gamma),
            collisions,
            steps,
            epsilon: behavior.epsilon(),
            prior_td: Some(td_sum / f64::from(steps.max(1))),
        });
    }
    Ok(log)
}

/// Converged tables, logs, and rollout success rates for a set of goals.
pub struct SourceTrainOutcome {
    pub sources: Vec<crate::prior::SourceTable>,
    pub logs: Vec<MetricsLog>,
    pub success_rates: Vec<f64>,
}

/// Trains one task per goal position on `env` and checks each learned
/// policy by greedy rollouts from every free start. A task converges when
/// the rollout reaches its goal — or, on maps with a common-reward cell
/// whose value makes lingering there optimal, reaches the goal or that
/// cell — from at least `min_success_rate` of starts.
///
/// Each task uses an independent substream of `rng`, so results do not
/// depend on goal order.
pub fn train_source_tasks(
    env: &MapSpec,
    goals: &[(usize, usize)],
    cfg: &TrainConfig,
    min_success_rate: f64,
    rng: &RngStream,
) -> Result<SourceTrainOutcome> {
    if goals.is_empty() {
        return Err(Error::config("at least one source goal is required"));
    }
    let trained: Vec<(crate::prior::SourceTable, MetricsLog, f64)> = goals
        .par_iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let task = env.with_goal(x, y)?;
            let mut task_rng = rng.substream(i as u64);
            let (q, log) = train_task(&task, cfg, PriorHandle::None, &mut task_rng)?;
            let mut check_rng = rng.substream(1000 + i as u64);
            let rate = if task.common_state().is_some() {
                greedy_goal_or_common_rate(&task, &q, cfg.horizon, &mut check_rng)
            } else {
                greedy_goal_rate(&task, &q, cfg.horizon, &mut check_rng)
            };
            if rate < min_success_rate {
                return Err(Error::config(format!(
                    "task with goal ({x}, {y}) converged from only {:.1}% of starts \
                     (needs {:.1}%); more episodes or a slower epsilon decay may help",
                    rate * 100.0,
                    min_success_rate * 100.0
                )));
            }
            let source = crate::prior::SourceTable::new(format!("goal_{x}_{y}"), q)?;
            Ok((source, log, rate))
        })
        .collect::<Result<_>>()?;
    let mut outcome = SourceTrainOutcome {
        sources: Vec::new(),
        logs: Vec::new(),
        success_rates: Vec::new(),
    };
    for (source, log, rate) in trained {
        outcome.sources.push(source);
        outcome.logs.push(log);
        outcome.success_rates.push(rate);
    }
    Ok(outcome)
}

/// Outcome of one greedy rollout.
#[derive(Copy, Clone, Debug)]
pub struct RolloutOutcome {
    pub reached_goal: bool,
    pub visited_common: bool,
    pub steps: u32,
}

/// Follows `q` greedily from the centre of `start`'s cell until the episode
/// ends or `horizon` steps pass.
pub fn greedy_rollout(
    env: &MapSpec,
    q: &QTable,
    start: StateId,
    horizon: usize,
    rng: &mut RngStream,
) -> RolloutOutcome {
    let (x, y) = env.coords(start);
    let mut pose = env.cell_center(x, y);
    let mut state = start;
    let mut visited_common = env.common_state() == Some(state);
    for step in 0..horizon {
        let out = env.step(pose, q.greedy_action(state), rng);
        visited_common |= env.common_state() == Some(out.state);
        if out.terminal {
            return RolloutOutcome {
                reached_goal: true,
                visited_common,
                steps: step as u32 + 1,
            };
        }
        pose = out.pose;
        state = out.state;
    }
    RolloutOutcome {
        reached_goal: false,
        visited_common,
        steps: horizon as u32,
    }
}

/// Fraction of free starting cells from which one greedy rollout reaches
/// the goal within `horizon` steps.
pub fn greedy_goal_rate(env: &MapSpec, q: &QTable, horizon: usize, rng: &mut RngStream) -> f64 {
    let starts = env.free_states();
    let hits = starts
        .iter()
        .filter(|&&s| greedy_rollout(env, q, s, horizon, rng).reached_goal)
        .count();
    hits as f64 / starts.len() as f64
}

/// Fraction of free starting cells from which one greedy rollout reaches
/// the goal *or* enters the common-reward cell within `horizon` steps. On
/// maps where lingering at the common-reward cell out-values the goal, this
/// is the meaningful notion of a converged policy.
pub fn greedy_goal_or_common_rate(
    env: &MapSpec,
    q: &QTable,
    horizon: usize,
    rng: &mut RngStream,
) -> f64 {
    let starts = env.free_states();
    let hits = starts
        .iter()
        .filter(|&&s| {
            let out = greedy_rollout(env, q, s, horizon, rng);
            out.reached_goal || out.visited_common
        })
        .count();
    hits as f64 / starts.len() as f64
}
