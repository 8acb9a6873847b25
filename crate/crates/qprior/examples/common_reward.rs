//! Seek-mode pipeline on a map with a shared paying cell: every source task
//! passes near the cell on the way to its own goal, so desirability scores
//! agree there, and the distilled prior pulls exploration toward it.

use qprior::analysis::distance_reducing_fraction;
use qprior::explore::{BiasMode, ExploreConfig};
use qprior::grid::action_name;
use qprior::learner::{
    greedy_goal_or_common_rate, learn_prior_offpolicy, train_source_tasks, train_task, Behavior,
    PriorHandle, TrainConfig,
};
use qprior::maps;
use qprior::prior::{PriorMode, PriorModel};
use qprior::{DiscountedParams, Result, RngStream};

fn main() -> Result<()> {
    let env = maps::common_reward();
    let common = env.common().expect("this map has a shared paying cell");
    println!(
        "goal at {:?}, shared cell at {common:?} paying {} per visit",
        env.goal(),
        env.common_reward_value()
    );

    let params = DiscountedParams::new(0.05, 0.95)?;
    let source_cfg =
        TrainConfig::new(20_000, 500, params, ExploreConfig::standard(BiasMode::None))?;
    println!("training sources (each may farm the shared cell or head to its goal)...");
    let outcome = train_source_tasks(
        &env,
        &maps::SOURCE_GOALS,
        &source_cfg,
        0.95,
        &RngStream::new(100_000),
    )?;

    let mut model = PriorModel::new(outcome.sources, 0.35, params, PriorMode::SeekDesirable)?;
    learn_prior_offpolicy(
        &env,
        &mut model,
        &Behavior::UniformRandom,
        2_000,
        500,
        &mut RngStream::new(200_000),
    )?;

    let selected = model.selected_pairs(env.acting_states());
    println!("\n{} desirable pairs selected:", selected.len());
    let common_state = env.common_state().expect("checked above");
    for (s, a) in &selected {
        let (x, y) = env.coords(*s);
        let closer = {
            let d_here = env.manhattan(*s, common_state);
            let (dx, dy) = qprior::grid::action_delta(*a);
            let nx = (x as i64 + dx) as usize;
            let ny = (y as i64 + dy) as usize;
            env.manhattan(env.state_at(nx, ny), common_state) < d_here
        };
        println!(
            "  ({x:>2},{y:>2}) {:<5} {}",
            action_name(*a),
            if closer {
                "-> toward the shared cell"
            } else {
                ""
            }
        );
    }
    println!(
        "fraction of selected moves that reduce distance to the shared cell: {:.3}",
        distance_reducing_fraction(&model, &env)?
    );

    let prior_q = model.into_q();
    let with_cfg = TrainConfig::new(
        2_000,
        500,
        params,
        ExploreConfig::standard(BiasMode::SeekDesirable),
    )?;
    let base_cfg = TrainConfig::new(2_000, 500, params, ExploreConfig::standard(BiasMode::None))?;
    println!("\ntraining the target with and without seek-biased exploration...");
    let mut with_w = Vec::new();
    let mut base_w = Vec::new();
    let mut rates = Vec::new();
    for seed in 0..5 {
        let mut rng = RngStream::new(seed);
        let (q_with, with_log) =
            train_task(&env, &with_cfg, PriorHandle::Frozen(&prior_q), &mut rng)?;
        let mut rng = RngStream::new(seed);
        let (_, base_log) = train_task(&env, &base_cfg, PriorHandle::None, &mut rng)?;
        with_w.push(with_log.mean_return(0, 200));
        base_w.push(base_log.mean_return(0, 200));
        let mut rate_rng = RngStream::new(seed).substream(7777);
        rates.push(greedy_goal_or_common_rate(
            &env,
            &q_with,
            500,
            &mut rate_rng,
        ));
    }
    let avg = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    println!(
        "first-200-episode mean return: {:.3} with the seek bias, {:.3} without",
        avg(&with_w),
        avg(&base_w)
    );
    println!("greedy goal-or-shared-cell rates: {rates:?}");
    Ok(())
}
