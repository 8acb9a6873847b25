//! Trains one task with epsilon-greedy Q-learning and inspects the result:
//! the learning curve, the greedy policy's success rate, and a sample
//! rollout.

use qprior::explore::{BiasMode, ExploreConfig};
use qprior::grid::action_name;
use qprior::learner::{greedy_goal_rate, greedy_rollout, train_task, PriorHandle, TrainConfig};
use qprior::maps;
use qprior::{DiscountedParams, Result, RngStream};

fn main() -> Result<()> {
    let env = maps::original().with_goal(10, 9)?;
    let cfg = TrainConfig::new(
        20_000,
        500,
        DiscountedParams::new(0.05, 0.95)?,
        ExploreConfig::standard(BiasMode::None),
    )?;
    let mut rng = RngStream::new(1);
    let (q, log) = train_task(&env, &cfg, PriorHandle::None, &mut rng)?;

    println!("trained 20000 episodes toward the goal at (10,9)");
    for (label, start, end) in [
        ("first 100", 0, 100),
        ("middle 100", 9_950, 10_050),
        ("last 100", 19_900, 20_000),
    ] {
        println!(
            "  {label:>10} episodes: mean return {:>7.3}",
            log.mean_return(start, end)
        );
    }
    println!(
        "  collisions: {} in the first 1000 episodes, {} in the last 1000",
        log.cumulative_collisions(999),
        log.cumulative_collisions(19_999) - log.cumulative_collisions(18_999)
    );

    let mut rate_rng = RngStream::new(99);
    let rate = greedy_goal_rate(&env, &q, 500, &mut rate_rng);
    println!(
        "greedy policy reaches the goal from {:.0}% of free starts",
        rate * 100.0
    );

    let start = env.state_at(13, 11);
    println!("\ngreedy actions from (13,11):");
    let mut s = start;
    for _ in 0..8 {
        let a = q.greedy_action(s);
        let (x, y) = env.coords(s);
        println!("  ({x},{y}) -> {}", action_name(a));
        if s == env.goal_state() {
            break;
        }
        let mut step_rng = RngStream::new(7);
        let out = env.step(env.cell_center(x, y), a, &mut step_rng);
        if out.terminal {
            println!("  reached the goal");
            break;
        }
        s = out.state;
    }

    let mut roll_rng = RngStream::new(3);
    let outcome = greedy_rollout(&env, &q, start, 500, &mut roll_rng);
    println!(
        "one noisy rollout from (13,11): reached goal {} in {} steps",
        outcome.reached_goal, outcome.steps
    );
    Ok(())
}
