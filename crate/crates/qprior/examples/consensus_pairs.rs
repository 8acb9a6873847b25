//! Shows how consensus selection works: each state-action pair gets one
//! scaled score per solved source task; the pair is kept when the softmax
//! entropy of those scores (the agreement) times their mean (the strength)
//! clears a threshold.

use qprior::explore::{BiasMode, ExploreConfig};
use qprior::grid::{action_name, COLLISION_REWARD, GOAL_REWARD};
use qprior::learner::{train_source_tasks, TrainConfig};
use qprior::maps;
use qprior::prior::{
    normalized_entropy, softmax_normalize, threshold_bounds, PriorMode, PriorModel,
};
use qprior::{DiscountedParams, Result, RngStream};

fn main() -> Result<()> {
    let env = maps::original();
    let cfg = TrainConfig::new(
        20_000,
        500,
        DiscountedParams::new(0.05, 0.95)?,
        ExploreConfig::standard(BiasMode::None),
    )?;
    println!("training {} source tasks...", maps::SOURCE_GOALS.len());
    let outcome = train_source_tasks(&env, &maps::SOURCE_GOALS, &cfg, 0.95, &RngStream::new(1))?;

    let (lo, hi) = threshold_bounds(COLLISION_REWARD, GOAL_REWARD)?;
    let threshold = 0.35;
    println!("meaningful threshold range ({lo}, {hi}); using {threshold}");

    let model = PriorModel::new(
        outcome.sources,
        threshold,
        DiscountedParams::new(0.05, 0.95)?,
        PriorMode::AvoidUndesirable,
    )?;

    println!("\npair                     scores per source             entropy  mean  kept");
    for s in env.acting_states() {
        let (x, y) = env.coords(s);
        for a in (0..4).map(qprior::ActionId) {
            let (scores, _) = model.scores(s, a);
            let softmaxed = softmax_normalize(&scores)?;
            let entropy = normalized_entropy(&softmaxed)?;
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            if entropy * mean > 0.05 {
                println!(
                    "({x:>2},{y:>2}) {:<5}  [{}]  {entropy:.3}  {mean:>5.2}  {}",
                    action_name(a),
                    scores
                        .iter()
                        .map(|w| format!("{w:>5.2}"))
                        .collect::<Vec<_>>()
                        .join(" "),
                    if model.selected(s, a) { "yes" } else { "no" }
                );
            }
        }
    }

    let selected = model.selected_pairs(env.acting_states());
    println!("\n{} pairs selected in total:", selected.len());
    for (s, a) in &selected {
        let (x, y) = env.coords(*s);
        let truly_bad = env.collision_actions(*s).contains(a);
        println!(
            "  ({x:>2},{y:>2}) {:<5} {}",
            action_name(*a),
            if truly_bad {
                "-> hits a wall"
            } else {
                "-> safe in truth"
            }
        );
    }
    Ok(())
}
