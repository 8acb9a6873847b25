//! Full prior-distillation pipeline: train sources, walk the map with a
//! uniform random policy, feed every selected transition a pseudo-reward,
//! and compare the resulting table's unsafe sets against ground truth.

use qprior::analysis::{correctness, evaluate_prior, selection_quality};
use qprior::explore::{BiasMode, ExploreConfig};
use qprior::grid::action_name;
use qprior::learner::{learn_prior_offpolicy, train_source_tasks, Behavior, TrainConfig};
use qprior::maps;
use qprior::prior::{PriorMode, PriorModel};
use qprior::{DiscountedParams, Result, RngStream};

fn main() -> Result<()> {
    let env = maps::original();
    let params = DiscountedParams::new(0.05, 0.95)?;
    let cfg = TrainConfig::new(20_000, 500, params, ExploreConfig::standard(BiasMode::None))?;
    println!("training sources at {:?}...", maps::SOURCE_GOALS);
    let outcome = train_source_tasks(&env, &maps::SOURCE_GOALS, &cfg, 0.95, &RngStream::new(1))?;
    for (source, rate) in outcome.sources.iter().zip(&outcome.success_rates) {
        println!("  {}: greedy success rate {:.2}", source.label, rate);
    }

    let mut model = PriorModel::new(outcome.sources, 0.35, params, PriorMode::AvoidUndesirable)?;
    println!("\ndistilling 2000 uniform-random episodes into the prior...");
    learn_prior_offpolicy(
        &env,
        &mut model,
        &Behavior::UniformRandom,
        2_000,
        500,
        &mut RngStream::new(0),
    )?;
    let stats = model.stats();
    println!(
        "  {} value updates, {} on selected pairs, {} skipped by the zero-max guard",
        stats.updates, stats.selected_updates, stats.zero_max_skips
    );

    let quality = selection_quality(&model, &env);
    println!(
        "\nselection: {} pairs, {} of them true collision actions (precision {})",
        quality.selected,
        quality.collision_hits,
        quality
            .precision()
            .map_or("undefined".to_owned(), |p| format!("{p:.3}"))
    );

    let eval = evaluate_prior(model.q(), &env)?;
    println!(
        "prior vs ground truth: {} declared unsafe, {} false positives, {} false negatives",
        eval.counts.identified, eval.counts.false_positives, eval.counts.false_negatives
    );
    println!("correctness {:.3}", correctness(&eval.counts)?);

    println!("\nper-state unsafe sets (declared | actual):");
    for detail in &eval.states {
        if detail.declared.is_empty() && detail.actual.is_empty() {
            continue;
        }
        let (x, y) = env.coords(detail.state);
        let names = |actions: &[qprior::ActionId]| {
            actions
                .iter()
                .map(|&a| action_name(a))
                .collect::<Vec<_>>()
                .join(",")
        };
        println!(
            "  ({x:>2},{y:>2})  [{}] | [{}]",
            names(&detail.declared),
            names(&detail.actual)
        );
    }
    Ok(())
}
