//! Randomized invariant checks over the score, selection, exploration, and
//! training primitives.

use std::io::Cursor;
use std::path::Path;

use proptest::prelude::*;
use qprior::analysis::prior_unsafe_set;
use qprior::dp::{value_iteration, TabularMdp, Transition};
use qprior::explore::{bias_exploratory_action, epsilon_schedule, BiasMode, ExploreConfig};
use qprior::learner::{episode_return, train_task, PriorHandle, TrainConfig};
use qprior::maps;
use qprior::prior::{
    infer_reward, normalized_entropy, scaled_desirability, scaled_undesirability,
    softmax_normalize, threshold_bounds, PriorMode, PriorModel, SourceTable,
};
use qprior::{ActionId, DiscountedParams, QTable, RngStream, StateId};

fn table_from(values: &[f64], states: usize, actions: usize) -> QTable {
    let mut q = QTable::zeros(states, actions);
    for s in 0..states {
        for a in 0..actions {
            q.set(StateId(s), ActionId(a), values[s * actions + a]);
        }
    }
    q
}

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0..20.0f64, 2..8)
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..1.0f64, 2..8).prop_map(|raw| {
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / z).collect()
    })
}

fn quarter_ints(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-40i32..=40, len)
        .prop_map(|v| v.into_iter().map(|i| f64::from(i) / 4.0).collect())
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(w in scores()) {
        let p = softmax_normalize(&w).unwrap();
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn softmax_ignores_a_common_shift(w in scores(), c in -10.0..10.0f64) {
        let p = softmax_normalize(&w).unwrap();
        let shifted: Vec<f64> = w.iter().map(|&x| x + c).collect();
        let q = softmax_normalize(&shifted).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn entropy_is_normalized(p in distribution()) {
        let h = normalized_entropy(&p).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&h));
    }

    #[test]
    fn entropy_is_one_for_uniform(n in 2usize..12) {
        let p = vec![1.0 / n as f64; n];
        let h = normalized_entropy(&p).unwrap();
        prop_assert!((h - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn entropy_ignores_order(p in distribution()) {
        let h = normalized_entropy(&p).unwrap();
        let mut reversed = p.clone();
        reversed.reverse();
        let h_rev = normalized_entropy(&reversed).unwrap();
        prop_assert!((h - h_rev).abs() <= 1e-12);
    }

    #[test]
    fn scaled_scores_are_nonnegative_and_zero_at_the_max(
        values in prop::collection::vec(-5.0..5.0f64, 8),
    ) {
        let q = table_from(&values, 2, 4);
        for s in 0..2 {
            let s = StateId(s);
            for a in (0..4).map(ActionId) {
                prop_assert!(scaled_undesirability(&q, s, a) >= 0.0);
                prop_assert!(scaled_desirability(&q, s, a) >= 0.0);
            }
            if q.max_q(s).abs() > 1e-12 {
                prop_assert_eq!(scaled_undesirability(&q, s, q.greedy_action(s)), 0.0);
            }
        }
    }

    #[test]
    fn near_zero_rows_trip_the_scale_guard(
        values in prop::collection::vec(-1e-13..1e-13f64, 4),
    ) {
        let q = table_from(&values, 1, 4);
        for a in (0..4).map(ActionId) {
            prop_assert_eq!(scaled_undesirability(&q, StateId(0), a), 0.0);
            prop_assert_eq!(scaled_desirability(&q, StateId(0), a), 0.0);
        }
    }

    #[test]
    fn threshold_range_is_positive(r_min in -10.0..0.0f64, r_max in 0.1..10.0f64) {
        let (lo, hi) = threshold_bounds(r_min, r_max).unwrap();
        prop_assert_eq!(lo, 0.0);
        prop_assert!(hi > 0.0 && hi.is_finite());
        prop_assert!((hi - ((r_min - r_max) / r_max).abs()).abs() <= 1e-12);
    }

    #[test]
    fn terminal_transitions_infer_the_raw_value(
        values in prop::collection::vec(-3.0..3.0f64, 8),
        gamma in 0.5..0.999f64,
    ) {
        let q = table_from(&values, 2, 4);
        for s in (0..2).map(StateId) {
            for a in (0..4).map(ActionId) {
                let r = infer_reward(&q, s, a, StateId(0), true, gamma);
                prop_assert_eq!(r, q.get(s, a));
            }
        }
    }

    #[test]
    fn pseudo_rewards_are_clamped_and_gated(
        values_a in prop::collection::vec(-5.0..5.0f64, 12),
        values_b in prop::collection::vec(-5.0..5.0f64, 12),
        threshold in 0.05..1.5f64,
        next in 0usize..3,
        terminal: bool,
        seek: bool,
    ) {
        let mode = if seek { PriorMode::SeekDesirable } else { PriorMode::AvoidUndesirable };
        let model = PriorModel::new(
            vec![
                SourceTable::new("a", table_from(&values_a, 3, 4)).unwrap(),
                SourceTable::new("b", table_from(&values_b, 3, 4)).unwrap(),
            ],
            threshold,
            DiscountedParams::new(0.05, 0.95).unwrap(),
            mode,
        )
        .unwrap();
        for s in (0..3).map(StateId) {
            for a in (0..4).map(ActionId) {
                let r = model.pseudo_reward(s, a, StateId(next), terminal);
                prop_assert!((-1.0..=1.0).contains(&r));
                if !model.selected(s, a) {
                    prop_assert_eq!(r, 0.0);
                }
            }
        }
    }

    #[test]
    fn greedy_choice_survives_affine_rescaling(
        values in prop::collection::vec(-5.0..5.0f64, 4),
        scale in 0.1..4.0f64,
        shift in -10.0..10.0f64,
    ) {
        let q = table_from(&values, 1, 4);
        let rescaled: Vec<f64> = values.iter().map(|&v| scale * v + shift).collect();
        let q2 = table_from(&rescaled, 1, 4);
        let best = q2.greedy_action(StateId(0));
        prop_assert!(q.get(StateId(0), best) >= q.max_q(StateId(0)) - 1e-9);
    }

    #[test]
    fn unsafe_sets_ignore_a_common_shift(values in quarter_ints(4), shift in -20i32..=20) {
        let q = table_from(&values, 1, 4);
        let shifted: Vec<f64> = values.iter().map(|&v| v + f64::from(shift) / 4.0).collect();
        let q2 = table_from(&shifted, 1, 4);
        prop_assert_eq!(prior_unsafe_set(&q, StateId(0)), prior_unsafe_set(&q2, StateId(0)));
    }

    #[test]
    fn biased_draws_never_land_strictly_below_the_row_mean(
        values in prop::collection::vec(-5.0..5.0f64, 4),
        proposed in 0usize..4,
        seed: u64,
    ) {
        let q = table_from(&values, 1, 4);
        let mut rng = RngStream::new(seed);
        let a = bias_exploratory_action(&q, StateId(0), ActionId(proposed), 1.0, &mut rng);
        prop_assert!(q.get(StateId(0), a) >= q.mean_q(StateId(0)));
    }

    #[test]
    fn zero_bias_keeps_the_proposed_action(
        values in prop::collection::vec(-5.0..5.0f64, 4),
        proposed in 0usize..4,
        seed: u64,
    ) {
        let q = table_from(&values, 1, 4);
        let mut rng = RngStream::new(seed);
        let a = bias_exploratory_action(&q, StateId(0), ActionId(proposed), 0.0, &mut rng);
        prop_assert_eq!(a, ActionId(proposed));
    }

    #[test]
    fn epsilon_schedule_decays_within_bounds(
        epsilon0 in 0.2..1.0f64,
        decay in 0.9..1.0f64,
        epsilon_min in 0.0..0.2f64,
        k in 0usize..2000,
    ) {
        let cfg = ExploreConfig::new(epsilon0, decay, epsilon_min, 0.5, BiasMode::None).unwrap();
        let now = epsilon_schedule(k, &cfg);
        let later = epsilon_schedule(k + 1, &cfg);
        prop_assert!(now >= later);
        prop_assert!((epsilon_min..=epsilon0).contains(&now));
    }

    #[test]
    fn discounted_return_matches_a_reverse_fold(
        rewards in prop::collection::vec(-1.0..1.0f64, 0..40),
        gamma in 0.5..0.999f64,
    ) {
        let forward = episode_return(&rewards, gamma);
        let backward = rewards.iter().rev().fold(0.0, |acc, &r| r + gamma * acc);
        prop_assert!((forward - backward).abs() <= 1e-9);
    }

    #[test]
    fn q_tables_round_trip_through_their_text_format(
        values in prop::collection::vec(-100.0..100.0f64, 12),
    ) {
        let q = table_from(&values, 3, 4);
        let mut buf = Vec::new();
        q.write_to(&mut buf).unwrap();
        let restored = QTable::read_from(Cursor::new(buf), Path::new("memory")).unwrap();
        prop_assert_eq!(restored.state_count(), 3);
        prop_assert_eq!(restored.action_count(), 4);
        for s in (0..3).map(StateId) {
            for a in (0..4).map(ActionId) {
                prop_assert_eq!(restored.get(s, a), q.get(s, a));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inferred_rewards_recover_random_chains(n_states in 5usize..14, seed: u64) {
        let n_actions = 3;
        let gamma = 0.95;
        let mut rng = RngStream::new(seed);
        let terminal: Vec<bool> = (0..n_states).map(|s| s == n_states - 1).collect();
        let mut transitions = Vec::new();
        for (s, &is_terminal) in terminal.iter().enumerate() {
            for _ in 0..n_actions {
                if is_terminal {
                    transitions.push(Vec::new());
                    continue;
                }
                let next = s + 1 + rng.pick(n_states - 1 - s);
                transitions.push(vec![Transition {
                    prob: 1.0,
                    next: StateId(next),
                    reward: rng.uniform(-1.0, 1.0),
                }]);
            }
        }
        let mdp = TabularMdp::new(n_states, n_actions, transitions.clone(), terminal).unwrap();
        let q = value_iteration(&mdp, gamma, 1e-10, 100_000).unwrap();
        for s in 0..n_states {
            if mdp.is_terminal(StateId(s)) {
                continue;
            }
            for a in 0..n_actions {
                let t = &transitions[s * n_actions + a][0];
                let inferred = infer_reward(
                    &q,
                    StateId(s),
                    ActionId(a),
                    t.next,
                    mdp.is_terminal(t.next),
                    gamma,
                );
                prop_assert!((inferred - t.reward).abs() <= 1e-6);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn training_replays_exactly_under_a_fixed_seed(seed: u64) {
        let env = maps::original();
        let cfg = TrainConfig::new(
            80,
            200,
            DiscountedParams::new(0.05, 0.95).unwrap(),
            ExploreConfig::standard(BiasMode::None),
        )
        .unwrap();
        let (q_a, log_a) =
            train_task(&env, &cfg, PriorHandle::None, &mut RngStream::new(seed)).unwrap();
        let (q_b, log_b) =
            train_task(&env, &cfg, PriorHandle::None, &mut RngStream::new(seed)).unwrap();
        for s in (0..q_a.state_count()).map(StateId) {
            for a in (0..q_a.action_count()).map(ActionId) {
                prop_assert_eq!(q_a.get(s, a), q_b.get(s, a));
            }
        }
        prop_assert_eq!(log_a.to_csv(), log_b.to_csv());
    }
}
