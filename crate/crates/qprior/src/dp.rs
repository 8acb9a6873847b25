//! Explicit tabular MDPs and value iteration.
//!
//! Serves as the reference solver that tests compare sampled learning
//! against, and as the ground-truth generator for reward-inference checks.

use crate::error::{Error, Result};
use crate::mdp::{ActionId, QTable, StateId};
use crate::rng::RngStream;

/// One possible outcome of taking an action: probability, successor, reward.
#[derive(Clone, Debug)]
pub struct Transition {
    pub prob: f64,
    pub next: StateId,
    pub reward: f64,
}

/// A finite MDP given by explicit transition and reward tables. Terminal
/// states absorb: they have no outgoing transitions and value zero.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<Transition>>,
    terminal: Vec<bool>,
}

impl TabularMdp {
    /// `transitions[s * n_actions + a]` lists the outcomes of action `a` in
    /// state `s`. Outcome probabilities per pair must sum to 1; terminal
    /// states must have empty outcome lists.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<Transition>>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config("MDP dimensions must be positive"));
        }
        if transitions.len() != n_states * n_actions {
            return Err(Error::dimension(format!(
                "expected {} transition lists, got {}",
                n_states * n_actions,
                transitions.len()
            )));
        }
        if terminal.len() != n_states {
            return Err(Error::dimension("terminal flags must cover every state"));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let outs = &transitions[s * n_actions + a];
                if terminal[s] {
                    if !outs.is_empty() {
                        return Err(Error::config(format!(
                            "terminal state {s} has outgoing transitions"
                        )));
                    }
                    continue;
                }
                let total: f64 = outs.iter().map(|t| t.prob).sum();
                if outs.is_empty() || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::config(format!(
                        "transition probabilities for ({s}, {a}) sum to {total}"
                    )));
                }
                if let Some(t) = outs.iter().find(|t| t.next.0 >= n_states) {
                    return Err(Error::config(format!(
                        "transition from ({s}, {a}) to out-of-range state {}",
                        t.next.0
                    )));
                }
            }
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            transitions,
            terminal,
        })
    }

    pub fn state_count(&self) -> usize {
        self.n_states
    }

    pub fn action_count(&self) -> usize {
        self.n_actions
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s.0]
    }

    pub fn outcomes(&self, s: StateId, a: ActionId) -> &[Transition] {
        &self.transitions[s.0 * self.n_actions + a.0]
    }

    /// Samples one transition. Panics if `s` is terminal.
    pub fn sample(&self, s: StateId, a: ActionId, rng: &mut RngStream) -> (StateId, f64) {
        let outs = self.outcomes(s, a);
        assert!(!outs.is_empty(), "sampled from terminal state {}", s.0);
        let mut u = rng.next_f64();
        for t in outs {
            if u < t.prob {
                return (t.next, t.reward);
            }
            u -= t.prob;
        }
        let last = outs.last().unwrap();
        (last.next, last.reward)
    }
}

/// Solves for the optimal action values by repeated Bellman backups until the
/// sup-norm residual drops below `tol`. `gamma = 1` is accepted only for
/// episodic models (at least one terminal state); otherwise values diverge.
pub fn value_iteration(mdp: &TabularMdp, gamma: f64, tol: f64, max_iters: usize) -> Result<QTable> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config(format!(
            "gamma must be in [0, 1], got {gamma}"
        )));
    }
    if gamma == 1.0 && !mdp.terminal.iter().any(|&t| t) {
        return Err(Error::config(
            "gamma = 1 requires an episodic model with at least one terminal state",
        ));
    }
    if tol <= 0.0 {
        return Err(Error::config(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    for _ in 0..max_iters {
        let mut residual: f64 = 0.0;
        let mut next = q.clone();
        for s in 0..mdp.n_states {
            if mdp.terminal[s] {
                continue;
            }
            for a in 0..mdp.n_actions {
                let mut v = 0.0;
                for t in mdp.outcomes(StateId(s), ActionId(a)) {
                    let boot = if mdp.terminal[t.next.0] {
                        0.0
                    } else {
                        q.max_q(t.next)
                    };
                    v += t.prob * (t.reward + gamma * boot);
                }
                residual = residual.max((v - q.get(StateId(s), ActionId(a))).abs());
                next.set(StateId(s), ActionId(a), v);
            }
        }
        q = next;
        if residual < tol {
            return Ok(q);
        }
    }
    Err(Error::config(format!(
        "value iteration did not reach tolerance {tol} in {max_iters} iterations"
    )))
}

/// A randomly wired episodic MDP with deterministic transitions and one
/// reward per (state, action): every non-terminal pair jumps to a uniformly
/// chosen state with a uniform reward in `[-1, 1]`. The last state is
/// terminal.
pub fn random_deterministic_episodic(
    n_states: usize,
    n_actions: usize,
    rng: &mut RngStream,
) -> TabularMdp {
    assert!(
        n_states >= 2,
        "need at least one non-terminal and one terminal state"
    );
    let terminal: Vec<bool> = (0..n_states).map(|s| s == n_states - 1).collect();
    let mut transitions = Vec::with_capacity(n_states * n_actions);
    for &is_terminal in &terminal {
        for _ in 0..n_actions {
            if is_terminal {
                transitions.push(Vec::new());
                continue;
            }
            let next = StateId(rng.pick(n_states));
            let reward = rng.uniform(-1.0, 1.0);
            transitions.push(vec![Transition {
                prob: 1.0,
                next,
                reward,
            }]);
        }
    }
    TabularMdp::new(n_states, n_actions, transitions, terminal).expect("generated MDP is valid")
}
