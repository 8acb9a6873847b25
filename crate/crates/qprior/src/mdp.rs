//! Tabular action-value storage and the one-step Q-learning update.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Index of a discrete state. Rows of a [`QTable`].
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct StateId(pub usize);

/// Index of a discrete action. Columns of a [`QTable`].
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ActionId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Learning rate and discount factor for temporal-difference updates.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DiscountedParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl DiscountedParams {
    /// Requires `alpha` in `(0, 1]` and `gamma` in `[0, 1]`.
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::config(format!(
                "alpha must be in (0, 1], got {alpha}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::config(format!(
                "gamma must be in [0, 1], got {gamma}"
            )));
        }
        Ok(DiscountedParams { alpha, gamma })
    }
}

/// Result of a single Q-learning update.
#[derive(Copy, Clone, Debug)]
pub struct QUpdate {
    pub new_value: f64,
    pub td_error: f64,
}

/// Dense `state x action` table of action values, zero-initialised.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        assert!(
            states > 0 && actions > 0,
            "QTable dimensions must be positive"
        );
        QTable {
            states,
            actions,
            values: vec![0.0; states * actions],
        }
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    #[inline]
    fn index(&self, s: StateId, a: ActionId) -> usize {
        assert!(
            s.0 < self.states,
            "state {} out of range {}",
            s.0,
            self.states
        );
        assert!(
            a.0 < self.actions,
            "action {} out of range {}",
            a.0,
            self.actions
        );
        s.0 * self.actions + a.0
    }

    #[inline]
    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.values[self.index(s, a)]
    }

    #[inline]
    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        let i = self.index(s, a);
        self.values[i] = v;
    }

    /// The action values of one state, in action order.
    pub fn row(&self, s: StateId) -> &[f64] {
        assert!(
            s.0 < self.states,
            "state {} out of range {}",
            s.0,
            self.states
        );
        &self.values[s.0 * self.actions..(s.0 + 1) * self.actions]
    }

    pub fn max_q(&self, s: StateId) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_q(&self, s: StateId) -> f64 {
        self.row(s).iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_q(&self, s: StateId) -> f64 {
        let row = self.row(s);
        row.iter().sum::<f64>() / row.len() as f64
    }

    /// The action with the highest value; ties break to the lowest index.
    pub fn greedy_action(&self, s: StateId) -> ActionId {
        let row = self.row(s);
        let mut best = 0;
        for (i, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = i;
            }
        }
        ActionId(best)
    }

    /// `Q(s, a) - max_a' Q(s, a')`; non-positive by construction.
    pub fn advantage(&self, s: StateId, a: ActionId) -> f64 {
        self.get(s, a) - self.max_q(s)
    }

    /// One-step Q-learning update toward `r + gamma * max_a' Q(s', a')`,
    /// bootstrapping zero when the transition ended the episode.
    pub fn q_update(
        &mut self,
        s: StateId,
        a: ActionId,
        reward: f64,
        next: StateId,
        terminal: bool,
        params: &DiscountedParams,
    ) -> QUpdate {
        let bootstrap = if terminal { 0.0 } else { self.max_q(next) };
        let old = self.get(s, a);
        let td_error = reward + params.gamma * bootstrap - old;
        let new_value = old + params.alpha * td_error;
        self.set(s, a, new_value);
        QUpdate {
            new_value,
            td_error,
        }
    }

    /// Writes the table as a text file: a `qtable <states> <actions>` header
    /// followed by one space-separated row per state. Values use the shortest
    /// decimal form that parses back to the identical bits.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "qtable {} {}", self.states, self.actions)?;
        for s in 0..self.states {
            let row = &self.values[s * self.actions..(s + 1) * self.actions];
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    write!(w, " ")?;
                }
                write!(w, "{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_from(r: impl BufRead, origin: &Path) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(origin, "empty q-table file"))?
            .map_err(|e| Error::io(origin, e))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("qtable") {
            return Err(Error::format(origin, "missing `qtable` header"));
        }
        let states: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format(origin, "bad state count in header"))?;
        let actions: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format(origin, "bad action count in header"))?;
        if parts.next().is_some() {
            return Err(Error::format(origin, "trailing tokens in header"));
        }
        if states == 0 || actions == 0 {
            return Err(Error::format(origin, "dimensions must be positive"));
        }
        let mut values = Vec::with_capacity(states * actions);
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(origin, format!("line {}: {e}", lineno + 2)))?;
            if row.len() != actions {
                return Err(Error::format(
                    origin,
                    format!(
                        "line {}: expected {} values, got {}",
                        lineno + 2,
                        actions,
                        row.len()
                    ),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(
                    origin,
                    format!("line {}: non-finite value", lineno + 2),
                ));
            }
            values.extend(row);
        }
        if values.len() != states * actions {
            return Err(Error::format(
                origin,
                format!("expected {} rows, got {}", states, values.len() / actions),
            ));
        }
        Ok(QTable {
            states,
            actions,
            values,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_with_row(row: &[f64]) -> QTable {
        let mut q = QTable::zeros(1, row.len());
        for (i, &v) in row.iter().enumerate() {
            q.set(StateId(0), ActionId(i), v);
        }
        q
    }

    #[test]
    fn greedy_picks_max() {
        let q = table_with_row(&[-1.0, -1.0, -0.5, -0.5]);
        assert_eq!(q.greedy_action(StateId(0)), ActionId(2));
    }

    #[test]
    fn greedy_ties_break_to_lowest_index() {
        let q = table_with_row(&[0.0, 0.0, 0.0]);
        assert_eq!(q.greedy_action(StateId(0)), ActionId(0));
        let q = table_with_row(&[1.0, 3.0, 3.0]);
        assert_eq!(q.greedy_action(StateId(0)), ActionId(1));
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn greedy_rejects_invalid_state() {
        let q = QTable::zeros(2, 2);
        q.greedy_action(StateId(2));
    }

    #[test]
    fn advantage_of_best_is_zero_others_negative() {
        let q = table_with_row(&[2.0, 1.0]);
        assert_eq!(q.advantage(StateId(0), ActionId(0)), 0.0);
        assert_eq!(q.advantage(StateId(0), ActionId(1)), -1.0);
    }

    #[test]
    fn q_update_from_zero_table() {
        let mut q = QTable::zeros(2, 2);
        let p = DiscountedParams::new(0.05, 0.95).unwrap();
        let u = q.q_update(StateId(0), ActionId(0), 1.0, StateId(1), false, &p);
        assert!((u.new_value - 0.05).abs() < 1e-15);
        assert!((u.td_error - 1.0).abs() < 1e-15);
        assert_eq!(q.get(StateId(0), ActionId(0)), u.new_value);
    }

    #[test]
    fn q_update_bootstraps_zero_on_terminal() {
        let mut q = QTable::zeros(2, 2);
        q.set(StateId(1), ActionId(0), 100.0);
        let p = DiscountedParams::new(0.5, 0.9).unwrap();
        let u = q.q_update(StateId(0), ActionId(0), 1.0, StateId(1), true, &p);
        assert!((u.new_value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn q_update_uses_next_state_max() {
        let mut q = QTable::zeros(2, 2);
        q.set(StateId(1), ActionId(1), 2.0);
        let p = DiscountedParams::new(0.5, 0.99).unwrap();
        let u = q.q_update(StateId(0), ActionId(0), 0.0, StateId(1), false, &p);
        assert!((u.new_value - 0.99).abs() < 1e-12);
    }

    #[test]
    fn params_validate_ranges() {
        assert!(DiscountedParams::new(0.0, 0.9).is_err());
        assert!(DiscountedParams::new(1.5, 0.9).is_err());
        assert!(DiscountedParams::new(0.1, -0.1).is_err());
        assert!(DiscountedParams::new(0.1, 1.1).is_err());
        assert!(DiscountedParams::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn save_load_round_trips_exact_bits() {
        let mut q = QTable::zeros(3, 4);
        let awkward = [
            0.1 + 0.2,
            -1.0 / 3.0,
            f64::MIN_POSITIVE,
            1e17 + 1.0,
            -0.000123456789012345,
            2.0f64.powi(-52),
        ];
        let mut k = 0;
        for s in 0..3 {
            for a in 0..4 {
                q.set(
                    StateId(s),
                    ActionId(a),
                    awkward[k % awkward.len()] * (k as f64 + 1.0),
                );
                k += 1;
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.qt");
        q.save(&path).unwrap();
        let loaded = QTable::load(&path).unwrap();
        assert_eq!(q, loaded);
    }

    #[test]
    fn load_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("bad_header.qt", "qtible 2 2\n0 0\n0 0\n"),
            ("short_row.qt", "qtable 2 2\n0 0\n0\n"),
            ("missing_row.qt", "qtable 2 2\n0 0\n"),
            ("not_a_number.qt", "qtable 1 2\n0 x\n"),
            ("non_finite.qt", "qtable 1 2\n0 inf\n"),
        ];
        for (name, contents) in cases {
            let path = dir.path().join(name);
            std::fs::write(&path, contents).unwrap();
            assert!(QTable::load(&path).is_err(), "{name} should fail");
        }
    }
}
