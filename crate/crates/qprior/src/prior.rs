//! Distilling a safety prior from the action values of solved tasks.
//!
//! Each source task scores a state-action pair by how much worse the action
//! is than the state's best, scaled by the state's best value. Pairs whose
//! scores are both *large* and *agreed on* across tasks — measured by the
//! product of the normalized entropy of the softmaxed scores and their raw
//! mean — are treated as consistently undesirable. Those pairs receive a
//! pseudo-reward distilled from the sources' own implied rewards, and a
//! task-independent prior Q-table is learned from it one transition at a
//! time. A mirrored "desirability" scoring distils consistently *good*
//! behaviour instead.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, DiscountedParams, QTable, QUpdate, StateId};

/// Rows whose largest action value is this close to zero cannot be used for
/// scaling; their score is defined as zero and the event is counted.
pub const SCALE_GUARD: f64 = 1e-12;

/// Which direction of consensus the prior captures.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum PriorMode {
    /// Score pairs by scaled distance below the row maximum (bad actions).
    AvoidUndesirable,
    /// Score pairs by scaled distance above the row minimum (good actions).
    SeekDesirable,
}

impl PriorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PriorMode::AvoidUndesirable => "avoid",
            PriorMode::SeekDesirable => "seek",
        }
    }
}

impl FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avoid" => Ok(PriorMode::AvoidUndesirable),
            "seek" => Ok(PriorMode::SeekDesirable),
            other => Err(Error::config(format!(
                "unknown mode {other:?}; expected \"avoid\" or \"seek\""
            ))),
        }
    }
}

impl fmt::Display for PriorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// True when the row's maximum is too close to zero to scale by.
pub fn scale_guard_trips(q: &QTable, s: StateId) -> bool {
    q.max_q(s).abs() <= SCALE_GUARD
}

/// `|(Q(s,a) - max_a' Q(s,a')) / max_a' Q(s,a')|`: the advantage magnitude
/// scaled by the row maximum. Zero when the guard trips.
pub fn scaled_undesirability(q: &QTable, s: StateId, a: ActionId) -> f64 {
    let m = q.max_q(s);
    if m.abs() <= SCALE_GUARD {
        return 0.0;
    }
    ((q.get(s, a) - m) / m).abs()
}

/// `|(Q(s,a) - min_a' Q(s,a')) / max_a' Q(s,a')|`: distance above the row
/// minimum, scaled by the row maximum. Zero when the guard trips.
pub fn scaled_desirability(q: &QTable, s: StateId, a: ActionId) -> f64 {
    let m = q.max_q(s);
    if m.abs() <= SCALE_GUARD {
        return 0.0;
    }
    ((q.get(s, a) - q.min_q(s)) / m).abs()
}

/// Softmax over the scores. Shift-invariant and numerically safe for large
/// inputs (the maximum is subtracted before exponentiation).
pub fn softmax_normalize(w: &[f64]) -> Result<Vec<f64>> {
    if w.len() < 2 {
        return Err(Error::config(format!(
            "softmax needs at least 2 entries, got {}",
            w.len()
        )));
    }
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = w.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Entropy of a distribution divided by `ln N`, so the result lies in
/// `[0, 1]` with 1 for the uniform distribution. Zero entries contribute
/// nothing (`0 * ln 0 = 0`).
pub fn normalized_entropy(p: &[f64]) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::config(format!(
            "normalized entropy needs at least 2 entries, got {}",
            p.len()
        )));
    }
    let h: f64 = p
        .iter()
        .map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 })
        .sum();
    Ok(h / (p.len() as f64).ln())
}

/// The consensus filter: a pair is kept when the normalized entropy of its
/// softmaxed scores times the mean of the raw scores exceeds the threshold.
pub fn consensus_selected(entropy: f64, mean_score: f64, threshold: f64) -> bool {
    entropy * mean_score > threshold
}

/// The meaningful threshold range `(0, |(r_min - r_max) / r_max|)` for tasks
/// whose rewards span `[r_min, r_max]`. The upper end is the largest scaled
/// score a single transition can produce.
pub fn threshold_bounds(r_min: f64, r_max: f64) -> Result<(f64, f64)> {
    if r_max == 0.0 {
        return Err(Error::config(
            "threshold bounds are undefined when the maximum reward is zero",
        ));
    }
    Ok((0.0, ((r_min - r_max) / r_max).abs()))
}

/// The one-step reward implied by an optimal value table:
/// `Q(s,a) - gamma * max_a' Q(s',a')`, bootstrapping zero on terminal moves.
pub fn infer_reward(
    q: &QTable,
    s: StateId,
    a: ActionId,
    next: StateId,
    terminal: bool,
    gamma: f64,
) -> f64 {
    let bootstrap = if terminal { 0.0 } else { q.max_q(next) };
    q.get(s, a) - gamma * bootstrap
}

/// A solved task's value table plus a label used in sidecar metadata.
#[derive(Clone, Debug)]
pub struct SourceTable {
    pub label: String,
    pub table: QTable,
}

impl SourceTable {
    pub fn new(label: impl Into<String>, table: QTable) -> Result<Self> {
        let label = label.into();
        if label.is_empty() || label.contains([',', '\n', '=']) {
            return Err(Error::config(format!(
                "source label {label:?} must be non-empty and free of ',', '=' and newlines"
            )));
        }
        Ok(SourceTable { label, table })
    }
}

/// Result of one prior-learning step.
#[derive(Copy, Clone, Debug)]
pub struct PriorStep {
    pub selected: bool,
    pub pseudo_reward: f64,
    pub td_error: f64,
}

/// Update counters kept while a prior is learned.
#[derive(Copy, Clone, Debug, Default)]
pub struct PriorStats {
    /// Transitions processed by `update_step`.
    pub updates: u64,
    /// Transitions whose pair passed the consensus filter.
    pub selected_updates: u64,
    /// (source, state) scale-guard hits encountered while scoring.
    pub zero_max_skips: u64,
}

/// The prior under construction: the source tables it is distilled from, the
/// consensus threshold, and the prior Q-table learned so far.
#[derive(Clone, Debug)]
pub struct PriorModel {
    q: QTable,
    sources: Vec<SourceTable>,
    threshold: f64,
    params: DiscountedParams,
    mode: PriorMode,
    stats: PriorStats,
}

impl PriorModel {
    /// Requires at least two sources with identical dimensions.
    pub fn new(
        sources: Vec<SourceTable>,
        threshold: f64,
        params: DiscountedParams,
        mode: PriorMode,
    ) -> Result<Self> {
        if sources.len() < 2 {
            return Err(Error::config(format!(
                "a prior needs at least 2 source tasks, got {}",
                sources.len()
            )));
        }
        let states = sources[0].table.state_count();
        let actions = sources[0].table.action_count();
        for s in &sources[1..] {
            if s.table.state_count() != states || s.table.action_count() != actions {
                return Err(Error::dimension(format!(
                    "source {:?} is {}x{}, expected {}x{}",
                    s.label,
                    s.table.state_count(),
                    s.table.action_count(),
                    states,
                    actions
                )));
            }
        }
        if !threshold.is_finite() || threshold < 0.0 {
            return Err(Error::config(format!(
                "threshold must be finite and non-negative, got {threshold}"
            )));
        }
        Ok(PriorModel {
            q: QTable::zeros(states, actions),
            sources,
            threshold,
            params,
            mode,
            stats: PriorStats::default(),
        })
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn into_q(self) -> QTable {
        self.q
    }

    pub fn sources(&self) -> &[SourceTable] {
        &self.sources
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn params(&self) -> DiscountedParams {
        self.params
    }

    pub fn mode(&self) -> PriorMode {
        self.mode
    }

    pub fn stats(&self) -> PriorStats {
        self.stats
    }

    /// Replaces the prior Q-table (e.g. to warm-start from a stored prior).
    pub fn set_q(&mut self, q: QTable) -> Result<()> {
        if q.state_count() != self.q.state_count() || q.action_count() != self.q.action_count() {
            return Err(Error::dimension(format!(
                "prior table is {}x{}, expected {}x{}",
                q.state_count(),
                q.action_count(),
                self.q.state_count(),
                self.q.action_count()
            )));
        }
        self.q = q;
        Ok(())
    }

    /// Per-source scores of `(s, a)` under this prior's mode, plus the number
    /// of sources whose scale guard tripped.
    pub fn scores(&self, s: StateId, a: ActionId) -> (Vec<f64>, u64) {
        let mut guard_hits = 0;
        let scores = self
            .sources
            .iter()
            .map(|src| {
                if scale_guard_trips(&src.table, s) {
                    guard_hits += 1;
                    0.0
                } else {
                    match self.mode {
                        PriorMode::AvoidUndesirable => scaled_undesirability(&src.table, s, a),
                        PriorMode::SeekDesirable => scaled_desirability(&src.table, s, a),
                    }
                }
            })
            .collect();
        (scores, guard_hits)
    }

    /// Whether the pair passes the consensus filter. Deterministic in the
    /// source tables; independent of the prior Q-table.
    pub fn selected(&self, s: StateId, a: ActionId) -> bool {
        let (scores, _) = self.scores(s, a);
        let softmaxed = softmax_normalize(&scores).expect("at least 2 sources by construction");
        let entropy = normalized_entropy(&softmaxed).expect("at least 2 sources by construction");
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        consensus_selected(entropy, mean, self.threshold)
    }

    /// All selected pairs among the given states, in input order.
    pub fn selected_pairs(
        &self,
        states: impl IntoIterator<Item = StateId>,
    ) -> Vec<(StateId, ActionId)> {
        let actions = self.q.action_count();
        let mut out = Vec::new();
        for s in states {
            for a in (0..actions).map(ActionId) {
                if self.selected(s, a) {
                    out.push((s, a));
                }
            }
        }
        out
    }

    /// The pseudo-reward of a transition: zero unless the pair is selected,
    /// otherwise the softmax-weighted mean of the sources' implied rewards,
    /// clamped to `[-1, 1]`.
    pub fn pseudo_reward(&self, s: StateId, a: ActionId, next: StateId, terminal: bool) -> f64 {
        self.pseudo_reward_parts(s, a, next, terminal).0
    }

    fn pseudo_reward_parts(
        &self,
        s: StateId,
        a: ActionId,
        next: StateId,
        terminal: bool,
    ) -> (f64, bool, u64) {
        let (scores, guard_hits) = self.scores(s, a);
        let softmaxed = softmax_normalize(&scores).expect("at least 2 sources by construction");
        let entropy = normalized_entropy(&softmaxed).expect("at least 2 sources by construction");
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        if !consensus_selected(entropy, mean, self.threshold) {
            return (0.0, false, guard_hits);
        }
        let blended: f64 = self
            .sources
            .iter()
            .zip(&softmaxed)
            .map(|(src, &weight)| {
                weight * infer_reward(&src.table, s, a, next, terminal, self.params.gamma)
            })
            .sum();
        (blended.clamp(-1.0, 1.0), true, guard_hits)
    }

    /// One prior-learning step on an observed transition: computes the
    /// pseudo-reward and applies a Q-learning update to the prior table.
    pub fn update_step(
        &mut self,
        s: StateId,
        a: ActionId,
        next: StateId,
        terminal: bool,
    ) -> PriorStep {
        let (pseudo_reward, selected, guard_hits) = self.pseudo_reward_parts(s, a, next, terminal);
        let QUpdate { td_error, .. } =
            self.q
                .q_update(s, a, pseudo_reward, next, terminal, &self.params);
        self.stats.updates += 1;
        self.stats.selected_updates += selected as u64;
        self.stats.zero_max_skips += guard_hits;
        PriorStep {
            selected,
            pseudo_reward,
            td_error,
        }
    }

    /// Writes the prior table to `path` and its metadata (threshold, update
    /// parameters, mode, source labels) to `<path>.meta`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.q.save(path)?;
        let labels: Vec<&str> = self.sources.iter().map(|s| s.label.as_str()).collect();
        let meta = format!(
            "threshold_t={}\nalpha={}\ngamma={}\nmode={}\nsources={}\n",
            self.threshold,
            self.params.alpha,
            self.params.gamma,
            self.mode,
            labels.join(",")
        );
        let meta_path = meta_path(path);
        fs::write(&meta_path, meta).map_err(|e| Error::io(meta_path, e))
    }
}

/// Metadata stored next to a saved prior table.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorMeta {
    pub threshold: f64,
    pub params: DiscountedParams,
    pub mode: PriorMode,
    pub source_labels: Vec<String>,
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta");
    os.into()
}

/// Loads a prior table and its `.meta` sidecar written by [`PriorModel::save`].
pub fn load_prior(path: impl AsRef<Path>) -> Result<(QTable, PriorMeta)> {
    let path = path.as_ref();
    let q = QTable::load(path)?;
    let meta_path = meta_path(path);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut threshold = None;
    let mut alpha = None;
    let mut gamma = None;
    let mut mode = None;
    let mut sources = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::format(&meta_path, format!("line {}: expected key=value", i + 1))
        })?;
        let bad = |what: &str| Error::format(&meta_path, format!("line {}: bad {what}", i + 1));
        match key {
            "threshold_t" => threshold = Some(value.parse().map_err(|_| bad("threshold"))?),
            "alpha" => alpha = Some(value.parse().map_err(|_| bad("alpha"))?),
            "gamma" => gamma = Some(value.parse().map_err(|_| bad("gamma"))?),
            "mode" => mode = Some(value.parse().map_err(|_| bad("mode"))?),
            "sources" => sources = Some(value.split(',').map(str::to_owned).collect::<Vec<_>>()),
            other => {
                return Err(Error::format(
                    &meta_path,
                    format!("line {}: unknown key {other:?}", i + 1),
                ))
            }
        }
    }
    let missing = |what: &str| Error::format(&meta_path, format!("missing key {what:?}"));
    Ok((
        q,
        PriorMeta {
            threshold: threshold.ok_or_else(|| missing("threshold_t"))?,
            params: DiscountedParams::new(
                alpha.ok_or_else(|| missing("alpha"))?,
                gamma.ok_or_else(|| missing("gamma"))?,
            )?,
            mode: mode.ok_or_else(|| missing("mode"))?,
            source_labels: sources.ok_or_else(|| missing("sources"))?,
        },
    ))
}
