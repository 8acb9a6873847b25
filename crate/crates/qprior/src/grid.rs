//! Stochastic gridworld navigation with continuous poses over discrete cells.
//!
//! The agent occupies a continuous `(x, y)` pose inside a rectangular grid of
//! cells; the learning state is the containing cell. Moves displace the pose
//! by a unit vector plus independent uniform noise on both axes, so sub-cell
//! position drifts across steps and the same cell-level action can land in
//! different cells near walls.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId};
use crate::rng::RngStream;

pub const ACTION_COUNT: usize = 4;
pub const UP: ActionId = ActionId(0);
pub const RIGHT: ActionId = ActionId(1);
pub const DOWN: ActionId = ActionId(2);
pub const LEFT: ActionId = ActionId(3);

/// Magnitude bound of the per-axis uniform move noise.
pub const MOVE_NOISE: f64 = 0.2;

pub const GOAL_REWARD: f64 = 1.0;
pub const COLLISION_REWARD: f64 = -1.0;
pub const STEP_REWARD: f64 = -0.1;
pub const DEFAULT_COMMON_REWARD: f64 = 0.2;

/// Unit displacement of an action in `(dx, dy)` with `y` growing downward.
pub fn action_delta(a: ActionId) -> (i64, i64) {
    match a {
        UP => (0, -1),
        RIGHT => (1, 0),
        DOWN => (0, 1),
        LEFT => (-1, 0),
        _ => panic!("action {} out of range {ACTION_COUNT}", a.0),
    }
}

pub fn action_name(a: ActionId) -> &'static str {
    match a {
        UP => "up",
        RIGHT => "right",
        DOWN => "down",
        LEFT => "left",
        _ => panic!("action {} out of range {ACTION_COUNT}", a.0),
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum CellKind {
    Free,
    Obstacle,
    Goal,
    CommonReward,
}

impl CellKind {
    fn from_char(c: char) -> Option<CellKind> {
        match c {
            '.' => Some(CellKind::Free),
            '#' => Some(CellKind::Obstacle),
            'G' => Some(CellKind::Goal),
            'C' => Some(CellKind::CommonReward),
            _ => None,
        }
    }

    fn to_char(self) -> char {
        match self {
            CellKind::Free => '.',
            CellKind::Obstacle => '#',
            CellKind::Goal => 'G',
            CellKind::CommonReward => 'C',
        }
    }
}

/// Continuous position in map units; cell `(cx, cy)` spans
/// `[cx, cx+1) x [cy, cy+1)`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AgentPose {
    pub x: f64,
    pub y: f64,
}

/// Result of one environment step.
#[derive(Copy, Clone, Debug)]
pub struct StepOutcome {
    pub pose: AgentPose,
    pub state: StateId,
    pub reward: f64,
    pub terminal: bool,
    pub collided: bool,
}

/// A parsed grid map: cell kinds, the goal cell, and the optional
/// common-reward cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    width: usize,
    height: usize,
    cells: Vec<CellKind>,
    goal: (usize, usize),
    common: Option<(usize, usize)>,
    common_reward_value: f64,
}

/// Parses a map from its text form: one row per line, `.` free, `#` obstacle,
/// `G` the goal (exactly one), `C` an optional common-reward cell (at most
/// one). All rows must have equal width.
pub fn parse_map(text: &str) -> Result<MapSpec> {
    let mut cells = Vec::new();
    let mut width = 0usize;
    let mut height = 0usize;
    let mut goal = None;
    let mut common = None;
    for (y, line) in text.lines().enumerate() {
        if line.is_empty() && y > 0 && text.lines().skip(y).all(|l| l.is_empty()) {
            break; // tolerate trailing blank lines only
        }
        if y == 0 {
            width = line.chars().count();
            if width == 0 {
                return Err(Error::MapParse {
                    line: 1,
                    col: 1,
                    msg: "first row is empty".into(),
                });
            }
        }
        let row: Vec<char> = line.chars().collect();
        if row.len() != width {
            return Err(Error::MapParse {
                line: y + 1,
                col: row.len().min(width) + 1,
                msg: format!("row width {} does not match {}", row.len(), width),
            });
        }
        for (x, c) in row.into_iter().enumerate() {
            let kind = CellKind::from_char(c).ok_or(Error::MapParse {
                line: y + 1,
                col: x + 1,
                msg: format!("unknown cell character {c:?}"),
            })?;
            let duplicate = match kind {
                CellKind::Goal => goal
                    .replace((x, y))
                    .is_some()
                    .then_some("more than one goal cell"),
                CellKind::CommonReward => common
                    .replace((x, y))
                    .is_some()
                    .then_some("more than one common-reward cell"),
                _ => None,
            };
            if let Some(msg) = duplicate {
                return Err(Error::MapParse {
                    line: y + 1,
                    col: x + 1,
                    msg: msg.into(),
                });
            }
            cells.push(kind);
        }
        height = y + 1;
    }
    if height == 0 {
        return Err(Error::MapParse {
            line: 1,
            col: 1,
            msg: "empty map".into(),
        });
    }
    let goal = goal.ok_or(Error::MapParse {
        line: height,
        col: 1,
        msg: "map has no goal cell".into(),
    })?;
    let spec = MapSpec {
        width,
        height,
        cells,
        goal,
        common,
        common_reward_value: DEFAULT_COMMON_REWARD,
    };
    if spec.free_states().is_empty() {
        return Err(Error::MapParse {
            line: 1,
            col: 1,
            msg: "map has no free cell to start from".into(),
        });
    }
    Ok(spec)
}

pub fn load_map(path: impl AsRef<Path>) -> Result<MapSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_map(&text)
}

impl MapSpec {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Total number of cells; the state space of learned tables.
    pub fn state_count(&self) -> usize {
        self.width * self.height
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    pub fn goal_state(&self) -> StateId {
        self.state_at(self.goal.0, self.goal.1)
    }

    pub fn common(&self) -> Option<(usize, usize)> {
        self.common
    }

    pub fn common_state(&self) -> Option<StateId> {
        self.common.map(|(x, y)| self.state_at(x, y))
    }

    pub fn common_reward_value(&self) -> f64 {
        self.common_reward_value
    }

    /// Reward granted on every entry into the common-reward cell.
    pub fn with_common_reward_value(mut self, value: f64) -> MapSpec {
        self.common_reward_value = value;
        self
    }

    pub fn state_at(&self, x: usize, y: usize) -> StateId {
        assert!(
            x < self.width && y < self.height,
            "cell ({x}, {y}) out of bounds"
        );
        StateId(y * self.width + x)
    }

    pub fn coords(&self, s: StateId) -> (usize, usize) {
        assert!(s.0 < self.state_count(), "state {} out of range", s.0);
        (s.0 % self.width, s.0 / self.width)
    }

    pub fn kind(&self, x: usize, y: usize) -> CellKind {
        self.cells[y * self.width + x]
    }

    pub fn kind_at(&self, s: StateId) -> CellKind {
        let (x, y) = self.coords(s);
        self.kind(x, y)
    }

    /// True when the (possibly out-of-range) cell blocks movement.
    fn blocked(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return true;
        }
        self.kind(x as usize, y as usize) == CellKind::Obstacle
    }

    /// All `Free` cells; the start distribution of [`MapSpec::reset`].
    pub fn free_states(&self) -> Vec<StateId> {
        (0..self.state_count())
            .map(StateId)
            .filter(|&s| self.kind_at(s) == CellKind::Free)
            .collect()
    }

    /// Non-goal cells the agent can act from: `Free` and `CommonReward`.
    pub fn acting_states(&self) -> Vec<StateId> {
        (0..self.state_count())
            .map(StateId)
            .filter(|&s| matches!(self.kind_at(s), CellKind::Free | CellKind::CommonReward))
            .collect()
    }

    pub fn cell_center(&self, x: usize, y: usize) -> AgentPose {
        assert!(x < self.width && y < self.height);
        AgentPose {
            x: x as f64 + 0.5,
            y: y as f64 + 0.5,
        }
    }

    /// The cell containing a pose. Panics if the pose is out of bounds;
    /// poses produced by `reset`/`step` always stay inside.
    pub fn state_of_pose(&self, pose: AgentPose) -> StateId {
        let x = pose.x.floor() as i64;
        let y = pose.y.floor() as i64;
        assert!(
            !(x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64),
            "pose ({}, {}) outside the map",
            pose.x,
            pose.y
        );
        self.state_at(x as usize, y as usize)
    }

    /// Starts an episode at the center of a uniformly random free cell.
    pub fn reset(&self, rng: &mut RngStream) -> AgentPose {
        let free = self.free_states();
        assert!(!free.is_empty(), "map has no free cell");
        let s = free[rng.pick(free.len())];
        let (x, y) = self.coords(s);
        self.cell_center(x, y)
    }

    /// Moves the pose one unit in the action direction plus independent
    /// uniform noise on both axes. If the noisy candidate cell is an obstacle
    /// or out of bounds the move is a collision: the pose is unchanged and
    /// the reward is `COLLISION_REWARD`. Entering the goal ends the episode
    /// with `GOAL_REWARD`; entering the common-reward cell pays its value and
    /// continues; any other move pays `STEP_REWARD`.
    pub fn step(&self, pose: AgentPose, action: ActionId, rng: &mut RngStream) -> StepOutcome {
        let (dx, dy) = action_delta(action);
        let nx = pose.x + dx as f64 + rng.uniform(-MOVE_NOISE, MOVE_NOISE);
        let ny = pose.y + dy as f64 + rng.uniform(-MOVE_NOISE, MOVE_NOISE);
        let cx = nx.floor() as i64;
        let cy = ny.floor() as i64;
        if self.blocked(cx, cy) {
            return StepOutcome {
                pose,
                state: self.state_of_pose(pose),
                reward: COLLISION_REWARD,
                terminal: false,
                collided: true,
            };
        }
        let next = AgentPose { x: nx, y: ny };
        let state = self.state_at(cx as usize, cy as usize);
        let (reward, terminal) = match self.kind_at(state) {
            CellKind::Goal => (GOAL_REWARD, true),
            CellKind::CommonReward => (self.common_reward_value, false),
            CellKind::Free => (STEP_REWARD, false),
            CellKind::Obstacle => unreachable!("blocked() filtered obstacles"),
        };
        StepOutcome {
            pose: next,
            state,
            reward,
            terminal,
            collided: false,
        }
    }

    /// Actions whose zero-noise move from the cell center collides, i.e. the
    /// adjacent cell in that direction is an obstacle or out of bounds.
    pub fn collision_actions(&self, s: StateId) -> Vec<ActionId> {
        let (x, y) = self.coords(s);
        assert!(
            self.kind_at(s) != CellKind::Obstacle,
            "collision_actions queried for obstacle cell ({x}, {y})"
        );
        (0..ACTION_COUNT)
            .map(ActionId)
            .filter(|&a| {
                let (dx, dy) = action_delta(a);
                self.blocked(x as i64 + dx, y as i64 + dy)
            })
            .collect()
    }

    /// A copy of this map with the goal moved to `(x, y)`; the previous goal
    /// cell becomes free. The target must be a free cell.
    pub fn with_goal(&self, x: usize, y: usize) -> Result<MapSpec> {
        if x >= self.width || y >= self.height {
            return Err(Error::config(format!(
                "goal ({x}, {y}) outside {}x{} map",
                self.width, self.height
            )));
        }
        if self.kind(x, y) != CellKind::Free && (x, y) != self.goal {
            return Err(Error::config(format!(
                "goal ({x}, {y}) must be placed on a free cell, found {:?}",
                self.kind(x, y)
            )));
        }
        let mut out = self.clone();
        out.cells[self.goal.1 * self.width + self.goal.0] = CellKind::Free;
        out.cells[y * self.width + x] = CellKind::Goal;
        out.goal = (x, y);
        Ok(out)
    }

    /// Manhattan distance between two cells.
    pub fn manhattan(&self, a: StateId, b: StateId) -> usize {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx) + ay.abs_diff(by)
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height {
            for x in 0..self.width {
                write!(f, "{}", self.kind(x, y).to_char())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "\
.#G
...
.C.
";

    fn tiny() -> MapSpec {
        parse_map(TINY).unwrap()
    }

    #[test]
    fn parse_reads_dimensions_and_kinds() {
        let m = tiny();
        assert_eq!((m.width(), m.height()), (3, 3));
        assert_eq!(m.goal(), (2, 0));
        assert_eq!(m.common(), Some((1, 2)));
        assert_eq!(m.kind(1, 0), CellKind::Obstacle);
        assert_eq!(m.kind(0, 1), CellKind::Free);
        assert_eq!(m.state_count(), 9);
        assert_eq!(m.to_string(), TINY);
    }

    #[test]
    fn parse_reports_line_and_column() {
        let err = parse_map(".#\n.x\nG.\n").unwrap_err();
        match err {
            Error::MapParse { line, col, .. } => assert_eq!((line, col), (2, 2)),
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_map("..G\n..\n").unwrap_err();
        match err {
            Error::MapParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_requires_exactly_one_goal() {
        assert!(parse_map("...\n...\n").is_err());
        assert!(parse_map("G.G\n...\n").is_err());
        assert!(parse_map("GC.\n.C.\n").is_err());
    }

    #[test]
    fn state_indexing_is_row_major() {
        let m = tiny();
        assert_eq!(m.state_at(0, 0), StateId(0));
        assert_eq!(m.state_at(2, 1), StateId(5));
        assert_eq!(m.coords(StateId(5)), (2, 1));
    }

    #[test]
    fn reset_starts_only_on_free_cells() {
        let m = tiny();
        let mut rng = RngStream::new(0);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..500 {
            let pose = m.reset(&mut rng);
            let s = m.state_of_pose(pose);
            assert_eq!(m.kind_at(s), CellKind::Free);
            let (x, y) = m.coords(s);
            assert_eq!(pose, m.cell_center(x, y));
            seen.insert(s);
        }
        assert_eq!(
            seen.len(),
            m.free_states().len(),
            "all free cells reachable by reset"
        );
    }

    #[test]
    fn step_from_center_into_free_neighbor_always_lands_there() {
        let m = tiny();
        let mut rng = RngStream::new(1);
        for _ in 0..2000 {
            let out = m.step(m.cell_center(0, 1), RIGHT, &mut rng);
            assert!(!out.collided);
            assert_eq!(out.state, m.state_at(1, 1));
            assert_eq!(out.reward, STEP_REWARD);
            assert!(!out.terminal);
        }
    }

    #[test]
    fn step_from_center_into_wall_always_collides() {
        let m = tiny();
        let mut rng = RngStream::new(2);
        let start = m.cell_center(0, 0);
        for _ in 0..2000 {
            let out = m.step(start, RIGHT, &mut rng);
            assert!(out.collided);
            assert_eq!(out.pose, start, "collision leaves the pose unchanged");
            assert_eq!(out.state, m.state_at(0, 0));
            assert_eq!(out.reward, COLLISION_REWARD);
        }
        for _ in 0..2000 {
            let out = m.step(start, UP, &mut rng);
            assert!(out.collided, "leaving the map collides");
        }
    }

    #[test]
    fn goal_entry_is_terminal_and_common_is_not() {
        let m = tiny();
        let mut rng = RngStream::new(3);
        let out = m.step(m.cell_center(2, 1), UP, &mut rng);
        assert!(out.terminal);
        assert_eq!(out.reward, GOAL_REWARD);
        assert_eq!(out.state, m.goal_state());

        let out = m.step(m.cell_center(1, 1), DOWN, &mut rng);
        assert!(!out.terminal);
        assert_eq!(out.reward, DEFAULT_COMMON_REWARD);
        assert_eq!(out.state, m.common_state().unwrap());

        let m2 = tiny().with_common_reward_value(0.0);
        let out = m2.step(m2.cell_center(1, 1), DOWN, &mut rng);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn drifted_pose_near_wall_sometimes_collides() {
        // From x = 1.9 a rightward move straddles the boundary of cell 2 and
        // the wall imagined at cell 3, so the noisy candidate splits between
        // passing and colliding.
        let m = parse_map("...#\nG...\n").unwrap();
        let mut rng = RngStream::new(4);
        let pose = AgentPose { x: 1.9, y: 0.5 };
        let mut collided = 0;
        let mut passed = 0;
        for _ in 0..2000 {
            let out = m.step(pose, RIGHT, &mut rng);
            if out.collided {
                collided += 1;
            } else {
                passed += 1;
                assert_eq!(out.state, m.state_at(2, 0));
            }
        }
        assert!(collided > 100, "noise should cause collisions ({collided})");
        assert!(
            passed > 100,
            "noise should also let the move pass ({passed})"
        );
    }

    #[test]
    fn noisy_moves_stay_within_one_cell_of_the_intended_cell() {
        let m = parse_map("....\n.G..\n....\n....\n").unwrap();
        let mut rng = RngStream::new(5);
        let mut pose = m.cell_center(0, 0);
        for _ in 0..100_000 {
            let s = m.state_of_pose(pose);
            let (x, y) = m.coords(s);
            let a = ActionId(rng.pick(ACTION_COUNT));
            let (dx, dy) = action_delta(a);
            let out = m.step(pose, a, &mut rng);
            let (ox, oy) = m.coords(out.state);
            if out.collided {
                assert_eq!(out.state, s);
            } else {
                let ix = x as i64 + dx;
                let iy = y as i64 + dy;
                assert!(
                    (ox as i64 - ix).abs() <= 1 && (oy as i64 - iy).abs() <= 1,
                    "landed at ({ox}, {oy}), intended ({ix}, {iy})"
                );
            }
            if out.terminal {
                pose = m.reset(&mut rng);
            } else {
                pose = out.pose;
            }
        }
    }

    #[test]
    fn collision_actions_match_adjacency() {
        let m = tiny();
        // (0, 0): wall right, out of bounds up and left.
        assert_eq!(m.collision_actions(m.state_at(0, 0)), vec![UP, RIGHT, LEFT]);
        // (1, 1): wall above.
        assert_eq!(m.collision_actions(m.state_at(1, 1)), vec![UP]);
        // common-reward cell (1, 2): nothing adjacent blocks except down.
        assert_eq!(m.collision_actions(m.state_at(1, 2)), vec![DOWN]);
    }

    #[test]
    fn with_goal_moves_the_goal() {
        let m = tiny();
        let moved = m.with_goal(0, 2).unwrap();
        assert_eq!(moved.goal(), (0, 2));
        assert_eq!(moved.kind(2, 0), CellKind::Free);
        assert_eq!(moved.kind(0, 2), CellKind::Goal);
        assert!(m.with_goal(1, 0).is_err(), "goal on obstacle must fail");
        assert!(m.with_goal(9, 9).is_err(), "goal out of bounds must fail");
        assert!(m.with_goal(1, 2).is_err(), "goal on common cell must fail");
        let same = m.with_goal(2, 0).unwrap();
        assert_eq!(same, m);
    }

    #[test]
    fn manhattan_distance() {
        let m = tiny();
        assert_eq!(m.manhattan(m.state_at(0, 0), m.state_at(2, 2)), 4);
        assert_eq!(m.manhattan(m.state_at(1, 1), m.state_at(1, 1)), 0);
    }
}
