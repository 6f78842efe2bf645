//! Finite two-dimensional Cartesian frames.
//!
//! A frame pairs an agent's actions with environment states; the outcome
//! matrix says which world each pair produces. All operators here are
//! decided by exhaustive search, which is exact for finite frames.
//!
//! The operators, for a property set `S ⊆ W`:
//!
//! * **ensure**: some action lands in `S` against every environment.
//! * **prevent**: some action stays out of `S` against every environment.
//! * **control**: both of the above.
//! * **observe**: for every pair of actions `(a0, a1)` there is an action
//!   that behaves like `a0` wherever the outcome is in `S` and like `a1`
//!   wherever it is not, column by column.
//! * **inevitable**: every reachable world is in `S`, and the agent has at
//!   least one action.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::worldset::{all_subsets, WorldId, WorldSet};

/// Enumeration refuses universes larger than this unless told otherwise.
pub const DEFAULT_ENUMERATION_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EnvId(pub usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error("unknown world `{0}`")]
    UnknownWorld(String),
    #[error("duplicate {kind} label `{label}`")]
    DuplicateLabel { kind: &'static str, label: String },
    #[error("a frame needs at least one environment")]
    NoEnvironments,
    #[error("outcome matrix has {found} entries, expected {expected}")]
    MatrixShape { expected: usize, found: usize },
    #[error("world index {0} does not belong to this frame")]
    ForeignWorld(usize),
    #[error(
        "{worlds} worlds exceeds the enumeration cap of {cap}; query membership per set instead"
    )]
    EnumerationCap { worlds: usize, cap: usize },
}

/// The predicates that can be enumerated as set families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameOperator {
    Ensure,
    Prevent,
    Control,
    Observe,
    Inevitable,
}

impl FrameOperator {
    pub const ALL: [FrameOperator; 5] = [
        FrameOperator::Ensure,
        FrameOperator::Prevent,
        FrameOperator::Control,
        FrameOperator::Observe,
        FrameOperator::Inevitable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FrameOperator::Ensure => "ensure",
            FrameOperator::Prevent => "prevent",
            FrameOperator::Control => "control",
            FrameOperator::Observe => "observe",
            FrameOperator::Inevitable => "inevitable",
        }
    }
}

impl fmt::Display for FrameOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrameOperator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FrameOperator::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| format!("unknown frame operator `{s}`"))
    }
}

/// A finite Cartesian frame `(A, E, ·)` over a world set `W`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CartesianFrame {
    actions: Vec<String>,
    envs: Vec<String>,
    worlds: Vec<String>,
    // Row-major: outcome[a * envs.len() + e].
    outcome: Vec<usize>,
}

pub(crate) fn check_unique(kind: &'static str, labels: &[String]) -> Result<(), FrameError> {
    let mut seen = HashSet::new();
    for label in labels {
        if !seen.insert(label.as_str()) {
            return Err(FrameError::DuplicateLabel {
                kind,
                label: label.clone(),
            });
        }
    }
    Ok(())
}

fn labels<I, S>(items: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    items.into_iter().map(Into::into).collect()
}

impl CartesianFrame {
    /// Builds a frame from labels and a row-major matrix of world labels.
    ///
    /// Every matrix entry must name a member of `worlds`; `worlds` may hold
    /// extra worlds that no pair reaches.
    pub fn new<A, E, W, M, S1, S2, S3, S4>(
        actions: A,
        envs: E,
        worlds: W,
        matrix: M,
    ) -> Result<Self, FrameError>
    where
        A: IntoIterator<Item = S1>,
        E: IntoIterator<Item = S2>,
        W: IntoIterator<Item = S3>,
        M: IntoIterator<Item = S4>,
        S1: Into<String>,
        S2: Into<String>,
        S3: Into<String>,
        S4: Into<String>,
    {
        let actions = labels(actions);
        let envs = labels(envs);
        let worlds = labels(worlds);
        check_unique("world", &worlds)?;
        let outcome = labels(matrix)
            .into_iter()
            .map(|w| {
                worlds
                    .iter()
                    .position(|x| *x == w)
                    .ok_or(FrameError::UnknownWorld(w))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_indices(actions, envs, worlds, outcome)
    }

    /// Builds a frame whose world set is the distinct matrix entries, in
    /// order of first appearance.
    pub fn from_matrix<A, E, M, S1, S2, S3>(
        actions: A,
        envs: E,
        matrix: M,
    ) -> Result<Self, FrameError>
    where
        A: IntoIterator<Item = S1>,
        E: IntoIterator<Item = S2>,
        M: IntoIterator<Item = S3>,
        S1: Into<String>,
        S2: Into<String>,
        S3: Into<String>,
    {
        let matrix = labels(matrix);
        let mut worlds: Vec<String> = Vec::new();
        for w in &matrix {
            if !worlds.contains(w) {
                worlds.push(w.clone());
            }
        }
        Self::new(actions, envs, worlds, matrix)
    }

    /// Builds a frame from world indices directly.
    pub fn from_indices(
        actions: Vec<String>,
        envs: Vec<String>,
        worlds: Vec<String>,
        outcome: Vec<usize>,
    ) -> Result<Self, FrameError> {
        check_unique("action", &actions)?;
        check_unique("environment", &envs)?;
        check_unique("world", &worlds)?;
        if envs.is_empty() {
            return Err(FrameError::NoEnvironments);
        }
        let expected = actions.len() * envs.len();
        if outcome.len() != expected {
            return Err(FrameError::MatrixShape {
                expected,
                found: outcome.len(),
            });
        }
        if let Some(&bad) = outcome.iter().find(|&&w| w >= worlds.len()) {
            return Err(FrameError::ForeignWorld(bad));
        }
        Ok(CartesianFrame {
            actions,
            envs,
            worlds,
            outcome,
        })
    }

    /// An `rows × cols` frame with every cell a distinct world.
    ///
    /// Actions are `a1..`, environments `e1..` and worlds `w1..` in
    /// row-major order, so `distinct_grid(3, 3)` is the usual nine-world
    /// illustration where `a1 · e2 = w2`.
    pub fn distinct_grid(rows: usize, cols: usize) -> Result<Self, FrameError> {
        let actions = (1..=rows).map(|i| format!("a{i}"));
        let envs = (1..=cols).map(|j| format!("e{j}"));
        let worlds: Vec<String> = (1..=rows * cols).map(|k| format!("w{k}")).collect();
        Self::new(actions, envs, worlds.clone(), worlds)
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn envs(&self) -> &[String] {
        &self.envs
    }

    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    /// Row-major outcome indices.
    pub fn outcome_table(&self) -> &[usize] {
        &self.outcome
    }

    pub fn action(&self, label: &str) -> Result<ActionId, FrameError> {
        self.actions
            .iter()
            .position(|a| a == label)
            .map(ActionId)
            .ok_or_else(|| FrameError::UnknownAction(label.to_string()))
    }

    pub fn env(&self, label: &str) -> Result<EnvId, FrameError> {
        self.envs
            .iter()
            .position(|e| e == label)
            .map(EnvId)
            .ok_or_else(|| FrameError::UnknownEnv(label.to_string()))
    }

    pub fn world(&self, label: &str) -> Result<WorldId, FrameError> {
        self.worlds
            .iter()
            .position(|w| w == label)
            .map(WorldId)
            .ok_or_else(|| FrameError::UnknownWorld(label.to_string()))
    }

    pub fn world_label(&self, world: WorldId) -> &str {
        &self.worlds[world.0]
    }

    /// Builds a property set from world labels.
    pub fn world_set<I, S>(&self, members: I) -> Result<WorldSet, FrameError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = WorldSet::empty(self.worlds.len());
        for m in members {
            set.insert(self.world(m.as_ref())?);
        }
        Ok(set)
    }

    pub fn set_labels(&self, set: &WorldSet) -> Vec<String> {
        set.iter().map(|w| self.worlds[w.0].clone()).collect()
    }

    pub fn full_set(&self) -> WorldSet {
        WorldSet::full(self.worlds.len())
    }

    /// The world `a · e`.
    pub fn outcome(&self, a: ActionId, e: EnvId) -> Result<WorldId, FrameError> {
        if a.0 >= self.actions.len() {
            return Err(FrameError::UnknownAction(format!("#{}", a.0)));
        }
        if e.0 >= self.envs.len() {
            return Err(FrameError::UnknownEnv(format!("#{}", e.0)));
        }
        Ok(WorldId(self.outcome[a.0 * self.envs.len() + e.0]))
    }

    /// `outcome` addressed by labels.
    pub fn outcome_by_label(&self, action: &str, env: &str) -> Result<&str, FrameError> {
        let w = self.outcome(self.action(action)?, self.env(env)?)?;
        Ok(self.world_label(w))
    }

    fn row(&self, a: usize) -> &[usize] {
        let n = self.envs.len();
        &self.outcome[a * n..(a + 1) * n]
    }

    fn check(&self, set: &WorldSet) -> Result<(), FrameError> {
        match set.max_member() {
            Some(w) if w.0 >= self.worlds.len() => Err(FrameError::ForeignWorld(w.0)),
            _ => Ok(()),
        }
    }

    fn has(set: &WorldSet, w: usize) -> bool {
        set.contains(WorldId(w))
    }

    /// Worlds reached by some action against some environment.
    pub fn image(&self) -> WorldSet {
        WorldSet::from_ids(self.worlds.len(), self.outcome.iter().map(|&w| WorldId(w)))
    }

    pub fn ensures(&self, set: &WorldSet) -> Result<bool, FrameError> {
        self.check(set)?;
        Ok((0..self.actions.len()).any(|a| self.row(a).iter().all(|&w| Self::has(set, w))))
    }

    pub fn prevents(&self, set: &WorldSet) -> Result<bool, FrameError> {
        self.check(set)?;
        Ok((0..self.actions.len()).any(|a| self.row(a).iter().all(|&w| !Self::has(set, w))))
    }

    pub fn controls(&self, set: &WorldSet) -> Result<bool, FrameError> {
        Ok(self.ensures(set)? && self.prevents(set)?)
    }

    pub fn observes(&self, set: &WorldSet) -> Result<bool, FrameError> {
        self.check(set)?;
        let n = self.actions.len();
        let realizes_conditional = |a: usize, a0: usize, a1: usize| {
            let (row, r0, r1) = (self.row(a), self.row(a0), self.row(a1));
            (0..self.envs.len()).all(|e| {
                let w = row[e];
                if Self::has(set, w) {
                    w == r0[e]
                } else {
                    w == r1[e]
                }
            })
        };
        Ok((0..n).all(|a0| (0..n).all(|a1| (0..n).any(|a| realizes_conditional(a, a0, a1)))))
    }

    pub fn inevitable(&self, set: &WorldSet) -> Result<bool, FrameError> {
        self.check(set)?;
        Ok(!self.actions.is_empty() && self.image().is_subset(set))
    }

    /// Evaluates one of the enumerable predicates.
    pub fn holds(&self, op: FrameOperator, set: &WorldSet) -> Result<bool, FrameError> {
        match op {
            FrameOperator::Ensure => self.ensures(set),
            FrameOperator::Prevent => self.prevents(set),
            FrameOperator::Control => self.controls(set),
            FrameOperator::Observe => self.observes(set),
            FrameOperator::Inevitable => self.inevitable(set),
        }
    }

    /// All property sets satisfying `op`, ordered by bitmask.
    pub fn enumerate(&self, op: FrameOperator) -> Result<Vec<WorldSet>, FrameError> {
        self.enumerate_with_cap(op, DEFAULT_ENUMERATION_CAP)
    }

    pub fn enumerate_with_cap(
        &self,
        op: FrameOperator,
        cap: usize,
    ) -> Result<Vec<WorldSet>, FrameError> {
        let n = self.worlds.len();
        if n > cap || n >= 64 {
            return Err(FrameError::EnumerationCap { worlds: n, cap });
        }
        let mut family = Vec::new();
        for set in all_subsets(n) {
            if self.holds(op, &set)? {
                family.push(set);
            }
        }
        Ok(family)
    }
}
