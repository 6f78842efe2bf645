//! Cartesian objects: frames scaled to `n` agents.
//!
//! An object holds one action set per agent, a shared environment, and a
//! joint outcome table over the full product `A¹ × … × Aⁿ × E`. Per-agent
//! operators treat everything outside the chosen agent (the environment and
//! every other agent) as that agent's environment, so "for all `e`" below
//! always means "for every joint choice of the others and every environment
//! state".
//!
//! Probabilistic operators weight the others' choices by a
//! [`BehaviorProfile`], a product of independent distributions.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{check_unique, ActionId, CartesianFrame, EnvId, FrameError};
use crate::worldset::{WorldId, WorldSet};

/// Distributions must sum to one within this tolerance.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("an object needs at least one agent")]
    NoAgents,
    #[error("agent {0} has no actions")]
    EmptyAgent(usize),
    #[error("agent index {index} is out of range 1..={agents}")]
    UnknownAgent { index: usize, agents: usize },
    #[error("joint action has {found} entries, the object has {expected} agents")]
    Arity { expected: usize, found: usize },
    #[error("action index {action} is not an action of agent {agent}")]
    ForeignAction { agent: usize, action: usize },
    #[error("outcome table has {found} entries, expected {expected}")]
    TableShape { expected: usize, found: usize },
    #[error("behavior profile has no distribution for agent {0}")]
    MissingDistribution(usize),
    #[error("invalid distribution for {owner}: {reason}")]
    Distribution { owner: String, reason: String },
    #[error("threshold {0} is outside [0, 1]")]
    Theta(f64),
    #[error("the new agent needs at least one action")]
    EmptyExtension,
    #[error("extension map is undefined at cell {0}")]
    PartialExtension(String),
}

/// One-based agent index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentIndex(pub usize);

impl fmt::Display for AgentIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A certainty threshold in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Theta(f64);

impl Theta {
    pub fn new(value: f64) -> Result<Self, ObjectError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Theta(value))
        } else {
            Err(ObjectError::Theta(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Probability vector over a finite, indexed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>, owner: &str) -> Result<Self, ObjectError> {
        let bad = |reason: String| ObjectError::Distribution {
            owner: owner.to_string(),
            reason,
        };
        if probs.is_empty() {
            return Err(bad("empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(bad(format!("entry {p} is negative or not finite")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(bad(format!("sums to {total}, not 1")));
        }
        Ok(Distribution(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Distribution(vec![1.0 / n as f64; n])
    }

    /// All mass on `index`.
    pub fn point(n: usize, index: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Distribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_full_support(&self) -> bool {
        self.0.iter().all(|&p| p > 0.0)
    }
}

/// Independent action distributions for agents plus an environment
/// distribution.
///
/// An agent's entry may be absent when that agent is the one being
/// queried; operators report [`ObjectError::MissingDistribution`] otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub agents: Vec<Option<Distribution>>,
    pub env: Distribution,
}

impl BehaviorProfile {
    /// Uniform over every agent's actions and the environment.
    pub fn uniform(obj: &CartesianObject) -> Self {
        BehaviorProfile {
            agents: obj
                .agents
                .iter()
                .map(|a| Some(Distribution::uniform(a.len())))
                .collect(),
            env: Distribution::uniform(obj.envs.len()),
        }
    }

    pub fn with_agent(mut self, agent: AgentIndex, dist: Distribution) -> Self {
        if self.agents.len() < agent.0 {
            self.agents.resize(agent.0, None);
        }
        self.agents[agent.0 - 1] = Some(dist);
        self
    }

    /// True when every present distribution puts positive mass everywhere.
    pub fn has_full_support(&self) -> bool {
        self.env.has_full_support()
            && self
                .agents
                .iter()
                .flatten()
                .all(Distribution::has_full_support)
    }
}

/// An `n`-agent Cartesian object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CartesianObject {
    agents: Vec<Vec<String>>,
    envs: Vec<String>,
    worlds: Vec<String>,
    // Row-major over (agent 1, …, agent n, env).
    table: Vec<usize>,
}

impl CartesianObject {
    /// Builds an object from labels and a row-major table of world labels.
    ///
    /// The world set is `worlds` when given, else the distinct table entries
    /// in order of first appearance.
    pub fn new(
        agents: Vec<Vec<String>>,
        envs: Vec<String>,
        worlds: Option<Vec<String>>,
        table: Vec<String>,
    ) -> Result<Self, ObjectError> {
        let worlds = match worlds {
            Some(w) => w,
            None => {
                let mut w: Vec<String> = Vec::new();
                for x in &table {
                    if !w.contains(x) {
                        w.push(x.clone());
                    }
                }
                w
            }
        };
        check_unique("world", &worlds)?;
        let table = table
            .into_iter()
            .map(|w| {
                worlds
                    .iter()
                    .position(|x| *x == w)
                    .ok_or(FrameError::UnknownWorld(w))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_indices(agents, envs, worlds, table)
    }

    pub fn from_indices(
        agents: Vec<Vec<String>>,
        envs: Vec<String>,
        worlds: Vec<String>,
        table: Vec<usize>,
    ) -> Result<Self, ObjectError> {
        if agents.is_empty() {
            return Err(ObjectError::NoAgents);
        }
        for (i, a) in agents.iter().enumerate() {
            if a.is_empty() {
                return Err(ObjectError::EmptyAgent(i + 1));
            }
            check_unique("action", a)?;
        }
        if envs.is_empty() {
            return Err(FrameError::NoEnvironments.into());
        }
        check_unique("environment", &envs)?;
        check_unique("world", &worlds)?;
        let expected = agents.iter().map(Vec::len).product::<usize>() * envs.len();
        if table.len() != expected {
            return Err(ObjectError::TableShape {
                expected,
                found: table.len(),
            });
        }
        if let Some(&bad) = table.iter().find(|&&w| w >= worlds.len()) {
            return Err(FrameError::ForeignWorld(bad).into());
        }
        Ok(CartesianObject {
            agents,
            envs,
            worlds,
            table,
        })
    }

    /// The single-agent object with the same matrix as `frame`.
    pub fn from_frame(frame: &CartesianFrame) -> Result<Self, ObjectError> {
        Self::from_indices(
            vec![frame.actions().to_vec()],
            frame.envs().to_vec(),
            frame.worlds().to_vec(),
            frame.outcome_table().to_vec(),
        )
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn agent_actions(&self, agent: AgentIndex) -> Result<&[String], ObjectError> {
        Ok(&self.agents[self.slot(agent)?])
    }

    pub fn envs(&self) -> &[String] {
        &self.envs
    }

    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    /// Row-major outcome indices over (agent 1, …, agent n, env).
    pub fn outcome_table(&self) -> &[usize] {
        &self.table
    }

    pub fn world(&self, label: &str) -> Result<WorldId, ObjectError> {
        self.worlds
            .iter()
            .position(|w| w == label)
            .map(WorldId)
            .ok_or_else(|| FrameError::UnknownWorld(label.to_string()).into())
    }

    pub fn world_label(&self, world: WorldId) -> &str {
        &self.worlds[world.0]
    }

    pub fn world_set<I, S>(&self, members: I) -> Result<WorldSet, ObjectError>
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

    pub fn action(&self, agent: AgentIndex, label: &str) -> Result<ActionId, ObjectError> {
        let slot = self.slot(agent)?;
        self.agents[slot]
            .iter()
            .position(|a| a == label)
            .map(ActionId)
            .ok_or_else(|| FrameError::UnknownAction(label.to_string()).into())
    }

    pub fn env(&self, label: &str) -> Result<EnvId, ObjectError> {
        self.envs
            .iter()
            .position(|e| e == label)
            .map(EnvId)
            .ok_or_else(|| FrameError::UnknownEnv(label.to_string()).into())
    }

    fn slot(&self, agent: AgentIndex) -> Result<usize, ObjectError> {
        if agent.0 >= 1 && agent.0 <= self.agents.len() {
            Ok(agent.0 - 1)
        } else {
            Err(ObjectError::UnknownAgent {
                index: agent.0,
                agents: self.agents.len(),
            })
        }
    }

    fn check(&self, set: &WorldSet) -> Result<(), ObjectError> {
        match set.max_member() {
            Some(w) if w.0 >= self.worlds.len() => Err(FrameError::ForeignWorld(w.0).into()),
            _ => Ok(()),
        }
    }

    /// Table stride of agent slot `slot`; the environment axis has stride 1.
    fn stride(&self, slot: usize) -> usize {
        self.agents[slot + 1..].iter().map(Vec::len).product::<usize>() * self.envs.len()
    }

    /// Cell indices where agent slot `slot` plays its first action, in
    /// row-major order of the remaining axes. Adding `a * stride(slot)`
    /// moves to action `a`.
    fn columns(&self, slot: usize) -> Vec<usize> {
        let stride = self.stride(slot);
        let block = stride * self.agents[slot].len();
        (0..self.table.len())
            .filter(|idx| idx % block < stride)
            .collect()
    }

    /// Coordinates of a cell: one action index per agent, then the env.
    fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut dims: Vec<usize> = self.agents.iter().map(Vec::len).collect();
        dims.push(self.envs.len());
        let mut out = vec![0; dims.len()];
        for (axis, &d) in dims.iter().enumerate().rev() {
            out[axis] = idx % d;
            idx /= d;
        }
        out
    }

    /// The world produced by one action per agent and an environment state.
    pub fn joint_outcome(&self, joint: &[ActionId], env: EnvId) -> Result<WorldId, ObjectError> {
        if joint.len() != self.agents.len() {
            return Err(ObjectError::Arity {
                expected: self.agents.len(),
                found: joint.len(),
            });
        }
        let mut idx = 0;
        for (slot, a) in joint.iter().enumerate() {
            if a.0 >= self.agents[slot].len() {
                return Err(ObjectError::ForeignAction {
                    agent: slot + 1,
                    action: a.0,
                });
            }
            idx = idx * self.agents[slot].len() + a.0;
        }
        if env.0 >= self.envs.len() {
            return Err(FrameError::UnknownEnv(format!("#{}", env.0)).into());
        }
        Ok(WorldId(self.table[idx * self.envs.len() + env.0]))
    }

    /// `joint_outcome` addressed by labels.
    pub fn joint_outcome_by_label<S: AsRef<str>>(
        &self,
        joint: &[S],
        env: &str,
    ) -> Result<&str, ObjectError> {
        if joint.len() != self.agents.len() {
            return Err(ObjectError::Arity {
                expected: self.agents.len(),
                found: joint.len(),
            });
        }
        let ids = joint
            .iter()
            .enumerate()
            .map(|(slot, label)| self.action(AgentIndex(slot + 1), label.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let w = self.joint_outcome(&ids, self.env(env)?)?;
        Ok(self.world_label(w))
    }

    /// Every agent's actions, tagged with the owning agent.
    pub fn agents_star(&self) -> Vec<(AgentIndex, ActionId)> {
        self.agents
            .iter()
            .enumerate()
            .flat_map(|(slot, acts)| (0..acts.len()).map(move |a| (AgentIndex(slot + 1), ActionId(a))))
            .collect()
    }

    fn any_action_all_columns(
        &self,
        agent: AgentIndex,
        pred: impl Fn(usize) -> bool,
    ) -> Result<bool, ObjectError> {
        let slot = self.slot(agent)?;
        let stride = self.stride(slot);
        let cols = self.columns(slot);
        Ok((0..self.agents[slot].len())
            .any(|a| cols.iter().all(|&c| pred(self.table[c + a * stride]))))
    }

    pub fn ensure_n(&self, agent: AgentIndex, set: &WorldSet) -> Result<bool, ObjectError> {
        self.check(set)?;
        self.any_action_all_columns(agent, |w| set.contains(WorldId(w)))
    }

    pub fn prevent_n(&self, agent: AgentIndex, set: &WorldSet) -> Result<bool, ObjectError> {
        self.check(set)?;
        self.any_action_all_columns(agent, |w| !set.contains(WorldId(w)))
    }

    pub fn ctrl_n(&self, agent: AgentIndex, set: &WorldSet) -> Result<bool, ObjectError> {
        Ok(self.ensure_n(agent, set)? && self.prevent_n(agent, set)?)
    }

    /// Conditional-policy observability for one agent.
    pub fn obs_n(&self, agent: AgentIndex, set: &WorldSet) -> Result<bool, ObjectError> {
        self.check(set)?;
        let slot = self.slot(agent)?;
        let stride = self.stride(slot);
        let cols = self.columns(slot);
        let n = self.agents[slot].len();
        let at = |a: usize, c: usize| self.table[c + a * stride];
        let realizes = |a: usize, a0: usize, a1: usize| {
            cols.iter().all(|&c| {
                let w = at(a, c);
                if set.contains(WorldId(w)) {
                    w == at(a0, c)
                } else {
                    w == at(a1, c)
                }
            })
        };
        Ok((0..n).all(|a0| (0..n).all(|a1| (0..n).any(|a| realizes(a, a0, a1)))))
    }

    /// Worlds reachable by some action of `agent` together with some choice
    /// of the others and the environment.
    pub fn image_n(&self, agent: AgentIndex) -> Result<WorldSet, ObjectError> {
        self.slot(agent)?;
        Ok(WorldSet::from_ids(
            self.worlds.len(),
            self.table.iter().map(|&w| WorldId(w)),
        ))
    }

    pub fn inevitable_n(&self, agent: AgentIndex, set: &WorldSet) -> Result<bool, ObjectError> {
        self.check(set)?;
        let slot = self.slot(agent)?;
        Ok(!self.agents[slot].is_empty() && self.image_n(agent)?.is_subset(set))
    }

    fn check_profile(&self, agent: AgentIndex, profile: &BehaviorProfile) -> Result<(), ObjectError> {
        let slot = self.slot(agent)?;
        for (other, acts) in self.agents.iter().enumerate() {
            if other == slot {
                continue;
            }
            match profile.agents.get(other).and_then(Option::as_ref) {
                None => return Err(ObjectError::MissingDistribution(other + 1)),
                Some(d) if d.len() != acts.len() => {
                    return Err(ObjectError::Distribution {
                        owner: format!("agent {}", other + 1),
                        reason: format!("{} entries for {} actions", d.len(), acts.len()),
                    })
                }
                Some(_) => {}
            }
        }
        if profile.env.len() != self.envs.len() {
            return Err(ObjectError::Distribution {
                owner: "environment".into(),
                reason: format!(
                    "{} entries for {} states",
                    profile.env.len(),
                    self.envs.len()
                ),
            });
        }
        Ok(())
    }

    /// Probability of each column (joint choice of others and env) under
    /// the profile, aligned with `columns(slot)`.
    fn column_weights(&self, slot: usize, profile: &BehaviorProfile) -> Vec<f64> {
        self.columns(slot)
            .into_iter()
            .map(|c| {
                let coords = self.coords(c);
                let env = profile.env.probs()[coords[self.agents.len()]];
                coords[..self.agents.len()]
                    .iter()
                    .enumerate()
                    .filter(|(other, _)| *other != slot)
                    .fold(env, |acc, (other, &a)| {
                        let dist = profile.agents[other].as_ref().expect("checked profile");
                        acc * dist.probs()[a]
                    })
            })
            .collect()
    }

    /// `Pr(outcome satisfies pred | agent plays action)` for every action.
    ///
    /// When no positive-weight column fails `pred` the probability is
    /// exactly 1, and when none passes it is exactly 0.
    fn conditional_probs(
        &self,
        agent: AgentIndex,
        profile: &BehaviorProfile,
        pred: impl Fn(usize) -> bool,
    ) -> Result<Vec<f64>, ObjectError> {
        self.check_profile(agent, profile)?;
        let slot = self.slot(agent)?;
        let stride = self.stride(slot);
        let cols = self.columns(slot);
        let weights = self.column_weights(slot, profile);
        Ok((0..self.agents[slot].len())
            .map(|a| {
                let (mut hit, mut miss) = (0.0, 0.0);
                for (&c, &wt) in cols.iter().zip(&weights) {
                    if pred(self.table[c + a * stride]) {
                        hit += wt;
                    } else {
                        miss += wt;
                    }
                }
                if miss == 0.0 {
                    1.0
                } else if hit == 0.0 {
                    0.0
                } else {
                    hit
                }
            })
            .collect())
    }

    /// Probability that each of `agent`'s actions lands in `set`.
    pub fn success_probabilities(
        &self,
        agent: AgentIndex,
        set: &WorldSet,
        profile: &BehaviorProfile,
    ) -> Result<Vec<f64>, ObjectError> {
        self.check(set)?;
        self.conditional_probs(agent, profile, |w| set.contains(WorldId(w)))
    }

    /// Some action reaches `set` with probability at least `theta`.
    pub fn manageable_n(
        &self,
        agent: AgentIndex,
        set: &WorldSet,
        profile: &BehaviorProfile,
        theta: Theta,
    ) -> Result<bool, ObjectError> {
        Ok(self
            .success_probabilities(agent, set, profile)?
            .into_iter()
            .any(|p| p >= theta.get()))
    }

    /// For each world, the best probability any of `agent`'s actions gives it.
    pub fn world_probabilities(
        &self,
        agent: AgentIndex,
        profile: &BehaviorProfile,
    ) -> Result<Vec<f64>, ObjectError> {
        (0..self.worlds.len())
            .map(|w| {
                let probs = self.conditional_probs(agent, profile, |x| x == w)?;
                Ok(probs.into_iter().fold(0.0, f64::max))
            })
            .collect()
    }

    /// Worlds some action of `agent` reaches with probability strictly
    /// above `theta`.
    pub fn vimage_n(
        &self,
        agent: AgentIndex,
        profile: &BehaviorProfile,
        theta: Theta,
    ) -> Result<WorldSet, ObjectError> {
        let probs = self.world_probabilities(agent, profile)?;
        Ok(WorldSet::from_ids(
            self.worlds.len(),
            probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > theta.get())
                .map(|(w, _)| WorldId(w)),
        ))
    }

    pub fn viable_n(
        &self,
        agent: AgentIndex,
        set: &WorldSet,
        profile: &BehaviorProfile,
        theta: Theta,
    ) -> Result<bool, ObjectError> {
        self.check(set)?;
        let slot = self.slot(agent)?;
        Ok(!self.agents[slot].is_empty() && self.vimage_n(agent, profile, theta)?.is_subset(set))
    }

    /// Probability of every table cell when all agents and the environment
    /// follow `profile`, aligned with [`outcome_table`](Self::outcome_table).
    pub fn joint_weights(&self, profile: &BehaviorProfile) -> Result<Vec<f64>, ObjectError> {
        for (slot, acts) in self.agents.iter().enumerate() {
            match profile.agents.get(slot).and_then(Option::as_ref) {
                None => return Err(ObjectError::MissingDistribution(slot + 1)),
                Some(d) if d.len() != acts.len() => {
                    return Err(ObjectError::Distribution {
                        owner: format!("agent {}", slot + 1),
                        reason: format!("{} entries for {} actions", d.len(), acts.len()),
                    })
                }
                Some(_) => {}
            }
        }
        if profile.env.len() != self.envs.len() {
            return Err(ObjectError::Distribution {
                owner: "environment".into(),
                reason: format!("{} entries for {} states", profile.env.len(), self.envs.len()),
            });
        }
        Ok((0..self.table.len())
            .map(|idx| {
                let coords = self.coords(idx);
                let n = self.agents.len();
                coords[..n]
                    .iter()
                    .zip(&profile.agents)
                    .fold(profile.env.probs()[coords[n]], |acc, (&a, d)| {
                        acc * d.as_ref().expect("checked above").probs()[a]
                    })
            })
            .collect())
    }

    /// Folds every other agent into the environment, giving a frame whose
    /// actions are `agent`'s and whose columns are the joint choices of the
    /// others and the environment (row-major, environment fastest).
    pub fn as_frame(&self, agent: AgentIndex) -> Result<CartesianFrame, ObjectError> {
        let slot = self.slot(agent)?;
        let stride = self.stride(slot);
        let cols = self.columns(slot);
        let n_agents = self.agents.len();
        let env_labels: Vec<String> = cols
            .iter()
            .map(|&c| {
                let coords = self.coords(c);
                let env = &self.envs[coords[n_agents]];
                if n_agents == 1 {
                    return env.clone();
                }
                let mut parts: Vec<&str> = (0..n_agents)
                    .filter(|&o| o != slot)
                    .map(|o| self.agents[o][coords[o]].as_str())
                    .collect();
                parts.push(env);
                format!("({})", parts.join(","))
            })
            .collect();
        let outcome = (0..self.agents[slot].len())
            .flat_map(|a| cols.iter().map(move |&c| self.table[c + a * stride]))
            .collect();
        Ok(CartesianFrame::from_indices(
            self.agents[slot].clone(),
            env_labels,
            self.worlds.clone(),
            outcome,
        )?)
    }

    /// Adds a new agent after the existing ones.
    ///
    /// `extension` receives the full joint action (old agents then the new
    /// agent) and the environment, and names the resulting world. Labels
    /// not already in the world set are appended to it. Returning `None`
    /// anywhere is a partial extension and is rejected.
    pub fn extend_with_agent<F>(
        &self,
        new_actions: Vec<String>,
        mut extension: F,
    ) -> Result<CartesianObject, ObjectError>
    where
        F: FnMut(&[ActionId], EnvId) -> Option<String>,
    {
        if new_actions.is_empty() {
            return Err(ObjectError::EmptyExtension);
        }
        let mut agents = self.agents.clone();
        agents.push(new_actions);
        let mut worlds = self.worlds.clone();
        let mut table = Vec::new();
        let dims: Vec<usize> = agents.iter().map(Vec::len).collect();
        let cells = dims.iter().product::<usize>() * self.envs.len();
        for idx in 0..cells {
            let env = idx % self.envs.len();
            let mut rest = idx / self.envs.len();
            let mut joint = vec![ActionId(0); dims.len()];
            for (axis, &d) in dims.iter().enumerate().rev() {
                joint[axis] = ActionId(rest % d);
                rest /= d;
            }
            let label = extension(&joint, EnvId(env)).ok_or_else(|| {
                let names: Vec<&str> = joint
                    .iter()
                    .enumerate()
                    .map(|(s, a)| agents[s][a.0].as_str())
                    .collect();
                ObjectError::PartialExtension(format!(
                    "({}, {})",
                    names.join(", "),
                    self.envs[env]
                ))
            })?;
            let w = match worlds.iter().position(|x| *x == label) {
                Some(w) => w,
                None => {
                    worlds.push(label);
                    worlds.len() - 1
                }
            };
            table.push(w);
        }
        CartesianObject::from_indices(agents, self.envs.clone(), worlds, table)
    }

    /// Adds a single-action agent that leaves every outcome unchanged.
    pub fn extend_inert(&self, action: &str) -> Result<CartesianObject, ObjectError> {
        self.extend_with_agent(vec![action.to_string()], |joint, env| {
            let old = &joint[..joint.len() - 1];
            self.joint_outcome(old, env)
                .ok()
                .map(|w| self.worlds[w.0].clone())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    /// Two agents {u,d} × {l,r}, one environment, four distinct worlds.
    fn fixture() -> CartesianObject {
        CartesianObject::new(
            vec![strings(&["u", "d"]), strings(&["l", "r"])],
            strings(&["e"]),
            None,
            strings(&["w1", "w2", "w3", "w4"]),
        )
        .unwrap()
    }

    fn profile_l(p: f64) -> BehaviorProfile {
        BehaviorProfile {
            agents: vec![None, Some(Distribution::new(vec![p, 1.0 - p], "agent 2").unwrap())],
            env: Distribution::uniform(1),
        }
    }

    const A1: AgentIndex = AgentIndex(1);
    const A2: AgentIndex = AgentIndex(2);

    #[test]
    fn joint_outcome_lookup() {
        let o = fixture();
        assert_eq!(o.joint_outcome_by_label(&["u", "l"], "e").unwrap(), "w1");
        assert_eq!(o.joint_outcome_by_label(&["d", "r"], "e").unwrap(), "w4");
        assert_eq!(
            o.joint_outcome_by_label(&["u"], "e"),
            Err(ObjectError::Arity {
                expected: 2,
                found: 1
            })
        );
        assert_eq!(
            o.joint_outcome(&[ActionId(0), ActionId(5)], EnvId(0)),
            Err(ObjectError::ForeignAction {
                agent: 2,
                action: 5
            })
        );
        let frame = CartesianFrame::distinct_grid(3, 3).unwrap();
        let single = CartesianObject::from_frame(&frame).unwrap();
        assert_eq!(single.joint_outcome_by_label(&["a1"], "e2").unwrap(), "w2");
    }

    #[test]
    fn agents_star_tags_owners() {
        let o = fixture();
        assert_eq!(
            o.agents_star(),
            vec![
                (A1, ActionId(0)),
                (A1, ActionId(1)),
                (A2, ActionId(0)),
                (A2, ActionId(1))
            ]
        );
        let lopsided = CartesianObject::new(
            vec![strings(&["a", "b", "c"]), strings(&["x", "y"])],
            strings(&["e"]),
            None,
            vec!["w".to_string(); 6],
        )
        .unwrap();
        assert_eq!(lopsided.agents_star().len(), 5);
    }

    #[test]
    fn ensure_prevent_ctrl() {
        let o = fixture();
        let s12 = o.world_set(["w1", "w2"]).unwrap();
        assert!(o.ensure_n(A1, &s12).unwrap());
        assert!(!o.ensure_n(A1, &o.world_set(["w1"]).unwrap()).unwrap());
        assert!(o.prevent_n(A1, &s12).unwrap());
        assert!(o.ctrl_n(A1, &s12).unwrap());
        assert!(!o.ensure_n(A2, &s12).unwrap());
        assert!(o.ensure_n(A2, &o.world_set(["w1", "w3"]).unwrap()).unwrap());
    }

    #[test]
    fn manageable_against_weighted_sum() {
        let o = fixture();
        let s = o.world_set(["w1"]).unwrap();
        let prof = profile_l(0.8);
        let probs = o.success_probabilities(A1, &s, &prof).unwrap();
        assert!((probs[0] - 0.8).abs() < 1e-12);
        assert_eq!(probs[1], 0.0);
        assert!(o.manageable_n(A1, &s, &prof, Theta::new(0.75).unwrap()).unwrap());
        assert!(!o.manageable_n(A1, &s, &prof, Theta::new(0.9).unwrap()).unwrap());
        let unreachable = WorldSet::empty(4);
        assert!(o
            .manageable_n(A1, &unreachable, &prof, Theta::new(0.0).unwrap())
            .unwrap());
    }

    #[test]
    fn manageable_needs_profile_for_others() {
        let o = fixture();
        let prof = BehaviorProfile {
            agents: vec![None, None],
            env: Distribution::uniform(1),
        };
        let s = o.world_set(["w1"]).unwrap();
        assert_eq!(
            o.manageable_n(A1, &s, &prof, Theta::new(0.5).unwrap()),
            Err(ObjectError::MissingDistribution(2))
        );
    }

    #[test]
    fn observe_image_inevitable() {
        let o = fixture();
        assert!(o.obs_n(A1, &o.full_set()).unwrap());
        assert!(o.obs_n(A1, &WorldSet::empty(4)).unwrap());
        assert_eq!(o.image_n(A1).unwrap(), o.full_set());
        assert!(o.inevitable_n(A1, &o.full_set()).unwrap());
        assert!(!o.inevitable_n(A1, &o.world_set(["w1"]).unwrap()).unwrap());
    }

    #[test]
    fn vimage_cases() {
        let o = fixture();
        let prof = profile_l(0.8);
        let v = o.vimage_n(A1, &prof, Theta::new(0.5).unwrap()).unwrap();
        assert_eq!(o.set_labels(&v), strings(&["w1", "w3"]));
        assert!(o.vimage_n(A1, &prof, Theta::new(1.0).unwrap()).unwrap().is_empty());
        assert_eq!(
            o.vimage_n(A1, &prof, Theta::new(0.0).unwrap()).unwrap(),
            o.image_n(A1).unwrap()
        );
        assert!(o
            .viable_n(A1, &o.world_set(["w1", "w3"]).unwrap(), &prof, Theta::new(0.5).unwrap())
            .unwrap());
    }

    #[test]
    fn as_frame_folds_others() {
        let o = fixture();
        let f = o.as_frame(A1).unwrap();
        assert_eq!(f.actions(), &strings(&["u", "d"])[..]);
        assert_eq!(f.envs(), &strings(&["(l,e)", "(r,e)"])[..]);
        assert_eq!(f.outcome_by_label("d", "(r,e)").unwrap(), "w4");
        let f2 = o.as_frame(A2).unwrap();
        assert_eq!(f2.envs(), &strings(&["(u,e)", "(d,e)"])[..]);
        assert_eq!(f2.outcome_by_label("l", "(d,e)").unwrap(), "w3");

        let frame = CartesianFrame::distinct_grid(3, 3).unwrap();
        let back = CartesianObject::from_frame(&frame).unwrap().as_frame(A1).unwrap();
        assert_eq!(back, frame);
    }

    #[test]
    fn extension_grows_domain() {
        let o = fixture();
        let ext = o
            .extend_with_agent(strings(&["p", "q"]), |j, _| {
                Some(format!("x{}{}{}", j[0].0, j[1].0, j[2].0))
            })
            .unwrap();
        assert_eq!(ext.agent_count(), 3);
        assert_eq!(ext.outcome_table().len(), 2 * o.outcome_table().len());
        assert_eq!(ext.worlds().len(), 4 + 8);
        assert_eq!(ext.joint_outcome_by_label(&["d", "l", "q"], "e").unwrap(), "x101");
    }

    #[test]
    fn inert_extension_preserves_verdicts() {
        let o = fixture();
        let ext = o.extend_inert("z").unwrap();
        assert_eq!(ext.worlds(), o.worlds());
        for mask in 0..16u64 {
            let s = WorldSet::from_mask(mask, 4);
            for agent in [A1, A2] {
                assert_eq!(ext.ensure_n(agent, &s), o.ensure_n(agent, &s));
                assert_eq!(ext.prevent_n(agent, &s), o.prevent_n(agent, &s));
                assert_eq!(ext.obs_n(agent, &s), o.obs_n(agent, &s));
            }
        }
    }

    #[test]
    fn partial_extension_rejected() {
        let o = fixture();
        let err = o
            .extend_with_agent(strings(&["p", "q"]), |j, _| {
                (j[2].0 == 0).then(|| "w1".to_string())
            })
            .unwrap_err();
        assert_eq!(err, ObjectError::PartialExtension("(u, l, q, e)".into()));
        assert_eq!(
            o.extend_with_agent(vec![], |_, _| None),
            Err(ObjectError::EmptyExtension)
        );
    }

    #[test]
    fn validation() {
        assert_eq!(
            CartesianObject::new(vec![], strings(&["e"]), None, vec![]),
            Err(ObjectError::NoAgents)
        );
        assert_eq!(
            CartesianObject::new(vec![vec![]], strings(&["e"]), None, vec![]),
            Err(ObjectError::EmptyAgent(1))
        );
        assert!(matches!(
            CartesianObject::new(vec![strings(&["a"])], strings(&["e"]), None, vec![]),
            Err(ObjectError::TableShape { .. })
        ));
        assert!(Theta::new(1.2).is_err());
        assert!(Distribution::new(vec![0.5, 0.4], "p").is_err());
        assert!(Distribution::new(vec![1.5, -0.5], "p").is_err());
        assert_eq!(
            fixture().ensure_n(AgentIndex(3), &WorldSet::empty(4)),
            Err(ObjectError::UnknownAgent {
                index: 3,
                agents: 2
            })
        );
    }
}
