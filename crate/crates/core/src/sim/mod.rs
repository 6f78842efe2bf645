//! The simulator as a dynamical system.
//!
//! A simulator holds a weighted family of events, each a Cartesian object
//! whose agents are simulacra. One forward-pass step:
//!
//! 1. draws an event among those whose complexity is within the bound `v`,
//!    with probability proportional to its weight,
//! 2. draws one cell of that event's outcome table (uniformly, or under the
//!    event's behavior profile) and adds the resulting world to the set of
//!    realized worlds,
//! 3. asks the token selector for a distribution given the token history and
//!    appends one sampled token.
//!
//! All three draws, in that order, come from one seeded [`SimRng`], so a run
//! is a pure function of its inputs and seed.

mod complexity;
mod rng;
mod selector;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use complexity::{
    empty_canonical_len, max_complexity, simulacrum_complexity, CanonicalLength,
    ComplexityScorer, Simulacrum,
};
pub use rng::{SimRng, RNG_ALGORITHM};
pub use selector::{chars, Alphabet, ContextEntry, Token, TokenSelector, SEPARATOR};

use crate::object::{BehaviorProfile, CartesianObject, ObjectError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("token `{0}` appears twice")]
    DuplicateToken(String),
    #[error("token `{0}` is reserved")]
    ReservedToken(String),
    #[error("token `{0}` is not in the alphabet")]
    UnknownToken(String),
    #[error("invalid distribution for {owner}: {reason}")]
    Distribution { owner: String, reason: String },
    #[error("context `{0}` is listed twice")]
    DuplicateContext(String),
    #[error("no selector entry matches context `{0}` and there is no default")]
    NoMatchingContext(String),
    #[error("event `{0}` appears twice")]
    DuplicateEvent(String),
    #[error("event `{0}` has no simulacra")]
    NoSimulacra(String),
    #[error("event `{event}` has invalid weight {weight}")]
    InvalidWeight { event: String, weight: f64 },
    #[error("no event is admissible under complexity bound {0}")]
    NoAdmissibleEvents(u64),
    #[error("admissible events under bound {0} carry zero total weight")]
    ZeroWeight(u64),
    #[error("event `{event}`: {source}")]
    Object {
        event: String,
        #[source]
        source: ObjectError,
    },
}

/// One event of the space: a Cartesian object over simulacra, with
/// unnormalized probability mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub id: String,
    pub object: CartesianObject,
    pub simulacra: Vec<Simulacrum>,
    pub weight: f64,
    /// Distribution over the object's cells; uniform when absent.
    pub profile: Option<BehaviorProfile>,
}

impl SimEvent {
    pub fn new(
        id: impl Into<String>,
        object: CartesianObject,
        simulacra: Vec<Simulacrum>,
        weight: f64,
    ) -> Self {
        SimEvent {
            id: id.into(),
            object,
            simulacra,
            weight,
            profile: None,
        }
    }

    pub fn with_profile(mut self, profile: BehaviorProfile) -> Self {
        self.profile = Some(profile);
        self
    }
}

/// Complexity of an event: the largest score among its simulacra.
pub fn event_complexity(event: &SimEvent, scorer: &dyn ComplexityScorer) -> u64 {
    max_complexity(&event.simulacra, scorer)
}

/// The event family with its complexity bound and scorer.
#[derive(Clone)]
pub struct EventSpace {
    events: Vec<SimEvent>,
    scores: Vec<u64>,
    // Cell weights per event, aligned with the object's outcome table.
    cell_weights: Vec<Vec<f64>>,
    bound: u64,
    scorer: Arc<dyn ComplexityScorer>,
}

impl fmt::Debug for EventSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventSpace")
            .field("events", &self.events.iter().map(|e| &e.id).collect::<Vec<_>>())
            .field("scores", &self.scores)
            .field("bound", &self.bound)
            .field("scorer", &self.scorer.name())
            .finish()
    }
}

impl PartialEq for EventSpace {
    fn eq(&self, other: &Self) -> bool {
        self.events == other.events
            && self.bound == other.bound
            && self.scores == other.scores
            && self.scorer.name() == other.scorer.name()
    }
}

impl EventSpace {
    pub fn new(events: Vec<SimEvent>, bound: u64) -> Result<Self, SimError> {
        Self::with_scorer(events, bound, Arc::new(CanonicalLength))
    }

    pub fn with_scorer(
        events: Vec<SimEvent>,
        bound: u64,
        scorer: Arc<dyn ComplexityScorer>,
    ) -> Result<Self, SimError> {
        let mut cell_weights = Vec::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            if events[..i].iter().any(|p| p.id == e.id) {
                return Err(SimError::DuplicateEvent(e.id.clone()));
            }
            if e.simulacra.is_empty() {
                return Err(SimError::NoSimulacra(e.id.clone()));
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(SimError::InvalidWeight {
                    event: e.id.clone(),
                    weight: e.weight,
                });
            }
            let obj = &e.object;
            let profile = e
                .profile
                .clone()
                .unwrap_or_else(|| BehaviorProfile::uniform(obj));
            let weights = obj.joint_weights(&profile).map_err(|source| SimError::Object {
                event: e.id.clone(),
                source,
            })?;
            cell_weights.push(weights);
        }
        let scores = events
            .iter()
            .map(|e| event_complexity(e, scorer.as_ref()))
            .collect();
        Ok(EventSpace {
            events,
            scores,
            cell_weights,
            bound,
            scorer,
        })
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    /// Complexity bound `v` this space runs under.
    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn scorer(&self) -> &Arc<dyn ComplexityScorer> {
        &self.scorer
    }

    /// Complexity of event `i`.
    pub fn score(&self, i: usize) -> u64 {
        self.scores[i]
    }

    pub fn scores(&self) -> &[u64] {
        &self.scores
    }

    /// Every simulacrum in the space, in event order.
    pub fn sample_space(&self) -> impl Iterator<Item = &Simulacrum> {
        self.events.iter().flat_map(|e| e.simulacra.iter())
    }

    /// The largest complexity of any simulacrum in the space.
    pub fn max_complexity(&self) -> u64 {
        self.scores.iter().copied().max().unwrap_or(0)
    }

    /// Same events under a different bound.
    pub fn with_bound(&self, bound: u64) -> Self {
        EventSpace {
            bound,
            ..self.clone()
        }
    }

    /// Rewrites every simulacrum and rescores.
    pub fn map_simulacra<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&Simulacrum) -> Simulacrum,
    {
        let events: Vec<SimEvent> = self
            .events
            .iter()
            .map(|e| SimEvent {
                simulacra: e.simulacra.iter().map(&mut f).collect(),
                ..e.clone()
            })
            .collect();
        let scores = events
            .iter()
            .map(|e| event_complexity(e, self.scorer.as_ref()))
            .collect();
        EventSpace {
            events,
            scores,
            ..self.clone()
        }
    }

    /// Indices of events whose complexity is at most `bound`, in order.
    pub fn admissible(&self, bound: u64) -> Vec<usize> {
        (0..self.events.len())
            .filter(|&i| self.scores[i] <= bound)
            .collect()
    }

    pub fn admissible_events(&self, bound: u64) -> Vec<&SimEvent> {
        self.admissible(bound)
            .into_iter()
            .map(|i| &self.events[i])
            .collect()
    }

    /// Draws an admissible event with probability proportional to weight,
    /// renormalized over the admissible events.
    pub fn select_event(&self, bound: u64, rng: &mut SimRng) -> Result<usize, SimError> {
        let admissible = self.admissible(bound);
        if admissible.is_empty() {
            return Err(SimError::NoAdmissibleEvents(bound));
        }
        let weights: Vec<f64> = admissible.iter().map(|&i| self.events[i].weight).collect();
        rng.weighted_index(&weights)
            .map(|k| admissible[k])
            .ok_or(SimError::ZeroWeight(bound))
    }

    /// Draws one cell of event `i`'s outcome table and returns its world.
    fn realize(&self, i: usize, rng: &mut SimRng) -> String {
        let obj = &self.events[i].object;
        let cell = rng
            .weighted_index(&self.cell_weights[i])
            .expect("profiles sum to one");
        obj.worlds()[obj.outcome_table()[cell]].clone()
    }
}

/// A world realized by a selected event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RealizedWorld {
    pub event: String,
    pub world: String,
}

/// Simulation state after `t` steps.
///
/// `prompt` is context supplied before the run; `trajectory` holds only
/// emitted tokens, so `trajectory.len() == t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationState {
    pub t: usize,
    pub prompt: Vec<Token>,
    pub trajectory: Vec<Token>,
    pub realized: BTreeSet<RealizedWorld>,
}

impl SimulationState {
    /// The null state: no tokens, no realized worlds.
    pub fn initial() -> Self {
        Self::with_prompt(vec![])
    }

    pub fn with_prompt(prompt: Vec<Token>) -> Self {
        SimulationState {
            t: 0,
            prompt,
            trajectory: vec![],
            realized: BTreeSet::new(),
        }
    }

    /// Prompt followed by the emitted tokens.
    pub fn context(&self) -> Vec<Token> {
        self.prompt.iter().chain(&self.trajectory).cloned().collect()
    }
}

/// Machine-readable account of one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub event: String,
    pub token: Token,
    pub realized: RealizedWorld,
    pub rng_digest: String,
}

/// Token distribution for the state's full context.
pub fn token_distribution<'a>(
    selector: &'a TokenSelector,
    state: &SimulationState,
) -> Result<&'a [f64], SimError> {
    selector.distribution_for_split(&state.prompt, &state.trajectory)
}

/// Advances one step. The input state is left untouched.
pub fn step(
    state: &SimulationState,
    selector: &TokenSelector,
    space: &EventSpace,
    rng: &mut SimRng,
) -> Result<(SimulationState, StepRecord), SimError> {
    let mut next = state.clone();
    let record = advance(&mut next, selector, space, rng)?;
    Ok((next, record))
}

/// [`step`] in place. On error the state is unchanged.
pub fn advance(
    state: &mut SimulationState,
    selector: &TokenSelector,
    space: &EventSpace,
    rng: &mut SimRng,
) -> Result<StepRecord, SimError> {
    let event = space.select_event(space.bound(), rng)?;
    let world = space.realize(event, rng);
    let dist = token_distribution(selector, state)?;
    let idx = rng.weighted_index(dist).expect("distributions sum to one");
    let token = selector.alphabet().tokens()[idx].clone();

    let realized = RealizedWorld {
        event: space.events()[event].id.clone(),
        world,
    };
    state.t += 1;
    state.trajectory.push(token.clone());
    state.realized.insert(realized.clone());
    Ok(StepRecord {
        t: state.t,
        event: realized.event.clone(),
        token,
        realized,
        rng_digest: rng.state_digest(),
    })
}

/// A finished run: the starting and final states plus one record per step.
/// Intermediate states are rebuilt from the records by [`Run::state_at`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub seed: u64,
    pub rng: String,
    pub bound: u64,
    pub initial: SimulationState,
    pub last: SimulationState,
    pub records: Vec<StepRecord>,
}

impl Run {
    pub fn final_state(&self) -> &SimulationState {
        &self.last
    }

    /// State after `t` steps, or `None` past the end.
    pub fn state_at(&self, t: usize) -> Option<SimulationState> {
        let mut s = self.initial.clone();
        for r in self.records.get(..t)? {
            s.t = r.t;
            s.trajectory.push(r.token.clone());
            s.realized.insert(r.realized.clone());
        }
        Some(s)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.final_state().trajectory
    }
}

/// Runs `steps` steps from the null state.
pub fn run(
    space: &EventSpace,
    selector: &TokenSelector,
    steps: usize,
    seed: u64,
) -> Result<Run, SimError> {
    run_with_prompt(space, selector, vec![], steps, seed)
}

/// Runs `steps` steps with `prompt` pre-loaded as context.
pub fn run_with_prompt(
    space: &EventSpace,
    selector: &TokenSelector,
    prompt: Vec<Token>,
    steps: usize,
    seed: u64,
) -> Result<Run, SimError> {
    if let Some(t) = prompt
        .iter()
        .find(|t| !t.is_separator() && !selector.alphabet().contains(t))
    {
        return Err(SimError::UnknownToken(t.0.clone()));
    }
    let mut rng = SimRng::new(seed);
    let initial = SimulationState::with_prompt(prompt);
    let mut last = initial.clone();
    let mut records = Vec::with_capacity(steps);
    for _ in 0..steps {
        records.push(advance(&mut last, selector, space, &mut rng)?);
    }
    Ok(Run {
        seed,
        rng: RNG_ALGORITHM.to_string(),
        bound: space.bound(),
        initial,
        last,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_object() -> CartesianObject {
        CartesianObject::new(
            vec![vec!["go".into(), "stay".into()]],
            vec!["e".into()],
            None,
            vec!["moved".into(), "still".into()],
        )
        .unwrap()
    }

    fn event(id: &str, body: &str, weight: f64) -> SimEvent {
        SimEvent::new(
            id,
            tiny_object(),
            vec![Simulacrum::new(format!("{id}-s"), vec![], body)],
            weight,
        )
    }

    fn xy() -> Alphabet {
        Alphabet::new(chars("xy")).unwrap()
    }

    #[test]
    fn admissibility_by_bound() {
        let l0 = empty_canonical_len();
        let space = EventSpace::new(
            vec![event("small", "abcde", 1.0), event("big", "abcdefghijkl", 1.0)],
            l0 + 10,
        )
        .unwrap();
        assert_eq!(space.scores(), &[l0 + 5, l0 + 12]);
        assert_eq!(space.admissible(l0 + 10), vec![0]);
        assert!(space.admissible(0).is_empty());
        assert_eq!(space.admissible(l0 + 12), vec![0, 1]);
        assert_eq!(space.max_complexity(), l0 + 12);
    }

    #[test]
    fn select_single_event_any_seed() {
        let space = EventSpace::new(vec![event("only", "", 2.0)], 1000).unwrap();
        for seed in 0..20 {
            assert_eq!(space.select_event(1000, &mut SimRng::new(seed)).unwrap(), 0);
        }
    }

    #[test]
    fn select_errors() {
        let space = EventSpace::new(vec![event("a", "long body", 1.0)], 1).unwrap();
        assert_eq!(
            space.select_event(1, &mut SimRng::new(0)),
            Err(SimError::NoAdmissibleEvents(1))
        );
        let zero = EventSpace::new(vec![event("a", "", 0.0)], 1000).unwrap();
        assert_eq!(
            zero.select_event(1000, &mut SimRng::new(0)),
            Err(SimError::ZeroWeight(1000))
        );
    }

    #[test]
    fn space_validation() {
        assert!(matches!(
            EventSpace::new(vec![event("a", "", 1.0), event("a", "", 1.0)], 9),
            Err(SimError::DuplicateEvent(_))
        ));
        assert!(matches!(
            EventSpace::new(vec![event("a", "", -1.0)], 9),
            Err(SimError::InvalidWeight { .. })
        ));
        let mut empty = event("a", "", 1.0);
        empty.simulacra.clear();
        assert!(matches!(
            EventSpace::new(vec![empty], 9),
            Err(SimError::NoSimulacra(_))
        ));
    }

    #[test]
    fn degenerate_steps() {
        let space = EventSpace::new(vec![event("only", "", 1.0)], 1000).unwrap();
        let sel = TokenSelector::constant(xy(), &Token::new("x")).unwrap();
        let s0 = SimulationState::initial();
        let mut rng = SimRng::new(5);
        let (s1, rec) = step(&s0, &sel, &space, &mut rng).unwrap();
        assert_eq!(s1.t, 1);
        assert_eq!(s1.trajectory, chars("x"));
        assert_eq!(rec.event, "only");
        // input untouched
        assert_eq!(s0, SimulationState::initial());
        assert!(s0.realized.is_empty());

        let (s2, _) = step(&s1, &sel, &space, &mut rng).unwrap();
        let (s3, _) = step(&s2, &sel, &space, &mut rng).unwrap();
        assert_eq!(s3.trajectory, chars("xxx"));
    }

    #[test]
    fn run_shapes_and_determinism() {
        let space = EventSpace::new(vec![event("a", "", 1.0), event("b", "", 3.0)], 1000).unwrap();
        let sel = TokenSelector::uniform(xy());
        let zero = run(&space, &sel, 0, 1).unwrap();
        assert_eq!(zero.final_state(), &SimulationState::initial());
        assert_eq!(zero.state_at(1), None);

        let r1 = run(&space, &sel, 25, 99).unwrap();
        let r2 = run(&space, &sel, 25, 99).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.state_at(25).as_ref(), Some(r1.final_state()));
        let mut walked = SimulationState::initial();
        let mut rng = SimRng::new(99);
        for t in 0..=25 {
            let s = r1.state_at(t).unwrap();
            assert_eq!(s, walked);
            assert_eq!(s.trajectory.len(), t);
            if t < 25 {
                walked = step(&walked, &sel, &space, &mut rng).unwrap().0;
            }
        }

        let five = run(
            &space,
            &TokenSelector::constant(xy(), &Token::new("x")).unwrap(),
            5,
            0,
        )
        .unwrap();
        assert_eq!(five.tokens(), &chars("xxxxx")[..]);
    }

    #[test]
    fn realized_worlds_follow_profile() {
        let obj = tiny_object();
        let profile = BehaviorProfile::uniform(&obj).with_agent(
            crate::object::AgentIndex(1),
            crate::object::Distribution::point(2, 1),
        );
        let space = EventSpace::new(
            vec![SimEvent::new("ev", obj, vec![Simulacrum::new("s", vec![], "")], 1.0)
                .with_profile(profile)],
            1000,
        )
        .unwrap();
        let r = run(&space, &TokenSelector::uniform(xy()), 10, 4).unwrap();
        let worlds: Vec<_> = r.final_state().realized.iter().map(|w| w.world.as_str()).collect();
        assert_eq!(worlds, vec!["still"]);
    }

    #[test]
    fn prompt_tokens_checked() {
        let space = EventSpace::new(vec![event("a", "", 1.0)], 1000).unwrap();
        let sel = TokenSelector::uniform(xy());
        assert_eq!(
            run_with_prompt(&space, &sel, chars("q"), 1, 0),
            Err(SimError::UnknownToken("q".into()))
        );
        let mut prompt = chars("x");
        prompt.push(Token::separator());
        assert!(run_with_prompt(&space, &sel, prompt, 1, 0).is_ok());
    }
}
