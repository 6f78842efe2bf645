//! Partial simulation extrapolation.
//!
//! A prompt and a condition go first through a cheap partial simulator `P`
//! (coarser alphabet, masked simulacra, short budget, lower complexity
//! bound). An evaluator judges the partial trajectory, and only on approval
//! does the complete simulator `S` run. Every pass produces an
//! [`AuditRecord`].

mod audit;
mod evaluator;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{
    audit_export, audit_import, AuditLog, AuditRecord, Bounds, Clock, GateSeeds, GateStatus,
    LogicalClock, PhaseTrace, SystemClock, Timestamps, AUDIT_FORMAT,
};
pub use evaluator::{Condition, Decision, EvaluatorSpec, Rule, Verdict, DEFAULT_TEMPLATE};

use crate::sim::{
    self, Alphabet, ContextEntry, EventSpace, Run, SimError, Simulacrum, Token, TokenSelector,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PseError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("partial bound {partial} exceeds complete bound {complete}")]
    BoundOrder { partial: u64, complete: u64 },
    #[error("requested bound {requested} exceeds the original bound {original}")]
    BoundRaise { requested: u64, original: u64 },
    #[error("time-to-live must be at least 1")]
    ZeroTtl,
    #[error("fragmentation mask is empty")]
    EmptyMask,
    #[error("fidelity map has no image for token `{0}`")]
    FidelityNotTotal(String),
    #[error("fidelity map names `{0}`, which is not in the alphabet")]
    FidelityForeign(String),
    #[error("fidelity map sends `{0}` to the reserved separator")]
    FidelityReserved(String),
    #[error("token `{0}` has no counterpart in the partial simulator's alphabet")]
    IncompatibleAlphabet(String),
    #[error("rationale template is empty")]
    EmptyTemplate,
    #[error("audit record: {0}")]
    Audit(String),
}

/// Joins prompt and condition as `p ⟂ c`.
pub fn compose_input(
    prompt: &[Token],
    condition: &[Token],
    alphabet: &Alphabet,
) -> Result<Vec<Token>, PseError> {
    for t in prompt.iter().chain(condition) {
        if t.is_separator() {
            return Err(SimError::ReservedToken(t.0.clone()).into());
        }
        if !alphabet.contains(t) {
            return Err(SimError::UnknownToken(t.0.clone()).into());
        }
    }
    let mut out = Vec::with_capacity(prompt.len() + condition.len() + 1);
    out.extend_from_slice(prompt);
    out.push(Token::separator());
    out.extend_from_slice(condition);
    Ok(out)
}

/// The three perturbation axes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Coarsening map over the whole alphabet. `None` keeps every token.
    #[serde(default)]
    pub fidelity: Option<BTreeMap<Token, Token>>,
    /// Action labels simulacra keep. `None` keeps all of them.
    #[serde(default)]
    pub fragmentation: Option<BTreeSet<String>>,
    pub time_to_live: usize,
    /// Lowers the complexity bound. Defaults to the original bound.
    #[serde(default)]
    pub complexity_bound: Option<u64>,
}

impl PerturbationConfig {
    pub fn identity(time_to_live: usize) -> Self {
        PerturbationConfig {
            fidelity: None,
            fragmentation: None,
            time_to_live,
            complexity_bound: None,
        }
    }

    /// Checks the config against the alphabet it will coarsen.
    pub fn validate(&self, alphabet: &Alphabet, bound: u64) -> Result<(), PseError> {
        if self.time_to_live == 0 {
            return Err(PseError::ZeroTtl);
        }
        if self.fragmentation.as_ref().is_some_and(BTreeSet::is_empty) {
            return Err(PseError::EmptyMask);
        }
        if let Some(map) = &self.fidelity {
            if let Some(t) = alphabet.tokens().iter().find(|t| !map.contains_key(*t)) {
                return Err(PseError::FidelityNotTotal(t.0.clone()));
            }
            if let Some(t) = map.keys().find(|t| !alphabet.contains(t)) {
                return Err(PseError::FidelityForeign(t.0.clone()));
            }
            if let Some((from, _)) = map.iter().find(|(_, to)| to.is_separator()) {
                return Err(PseError::FidelityReserved(from.0.clone()));
            }
        }
        if let Some(requested) = self.complexity_bound {
            if requested > bound {
                return Err(PseError::BoundRaise {
                    requested,
                    original: bound,
                });
            }
        }
        Ok(())
    }

    /// Image of one token. The separator and unmapped tokens pass through.
    pub fn coarsen_token(&self, token: &Token) -> Token {
        match &self.fidelity {
            Some(map) if !token.is_separator() => map.get(token).unwrap_or(token).clone(),
            _ => token.clone(),
        }
    }

    pub fn coarsen(&self, tokens: &[Token]) -> Vec<Token> {
        tokens.iter().map(|t| self.coarsen_token(t)).collect()
    }

    fn mask(&self, s: &Simulacrum) -> Simulacrum {
        match &self.fragmentation {
            None => s.clone(),
            Some(keep) => Simulacrum {
                actions: s
                    .actions
                    .iter()
                    .filter(|a| keep.contains(*a))
                    .cloned()
                    .collect(),
                ..s.clone()
            },
        }
    }
}

/// A simulator ready to run: events, selector and a step budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorHandle {
    pub space: EventSpace,
    pub selector: TokenSelector,
    pub budget: usize,
    /// Set on handles produced by [`perturb`]; maps inputs written for the
    /// original alphabet onto this one.
    pub perturbation: Option<PerturbationConfig>,
}

impl SimulatorHandle {
    pub fn new(space: EventSpace, selector: TokenSelector, budget: usize) -> Self {
        SimulatorHandle {
            space,
            selector,
            budget,
            perturbation: None,
        }
    }

    pub fn bound(&self) -> u64 {
        self.space.bound()
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.selector.alphabet()
    }

    /// Rewrites an input over the original alphabet into this handle's.
    pub fn translate(&self, input: &[Token]) -> Vec<Token> {
        match &self.perturbation {
            Some(p) => p.coarsen(input),
            None => input.to_vec(),
        }
    }
}

fn push_forward(dist: &[f64], targets: &[usize], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (p, &j) in dist.iter().zip(targets) {
        out[j] += p;
    }
    out
}

fn coarsen_selector(
    selector: &TokenSelector,
    pert: &PerturbationConfig,
) -> Result<TokenSelector, PseError> {
    if pert.fidelity.is_none() {
        return Ok(selector.clone());
    }
    let mut coarse: Vec<Token> = Vec::new();
    for t in selector.alphabet().tokens() {
        let c = pert.coarsen_token(t);
        if !coarse.contains(&c) {
            coarse.push(c);
        }
    }
    let targets: Vec<usize> = selector
        .alphabet()
        .tokens()
        .iter()
        .map(|t| {
            let c = pert.coarsen_token(t);
            coarse.iter().position(|x| *x == c).expect("collected above")
        })
        .collect();
    let n = coarse.len();
    // Contexts that collide after coarsening keep the first entry's table.
    let mut entries: Vec<ContextEntry> = Vec::new();
    for e in selector.entries() {
        let context = pert.coarsen(&e.context);
        if entries.iter().any(|x| x.context == context) {
            continue;
        }
        entries.push(ContextEntry {
            context,
            distribution: push_forward(&e.distribution, &targets, n),
        });
    }
    let default = selector
        .default_distribution()
        .map(|d| push_forward(d, &targets, n));
    Ok(TokenSelector::new(Alphabet::new(coarse)?, entries, default)?)
}

/// Builds the partial simulator from a complete one.
pub fn perturb(
    handle: &SimulatorHandle,
    perturbation: &PerturbationConfig,
) -> Result<SimulatorHandle, PseError> {
    perturbation.validate(handle.alphabet(), handle.bound())?;
    let selector = coarsen_selector(&handle.selector, perturbation)?;
    let space = if perturbation.fragmentation.is_some() {
        handle.space.map_simulacra(|s| perturbation.mask(s))
    } else {
        handle.space.clone()
    };
    let bound = perturbation.complexity_bound.unwrap_or(handle.bound());
    Ok(SimulatorHandle {
        space: space.with_bound(bound),
        selector,
        budget: perturbation.time_to_live,
        perturbation: Some(perturbation.clone()),
    })
}

/// Runs `handle` for its budget with `input` pre-loaded as context.
pub fn run_partial(handle: &SimulatorHandle, input: &[Token], seed: u64) -> Result<Run, PseError> {
    Ok(sim::run_with_prompt(
        &handle.space,
        &handle.selector,
        input.to_vec(),
        handle.budget,
        seed,
    )?)
}

/// Checks that `partial` can stand in front of `complete`.
pub fn check_pair(partial: &SimulatorHandle, complete: &SimulatorHandle) -> Result<(), PseError> {
    if partial.bound() > complete.bound() {
        return Err(PseError::BoundOrder {
            partial: partial.bound(),
            complete: complete.bound(),
        });
    }
    for t in complete.alphabet().tokens() {
        let image = partial.translate(std::slice::from_ref(t));
        if !partial.alphabet().contains(&image[0]) {
            return Err(PseError::IncompatibleAlphabet(t.0.clone()));
        }
    }
    Ok(())
}

fn trace(run: &Run, space: &EventSpace) -> PhaseTrace {
    let max_selected_complexity = run
        .records
        .iter()
        .filter_map(|r| space.events().iter().position(|e| e.id == r.event))
        .map(|i| space.score(i))
        .max();
    PhaseTrace {
        seed: run.seed,
        bound: run.bound,
        input: run.initial.prompt.clone(),
        tokens: run.tokens().to_vec(),
        realized: run.final_state().realized.iter().cloned().collect(),
        events: run.records.iter().map(|r| r.event.clone()).collect(),
        max_selected_complexity,
        error: None,
    }
}

fn failed_trace(seed: u64, bound: u64, input: Vec<Token>, err: &PseError) -> PhaseTrace {
    PhaseTrace {
        seed,
        bound,
        input,
        tokens: vec![],
        realized: vec![],
        events: vec![],
        max_selected_complexity: None,
        error: Some(err.to_string()),
    }
}

/// One full pass: compose, run `partial`, evaluate, and run `complete` only
/// on approval.
///
/// Configuration problems (bound order, alphabets, foreign input tokens)
/// are errors. Failures during the partial run force a rejection; failures
/// during the complete run are recorded with [`GateStatus::CompleteFailed`].
#[allow(clippy::too_many_arguments)]
pub fn gate(
    partial: &SimulatorHandle,
    evaluator: &EvaluatorSpec,
    complete: &SimulatorHandle,
    prompt: &[Token],
    condition: &[Token],
    seeds: GateSeeds,
    clock: &mut dyn Clock,
) -> Result<AuditRecord, PseError> {
    check_pair(partial, complete)?;
    evaluator.validate()?;
    let input = compose_input(prompt, condition, complete.alphabet())?;
    let started = clock.now();

    let partial_input = partial.translate(&input);
    let (partial_trace, verdict) = match run_partial(partial, &partial_input, seeds.partial) {
        Ok(run) => {
            let state = run.final_state();
            let verdict = evaluator.evaluate(&state.trajectory, &state.realized);
            (trace(&run, &partial.space), verdict)
        }
        Err(err) => {
            let verdict = Verdict {
                decision: Decision::Reject,
                rule: "partial-failure".into(),
                span: None,
                rationale: format!("partial run failed, rejecting: {err}"),
            };
            (
                failed_trace(seeds.partial, partial.bound(), partial_input, &err),
                verdict,
            )
        }
    };
    let evaluated = clock.now();

    let (complete_trace, status) = match verdict.decision {
        Decision::Reject if partial_trace.error.is_some() => (None, GateStatus::PartialFailed),
        Decision::Reject => (None, GateStatus::Rejected),
        Decision::Approve => match run_partial(complete, &input, seeds.complete) {
            Ok(run) => (Some(trace(&run, &complete.space)), GateStatus::Completed),
            Err(err) => (
                Some(failed_trace(seeds.complete, complete.bound(), input.clone(), &err)),
                GateStatus::CompleteFailed,
            ),
        },
    };
    let finished = clock.now();

    Ok(AuditRecord {
        format: AUDIT_FORMAT.to_string(),
        prompt: prompt.to_vec(),
        condition: condition.to_vec(),
        input,
        perturbation: partial.perturbation.clone(),
        bounds: Bounds {
            partial: partial.bound(),
            complete: complete.bound(),
        },
        budgets: Bounds {
            partial: partial.budget as u64,
            complete: complete.budget as u64,
        },
        seeds,
        rng: sim::RNG_ALGORITHM.to_string(),
        partial: partial_trace,
        verdict,
        complete: complete_trace,
        status,
        timestamps: Timestamps {
            started,
            evaluated,
            finished,
        },
    })
}
