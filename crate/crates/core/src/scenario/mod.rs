//! Scenario files and the command front end.
//!
//! A scenario is one JSON document with a `version` and named sections.
//! Loading validates everything up front, so a [`Scenario`] value only
//! holds objects the library accepted. Problems come back as a
//! [`Diagnostic`] carrying a field path and a class.

mod command;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use command::{
    execute, main_with, pse_seeds, run_command, Cli, CliError, Command, Common, DuelArgs,
    FrameArgs, ObjectArgs, ObjectOp, PseArgs, Report, SimArgs, VERSION_STAMP,
};
pub use render::render_human;

use crate::duel::DuelConfig;
use crate::frame::CartesianFrame;
use crate::object::{AgentIndex, BehaviorProfile, CartesianObject, Distribution};
use crate::pse::{self, EvaluatorSpec, GateSeeds, PerturbationConfig, SimulatorHandle};
use crate::sim::{
    self, Alphabet, ContextEntry, EventSpace, SimEvent, Simulacrum, Token, TokenSelector,
};

/// The only scenario format version understood.
pub const SCENARIO_VERSION: u32 = 1;

/// Relative scenario paths not found in the working directory are looked
/// up here.
pub const SCENARIO_DIR_ENV: &str = "SIMFRAME_SCENARIO_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticClass {
    MissingFile,
    Parse,
    UnknownVersion,
    DanglingReference,
    Invariant,
}

impl DiagnosticClass {
    pub fn name(self) -> &'static str {
        match self {
            DiagnosticClass::MissingFile => "missing-file",
            DiagnosticClass::Parse => "parse",
            DiagnosticClass::UnknownVersion => "unknown-version",
            DiagnosticClass::DanglingReference => "dangling-reference",
            DiagnosticClass::Invariant => "invariant",
        }
    }
}

impl fmt::Display for DiagnosticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A scenario problem, located by a dotted field path such as
/// `profiles.p1.env`.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{class}: {path}: {message}")]
pub struct Diagnostic {
    pub class: DiagnosticClass,
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(class: DiagnosticClass, path: impl Into<String>, message: impl fmt::Display) -> Self {
        Diagnostic {
            class,
            path: path.into(),
            message: message.to_string(),
        }
    }

    fn invariant(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::new(DiagnosticClass::Invariant, path, message)
    }

    fn dangling(path: impl Into<String>, kind: &str, name: &str) -> Self {
        Self::new(
            DiagnosticClass::DanglingReference,
            path,
            format!("no {kind} named `{name}`"),
        )
    }
}

// On-disk shapes. Validation turns these into library values.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    version: u32,
    #[serde(default)]
    frames: Vec<RawFrame>,
    #[serde(default)]
    objects: Vec<RawObject>,
    #[serde(default)]
    profiles: Vec<RawProfile>,
    #[serde(default)]
    event_spaces: Vec<RawEventSpace>,
    #[serde(default)]
    selectors: Vec<RawSelector>,
    #[serde(default)]
    simulators: Vec<RawSimulator>,
    #[serde(default)]
    duels: Vec<RawDuel>,
    #[serde(default)]
    evaluators: Vec<RawEvaluator>,
    #[serde(default)]
    pipelines: Vec<RawPipeline>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    name: String,
    actions: Vec<String>,
    envs: Vec<String>,
    #[serde(default)]
    worlds: Option<Vec<String>>,
    /// One row per action, one entry per environment.
    matrix: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    name: String,
    agents: Vec<Vec<String>>,
    envs: Vec<String>,
    #[serde(default)]
    worlds: Option<Vec<String>>,
    /// Row-major over (agent 1, …, agent n, environment).
    table: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    name: String,
    object: String,
    agents: Vec<Option<Vec<f64>>>,
    env: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEventSpace {
    name: String,
    /// Defaults to the largest event complexity, admitting every event.
    #[serde(default)]
    bound: Option<u64>,
    events: Vec<RawEvent>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    id: String,
    object: String,
    #[serde(default)]
    profile: Option<String>,
    #[serde(default = "one")]
    weight: f64,
    simulacra: Vec<Simulacrum>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSelector {
    name: String,
    alphabet: Vec<Token>,
    #[serde(default)]
    entries: Vec<ContextEntry>,
    #[serde(default)]
    default: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulator {
    name: String,
    space: String,
    selector: String,
    steps: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
struct RawDuel {
    name: String,
    #[serde(flatten)]
    config: DuelConfig,
}

#[derive(Debug, Deserialize)]
struct RawEvaluator {
    name: String,
    #[serde(flatten)]
    spec: EvaluatorSpec,
}

fn default_seeds() -> GateSeeds {
    GateSeeds {
        partial: 0,
        complete: 1,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPipeline {
    name: String,
    simulator: String,
    evaluator: String,
    perturbation: PerturbationConfig,
    #[serde(default)]
    prompt: Vec<Token>,
    #[serde(default)]
    condition: Vec<Token>,
    #[serde(default = "default_seeds")]
    seeds: GateSeeds,
}

/// A behavior profile and the object it was written for.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedProfile {
    pub object: String,
    pub profile: BehaviorProfile,
}

/// A runnable simulator with its default seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorEntry {
    pub handle: SimulatorHandle,
    pub seed: u64,
}

/// A gate wired up: partial handle derived from the complete one.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub complete: SimulatorHandle,
    pub partial: SimulatorHandle,
    pub evaluator: EvaluatorSpec,
    pub prompt: Vec<Token>,
    pub condition: Vec<Token>,
    pub seeds: GateSeeds,
}

/// A validated scenario. Sections are keyed by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub version: u32,
    pub frames: BTreeMap<String, CartesianFrame>,
    pub objects: BTreeMap<String, CartesianObject>,
    pub profiles: BTreeMap<String, NamedProfile>,
    pub event_spaces: BTreeMap<String, EventSpace>,
    pub selectors: BTreeMap<String, TokenSelector>,
    pub simulators: BTreeMap<String, SimulatorEntry>,
    pub duels: BTreeMap<String, DuelConfig>,
    pub evaluators: BTreeMap<String, EvaluatorSpec>,
    pub pipelines: BTreeMap<String, Pipeline>,
}

/// Resolves a `--scenario` argument: as given if it exists, else under
/// the scenario directory from the environment.
pub fn resolve_path(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(SCENARIO_DIR_ENV) {
            return Path::new(&dir).join(path);
        }
    }
    path.to_path_buf()
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, Diagnostic> {
    let path = resolve_path(path);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Diagnostic::new(DiagnosticClass::MissingFile, path.display().to_string(), e)
    })?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, Diagnostic> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Diagnostic::new(DiagnosticClass::Parse, "", e))?;
    match value.get("version") {
        None => {
            return Err(Diagnostic::new(
                DiagnosticClass::UnknownVersion,
                "version",
                "missing",
            ))
        }
        Some(v) if v.as_u64() != Some(SCENARIO_VERSION as u64) => {
            return Err(Diagnostic::new(
                DiagnosticClass::UnknownVersion,
                "version",
                format!("unsupported version {v}, expected {SCENARIO_VERSION}"),
            ))
        }
        Some(_) => {}
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawScenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Diagnostic::new(
            DiagnosticClass::Parse,
            if path == "." { String::new() } else { path },
            e.into_inner(),
        )
    })?;
    build(raw)
}

fn unique<'a, I>(section: &str, names: I) -> Result<(), Diagnostic>
where
    I: IntoIterator<Item = &'a String>,
{
    let mut seen = BTreeSet::new();
    for (i, n) in names.into_iter().enumerate() {
        if !seen.insert(n) {
            return Err(Diagnostic::invariant(
                format!("{section}[{i}].name"),
                format!("name `{n}` is used twice"),
            ));
        }
    }
    Ok(())
}

fn lookup<'a, T>(
    map: &'a BTreeMap<String, T>,
    path: String,
    kind: &str,
    name: &str,
) -> Result<&'a T, Diagnostic> {
    map.get(name)
        .ok_or_else(|| Diagnostic::dangling(path, kind, name))
}

fn build(raw: RawScenario) -> Result<Scenario, Diagnostic> {
    let mut sc = Scenario {
        version: raw.version,
        ..Scenario::default()
    };

    unique("frames", raw.frames.iter().map(|x| &x.name))?;
    unique("objects", raw.objects.iter().map(|x| &x.name))?;
    unique("profiles", raw.profiles.iter().map(|x| &x.name))?;
    unique("event_spaces", raw.event_spaces.iter().map(|x| &x.name))?;
    unique("selectors", raw.selectors.iter().map(|x| &x.name))?;
    unique("simulators", raw.simulators.iter().map(|x| &x.name))?;
    unique("duels", raw.duels.iter().map(|x| &x.name))?;
    unique("evaluators", raw.evaluators.iter().map(|x| &x.name))?;
    unique("pipelines", raw.pipelines.iter().map(|x| &x.name))?;

    for f in raw.frames {
        let at = format!("frames.{}", f.name);
        if f.matrix.len() != f.actions.len() {
            return Err(Diagnostic::invariant(
                format!("{at}.matrix"),
                format!("{} rows for {} actions", f.matrix.len(), f.actions.len()),
            ));
        }
        if let Some(i) = f.matrix.iter().position(|r| r.len() != f.envs.len()) {
            return Err(Diagnostic::invariant(
                format!("{at}.matrix[{i}]"),
                format!("{} entries for {} environments", f.matrix[i].len(), f.envs.len()),
            ));
        }
        let cells: Vec<String> = f.matrix.into_iter().flatten().collect();
        let frame = match f.worlds {
            Some(w) => CartesianFrame::new(f.actions, f.envs, w, cells),
            None => CartesianFrame::from_matrix(f.actions, f.envs, cells),
        }
        .map_err(|e| Diagnostic::invariant(at, e))?;
        sc.frames.insert(f.name, frame);
    }

    for o in raw.objects {
        let at = format!("objects.{}", o.name);
        let obj = CartesianObject::new(o.agents, o.envs, o.worlds, o.table)
            .map_err(|e| Diagnostic::invariant(at, e))?;
        sc.objects.insert(o.name, obj);
    }

    for p in raw.profiles {
        let at = format!("profiles.{}", p.name);
        let obj = lookup(&sc.objects, format!("{at}.object"), "object", &p.object)?;
        if p.agents.len() != obj.agent_count() {
            return Err(Diagnostic::invariant(
                format!("{at}.agents"),
                format!(
                    "profile `{}` lists {} agents, object `{}` has {}",
                    p.name,
                    p.agents.len(),
                    p.object,
                    obj.agent_count()
                ),
            ));
        }
        let mut agents = Vec::with_capacity(p.agents.len());
        for (i, d) in p.agents.into_iter().enumerate() {
            let here = format!("{at}.agents[{i}]");
            agents.push(match d {
                None => None,
                Some(probs) => {
                    let n = obj
                        .agent_actions(AgentIndex(i + 1))
                        .map_err(|e| Diagnostic::invariant(&here, e))?
                        .len();
                    if probs.len() != n {
                        return Err(Diagnostic::invariant(
                            here,
                            format!("profile `{}`: {} entries for {n} actions", p.name, probs.len()),
                        ));
                    }
                    let owner = format!("profile `{}` agent {}", p.name, i + 1);
                    Some(
                        Distribution::new(probs, &owner)
                            .map_err(|e| Diagnostic::invariant(here, e))?,
                    )
                }
            });
        }
        if p.env.len() != obj.envs().len() {
            return Err(Diagnostic::invariant(
                format!("{at}.env"),
                format!(
                    "profile `{}`: {} entries for {} environment states",
                    p.name,
                    p.env.len(),
                    obj.envs().len()
                ),
            ));
        }
        let env = Distribution::new(p.env, &format!("profile `{}` environment", p.name))
            .map_err(|e| Diagnostic::invariant(format!("{at}.env"), e))?;
        sc.profiles.insert(
            p.name,
            NamedProfile {
                object: p.object,
                profile: BehaviorProfile { agents, env },
            },
        );
    }

    for s in raw.event_spaces {
        let at = format!("event_spaces.{}", s.name);
        let mut events = Vec::with_capacity(s.events.len());
        for (i, e) in s.events.into_iter().enumerate() {
            let here = format!("{at}.events[{i}]");
            let obj = lookup(&sc.objects, format!("{here}.object"), "object", &e.object)?;
            let mut ev = SimEvent::new(e.id, obj.clone(), e.simulacra, e.weight);
            if let Some(pname) = &e.profile {
                let p = lookup(&sc.profiles, format!("{here}.profile"), "profile", pname)?;
                if p.object != e.object {
                    return Err(Diagnostic::invariant(
                        format!("{here}.profile"),
                        format!(
                            "profile `{pname}` is for object `{}`, not `{}`",
                            p.object, e.object
                        ),
                    ));
                }
                ev = ev.with_profile(p.profile.clone());
            }
            events.push(ev);
        }
        let bound = s.bound.unwrap_or_else(|| {
            events
                .iter()
                .map(|e| sim::event_complexity(e, &sim::CanonicalLength))
                .max()
                .unwrap_or(0)
        });
        let space = EventSpace::new(events, bound).map_err(|e| Diagnostic::invariant(at, e))?;
        sc.event_spaces.insert(s.name, space);
    }

    for s in raw.selectors {
        let at = format!("selectors.{}", s.name);
        let alphabet =
            Alphabet::new(s.alphabet).map_err(|e| Diagnostic::invariant(format!("{at}.alphabet"), e))?;
        let sel = TokenSelector::new(alphabet, s.entries, s.default)
            .map_err(|e| Diagnostic::invariant(at, e))?;
        sc.selectors.insert(s.name, sel);
    }

    for s in raw.simulators {
        let at = format!("simulators.{}", s.name);
        let space = lookup(&sc.event_spaces, format!("{at}.space"), "event space", &s.space)?;
        let selector = lookup(&sc.selectors, format!("{at}.selector"), "selector", &s.selector)?;
        sc.simulators.insert(
            s.name,
            SimulatorEntry {
                handle: SimulatorHandle::new(space.clone(), selector.clone(), s.steps),
                seed: s.seed,
            },
        );
    }

    for d in raw.duels {
        d.config
            .validate()
            .map_err(|e| Diagnostic::invariant(format!("duels.{}", d.name), e))?;
        sc.duels.insert(d.name, d.config);
    }

    for e in raw.evaluators {
        e.spec
            .validate()
            .map_err(|err| Diagnostic::invariant(format!("evaluators.{}", e.name), err))?;
        sc.evaluators.insert(e.name, e.spec);
    }

    for p in raw.pipelines {
        let at = format!("pipelines.{}", p.name);
        let sim = lookup(&sc.simulators, format!("{at}.simulator"), "simulator", &p.simulator)?;
        let evaluator = lookup(&sc.evaluators, format!("{at}.evaluator"), "evaluator", &p.evaluator)?;
        let partial = pse::perturb(&sim.handle, &p.perturbation)
            .map_err(|e| Diagnostic::invariant(format!("{at}.perturbation"), e))?;
        pse::compose_input(&p.prompt, &p.condition, sim.handle.alphabet())
            .map_err(|e| Diagnostic::invariant(format!("{at}.prompt"), e))?;
        sc.pipelines.insert(
            p.name,
            Pipeline {
                complete: sim.handle.clone(),
                partial,
                evaluator: evaluator.clone(),
                prompt: p.prompt,
                condition: p.condition,
                seeds: p.seeds,
            },
        );
    }

    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": 1,
        "frames": [{
            "name": "ex",
            "actions": ["a1", "a2", "a3"],
            "envs": ["e1", "e2", "e3"],
            "matrix": [["w1","w2","w3"],["w4","w5","w6"],["w7","w8","w9"]]
        }]
    }"#;

    fn class_of(text: &str) -> Diagnostic {
        parse_scenario_str(text).unwrap_err()
    }

    #[test]
    fn minimal_frame() {
        let sc = parse_scenario_str(MINIMAL).unwrap();
        assert_eq!(sc.frames.len(), 1);
        assert_eq!(sc.frames["ex"], CartesianFrame::distinct_grid(3, 3).unwrap());
    }

    #[test]
    fn version_checks() {
        assert_eq!(class_of("{}").class, DiagnosticClass::UnknownVersion);
        assert_eq!(class_of(r#"{"version": 7}"#).class, DiagnosticClass::UnknownVersion);
        assert_eq!(class_of("{").class, DiagnosticClass::Parse);
    }

    #[test]
    fn parse_errors_carry_paths() {
        let d = class_of(r#"{"version":1,"frames":[{"name":"f","actions":[],"envs":["e"],"matrix":[],"colour":1}]}"#);
        assert_eq!(d.class, DiagnosticClass::Parse);
        assert!(d.path.starts_with("frames[0]"), "{d}");
    }

    #[test]
    fn missing_file() {
        let d = parse_scenario(Path::new("/nonexistent/scenario.json")).unwrap_err();
        assert_eq!(d.class, DiagnosticClass::MissingFile);
    }

    #[test]
    fn dangling_selector() {
        let d = class_of(
            r#"{"version":1,
                "objects":[{"name":"o","agents":[["a"]],"envs":["e"],"table":["w"]}],
                "event_spaces":[{"name":"s","events":[{"id":"ev","object":"o","simulacra":[{"id":"x","actions":[],"description":""}]}]}],
                "simulators":[{"name":"sim","space":"s","selector":"nope","steps":3}]}"#,
        );
        assert_eq!(d.class, DiagnosticClass::DanglingReference);
        assert_eq!(d.path, "simulators.sim.selector");
    }

    #[test]
    fn bad_distribution_names_profile() {
        let d = class_of(
            r#"{"version":1,
                "objects":[{"name":"o","agents":[["a","b"]],"envs":["e"],"table":["w","v"]}],
                "profiles":[{"name":"lopsided","object":"o","agents":[[0.5,0.4]],"env":[1.0]}]}"#,
        );
        assert_eq!(d.class, DiagnosticClass::Invariant);
        assert!(d.path.contains("lopsided"));
        assert!(d.message.contains("lopsided"), "{d}");
    }

    #[test]
    fn duplicate_names() {
        let d = class_of(r#"{"version":1,"duels":[
            {"name":"d","k":3,"p1":[1,0,0],"p2":[0,0,1],"xi":0.5,"eta":0.1,"n0":2},
            {"name":"d","k":3,"p1":[1,0,0],"p2":[0,0,1],"xi":0.5,"eta":0.1,"n0":2}]}"#);
        assert_eq!(d.class, DiagnosticClass::Invariant);
        assert_eq!(d.path, "duels[1].name");
    }

    #[test]
    fn env_dir_fallback() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("only-here.json"), MINIMAL).unwrap();
        std::env::set_var(SCENARIO_DIR_ENV, dir.path());
        let got = resolve_path(Path::new("only-here.json"));
        std::env::remove_var(SCENARIO_DIR_ENV);
        assert_eq!(got, dir.path().join("only-here.json"));
    }
}
