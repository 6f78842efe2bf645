//! Commands over a loaded scenario, and the process entry point.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::{lookup, parse_scenario, render_human, Diagnostic, Scenario};
use crate::duel;
use crate::frame::{CartesianFrame, FrameOperator};
use crate::object::{AgentIndex, BehaviorProfile, CartesianObject, Theta};
use crate::pse::{self, AuditLog, GateSeeds, LogicalClock};
use crate::sim::{self, Token};
use crate::worldset::WorldSet;

/// Stamped into every report.
pub const VERSION_STAMP: &str = concat!("simframe ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Scenario(#[from] Diagnostic),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    /// 1 for scenario and domain errors, 2 for usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Scenario(_) | CliError::Domain(_) => 1,
        }
    }

    fn domain(e: impl std::fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "simframe", version, about = "Run scenario files against the simframe library")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Scenario file; relative paths fall back to $SIMFRAME_SCENARIO_DIR.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Entry in the relevant scenario section.
    #[arg(long)]
    pub name: String,
    /// Print the JSON report instead of tables.
    #[arg(long)]
    #[serde(skip)]
    pub machine: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Query a frame: an outcome, one operator on a set, or a whole family.
    Frame(FrameArgs),
    /// Query an agent of a Cartesian object.
    Object(ObjectArgs),
    /// Run a simulator.
    Sim(SimArgs),
    /// Iterate an optimizer duel to its equilibrium.
    Duel(DuelArgs),
    /// Pass a prompt through a partial-simulation gate.
    Pse(PseArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrameArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub op: Option<FrameOperator>,
    /// Comma-separated world labels; an empty string is the empty set.
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long)]
    pub action: Option<String>,
    #[arg(long)]
    pub env: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectOp {
    Ensure,
    Prevent,
    Control,
    Observe,
    Inevitable,
    Image,
    Manageable,
    Vimage,
    Viable,
}

impl ObjectOp {
    fn needs_set(self) -> bool {
        !matches!(self, ObjectOp::Image | ObjectOp::Vimage)
    }

    fn needs_theta(self) -> bool {
        matches!(self, ObjectOp::Manageable | ObjectOp::Vimage | ObjectOp::Viable)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ObjectArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// One-based agent index.
    #[arg(long, default_value_t = 1)]
    pub agent: usize,
    #[arg(long, value_enum)]
    pub op: Option<ObjectOp>,
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Behavior profile; uniform when omitted.
    #[arg(long)]
    pub profile: Option<String>,
    /// Comma-separated joint action, one label per agent.
    #[arg(long)]
    pub action: Option<String>,
    #[arg(long)]
    pub env: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Comma-separated prompt tokens.
    #[arg(long)]
    pub prompt: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DuelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Seed for the partial run; the complete run uses seed + 1.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Append the audit record to this JSON Lines file.
    #[arg(long)]
    #[serde(skip)]
    pub audit_log: Option<PathBuf>,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Frame(a) => &a.common,
            Command::Object(a) => &a.common,
            Command::Sim(a) => &a.common,
            Command::Duel(a) => &a.common,
            Command::Pse(a) => &a.common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Frame(_) => "frame",
            Command::Object(_) => "object",
            Command::Sim(_) => "sim",
            Command::Duel(_) => "duel",
            Command::Pse(_) => "pse",
        }
    }
}

/// The outcome of one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub command: String,
    /// The parsed flags, echoed back.
    pub args: Value,
    pub seeds: Vec<u64>,
    pub result: Value,
    pub version: String,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(String::from)
        .collect()
}

fn frame_set(frame: &CartesianFrame, s: &str) -> Result<WorldSet, CliError> {
    frame.world_set(split_list(s)).map_err(CliError::domain)
}

fn object_set(obj: &CartesianObject, s: &str) -> Result<WorldSet, CliError> {
    obj.world_set(split_list(s)).map_err(CliError::domain)
}

fn run_frame(sc: &Scenario, a: &FrameArgs) -> Result<Value, CliError> {
    let name = &a.common.name;
    let frame = lookup(&sc.frames, "--name".into(), "frame", name)?;
    match (&a.action, &a.env, a.op, &a.set) {
        (Some(action), Some(env), None, None) => {
            let world = frame.outcome_by_label(action, env).map_err(CliError::domain)?;
            Ok(json!({"kind": "outcome", "action": action, "env": env, "world": world}))
        }
        (Some(_), None, ..) | (None, Some(_), ..) => {
            Err(CliError::Usage("--action and --env go together".into()))
        }
        (Some(_), Some(_), ..) => Err(CliError::Usage(
            "--action/--env cannot be combined with --op or --set".into(),
        )),
        (None, None, Some(op), Some(set)) => {
            let set = frame_set(frame, set)?;
            let holds = frame.holds(op, &set).map_err(CliError::domain)?;
            Ok(json!({
                "kind": "holds",
                "operator": op,
                "set": frame.set_labels(&set),
                "holds": holds,
            }))
        }
        (None, None, Some(op), None) => {
            let family = frame.enumerate(op).map_err(CliError::domain)?;
            let labels: Vec<Vec<String>> = family.iter().map(|s| frame.set_labels(s)).collect();
            Ok(json!({
                "kind": "family",
                "operator": op,
                "count": labels.len(),
                "family": labels,
            }))
        }
        (None, None, None, Some(_)) => Err(CliError::Usage("--set needs --op".into())),
        (None, None, None, None) => Ok(json!({
            "kind": "describe",
            "actions": frame.actions(),
            "envs": frame.envs(),
            "worlds": frame.worlds(),
            "image": frame.set_labels(&frame.image()),
        })),
    }
}

fn run_object(sc: &Scenario, a: &ObjectArgs) -> Result<Value, CliError> {
    let name = &a.common.name;
    let obj = lookup(&sc.objects, "--name".into(), "object", name)?;
    let agent = AgentIndex(a.agent);
    if let (Some(action), Some(env)) = (&a.action, &a.env) {
        if a.op.is_some() || a.set.is_some() {
            return Err(CliError::Usage(
                "--action/--env cannot be combined with --op or --set".into(),
            ));
        }
        let joint = split_list(action);
        let world = obj
            .joint_outcome_by_label(&joint, env)
            .map_err(CliError::domain)?;
        return Ok(json!({"kind": "outcome", "action": joint, "env": env, "world": world}));
    }
    if a.action.is_some() || a.env.is_some() {
        return Err(CliError::Usage("--action and --env go together".into()));
    }
    let Some(op) = a.op else {
        if a.set.is_some() || a.theta.is_some() {
            return Err(CliError::Usage("--set and --theta need --op".into()));
        }
        let agents: Result<Vec<&[String]>, _> = (1..=obj.agent_count())
            .map(|i| obj.agent_actions(AgentIndex(i)))
            .collect();
        return Ok(json!({
            "kind": "describe",
            "agents": agents.map_err(CliError::domain)?,
            "envs": obj.envs(),
            "worlds": obj.worlds(),
        }));
    };
    let set = match (&a.set, op.needs_set()) {
        (Some(s), true) => Some(object_set(obj, s)?),
        (None, true) => return Err(CliError::Usage(format!("--op {op:?} needs --set").to_lowercase())),
        (Some(_), false) => return Err(CliError::Usage("this operator takes no --set".into())),
        (None, false) => None,
    };
    let theta = match (a.theta, op.needs_theta()) {
        (Some(t), true) => Some(Theta::new(t).map_err(CliError::domain)?),
        (None, true) => return Err(CliError::Usage(format!("--op {op:?} needs --theta").to_lowercase())),
        (Some(_), false) => return Err(CliError::Usage("this operator takes no --theta".into())),
        (None, false) => None,
    };
    let profile = match &a.profile {
        Some(p) => {
            let named = lookup(&sc.profiles, "--profile".into(), "profile", p)?;
            if named.object != *name {
                return Err(CliError::Domain(format!(
                    "profile `{p}` is for object `{}`, not `{name}`",
                    named.object
                )));
            }
            named.profile.clone()
        }
        None => BehaviorProfile::uniform(obj),
    };
    let d = CliError::domain;
    let holds = |h: bool, set: &WorldSet| {
        json!({
            "kind": "holds",
            "operator": op,
            "agent": a.agent,
            "set": obj.set_labels(set),
            "holds": h,
        })
    };
    Ok(match (op, set, theta) {
        (ObjectOp::Ensure, Some(s), _) => holds(obj.ensure_n(agent, &s).map_err(d)?, &s),
        (ObjectOp::Prevent, Some(s), _) => holds(obj.prevent_n(agent, &s).map_err(d)?, &s),
        (ObjectOp::Control, Some(s), _) => holds(obj.ctrl_n(agent, &s).map_err(d)?, &s),
        (ObjectOp::Observe, Some(s), _) => holds(obj.obs_n(agent, &s).map_err(d)?, &s),
        (ObjectOp::Inevitable, Some(s), _) => holds(obj.inevitable_n(agent, &s).map_err(d)?, &s),
        (ObjectOp::Image, None, None) => {
            let img = obj.image_n(agent).map_err(d)?;
            json!({"kind": "set", "operator": op, "agent": a.agent, "set": obj.set_labels(&img)})
        }
        (ObjectOp::Manageable, Some(s), Some(t)) => {
            let probs = obj.success_probabilities(agent, &s, &profile).map_err(d)?;
            let h = obj.manageable_n(agent, &s, &profile, t).map_err(d)?;
            let mut v = holds(h, &s);
            v["theta"] = json!(t.get());
            v["actions"] = json!(obj.agent_actions(agent).map_err(d)?);
            v["probabilities"] = json!(probs);
            v
        }
        (ObjectOp::Viable, Some(s), Some(t)) => {
            let h = obj.viable_n(agent, &s, &profile, t).map_err(d)?;
            let mut v = holds(h, &s);
            v["theta"] = json!(t.get());
            v
        }
        (ObjectOp::Vimage, None, Some(t)) => {
            let img = obj.vimage_n(agent, &profile, t).map_err(d)?;
            let probs = obj.world_probabilities(agent, &profile).map_err(d)?;
            json!({
                "kind": "set",
                "operator": op,
                "agent": a.agent,
                "theta": t.get(),
                "set": obj.set_labels(&img),
                "probabilities": probs,
            })
        }
        _ => unreachable!("flag combinations checked above"),
    })
}

fn run_sim(sc: &Scenario, a: &SimArgs) -> Result<(Value, Vec<u64>), CliError> {
    let entry = lookup(&sc.simulators, "--name".into(), "simulator", &a.common.name)?;
    let seed = a.seed.unwrap_or(entry.seed);
    let steps = a.steps.unwrap_or(entry.handle.budget);
    let prompt: Vec<Token> = a
        .prompt
        .as_deref()
        .map(|p| split_list(p).into_iter().map(Token).collect())
        .unwrap_or_default();
    let run = sim::run_with_prompt(
        &entry.handle.space,
        &entry.handle.selector,
        prompt.clone(),
        steps,
        seed,
    )
    .map_err(CliError::domain)?;
    let state = run.final_state();
    Ok((
        json!({
            "rng": run.rng,
            "bound": run.bound,
            "steps": steps,
            "prompt": prompt,
            "tokens": state.trajectory,
            "realized": state.realized,
            "records": run.records,
        }),
        vec![seed],
    ))
}

fn run_duel(sc: &Scenario, a: &DuelArgs) -> Result<Value, CliError> {
    let config = lookup(&sc.duels, "--name".into(), "duel", &a.common.name)?;
    let report = duel::run(config).map_err(CliError::domain)?;
    Ok(serde_json::to_value(report).expect("reports serialize"))
}

/// Seeds for a gate pass: the pipeline's own, or `--seed` and `--seed + 1`.
pub fn pse_seeds(sc: &Scenario, a: &PseArgs) -> Result<GateSeeds, CliError> {
    let p = lookup(&sc.pipelines, "--name".into(), "pipeline", &a.common.name)?;
    Ok(match a.seed {
        Some(s) => GateSeeds {
            partial: s,
            complete: s.wrapping_add(1),
        },
        None => p.seeds,
    })
}

fn run_pse(sc: &Scenario, a: &PseArgs) -> Result<(pse::AuditRecord, Vec<u64>), CliError> {
    let p = lookup(&sc.pipelines, "--name".into(), "pipeline", &a.common.name)?;
    let seeds = pse_seeds(sc, a)?;
    let record = pse::gate(
        &p.partial,
        &p.evaluator,
        &p.complete,
        &p.prompt,
        &p.condition,
        seeds,
        &mut LogicalClock::default(),
    )
    .map_err(CliError::domain)?;
    Ok((record, vec![seeds.partial, seeds.complete]))
}

/// Dispatches `command` against a loaded scenario.
pub fn run_command(scenario: &Scenario, command: &Command) -> Result<Report, CliError> {
    let (result, seeds) = match command {
        Command::Frame(a) => (run_frame(scenario, a)?, vec![]),
        Command::Object(a) => (run_object(scenario, a)?, vec![]),
        Command::Sim(a) => run_sim(scenario, a)?,
        Command::Duel(a) => (run_duel(scenario, a)?, vec![]),
        Command::Pse(a) => {
            let (record, seeds) = run_pse(scenario, a)?;
            (serde_json::to_value(record).expect("records serialize"), seeds)
        }
    };
    let mut args = serde_json::to_value(command).expect("args serialize");
    if let Value::Object(map) = &mut args {
        map.remove("command");
    }
    Ok(Report {
        command: command.name().to_string(),
        args,
        seeds,
        result,
        version: VERSION_STAMP.to_string(),
    })
}

/// Loads the scenario, runs the command, writes the audit log if asked,
/// and renders the report.
pub fn execute(command: &Command) -> Result<String, CliError> {
    let scenario = parse_scenario(&command.common().scenario)?;
    let report = run_command(&scenario, command)?;
    if let Command::Pse(PseArgs {
        audit_log: Some(path),
        ..
    }) = command
    {
        let record: pse::AuditRecord =
            serde_json::from_value(report.result.clone()).expect("pse reports hold a record");
        AuditLog::new(path)
            .append(&record)
            .map_err(|e| CliError::Domain(format!("audit log {}: {e}", path.display())))?;
    }
    Ok(if command.common().machine {
        let mut s = serde_json::to_string_pretty(&report).expect("reports serialize");
        s.push('\n');
        s
    } else {
        render_human(&report)
    })
}

/// Process entry point; returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { out } else { err };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let class = match &e {
                CliError::Usage(_) => "usage".to_string(),
                CliError::Scenario(d) => d.class.to_string(),
                CliError::Domain(_) => "domain".to_string(),
            };
            let _ = writeln!(err, "error[{class}]: {e}");
            e.exit_code()
        }
    }
}
