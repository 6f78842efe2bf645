//! Helpers shared by the CLI integration tests and the acceptance runner.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde::Deserialize;
use serde_json::{json, Value};

use simframe::duel;
use simframe::object::{AgentIndex, BehaviorProfile, Theta};
use simframe::pse::{self, GateSeeds, LogicalClock};
use simframe::scenario::{self, Cli, Report, Scenario};
use simframe::sim::{self, Token};

use clap::Parser;

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[derive(Debug, Clone, Deserialize)]
pub struct Case {
    pub name: String,
    pub args: Vec<String>,
}

pub fn cases() -> Vec<Case> {
    let text = std::fs::read_to_string(golden_dir().join("cases.json")).expect("cases.json");
    serde_json::from_str(&text).expect("cases parse")
}

/// Runs the built binary from the golden directory.
pub fn run_cli<S: AsRef<str>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simframe"))
        .args(args.iter().map(AsRef::as_ref))
        .current_dir(golden_dir())
        .env_remove(scenario::SCENARIO_DIR_ENV)
        .output()
        .expect("spawn simframe")
}

pub fn machine_args(case: &Case) -> Vec<String> {
    let mut args = case.args.clone();
    args.push("--machine".into());
    args
}

/// The report the library produces for the same arguments.
pub fn library_report(args: &[String]) -> Result<Report, String> {
    let cli = Cli::try_parse_from(std::iter::once("simframe".to_string()).chain(args.iter().cloned()))
        .map_err(|e| e.to_string())?;
    let path = golden_dir().join(&cli.command.common().scenario);
    let sc = scenario::parse_scenario(&path).map_err(|e| e.to_string())?;
    scenario::run_command(&sc, &cli.command).map_err(|e| e.to_string())
}

pub fn load(file: &str) -> Scenario {
    scenario::parse_scenario(&golden_dir().join("scenarios").join(file)).expect("scenario loads")
}

pub fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    let text = std::fs::read_to_string(path).expect("schema file");
    let schema: Value = serde_json::from_str(&text).expect("schema parses");
    jsonschema::validator_for(&schema).expect("schema compiles")
}

pub fn schema_errors(validator: &jsonschema::Validator, instance: &Value) -> Vec<String> {
    validator
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect()
}

fn labels(v: &[String]) -> Value {
    json!(v)
}

fn expect_eq(what: &str, got: &Value, want: &Value) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: CLI gave {got}, library gave {want}"))
    }
}

/// Recomputes the essential result of a golden case straight from the
/// domain API, bypassing the command layer.
pub fn direct_check(case: &str, result: &Value) -> Result<(), String> {
    use simframe::frame::FrameOperator as Op;
    let frames = load("frames.json");
    let objects = load("objects.json");
    let ex = &frames.frames["ex"];
    let pair = &objects.objects["pair"];
    let tilted = &objects.profiles["tilted"].profile;
    let frame_holds = |op: Op, set: &[&str]| -> Value {
        json!(ex.holds(op, &ex.world_set(set.iter().copied()).unwrap()).unwrap())
    };
    let family = |op: Op| -> Value {
        let fam = ex.enumerate(op).unwrap();
        json!(fam.iter().map(|s| ex.set_labels(s)).collect::<Vec<_>>())
    };
    match case {
        "frame-ensure-holds" => {
            expect_eq("holds", &result["holds"], &frame_holds(Op::Ensure, &["w1", "w2", "w3"]))
        }
        "frame-ensure-family" => {
            expect_eq("family", &result["family"], &family(Op::Ensure))?;
            expect_eq("count", &result["count"], &json!(169))
        }
        "frame-control" => {
            expect_eq("holds", &result["holds"], &json!(ex.controls(&ex.world_set(["w1", "w2", "w3"]).unwrap()).unwrap()))
        }
        "frame-observe-family" => expect_eq("family", &result["family"], &family(Op::Observe)),
        "frame-outcome" => expect_eq("world", &result["world"], &json!(ex.outcome_by_label("a1", "e2").unwrap())),
        "frame-inevitable-all" => {
            expect_eq("holds", &result["holds"], &json!(ex.inevitable(&ex.full_set()).unwrap()))
        }
        "frame-lamp-prevent" => {
            let lamp = &frames.frames["lamp"];
            let s = lamp.world_set(["lit"]).unwrap();
            expect_eq("holds", &result["holds"], &json!(lamp.prevents(&s).unwrap()))
        }
        "object-ensure" => {
            let s = pair.world_set(["w1", "w2"]).unwrap();
            expect_eq("holds", &result["holds"], &json!(pair.ensure_n(AgentIndex(1), &s).unwrap()))
        }
        "object-observe" => {
            let s = pair.world_set(["w1", "w3"]).unwrap();
            expect_eq("holds", &result["holds"], &json!(pair.obs_n(AgentIndex(2), &s).unwrap()))
        }
        "object-manageable" => {
            let s = pair.world_set(["w1"]).unwrap();
            let t = Theta::new(0.25).unwrap();
            expect_eq("holds", &result["holds"], &json!(pair.manageable_n(AgentIndex(1), &s, tilted, t).unwrap()))?;
            expect_eq(
                "probabilities",
                &result["probabilities"],
                &json!(pair.success_probabilities(AgentIndex(1), &s, tilted).unwrap()),
            )
        }
        "object-vimage" => {
            let t = Theta::new(0.5).unwrap();
            let img = pair.vimage_n(AgentIndex(1), tilted, t).unwrap();
            expect_eq("set", &result["set"], &labels(&pair.set_labels(&img)))
        }
        "object-outcome" => expect_eq(
            "world",
            &result["world"],
            &json!(pair.joint_outcome_by_label(&["d", "l"], "e").unwrap()),
        ),
        "sim-degenerate" | "sim-mixed" | "sim-gated" => {
            let sims = load("sim.json");
            let (name, seed, steps) = match case {
                "sim-degenerate" => ("degenerate", 3, None),
                "sim-mixed" => ("mixed", 7, Some(20)),
                _ => ("gated", 1, None),
            };
            let h = &sims.simulators[name].handle;
            let run = sim::run(&h.space, &h.selector, steps.unwrap_or(h.budget), seed).unwrap();
            expect_eq("tokens", &result["tokens"], &json!(run.tokens()))?;
            expect_eq("records", &result["records"], &json!(run.records))?;
            if case == "sim-degenerate" {
                expect_eq("tokens", &result["tokens"], &json!(["x", "x", "x", "x", "x"]))?;
            }
            Ok(())
        }
        "duel-d1" | "duel-first" => {
            let duels = load("duel.json");
            let name = if case == "duel-d1" { "d1" } else { "d-first" };
            let report = duel::run(&duels.duels[name]).unwrap();
            expect_eq("report", result, &serde_json::to_value(report).unwrap())
        }
        "pse-reject" | "pse-approve" | "pse-coarse" => {
            let sc = load("pse.json");
            let (name, seed) = match case {
                "pse-reject" => ("g1", 7),
                "pse-approve" => ("g2", 7),
                _ => ("coarse", 2),
            };
            let p = &sc.pipelines[name];
            let record = pse::gate(
                &p.partial,
                &p.evaluator,
                &p.complete,
                &p.prompt,
                &p.condition,
                GateSeeds {
                    partial: seed,
                    complete: seed + 1,
                },
                &mut LogicalClock::default(),
            )
            .unwrap();
            let want_decision = match case {
                "pse-reject" => Some(0),
                "pse-approve" => Some(1),
                _ => None,
            };
            if let Some(d) = want_decision {
                expect_eq("decision", &result["verdict"]["decision"], &json!(d))?;
            }
            expect_eq("record", result, &serde_json::to_value(record).unwrap())
        }
        other => Err(format!("no direct oracle for case `{other}`")),
    }
}

/// Uniform profile helper for callers that only need something valid.
pub fn uniform(obj: &simframe::object::CartesianObject) -> BehaviorProfile {
    BehaviorProfile::uniform(obj)
}

pub fn tokens(s: &str) -> Vec<Token> {
    sim::chars(s)
}

/// `(args, expected exit code)` pairs covering success, domain and usage
/// failures.
pub fn exit_matrix() -> Vec<(Vec<&'static str>, i32)> {
    let f = "scenarios/frames.json";
    let o = "scenarios/objects.json";
    vec![
        (vec!["frame", "--scenario", f, "--name", "ex"], 0),
        (vec!["--help"], 0),
        (vec!["--version"], 0),
        (vec![], 2),
        (vec!["explode"], 2),
        (vec!["frame", "--scenario", f], 2),
        (vec!["frame", "--scenario", f, "--name", "ex", "--op", "nope"], 2),
        (vec!["frame", "--scenario", f, "--name", "ex", "--set", "w1"], 2),
        (vec!["frame", "--scenario", f, "--name", "ex", "--action", "a1"], 2),
        (vec!["object", "--scenario", o, "--name", "pair", "--op", "manageable", "--set", "w1"], 2),
        (vec!["object", "--scenario", o, "--name", "pair", "--theta", "abc", "--op", "vimage"], 2),
        (vec!["object", "--scenario", o, "--name", "pair", "--op", "image", "--set", "w1"], 2),
        (vec!["duel", "--scenario", "scenarios/duel.json", "--name", "d1", "--seed", "3"], 2),
        (vec!["frame", "--scenario", "scenarios/absent.json", "--name", "ex"], 1),
        (vec!["frame", "--scenario", "bad/version.json", "--name", "ex"], 1),
        (vec!["frame", "--scenario", "bad/parse.json", "--name", "ex"], 1),
        (vec!["sim", "--scenario", "bad/dangling.json", "--name", "sim"], 1),
        (vec!["object", "--scenario", "bad/distribution.json", "--name", "o"], 1),
        (vec!["frame", "--scenario", f, "--name", "missing"], 1),
        (vec!["frame", "--scenario", f, "--name", "ex", "--op", "ensure", "--set", "w42"], 1),
        (vec!["frame", "--scenario", f, "--name", "ex", "--action", "a9", "--env", "e1"], 1),
        (vec!["object", "--scenario", o, "--name", "pair", "--op", "vimage", "--theta", "1.5"], 1),
        (vec!["object", "--scenario", o, "--name", "pair", "--agent", "3", "--op", "image"], 1),
    ]
}
