//! Plain-text tables for reports.

use std::fmt::Write;

use serde_json::Value;

use super::Report;

fn text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn set(v: &Value) -> String {
    let items: Vec<String> = v
        .as_array()
        .map(|a| a.iter().map(text).collect())
        .unwrap_or_default();
    format!("{{{}}}", items.join(", "))
}

fn tokens(v: &Value) -> String {
    v.as_array()
        .map(|a| a.iter().map(text).collect())
        .unwrap_or_default()
}

/// Left-aligned columns separated by two spaces.
fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header.iter().map(|h| h.to_string()).collect()));
    for row in rows {
        let _ = writeln!(out, "{}", line(row.clone()));
    }
}

fn fmt_f(v: &Value) -> String {
    v.as_f64().map(|x| format!("{x:.6}")).unwrap_or_else(|| text(v))
}

/// Renders a report for people; `--machine` prints the JSON instead.
pub fn render_human(report: &Report) -> String {
    let mut out = String::new();
    let r = &report.result;
    let _ = writeln!(
        out,
        "{} {}  ({})",
        report.command,
        text(&report.args["name"]),
        report.version
    );
    if !report.seeds.is_empty() {
        let seeds: Vec<String> = report.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds: {}", seeds.join(", "));
    }
    match (report.command.as_str(), r["kind"].as_str()) {
        (_, Some("outcome")) => {
            let action = match &r["action"] {
                Value::Array(_) => set(&r["action"]),
                other => text(other),
            };
            let _ = writeln!(out, "{action} · {} = {}", text(&r["env"]), text(&r["world"]));
        }
        (_, Some("holds")) => {
            let _ = writeln!(
                out,
                "{}({}) = {}",
                text(&r["operator"]),
                set(&r["set"]),
                text(&r["holds"])
            );
            if let Some(p) = r["probabilities"].as_array() {
                let rows: Vec<Vec<String>> = p
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let label = r["actions"].get(i).map(text).unwrap_or((i + 1).to_string());
                        vec![label, fmt_f(x)]
                    })
                    .collect();
                table(&mut out, &["action", "probability"], &rows);
            }
        }
        (_, Some("set")) => {
            let _ = writeln!(out, "{} = {}", text(&r["operator"]), set(&r["set"]));
        }
        (_, Some("family")) => {
            let _ = writeln!(out, "{}: {} sets", text(&r["operator"]), text(&r["count"]));
            if let Some(f) = r["family"].as_array() {
                for s in f {
                    let _ = writeln!(out, "  {}", set(s));
                }
            }
        }
        (_, Some("describe")) => {
            for (k, v) in r.as_object().into_iter().flatten() {
                if k != "kind" {
                    let _ = writeln!(out, "{k}: {}", v);
                }
            }
        }
        ("sim", _) => {
            let _ = writeln!(out, "prompt: {}", tokens(&r["prompt"]));
            let _ = writeln!(out, "tokens: {}", tokens(&r["tokens"]));
            let rows: Vec<Vec<String>> = r["records"]
                .as_array()
                .into_iter()
                .flatten()
                .map(|rec| {
                    vec![
                        text(&rec["t"]),
                        text(&rec["event"]),
                        text(&rec["realized"]["world"]),
                        text(&rec["token"]),
                        text(&rec["rng_digest"]),
                    ]
                })
                .collect();
            table(&mut out, &["t", "event", "world", "token", "rng"], &rows);
        }
        ("duel", _) => {
            let rows: Vec<Vec<String>> = r["steps"]
                .as_array()
                .into_iter()
                .flatten()
                .map(|s| {
                    vec![
                        text(&s["step"]),
                        fmt_f(&s["n"]),
                        fmt_f(&s["j1"]),
                        fmt_f(&s["j2"]),
                        fmt_f(&s["n_next"]),
                    ]
                })
                .collect();
            table(&mut out, &["step", "n", "J1", "J2", "n'"], &rows);
            let _ = writeln!(
                out,
                "final n = {}  predicted = {}  converged = {}",
                fmt_f(&r["final_n"]),
                fmt_f(&r["predicted_equilibrium"]),
                text(&r["converged"])
            );
        }
        ("pse", _) => {
            let _ = writeln!(out, "input: {}", tokens(&r["input"]));
            let _ = writeln!(
                out,
                "partial (v = {}): {}",
                text(&r["bounds"]["partial"]),
                tokens(&r["partial"]["tokens"])
            );
            let _ = writeln!(
                out,
                "verdict: {} by {}: {}",
                text(&r["verdict"]["decision"]),
                text(&r["verdict"]["rule"]),
                text(&r["verdict"]["rationale"])
            );
            match &r["complete"] {
                Value::Null => {
                    let _ = writeln!(out, "complete: not run");
                }
                c => {
                    let _ = writeln!(
                        out,
                        "complete (v = {}): {}",
                        text(&r["bounds"]["complete"]),
                        tokens(&c["tokens"])
                    );
                }
            }
            let _ = writeln!(out, "status: {}", text(&r["status"]));
        }
        _ => {
            let _ = writeln!(out, "{r}");
        }
    }
    out
}
