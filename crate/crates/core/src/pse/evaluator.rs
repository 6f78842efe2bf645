//! Ordered rule sets that judge a partial trajectory.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::PseError;
use crate::sim::{RealizedWorld, Token};

/// Binary verdict: 1 passes the input on to the complete simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Decision {
    Reject,
    Approve,
}

impl From<Decision> for u8 {
    fn from(d: Decision) -> u8 {
        match d {
            Decision::Reject => 0,
            Decision::Approve => 1,
        }
    }
}

impl TryFrom<u8> for Decision {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Decision::Reject),
            1 => Ok(Decision::Approve),
            other => Err(format!("decision must be 0 or 1, got {other}")),
        }
    }
}

/// What a rule looks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Condition {
    Always,
    ContainsToken { token: Token },
    ContainsSequence { tokens: Vec<Token> },
    TokenCountAtLeast { token: Token, count: usize },
    LengthAtLeast { length: usize },
    RealizedWorld {
        world: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        event: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub when: Condition,
    pub decision: Decision,
}

pub const DEFAULT_TEMPLATE: &str = "{rule}: {evidence}";

fn default_template() -> String {
    DEFAULT_TEMPLATE.to_string()
}

/// Rules tried in order; the first match decides, and `default` applies
/// when none matches, so every trajectory gets a verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluatorSpec {
    pub rules: Vec<Rule>,
    pub default: Decision,
    /// `{rule}` and `{evidence}` are substituted.
    #[serde(default = "default_template")]
    pub rationale_template: String,
}

/// The evaluator's answer, with the matched rule and evidence standing in
/// for an informal partial proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub rule: String,
    /// Half-open token range `[start, end)` of the evidence, zero-based.
    pub span: Option<(usize, usize)>,
    pub rationale: String,
}

struct Evidence {
    span: Option<(usize, usize)>,
    text: String,
}

fn find_sequence(haystack: &[Token], needle: &[Token]) -> Option<usize> {
    if needle.is_empty() {
        return Some(0);
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

fn joined(tokens: &[Token]) -> String {
    tokens.iter().map(Token::as_str).collect()
}

impl Condition {
    fn check(&self, tokens: &[Token], realized: &BTreeSet<RealizedWorld>) -> Option<Evidence> {
        match self {
            Condition::Always => Some(Evidence {
                span: None,
                text: "unconditional".into(),
            }),
            Condition::ContainsToken { token } => {
                tokens.iter().position(|t| t == token).map(|i| Evidence {
                    span: Some((i, i + 1)),
                    text: format!("token `{token}` at position {}", i + 1),
                })
            }
            Condition::ContainsSequence { tokens: seq } => {
                find_sequence(tokens, seq).map(|i| Evidence {
                    span: Some((i, i + seq.len())),
                    text: format!(
                        "sequence `{}` at positions {}..{}",
                        joined(seq),
                        i + 1,
                        i + seq.len()
                    ),
                })
            }
            Condition::TokenCountAtLeast { token, count } => {
                let positions: Vec<usize> = tokens
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| *t == token)
                    .map(|(i, _)| i)
                    .collect();
                (positions.len() >= *count).then(|| {
                    let end = if *count == 0 { 0 } else { positions[*count - 1] + 1 };
                    Evidence {
                        span: Some((positions.first().copied().unwrap_or(0).min(end), end)),
                        text: format!(
                            "token `{token}` occurs {} times (threshold {count})",
                            positions.len()
                        ),
                    }
                })
            }
            Condition::LengthAtLeast { length } => (tokens.len() >= *length).then(|| Evidence {
                span: Some((0, tokens.len())),
                text: format!("trajectory length {} ≥ {length}", tokens.len()),
            }),
            Condition::RealizedWorld { world, event } => realized
                .iter()
                .find(|r| r.world == *world && event.as_ref().is_none_or(|e| *e == r.event))
                .map(|r| Evidence {
                    span: None,
                    text: format!("world `{}` realized by event `{}`", r.world, r.event),
                }),
        }
    }
}

impl EvaluatorSpec {
    pub fn new(rules: Vec<Rule>, default: Decision) -> Self {
        EvaluatorSpec {
            rules,
            default,
            rationale_template: default_template(),
        }
    }

    pub fn constant(decision: Decision) -> Self {
        Self::new(vec![], decision)
    }

    /// Rejects any trajectory containing `token`, approves the rest.
    pub fn forbid(token: Token) -> Self {
        Self::new(
            vec![Rule {
                name: format!("forbid-{token}"),
                when: Condition::ContainsToken { token },
                decision: Decision::Reject,
            }],
            Decision::Approve,
        )
    }

    pub fn validate(&self) -> Result<(), PseError> {
        if self.rationale_template.trim().is_empty() {
            return Err(PseError::EmptyTemplate);
        }
        Ok(())
    }

    fn render(&self, rule: &str, evidence: &str) -> String {
        let text = self
            .rationale_template
            .replace("{rule}", rule)
            .replace("{evidence}", evidence);
        if text.trim().is_empty() {
            format!("{rule}: {evidence}")
        } else {
            text
        }
    }

    /// Judges emitted tokens and realized worlds.
    pub fn evaluate(&self, tokens: &[Token], realized: &BTreeSet<RealizedWorld>) -> Verdict {
        for rule in &self.rules {
            if let Some(ev) = rule.when.check(tokens, realized) {
                return Verdict {
                    decision: rule.decision,
                    rule: rule.name.clone(),
                    span: ev.span,
                    rationale: self.render(&rule.name, &ev.text),
                };
            }
        }
        Verdict {
            decision: self.default,
            rule: "default".into(),
            span: None,
            rationale: self.render("default", "no rule matched"),
        }
    }

    pub fn evaluate_tokens(&self, tokens: &[Token]) -> Verdict {
        self.evaluate(tokens, &BTreeSet::new())
    }
}
