//! Tokens, alphabets and the table-driven token selection rule.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::object::DISTRIBUTION_TOLERANCE;

/// Reserved token joining a prompt to its condition. Never part of an
/// alphabet, but allowed in selector contexts.
pub const SEPARATOR: &str = "⟂";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub String);

impl Token {
    pub fn new(s: impl Into<String>) -> Self {
        Token(s.into())
    }

    pub fn separator() -> Self {
        Token(SEPARATOR.to_string())
    }

    pub fn is_separator(&self) -> bool {
        self.0 == SEPARATOR
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Splits a string into one token per character.
pub fn chars(s: &str) -> Vec<Token> {
    s.chars().map(|c| Token(c.to_string())).collect()
}

/// Ordered, non-empty set of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Token>", into = "Vec<Token>")]
pub struct Alphabet(Vec<Token>);

impl Alphabet {
    pub fn new(tokens: Vec<Token>) -> Result<Self, SimError> {
        if tokens.is_empty() {
            return Err(SimError::EmptyAlphabet);
        }
        for (i, t) in tokens.iter().enumerate() {
            if t.is_separator() {
                return Err(SimError::ReservedToken(t.0.clone()));
            }
            if tokens[..i].contains(t) {
                return Err(SimError::DuplicateToken(t.0.clone()));
            }
        }
        Ok(Alphabet(tokens))
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, token: &Token) -> Option<usize> {
        self.0.iter().position(|t| t == token)
    }

    pub fn contains(&self, token: &Token) -> bool {
        self.index_of(token).is_some()
    }
}

impl TryFrom<Vec<Token>> for Alphabet {
    type Error = SimError;

    fn try_from(tokens: Vec<Token>) -> Result<Self, Self::Error> {
        Alphabet::new(tokens)
    }
}

impl From<Alphabet> for Vec<Token> {
    fn from(a: Alphabet) -> Self {
        a.0
    }
}

/// A context suffix and the token distribution it selects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub context: Vec<Token>,
    pub distribution: Vec<f64>,
}

/// Maps a trajectory to a token distribution.
///
/// The entry whose context is the longest suffix of the current context
/// wins; with no match the default applies. Distributions are aligned with
/// the alphabet order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSelector {
    alphabet: Alphabet,
    entries: Vec<ContextEntry>,
    default: Option<Vec<f64>>,
}

fn check_distribution(owner: &str, dist: &[f64], alphabet: &Alphabet) -> Result<(), SimError> {
    let bad = |reason: String| SimError::Distribution {
        owner: owner.to_string(),
        reason,
    };
    if dist.len() != alphabet.len() {
        return Err(bad(format!(
            "{} entries for an alphabet of {}",
            dist.len(),
            alphabet.len()
        )));
    }
    if let Some(p) = dist.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(bad(format!("entry {p} is negative or not finite")));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(bad(format!("sums to {total}, not 1")));
    }
    Ok(())
}

impl TokenSelector {
    pub fn new(
        alphabet: Alphabet,
        entries: Vec<ContextEntry>,
        default: Option<Vec<f64>>,
    ) -> Result<Self, SimError> {
        for (i, e) in entries.iter().enumerate() {
            let owner = format!("context {:?}", join(&e.context));
            if let Some(t) = e
                .context
                .iter()
                .find(|t| !t.is_separator() && !alphabet.contains(t))
            {
                return Err(SimError::UnknownToken(t.0.clone()));
            }
            if entries[..i].iter().any(|prev| prev.context == e.context) {
                return Err(SimError::DuplicateContext(join(&e.context)));
            }
            check_distribution(&owner, &e.distribution, &alphabet)?;
        }
        if let Some(d) = &default {
            check_distribution("default", d, &alphabet)?;
        }
        Ok(TokenSelector {
            alphabet,
            entries,
            default,
        })
    }

    /// A selector that always emits `token`.
    pub fn constant(alphabet: Alphabet, token: &Token) -> Result<Self, SimError> {
        let idx = alphabet
            .index_of(token)
            .ok_or_else(|| SimError::UnknownToken(token.0.clone()))?;
        let mut dist = vec![0.0; alphabet.len()];
        dist[idx] = 1.0;
        Self::new(alphabet, vec![], Some(dist))
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.len();
        TokenSelector {
            alphabet,
            entries: vec![],
            default: Some(vec![1.0 / n as f64; n]),
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    pub fn default_distribution(&self) -> Option<&[f64]> {
        self.default.as_deref()
    }

    /// The distribution selected for `context` (the full token history,
    /// prompt included).
    pub fn distribution_for(&self, context: &[Token]) -> Result<&[f64], SimError> {
        self.distribution_for_split(&[], context)
    }

    /// Same as [`distribution_for`](Self::distribution_for) on `head ++ tail`,
    /// without building the concatenation.
    pub fn distribution_for_split(&self, head: &[Token], tail: &[Token]) -> Result<&[f64], SimError> {
        self.entries
            .iter()
            .filter(|e| split_ends_with(head, tail, &e.context))
            .max_by_key(|e| e.context.len())
            .map(|e| e.distribution.as_slice())
            .or(self.default.as_deref())
            .ok_or_else(|| SimError::NoMatchingContext(join(head) + &join(tail)))
    }
}

fn split_ends_with(head: &[Token], tail: &[Token], suffix: &[Token]) -> bool {
    if suffix.len() <= tail.len() {
        return tail.ends_with(suffix);
    }
    let (front, back) = suffix.split_at(suffix.len() - tail.len());
    back == tail && head.ends_with(front)
}

pub(crate) fn join(tokens: &[Token]) -> String {
    tokens.iter().map(Token::as_str).collect::<Vec<_>>().join("")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> Alphabet {
        Alphabet::new(chars("xy")).unwrap()
    }

    #[test]
    fn uniform_default() {
        let s = TokenSelector::uniform(xy());
        assert_eq!(s.distribution_for(&[]).unwrap(), &[0.5, 0.5]);
    }

    #[test]
    fn table_lookup_and_longest_match() {
        let s = TokenSelector::new(
            xy(),
            vec![
                ContextEntry {
                    context: chars("x"),
                    distribution: vec![1.0, 0.0],
                },
                ContextEntry {
                    context: chars("xx"),
                    distribution: vec![0.0, 1.0],
                },
            ],
            Some(vec![0.5, 0.5]),
        )
        .unwrap();
        assert_eq!(s.distribution_for(&chars("x")).unwrap(), &[1.0, 0.0]);
        assert_eq!(s.distribution_for(&chars("xx")).unwrap(), &[0.0, 1.0]);
        assert_eq!(s.distribution_for(&chars("yx")).unwrap(), &[1.0, 0.0]);
        assert_eq!(s.distribution_for(&chars("xy")).unwrap(), &[0.5, 0.5]);
    }

    #[test]
    fn missing_default_is_an_error() {
        let s = TokenSelector::new(
            xy(),
            vec![ContextEntry {
                context: chars("x"),
                distribution: vec![1.0, 0.0],
            }],
            None,
        )
        .unwrap();
        assert!(matches!(
            s.distribution_for(&chars("y")),
            Err(SimError::NoMatchingContext(_))
        ));
    }

    #[test]
    fn validation() {
        assert!(matches!(Alphabet::new(vec![]), Err(SimError::EmptyAlphabet)));
        assert!(matches!(
            Alphabet::new(chars("xx")),
            Err(SimError::DuplicateToken(_))
        ));
        assert!(matches!(
            Alphabet::new(vec![Token::separator()]),
            Err(SimError::ReservedToken(_))
        ));
        assert!(matches!(
            TokenSelector::new(xy(), vec![], Some(vec![0.5, 0.4])),
            Err(SimError::Distribution { .. })
        ));
        assert!(matches!(
            TokenSelector::new(
                xy(),
                vec![ContextEntry {
                    context: chars("q"),
                    distribution: vec![1.0, 0.0]
                }],
                None
            ),
            Err(SimError::UnknownToken(_))
        ));
        let ctx = ContextEntry {
            context: chars("x"),
            distribution: vec![1.0, 0.0],
        };
        assert!(matches!(
            TokenSelector::new(xy(), vec![ctx.clone(), ctx], None),
            Err(SimError::DuplicateContext(_))
        ));
    }

    #[test]
    fn separator_allowed_in_context() {
        let mut ctx = chars("x");
        ctx.push(Token::separator());
        let s = TokenSelector::new(
            xy(),
            vec![ContextEntry {
                context: ctx.clone(),
                distribution: vec![0.0, 1.0],
            }],
            None,
        )
        .unwrap();
        assert_eq!(s.distribution_for(&ctx).unwrap(), &[0.0, 1.0]);
    }
}

#[cfg(test)]
mod split_tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(bits: &[bool]) -> Vec<Token> {
        bits.iter().map(|&b| Token::new(if b { "x" } else { "y" })).collect()
    }

    proptest! {
        #[test]
        fn split_lookup_matches_concatenation(
            head in prop::collection::vec(any::<bool>(), 0..5),
            tail in prop::collection::vec(any::<bool>(), 0..5),
            ctxs in prop::collection::vec(prop::collection::vec(any::<bool>(), 0..4), 0..5),
        ) {
            let alphabet = Alphabet::new(chars("xy")).unwrap();
            let mut seen = std::collections::BTreeSet::new();
            let entries: Vec<ContextEntry> = ctxs
                .iter()
                .filter(|c| seen.insert((*c).clone()))
                .enumerate()
                .map(|(i, c)| ContextEntry {
                    context: toks(c),
                    distribution: if i % 2 == 0 { vec![1.0, 0.0] } else { vec![0.25, 0.75] },
                })
                .collect();
            let Ok(sel) = TokenSelector::new(alphabet, entries, None) else { return Ok(()) };
            let (h, t) = (toks(&head), toks(&tail));
            let whole: Vec<Token> = h.iter().chain(&t).cloned().collect();
            prop_assert_eq!(
                sel.distribution_for_split(&h, &t).ok(),
                sel.distribution_for(&whole).ok()
            );
        }
    }
}
