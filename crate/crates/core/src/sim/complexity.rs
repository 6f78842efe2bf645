//! Simulacra and the description-length proxy for their complexity.
//!
//! True Kolmogorov complexity is uncomputable. A simulacrum is scored by the
//! byte length of its canonical serialization instead, which upper-bounds
//! the length of a program that prints it (up to a constant). Other
//! deterministic scorers can be plugged in through [`ComplexityScorer`].

use std::fmt;

use serde::{Deserialize, Serialize};

/// An individual simulated entity.
///
/// `id` names the simulacrum and is not part of its description, so two
/// simulacra with the same actions and body score the same.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Simulacrum {
    pub id: String,
    pub actions: Vec<String>,
    pub description: String,
}

#[derive(Serialize, Deserialize)]
struct CanonicalBody {
    actions: Vec<String>,
    description: String,
}

impl Simulacrum {
    pub fn new(id: impl Into<String>, actions: Vec<String>, description: impl Into<String>) -> Self {
        Simulacrum {
            id: id.into(),
            actions,
            description: description.into(),
        }
    }

    /// Compact JSON `{"actions":[…],"description":"…"}`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&CanonicalBody {
            actions: self.actions.clone(),
            description: self.description.clone(),
        })
        .expect("strings always serialize")
    }

    /// Rebuilds a simulacrum from its canonical form.
    pub fn from_canonical(id: impl Into<String>, bytes: &[u8]) -> serde_json::Result<Self> {
        let body: CanonicalBody = serde_json::from_slice(bytes)?;
        Ok(Simulacrum {
            id: id.into(),
            actions: body.actions,
            description: body.description,
        })
    }
}

/// Canonical length of a simulacrum with no actions and an empty body.
pub fn empty_canonical_len() -> u64 {
    Simulacrum::new("", vec![], "").canonical_bytes().len() as u64
}

/// A deterministic complexity score over canonical bytes.
pub trait ComplexityScorer: Send + Sync {
    fn score(&self, canonical: &[u8]) -> u64;

    fn name(&self) -> &str;
}

/// Scores by canonical byte length.
#[derive(Debug, Clone, Copy, Default)]
pub struct CanonicalLength;

impl ComplexityScorer for CanonicalLength {
    fn score(&self, canonical: &[u8]) -> u64 {
        canonical.len() as u64
    }

    fn name(&self) -> &str {
        "canonical-length"
    }
}

impl fmt::Debug for dyn ComplexityScorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexityScorer({})", self.name())
    }
}

pub fn simulacrum_complexity(sim: &Simulacrum, scorer: &dyn ComplexityScorer) -> u64 {
    scorer.score(&sim.canonical_bytes())
}

/// Complexity of a group of simulacra: the largest member score.
pub fn max_complexity<'a, I>(sims: I, scorer: &dyn ComplexityScorer) -> u64
where
    I: IntoIterator<Item = &'a Simulacrum>,
{
    sims.into_iter()
        .map(|s| simulacrum_complexity(s, scorer))
        .max()
        .unwrap_or(0)
}
