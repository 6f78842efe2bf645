//! Two gradient optimizers pulling one environment index.
//!
//! The environment is a fractional index `n ∈ [1, k]`; the fractional part
//! is read as the probability of the next state up, so `n = 1.75` means
//! `e₂` with probability 0.75. Each optimizer has a one-hot preference
//! vector, a cost `|n − n*|` that is zero at its preferred state, and an
//! update that pulls `n` toward that state. Their combined update is the
//! convex combination weighted by `ξ`, the first optimizer's power:
//!
//! ```text
//! n' = clamp(n + ξ·Δn₁ + (1 − ξ)·Δn₂, 1, k)
//! ```
//!
//! With the default attraction rule `Δnᵢ = η(n*ᵢ − n)` the update is a
//! contraction for `0 < η < 2` with fixed point `ξ·n*₁ + (1 − ξ)·n*₂`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DuelError {
    #[error("need at least two environment states, got {0}")]
    TooFewStates(usize),
    #[error("preference vector of optimizer {agent} must be one-hot over {k} states")]
    NotOneHot { agent: u8, k: usize },
    #[error("xi = {0} is outside [0, 1]")]
    Xi(f64),
    #[error("step size must be positive and finite, got {0}")]
    Eta(f64),
    #[error("index {n} is outside [1, {k}]")]
    IndexRange { n: f64, k: usize },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
}

/// Which of the two optimizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    First,
    Second,
}

/// How each optimizer's step is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientRule {
    /// `Δnᵢ = η(n*ᵢ − n)`.
    #[default]
    Attraction,
    /// `Δnᵢ = η · (pᵢ · enc(n)) · sign(n*ᵢ − n)`: proportional to the
    /// preference vector dotted with the fractional encoding. This is zero
    /// whenever `n` is a full step or more from the preferred state, so the
    /// dynamics stall there; kept for comparison.
    DotProduct,
}

fn default_max_steps() -> usize {
    10_000
}

fn default_tolerance() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelConfig {
    pub k: usize,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub xi: f64,
    pub eta: f64,
    pub n0: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub rule: GradientRule,
}

/// Fractional one-hot encoding of an index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalEncoding(pub Vec<f64>);

impl FractionalEncoding {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

/// Splits `n` between `floor(n)` (weight `1 − frac`) and `floor(n) + 1`
/// (weight `frac`), one-based.
pub fn encode_state(n: f64, k: usize) -> Result<FractionalEncoding, DuelError> {
    if !(n >= 1.0 && n <= k as f64) {
        return Err(DuelError::IndexRange { n, k });
    }
    let lo = n.floor();
    let frac = n - lo;
    let lo = lo as usize;
    let mut probs = vec![0.0; k];
    probs[lo - 1] = 1.0 - frac;
    if frac > 0.0 {
        probs[lo] = frac;
    }
    Ok(FractionalEncoding(probs))
}

/// One-based index of the single 1 in a one-hot vector.
pub fn preferred_index(p: &[f64]) -> Option<usize> {
    let ones: Vec<usize> = p
        .iter()
        .enumerate()
        .filter(|(_, &x)| x == 1.0)
        .map(|(i, _)| i)
        .collect();
    let rest_zero = p.iter().all(|&x| x == 0.0 || x == 1.0);
    match (ones.as_slice(), rest_zero) {
        ([i], true) => Some(i + 1),
        _ => None,
    }
}

impl DuelConfig {
    /// A config with the default step budget, tolerance and rule.
    pub fn new(k: usize, p1: Vec<f64>, p2: Vec<f64>, xi: f64, eta: f64, n0: f64) -> Result<Self, DuelError> {
        let c = DuelConfig {
            k,
            p1,
            p2,
            xi,
            eta,
            n0,
            max_steps: default_max_steps(),
            tolerance: default_tolerance(),
            rule: GradientRule::Attraction,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), DuelError> {
        if self.k < 2 {
            return Err(DuelError::TooFewStates(self.k));
        }
        for (agent, p) in [(1, &self.p1), (2, &self.p2)] {
            if p.len() != self.k || preferred_index(p).is_none() {
                return Err(DuelError::NotOneHot { agent, k: self.k });
            }
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(DuelError::Xi(self.xi));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(DuelError::Eta(self.eta));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(DuelError::Tolerance(self.tolerance));
        }
        encode_state(self.n0, self.k)?;
        Ok(())
    }

    fn pref(&self, who: Optimizer) -> &[f64] {
        match who {
            Optimizer::First => &self.p1,
            Optimizer::Second => &self.p2,
        }
    }

    /// Preferred (cost-minimizing) state of `who`, one-based.
    pub fn target(&self, who: Optimizer) -> f64 {
        preferred_index(self.pref(who)).expect("validated one-hot") as f64
    }

    pub fn clamp(&self, n: f64) -> f64 {
        n.clamp(1.0, self.k as f64)
    }

    /// `Jᵢ(n) = |n − n*ᵢ|`.
    pub fn cost(&self, who: Optimizer, n: f64) -> f64 {
        (n - self.target(who)).abs()
    }

    pub fn delta(&self, who: Optimizer, n: f64) -> f64 {
        let gap = self.target(who) - n;
        match self.rule {
            GradientRule::Attraction => self.eta * gap,
            GradientRule::DotProduct => {
                let enc = encode_state(self.clamp(n), self.k).expect("clamped into range");
                let dot: f64 = self.pref(who).iter().zip(enc.probs()).map(|(p, e)| p * e).sum();
                self.eta * dot * gap.signum() * (gap != 0.0) as u8 as f64
            }
        }
    }

    pub fn combined_update(&self, n: f64) -> f64 {
        let d1 = self.delta(Optimizer::First, n);
        let d2 = self.delta(Optimizer::Second, n);
        self.clamp(n + self.xi * d1 + (1.0 - self.xi) * d2)
    }

    /// Fixed point of the unclamped attraction update.
    pub fn predicted_equilibrium(&self) -> f64 {
        self.xi * self.target(Optimizer::First) + (1.0 - self.xi) * self.target(Optimizer::Second)
    }
}

/// One row of the step table.
///
/// `j*_solo` is the cost after the update that optimizer would make with the
/// other at zero influence; `j*_scaled` is the cost at `n + ξ·Δnᵢ`, kept for
/// inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelStep {
    pub step: usize,
    pub n: f64,
    pub j1: f64,
    pub j2: f64,
    pub n_next: f64,
    pub j1_next: f64,
    pub j2_next: f64,
    pub j1_solo: f64,
    pub j2_solo: f64,
    pub j1_scaled: f64,
    pub j2_scaled: f64,
}

impl DuelStep {
    /// Each optimizer does at least as well alone as under the combined
    /// update.
    pub fn prefers_solo(&self) -> bool {
        self.j1_solo <= self.j1_next && self.j2_solo <= self.j2_next
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelReport {
    pub steps: Vec<DuelStep>,
    pub converged: bool,
    pub final_n: f64,
    pub j1: f64,
    pub j2: f64,
    pub predicted_equilibrium: f64,
    /// Whether optimizer 1's cost would drop from the final state if
    /// optimizer 2 had no influence.
    pub first_gains_alone: bool,
    pub second_gains_alone: bool,
}

fn step_row(c: &DuelConfig, step: usize, n: f64) -> DuelStep {
    use Optimizer::*;
    let n_next = c.combined_update(n);
    DuelStep {
        step,
        n,
        j1: c.cost(First, n),
        j2: c.cost(Second, n),
        n_next,
        j1_next: c.cost(First, n_next),
        j2_next: c.cost(Second, n_next),
        j1_solo: c.cost(First, c.clamp(n + c.delta(First, n))),
        j2_solo: c.cost(Second, c.clamp(n + c.delta(Second, n))),
        j1_scaled: c.cost(First, c.clamp(n + c.xi * c.delta(First, n))),
        j2_scaled: c.cost(Second, c.clamp(n + c.xi * c.delta(Second, n))),
    }
}

/// Iterates the combined update until successive indices differ by less
/// than the tolerance or the step budget runs out.
pub fn run(config: &DuelConfig) -> Result<DuelReport, DuelError> {
    use Optimizer::*;
    config.validate()?;
    let mut n = config.n0;
    let mut steps = Vec::new();
    let mut converged = false;
    for step in 0..config.max_steps {
        let row = step_row(config, step, n);
        let next = row.n_next;
        steps.push(row);
        let moved = (next - n).abs();
        n = next;
        if moved < config.tolerance {
            converged = true;
            break;
        }
    }
    let solo1 = config.cost(First, config.clamp(n + config.delta(First, n)));
    let solo2 = config.cost(Second, config.clamp(n + config.delta(Second, n)));
    Ok(DuelReport {
        converged,
        final_n: n,
        j1: config.cost(First, n),
        j2: config.cost(Second, n),
        predicted_equilibrium: config.predicted_equilibrium(),
        first_gains_alone: solo1 < config.cost(First, n),
        second_gains_alone: solo2 < config.cost(Second, n),
        steps,
    })
}
