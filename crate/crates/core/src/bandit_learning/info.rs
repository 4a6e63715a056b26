use std::fmt;

use serde::{Deserialize, Serialize};

use super::BanditError;

/// The conventional uninformative Beta(1, 1) base.
pub const LAPLACE: (f64, f64) = (1.0, 1.0);

/// Posterior summary of a Bernoulli arm: observed counts plus Beta prior
/// pseudo-counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoState {
    pub successes: u64,
    pub failures: u64,
    pub alpha: f64,
    pub beta: f64,
}

impl InfoState {
    pub fn new(successes: u64, failures: u64, base: (f64, f64)) -> Result<Self, BanditError> {
        let (alpha, beta) = base;
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(BanditError::BadBase(alpha, beta));
        }
        Ok(Self { successes, failures, alpha, beta })
    }

    /// Posterior success probability, also the expected reward of a pull.
    pub fn mean(&self) -> f64 {
        (self.successes as f64 + self.alpha)
            / ((self.successes + self.failures) as f64 + self.alpha + self.beta)
    }

    pub fn after(&self, success: bool) -> Self {
        if success {
            Self { successes: self.successes + 1, ..*self }
        } else {
            Self { failures: self.failures + 1, ..*self }
        }
    }

    pub(crate) fn key(&self) -> (u64, u64, u64, u64) {
        (self.successes, self.failures, self.alpha.to_bits(), self.beta.to_bits())
    }
}

impl fmt::Display for InfoState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.successes, self.failures)
    }
}

/// An agent's prior, expressed as imagined past observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorReport {
    pub agent: usize,
    pub observations: String,
}

/// Counts the successes and failures of an observation string such as
/// `"01011"` on top of the base pseudo-counts.
pub fn parse_prior(observations: &str, base: (f64, f64)) -> Result<InfoState, BanditError> {
    let mut successes = 0;
    let mut failures = 0;
    for c in observations.chars() {
        match c {
            '1' => successes += 1,
            '0' => failures += 1,
            other => return Err(BanditError::BadPrior(other)),
        }
    }
    InfoState::new(successes, failures, base)
}

/// Bayes-rule successors of a pull: success with the posterior mean,
/// failure otherwise.
pub fn info_transition(state: &InfoState) -> [(InfoState, f64); 2] {
    let p = state.mean();
    [(state.after(true), p), (state.after(false), 1.0 - p)]
}
