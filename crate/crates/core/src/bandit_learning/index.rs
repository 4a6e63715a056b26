//! Gittins indices of Bernoulli information states on a truncated tree.
//!
//! States more than `H` pulls away from the root are replaced by leaves
//! that either restart or keep paying their posterior mean forever. With
//! `γ^H·R_max/(1−γ) ≤ ε` the truncation moves the root value by at most
//! `ε`. The restart-in-root value `R` is the fixed point of `R = F(R)`,
//! where `F(R)` is the root's continuation value when every other node may
//! restart for `R`. `F` is convex, piecewise linear and nondecreasing with
//! slope at most `γ`, so Newton steps from `p/(1−γ)` climb monotonically to
//! the fixed point and stop after finitely many pieces.

use std::collections::HashMap;
use std::sync::Mutex;

use super::info::InfoState;
use super::BanditError;

/// Default ceiling on the truncation depth.
pub const DEFAULT_DEPTH_CAP: usize = 10_000;

const MAX_NEWTON_STEPS: usize = 500;

/// Truncation depth `H = ⌈ln(ε(1−γ)/R_max) / ln γ⌉`, at least 1.
pub fn truncation_depth(epsilon: f64, r_max: f64, discount: f64) -> f64 {
    let h = ((epsilon * (1.0 - discount) / r_max).ln() / discount.ln()).ceil();
    h.max(1.0)
}

/// Accuracy target and the depth it implies for one discount factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub epsilon: f64,
    pub r_max: f64,
    pub depth: usize,
}

impl TruncationPolicy {
    pub fn new(epsilon: f64, r_max: f64, discount: f64) -> Result<Self, BanditError> {
        Self::with_cap(epsilon, r_max, discount, DEFAULT_DEPTH_CAP)
    }

    pub fn with_cap(epsilon: f64, r_max: f64, discount: f64, cap: usize) -> Result<Self, BanditError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(BanditError::NonPositive("epsilon"));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(BanditError::NonPositive("r_max"));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(BanditError::Discount(discount));
        }
        let depth = truncation_depth(epsilon, r_max, discount);
        if depth > cap as f64 {
            return Err(BanditError::DepthCap { depth, cap });
        }
        Ok(Self { epsilon, r_max, depth: depth as usize })
    }
}

/// Root continuation value `F(R)` and its slope `F'(R)` on the tree of
/// depth `depth`.
fn root_value(state: &InfoState, discount: f64, depth: usize, restart: f64, v: &mut Vec<f64>, dv: &mut Vec<f64>) -> (f64, f64) {
    let s0 = state.successes as f64 + state.alpha;
    let n0 = (state.successes + state.failures) as f64 + state.alpha + state.beta;
    v.clear();
    dv.clear();
    for a in 0..=depth {
        let p = (s0 + a as f64) / (n0 + depth as f64);
        let leaf = p / (1.0 - discount);
        if restart >= leaf {
            v.push(restart);
            dv.push(1.0);
        } else {
            v.push(leaf);
            dv.push(0.0);
        }
    }
    for d in (0..depth).rev() {
        let total = n0 + d as f64;
        for a in 0..=d {
            let p = (s0 + a as f64) / total;
            // a+1 successes lives at index a+1, one more failure at index a
            let q = p + discount * (p * v[a + 1] + (1.0 - p) * v[a]);
            let dq = discount * (p * dv[a + 1] + (1.0 - p) * dv[a]);
            if d > 0 && restart >= q {
                v[a] = restart;
                dv[a] = 1.0;
            } else {
                v[a] = q;
                dv[a] = dq;
            }
        }
    }
    (v[0], dv[0])
}

/// Index of `state` on the tree truncated at exactly `depth` pulls, in
/// per-period units.
pub fn index_at_depth(state: &InfoState, discount: f64, depth: usize) -> f64 {
    let p = state.mean();
    if depth == 0 {
        return p;
    }
    let mut v = Vec::with_capacity(depth + 1);
    let mut dv = Vec::with_capacity(depth + 1);
    let mut r = p / (1.0 - discount);
    for _ in 0..MAX_NEWTON_STEPS {
        let (f, slope) = root_value(state, discount, depth, r, &mut v, &mut dv);
        let gap = f - r;
        if gap <= 0.0 {
            break;
        }
        let next = r + gap / (1.0 - slope);
        if next <= r {
            break;
        }
        r = next;
    }
    (1.0 - discount) * r
}

/// Index of `state` on the tree truncated at the policy's depth.
pub fn truncated_index(state: &InfoState, discount: f64, trunc: &TruncationPolicy) -> f64 {
    index_at_depth(state, discount, trunc.depth)
}

/// Memoized [`truncated_index`] for one discount and truncation, shareable
/// across threads and episodes.
#[derive(Debug)]
pub struct IndexOracle {
    discount: f64,
    trunc: TruncationPolicy,
    cache: Mutex<HashMap<(u64, u64, u64, u64), f64>>,
}

impl IndexOracle {
    pub fn new(discount: f64, trunc: TruncationPolicy) -> Self {
        Self { discount, trunc, cache: Mutex::new(HashMap::new()) }
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn truncation(&self) -> &TruncationPolicy {
        &self.trunc
    }

    pub fn index(&self, state: &InfoState) -> f64 {
        let key = state.key();
        if let Some(v) = self.cache.lock().expect("index cache lock").get(&key) {
            return *v;
        }
        let v = truncated_index(state, self.discount, &self.trunc);
        self.cache.lock().expect("index cache lock").insert(key, v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit_learning::{parse_prior, LAPLACE};

    #[test]
    fn depth_for_reference_parameters() {
        assert_eq!(truncation_depth(1e-6, 1.0, 0.9), 153.0);
        let t = TruncationPolicy::new(1e-6, 1.0, 0.9).unwrap();
        assert!(0.9f64.powi(t.depth as i32) / (1.0 - 0.9) <= 1e-6);
    }

    #[test]
    fn depth_cap_is_enforced() {
        assert!(matches!(
            TruncationPolicy::new(1e-12, 1.0, 0.9999),
            Err(BanditError::DepthCap { .. })
        ));
        assert!(TruncationPolicy::with_cap(1e-6, 1.0, 0.9, 100).is_err());
    }

    #[test]
    fn myopic_limit_is_the_mean() {
        let s = parse_prior("0110", LAPLACE).unwrap();
        let t = TruncationPolicy::new(1e-9, 1.0, 1e-3).unwrap();
        assert!((truncated_index(&s, 1e-3, &t) - s.mean()).abs() < 1e-3);
    }

    #[test]
    fn index_exceeds_mean_under_uncertainty() {
        let s = parse_prior("", LAPLACE).unwrap();
        let t = TruncationPolicy::new(1e-6, 1.0, 0.9).unwrap();
        let g = truncated_index(&s, 0.9, &t);
        assert!(g > 0.5 && g < 1.0, "{g}");
    }

    #[test]
    fn oracle_caches() {
        let t = TruncationPolicy::new(1e-6, 1.0, 0.9).unwrap();
        let oracle = IndexOracle::new(0.9, t);
        let s = parse_prior("01", LAPLACE).unwrap();
        assert_eq!(oracle.index(&s), oracle.index(&s));
        assert_eq!(oracle.index(&s), truncated_index(&s, 0.9, &t));
    }
}
