//! Exact deviation analysis.
//!
//! The deviator observes the true joint state and chooses any report for
//! its own component; everyone else reports truthfully and the planner plays
//! `π*` on the reports. That is a finite MDP over true joint states whose
//! actions are the deviator's possible reports, solved here by policy
//! iteration with exact evaluation at each step.

use crate::mdp_core::{
    evaluate_policy, evaluate_policy_subset, evaluate_rewards, policy_value, solve_markov_reward,
    JointModel, JointState, Policy,
};

use super::rules::TransferRule;
use super::MechanismError;

/// Relative slack a deviation must clear to replace the current report.
const IMPROVEMENT_SLACK: f64 = 1e-12;

const MAX_ITERATIONS: usize = 10_000;

/// Optimal deviation against truthful opponents.
#[derive(Debug, Clone)]
pub struct BestResponse {
    /// Optimal deviation value per joint state index.
    pub values: Vec<f64>,
    /// Value of reporting truthfully forever, per joint state index.
    pub truthful: Vec<f64>,
    /// An optimal report per joint state index.
    pub reports: Vec<usize>,
}

impl BestResponse {
    /// Largest gain of deviating over truthful reporting across all states.
    pub fn max_gain(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.truthful)
            .map(|(d, t)| d - t)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Choice {
    payoff: f64,
    successors: Vec<(usize, f64)>,
}

pub fn best_response_value(
    model: &JointModel,
    policy: &Policy,
    rule: &dyn TransferRule,
    deviator: usize,
) -> Result<BestResponse, MechanismError> {
    if rule.reads_history() {
        return Err(MechanismError::HistoryDependent(rule.name().to_string()));
    }
    if deviator >= model.num_agents() {
        return Err(crate::mdp_core::ModelError::NoSuchAgent(deviator).into());
    }
    let agent = model.agent(deviator);
    let k = agent.num_states();
    let n = model.num_states();
    let gamma = model.discount();

    // choices[s][r]: payoff and dynamics when the true state is s and the
    // deviator reports r
    let choices: Vec<Vec<Choice>> = (0..n)
        .map(|s| {
            let truth = model.state_at(s);
            (0..k)
                .map(|r| {
                    let reports = truth.with_component(deviator, r);
                    let action = policy.get(model, &reports);
                    let transfer = rule.transfers(model, &reports, action).0[deviator];
                    let payoff = agent.reward(truth[deviator], action[deviator]) + transfer;
                    Choice { payoff, successors: model.successors(&truth, action) }
                })
                .collect()
        })
        .collect();

    let evaluate = |reports: &[usize]| -> Vec<f64> {
        let rows: Vec<Vec<(usize, f64)>> =
            (0..n).map(|s| choices[s][reports[s]].successors.clone()).collect();
        let rhs: Vec<Vec<f64>> = (0..n).map(|s| vec![choices[s][reports[s]].payoff]).collect();
        solve_markov_reward(&rows, &rhs, gamma).into_iter().map(|v| v[0]).collect()
    };

    let mut reports: Vec<usize> = (0..n).map(|s| model.state_at(s)[deviator]).collect();
    let truthful = evaluate(&reports);
    let mut values = truthful.clone();
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for s in 0..n {
            let q = |c: &Choice| c.payoff + gamma * c.successors.iter().map(|(j, p)| p * values[*j]).sum::<f64>();
            let mut best = reports[s];
            let mut best_q = q(&choices[s][best]);
            for (r, c) in choices[s].iter().enumerate() {
                let qr = q(c);
                if qr > best_q + IMPROVEMENT_SLACK * best_q.abs().max(1.0) {
                    best = r;
                    best_q = qr;
                }
            }
            if best != reports[s] {
                reports[s] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(BestResponse { values, truthful, reports });
        }
        values = evaluate(&reports);
    }
    Ok(BestResponse { values, truthful, reports })
}

/// The ex ante budget of the VCG mechanism, all by exact policy evaluation.
#[derive(Debug, Clone)]
pub struct BudgetIdentity {
    /// System value of `π*` from `s⁰`.
    pub system_value: f64,
    /// Others' value `V*₋ᵢ(s⁰)` per agent.
    pub others: Vec<f64>,
    /// `(n−1)·V*(s⁰) − Σᵢ V*₋ᵢ(s⁰)`.
    pub residual: f64,
    /// Expected discounted sum of all transfers under truthful reporting.
    pub transfer_value: f64,
}

pub fn budget_identity(
    model: &JointModel,
    policy: &Policy,
    rule: &dyn TransferRule,
    s0: &JointState,
) -> Result<BudgetIdentity, MechanismError> {
    model.validate_state(s0)?;
    let n = model.num_agents();
    let system_value = policy_value(model, policy, s0);
    let others = (0..n)
        .map(|i| evaluate_policy_subset(model, policy, i, s0))
        .collect::<Result<Vec<_>, _>>()?;
    let residual = (n as f64 - 1.0) * system_value - others.iter().sum::<f64>();
    let transfers = evaluate_rewards(model, policy, Some(s0), 1, |s, a, out| {
        out[0] = rule.transfers(model, s, a).total();
    });
    let transfer_value = transfers.get(model, s0).expect("start state is covered")[0];
    Ok(BudgetIdentity { system_value, others, residual, transfer_value })
}

/// Exact discounted payoff (intrinsic plus transfers) of every agent under
/// truthful reporting, per joint state index.
pub fn truthful_payoffs(model: &JointModel, policy: &Policy, rule: &dyn TransferRule) -> Vec<Vec<f64>> {
    let n = model.num_agents();
    let values = evaluate_rewards(model, policy, None, n, |s, a, out| {
        let t = rule.transfers(model, s, a);
        for (i, agent) in model.agents().iter().enumerate() {
            out[i] = agent.reward(s[i], a[i]) + t.0[i];
        }
    });
    (0..model.num_states()).map(|s| values.at(s).expect("covered").to_vec()).collect()
}

/// Exact system welfare of `policy` per joint state index.
pub fn system_values(model: &JointModel, policy: &Policy) -> Vec<f64> {
    let values = evaluate_policy(model, policy, None);
    (0..model.num_states()).map(|s| values.at(s).expect("covered").iter().sum()).collect()
}
