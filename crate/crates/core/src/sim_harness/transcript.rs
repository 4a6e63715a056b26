//! Per-period episode records and their export.

use std::fmt::Display;

use serde::Serialize;

/// Everything that happened in one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodRecord<S> {
    pub t: usize,
    pub true_state: Vec<S>,
    pub reports: Vec<S>,
    /// Joint action implemented by the planner (action index per agent).
    pub action: Vec<usize>,
    /// The activated agent, in single-activation worlds.
    pub activated: Option<usize>,
    pub rewards: Vec<f64>,
    pub transfers: Vec<f64>,
    /// Charge component of each transfer.
    pub charges: Vec<f64>,
    /// Index reports collected this period (empty when indices are not
    /// reported).
    pub index_reports: Vec<f64>,
    /// `r(X, t)` of every sample trajectory, in a fixed order.
    pub sample_rewards: Vec<f64>,
    pub frontier_requests: usize,
    /// Index comparisons made by the planner this period.
    pub comparisons: u64,
}

impl<S> PeriodRecord<S> {
    pub fn payoffs(&self) -> Vec<f64> {
        self.rewards.iter().zip(&self.transfers).map(|(r, t)| r + t).collect()
    }
}

/// One episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transcript<S> {
    pub mechanism: String,
    pub seed: u64,
    pub scenario_hash: String,
    pub discount: f64,
    pub agents: usize,
    pub records: Vec<PeriodRecord<S>>,
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

impl<S: Display> Transcript<S> {
    /// CSV with one row per period.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "t".to_string(),
            "true_state".into(),
            "reports".into(),
            "action".into(),
            "activated".into(),
        ];
        for field in ["reward", "transfer", "charge", "payoff"] {
            header.extend((0..self.agents).map(|i| format!("{field}_{i}")));
        }
        header.extend([
            "index_reports".into(),
            "sample_rewards".into(),
            "frontier_requests".into(),
            "comparisons".into(),
        ]);
        w.write_record(&header).expect("in-memory write");
        for r in &self.records {
            let mut row = vec![
                r.t.to_string(),
                join(&r.true_state),
                join(&r.reports),
                join(&r.action),
                r.activated.map(|a| a.to_string()).unwrap_or_default(),
            ];
            row.extend(r.rewards.iter().map(|x| x.to_string()));
            row.extend(r.transfers.iter().map(|x| x.to_string()));
            row.extend(r.charges.iter().map(|x| x.to_string()));
            row.extend(r.payoffs().iter().map(|x| x.to_string()));
            row.push(join(&r.index_reports));
            row.push(join(&r.sample_rewards));
            row.push(r.frontier_requests.to_string());
            row.push(r.comparisons.to_string());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

impl<S> Transcript<S> {
    /// Each agent's charge stream.
    pub fn charge_streams(&self) -> Vec<Vec<f64>> {
        (0..self.agents)
            .map(|i| self.records.iter().map(|r| r.charges[i]).collect())
            .collect()
    }

    pub fn activations(&self) -> Vec<Option<usize>> {
        self.records.iter().map(|r| r.activated).collect()
    }
}
