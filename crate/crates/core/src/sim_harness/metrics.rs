//! Discounted payoff accounting and Monte Carlo summaries.

use serde::{Deserialize, Serialize};

use super::transcript::Transcript;

/// 97.5% quantile of the standard normal distribution.
pub const Z_975: f64 = 1.959_963_984_540_054;

/// Realized payoffs below this count as an ex post IR violation. Guards
/// against flagging rounding residue of exactly offsetting terms.
pub const IR_SLACK: f64 = 1e-9;

/// Compensated (Kahan–Babuška) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::default();
        for x in iter {
            k.add(x);
        }
        k
    }
}

/// Discounted totals of one episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub intrinsic: Vec<f64>,
    pub transfers: Vec<f64>,
    /// Intrinsic reward plus transfers, per agent.
    pub payoffs: Vec<f64>,
    /// Sum of all agents' discounted intrinsic rewards.
    pub welfare: f64,
    /// Discounted planner-to-agent transfer flow.
    pub net_transfer: f64,
    /// Net flow when the world's intrinsic rewards are also routed through
    /// the planner (transfers plus intrinsic rewards).
    pub net_transfer_routed: f64,
    /// Periods in which the agent's realized payoff was negative.
    pub ir_violations: Vec<usize>,
    /// Undiscounted realized payoff per period, per agent.
    pub payoff_series: Vec<Vec<f64>>,
    /// Periods in which each agent was activated.
    pub activations: Vec<usize>,
}

impl EpisodeMetrics {
    pub fn from_transcript<S>(transcript: &Transcript<S>) -> Self {
        let n = transcript.agents;
        let gamma = transcript.discount;
        let mut intrinsic = vec![KahanSum::default(); n];
        let mut transfers = vec![KahanSum::default(); n];
        let mut payoffs = vec![KahanSum::default(); n];
        let mut welfare = KahanSum::default();
        let mut net = KahanSum::default();
        let mut routed = KahanSum::default();
        let mut ir_violations = vec![0; n];
        let mut payoff_series = vec![Vec::with_capacity(transcript.records.len()); n];
        let mut activations = vec![0; n];
        let mut discount = 1.0;
        for r in &transcript.records {
            for i in 0..n {
                let (reward, transfer) = (r.rewards[i], r.transfers[i]);
                let payoff = reward + transfer;
                intrinsic[i].add(discount * reward);
                transfers[i].add(discount * transfer);
                payoffs[i].add(discount * payoff);
                welfare.add(discount * reward);
                net.add(discount * transfer);
                routed.add(discount * payoff);
                if payoff < -IR_SLACK {
                    ir_violations[i] += 1;
                }
                payoff_series[i].push(payoff);
            }
            if let Some(a) = r.activated {
                activations[a] += 1;
            }
            discount *= gamma;
        }
        Self {
            intrinsic: intrinsic.iter().map(KahanSum::value).collect(),
            transfers: transfers.iter().map(KahanSum::value).collect(),
            payoffs: payoffs.iter().map(KahanSum::value).collect(),
            welfare: welfare.value(),
            net_transfer: net.value(),
            net_transfer_routed: routed.value(),
            ir_violations,
            payoff_series,
            activations,
        }
    }

    /// `Σ payoffs − (welfare + Σ transfers)`; zero up to rounding.
    pub fn accounting_residual(&self) -> f64 {
        let payoffs: KahanSum = self.payoffs.iter().copied().collect();
        let transfers: KahanSum = self.transfers.iter().copied().collect();
        payoffs.value() - (self.welfare + transfers.value())
    }

    pub fn value(&self, metric: Metric) -> f64 {
        let horizon = self.payoff_series.first().map_or(0, Vec::len);
        match metric {
            Metric::AgentPayoff(i) => self.payoffs[i],
            Metric::AgentIntrinsic(i) => self.intrinsic[i],
            Metric::AgentTransfer(i) => self.transfers[i],
            Metric::Welfare => self.welfare,
            Metric::NetTransfer => self.net_transfer,
            Metric::NetTransferRouted => self.net_transfer_routed,
            Metric::IrViolations(i) => self.ir_violations[i] as f64,
            Metric::IrViolated(i) => f64::from(u8::from(self.ir_violations[i] > 0)),
            Metric::ActivationShare(i) => self.activations[i] as f64 / horizon.max(1) as f64,
        }
    }
}

/// A scalar read off one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "metric", content = "agent", rename_all = "kebab-case")]
pub enum Metric {
    AgentPayoff(usize),
    AgentIntrinsic(usize),
    AgentTransfer(usize),
    Welfare,
    NetTransfer,
    NetTransferRouted,
    IrViolations(usize),
    /// 1 if the agent had any ex post IR violation, else 0.
    IrViolated(usize),
    /// Fraction of periods in which the agent was activated.
    ActivationShare(usize),
}

impl Metric {
    pub fn agent(&self) -> Option<usize> {
        match self {
            Metric::AgentPayoff(i)
            | Metric::AgentIntrinsic(i)
            | Metric::AgentTransfer(i)
            | Metric::IrViolations(i)
            | Metric::IrViolated(i)
            | Metric::ActivationShare(i) => Some(*i),
            _ => None,
        }
    }
}

/// Monte Carlo mean with standard error and a normal 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mean: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicas: usize,
}

impl MetricReport {
    /// Summarizes replica values in the given (deterministic) order.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = match values.first() {
            // constant samples keep their exact value so the interval has width 0
            Some(x) if values.iter().all(|v| v == x) => *x,
            _ => values.iter().copied().collect::<KahanSum>().value() / n as f64,
        };
        let stderr = if n > 1 {
            let ss = values.iter().map(|x| (x - mean) * (x - mean)).collect::<KahanSum>().value();
            (ss / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            ci_low: mean - Z_975 * stderr,
            ci_high: mean + Z_975 * stderr,
            replicas: n,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim_harness::transcript::PeriodRecord;

    fn record(t: usize, rewards: Vec<f64>, transfers: Vec<f64>) -> PeriodRecord<usize> {
        PeriodRecord {
            t,
            true_state: vec![0; rewards.len()],
            reports: vec![0; rewards.len()],
            action: vec![0; rewards.len()],
            activated: None,
            charges: vec![0.0; rewards.len()],
            rewards,
            transfers,
            index_reports: vec![],
            sample_rewards: vec![],
            frontier_requests: 0,
            comparisons: 0,
        }
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..10_000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-12)).abs() < 1e-24);
    }

    #[test]
    fn discounted_totals() {
        let tr = Transcript {
            mechanism: "test".into(),
            seed: 0,
            scenario_hash: String::new(),
            discount: 0.5,
            agents: 2,
            records: vec![
                record(0, vec![1.0, 0.0], vec![0.0, 1.0]),
                record(1, vec![0.0, 2.0], vec![-1.0, 0.5]),
            ],
        };
        let m = EpisodeMetrics::from_transcript(&tr);
        assert_eq!(m.intrinsic, vec![1.0, 1.0]);
        assert_eq!(m.transfers, vec![-0.5, 1.25]);
        assert_eq!(m.payoffs, vec![0.5, 2.25]);
        assert_eq!(m.welfare, 2.0);
        assert_eq!(m.net_transfer, 0.75);
        assert_eq!(m.net_transfer_routed, 2.75);
        assert_eq!(m.ir_violations, vec![1, 0]);
        assert_eq!(m.accounting_residual(), 0.0);
    }

    #[test]
    fn constant_samples_have_zero_width() {
        let r = MetricReport::from_samples(&[2.5; 10]);
        assert_eq!(r.mean, 2.5);
        assert_eq!(r.ci_low, r.ci_high);
    }

    #[test]
    fn interval_uses_sample_deviation() {
        let r = MetricReport::from_samples(&[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(r.mean, 0.5);
        let se = (1.0f64 / 3.0).sqrt() / 2.0;
        assert!((r.stderr - se).abs() < 1e-15);
        assert!((r.ci_high - (0.5 + Z_975 * se)).abs() < 1e-15);
    }
}
