//! The discrete-time transfer model.
//!
//! Each step the source pushes data to storage nodes, then repair triplets
//! are walked in a caller-chosen order. Node `i` always holds a prefix of
//! its fragment of length `theta[i]` bits, so a triplet `(i, j) -> k` can
//! only deliver bits in `[theta[k], min(theta[i], theta[j]))`. That prefix
//! rule rules out both duplicate deliveries and circular dependencies.
//!
//! `theta` is continuous; the chunk boundaries of the codec only matter
//! when a schedule is replayed against real fragments.

mod dump;
mod oracle;
mod validate;

pub mod counterexample;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::combinatorics::Triplet;
use crate::sim::AvailabilityTrace;

pub use dump::{parse_schedule_dump, read_schedule_dump, write_schedule_dump, DumpError};
pub use oracle::{brute_force_oracle, OracleError, OracleOutcome};
pub use validate::{validate_schedule, ValidationReport, Violation, ViolationKind};

/// Bits a node can send and receive during one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    pub upload: f64,
    pub download: f64,
}

/// `u(i,t) = a(i,t) * up(i,t) * tau`, likewise for download. Index 0 is the source.
pub fn capacities(trace: &AvailabilityTrace, t: usize) -> Vec<Capacity> {
    (0..=trace.n())
        .map(|i| {
            if trace.is_online(i, t) {
                Capacity {
                    upload: trace.up_bps(i, t) * trace.tau(),
                    download: trace.down_bps(i, t) * trace.tau(),
                }
            } else {
                Capacity::default()
            }
        })
        .collect()
}

/// Cumulative bits received per node, split by origin. Slot 0 is unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProgress {
    pub theta: Vec<f64>,
    pub source_received: Vec<f64>,
    pub innet_received: Vec<f64>,
}

impl NodeProgress {
    pub fn new(n: usize) -> Self {
        NodeProgress {
            theta: vec![0.0; n + 1],
            source_received: vec![0.0; n + 1],
            innet_received: vec![0.0; n + 1],
        }
    }

    pub fn n(&self) -> usize {
        self.theta.len() - 1
    }

    /// `min_i theta[i]` over the storage nodes.
    pub fn min_theta(&self) -> f64 {
        self.theta[1..].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Progress after the source flows, without the triplet phase.
    pub fn with_source(&self, flows: &BTreeMap<usize, f64>) -> NodeProgress {
        let mut next = self.clone();
        next.apply_source(flows);
        next
    }

    fn apply_source(&mut self, flows: &BTreeMap<usize, f64>) -> Vec<SourceFlow> {
        let mut out = Vec::new();
        for (&dst, &bits) in flows {
            if bits <= 0.0 {
                continue;
            }
            out.push(SourceFlow {
                dst,
                bits,
                offset: Some(self.theta[dst]),
            });
            self.theta[dst] += bits;
            self.source_received[dst] += bits;
        }
        out
    }
}

/// `f(s, dst, t)`. `offset` is where the delivered range starts in the
/// destination's fragment; `None` means "right after what it holds".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceFlow {
    pub dst: usize,
    pub bits: f64,
    pub offset: Option<f64>,
}

/// `R(c, t)`: each source of the triplet uploads `bits`, the destination
/// stores their xor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletFlow {
    pub triplet: Triplet,
    pub bits: f64,
    pub offset: Option<f64>,
}

/// Transfers of one step, in execution order: every source flow, then the
/// triplet grants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub source_flows: Vec<SourceFlow>,
    pub triplet_flows: Vec<TripletFlow>,
}

impl StepPlan {
    pub fn source_bits(&self) -> f64 {
        self.source_flows.iter().map(|f| f.bits).sum()
    }

    pub fn triplet_bits(&self) -> f64 {
        self.triplet_flows.iter().map(|f| f.bits).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n: usize,
    pub tau: f64,
    pub steps: Vec<StepPlan>,
}

impl Schedule {
    pub fn new(n: usize, tau: f64) -> Self {
        Schedule {
            n,
            tau,
            steps: Vec::new(),
        }
    }
}

/// Capacity left for the triplet phase of a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Budgets {
    pub upload: Vec<f64>,
    pub download: Vec<f64>,
}

impl Budgets {
    /// Node capacities minus what the source flows already consumed.
    pub fn after_source(caps: &[Capacity], source_flows: &BTreeMap<usize, f64>) -> Self {
        let upload = caps.iter().map(|c| c.upload).collect();
        let mut download: Vec<f64> = caps.iter().map(|c| c.download).collect();
        for (&dst, &bits) in source_flows {
            download[dst] = (download[dst] - bits).max(0.0);
        }
        Budgets { upload, download }
    }

    /// Most a triplet could move on bandwidth alone: both sources upload
    /// the amount and the destination downloads twice it.
    pub fn triplet_bandwidth(&self, t: &Triplet) -> f64 {
        self.upload[t.src_a]
            .min(self.upload[t.src_b])
            .min(self.download[t.dst] / 2.0)
            .max(0.0)
    }
}

/// Runs one step: applies the source flows, then walks `sorted_triplets`
/// granting each `(i, j) -> k` as much as bandwidth and the prefix rule
/// allow, possibly a fractional amount.
pub fn run_step(
    progress: &mut NodeProgress,
    sorted_triplets: &[Triplet],
    source_flows: &BTreeMap<usize, f64>,
    caps: &[Capacity],
) -> StepPlan {
    let mut budgets = Budgets::after_source(caps, source_flows);
    let source = progress.apply_source(source_flows);
    let mut grants = Vec::new();
    for &c in sorted_triplets {
        let by_bw = budgets.triplet_bandwidth(&c);
        let theta = &progress.theta;
        let by_index = (theta[c.src_a].min(theta[c.src_b]) - theta[c.dst]).max(0.0);
        let amount = by_bw.min(by_index);
        if amount <= 0.0 {
            continue;
        }
        grants.push(TripletFlow {
            triplet: c,
            bits: amount,
            offset: Some(progress.theta[c.dst]),
        });
        budgets.upload[c.src_a] -= amount;
        budgets.upload[c.src_b] -= amount;
        budgets.download[c.dst] -= 2.0 * amount;
        progress.theta[c.dst] += amount;
        progress.innet_received[c.dst] += amount;
    }
    StepPlan {
        source_flows: source,
        triplet_flows: grants,
    }
}

/// Outcome of a finished schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Largest object fully stored: `k * min_i theta[i]`.
    pub stored_bits: f64,
    /// Source bits plus twice the triplet bits.
    pub total_traffic: f64,
    pub source_bits: f64,
    pub innet_bits: f64,
    pub source_per_useful: Option<f64>,
    pub traffic_per_useful: Option<f64>,
    pub throughput_bps: f64,
}

/// Derives the metrics of a schedule from its flows and the final progress.
pub fn compute_metrics(sched: &Schedule, progress: &NodeProgress, k: usize) -> Metrics {
    let stored_bits = progress.min_theta().max(0.0) * k as f64;
    let source_bits: f64 = sched.steps.iter().map(StepPlan::source_bits).sum();
    let innet_bits: f64 = sched.steps.iter().map(StepPlan::triplet_bits).sum();
    let total_traffic = source_bits + 2.0 * innet_bits;
    let per_useful = |x: f64| (stored_bits > 0.0).then(|| x / stored_bits);
    let duration = sched.steps.len() as f64 * sched.tau;
    Metrics {
        stored_bits,
        total_traffic,
        source_bits,
        innet_bits,
        source_per_useful: per_useful(source_bits),
        traffic_per_useful: per_useful(total_traffic),
        throughput_bps: if duration > 0.0 { stored_bits / duration } else { 0.0 },
    }
}
