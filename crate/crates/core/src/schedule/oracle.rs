//! Exhaustive search over triplet orders for tiny instances.
//!
//! With the source flows fixed, a schedule is fully determined by the order
//! in which the triplets are walked at each step, so trying every
//! permutation of `C` at every step finds the best achievable stored size.
//! The cost is `(|C|!)^steps`, hence the hard size guard.

use std::collections::BTreeMap;

use itertools::Itertools;
use thiserror::Error;

use super::{capacities, compute_metrics, run_step, Metrics, NodeProgress, Schedule, StepPlan};
use crate::codec::CodeParams;
use crate::combinatorics::{build_triplets, Triplet};
use crate::sim::AvailabilityTrace;

pub const ORACLE_MAX_NODES: usize = 3;
pub const ORACLE_MAX_STEPS: usize = 5;
pub const ORACLE_MAX_TRIPLETS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: n = {n}, |C| = {triplets}, steps = {steps}")]
    OracleOverflow { n: usize, triplets: usize, steps: usize },
    #[error("inputs disagree: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    /// Metrics of the best schedule: largest stored size, then least traffic.
    pub metrics: Metrics,
    /// Triplet order used at each step by that schedule.
    pub orders: Vec<Vec<Triplet>>,
    pub schedules_explored: usize,
}

struct Search<'a> {
    k: usize,
    tau: f64,
    n: usize,
    perms: Vec<Vec<Triplet>>,
    caps: Vec<Vec<super::Capacity>>,
    flows: &'a [BTreeMap<usize, f64>],
    best: Option<(Metrics, Vec<Vec<Triplet>>)>,
    explored: usize,
}

fn tol(x: f64) -> f64 {
    1e-9 * x.abs().max(1.0)
}

impl Search<'_> {
    fn visit(&mut self, progress: &NodeProgress, steps: &mut Vec<StepPlan>, orders: &mut Vec<Vec<Triplet>>) {
        let t = steps.len();
        if t == self.caps.len() {
            self.explored += 1;
            let sched = Schedule {
                n: self.n,
                tau: self.tau,
                steps: steps.clone(),
            };
            let m = compute_metrics(&sched, progress, self.k);
            let better = match &self.best {
                None => true,
                Some((b, _)) => {
                    m.stored_bits > b.stored_bits + tol(b.stored_bits)
                        || ((m.stored_bits - b.stored_bits).abs() <= tol(b.stored_bits)
                            && m.total_traffic < b.total_traffic - tol(b.total_traffic))
                }
            };
            if better {
                self.best = Some((m, orders.clone()));
            }
            return;
        }
        for p in 0..self.perms.len() {
            let mut next = progress.clone();
            let order = self.perms[p].clone();
            let plan = run_step(&mut next, &order, &self.flows[t], &self.caps[t]);
            steps.push(plan);
            orders.push(order);
            self.visit(&next, steps, orders);
            steps.pop();
            orders.pop();
        }
    }
}

/// Best schedule over all triplet orders, with `source_flows[t]` fixed.
pub fn brute_force_oracle(
    params: &CodeParams,
    trace: &AvailabilityTrace,
    source_flows: &[BTreeMap<usize, f64>],
    horizon: usize,
) -> Result<OracleOutcome, OracleError> {
    let triplets = build_triplets(params);
    if params.n() > ORACLE_MAX_NODES || triplets.len() > ORACLE_MAX_TRIPLETS || horizon > ORACLE_MAX_STEPS {
        return Err(OracleError::OracleOverflow {
            n: params.n(),
            triplets: triplets.len(),
            steps: horizon,
        });
    }
    if trace.n() != params.n() {
        return Err(OracleError::Mismatch(format!(
            "trace has {} nodes, code has {}",
            trace.n(),
            params.n()
        )));
    }
    if trace.steps() < horizon || source_flows.len() < horizon {
        return Err(OracleError::Mismatch(format!(
            "horizon {horizon} exceeds trace ({}) or source flows ({})",
            trace.steps(),
            source_flows.len()
        )));
    }
    let mut search = Search {
        k: params.k(),
        tau: trace.tau(),
        n: params.n(),
        perms: triplets
            .all()
            .iter()
            .copied()
            .permutations(triplets.len())
            .collect(),
        caps: (0..horizon).map(|t| capacities(trace, t)).collect(),
        flows: source_flows,
        best: None,
        explored: 0,
    };
    search.visit(&NodeProgress::new(params.n()), &mut Vec::new(), &mut Vec::new());
    let (metrics, orders) = search.best.expect("at least one schedule explored");
    Ok(OracleOutcome {
        metrics,
        orders,
        schedules_explored: search.explored,
    })
}
