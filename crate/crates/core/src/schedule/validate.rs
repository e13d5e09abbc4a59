//! Replays a schedule with explicit per-node holdings and reports transfers
//! that deliver data twice, depend on data nobody holds yet, or exceed the
//! step's bandwidth.
//!
//! This deliberately shares no code with the engine: holdings are interval
//! sets rather than a single prefix length, triplet membership is checked by
//! index xor, and capacities are re-derived from the trace.

use std::fmt;

use serde::Serialize;

use super::{capacities, Schedule};
use crate::sim::AvailabilityTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// The destination already held part of the delivered range.
    DuplicateData,
    /// A triplet source did not hold the range it was supposed to xor.
    CircularDependency,
    /// Source upload, node upload or node download exceeded.
    Capacity,
    /// A flow outside the valid repair triplets or node range.
    InvalidTriplet,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::DuplicateData => "duplicate-data",
            ViolationKind::CircularDependency => "circular-dependency",
            ViolationKind::Capacity => "capacity",
            ViolationKind::InvalidTriplet => "invalid-triplet",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub step: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} {}: {}", self.step, self.kind, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

fn tol(x: f64) -> f64 {
    1e-9 * x.abs().max(1.0)
}

/// Disjoint, sorted, merged half-open intervals of fragment bits.
#[derive(Debug, Clone, Default)]
struct Holdings(Vec<(f64, f64)>);

impl Holdings {
    /// End of the contiguous range starting at bit 0.
    fn prefix_end(&self) -> f64 {
        match self.0.first() {
            Some(&(s, e)) if s <= tol(0.0) => e,
            _ => 0.0,
        }
    }

    fn covers(&self, lo: f64, hi: f64) -> bool {
        self.0
            .iter()
            .any(|&(s, e)| s <= lo + tol(lo) && e >= hi - tol(hi))
    }

    fn overlap(&self, lo: f64, hi: f64) -> f64 {
        self.0
            .iter()
            .map(|&(s, e)| (e.min(hi) - s.max(lo)).max(0.0))
            .sum()
    }

    fn insert(&mut self, lo: f64, hi: f64) {
        self.0.push((lo, hi));
        self.0.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.0.len());
        for &(s, e) in &self.0 {
            match merged.last_mut() {
                Some(last) if s <= last.1 + tol(last.1) => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        self.0 = merged;
    }
}

/// Checks every step of `sched` against `trace`.
pub fn validate_schedule(sched: &Schedule, trace: &AvailabilityTrace) -> ValidationReport {
    let n = trace.n();
    let mut held = vec![Holdings::default(); n + 1];
    let mut violations = Vec::new();
    let mut flag = |step: usize, kind: ViolationKind, detail: String| {
        violations.push(Violation { step, kind, detail });
    };
    for (t, plan) in sched.steps.iter().enumerate() {
        if t >= trace.steps() && (!plan.source_flows.is_empty() || !plan.triplet_flows.is_empty()) {
            flag(t, ViolationKind::Capacity, format!("step beyond the {}-step trace", trace.steps()));
            continue;
        }
        if t >= trace.steps() {
            continue;
        }
        let caps = capacities(trace, t);
        let mut up = vec![0.0; n + 1];
        let mut down = vec![0.0; n + 1];

        for f in &plan.source_flows {
            if f.dst == 0 || f.dst > n {
                flag(t, ViolationKind::InvalidTriplet, format!("source flow to unknown node {}", f.dst));
                continue;
            }
            up[0] += f.bits;
            down[f.dst] += f.bits;
            let lo = f.offset.unwrap_or_else(|| held[f.dst].prefix_end());
            let hi = lo + f.bits;
            if held[f.dst].overlap(lo, hi) > tol(f.bits) {
                flag(
                    t,
                    ViolationKind::DuplicateData,
                    format!("source resends bits [{lo}, {hi}) to node {}", f.dst),
                );
            }
            held[f.dst].insert(lo, hi);
        }

        for g in &plan.triplet_flows {
            let c = g.triplet;
            let in_range = c.nodes().iter().all(|&i| (1..=n).contains(&i));
            if !in_range || c.src_a == c.src_b || c.src_a ^ c.src_b != c.dst {
                flag(t, ViolationKind::InvalidTriplet, format!("{c} is not a repair triplet"));
                continue;
            }
            up[c.src_a] += g.bits;
            up[c.src_b] += g.bits;
            down[c.dst] += 2.0 * g.bits;
            let lo = g.offset.unwrap_or_else(|| held[c.dst].prefix_end());
            let hi = lo + g.bits;
            let missing: Vec<usize> = [c.src_a, c.src_b]
                .into_iter()
                .filter(|&s| !held[s].covers(lo, hi))
                .collect();
            if !missing.is_empty() {
                flag(
                    t,
                    ViolationKind::CircularDependency,
                    format!("{c} needs bits [{lo}, {hi}) not yet held by node(s) {missing:?}"),
                );
                continue;
            }
            if held[c.dst].overlap(lo, hi) > tol(g.bits) {
                flag(
                    t,
                    ViolationKind::DuplicateData,
                    format!("{c} regenerates bits [{lo}, {hi}) node {} already holds", c.dst),
                );
            }
            held[c.dst].insert(lo, hi);
        }

        if up[0] > caps[0].upload + tol(caps[0].upload) {
            flag(
                t,
                ViolationKind::Capacity,
                format!("source uploads {} > {}", up[0], caps[0].upload),
            );
        }
        for i in 1..=n {
            if up[i] > caps[i].upload + tol(caps[i].upload) {
                flag(t, ViolationKind::Capacity, format!("node {i} uploads {} > {}", up[i], caps[i].upload));
            }
            if down[i] > caps[i].download + tol(caps[i].download) {
                flag(
                    t,
                    ViolationKind::Capacity,
                    format!("node {i} downloads {} > {}", down[i], caps[i].download),
                );
            }
        }
    }
    ValidationReport { violations }
}
