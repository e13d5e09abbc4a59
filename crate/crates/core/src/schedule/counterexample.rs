//! Three hand-built two-step schedules for the `<7, 3>` code, where the
//! source can push three chunks per step. All three respect bandwidth; only
//! [`basis_first`] is actually executable.

use super::{Schedule, SourceFlow, StepPlan, TripletFlow};
use crate::combinatorics::Triplet;
use crate::sim::AvailabilityTrace;

/// Seven nodes, two steps of one second, source upload of three chunks per
/// step and plenty of node bandwidth.
pub fn trace(chunk_bits: f64) -> AvailabilityTrace {
    AvailabilityTrace::always_online(7, 2, 1.0, 100.0 * chunk_bits, 100.0 * chunk_bits, 3.0 * chunk_bits)
}

fn source(dst: usize, chunk: usize, chunk_bits: f64) -> SourceFlow {
    SourceFlow {
        dst,
        bits: chunk_bits,
        offset: Some(chunk as f64 * chunk_bits),
    }
}

fn triplet(i: usize, j: usize, k: usize, chunk: usize, chunk_bits: f64) -> TripletFlow {
    TripletFlow {
        triplet: Triplet::new(i, j, k),
        bits: chunk_bits,
        offset: Some(chunk as f64 * chunk_bits),
    }
}

fn first_step(chunk_bits: f64) -> StepPlan {
    StepPlan {
        source_flows: [1, 2, 3].iter().map(|&d| source(d, 0, chunk_bits)).collect(),
        triplet_flows: Vec::new(),
    }
}

fn rotating_triplets(chunk_bits: f64) -> Vec<TripletFlow> {
    vec![
        triplet(1, 6, 7, 0, chunk_bits),
        triplet(2, 7, 5, 0, chunk_bits),
        triplet(3, 5, 6, 0, chunk_bits),
    ]
}

/// The source sends the first chunk to nodes 5, 6, 7 while the triplets
/// `(1,6)->7`, `(2,7)->5`, `(3,5)->6` regenerate that same chunk.
pub fn duplicate_delivery(chunk_bits: f64) -> Schedule {
    let second = StepPlan {
        source_flows: [5, 6, 7].iter().map(|&d| source(d, 0, chunk_bits)).collect(),
        triplet_flows: rotating_triplets(chunk_bits),
    };
    Schedule {
        n: 7,
        tau: 1.0,
        steps: vec![first_step(chunk_bits), second],
    }
}

/// The source sends the second chunk to nodes 5, 6, 7, so the same three
/// triplets would each need a first chunk that only another of them produces.
pub fn circular_triplets(chunk_bits: f64) -> Schedule {
    let second = StepPlan {
        source_flows: [5, 6, 7].iter().map(|&d| source(d, 1, chunk_bits)).collect(),
        triplet_flows: rotating_triplets(chunk_bits),
    };
    Schedule {
        n: 7,
        tau: 1.0,
        steps: vec![first_step(chunk_bits), second],
    }
}

/// The source feeds the basis `{1, 2, 4}` and the triplets fan its first
/// chunk out to the other four nodes.
pub fn basis_first(chunk_bits: f64) -> Schedule {
    let feed = |chunk| StepPlan {
        source_flows: [1, 2, 4].iter().map(|&d| source(d, chunk, chunk_bits)).collect(),
        triplet_flows: Vec::new(),
    };
    let mut second = feed(1);
    second.triplet_flows = vec![
        triplet(1, 2, 3, 0, chunk_bits),
        triplet(1, 4, 5, 0, chunk_bits),
        triplet(2, 4, 6, 0, chunk_bits),
        triplet(1, 6, 7, 0, chunk_bits),
    ];
    Schedule {
        n: 7,
        tau: 1.0,
        steps: vec![feed(0), second],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{validate_schedule, ViolationKind};

    #[test]
    fn classes() {
        let tr = trace(8.0);
        let dup = validate_schedule(&duplicate_delivery(8.0), &tr);
        assert_eq!(dup.count(ViolationKind::DuplicateData), 3);
        assert_eq!(dup.count(ViolationKind::CircularDependency), 0);
        assert_eq!(dup.count(ViolationKind::Capacity), 0);

        let circ = validate_schedule(&circular_triplets(8.0), &tr);
        assert_eq!(circ.count(ViolationKind::CircularDependency), 3);
        assert_eq!(circ.count(ViolationKind::DuplicateData), 0);
        assert_eq!(circ.count(ViolationKind::Capacity), 0);

        assert!(validate_schedule(&basis_first(8.0), &tr).is_valid());
    }
}
