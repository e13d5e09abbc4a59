//! Source allocation and triplet ordering heuristics.
//!
//! Each step the source picks one available basis (or, for
//! [`SourcePolicy::NoBasis`], every online node) and spreads its upload so
//! the members' `theta` end up as even as possible. The triplet policy then
//! decides the order in which the engine walks the available triplets.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{Basis, Triplet};
use crate::schedule::{Budgets, Capacity, NodeProgress};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourcePolicy {
    /// Uniformly random available basis.
    Random,
    /// Basis whose members hold the least data on average.
    MinData,
    /// Basis whose members hold the most data on average.
    MaxData,
    /// No basis: even out over all online nodes.
    NoBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripletPolicy {
    Random,
    /// Ascending `theta` of the destination.
    MinData,
    /// Descending `theta` of the destination.
    MaxData,
    /// Descending by the amount the triplet could move right now.
    MaxFlow,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown policy {0:?}")]
pub struct UnknownPolicy(pub String);

impl SourcePolicy {
    pub fn name(self) -> &'static str {
        match self {
            SourcePolicy::Random => "random",
            SourcePolicy::MinData => "min-data",
            SourcePolicy::MaxData => "max-data",
            SourcePolicy::NoBasis => "no-basis",
        }
    }
}

impl TripletPolicy {
    pub fn name(self) -> &'static str {
        match self {
            TripletPolicy::Random => "random",
            TripletPolicy::MinData => "min-data",
            TripletPolicy::MaxData => "max-data",
            TripletPolicy::MaxFlow => "max-flow",
        }
    }
}

impl FromStr for SourcePolicy {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SourcePolicy::Random),
            "min-data" => Ok(SourcePolicy::MinData),
            "max-data" => Ok(SourcePolicy::MaxData),
            "no-basis" => Ok(SourcePolicy::NoBasis),
            _ => Err(UnknownPolicy(s.to_string())),
        }
    }
}

impl FromStr for TripletPolicy {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(TripletPolicy::Random),
            "min-data" => Ok(TripletPolicy::MinData),
            "max-data" => Ok(TripletPolicy::MaxData),
            "max-flow" => Ok(TripletPolicy::MaxFlow),
            _ => Err(UnknownPolicy(s.to_string())),
        }
    }
}

impl fmt::Display for SourcePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for TripletPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A source policy paired with a triplet policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub source_policy: SourcePolicy,
    pub triplet_policy: TripletPolicy,
    pub rng_seed: u64,
}

impl PolicyConfig {
    pub fn new(source_policy: SourcePolicy, triplet_policy: TripletPolicy) -> Self {
        PolicyConfig {
            source_policy,
            triplet_policy,
            rng_seed: 0,
        }
    }

    pub fn rnd_flw() -> Self {
        Self::new(SourcePolicy::Random, TripletPolicy::MaxFlow)
    }

    pub fn rnd_dta() -> Self {
        Self::new(SourcePolicy::Random, TripletPolicy::MinData)
    }

    pub fn min_flw() -> Self {
        Self::new(SourcePolicy::MinData, TripletPolicy::MaxFlow)
    }

    pub fn min_dta() -> Self {
        Self::new(SourcePolicy::MinData, TripletPolicy::MinData)
    }

    /// The four named combinations.
    pub fn named() -> [PolicyConfig; 4] {
        [Self::rnd_flw(), Self::rnd_dta(), Self::min_flw(), Self::min_dta()]
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    /// `rnd-flw` style name for the named combinations, otherwise
    /// `source+triplets`.
    pub fn label(&self) -> String {
        use SourcePolicy as S;
        use TripletPolicy as T;
        match (self.source_policy, self.triplet_policy) {
            (S::Random, T::MaxFlow) => "rnd-flw".into(),
            (S::Random, T::MinData) => "rnd-dta".into(),
            (S::MinData, T::MaxFlow) => "min-flw".into(),
            (S::MinData, T::MinData) => "min-dta".into(),
            (s, t) => format!("{s}+{t}"),
        }
    }
}

impl fmt::Display for PolicyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Accepts the named combinations and `source+triplets` pairs.
impl FromStr for PolicyConfig {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rnd-flw" => Ok(Self::rnd_flw()),
            "rnd-dta" => Ok(Self::rnd_dta()),
            "min-flw" => Ok(Self::min_flw()),
            "min-dta" => Ok(Self::min_dta()),
            _ => {
                let (a, b) = s.split_once('+').ok_or_else(|| UnknownPolicy(s.to_string()))?;
                Ok(Self::new(a.parse()?, b.parse()?))
            }
        }
    }
}

/// Splits `budget` over nodes with levels `theta` and per-node ceilings
/// `caps` so that the resulting levels are as even as possible: finds `L`
/// with `sum_i clamp(L - theta[i], 0, caps[i]) = budget` and returns the
/// clamped amounts. If the caps cannot absorb the budget every node gets
/// its cap.
pub fn water_fill(theta: &[f64], caps: &[f64], budget: f64) -> Vec<f64> {
    assert_eq!(theta.len(), caps.len());
    let caps: Vec<f64> = caps.iter().map(|&c| c.max(0.0)).collect();
    let total: f64 = caps.iter().sum();
    if budget <= 0.0 || total <= 0.0 {
        return vec![0.0; theta.len()];
    }
    if budget >= total {
        return caps;
    }
    let fill = |level: f64| -> f64 {
        theta
            .iter()
            .zip(&caps)
            .map(|(&t, &c)| (level - t).clamp(0.0, c))
            .sum()
    };
    // fill() is piecewise linear between the breakpoints theta and theta + cap.
    let mut points: Vec<f64> = theta
        .iter()
        .zip(&caps)
        .flat_map(|(&t, &c)| [t, t + c])
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut level = points[points.len() - 1];
    for w in points.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (f_lo, f_hi) = (fill(lo), fill(hi));
        if f_hi >= budget {
            level = if f_hi > f_lo {
                lo + (budget - f_lo) * (hi - lo) / (f_hi - f_lo)
            } else {
                lo
            };
            break;
        }
    }
    let mut out: Vec<f64> = theta
        .iter()
        .zip(&caps)
        .map(|(&t, &c)| (level - t).clamp(0.0, c))
        .collect();
    // Absorb rounding so the total never exceeds the budget.
    let sum: f64 = out.iter().sum();
    if sum > budget {
        let scale = budget / sum;
        out.iter_mut().for_each(|x| *x *= scale);
    }
    out
}

fn mean_theta(basis: &Basis, progress: &NodeProgress) -> f64 {
    basis.members.iter().map(|&i| progress.theta[i]).sum::<f64>() / basis.members.len() as f64
}

/// Picks the basis the source feeds this step. `available` is expected in
/// canonical order; ties go to the earliest.
pub fn choose_basis<'a, R: Rng>(
    policy: SourcePolicy,
    available: &[&'a Basis],
    progress: &NodeProgress,
    rng: &mut R,
) -> Option<&'a Basis> {
    if available.is_empty() {
        return None;
    }
    let pick_by = |better: fn(f64, f64) -> bool| {
        let mut best = available[0];
        let mut best_key = mean_theta(best, progress);
        for &b in &available[1..] {
            let key = mean_theta(b, progress);
            if better(key, best_key) {
                best = b;
                best_key = key;
            }
        }
        best
    };
    match policy {
        SourcePolicy::Random => Some(available[rng.gen_range(0..available.len())]),
        SourcePolicy::MinData => Some(pick_by(|a, b| a < b)),
        SourcePolicy::MaxData => Some(pick_by(|a, b| a > b)),
        SourcePolicy::NoBasis => None,
    }
}

/// Source flows for one step: `u_src` bits water-filled over the chosen
/// basis (or every online node under `NoBasis`), each member capped by its
/// download capacity. Returns an empty map when no basis is available.
pub fn allocate_source<R: Rng>(
    policy: SourcePolicy,
    bases_available: &[&Basis],
    progress: &NodeProgress,
    u_src: f64,
    caps: &[Capacity],
    online: &[bool],
    rng: &mut R,
) -> BTreeMap<usize, f64> {
    if u_src <= 0.0 {
        return BTreeMap::new();
    }
    let members: Vec<usize> = match policy {
        SourcePolicy::NoBasis => (1..online.len()).filter(|&i| online[i]).collect(),
        _ => match choose_basis(policy, bases_available, progress, rng) {
            Some(b) => b.members.clone(),
            None => return BTreeMap::new(),
        },
    };
    let theta: Vec<f64> = members.iter().map(|&i| progress.theta[i]).collect();
    let ceil: Vec<f64> = members.iter().map(|&i| caps[i].download).collect();
    members
        .into_iter()
        .zip(water_fill(&theta, &ceil, u_src))
        .filter(|&(_, bits)| bits > 0.0)
        .collect()
}

/// Amount `(i, j) -> k` could move given the remaining budgets and the
/// prefix rule.
pub fn max_flow_key(t: &Triplet, progress: &NodeProgress, budgets: &Budgets) -> f64 {
    let th = &progress.theta;
    budgets
        .triplet_bandwidth(t)
        .min(th[t.src_a] - th[t.dst])
        .min(th[t.src_b] - th[t.dst])
        .max(0.0)
}

/// Orders `available` for the engine. `progress` and `budgets` should
/// reflect the step's source flows already applied. Ties keep canonical
/// `(i, j, k)` order.
pub fn sort_triplets<R: Rng>(
    policy: TripletPolicy,
    available: &[Triplet],
    progress: &NodeProgress,
    budgets: &Budgets,
    rng: &mut R,
) -> Vec<Triplet> {
    let mut out = available.to_vec();
    out.sort();
    let theta = &progress.theta;
    match policy {
        TripletPolicy::Random => out.shuffle(rng),
        TripletPolicy::MinData => out.sort_by(|a, b| theta[a.dst].total_cmp(&theta[b.dst])),
        TripletPolicy::MaxData => out.sort_by(|a, b| theta[b.dst].total_cmp(&theta[a.dst])),
        TripletPolicy::MaxFlow => {
            let mut keyed: Vec<(f64, Triplet)> =
                out.iter().map(|t| (max_flow_key(t, progress, budgets), *t)).collect();
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
            out = keyed.into_iter().map(|(_, t)| t).collect();
        }
    }
    out
}
