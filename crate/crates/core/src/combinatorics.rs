//! Repair triplets, out/in-creation sets and bases.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::codec::CodeParams;
use crate::gf::{rank_over_f2, FieldElement};

/// `(src_a, src_b) -> dst`: node `dst` can be generated by xoring the
/// fragments of `src_a` and `src_b`. Stored with `src_a < src_b`; the
/// derived ordering is the canonical `(i, j, k)` lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub src_a: usize,
    pub src_b: usize,
    pub dst: usize,
}

impl Triplet {
    /// Canonicalises the source order. Panics if indices repeat.
    pub fn new(i: usize, j: usize, dst: usize) -> Self {
        assert!(i != j && i != dst && j != dst, "triplet indices must be distinct");
        Triplet {
            src_a: i.min(j),
            src_b: i.max(j),
            dst,
        }
    }

    pub fn nodes(&self) -> [usize; 3] {
        [self.src_a, self.src_b, self.dst]
    }

    pub fn has_source(&self, node: usize) -> bool {
        self.src_a == node || self.src_b == node
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})->{}", self.src_a, self.src_b, self.dst)
    }
}

/// The full set `C` with per-node out-creation `O(i)` and in-creation `I(k)` views.
#[derive(Debug, Clone)]
pub struct TripletSet {
    n: usize,
    all: Vec<Triplet>,
    by_out: Vec<Vec<usize>>,
    by_in: Vec<Vec<usize>>,
}

impl TripletSet {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Every canonical triplet in lexicographic order.
    pub fn all(&self) -> &[Triplet] {
        &self.all
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    /// `O(i)`: triplets that read node `i`'s fragment.
    pub fn out_set(&self, i: usize) -> impl Iterator<Item = &Triplet> + '_ {
        self.by_out[i].iter().map(|&t| &self.all[t])
    }

    /// `I(k)`: triplets that produce node `k`'s fragment.
    pub fn in_set(&self, k: usize) -> impl Iterator<Item = &Triplet> + '_ {
        self.by_in[k].iter().map(|&t| &self.all[t])
    }

    pub fn contains(&self, t: &Triplet) -> bool {
        self.all.binary_search(t).is_ok()
    }
}

/// Scans every source pair and keeps those whose point sum is another point.
pub fn build_triplets(params: &CodeParams) -> TripletSet {
    let n = params.n();
    let mut all = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            if let Some(dst) = params.index_of(params.alpha(i) + params.alpha(j)) {
                all.push(Triplet::new(i, j, dst));
            }
        }
    }
    all.sort();
    let mut by_out = vec![Vec::new(); n + 1];
    let mut by_in = vec![Vec::new(); n + 1];
    for (pos, t) in all.iter().enumerate() {
        by_out[t.src_a].push(pos);
        by_out[t.src_b].push(pos);
        by_in[t.dst].push(pos);
    }
    TripletSet { n, all, by_out, by_in }
}

/// `k` nodes whose evaluation points are linearly independent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Basis {
    pub members: Vec<usize>,
}

impl Basis {
    pub fn contains(&self, node: usize) -> bool {
        self.members.contains(&node)
    }
}

/// All independent `k`-subsets of `1..=n`, in lexicographic order.
pub fn enumerate_bases(params: &CodeParams) -> Vec<Basis> {
    (1..=params.n())
        .combinations(params.k())
        .filter(|members| {
            let points: Vec<FieldElement> = members.iter().map(|&i| params.alpha(i)).collect();
            rank_over_f2(&points) == params.k()
        })
        .map(|members| Basis { members })
        .collect()
}

/// Bases whose members are all online. `online[i]` is node `i`'s
/// availability; slot 0 (the source) is ignored.
pub fn available_bases<'a>(bases: &'a [Basis], online: &[bool]) -> Vec<&'a Basis> {
    bases
        .iter()
        .filter(|b| b.members.iter().all(|&i| online[i]))
        .collect()
}

/// Triplets whose three nodes are all online, in canonical order.
pub fn available_triplets(ts: &TripletSet, online: &[bool]) -> Vec<Triplet> {
    ts.all()
        .iter()
        .filter(|t| t.nodes().iter().all(|&i| online[i]))
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn t(i: usize, j: usize, k: usize) -> Triplet {
        Triplet::new(i, j, k)
    }

    fn online(n: usize, up: &[usize]) -> Vec<bool> {
        (0..=n).map(|i| up.contains(&i)).collect()
    }

    #[test]
    fn seven_node_sets() {
        let ts = build_triplets(&CodeParams::new(7, 3, 4).unwrap());
        let out1: BTreeSet<Triplet> = ts.out_set(1).copied().collect();
        let expected: BTreeSet<Triplet> =
            [t(1, 3, 2), t(1, 2, 3), t(1, 5, 4), t(1, 4, 5), t(1, 7, 6), t(1, 6, 7)].into();
        assert_eq!(out1, expected);
        let in7: Vec<Triplet> = ts.in_set(7).copied().collect();
        assert_eq!(in7, vec![t(1, 6, 7), t(2, 5, 7), t(3, 4, 7)]);
        assert_eq!(ts.len(), 21);
    }

    #[test]
    fn smallest_code() {
        let ts = build_triplets(&CodeParams::new(3, 2, 4).unwrap());
        assert_eq!(ts.all(), &[t(1, 2, 3), t(1, 3, 2), t(2, 3, 1)]);
        for i in 1..=3 {
            assert_eq!(ts.out_set(i).count(), 2);
            assert_eq!(ts.in_set(i).count(), 1);
        }
    }

    #[test]
    fn set_cardinalities_for_full_codes() {
        for tdeg in 2..=5u32 {
            let n = (1usize << tdeg) - 1;
            let p = CodeParams::new(n, tdeg as usize, 8).unwrap();
            let ts = build_triplets(&p);
            assert_eq!(ts.len(), n * (n - 1) / 2);
            for i in 1..=n {
                assert_eq!(ts.out_set(i).count(), n - 1);
                assert_eq!(ts.in_set(i).count(), (n - 1) / 2);
            }
            for c in ts.all() {
                assert_eq!(p.alpha(c.dst), p.alpha(c.src_a) + p.alpha(c.src_b));
                assert_eq!(c.dst, c.src_a ^ c.src_b);
                assert!(ts.contains(&t(c.src_a, c.dst, c.src_b)));
                assert!(ts.contains(&t(c.src_b, c.dst, c.src_a)));
            }
        }
    }

    #[test]
    fn bases_of_seven_three() {
        let p = CodeParams::new(7, 3, 4).unwrap();
        let bases = enumerate_bases(&p);
        assert_eq!(bases.len(), 28);
        assert!(bases.contains(&Basis { members: vec![1, 2, 4] }));
        assert!(!bases.contains(&Basis { members: vec![1, 2, 3] }));
        assert!(bases.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn availability_filters() {
        let p = CodeParams::new(7, 3, 4).unwrap();
        let bases = enumerate_bases(&p);
        let ts = build_triplets(&p);
        assert_eq!(available_bases(&bases, &online(7, &[0, 1, 2, 3, 4, 5, 6, 7])).len(), 28);
        assert!(available_bases(&bases, &online(7, &[0])).is_empty());
        // {1,2,7}: 7 = 1+2+4 is independent of 1, 2.
        let some: Vec<Vec<usize>> = available_bases(&bases, &online(7, &[1, 2, 4, 7]))
            .into_iter()
            .map(|b| b.members.clone())
            .collect();
        assert_eq!(some, vec![vec![1, 2, 4], vec![1, 2, 7], vec![1, 4, 7], vec![2, 4, 7]]);

        assert_eq!(available_triplets(&ts, &online(7, &[1, 2, 3, 4, 5, 6, 7])), ts.all());
        assert!(available_triplets(&ts, &online(7, &[1, 2])).is_empty());
        assert_eq!(available_triplets(&ts, &online(7, &[1, 6, 7])), vec![t(1, 6, 7), t(1, 7, 6), t(6, 7, 1)]);
    }
}
