//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hsrc::codec::{decode, encode, eval_poly, repair, CodecError};
use hsrc::combinatorics::{build_triplets, Triplet};
use hsrc::schedule::{brute_force_oracle, counterexample, validate_schedule, ViolationKind};
use hsrc::sim::{
    run_experiment, run_naive, run_policy, simulate, AvailabilityModel, AvailabilityTrace, ExperimentConfig,
    SynthSpec, Topology, TraceSource,
};
use hsrc::{CodeParams, DataObject, FieldElement, PolicyConfig, SourcePolicy, TripletPolicy};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_object(rng: &mut ChaCha8Rng, bits: u64) -> DataObject {
    let mut bytes = vec![0u8; bits.div_ceil(8) as usize];
    rng.fill_bytes(&mut bytes);
    DataObject::new(bytes, bits).unwrap()
}

/// p(a + b) = p(a) + p(b) over GF(16), every nonzero pair, 100 objects.
fn homomorphism() -> Check {
    let p = CodeParams::new(7, 3, 4).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0usize;
    for _ in 0..100 {
        let o: Vec<FieldElement> = (0..3).map(|_| FieldElement::from_bits(rng.gen_range(0..16))).collect();
        let at = |x: u32| -> FieldElement {
            if x == 0 {
                FieldElement::ZERO
            } else {
                eval_poly(&o, FieldElement::from_bits(x), &p).unwrap()
            }
        };
        for a in 1..16u32 {
            for b in 1..16u32 {
                ensure(at(a ^ b) == at(a) + at(b), || format!("p({a}+{b}) != p({a})+p({b}) for {o:?}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} identities"))
}

/// Every triplet regenerates its destination bit-exactly.
fn self_repair() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut repairs = 0usize;
    for m in [4, 8] {
        let p = CodeParams::new(7, 3, m).map_err(|e| e.to_string())?;
        let ts = build_triplets(&p);
        for i in 1..=7 {
            ensure(ts.out_set(i).count() == 6, || format!("|O({i})| != 6"))?;
            ensure(ts.in_set(i).count() == 3, || format!("|I({i})| != 3"))?;
        }
        for _ in 0..100 {
            let bits = rng.gen_range(1..400);
            let set = encode(&random_object(&mut rng, bits), &p).map_err(|e| e.to_string())?;
            for t in ts.all() {
                let got = repair(set.fragment(t.src_a), set.fragment(t.src_b), t.dst, &p).map_err(|e| e.to_string())?;
                ensure(&got == set.fragment(t.dst), || format!("m={m} {t} mismatch"))?;
                repairs += 1;
            }
        }
    }
    Ok(format!("{repairs} repairs"))
}

/// Span of a set of evaluation indices over F2, by closure.
fn f2_rank(points: &[usize]) -> usize {
    let mut span: BTreeSet<usize> = [0].into();
    for &p in points {
        let next: Vec<usize> = span.iter().map(|&s| s ^ p).collect();
        span.extend(next);
    }
    span.len().trailing_zeros() as usize
}

/// 28 of the 35 triples decode; the rest report dependence.
fn decode_coverage() -> Check {
    let p = CodeParams::new(7, 3, 8).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let obj = random_object(&mut rng, 1000);
    let set = encode(&obj, &p).map_err(|e| e.to_string())?;
    let (mut ok, mut dependent) = (0, 0);
    for subset in (1..=7).combinations(3) {
        let frags: Vec<_> = subset.iter().map(|&i| set.fragment(i).clone()).collect();
        let independent = f2_rank(&subset) == 3;
        match decode(&frags, &p) {
            Ok(back) => {
                ensure(independent, || format!("{subset:?} decoded but is dependent"))?;
                ensure(back == obj, || format!("{subset:?} decoded to a different object"))?;
                ok += 1;
            }
            Err(CodecError::DependentFragments { .. }) => {
                ensure(!independent, || format!("{subset:?} rejected but is independent"))?;
                dependent += 1;
            }
            Err(e) => return Err(format!("{subset:?}: {e}")),
        }
    }
    ensure(ok == 28 && dependent == 7, || format!("{ok} decoded, {dependent} dependent"))?;
    Ok("28 decoded, 7 dependent".into())
}

fn random_trace(rng: &mut ChaCha8Rng, n: usize, steps: usize) -> AvailabilityTrace {
    let mut tr = AvailabilityTrace::new(n, steps, 1.0);
    let q = rng.gen_range(0.2..=1.0);
    for t in 0..steps {
        let src = rng.gen_range(0.0..200.0);
        tr.set(t, 0, rng.gen_bool(0.9), src, src);
        for i in 1..=n {
            let up = rng.gen_range(0.0..100.0);
            let down = up * rng.gen_range(0.5..5.0);
            tr.set(t, i, rng.gen_bool(q), up, down);
        }
    }
    tr
}

const ALL_SOURCE: [SourcePolicy; 4] = [
    SourcePolicy::Random,
    SourcePolicy::MinData,
    SourcePolicy::MaxData,
    SourcePolicy::NoBasis,
];
const ALL_TRIPLETS: [TripletPolicy; 4] = [
    TripletPolicy::Random,
    TripletPolicy::MinData,
    TripletPolicy::MaxData,
    TripletPolicy::MaxFlow,
];

/// Engine schedules are always clean; the hand-built ones are not.
fn schedule_validity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let topos: Vec<Topology> = [(3, 2), (7, 3), (15, 4)]
        .iter()
        .map(|&(n, k)| Topology::new(CodeParams::new(n, k, 8).unwrap()))
        .collect();
    for case in 0..1000 {
        let topo = &topos[rng.gen_range(0..topos.len())];
        let steps = rng.gen_range(1..12);
        let tr = random_trace(&mut rng, topo.params.n(), steps);
        let source = ALL_SOURCE[rng.gen_range(0..4)];
        let triplets = ALL_TRIPLETS[rng.gen_range(0..4)];
        let mut prng = ChaCha8Rng::seed_from_u64(rng.gen());
        let out = simulate(topo, &tr, source, Some(triplets), &mut prng);
        let report = validate_schedule(&out.schedule, &tr);
        ensure(report.is_valid(), || {
            format!("case {case} ({source}+{triplets}, n={}): {}", topo.params.n(), report.violations[0])
        })?;
    }
    let tr = counterexample::trace(8.0);
    let dup = validate_schedule(&counterexample::duplicate_delivery(8.0), &tr);
    ensure(
        dup.count(ViolationKind::DuplicateData) > 0 && dup.count(ViolationKind::CircularDependency) == 0,
        || format!("duplicate-delivery schedule flagged as {:?}", dup.violations),
    )?;
    let circ = validate_schedule(&counterexample::circular_triplets(8.0), &tr);
    ensure(
        circ.count(ViolationKind::CircularDependency) > 0 && circ.count(ViolationKind::DuplicateData) == 0,
        || format!("circular schedule flagged as {:?}", circ.violations),
    )?;
    ensure(validate_schedule(&counterexample::basis_first(8.0), &tr).is_valid(), || {
        "basis-first schedule rejected".into()
    })?;
    Ok(format!(
        "1000 engine schedules clean; counterexamples: {} duplicate, {} circular",
        dup.count(ViolationKind::DuplicateData),
        circ.count(ViolationKind::CircularDependency)
    ))
}

/// Source reduction and traffic increment approach 4/7 at steady state.
fn steady_state() -> Check {
    let topo = Topology::new(CodeParams::new(7, 3, 8).map_err(|e| e.to_string())?);
    // Source is the bottleneck: node links are 100x faster.
    let tr = AvailabilityTrace::always_online(7, 120, 3600.0, 100e6, 100e6, 1e6);
    let naive = run_naive(&topo, &tr).metrics;
    let policy = run_policy(&topo, &tr, &PolicyConfig::rnd_flw().with_seed(5)).metrics;
    let c = hsrc::sim::Comparison::between(&policy, &naive);
    let red = c.source_reduction_pct.ok_or("no reduction")?;
    let inc = c.traffic_increment_pct.ok_or("no increment")?;
    let target = 400.0 / 7.0;
    ensure((red - target).abs() <= 3.0 && (inc - target).abs() <= 3.0, || {
        format!("reduction {red:.2}%, increment {inc:.2}%, expected {target:.2} +- 3")
    })?;
    Ok(format!("reduction {red:.2}%, increment {inc:.2}% (target {target:.2}%)"))
}

/// No heuristic beats exhaustive search with the same source flows.
fn oracle_dominance() -> Check {
    let params = CodeParams::new(3, 2, 8).map_err(|e| e.to_string())?;
    let topo = Topology::new(params.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut matches = 0;
    let mut compared = 0;
    let mut strictly_below = 0;
    for inst in 0..50 {
        let steps = rng.gen_range(1..=4);
        let mut tr = AvailabilityTrace::new(3, steps, 1.0);
        for t in 0..steps {
            tr.set(t, 0, true, rng.gen_range(1.0..30.0), 0.0);
            for i in 1..=3 {
                let up = rng.gen_range(0.0..20.0);
                tr.set(t, i, rng.gen_bool(0.7), up, up * rng.gen_range(1.0..4.0));
            }
        }
        for policy in ALL_SOURCE
            .iter()
            .filter(|&&s| s != SourcePolicy::NoBasis)
            .flat_map(|&s| ALL_TRIPLETS.iter().map(move |&t| PolicyConfig::new(s, t)))
        {
            let out = run_policy(&topo, &tr, &policy.with_seed(inst as u64));
            let flows: Vec<BTreeMap<usize, f64>> = out
                .schedule
                .steps
                .iter()
                .map(|s| s.source_flows.iter().map(|f| (f.dst, f.bits)).collect())
                .collect();
            let best = brute_force_oracle(&params, &tr, &flows, steps).map_err(|e| e.to_string())?;
            let (h, o) = (out.metrics.stored_bits, best.metrics.stored_bits);
            ensure(o >= h - 1e-9 * h.max(1.0), || format!("instance {inst} {policy}: heuristic {h} > oracle {o}"))?;
            if policy == PolicyConfig::rnd_flw() && (o - h).abs() <= 1e-9 * o.max(1.0) {
                matches += 1;
            }
            if o - h > 1e-9 * o.max(1.0) {
                strictly_below += 1;
            }
            compared += 1;
        }
    }
    ensure(matches > 0, || "RndFlw never matched the oracle".into())?;
    Ok(format!(
        "{compared} comparisons ({strictly_below} strictly below the oracle), RndFlw optimal on {matches}/50 instances"
    ))
}

fn synth_experiment(q: f64) -> ExperimentConfig {
    ExperimentConfig {
        n: 7,
        k: 3,
        m: 8,
        policies: vec![PolicyConfig::rnd_flw()],
        trace: TraceSource::Synthetic(SynthSpec {
            n: 0,
            steps: 0,
            tau: 0.0,
            model: AvailabilityModel::Bernoulli { q },
            up_bps: (20e3, 200e3),
            down_multiplier: 4.0,
            source_up_bps: 200e3,
            source_churn: false,
        }),
        runs: 20,
        steps: 120,
        tau: 3600.0,
        seed: 7,
        jobs: None,
    }
}

/// Gain grows with availability; traffic increment stays under 100%.
fn trend() -> Check {
    let mut gains = Vec::new();
    for q in [0.3, 0.5, 0.8] {
        let report = run_experiment(&synth_experiment(q)).map_err(|e| e.to_string())?;
        for r in report.runs.iter().filter(|r| r.policy != "naive") {
            if let Some(inc) = r.comparison.traffic_increment_pct {
                ensure(inc < 100.0, || format!("q={q} run {}: traffic increment {inc:.1}%", r.run))?;
            }
        }
        gains.push((q, report.policies[0].throughput_gain_pct.mean));
    }
    let text: Vec<String> = gains.iter().map(|(q, g)| format!("q={q}: {g:.1}%")).collect();
    ensure(gains.windows(2).all(|w| w[1].1 > w[0].1), || format!("gain not increasing: {}", text.join(", ")))?;
    Ok(format!("mean gain {}", text.join(", ")))
}

/// Identical `simulate` invocations write identical JSON.
fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (name, jobs) in [("a.json", "1"), ("b.json", "4")] {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_hsrc"))
            .args(["simulate", "--n", "7", "--k", "3", "--policy", "rnd-flw", "--trace", "synth:q=0.8"])
            .args(["--steps", "24", "--runs", "20", "--seed", "7", "--jobs", jobs, "--json"])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "reports differ".into())?;
    Ok(format!("{} identical bytes (jobs 1 vs 4)", outputs[0].len()))
}

/// Replays an engine schedule chunk by chunk on real fragments and decodes
/// the stored prefix from nodes {1, 2, 4}.
fn end_to_end() -> Check {
    let m = 8u32;
    let params = CodeParams::new(7, 3, m).map_err(|e| e.to_string())?;
    let topo = Topology::new(params.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = SynthSpec {
        n: 7,
        steps: 40,
        tau: 1.0,
        model: AvailabilityModel::Bernoulli { q: 0.85 },
        up_bps: (64.0, 256.0),
        down_multiplier: 4.0,
        source_up_bps: 192.0,
        source_churn: false,
    };
    let tr = hsrc::sim::synth_trace(&spec, &mut rng).map_err(|e| e.to_string())?;
    let out = run_policy(&topo, &tr, &PolicyConfig::rnd_flw().with_seed(3));
    let max_theta = out.progress.theta.iter().copied().fold(0.0, f64::max);
    let rows = (max_theta / m as f64).ceil() as u64 + 1;
    let obj = random_object(&mut rng, rows * params.row_bits());
    let set = encode(&obj, &params).map_err(|e| e.to_string())?;

    let chunk = m as f64;
    let whole = |bits: f64| (bits / chunk + 1e-9).floor() as usize;
    let mut theta = vec![0.0f64; 8];
    let mut held: Vec<Vec<FieldElement>> = vec![Vec::new(); 8];
    for plan in &out.schedule.steps {
        for f in &plan.source_flows {
            theta[f.dst] += f.bits;
            let have = held[f.dst].len();
            held[f.dst].extend_from_slice(&set.fragment(f.dst).chunks[have..whole(theta[f.dst])]);
        }
        for g in &plan.triplet_flows {
            let Triplet { src_a, src_b, dst } = g.triplet;
            theta[dst] += g.bits;
            for row in held[dst].len()..whole(theta[dst]) {
                let (a, b) = (held[src_a].get(row), held[src_b].get(row));
                let (Some(&a), Some(&b)) = (a, b) else {
                    return Err(format!("{} needs row {row} before its sources hold it", g.triplet));
                };
                held[dst].push(a + b);
            }
        }
    }
    for i in 1..=7 {
        ensure(held[i][..] == set.fragment(i).chunks[..held[i].len()], || {
            format!("node {i} replay diverges from its fragment")
        })?;
    }
    let stored_rows = (1..=7).map(|i| held[i].len()).min().unwrap();
    ensure(stored_rows > 0, || "nothing stored".into())?;
    let frags: Vec<_> = [1, 2, 4]
        .iter()
        .map(|&i| hsrc::Fragment {
            index: i,
            object_bits: stored_rows as u64 * params.row_bits(),
            chunks: held[i][..stored_rows].to_vec(),
        })
        .collect();
    let back = decode(&frags, &params).map_err(|e| e.to_string())?;
    let prefix_bits = stored_rows as u64 * params.row_bits();
    ensure(back == obj.prefix(prefix_bits), || "decoded prefix differs".into())?;
    Ok(format!(
        "decoded {prefix_bits} bits (M = {:.1} bits, {} whole rows)",
        out.metrics.stored_bits, stored_rows
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check, Duration); 9] = [
        ("1 homomorphism", homomorphism, Duration::from_secs(1)),
        ("2 self-repair", self_repair, Duration::from_secs(1)),
        ("3 decode coverage", decode_coverage, Duration::from_secs(5)),
        ("4 schedule validity", schedule_validity, Duration::from_secs(30)),
        ("5 steady-state accounting", steady_state, Duration::from_secs(10)),
        ("6 oracle dominance", oracle_dominance, Duration::from_secs(60)),
        ("7 availability trend", trend, Duration::from_secs(120)),
        ("8 determinism", determinism, Duration::from_secs(120)),
        ("9 end-to-end replay", end_to_end, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = match result {
            Ok(msg) if took > budget => Err(format!("{msg}; took {took:.2?} > {budget:?}")),
            r => r,
        };
        match result {
            Ok(msg) => println!("criterion {name}: PASS ({took:.2?}) {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {name}: FAIL ({took:.2?}) {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
