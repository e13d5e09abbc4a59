//! Running backup processes over availability traces and comparing
//! in-network policies against the naive baseline.

mod trace;

pub use trace::*;

use std::io::Write;
use std::path::PathBuf;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodeParams, CodecError};
use crate::combinatorics::{available_bases, available_triplets, build_triplets, enumerate_bases, Basis, TripletSet};
use crate::policies::{allocate_source, sort_triplets, PolicyConfig, SourcePolicy, TripletPolicy};
use crate::schedule::{capacities, compute_metrics, run_step, Budgets, Metrics, NodeProgress, Schedule};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Code structures shared by every run with the same parameters.
#[derive(Debug, Clone)]
pub struct Topology {
    pub params: CodeParams,
    pub triplets: TripletSet,
    pub bases: Vec<Basis>,
}

impl Topology {
    pub fn new(params: CodeParams) -> Self {
        Topology {
            triplets: build_triplets(&params),
            bases: enumerate_bases(&params),
            params,
        }
    }
}

/// Schedule, final progress and metrics of one backup process.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub schedule: Schedule,
    pub progress: NodeProgress,
    pub metrics: Metrics,
}

/// Steps the engine over the whole trace. `triplets = None` disables the
/// in-network phase.
pub fn simulate<R: Rng>(
    topo: &Topology,
    trace: &AvailabilityTrace,
    source: SourcePolicy,
    triplets: Option<TripletPolicy>,
    rng: &mut R,
) -> RunOutcome {
    let n = topo.params.n();
    assert_eq!(trace.n(), n, "trace and code disagree on n");
    let mut progress = NodeProgress::new(n);
    let mut schedule = Schedule::new(n, trace.tau());
    for t in 0..trace.steps() {
        let caps = capacities(trace, t);
        let online = trace.online_mask(t);
        let flows = if online[0] {
            let bases = available_bases(&topo.bases, &online);
            allocate_source(source, &bases, &progress, caps[0].upload, &caps, &online, rng)
        } else {
            Default::default()
        };
        let order = match triplets {
            Some(policy) => {
                let preview = progress.with_source(&flows);
                let budgets = Budgets::after_source(&caps, &flows);
                let avail = available_triplets(&topo.triplets, &online);
                sort_triplets(policy, &avail, &preview, &budgets, rng)
            }
            None => Vec::new(),
        };
        schedule.steps.push(run_step(&mut progress, &order, &flows, &caps));
    }
    let metrics = compute_metrics(&schedule, &progress, topo.params.k());
    RunOutcome {
        schedule,
        progress,
        metrics,
    }
}

/// The source alone uploads to every online node, evening out `theta`.
pub fn run_naive(topo: &Topology, trace: &AvailabilityTrace) -> RunOutcome {
    // NoBasis never draws from the rng.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    simulate(topo, trace, SourcePolicy::NoBasis, None, &mut rng)
}

/// One policy over the trace, seeded from `policy.rng_seed`.
pub fn run_policy(topo: &Topology, trace: &AvailabilityTrace, policy: &PolicyConfig) -> RunOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(policy.rng_seed);
    simulate(topo, trace, policy.source_policy, Some(policy.triplet_policy), &mut rng)
}

/// Where each run's trace comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceSource {
    /// A fresh synthetic trace per run; `n`, `steps` and `tau` are taken
    /// from the experiment.
    Synthetic(SynthSpec),
    /// Availability CSV; each run draws a random node subset and window.
    Csv { path: PathBuf, options: CsvOptions },
    /// Load CSV thresholded at `percentile`; subsets and windows as for `Csv`.
    Load {
        path: PathBuf,
        percentile: f64,
        options: LoadOptions,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub m: u32,
    pub policies: Vec<PolicyConfig>,
    pub trace: TraceSource,
    pub runs: usize,
    pub steps: usize,
    pub tau: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.policies.is_empty() {
            return bad("no policies to compare".into());
        }
        if let TraceSource::Load { percentile, .. } = self.trace {
            if !(percentile > 0.0 && percentile < 1.0) {
                return bad(format!("percentile must lie in (0, 1), got {percentile}"));
            }
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        Ok(())
    }
}

/// Relative differences of one policy run against the naive run on the
/// same trace, in percent. `None` when the naive reference is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `100 (M_policy - M_naive) / M_naive`.
    pub throughput_gain_pct: Option<f64>,
    /// Increase of traffic per useful bit.
    pub traffic_increment_pct: Option<f64>,
    /// Decrease of source upload per useful bit.
    pub source_reduction_pct: Option<f64>,
}

impl Comparison {
    pub fn between(policy: &Metrics, naive: &Metrics) -> Self {
        let rel = |p: f64, base: f64| (base > 0.0).then(|| 100.0 * (p - base) / base);
        let both = |p: Option<f64>, b: Option<f64>| p.zip(b);
        Comparison {
            throughput_gain_pct: rel(policy.stored_bits, naive.stored_bits),
            traffic_increment_pct: both(policy.traffic_per_useful, naive.traffic_per_useful)
                .and_then(|(p, b)| rel(p, b)),
            source_reduction_pct: both(policy.source_per_useful, naive.source_per_useful)
                .and_then(|(p, b)| rel(p, b).map(|x| -x)),
        }
    }
}

/// Mean and sample standard deviation of the defined values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stdev: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let xs: Vec<f64> = values.into_iter().flatten().collect();
        let count = xs.len();
        if count == 0 {
            return Summary::default();
        }
        let mean = xs.iter().sum::<f64>() / count as f64;
        let stdev = if count > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary { mean, stdev, count }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub stored_bits: Summary,
    pub throughput_gain_pct: Summary,
    pub traffic_increment_pct: Summary,
    pub source_reduction_pct: Summary,
}

/// One run of one policy (or of the baseline, labelled `naive`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub policy: String,
    pub metrics: Metrics,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub naive_stored_bits: Summary,
    pub policies: Vec<PolicySummary>,
    pub runs: Vec<RunRecord>,
}

/// Seed of stream `stream` derived from the experiment seed.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed every policy uses in run `run`.
pub fn policy_seed(seed: u64, run: usize) -> u64 {
    stream_rng(seed, 2 * run as u64 + 1).gen()
}

/// Random `n`-node subset and `steps`-long window of a file trace.
fn sample_instance<R: Rng>(full: &AvailabilityTrace, n: usize, steps: usize, rng: &mut R) -> Result<AvailabilityTrace, SimError> {
    if full.n() < n || full.steps() < steps {
        return Err(SimError::Config(format!(
            "trace has {} nodes x {} steps, experiment needs {n} x {steps}",
            full.n(),
            full.steps()
        )));
    }
    let mut nodes: Vec<usize> = sample(rng, full.n(), n).into_iter().map(|i| i + 1).collect();
    nodes.sort_unstable();
    let offset = rng.gen_range(0..=full.steps() - steps);
    Ok(full.select_nodes(&nodes)?.window(offset, steps)?)
}

/// The trace used by run `run`.
pub fn run_trace(config: &ExperimentConfig, full: Option<&AvailabilityTrace>, run: usize) -> Result<AvailabilityTrace, SimError> {
    let mut rng = stream_rng(config.seed, 2 * run as u64);
    match (&config.trace, full) {
        (TraceSource::Synthetic(spec), _) => {
            let spec = SynthSpec {
                n: config.n,
                steps: config.steps,
                tau: config.tau,
                ..*spec
            };
            Ok(synth_trace(&spec, &mut rng)?)
        }
        (_, Some(full)) => sample_instance(full, config.n, config.steps, &mut rng),
        (_, None) => Err(SimError::Config("file trace not loaded".into())),
    }
}

/// Loads the file behind a CSV or load trace source, with `tau` forced to
/// the experiment's.
pub fn load_source(config: &ExperimentConfig) -> Result<Option<AvailabilityTrace>, SimError> {
    Ok(match &config.trace {
        TraceSource::Synthetic(_) => None,
        TraceSource::Csv { path, options } => {
            let opts = CsvOptions {
                tau: config.tau,
                ..*options
            };
            Some(load_trace_csv(path, &opts)?)
        }
        TraceSource::Load {
            path,
            percentile,
            options,
        } => {
            let opts = LoadOptions {
                tau: config.tau,
                ..*options
            };
            Some(derive_from_load(path, *percentile, &opts)?)
        }
    })
}

fn one_run(config: &ExperimentConfig, topo: &Topology, full: Option<&AvailabilityTrace>, run: usize) -> Result<Vec<RunRecord>, SimError> {
    let trace = run_trace(config, full, run)?;
    let naive = run_naive(topo, &trace).metrics;
    let mut out = vec![RunRecord {
        run,
        policy: "naive".into(),
        metrics: naive,
        comparison: Comparison::between(&naive, &naive),
    }];
    let policy_seed = policy_seed(config.seed, run);
    for p in &config.policies {
        let metrics = run_policy(topo, &trace, &p.with_seed(policy_seed)).metrics;
        out.push(RunRecord {
            run,
            policy: p.label(),
            metrics,
            comparison: Comparison::between(&metrics, &naive),
        });
    }
    Ok(out)
}

/// Runs naive plus every configured policy on `runs` trace instances and
/// aggregates the comparisons. Results do not depend on `jobs`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ComparisonReport, SimError> {
    config.validate()?;
    let topo = Topology::new(CodeParams::new(config.n, config.k, config.m)?);
    let full = load_source(config)?;
    let work = || -> Result<Vec<Vec<RunRecord>>, SimError> {
        (0..config.runs)
            .into_par_iter()
            .map(|r| one_run(config, &topo, full.as_ref(), r))
            .collect()
    };
    let per_run = match config.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new().num_threads(j).build()?.install(work)?,
        None => work()?,
    };
    let runs: Vec<RunRecord> = per_run.into_iter().flatten().collect();
    fn select<'a>(runs: &'a [RunRecord], label: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        runs.iter().filter(move |r| r.policy == label)
    }
    let policies = config
        .policies
        .iter()
        .map(|p| {
            let label = p.label();
            PolicySummary {
                stored_bits: Summary::of(select(&runs, &label).map(|r| Some(r.metrics.stored_bits))),
                throughput_gain_pct: Summary::of(select(&runs, &label).map(|r| r.comparison.throughput_gain_pct)),
                traffic_increment_pct: Summary::of(select(&runs, &label).map(|r| r.comparison.traffic_increment_pct)),
                source_reduction_pct: Summary::of(select(&runs, &label).map(|r| r.comparison.source_reduction_pct)),
                policy: label,
            }
        })
        .collect();
    Ok(ComparisonReport {
        schema: 1,
        config: config.clone(),
        naive_stored_bits: Summary::of(select(&runs, "naive").map(|r| Some(r.metrics.stored_bits))),
        policies,
        runs,
    })
}

/// Per-run metrics as CSV, one row per (run, policy).
pub fn write_raw_csv<W: Write>(report: &ComparisonReport, w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "run",
        "policy",
        "stored_bits",
        "total_traffic",
        "source_bits",
        "innet_bits",
        "throughput_bps",
        "throughput_gain_pct",
        "traffic_increment_pct",
        "source_reduction_pct",
    ])?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for r in &report.runs {
        let m = &r.metrics;
        wr.write_record([
            r.run.to_string(),
            r.policy.clone(),
            m.stored_bits.to_string(),
            m.total_traffic.to_string(),
            m.source_bits.to_string(),
            m.innet_bits.to_string(),
            m.throughput_bps.to_string(),
            opt(r.comparison.throughput_gain_pct),
            opt(r.comparison.traffic_increment_pct),
            opt(r.comparison.source_reduction_pct),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
