mod trace_spec;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hsrc::codec::{self, fragment_file_name, read_fragment, write_fragment};
use hsrc::policies::{PolicyConfig, SourcePolicy, TripletPolicy};
use hsrc::schedule::{read_schedule_dump, validate_schedule, write_schedule_dump};
use hsrc::sim::{
    self, load_trace_csv, synth_trace, write_raw_csv, ComparisonReport, CsvOptions, ExperimentConfig, LoadOptions,
    SynthSpec, Topology, TraceSource,
};
use hsrc::{CodeParams, DataObject, Field};
use trace_spec::{parse_rate, TraceArg};

#[derive(Parser)]
#[command(name = "hsrc", version, about = "Homomorphic self-repairing codes and in-network redundancy simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a file into n fragment files.
    Encode(EncodeArgs),
    /// Rebuild a file from the fragment files in a directory.
    Decode(DecodeArgs),
    /// Regenerate one fragment as the xor of two others.
    Repair(RepairArgs),
    /// Write an availability trace CSV.
    GenTrace(GenTraceArgs),
    /// Compare in-network policies against the naive baseline.
    Simulate(SimulateArgs),
    /// Check a schedule dump against a trace.
    Validate(ValidateArgs),
    /// Summarise a JSON report written by `simulate`.
    Report(ReportArgs),
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 8)]
    m: u32,
    /// Field modulus, e.g. 0x11b; defaults to the standard polynomial for m.
    #[arg(long, value_parser = parse_hex)]
    modulus: Option<u64>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    in_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Only use these nodes' fragments.
    #[arg(long, value_delimiter = ',')]
    nodes: Vec<usize>,
}

#[derive(Args)]
struct RepairArgs {
    /// Node whose fragment is regenerated.
    #[arg(long)]
    target: usize,
    /// The two source nodes, e.g. `--from 1,6`.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    from: Vec<usize>,
    /// Directory holding the fragment files; the result is written there too.
    #[arg(long, default_value = ".")]
    dir: PathBuf,
}

#[derive(Args)]
struct TraceOpts {
    /// synth:q=0.8,up=20-200Kbps,down=x4[,src=RATE][,churn] | csv:PATH | load:PATH
    #[arg(long, value_parser = clap::value_parser!(TraceArg))]
    trace: TraceArg,
    /// Load quantile below which a node counts as available (load traces).
    #[arg(long)]
    percentile: Option<f64>,
    /// Drop nodes online fewer hours per day than this (csv traces).
    #[arg(long)]
    min_daily_hours: Option<f64>,
    /// Source upload for file traces without source rows.
    #[arg(long, value_parser = parse_rate, default_value = "1Gbps")]
    source_bw: f64,
    /// Node bandwidth for load traces.
    #[arg(long, value_parser = parse_rate, default_value = "1Gbps")]
    node_bw: f64,
    /// Seconds per step.
    #[arg(long, default_value_t = 3600.0)]
    tau: f64,
}

impl TraceOpts {
    fn source(&self) -> Result<TraceSource> {
        if let TraceArg::Csv(path) | TraceArg::Load(path) = &self.trace {
            if !path.is_file() {
                bail!("trace file {} does not exist", path.display());
            }
        }
        Ok(match &self.trace {
            TraceArg::Synth(spec) => TraceSource::Synthetic(*spec),
            TraceArg::Csv(path) => TraceSource::Csv {
                path: path.clone(),
                options: CsvOptions {
                    tau: self.tau,
                    source_up_bps: self.source_bw,
                    min_daily_hours: self.min_daily_hours,
                },
            },
            TraceArg::Load(path) => TraceSource::Load {
                path: path.clone(),
                percentile: self.percentile.context("load traces need --percentile")?,
                options: LoadOptions {
                    tau: self.tau,
                    node_up_bps: self.node_bw,
                    node_down_bps: self.node_bw,
                    source_up_bps: self.source_bw,
                },
            },
        })
    }
}

#[derive(Args)]
struct GenTraceArgs {
    #[command(flatten)]
    trace: TraceOpts,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 8)]
    m: u32,
    /// rnd-flw, rnd-dta, min-flw, min-dta or SOURCE+TRIPLETS; defaults to all four named.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<PolicyConfig>,
    /// Source policy of an explicit pair (with --triplets).
    #[arg(long, requires = "triplets")]
    source: Option<SourcePolicy>,
    #[arg(long, requires = "source")]
    triplets: Option<TripletPolicy>,
    #[command(flatten)]
    trace: TraceOpts,
    #[arg(long, default_value_t = 120)]
    steps: usize,
    #[arg(long, default_value_t = 500)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Per-run metrics CSV.
    #[arg(long)]
    raw_out: Option<PathBuf>,
    /// Schedule of run 0 under the first policy.
    #[arg(long)]
    dump_schedule: Option<PathBuf>,
    /// Trace of run 0, to validate the dumped schedule against.
    #[arg(long)]
    dump_trace: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 3600.0)]
    tau: f64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    json: PathBuf,
    #[arg(long)]
    raw_out: Option<PathBuf>,
}

fn parse_hex(s: &str) -> Result<u64, String> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X"));
    match digits {
        Some(h) => u64::from_str_radix(h, 16),
        None => s.parse(),
    }
    .map_err(|e| format!("bad modulus {s:?}: {e}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn encode(a: EncodeArgs) -> Result<()> {
    let params = match a.modulus {
        Some(p) => CodeParams::with_field(a.n, a.k, Arc::new(Field::new(a.m, p)?))?,
        None => CodeParams::new(a.n, a.k, a.m)?,
    };
    let bytes = fs::read(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let set = codec::encode(&DataObject::from_bytes(bytes), &params)?;
    fs::create_dir_all(&a.out_dir)?;
    for frag in &set.fragments {
        let mut w = create(&a.out_dir.join(fragment_file_name(frag.index)))?;
        write_fragment(&mut w, frag, &params)?;
        w.flush()?;
    }
    println!("wrote {} fragments of {} rows to {}", set.fragments.len(), set.rows(), a.out_dir.display());
    Ok(())
}

fn read_fragment_file(path: &Path) -> Result<(codec::FragmentHeader, hsrc::Fragment)> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_fragment(std::io::BufReader::new(f)).with_context(|| format!("in {}", path.display()))
}

fn decode(a: DecodeArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&a.in_dir)
        .with_context(|| format!("cannot list {}", a.in_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "hsrc"))
        .collect();
    paths.sort();
    let mut header = None;
    let mut frags = Vec::new();
    for p in &paths {
        let (h, f) = read_fragment_file(p)?;
        if !a.nodes.is_empty() && !a.nodes.contains(&f.index) {
            continue;
        }
        match header {
            None => header = Some(h),
            Some(first) if (first.m, first.modulus, first.n, first.k) != (h.m, h.modulus, h.n, h.k) => {
                bail!("{} belongs to a different code", p.display())
            }
            _ => {}
        }
        frags.push(f);
    }
    let Some(header) = header else {
        bail!("no fragment files in {}", a.in_dir.display());
    };
    let obj = codec::decode(&frags, &header.code_params()?)?;
    fs::write(&a.out, obj.bytes()).with_context(|| format!("cannot write {}", a.out.display()))?;
    println!("decoded {} bits from {} fragments", obj.bit_len(), frags.len());
    Ok(())
}

fn repair(a: RepairArgs) -> Result<()> {
    let [i, j] = a.from[..] else {
        bail!("--from takes exactly two node indices");
    };
    let (ha, fa) = read_fragment_file(&a.dir.join(fragment_file_name(i)))?;
    let (_, fb) = read_fragment_file(&a.dir.join(fragment_file_name(j)))?;
    let params = ha.code_params()?;
    let out = codec::repair(&fa, &fb, a.target, &params)?;
    let path = a.dir.join(fragment_file_name(a.target));
    let mut w = create(&path)?;
    write_fragment(&mut w, &out, &params)?;
    w.flush()?;
    println!("regenerated {} from nodes {i} and {j}", path.display());
    Ok(())
}

fn gen_trace(a: GenTraceArgs) -> Result<()> {
    let trace = match a.trace.source()? {
        TraceSource::Synthetic(spec) => {
            let spec = SynthSpec {
                n: a.n.context("synthetic traces need --n")?,
                steps: a.steps.context("synthetic traces need --steps")?,
                tau: a.trace.tau,
                ..spec
            };
            synth_trace(&spec, &mut ChaCha8Rng::seed_from_u64(a.seed))?
        }
        TraceSource::Csv { path, options } => load_trace_csv(path, &options)?,
        TraceSource::Load {
            path,
            percentile,
            options,
        } => sim::derive_from_load(path, percentile, &options)?,
    };
    let mut w = create(&a.out)?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    println!("wrote {} nodes x {} steps to {}", trace.n(), trace.steps(), a.out.display());
    Ok(())
}

fn print_summary(report: &ComparisonReport) {
    let c = &report.config;
    println!("<{}, {}, {}>  runs={} steps={} tau={}s seed={}", c.n, c.k, c.m, c.runs, c.steps, c.tau, c.seed);
    println!("naive stored bits: {:.6e}", report.naive_stored_bits.mean);
    println!(
        "{:<22} {:>16} {:>18} {:>18}",
        "policy", "gain % (sd)", "traffic inc % (sd)", "source red % (sd)"
    );
    for p in &report.policies {
        let cell = |s: &sim::Summary| format!("{:.1} ({:.1})", s.mean, s.stdev);
        println!(
            "{:<22} {:>16} {:>18} {:>18}",
            p.policy,
            cell(&p.throughput_gain_pct),
            cell(&p.traffic_increment_pct),
            cell(&p.source_reduction_pct)
        );
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut policies = a.policy.clone();
    if let (Some(s), Some(t)) = (a.source, a.triplets) {
        policies.push(PolicyConfig::new(s, t));
    }
    if policies.is_empty() {
        policies = PolicyConfig::named().to_vec();
    }
    let config = ExperimentConfig {
        n: a.n,
        k: a.k,
        m: a.m,
        policies,
        trace: a.trace.source()?,
        runs: a.runs,
        steps: a.steps,
        tau: a.trace.tau,
        seed: a.seed,
        jobs: a.jobs,
    };
    let report = sim::run_experiment(&config)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &a.json {
        Some(path) => {
            fs::write(path, json).with_context(|| format!("cannot write {}", path.display()))?;
            print_summary(&report);
        }
        None => print!("{json}"),
    }
    if let Some(path) = &a.raw_out {
        let mut w = create(path)?;
        write_raw_csv(&report, &mut w)?;
        w.flush()?;
    }
    if a.dump_schedule.is_some() || a.dump_trace.is_some() {
        let full = sim::load_source(&config)?;
        let trace = sim::run_trace(&config, full.as_ref(), 0)?;
        if let Some(path) = &a.dump_trace {
            let mut w = create(path)?;
            trace.write_csv(&mut w)?;
            w.flush()?;
        }
        if let Some(path) = &a.dump_schedule {
            let topo = Topology::new(CodeParams::new(config.n, config.k, config.m)?);
            let policy = config.policies[0].with_seed(sim::policy_seed(config.seed, 0));
            let outcome = sim::run_policy(&topo, &trace, &policy);
            let mut w = create(path)?;
            write_schedule_dump(&outcome.schedule, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Returns whether the schedule is valid.
fn validate(a: ValidateArgs) -> Result<bool> {
    let opts = CsvOptions {
        tau: a.tau,
        source_up_bps: 0.0,
        min_daily_hours: None,
    };
    let trace = load_trace_csv(&a.trace, &opts).with_context(|| format!("in {}", a.trace.display()))?;
    let f = File::open(&a.schedule).with_context(|| format!("cannot open {}", a.schedule.display()))?;
    let sched = read_schedule_dump(f, trace.n(), a.tau).with_context(|| format!("in {}", a.schedule.display()))?;
    let report = validate_schedule(&sched, &trace);
    for v in &report.violations {
        println!("{v}");
    }
    if report.is_valid() {
        println!("valid: {} steps, no violations", sched.steps.len());
    } else {
        println!("{} violation(s)", report.violations.len());
    }
    Ok(report.is_valid())
}

fn report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.json).with_context(|| format!("cannot read {}", a.json.display()))?;
    let report: ComparisonReport = serde_json::from_str(&text).with_context(|| format!("in {}", a.json.display()))?;
    if report.schema != 1 {
        bail!("unsupported report schema {}", report.schema);
    }
    print_summary(&report);
    if let Some(path) = &a.raw_out {
        let mut w = create(path)?;
        write_raw_csv(&report, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Repair(a) => repair(a),
        Command::GenTrace(a) => gen_trace(a),
        Command::Simulate(a) => simulate(a),
        Command::Validate(a) => match validate(a) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
