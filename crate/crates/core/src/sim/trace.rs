//! Availability traces: synthetic generation, CSV I/O and derivation from
//! per-node load series.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace has no data rows")]
    EmptyTrace,
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("inconsistent trace: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, TraceError>;

/// `a(i, t)` and per-step bandwidths for the source (row 0) and `n` storage
/// nodes (rows `1..=n`). Bandwidths are in bits per second.
#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityTrace {
    n: usize,
    steps: usize,
    tau: f64,
    avail: Vec<bool>,
    up_bps: Vec<f64>,
    down_bps: Vec<f64>,
}

impl AvailabilityTrace {
    /// Everything offline with zero bandwidth.
    pub fn new(n: usize, steps: usize, tau: f64) -> Self {
        let cells = (n + 1) * steps;
        AvailabilityTrace {
            n,
            steps,
            tau,
            avail: vec![false; cells],
            up_bps: vec![0.0; cells],
            down_bps: vec![0.0; cells],
        }
    }

    /// All nodes and the source online at every step with fixed bandwidths.
    pub fn always_online(n: usize, steps: usize, tau: f64, node_up: f64, node_down: f64, source_up: f64) -> Self {
        let mut tr = Self::new(n, steps, tau);
        for t in 0..steps {
            tr.set(t, 0, true, source_up, source_up);
            for i in 1..=n {
                tr.set(t, i, true, node_up, node_down);
            }
        }
        tr
    }

    fn cell(&self, t: usize, i: usize) -> usize {
        assert!(i <= self.n && t < self.steps, "cell ({i}, {t}) outside trace");
        t * (self.n + 1) + i
    }

    pub fn set(&mut self, t: usize, i: usize, online: bool, up_bps: f64, down_bps: f64) {
        let c = self.cell(t, i);
        self.avail[c] = online;
        self.up_bps[c] = up_bps;
        self.down_bps[c] = down_bps;
    }

    pub fn set_online(&mut self, t: usize, i: usize, online: bool) {
        let c = self.cell(t, i);
        self.avail[c] = online;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn is_online(&self, i: usize, t: usize) -> bool {
        self.avail[self.cell(t, i)]
    }

    pub fn up_bps(&self, i: usize, t: usize) -> f64 {
        self.up_bps[self.cell(t, i)]
    }

    pub fn down_bps(&self, i: usize, t: usize) -> f64 {
        self.down_bps[self.cell(t, i)]
    }

    /// Availability of every row at step `t`; index 0 is the source.
    pub fn online_mask(&self, t: usize) -> Vec<bool> {
        (0..=self.n).map(|i| self.is_online(i, t)).collect()
    }

    /// Fraction of steps storage node `i` is online.
    pub fn mean_availability(&self, i: usize) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        (0..self.steps).filter(|&t| self.is_online(i, t)).count() as f64 / self.steps as f64
    }

    /// Steps `offset..offset + len`, renumbered from 0.
    pub fn window(&self, offset: usize, len: usize) -> Result<Self> {
        if offset + len > self.steps {
            return Err(TraceError::Shape(format!(
                "window {offset}+{len} exceeds {} steps",
                self.steps
            )));
        }
        let mut out = Self::new(self.n, len, self.tau);
        for t in 0..len {
            for i in 0..=self.n {
                let src = self.cell(offset + t, i);
                out.set(t, i, self.avail[src], self.up_bps[src], self.down_bps[src]);
            }
        }
        Ok(out)
    }

    /// Keeps the source and the listed storage nodes, renumbered `1..`.
    pub fn select_nodes(&self, nodes: &[usize]) -> Result<Self> {
        if let Some(&bad) = nodes.iter().find(|&&i| i == 0 || i > self.n) {
            return Err(TraceError::Shape(format!("node {bad} not in trace")));
        }
        let mut out = Self::new(nodes.len(), self.steps, self.tau);
        for t in 0..self.steps {
            for (new, &old) in std::iter::once(&0).chain(nodes).enumerate() {
                let src = self.cell(t, old);
                out.set(t, new, self.avail[src], self.up_bps[src], self.down_bps[src]);
            }
        }
        Ok(out)
    }

    /// Drops storage nodes online fewer than `hours` hours per day on average.
    pub fn filter_min_daily_hours(&self, hours: f64) -> Result<Self> {
        let keep: Vec<usize> = (1..=self.n)
            .filter(|&i| self.mean_availability(i) * 24.0 >= hours)
            .collect();
        self.select_nodes(&keep)
    }

    /// Replaces the source row with a constant always-online source.
    pub fn with_constant_source(mut self, source_up_bps: f64) -> Self {
        for t in 0..self.steps {
            self.set(t, 0, true, source_up_bps, source_up_bps);
        }
        self
    }

    /// CSV with header `node_id,step,avail,up_bps,down_bps`, node-major.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["node_id", "step", "avail", "up_bps", "down_bps"])?;
        for i in 0..=self.n {
            for t in 0..self.steps {
                wr.write_record([
                    i.to_string(),
                    t.to_string(),
                    (self.is_online(i, t) as u8).to_string(),
                    self.up_bps(i, t).to_string(),
                    self.down_bps(i, t).to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Options for [`load_trace_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub tau: f64,
    /// Used when the file has no `node_id = 0` rows.
    pub source_up_bps: f64,
    /// Keep only nodes online at least this many hours per day.
    pub min_daily_hours: Option<f64>,
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T> {
    let raw = rec.get(idx).ok_or_else(|| TraceError::Parse {
        line,
        msg: format!("missing column {name}"),
    })?;
    raw.trim().parse().map_err(|_| TraceError::Parse {
        line,
        msg: format!("bad {name} value {raw:?}"),
    })
}

fn check_header(rec: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = rec.iter().map(str::trim).collect();
    if got != expected {
        return Err(TraceError::Parse {
            line: 1,
            msg: format!("expected header {}, got {}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Row-major grid of per-(node, step) records, checked for completeness.
fn assemble<T: Clone>(cells: BTreeMap<(usize, usize), T>) -> Result<(usize, usize, Vec<Vec<T>>, bool)> {
    if cells.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    let max_node = cells.keys().map(|&(i, _)| i).max().unwrap();
    let steps = cells.keys().map(|&(_, t)| t).max().unwrap() + 1;
    let has_source = cells.keys().any(|&(i, _)| i == 0);
    let mut grid = Vec::with_capacity(max_node + 1);
    for i in 0..=max_node {
        if i == 0 && !has_source {
            grid.push(Vec::new());
            continue;
        }
        let mut row = Vec::with_capacity(steps);
        for t in 0..steps {
            let v = cells.get(&(i, t)).ok_or_else(|| {
                TraceError::Shape(format!("node {i} has no record for step {t}"))
            })?;
            row.push(v.clone());
        }
        grid.push(row);
    }
    Ok((max_node, steps, grid, has_source))
}

pub fn read_trace_csv<R: Read>(r: R, opts: &CsvOptions) -> Result<AvailabilityTrace> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    check_header(rdr.headers()?, &["node_id", "step", "avail", "up_bps", "down_bps"])?;
    let mut cells = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let node: usize = parse_field(&rec, 0, "node_id", line)?;
        let step: usize = parse_field(&rec, 1, "step", line)?;
        let avail: u8 = parse_field(&rec, 2, "avail", line)?;
        let up: f64 = parse_field(&rec, 3, "up_bps", line)?;
        let down: f64 = parse_field(&rec, 4, "down_bps", line)?;
        if avail > 1 {
            return Err(TraceError::Parse {
                line,
                msg: format!("avail must be 0 or 1, got {avail}"),
            });
        }
        if !(up.is_finite() && up >= 0.0 && down.is_finite() && down >= 0.0) {
            return Err(TraceError::Parse {
                line,
                msg: "bandwidths must be finite and non-negative".into(),
            });
        }
        if cells.insert((node, step), (avail == 1, up, down)).is_some() {
            return Err(TraceError::Parse {
                line,
                msg: format!("duplicate record for node {node} step {step}"),
            });
        }
    }
    let (n, steps, grid, has_source) = assemble(cells)?;
    let mut tr = AvailabilityTrace::new(n, steps, opts.tau);
    for (i, row) in grid.iter().enumerate() {
        for (t, &(a, up, down)) in row.iter().enumerate() {
            tr.set(t, i, a, up, down);
        }
    }
    if !has_source {
        tr = tr.with_constant_source(opts.source_up_bps);
    }
    match opts.min_daily_hours {
        Some(h) => tr.filter_min_daily_hours(h),
        None => Ok(tr),
    }
}

pub fn load_trace_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<AvailabilityTrace> {
    read_trace_csv(std::fs::File::open(path)?, opts)
}

/// Quantile by linear interpolation between order statistics:
/// position `(len - 1) * p` in the sorted sample.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bandwidths assigned to load-derived traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub tau: f64,
    pub node_up_bps: f64,
    pub node_down_bps: f64,
    pub source_up_bps: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            tau: 3600.0,
            node_up_bps: 1e9,
            node_down_bps: 1e9,
            source_up_bps: 1e9,
        }
    }
}

/// Node `i` is available at step `t` when its load is strictly below the
/// `p`-quantile of its own series. When nothing is strictly below (the
/// quantile equals the series minimum, e.g. a constant series) the steps at
/// the minimum count as available.
pub fn availability_from_loads(loads: &[f64], p: f64) -> Vec<bool> {
    let q = quantile(loads, p);
    let below: Vec<bool> = loads.iter().map(|&l| l < q).collect();
    if below.iter().any(|&b| b) {
        below
    } else {
        loads.iter().map(|&l| l <= q).collect()
    }
}

pub fn read_load_csv<R: Read>(r: R, p: f64, opts: &LoadOptions) -> Result<AvailabilityTrace> {
    if !(p > 0.0 && p < 1.0) {
        return Err(TraceError::Param(format!("percentile must lie in (0, 1), got {p}")));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    check_header(rdr.headers()?, &["node_id", "step", "load"])?;
    let mut cells = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let node: usize = parse_field(&rec, 0, "node_id", line)?;
        let step: usize = parse_field(&rec, 1, "step", line)?;
        let load: f64 = parse_field(&rec, 2, "load", line)?;
        if !(load.is_finite() && load >= 0.0) {
            return Err(TraceError::Parse {
                line,
                msg: format!("load must be a non-negative number, got {load}"),
            });
        }
        if cells.insert((node, step), load).is_some() {
            return Err(TraceError::Parse {
                line,
                msg: format!("duplicate record for node {node} step {step}"),
            });
        }
    }
    let (n, steps, grid, has_source) = assemble(cells)?;
    let mut tr = AvailabilityTrace::new(n, steps, opts.tau);
    for (i, row) in grid.iter().enumerate() {
        if row.is_empty() {
            continue;
        }
        let (up, down) = if i == 0 {
            (opts.source_up_bps, opts.source_up_bps)
        } else {
            (opts.node_up_bps, opts.node_down_bps)
        };
        for (t, a) in availability_from_loads(row, p).into_iter().enumerate() {
            tr.set(t, i, a, up, down);
        }
    }
    if !has_source {
        tr = tr.with_constant_source(opts.source_up_bps);
    }
    Ok(tr)
}

pub fn derive_from_load(path: impl AsRef<Path>, p: f64, opts: &LoadOptions) -> Result<AvailabilityTrace> {
    read_load_csv(std::fs::File::open(path)?, p, opts)
}

/// How node availability evolves in a synthetic trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AvailabilityModel {
    /// Online independently at each step with probability `q`.
    Bernoulli { q: f64 },
    /// Alternating windows of `on` online steps and `off` offline steps,
    /// with a uniformly random phase per node.
    Windows { on: usize, off: usize },
}

/// Parameters of a synthetic trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub steps: usize,
    pub tau: f64,
    pub model: AvailabilityModel,
    /// Per-node upload bandwidth drawn uniformly from this range, in bits/s.
    pub up_bps: (f64, f64),
    /// Download bandwidth as a multiple of upload.
    pub down_multiplier: f64,
    pub source_up_bps: f64,
    /// Give the source its own availability drawn from `model`.
    pub source_churn: bool,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TraceError::Param(msg));
        if let AvailabilityModel::Bernoulli { q } = self.model {
            if !(0.0..=1.0).contains(&q) {
                return bad(format!("q = {q} outside [0, 1]"));
            }
        }
        if let AvailabilityModel::Windows { on, off } = self.model {
            if on + off == 0 {
                return bad("on + off must be positive".into());
            }
        }
        let (lo, hi) = self.up_bps;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("upload range {lo}-{hi} invalid"));
        }
        if !(self.down_multiplier >= 0.0 && self.source_up_bps >= 0.0 && self.tau > 0.0) {
            return bad("multiplier, source bandwidth and tau must be non-negative (tau positive)".into());
        }
        Ok(())
    }
}

fn availability_row<R: Rng>(model: AvailabilityModel, steps: usize, rng: &mut R) -> Vec<bool> {
    match model {
        AvailabilityModel::Bernoulli { q } => (0..steps).map(|_| rng.gen::<f64>() < q).collect(),
        AvailabilityModel::Windows { on, off } => {
            let period = on + off;
            let phase = rng.gen_range(0..period);
            (0..steps).map(|t| (t + phase) % period < on).collect()
        }
    }
}

/// Draws a synthetic trace: node bandwidths once per node, then
/// availability row by row.
pub fn synth_trace<R: Rng>(spec: &SynthSpec, rng: &mut R) -> Result<AvailabilityTrace> {
    spec.validate()?;
    let mut tr = AvailabilityTrace::new(spec.n, spec.steps, spec.tau);
    let (lo, hi) = spec.up_bps;
    let bandwidths: Vec<f64> = (0..spec.n)
        .map(|_| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
        .collect();
    let source_row = if spec.source_churn {
        availability_row(spec.model, spec.steps, rng)
    } else {
        vec![true; spec.steps]
    };
    for (t, &a) in source_row.iter().enumerate() {
        tr.set(t, 0, a, spec.source_up_bps, spec.source_up_bps);
    }
    for (pos, &up) in bandwidths.iter().enumerate() {
        let row = availability_row(spec.model, spec.steps, rng);
        for (t, a) in row.into_iter().enumerate() {
            tr.set(t, pos + 1, a, up, up * spec.down_multiplier);
        }
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(q: f64) -> SynthSpec {
        SynthSpec {
            n: 7,
            steps: 24,
            tau: 3600.0,
            model: AvailabilityModel::Bernoulli { q },
            up_bps: (20e3, 200e3),
            down_multiplier: 4.0,
            source_up_bps: 1e6,
            source_churn: false,
        }
    }

    const OPTS: CsvOptions = CsvOptions {
        tau: 3600.0,
        source_up_bps: 5.0,
        min_daily_hours: None,
    };

    #[test]
    fn synth_all_online_and_bandwidth_ratio() {
        let tr = synth_trace(&spec(1.0), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for t in 0..24 {
            assert!(tr.online_mask(t).iter().all(|&a| a));
            for i in 1..=7 {
                let up = tr.up_bps(i, t);
                assert!((20e3..=200e3).contains(&up));
                assert_eq!(tr.down_bps(i, t), 4.0 * up);
            }
        }
        let never = synth_trace(&spec(0.0), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((1..=7).all(|i| never.mean_availability(i) == 0.0));
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_trace(&spec(0.5), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = synth_trace(&spec(0.5), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ba).unwrap();
        b.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
        let c = synth_trace(&spec(0.5), &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn windows_model_alternates() {
        let mut s = spec(0.0);
        s.model = AvailabilityModel::Windows { on: 2, off: 3 };
        s.steps = 50;
        let tr = synth_trace(&s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for i in 1..=7 {
            assert!((tr.mean_availability(i) - 0.4).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_examples() {
        let header_only = "node_id,step,avail,up_bps,down_bps\n";
        assert!(matches!(read_trace_csv(header_only.as_bytes(), &OPTS), Err(TraceError::EmptyTrace)));

        let small = "node_id,step,avail,up_bps,down_bps\n\
                     1,0,1,10,40\n1,1,0,10,40\n1,2,1,10,40\n\
                     2,0,0,20,80\n2,1,1,20,80\n2,2,1,20,80\n";
        let tr = read_trace_csv(small.as_bytes(), &OPTS).unwrap();
        assert_eq!((tr.n(), tr.steps()), (2, 3));
        assert_eq!(
            (0..3).map(|t| tr.is_online(1, t)).collect::<Vec<_>>(),
            vec![true, false, true]
        );
        assert_eq!(tr.down_bps(2, 1), 80.0);
        // No source rows: constant source.
        assert!(tr.is_online(0, 2));
        assert_eq!(tr.up_bps(0, 0), 5.0);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let bad = "node_id,step,avail,up_bps,down_bps\n1,0,1,10,40\n1,1,2,10,40\n";
        match read_trace_csv(bad.as_bytes(), &OPTS) {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let gap = "node_id,step,avail,up_bps,down_bps\n1,0,1,10,40\n1,2,1,10,40\n";
        assert!(matches!(read_trace_csv(gap.as_bytes(), &OPTS), Err(TraceError::Shape(_))));
        let header = "node,step,avail,up_bps,down_bps\n1,0,1,10,40\n";
        assert!(matches!(read_trace_csv(header.as_bytes(), &OPTS), Err(TraceError::Parse { line: 1, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let mut s = spec(0.5);
        s.source_churn = true;
        let tr = synth_trace(&s, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(read_trace_csv(buf.as_slice(), &OPTS).unwrap(), tr);
    }

    #[test]
    fn daily_hours_filter() {
        let mut tr = AvailabilityTrace::new(3, 24, 3600.0);
        for t in 0..24 {
            tr.set(t, 0, true, 1.0, 1.0);
            tr.set(t, 1, t < 4, 1.0, 1.0);
            tr.set(t, 2, t < 12, 2.0, 2.0);
            tr.set(t, 3, t < 3, 3.0, 3.0);
        }
        let kept = tr.filter_min_daily_hours(4.0).unwrap();
        assert_eq!(kept.n(), 2);
        assert_eq!(kept.up_bps(2, 0), 2.0);
        assert_eq!(tr.filter_min_daily_hours(12.0).unwrap().n(), 1);
    }

    #[test]
    fn quantile_and_load_threshold() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(
            availability_from_loads(&[1.0, 2.0, 3.0, 4.0], 0.5),
            vec![true, true, false, false]
        );
        assert_eq!(availability_from_loads(&[0.0; 5], 0.5), vec![true; 5]);
        assert_eq!(
            availability_from_loads(&[3.0, 9.0, 1.0, 9.0, 5.0], 0.999),
            vec![true, false, true, false, true]
        );
    }

    #[test]
    fn load_csv_percentiles_nest() {
        let mut text = String::from("node_id,step,load\n");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 1..=4 {
            for t in 0..30 {
                text.push_str(&format!("{i},{t},{}\n", rng.gen_range(0.0..1.0f64)));
            }
        }
        let opts = LoadOptions::default();
        let traces: Vec<AvailabilityTrace> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&p| read_load_csv(text.as_bytes(), p, &opts).unwrap())
            .collect();
        for w in traces.windows(2) {
            for i in 1..=4 {
                for t in 0..30 {
                    assert!(!w[0].is_online(i, t) || w[1].is_online(i, t));
                }
            }
        }
        assert_eq!(traces[0].up_bps(1, 0), 1e9);
        assert!(matches!(read_load_csv(text.as_bytes(), 1.0, &opts), Err(TraceError::Param(_))));
    }
}
