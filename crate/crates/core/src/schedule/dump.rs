//! Line-oriented schedule dumps.
//!
//! ```text
//! t,0,dst,bits[,offset]     source flow (node 0 is the source)
//! t,i,j,k,bits[,offset]     triplet flow (i,j) -> k
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Records within a
//! step are replayed in file order.

use std::io::{BufRead, BufReader, Read, Write};

use thiserror::Error;

use super::{Schedule, SourceFlow, StepPlan, TripletFlow};
use crate::combinatorics::Triplet;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_schedule_dump<W: Write>(sched: &Schedule, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# t,0,dst,bits,offset | t,i,j,k,bits,offset")?;
    let tail = |offset: Option<f64>| offset.map_or(String::new(), |o| format!(",{o}"));
    for (t, plan) in sched.steps.iter().enumerate() {
        for f in &plan.source_flows {
            writeln!(w, "{t},0,{},{}{}", f.dst, f.bits, tail(f.offset))?;
        }
        for g in &plan.triplet_flows {
            let c = g.triplet;
            writeln!(w, "{t},{},{},{},{}{}", c.src_a, c.src_b, c.dst, g.bits, tail(g.offset))?;
        }
    }
    Ok(())
}

pub fn parse_schedule_dump(text: &str, n: usize, tau: f64) -> Result<Schedule, DumpError> {
    let mut sched = Schedule::new(n, tau);
    for (pos, raw) in text.lines().enumerate() {
        let line = pos + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |msg: String| DumpError::Parse { line, msg };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let int = |idx: usize| -> Result<usize, DumpError> {
            fields[idx]
                .parse()
                .map_err(|_| err(format!("field {} is not an index: {:?}", idx + 1, fields[idx])))
        };
        let num = |idx: usize| -> Result<f64, DumpError> {
            let v: f64 = fields[idx]
                .parse()
                .map_err(|_| err(format!("field {} is not a number: {:?}", idx + 1, fields[idx])))?;
            if !v.is_finite() || v < 0.0 {
                return Err(err(format!("field {} must be finite and non-negative", idx + 1)));
            }
            Ok(v)
        };
        if fields.len() < 4 {
            return Err(err(format!("expected at least 4 fields, got {}", fields.len())));
        }
        let t = int(0)?;
        if sched.steps.len() <= t {
            sched.steps.resize_with(t + 1, StepPlan::default);
        }
        if int(1)? == 0 {
            if fields.len() > 5 {
                return Err(err(format!("source record has {} fields", fields.len())));
            }
            let offset = if fields.len() == 5 { Some(num(4)?) } else { None };
            sched.steps[t].source_flows.push(SourceFlow {
                dst: int(2)?,
                bits: num(3)?,
                offset,
            });
        } else {
            if !(5..=6).contains(&fields.len()) {
                return Err(err(format!("triplet record has {} fields", fields.len())));
            }
            let (i, j) = (int(1)?, int(2)?);
            let offset = if fields.len() == 6 { Some(num(5)?) } else { None };
            sched.steps[t].triplet_flows.push(TripletFlow {
                triplet: Triplet {
                    src_a: i.min(j),
                    src_b: i.max(j),
                    dst: int(3)?,
                },
                bits: num(4)?,
                offset,
            });
        }
    }
    Ok(sched)
}

pub fn read_schedule_dump<R: Read>(r: R, n: usize, tau: f64) -> Result<Schedule, DumpError> {
    let mut text = String::new();
    for line in BufReader::new(r).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_schedule_dump(&text, n, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CodeParams;
    use crate::combinatorics::build_triplets;
    use crate::schedule::{run_step, Capacity, NodeProgress};
    use std::collections::BTreeMap;

    #[test]
    fn engine_schedule_round_trips() {
        let ts = build_triplets(&CodeParams::new(7, 3, 8).unwrap());
        let caps = vec![
            Capacity {
                upload: 7.5,
                download: 13.25
            };
            8
        ];
        let mut p = NodeProgress::new(7);
        let mut sched = Schedule::new(7, 1.0);
        for _ in 0..3 {
            let flows: BTreeMap<usize, f64> = [(1, 1.0 / 3.0), (2, 2.5), (4, 0.1)].into();
            sched.steps.push(run_step(&mut p, ts.all(), &flows, &caps));
        }
        let mut buf = Vec::new();
        write_schedule_dump(&sched, &mut buf).unwrap();
        let back = read_schedule_dump(buf.as_slice(), 7, 1.0).unwrap();
        assert_eq!(back, sched);
    }

    #[test]
    fn implicit_offsets_and_errors() {
        let s = parse_schedule_dump("# c\n\n0,0,1,3\n2,1,6,7,1.5\n", 7, 1.0).unwrap();
        assert_eq!(s.steps.len(), 3);
        assert_eq!(s.steps[0].source_flows[0].offset, None);
        assert_eq!(s.steps[2].triplet_flows[0].triplet, Triplet::new(1, 6, 7));
        assert!(s.steps[1].source_flows.is_empty());

        match parse_schedule_dump("0,0,1,3\n0,1,2\n", 7, 1.0) {
            Err(DumpError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_schedule_dump("0,0,1,-3\n", 7, 1.0).is_err());
        assert!(parse_schedule_dump("0,1,2,3,x\n", 7, 1.0).is_err());
    }
}
