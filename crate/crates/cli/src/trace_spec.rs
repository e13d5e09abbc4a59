//! `--trace` values: `synth:q=0.8,up=20-200Kbps,down=x4,src=200Kbps`,
//! `csv:PATH` or `load:PATH`.

use std::path::PathBuf;
use std::str::FromStr;

use hsrc::sim::{AvailabilityModel, SynthSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum TraceArg {
    Synth(SynthSpec),
    Csv(PathBuf),
    Load(PathBuf),
}

/// `200Kbps`, `1.5Mbps`, `64bps`, `1Gbps` or a bare number of bits/s.
pub fn parse_rate(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, scale) = [("Gbps", 1e9), ("Mbps", 1e6), ("Kbps", 1e3), ("kbps", 1e3), ("bps", 1.0)]
        .iter()
        .find_map(|&(unit, scale)| s.strip_suffix(unit).map(|n| (n, scale)))
        .unwrap_or((s, 1.0));
    let v: f64 = num.trim().parse().map_err(|_| format!("bad rate {s:?}"))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(format!("rate must be non-negative, got {s:?}"));
    }
    Ok(v * scale)
}

fn parse_synth(body: &str) -> Result<SynthSpec, String> {
    let mut q = None;
    let mut windows = None;
    let mut up = (20e3, 200e3);
    let mut down = 4.0;
    let mut src = None;
    let mut churn = false;
    for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, val) = item.split_once('=').unwrap_or((item, ""));
        match key {
            "q" => {
                let v: f64 = val.parse().map_err(|_| format!("bad q {val:?}"))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("q must lie in [0, 1], got {v}"));
                }
                q = Some(v);
            }
            "windows" => {
                let (on, off) = val.split_once('/').ok_or("windows expects ON/OFF")?;
                let on: usize = on.parse().map_err(|_| format!("bad windows {val:?}"))?;
                let off: usize = off.parse().map_err(|_| format!("bad windows {val:?}"))?;
                if on + off == 0 {
                    return Err("windows needs a positive period".into());
                }
                windows = Some((on, off));
            }
            "up" => {
                // The unit may be given once, after the upper bound.
                let (lo, hi) = val.split_once('-').ok_or("up expects LO-HI")?;
                let unit: String = hi.chars().skip_while(|c| c.is_ascii_digit() || *c == '.').collect();
                let lo = parse_rate(&format!("{lo}{}", if lo.ends_with("bps") { "" } else { &unit }))?;
                let hi = parse_rate(hi)?;
                if hi < lo {
                    return Err(format!("upload range {val:?} is empty"));
                }
                up = (lo, hi);
            }
            "down" => {
                let m = val.strip_prefix('x').ok_or("down expects xMULT")?;
                down = m.parse().map_err(|_| format!("bad down multiplier {val:?}"))?;
                if !(down >= 0.0) {
                    return Err(format!("down multiplier must be non-negative, got {val:?}"));
                }
            }
            "src" => src = Some(parse_rate(val)?),
            "churn" => churn = true,
            _ => return Err(format!("unknown synth key {key:?}")),
        }
    }
    let model = match (q, windows) {
        (Some(_), Some(_)) => return Err("give either q or windows, not both".into()),
        (_, Some((on, off))) => AvailabilityModel::Windows { on, off },
        (q, None) => AvailabilityModel::Bernoulli { q: q.unwrap_or(1.0) },
    };
    Ok(SynthSpec {
        n: 0,
        steps: 0,
        tau: 0.0,
        model,
        up_bps: up,
        down_multiplier: down,
        source_up_bps: src.unwrap_or(up.1),
        source_churn: churn,
    })
}

impl FromStr for TraceArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "synth" => parse_synth(body).map(TraceArg::Synth),
            "csv" | "load" if body.is_empty() => Err(format!("{kind}: needs a path")),
            "csv" => Ok(TraceArg::Csv(body.into())),
            "load" => Ok(TraceArg::Load(body.into())),
            _ => Err(format!("expected synth:..., csv:PATH or load:PATH, got {s:?}")),
        }
    }
}
