//! Force-torque log aggregation: per-channel mean and standard deviation
//! time series across repeated runs, aligned by step position.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use crate::csvio::fmt_f64;
use crate::{Error, Result};

pub const FT_LOG_HEADER: &str = "run,t,fx,fy,fz,tx,ty,tz";
pub const FT_STATS_HEADER: &str = "channel,t,mean,std";
pub const CHANNEL_NAMES: [&str; 6] = ["fx", "fy", "fz", "tx", "ty", "tz"];

/// One logged step of one run: six wrench channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FtLogRow {
    pub run: u64,
    pub t: u64,
    pub channels: [f64; 6],
}

/// Aggregated value of one channel at one aligned step.
#[derive(Debug, Clone, PartialEq)]
pub struct FtStatRow {
    pub channel: &'static str,
    pub t: u64,
    pub mean: f64,
    pub std: f64,
}

/// Parses a `run,t,fx,fy,fz,tx,ty,tz` log. Any malformed row fails with
/// its 1-based line number; timestamps must be non-decreasing within a run.
pub fn parse_ft_log<R: BufRead>(r: R, path: &Path) -> Result<Vec<FtLogRow>> {
    let mut rows = Vec::new();
    let mut last_t: BTreeMap<u64, u64> = BTreeMap::new();
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty log, expected a header".into(),
    })?;
    let header = header.map_err(|e| Error::io(path, e))?;
    if header.trim() != FT_LOG_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected header {FT_LOG_HEADER:?}, got {:?}", header.trim()),
        });
    }
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let bad = |what: &str, val: &str| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: format!("invalid {what} {val:?}"),
        };
        let run: u64 = fields[0].trim().parse().map_err(|_| bad("run id", fields[0]))?;
        let t: u64 = fields[1].trim().parse().map_err(|_| bad("timestamp", fields[1]))?;
        let mut channels = [0.0; 6];
        for (k, f) in fields[2..].iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| bad("channel value", f))?;
            if !v.is_finite() {
                return Err(bad("channel value", f));
            }
            channels[k] = v;
        }
        if let Some(&prev) = last_t.get(&run) {
            if t < prev {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("timestamp {t} decreases within run {run} (previous {prev})"),
                });
            }
        }
        last_t.insert(run, t);
        rows.push(FtLogRow { run, t, channels });
    }
    Ok(rows)
}

pub fn parse_ft_log_path(path: &Path) -> Result<Vec<FtLogRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ft_log(std::io::BufReader::new(file), path)
}

/// Per-channel mean and sample (n−1) standard deviation at each aligned
/// step, channel-major. Runs are truncated to the shortest; a single run
/// yields zero std everywhere plus a warning string.
pub fn analyze(rows: &[FtLogRow], n_runs: usize) -> Result<(Vec<FtStatRow>, Vec<String>)> {
    if n_runs == 0 {
        return Err(Error::Config("analyze-ft: runs must be >= 1".into()));
    }
    let mut by_run: BTreeMap<u64, Vec<&FtLogRow>> = BTreeMap::new();
    for row in rows {
        by_run.entry(row.run).or_default().push(row);
    }
    if by_run.len() != n_runs {
        return Err(Error::Config(format!(
            "log contains {} distinct runs but {n_runs} were requested",
            by_run.len()
        )));
    }
    let len = by_run.values().map(|v| v.len()).min().unwrap_or(0);
    if len == 0 {
        return Err(Error::Config("analyze-ft: a run has no rows".into()));
    }
    let mut warnings = Vec::new();
    if n_runs == 1 {
        warnings.push("single run: standard deviations are all zero".to_string());
    }
    let runs: Vec<&Vec<&FtLogRow>> = by_run.values().collect();
    let mut out = Vec::with_capacity(6 * len);
    for (c, name) in CHANNEL_NAMES.iter().enumerate() {
        for k in 0..len {
            let n = n_runs as f64;
            let mut sum = 0.0;
            for run in &runs {
                sum += run[k].channels[c];
            }
            let mean = sum / n;
            let std = if n_runs >= 2 {
                let mut ss = 0.0;
                for run in &runs {
                    let d = run[k].channels[c] - mean;
                    ss += d * d;
                }
                (ss / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            out.push(FtStatRow {
                channel: name,
                t: k as u64,
                mean,
                std,
            });
        }
    }
    Ok((out, warnings))
}

pub fn render_stats(stats: &[FtStatRow]) -> String {
    let mut out = String::from(FT_STATS_HEADER);
    out.push('\n');
    for r in stats {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.channel,
            r.t,
            fmt_f64(r.mean),
            fmt_f64(r.std)
        ));
    }
    out
}
