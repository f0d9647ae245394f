use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use qburst::detect::error_counts;
use qburst::stats::{
    average_events, bootstrap_recovery_time, estimate_rate, normalize_rate, AveragedTrace, RecoveryCriterion, Window,
};
use qburst::{Classification, EventRecord, RateEstimate};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::detect::{read_series, write_json};
use crate::failure::{io_at, Failure, Outcome};
use crate::manifest::{with_suffix, RunManifest};
use crate::table::{row, section, Summary};

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// Events CSV written by `detect`.
    #[arg(long = "events-path", visible_alias = "events")]
    pub events_path: PathBuf,
    /// Acquisition time the events were taken over, seconds.
    #[arg(long = "duration-s", visible_alias = "duration")]
    pub duration_s: f64,
    /// Chip area for the normalized rate, cm².
    #[arg(long = "area-cm2", visible_alias = "area")]
    pub area_cm2: f64,
    /// Thresholds for the rate table: `a..b` (inclusive) or a comma list.
    /// Defaults to the range of peak counts among kept events.
    #[arg(long = "nth-sweep", value_parser = parse_sweep)]
    pub nth_sweep: Option<Sweep>,
    /// Prefix of every output file.
    #[arg(long = "out-prefix")]
    pub out_prefix: PathBuf,
    /// QOB file the events came from; enables the averaged trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Averaging window before the event origin, ms.
    #[arg(long, default_value_t = 2.0)]
    pub pre_ms: f64,
    /// Averaging window after the event origin, ms.
    #[arg(long, default_value_t = 15.0)]
    pub post_ms: f64,
    /// Bootstrap resamples for the recovery-time error.
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    /// Seed for the bootstrap.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep(pub Vec<u32>);

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let bad = || format!("expected `a..b` or a comma list of thresholds, got `{s}`");
    let v: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if v.is_empty() || v.contains(&0) {
        return Err(format!("thresholds must be at least 1, got `{s}`"));
    }
    Ok(Sweep(v))
}

impl std::fmt::Display for Sweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl ReportArgs {
    fn argv(&self) -> Vec<String> {
        let mut v = vec![
            "--events-path".into(),
            self.events_path.display().to_string(),
            "--duration-s".into(),
            self.duration_s.to_string(),
            "--area-cm2".into(),
            self.area_cm2.to_string(),
            "--out-prefix".into(),
            self.out_prefix.display().to_string(),
        ];
        if let Some(s) = &self.nth_sweep {
            v.extend(["--nth-sweep".into(), s.to_string()]);
        }
        if let Some(t) = &self.trace {
            v.extend([
                "--trace".into(),
                t.display().to_string(),
                "--pre-ms".into(),
                self.pre_ms.to_string(),
                "--post-ms".into(),
                self.post_ms.to_string(),
                "--bootstrap".into(),
                self.bootstrap.to_string(),
                "--seed".into(),
                self.seed.to_string(),
            ]);
        }
        v
    }
}

/// Columns the report needs; any others are ignored.
const REQUIRED: [&str; 4] = ["t0_cycle", "t0_s", "peak_n", "classification"];

#[derive(Debug, Deserialize)]
struct Row {
    t0_cycle: usize,
    t0_s: f64,
    peak_n: u32,
    classification: Classification,
}

fn read_events(path: &Path) -> Outcome<Vec<Row>> {
    let file = io_at(File::open(path), path)?;
    let mut r = csv::Reader::from_reader(file);
    let parse = |e: csv::Error| {
        let code = if e.is_io_error() { Failure::io } else { Failure::usage };
        code(anyhow::Error::new(e).context(path.display().to_string()))
    };
    let headers = r.headers().map_err(parse)?.clone();
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|c| !headers.iter().any(|h| h == *c)).collect();
    if !missing.is_empty() {
        return Err(Failure::usage(anyhow::anyhow!(
            "{}: missing column(s) {}",
            path.display(),
            missing.join(", ")
        )));
    }
    r.deserialize().collect::<Result<Vec<Row>, _>>().map_err(parse)
}

#[derive(Debug, Serialize)]
struct RateRow {
    n_th: u32,
    n_events: u64,
    rate_per_s: f64,
    stderr_per_s: f64,
    normalized_rate: f64,
    normalized_stderr: f64,
}

#[derive(Debug, Serialize)]
struct Recovery {
    t_rec_s: f64,
    stderr_s: f64,
    resamples_used: usize,
    n_events_averaged: usize,
    baseline: f64,
}

#[derive(Debug, Serialize)]
struct ReportSummary {
    duration_s: f64,
    area_cm2: f64,
    n_events: u64,
    n_long_recovery: usize,
    rate_per_s: f64,
    stderr_per_s: f64,
    /// Events per cm² per minute.
    normalized_rate: f64,
    normalized_stderr: f64,
    rate_vs_nth: Vec<RateRow>,
    recovery: Option<Recovery>,
    recovery_note: Option<String>,
}

fn rate_row(n_th: u32, n: u64, a: &ReportArgs) -> Outcome<RateRow> {
    let est = estimate_rate(n, a.duration_s)?;
    Ok(RateRow {
        n_th,
        n_events: n,
        rate_per_s: est.rate,
        stderr_per_s: est.stderr,
        normalized_rate: normalize_rate(&est, a.area_cm2)?,
        normalized_stderr: normalize_rate(&RateEstimate { rate: est.stderr, ..est }, a.area_cm2)?,
    })
}

pub fn run(a: &ReportArgs) -> Outcome<(RunManifest, Summary)> {
    let mut kept: Vec<Row> = read_events(&a.events_path)?
        .into_iter()
        .filter(|r| r.classification.is_kept())
        .collect();
    kept.sort_by(|x, y| x.t0_s.total_cmp(&y.t0_s));
    let overall = rate_row(0, kept.len() as u64, a)?;
    let sweep = match &a.nth_sweep {
        Some(s) => s.0.clone(),
        None => match (kept.iter().map(|r| r.peak_n).min(), kept.iter().map(|r| r.peak_n).max()) {
            (Some(lo), Some(hi)) => (lo..=hi).collect(),
            _ => Vec::new(),
        },
    };
    let rates = sweep
        .iter()
        .map(|&k| rate_row(k, kept.iter().filter(|r| r.peak_n >= k).count() as u64, a))
        .collect::<Outcome<Vec<_>>>()?;

    let cumulative_path = with_suffix(&a.out_prefix, ".cumulative.csv");
    let mut cum = vec![("t_s".to_string(), "count".to_string())];
    if !kept.is_empty() {
        cum.push(("0".into(), "0".into()));
        cum.extend(kept.iter().enumerate().map(|(i, r)| (r.t0_s.to_string(), (i + 1).to_string())));
        cum.push((a.duration_s.to_string(), kept.len().to_string()));
    }
    write_pairs(&cumulative_path, &cum)?;
    let rates_path = with_suffix(&a.out_prefix, ".rate_vs_nth.csv");
    write_rows(&rates_path, &rates, &["n_th", "n_events", "rate_per_s", "stderr_per_s", "normalized_rate", "normalized_stderr"])?;

    let mut outputs = vec![cumulative_path, rates_path];
    let mut recovery = None;
    let mut recovery_note = None;
    if let Some(trace_path) = &a.trace {
        let (trace, rec, note) = averaged_trace(trace_path, &kept, a)?;
        let path = with_suffix(&a.out_prefix, ".trace.csv");
        let mut rows = vec![("t_rel_s".to_string(), "mean_n".to_string())];
        if let Some(t) = &trace {
            rows.extend(t.t_rel.iter().zip(&t.mean_n).map(|(x, y)| (x.to_string(), y.to_string())));
        }
        write_pairs(&path, &rows)?;
        outputs.push(path);
        recovery = rec;
        recovery_note = note;
    }

    let summary_data = ReportSummary {
        duration_s: a.duration_s,
        area_cm2: a.area_cm2,
        n_events: overall.n_events,
        n_long_recovery: kept.iter().filter(|r| r.classification == Classification::KeptLongRecovery).count(),
        rate_per_s: overall.rate_per_s,
        stderr_per_s: overall.stderr_per_s,
        normalized_rate: overall.normalized_rate,
        normalized_stderr: overall.normalized_stderr,
        rate_vs_nth: rates,
        recovery,
        recovery_note,
    };
    let summary_path = with_suffix(&a.out_prefix, ".summary.json");
    write_json(&summary_path, &summary_data)?;
    outputs.push(summary_path);

    let params = json!({
        "duration_s": a.duration_s,
        "area_cm2": a.area_cm2,
        "nth_sweep": sweep,
        "pre_ms": a.pre_ms,
        "post_ms": a.post_ms,
        "bootstrap": a.bootstrap,
    });
    let seed = a.trace.as_ref().map(|_| a.seed);
    let mut m = RunManifest::new("report", a.argv(), seed, params);
    m.input(&a.events_path)?;
    if let Some(t) = &a.trace {
        m.input(t)?;
    }
    for p in &outputs {
        m.output(p)?;
    }
    m.write(&with_suffix(&a.out_prefix, ".manifest.json"))?;

    let s = &summary_data;
    let mut table = vec![
        section("rate"),
        row("kept events", s.n_events),
        row("long recovery", s.n_long_recovery),
        row("duration (s)", s.duration_s),
        row("rate (1/s)", format!("{:.5} ± {:.5}", s.rate_per_s, s.stderr_per_s)),
        row("mean interval (s)", if s.n_events > 0 { format!("{:.2}", 1.0 / s.rate_per_s) } else { "-".into() }),
        row("normalized (1/cm²/min)", format!("{:.3} ± {:.3}", s.normalized_rate, s.normalized_stderr)),
    ];
    if !s.rate_vs_nth.is_empty() {
        table.push(section("rate vs n_th"));
        for r in &s.rate_vs_nth {
            table.push(row(
                format!("n >= {}", r.n_th),
                format!("{:>6}  {:.5} ± {:.5} /s  {:.3} /cm²/min", r.n_events, r.rate_per_s, r.stderr_per_s, r.normalized_rate),
            ));
        }
    }
    if let Some(r) = &s.recovery {
        table.push(section("recovery"));
        table.push(row("events averaged", r.n_events_averaged));
        table.push(row("t_rec (ms)", format!("{:.3} ± {:.3}", r.t_rec_s * 1e3, r.stderr_s * 1e3)));
    } else if let Some(note) = &s.recovery_note {
        table.push(section("recovery"));
        table.push(row("t_rec", note));
    }
    Ok((m, table))
}

type TraceResult = (Option<AveragedTrace>, Option<Recovery>, Option<String>);

/// Averaged trace and recovery time. A trace that cannot be formed or does
/// not recover is reported as a note, not as a failure.
fn averaged_trace(path: &Path, kept: &[Row], a: &ReportArgs) -> Outcome<TraceResult> {
    if !(a.pre_ms > 0.0 && a.post_ms > 0.0) {
        return Err(Failure::usage(anyhow::anyhow!("--pre-ms and --post-ms must be positive")));
    }
    let series = read_series(path)?;
    let tc = series.config.t_cycle_s();
    let n = error_counts(&series);
    let w = Window {
        pre: (a.pre_ms * 1e-3 / tc).ceil() as usize,
        post: (a.post_ms * 1e-3 / tc).ceil() as usize,
    };
    let events: Vec<EventRecord> = kept
        .iter()
        .map(|r| {
            let mut e = EventRecord::candidate(r.t0_cycle, r.t0_cycle, r.peak_n, r.t0_cycle, 0.0);
            e.classification = r.classification;
            e
        })
        .collect();
    let trace = match average_events(&events, &n, w, tc) {
        Ok(t) => t,
        Err(e) => return Ok((None, None, Some(e.to_string()))),
    };
    match bootstrap_recovery_time(&events, &n, w, tc, RecoveryCriterion::default(), a.bootstrap, a.seed) {
        Ok(est) => {
            let rec = Recovery {
                t_rec_s: est.t_rec,
                stderr_s: est.stderr,
                resamples_used: est.resamples_used,
                n_events_averaged: trace.n_events,
                baseline: trace.baseline,
            };
            Ok((Some(trace), Some(rec), None))
        }
        Err(e) => Ok((Some(trace), None, Some(e.to_string()))),
    }
}

fn write_pairs(path: &Path, rows: &[(String, String)]) -> Outcome<()> {
    let file = io_at(File::create(path), path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for (x, y) in rows {
        w.write_record([x, y]).map_err(|e| Failure::io(anyhow::Error::new(e)))?;
    }
    io_at(w.flush(), path)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Outcome<()> {
    let file = io_at(File::create(path), path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    let err = |e: csv::Error| Failure::io(anyhow::Error::new(e).context(path.display().to_string()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    io_at(w.flush(), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps() {
        assert_eq!(parse_sweep("3..7"), Ok(Sweep(vec![3, 4, 5, 6, 7])));
        assert_eq!(parse_sweep("3..=4"), Ok(Sweep(vec![3, 4])));
        assert_eq!(parse_sweep("2, 5"), Ok(Sweep(vec![2, 5])));
        assert!(parse_sweep("5..3").is_err());
        assert!(parse_sweep("0..2").is_err());
        assert!(parse_sweep("x").is_err());
    }
}
