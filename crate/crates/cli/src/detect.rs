use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use qburst::detect::{detect, error_counts, Detection, DetectorConfig, TauSetting, ThresholdFit};
use qburst::qob::read_outcomes_auto;
use qburst::{Classification, EventRecord, OutcomeSeries};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::failure::{io_at, Failure, Outcome};
use crate::manifest::{beside, RunManifest};
use crate::table::{row, section, Summary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauArg {
    Auto,
    /// Decay constant in cycles.
    Fixed(f64),
}

impl std::fmt::Display for TauArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(t) => write!(f, "{t}"),
        }
    }
}

fn parse_tau(s: &str) -> Result<TauArg, String> {
    if s == "auto" {
        return Ok(TauArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(t) if t.is_finite() && t > 0.0 => Ok(TauArg::Fixed(t)),
        _ => Err(format!("expected `auto` or a positive number of cycles, got `{s}`")),
    }
}

#[derive(Debug, clap::Args)]
pub struct DetectArgs {
    /// QOB input, text or binary.
    #[arg(long = "in-path", visible_alias = "input")]
    pub in_path: PathBuf,
    /// Minimum number of simultaneously erring qubits.
    #[arg(long = "nth", default_value_t = 3)]
    pub n_th: u32,
    /// Template decay constant in cycles, or `auto` to pick the best-separating one.
    #[arg(long, default_value = "auto", value_parser = parse_tau)]
    pub tau: TauArg,
    /// Flag kept events with long recovery using a 2 ms template.
    #[arg(long)]
    pub second_pass: bool,
    /// Events CSV.
    #[arg(long)]
    pub events_out: PathBuf,
    /// Threshold-fit JSON.
    #[arg(long)]
    pub fit_out: PathBuf,
    /// Also write rejected candidates to the events CSV.
    #[arg(long)]
    pub include_rejected: bool,
}

impl DetectArgs {
    fn argv(&self) -> Vec<String> {
        let mut v = vec![
            "--in-path".into(),
            self.in_path.display().to_string(),
            "--nth".into(),
            self.n_th.to_string(),
            "--tau".into(),
            self.tau.to_string(),
            "--events-out".into(),
            self.events_out.display().to_string(),
            "--fit-out".into(),
            self.fit_out.display().to_string(),
        ];
        if self.second_pass {
            v.push("--second-pass".into());
        }
        if self.include_rejected {
            v.push("--include-rejected".into());
        }
        v
    }
}

/// One row of the events CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub t0_cycle: usize,
    pub t0_s: f64,
    pub peak_n: u32,
    pub core_start: usize,
    pub core_end: usize,
    pub window_start: usize,
    pub window_end: usize,
    pub mf_peak: f64,
    pub classification: Classification,
    pub baseline_pre: f64,
    pub boundary_clipped: bool,
}

impl EventRow {
    fn new(e: &EventRecord, t_cycle_s: f64) -> Self {
        Self {
            t0_cycle: e.t0_cycle,
            t0_s: e.t0_cycle as f64 * t_cycle_s,
            peak_n: e.peak_n,
            core_start: e.core_start,
            core_end: e.core_end,
            window_start: e.window.0,
            window_end: e.window.1,
            mf_peak: e.mf_peak,
            classification: e.classification,
            baseline_pre: e.baseline_pre,
            boundary_clipped: e.boundary_clipped,
        }
    }
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    n_th: u32,
    tau_cycles: f64,
    tau_auto: bool,
    n_qubits: usize,
    n_cycles: usize,
    t_cycle_s: f64,
    duration_s: f64,
    n_candidates: usize,
    n_kept: usize,
    n_long_recovery: usize,
    n_rejected: usize,
    discarded_high_baseline: usize,
    fit: &'a ThresholdFit,
    second_pass_fit: Option<&'a ThresholdFit>,
}

pub fn read_series(path: &Path) -> Outcome<OutcomeSeries> {
    let file = io_at(File::open(path), path)?;
    read_outcomes_auto(BufReader::new(file)).map_err(|e| Failure::from(e).context(path.display()))
}

pub fn run(a: &DetectArgs) -> Outcome<(RunManifest, Summary)> {
    let series = read_series(&a.in_path)?;
    let tau = match a.tau {
        TauArg::Auto => TauSetting::auto(),
        TauArg::Fixed(t) => TauSetting::Fixed(t),
    };
    let cfg = DetectorConfig::new(a.n_th, tau).with_second_pass(a.second_pass);
    let det = match detect(&series, &cfg) {
        Ok(d) => d,
        Err(qburst::Error::Degenerate(msg)) => {
            write_diagnostics(&series, a, &msg)?;
            return Err(Failure::degenerate(anyhow::anyhow!(
                "degenerate threshold fit: {msg} (diagnostics in {})",
                a.fit_out.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };

    let tc = series.config.t_cycle_s();
    write_events(&det, tc, a.include_rejected, &a.events_out)?;
    let count = |c: Classification| det.count(|x| x == c);
    let report = FitReport {
        n_th: a.n_th,
        tau_cycles: det.tau_cycles,
        tau_auto: a.tau == TauArg::Auto,
        n_qubits: series.n_qubits(),
        n_cycles: series.n_cycles(),
        t_cycle_s: tc,
        duration_s: series.duration_s(),
        n_candidates: det.n_candidates,
        n_kept: count(Classification::Kept) + count(Classification::KeptLongRecovery),
        n_long_recovery: count(Classification::KeptLongRecovery),
        n_rejected: count(Classification::Rejected),
        discarded_high_baseline: det.discarded,
        fit: &det.fit,
        second_pass_fit: det.second_fit.as_ref(),
    };
    write_json(&a.fit_out, &report)?;

    let params = json!({
        "n_th": a.n_th,
        "tau": a.tau.to_string(),
        "tau_cycles": det.tau_cycles,
        "second_pass": a.second_pass,
        "include_rejected": a.include_rejected,
    });
    let mut m = RunManifest::new("detect", a.argv(), None, params);
    m.input(&a.in_path)?;
    m.output(&a.events_out)?;
    m.output(&a.fit_out)?;
    m.write(&beside(&a.events_out))?;

    let mut summary = vec![
        section("detection"),
        row("input", a.in_path.display()),
        row("cycles", series.n_cycles()),
        row("duration (s)", format!("{:.3}", series.duration_s())),
        row("n_th", a.n_th),
        row("tau (cycles)", format!("{:.3}", det.tau_cycles)),
        row("threshold", format!("{:.4}", det.fit.threshold)),
        row("separation score", format!("{:.3}", det.fit.separation_score)),
        row("candidates", det.n_candidates),
        row("kept", report.n_kept),
        row("rejected", report.n_rejected),
    ];
    if a.second_pass {
        summary.push(row("long recovery", report.n_long_recovery));
        summary.push(row("dropped (high baseline)", det.discarded));
    }
    Ok((m, summary))
}

fn write_events(det: &Detection, t_cycle_s: f64, include_rejected: bool, path: &Path) -> Outcome<()> {
    let file = io_at(File::create(path), path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Failure::io(anyhow::Error::new(e).context(path.display().to_string()));
    let rows = det
        .events
        .iter()
        .filter(|e| include_rejected || e.classification.is_kept())
        .map(|e| EventRow::new(e, t_cycle_s));
    let mut any = false;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
        any = true;
    }
    if !any {
        // csv writes headers lazily; an empty table still gets them
        w.write_record(EVENT_COLUMNS).map_err(csv_err)?;
    }
    io_at(w.flush(), path)
}

pub const EVENT_COLUMNS: [&str; 11] = [
    "t0_cycle",
    "t0_s",
    "peak_n",
    "core_start",
    "core_end",
    "window_start",
    "window_end",
    "mf_peak",
    "classification",
    "baseline_pre",
    "boundary_clipped",
];

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome<()> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    io_at(fs::write(path, s), path)
}

fn write_diagnostics(series: &OutcomeSeries, a: &DetectArgs, msg: &str) -> Outcome<()> {
    let n = error_counts(series);
    let mut histogram = vec![0u64; series.n_qubits() + 1];
    for &k in &n {
        histogram[k as usize] += 1;
    }
    let diag = json!({
        "error": format!("degenerate threshold fit: {msg}"),
        "n_th": a.n_th,
        "tau": a.tau.to_string(),
        "n_qubits": series.n_qubits(),
        "n_cycles": series.n_cycles(),
        "simultaneous_error_histogram": histogram,
    });
    write_json(&a.fit_out, &diag)?;
    let mut w = io_at(File::create(&a.events_out), &a.events_out)?;
    io_at(writeln!(w, "{}", EVENT_COLUMNS.join(",")), &a.events_out)
}
