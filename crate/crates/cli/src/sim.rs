use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use qburst::qob::{write_outcomes, QobFormat};
use qburst::sim::{simulate, GroundTruthLog, Scenario};
use serde_json::json;

use crate::failure::{io_at, Failure, Outcome};
use crate::manifest::{beside, with_suffix, RunManifest};
use crate::table::{row, section, Summary};

#[derive(Debug, clap::Args)]
pub struct SimArgs {
    /// Scenario file of `key=value` lines.
    #[arg(long = "scenario-path", visible_alias = "scenario")]
    pub scenario_path: PathBuf,
    /// Simulated acquisition time, seconds.
    #[arg(long = "duration-s", visible_alias = "duration")]
    pub duration_s: f64,
    /// Seed for every random draw of the run.
    #[arg(long)]
    pub seed: u64,
    /// QOB output; the ground truth goes to `<out>.truth.csv`.
    #[arg(long = "out-path", visible_alias = "out")]
    pub out_path: PathBuf,
    #[arg(long, default_value = "binary", value_parser = parse_format)]
    pub format: QobFormat,
}

pub fn parse_format(s: &str) -> Result<QobFormat, String> {
    s.parse().map_err(|e: qburst::Error| e.to_string())
}

fn format_name(f: QobFormat) -> &'static str {
    match f {
        QobFormat::Text => "text",
        QobFormat::Binary => "binary",
    }
}

impl SimArgs {
    fn argv(&self) -> Vec<String> {
        vec![
            "--scenario-path".into(),
            self.scenario_path.display().to_string(),
            "--duration-s".into(),
            self.duration_s.to_string(),
            "--seed".into(),
            self.seed.to_string(),
            "--out-path".into(),
            self.out_path.display().to_string(),
            "--format".into(),
            format_name(self.format).into(),
        ]
    }
}

pub fn run(a: &SimArgs) -> Outcome<(RunManifest, Summary)> {
    let text = io_at(fs::read_to_string(&a.scenario_path), &a.scenario_path)?;
    let mut scenario = Scenario::parse(&text).map_err(|e| Failure::from(e).context(a.scenario_path.display()))?;
    scenario.seed = a.seed;
    let (series, log) = simulate(&scenario, a.duration_s)?;

    let file = io_at(File::create(&a.out_path), &a.out_path)?;
    let mut w = BufWriter::new(file);
    write_outcomes(&series, a.format, &mut w)?;
    io_at(w.flush(), &a.out_path)?;
    let truth_path = with_suffix(&a.out_path, ".truth.csv");
    write_truth(&log, &truth_path)?;
    let trace_path = with_suffix(&a.out_path, ".trace.csv");
    if let Some(trace) = log.trace_csv() {
        io_at(fs::write(&trace_path, trace), &trace_path)?;
    }

    let params = json!({
        "duration_s": a.duration_s,
        "format": format_name(a.format),
        "n_cycles": series.n_cycles(),
        "scenario": scenario,
    });
    let mut m = RunManifest::new("sim", a.argv(), Some(a.seed), params);
    m.input(&a.scenario_path)?;
    m.output(&a.out_path)?;
    m.output(&truth_path)?;
    if !log.trace.is_empty() {
        m.output(&trace_path)?;
    }
    m.write(&beside(&a.out_path))?;

    let n_long = log.bursts.iter().filter(|b| b.long).count();
    let summary = vec![
        section("simulation"),
        row("device", &scenario.config.device_label),
        row("qubits", scenario.config.n_qubits),
        row("cycle (µs)", scenario.config.t_cycle_us),
        row("cycles", series.n_cycles()),
        row("duration (s)", format!("{:.3}", series.duration_s())),
        row("bursts injected", log.bursts.len()),
        row("long-recovery bursts", n_long),
        row("seed", a.seed),
        row("output", a.out_path.display()),
    ];
    Ok((m, summary))
}

fn write_truth(log: &GroundTruthLog, path: &std::path::Path) -> Outcome<()> {
    let file = io_at(File::create(path), path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Failure::io(anyhow::Error::new(e).context(path.display().to_string()));
    w.write_record(["cycle", "time_s", "x_inject", "long"]).map_err(csv_err)?;
    for b in &log.bursts {
        w.write_record([
            b.cycle.to_string(),
            b.time_s.to_string(),
            b.x_inject.to_string(),
            b.long.to_string(),
        ])
        .map_err(csv_err)?;
    }
    io_at(w.flush(), path)
}
