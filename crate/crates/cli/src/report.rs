use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use m3s_core::metrics::MetricReport;

use crate::Cli;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metric JSON files written by `evaluate`, one per seed.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub const COLUMNS: [&str; 9] = ["ACC", "P", "R", "S", "F1", "wP", "wR", "wS", "wF1"];

pub fn row(r: &MetricReport) -> [f64; 9] {
    let w = &r.weighted;
    [
        r.accuracy,
        r.precision,
        r.recall,
        r.specificity,
        r.f1,
        w.precision,
        w.recall,
        w.specificity,
        w.f1,
    ]
}

pub fn run(cli: &Cli, args: &ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &args.reports {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let r: MetricReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        rows.push(row(&r));
    }
    if rows.is_empty() {
        bail!("no reports given");
    }
    let mut csv = String::from("metric,mean,std,n\n");
    let mut table = format!("{:<6} {:>8} {:>8}\n", "", "mean", "std");
    for (k, name) in COLUMNS.iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let (m, s) = mean_std(&values);
        writeln!(csv, "{name},{m},{s},{}", values.len())?;
        writeln!(table, "{name:<6} {m:>8.4} {s:>8.4}")?;
    }
    print!("{table}");
    if let Some(out) = &cli.out {
        std::fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
