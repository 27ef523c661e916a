use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use driftsurf::harness::{run_experiment, write_outputs};
use driftsurf::probes::{self, ProbeReport};
use driftsurf::runspec::{parse_sweep, RunSpec};

#[derive(Parser)]
#[command(name = "driftsurf", about = "Prequential experiments for learning under concept drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm on one dataset and write records, summary and transitions.
    Run(RunSpec),
    /// Run the cartesian grid described by a key = value file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the diagnostic probes and print one row per measured quantity.
    Probe {
        #[arg(long, value_enum, default_value_t = ProbeKind::All)]
        which: ProbeKind,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ProbeKind {
    All,
    Suboptimality,
    Optimizer,
    Recovery,
    Stationarity,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn run(spec: &RunSpec) -> Result<()> {
    let cfg = spec.to_config()?;
    let result = run_experiment(&cfg).with_context(|| format!("running {}", cfg.dataset.name))?;
    write_outputs(&spec.out, &result).with_context(|| format!("writing {}", spec.out.display()))?;
    println!("dataset,algorithm,mean_misclassification");
    for row in &result.summary {
        println!("{},{},{:.4}", row.dataset, row.algorithm, row.mean_misclass_median);
    }
    Ok(())
}

fn probe(which: ProbeKind, trials: usize, seed: u64) -> Result<Vec<ProbeReport>> {
    let seeds: Vec<u64> = (0..trials as u64).map(|t| seed + t).collect();
    let want = |k| which == ProbeKind::All || which == k;
    let mut reports = Vec::new();
    if want(ProbeKind::Suboptimality) {
        reports.extend(probes::suboptimality_trend(&seeds, &[10, 20, 40], 1000)?);
    }
    if want(ProbeKind::Optimizer) {
        reports.extend(probes::strsaga_versus_sgd(&seeds)?);
    }
    if want(ProbeKind::Recovery) {
        reports.extend(probes::recovery_probe(trials, seed)?);
    }
    if want(ProbeKind::Stationarity) {
        reports.extend(probes::stationarity_probe(trials, seed)?);
    }
    Ok(reports)
}

fn render(reports: &[ProbeReport], format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(reports)?,
        Format::Csv => {
            let mut s = String::from("quantity,median,reference,pass,values\n");
            for r in reports {
                let values: Vec<String> = r.values.iter().map(|v| format!("{v:.6e}")).collect();
                s.push_str(&format!("{},{:.6e},\"{}\",{},{}\n", r.quantity, r.median, r.reference, r.pass, values.join(";")));
            }
            s
        }
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(spec) => run(&spec),
        Command::Sweep { config } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            for spec in parse_sweep(&text)? {
                println!("# {}", spec.out.display());
                run(&spec)?;
            }
            Ok(())
        }
        Command::Probe { which, trials, seed, format, out } => {
            let text = render(&probe(which, trials, seed)?, format)?;
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(())
        }
    }
}
