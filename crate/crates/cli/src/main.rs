//! `tchange`: runs the laboratory's experiments from TOML configs.
//!
//! Exit status: 0 on pass, 1 when a bound fails (the certificate is still
//! written), 2 on a config error, 3 on an I/O error.

mod certificate;
mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use certificate::{Certificate, Metric, Provenance};
use config::{Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "tchange", version, about = "Time changes of the cat-map suspension flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List the experiments.
    List,
}

fn list() -> String {
    let mut s = String::new();
    for e in Experiment::ALL {
        s.push_str(&format!("{:<11} {}\n{:<11} fields: {}\n", e.name(), e.description(), "", e.fields()));
    }
    s
}

fn write_outputs(dir: &Path, csv: &str, cert: &Certificate) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("data.csv"), csv)?;
    fs::write(dir.join("certificate.json"), cert.to_json())
}

fn run(path: &Path, seed: Option<u64>, out: Option<PathBuf>, tol: Option<f64>) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(3);
        }
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid config {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    if let Some(t) = tol {
        cfg.tol = t;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: invalid config: {e}");
        return ExitCode::from(2);
    }
    let provenance =
        Provenance { config_hash: cfg.hash(), seed: cfg.seed, version: env!("CARGO_PKG_VERSION").to_string() };
    let (cert, csv) = match experiments::run(&cfg) {
        Ok(o) => (Certificate::new(cfg.experiment.name(), o.metrics, provenance), o.csv),
        Err(e) => {
            eprintln!("error: numerical failure: {e}");
            (
                Certificate::new(cfg.experiment.name(), vec![Metric::holds("completed", false)], provenance),
                String::new(),
            )
        }
    };
    if let Err(e) = write_outputs(&cfg.out, &csv, &cert) {
        eprintln!("error: cannot write to {}: {e}", cfg.out.display());
        return ExitCode::from(3);
    }
    for m in &cert.metrics {
        let rel = match m.relation {
            certificate::Relation::AtMost => "<=",
            certificate::Relation::AtLeast => ">=",
        };
        println!("{} {} = {} {rel} {}", if m.satisfied { "ok  " } else { "FAIL" }, m.name, m.value, m.bound);
    }
    println!("{}: {}", cert.experiment, if cert.pass { "pass" } else { "fail" });
    if cert.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", list());
            ExitCode::SUCCESS
        }
        Command::Run { config, seed, out, tol } => run(&config, seed, out, tol),
    }
}
