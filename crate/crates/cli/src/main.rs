//! `longjump <subcommand> [key=value ...]`: seeded replica experiments with CSV tables and
//! JSON manifests.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use longjump::Error;
use serde_json::json;

use crate::commands::{Table, COMMANDS};
use crate::config::{ExperimentConfig, RawConfig, UsageError, KEYS};

const PASS: u8 = 0;
const FAIL: u8 = 1;
const USAGE: u8 = 2;
const RESOURCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "longjump",
    version,
    about = "Tagged particle in the asymmetric exclusion process with long jumps",
    after_help = after_help()
)]
struct Cli {
    /// One of: constants, simulate, lln, clt, occupation, rwalk, oracle, freecheck.
    subcommand: String,
    /// Overrides as key=value; applied after --config.
    overrides: Vec<String>,
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

fn after_help() -> String {
    let mut s = String::from("Subcommands:\n");
    for (c, h) in COMMANDS {
        s.push_str(&format!("  {c:<11} {h}\n"));
    }
    s.push_str("\nConfig keys (default):\n");
    for (k, v, h) in KEYS {
        s.push_str(&format!("  {k:<10} {v:<18} {h}\n"));
    }
    s.push_str("\nExit codes: 0 pass, 1 check failed, 2 usage, 3 resource.\n");
    s
}

fn build_config(cli: &Cli) -> Result<RawConfig, UsageError> {
    if !COMMANDS.iter().any(|(c, _)| *c == cli.subcommand) {
        return Err(UsageError(format!("unknown subcommand {:?}", cli.subcommand)));
    }
    let mut raw = RawConfig::defaults();
    if let Some(p) = &cli.config {
        let text = fs::read_to_string(p).map_err(|e| UsageError(format!("--config {}: {e}", p.display())))?;
        raw.merge_text(&text)?;
    }
    for o in &cli.overrides {
        raw.assign(o)?;
    }
    if let Some(v) = cli.seed {
        raw.set("seed", &v.to_string())?;
    }
    if let Some(v) = cli.replicas {
        raw.set("replicas", &v.to_string())?;
    }
    if let Some(v) = cli.threads {
        raw.set("threads", &v.to_string())?;
    }
    if let Some(v) = &cli.out {
        raw.set("out", v)?;
    }
    Ok(raw)
}

fn write_csv(path: &Path, t: &Table) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    w.flush()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let raw = match build_config(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("usage error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let cfg = match ExperimentConfig::from_raw(&raw) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("usage error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let warnings = cfg.warnings(&cli.subcommand);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let outcome = match commands::run(&cli.subcommand, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(match e {
                Error::Resource(_) | Error::Io(_) => RESOURCE,
                Error::Tolerance { .. } => FAIL,
                _ => USAGE,
            });
        }
    };
    let dir = Path::new(&cfg.out);
    let csv_path = dir.join(format!("{}.csv", cli.subcommand));
    let manifest_path = dir.join(format!("{}.json", cli.subcommand));
    let cfg_path = dir.join(format!("{}.cfg", cli.subcommand));
    let manifest = json!({
        "command": cli.subcommand,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": raw.values,
        "rerun": format!(
            "longjump {} {}",
            cli.subcommand,
            raw.values.iter().map(|(k, v)| format!("'{k}={v}'")).collect::<Vec<_>>().join(" ")
        ),
        "warnings": warnings,
        "table": csv_path.file_name().unwrap().to_string_lossy(),
        "config_file": cfg_path.file_name().unwrap().to_string_lossy(),
        "passed": outcome.passed,
        "result": outcome.result,
    });
    let written = fs::create_dir_all(dir)
        .and_then(|_| write_csv(&csv_path, &outcome.table))
        .and_then(|_| fs::write(&cfg_path, raw.to_text()))
        .and_then(|_| fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap() + "\n"));
    if let Err(e) = written {
        eprintln!("error: writing outputs to {}: {e}", dir.display());
        return ExitCode::from(RESOURCE);
    }
    println!(
        "{} {}: {} ({} rows)",
        cli.subcommand,
        if outcome.passed { "PASS" } else { "FAIL" },
        manifest_path.display(),
        outcome.table.rows.len()
    );
    ExitCode::from(if outcome.passed { PASS } else { FAIL })
}
