//! The `robsvm` command line: flat `key=value` configuration, one subcommand
//! per experiment, JSON-lines reports.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Arg, ArgMatches, Command};
use serde_json::json;

use commands::{execute, Report, COMMANDS};
use config::{RunConfig, KEYS};

pub fn build_cli() -> Command {
    let key_args: Vec<Arg> = KEYS
        .iter()
        .map(|(key, default, help)| {
            let help = if default.is_empty() {
                help.to_string()
            } else {
                format!("{help} [default: {default}]")
            };
            Arg::new(*key).long(*key).value_name("VALUE").help(help)
        })
        .collect();
    let config_arg = Arg::new("config")
        .long("config")
        .value_name("PATH")
        .help("key=value config file; flags override its values");
    Command::new("robsvm")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Robust support vector machines: training, equivalence checks and generalization experiments")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommands(COMMANDS.iter().map(|(name, about)| {
            Command::new(*name)
                .about(*about)
                .arg(config_arg.clone())
                .args(key_args.clone())
        }))
}

/// Defaults, then the config file, then explicit flags.
pub fn resolve_config(matches: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = matches.get_one::<String>("config") {
        for (k, v) in RunConfig::load_file(Path::new(path))? {
            cfg.set(&k, &v)?;
        }
    }
    for (key, _, _) in KEYS {
        if let Some(v) = matches.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn header(command: &str, cfg: &RunConfig) -> serde_json::Value {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "record": "header",
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.raw("seed"),
        "timestamp": timestamp,
        "config": cfg.values(),
    })
}

/// Runs one subcommand, writing its report to `out`. On failure an
/// `incomplete` error record closes the report and the error is returned.
pub fn run_command(command: &str, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let mut report = Report::new(out);
    report.emit(header(command, cfg))?;
    let result = execute(command, cfg, &mut report);
    if let Err(e) = &result {
        report.emit(json!({
            "record": "error",
            "incomplete": true,
            "message": format!("{e:#}"),
        }))?;
    }
    result
}

/// Entry point shared by the binary and the tests.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = build_cli().try_get_matches_from(args)?;
    let (command, sub) = matches.subcommand().context("missing subcommand")?;
    let cfg = resolve_config(sub)?;
    let out: Box<dyn Write> = match cfg.raw("output") {
        "-" => Box::new(io::stdout().lock()),
        path => Box::new(File::create(path).with_context(|| format!("creating report {path}"))?),
    };
    let mut out = BufWriter::new(out);
    let result = run_command(command, &cfg, &mut out);
    out.flush()?;
    result
}
