//! Argument parsing and the process entry point.

use std::ffi::OsString;
use std::io::Write;

use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};

use crate::commands::{emit, render, run};
use crate::config::{command_params, ExperimentConfig, COMMANDS, ENV_PREFIX};
use crate::error::{exit, CliError};
use crate::output::RunRecord;

const SHARED: [(&str, &str); 3] = [
    ("seed", "master seed (default 0)"),
    ("out", "output file, written atomically; stdout when absent"),
    ("format", "json or csv (default: from the output extension, else json)"),
];

fn leaf(name: &'static str, about: &'static str, full: &str) -> Command {
    let mut cmd = Command::new(name).about(about);
    let params = command_params(full).expect("table covers every command");
    for p in params {
        let help = match p.default {
            Some(d) => format!("{} [default: {d}]", p.help),
            None => p.help.to_string(),
        };
        cmd = cmd.arg(Arg::new(p.key).long(p.key).value_name("VALUE").help(help));
    }
    for (key, help) in SHARED {
        cmd = cmd.arg(Arg::new(key).long(key).value_name("VALUE").help(help));
    }
    cmd
}

pub fn command() -> Command {
    Command::new("urtlab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Return exponents, growth and mass-transport audits for random subtrees of regular trees")
        .subcommand_required(true)
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .help("cap on worker threads; results do not depend on it"),
        )
        .subcommand(leaf("rate-fn", "tabulate phi, I and phi'' on a grid", "rate-fn"))
        .subcommand(leaf("ldp-check", "compare kernel tail mass with the rate function", "ldp-check"))
        .subcommand(
            Command::new("walk")
                .about("distance law of the lazy walk")
                .subcommand_required(true)
                .subcommand(leaf("kernel", "log q_n(r) for all n, r", "walk kernel"))
                .subcommand(leaf("series", "log return probabilities to a profile", "walk series")),
        )
        .subcommand(leaf("exponent", "estimate the lazy return exponent of a profile", "exponent"))
        .subcommand(leaf("cogrowth", "exponent from growth, or growth from exponent", "cogrowth"))
        .subcommand(leaf("percolate", "sample Bernoulli clusters", "percolate"))
        .subcommand(leaf("two-three-audit", "2-3 inequalities over sampled clusters", "two-three-audit"))
        .subcommand(leaf("mtp-audit", "mass-transport means of f1 and f2", "mtp-audit"))
        .subcommand(leaf("spine", "spine and decorations of a window", "spine"))
        .subcommand(leaf("growth", "growth estimates of a profile", "growth"))
        .subcommand(leaf("verify", "run the acceptance suite", "verify"))
        .subcommand(
            Command::new("run")
                .about("run a configuration file")
                .arg(Arg::new("config").long("config").value_name("FILE").required(true).help("key = value file")),
        )
}

/// Flags given explicitly on the command line, in order.
fn explicit(m: &ArgMatches) -> Vec<(String, String)> {
    m.ids()
        .filter(|id| id.as_str() != "threads" && m.value_source(id.as_str()) == Some(ValueSource::CommandLine))
        .filter_map(|id| m.get_one::<String>(id.as_str()).map(|v| (id.to_string(), v.clone())))
        .collect()
}

/// Build the resolved configuration: file, then environment, then flags.
pub fn configure<I>(matches: &ArgMatches, env: I) -> Result<ExperimentConfig, CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let (mut config, flags) = match (name, sub.subcommand()) {
        ("run", _) => {
            let path = sub.get_one::<String>("config").expect("required");
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("cannot read config {path}: {e}")))?;
            (ExperimentConfig::parse(&text)?, Vec::new())
        }
        ("walk", Some((inner, m))) => (ExperimentConfig::new(&format!("walk {inner}"))?, explicit(m)),
        (other, _) => (ExperimentConfig::new(other)?, explicit(sub)),
    };
    config.apply_env(env)?;
    for (k, v) in flags {
        config.set(&k, &v)?;
    }
    config.resolve()
}

fn threads(matches: &ArgMatches) -> Result<Option<usize>, CliError> {
    let raw =
        matches.get_one::<String>("threads").cloned().or_else(|| std::env::var(format!("{ENV_PREFIX}THREADS")).ok());
    raw.map(|s| match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(CliError::Validation(format!("threads must be a positive integer, got `{s}`"))),
    })
    .transpose()
}

fn execute(matches: &ArgMatches) -> Result<RunRecord, CliError> {
    let config = configure(matches, std::env::vars())?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads(matches)? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| run(&config))
}

/// Parse `args`, run, write outputs and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { 0 };
        }
    };
    let record = match execute(&matches) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let written = match emit(&record) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if !written {
        match render(&record, false) {
            Ok(bytes) => {
                let _ = std::io::stdout().write_all(&bytes);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return e.exit_code();
            }
        }
    }
    report(&record, written)
}

fn report(record: &RunRecord, written: bool) -> i32 {
    for c in &record.checks {
        eprintln!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(path) = record.config.out.as_ref().filter(|_| written) {
        eprintln!("wrote {}", path.display());
    }
    if record.config.command == "verify" && !record.all_passed() {
        let failed: Vec<&str> = record.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        if written {
            // the record went to a file; keep the failure list machine-readable on stdout
            println!("{}", serde_json::json!({ "failures": failed, "results": record.results["failures"] }));
        }
        return exit::VERIFY_FAILED;
    }
    0
}

/// Every command name, for documentation and tests.
pub fn command_names() -> &'static [&'static str] {
    &COMMANDS
}
