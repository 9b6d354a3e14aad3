//! `layerfold`: command-line front end for the folding models.
//!
//! ```text
//!   layerfold <subcommand> [--config <file>] [--key value ...] --out <dir>
//! ```
//!
//! Configuration is a flat JSON object per subcommand; `--key value` flags
//! override file values. Outputs are deterministic CSVs plus a manifest.
//! Exit codes: 0 success, 1 solver failure, 2 invariant violation, 3
//! configuration error (nothing written).

mod config;
mod csv;
mod run;

use std::path::PathBuf;

use config::{ConfigError, RunConfig, Subcommand};

fn usage() -> String {
    let mut text = String::from(
        "usage: layerfold <subcommand> [--config <file>] [--key value ...] --out <dir>\n\nsubcommands:\n",
    );
    for cmd in Subcommand::ALL {
        text.push_str("  ");
        text.push_str(cmd.name());
        text.push('\n');
    }
    text.push_str(
        "\nenvironment:\n  LAYERFOLD_THREADS  caps sweep parallelism (default: all processors)\n",
    );
    text
}

struct Invocation {
    subcommand: Subcommand,
    config_path: Option<PathBuf>,
    out_dir: PathBuf,
    overrides: Vec<(String, String)>,
}

fn parse_args(args: &[String]) -> Result<Invocation, ConfigError> {
    let mut problems = Vec::new();
    if args.is_empty() {
        return Err(ConfigError {
            problems: vec![usage()],
        });
    }
    let Some(subcommand) = Subcommand::parse(&args[0]) else {
        return Err(ConfigError {
            problems: vec![format!("unknown subcommand `{}`\n\n{}", args[0], usage())],
        });
    };

    let mut config_path = None;
    let mut out_dir = None;
    let mut overrides = Vec::new();
    let mut i = 1;
    while i < args.len() {
        let flag = &args[i];
        let Some(key) = flag.strip_prefix("--") else {
            problems.push(format!("expected a --flag, got `{flag}`"));
            i += 1;
            continue;
        };
        let Some(value) = args.get(i + 1) else {
            problems.push(format!("flag --{key} is missing its value"));
            break;
        };
        match key {
            "config" => config_path = Some(PathBuf::from(value)),
            "out" => out_dir = Some(PathBuf::from(value)),
            _ => overrides.push((key.to_string(), value.clone())),
        }
        i += 2;
    }
    let Some(out_dir) = out_dir else {
        problems.push("missing required flag --out <dir>".to_string());
        return Err(ConfigError { problems });
    };
    if !problems.is_empty() {
        return Err(ConfigError { problems });
    }
    Ok(Invocation {
        subcommand,
        config_path,
        out_dir,
        overrides,
    })
}

fn threads_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var("LAYERFOLD_THREADS") {
        Ok(raw) => raw.parse::<usize>().map(Some).map_err(|_| ConfigError {
            problems: vec![format!(
                "LAYERFOLD_THREADS must be a positive integer, got `{raw}`"
            )],
        }),
        Err(_) => Ok(None),
    }
}

fn run_cli(args: &[String]) -> i32 {
    if args.first().is_some_and(|a| a == "--help" || a == "-h") {
        println!("{}", usage());
        return 0;
    }
    let invocation = match parse_args(args) {
        Ok(inv) => inv,
        Err(e) => {
            eprintln!("{e}");
            return 3;
        }
    };
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}");
            return 3;
        }
    };
    let mut cfg = match RunConfig::load(
        invocation.subcommand,
        invocation.config_path.as_deref(),
        &invocation.overrides,
    ) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return 3;
        }
    };
    if let Err(e) = run::validate_extra(&cfg) {
        eprintln!("{e}");
        return 3;
    }
    match run::execute(&mut cfg, &invocation.out_dir, threads) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.message());
            e.exit_code()
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(run_cli(&args));
}
