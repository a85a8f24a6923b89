//! `fracount` command line: run scenario configs and list the bundled ones.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracount::scenario::{self, Scenario, BUNDLED};
use fracount::Error;

#[derive(Parser)]
#[command(name = "fracount", version, about = "Simulate counting processes and verify their martingale identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config and write its report.
    Run {
        /// Scenario JSON file.
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; reports go to `<out>/<scenario>/`.
        #[arg(long, env = "FRACOUNT_OUT")]
        out: Option<PathBuf>,
    },
    /// List the bundled scenarios.
    List,
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Invalid { .. }
            | Error::Json(_)
            | Error::Probe(_)
            | Error::Sizing { .. }
            | Error::Unsupported(_)
            | Error::Degenerate(_)
    )
}

fn run(config: PathBuf, threads: Option<usize>, seed: Option<u64>, out: Option<PathBuf>) -> ExitCode {
    let mut sc = match Scenario::load(&config) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        sc.seed = s;
    }
    let root = out
        .or_else(|| sc.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("fracount-out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    };
    let outcome = match pool.install(|| scenario::run(&sc)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {}: {e}", sc.name);
            return ExitCode::from(if is_config_error(&e) { 2 } else { 3 });
        }
    };
    let dir = match scenario::write_outputs(&sc, &outcome, &root) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: writing report: {e}");
            return ExitCode::from(3);
        }
    };
    for r in &outcome.reports {
        let at = [("u/v", r.u_or_v), ("s", r.s), ("t", r.t)]
            .iter()
            .filter_map(|(k, v)| v.map(|v| format!(" {k}={v}")))
            .collect::<String>();
        println!(
            "{} {}{at}: statistic={:.6} target={:.6} z={:.3} threshold={:.3}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.statistic,
            r.target,
            r.effective_z(),
            r.threshold
        );
    }
    println!("report: {}", dir.join("report.csv").display());
    if outcome.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            threads,
            seed,
            out,
        } => run(config, threads, seed, out),
        Command::List => {
            for (name, text) in BUNDLED {
                let description = Scenario::from_json(text).map(|s| s.description).unwrap_or_default();
                println!("{name:<26}{description}");
            }
            ExitCode::SUCCESS
        }
    }
}
