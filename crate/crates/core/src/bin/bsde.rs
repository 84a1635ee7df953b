use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bsde_core::experiment::{fixture_assumptions, run_file, Overrides};
use bsde_core::generators::fixture_names;

#[derive(Parser)]
#[command(name = "bsde", version, about = "Run BSDE experiments from declarative configs")]
struct Cli {
    /// Worker threads (defaults to all cores); results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and check one experiment; exit 0 if every check passes,
    /// 1 on a failed check, 2 on a config error.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        /// Output directory; falls back to the config, then $BSDE_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sampled assumption checks for a fixture: table, then JSON.
    Assumptions {
        fixture: String,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        /// Also write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the fixture names.
    ListFixtures,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match cli.command {
        Command::Run {
            config,
            seed,
            paths,
            steps,
            out,
        } => {
            let overrides = Overrides { seed, paths, steps, out };
            match run_file(&config, &overrides) {
                Ok(outcome) => {
                    for c in &outcome.checks {
                        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.check, c.detail);
                    }
                    println!("y0 = {:?}", outcome.y0);
                    for f in &outcome.files {
                        println!("wrote {}", f.display());
                    }
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Assumptions {
            fixture,
            samples,
            seed,
            json,
        } => match fixture_assumptions(&fixture, samples, seed) {
            Ok(rep) => {
                print!("{}", rep.table());
                let text = serde_json::to_string_pretty(&rep).expect("report serializes");
                println!("{text}");
                if let Some(path) = json {
                    if let Err(e) = std::fs::write(&path, &text) {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                ExitCode::from(if rep.all_claimed_pass() { 0 } else { 1 })
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::ListFixtures => {
            for name in fixture_names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}
