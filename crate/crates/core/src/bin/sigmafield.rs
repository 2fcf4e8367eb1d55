use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sigmafield::config::ExperimentConfig;
use sigmafield::runner::{self, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "sigmafield", version, about = "Set-indexed Gaussian field experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML or JSON config.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the replica count.
        #[arg(long)]
        replicas: Option<usize>,
        /// Worker threads; results do not depend on it.
        #[arg(long, env = "SIGMAFIELD_WORKERS")]
        workers: Option<usize>,
        /// Report directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the builtin measures, Hermite presets and cylinder suites as JSON.
    ListBuiltins,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::ListBuiltins => match runner::list_builtins() {
            Ok(cat) => {
                println!("{}", serde_json::to_string_pretty(&cat).expect("catalog serializes"));
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                runner::error_exit_code(&e)
            }
        },
        Command::Run {
            config,
            seed,
            replicas,
            workers,
            out,
        } => run(config, seed, replicas, workers, out),
    };
    ExitCode::from(code as u8)
}

fn run(path: PathBuf, seed: Option<u64>, replicas: Option<usize>, workers: Option<usize>, out: Option<PathBuf>) -> i32 {
    let mut cfg = match ExperimentConfig::from_path(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = replicas {
        if r < 2 {
            eprintln!("error: --replicas must be at least 2");
            return EXIT_CONFIG;
        }
        cfg.replicas = r;
    }
    if let Some(w) = workers {
        if w == 0 {
            eprintln!("error: --workers must be positive");
            return EXIT_CONFIG;
        }
        cfg.workers = Some(w);
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    match runner::run(&cfg) {
        Ok(summary) => {
            for c in &summary.checks {
                let mark = if c.pass { "pass" } else { "FAIL" };
                println!("{mark}  {}: {} (expected {}, tol {})", c.name, c.observed, c.expected, c.tolerance);
            }
            for n in &summary.notes {
                println!("note  {n}");
            }
            println!(
                "{} {}: reports in {}",
                summary.kind.name(),
                if summary.pass { "passed" } else { "FAILED" },
                cfg.out.display()
            );
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            runner::error_exit_code(&e)
        }
    }
}
