use bconvex_lab::{cmd_check, cmd_scan, cmd_solve, Which, EXIT_ERROR, EXIT_VIOLATION};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bconvex-lab",
    version,
    about = "Solve and probe principal-agent problems over b-convex utilities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem in a config file and write artifacts to a directory.
    Solve {
        config: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Run a property harness on the benefit (and cost) of a config.
    Check {
        config: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Regularity diagnostics on a solved directory.
    Scan {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long)]
        points: Option<usize>,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("BCONVEX_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("BCONVEX_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("BCONVEX_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    init_threads()?;
    match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, &out),
        Command::Check {
            config,
            which,
            samples,
            seed,
        } => {
            let (code, report) = cmd_check(&config, which, samples, seed)?;
            print!("{report}");
            if code == EXIT_VIOLATION {
                let v: serde_json::Value = serde_json::from_str(&report)?;
                let worst = v["report"]["worst_tuple"].clone();
                eprintln!("violation: worst tuple {worst}");
            }
            Ok(code)
        }
        Command::Scan { dir, radii, points } => {
            let (code, rep) = cmd_scan(&dir, radii, points)?;
            println!("{}", bconvex_core::json::to_string_precise(&rep)?.trim_end());
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors; 2 is reserved for non-convergence
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
