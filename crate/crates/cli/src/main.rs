use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use cloudlapse::runner::{self, Overrides};

/// Run a cloudlapse scenario and write its artifacts.
///
/// Exit status: 0 when every certification passes, 2 when a monitored bound
/// is falsified (witnesses are in the artifacts), 1 on any other error.
#[derive(Debug, Parser)]
#[command(name = "cloudlapse", version)]
struct Cli {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Output directory (must exist); overrides `output_dir` in the file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accept any σ below σ★ and mark the outputs non-conforming.
    #[arg(long)]
    relaxed: bool,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "CLOUDLAPSE_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cloudlapse: cannot set up {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let overrides = Overrides { out: cli.out, relaxed: cli.relaxed, seed: cli.seed };
    let result = runner::load_config(&cli.scenario, &overrides).and_then(|cfg| runner::run_scenario(&cfg));
    match &result {
        Ok(o) => {
            for line in &o.manifest.summary {
                println!("{line}");
            }
            println!("status: {:?}, manifest: {}", o.status, o.manifest_path.display());
        }
        Err(e) => eprintln!("cloudlapse: {e}"),
    }
    ExitCode::from(runner::exit_code(&result) as u8)
}
