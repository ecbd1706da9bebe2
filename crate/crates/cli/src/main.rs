use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand as ClapSubcommand};
use dfcrb_cli::{execute, Overrides, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "dfcrb", version, about = "Bounds and estimator experiments for distributed arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, short, global = true, env = "DFCRB_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, short, global = true, env = "DFCRB_OUT")]
    out: Option<PathBuf>,
    /// Master seed; overrides the config seeds.
    #[arg(long, global = true, env = "DFCRB_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DFCRB_THREADS")]
    threads: Option<usize>,
    /// SNR levels in dB, comma separated; overrides the config.
    #[arg(long, global = true, env = "DFCRB_SNR_DB", value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, ClapSubcommand)]
enum Command {
    /// CRB_FC and CRB_PC against separation.
    CrbSweep,
    /// Declining-region slope, plateau flatness and turning point.
    TurningPoint,
    /// Q_0, Q_1, Q_2 against separation.
    Qstats,
    /// Exact against approximate [M G^-1 M^T]_11 for two sources.
    ApproxCheck,
    /// Gradient check of u_p.
    UpCheck,
    /// Monte-Carlo RMSE and resolution probability of MUSIC and RARE.
    McRmse,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::CrbSweep => Subcommand::CrbSweep,
            Command::TurningPoint => Subcommand::TurningPoint,
            Command::Qstats => Subcommand::Qstats,
            Command::ApproxCheck => Subcommand::ApproxCheck,
            Command::UpCheck => Subcommand::UpCheck,
            Command::McRmse => Subcommand::McRmse,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let overrides = Overrides {
        seed: cli.seed,
        snr_db: cli.snr_db,
    };
    match execute(cli.command.into(), &config, cli.out.as_deref(), &overrides) {
        Ok((dir, m)) => {
            for f in &m.files {
                println!("{}", dir.join(&f.name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
