use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod cli;

/// Exact-arithmetic laboratory for communication and incentives in auctions.
///
/// Exit codes: 0 ok, 2 verification violation, 3 budget or capability
/// limit, 4 input error.
#[derive(Parser, Debug)]
#[command(name = "mechlab", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for generators and samplers.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (or directory for `run`); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Wall-clock budget in milliseconds.
    #[arg(long, global = true)]
    pub budget_ms: Option<u64>,
    /// Command-specific mode, e.g. `stitch|pruned|oracle` or `brute|ascending`.
    #[arg(long, global = true)]
    pub mode: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Incentive and structure checks on protocol trees.
    #[command(subcommand)]
    Verify(Verify),
    /// Multi-unit auctions with decreasing marginals.
    #[command(subcommand)]
    Mu(Mu),
    /// Gross-substitutes valuations.
    #[command(subcommand)]
    Gs(Gs),
    /// Simultaneous algorithms and their hard instances.
    #[command(subcommand)]
    Sim(Sim),
    /// Rank-profile matroids.
    #[command(subcommand)]
    Matroid(MatroidCmd),
    /// Runs an experiment config.
    Run {
        config: PathBuf,
    },
    /// Prints what a JSON artifact is and checks its invariants.
    Describe {
        file: PathBuf,
    },
}

/// A mechanism given as files or as a built-in fixture.
#[derive(Args, Debug, Clone)]
pub struct MechArgs {
    pub mech: Option<PathBuf>,
    pub strategies: Option<PathBuf>,
    pub domains: Option<PathBuf>,
    /// Built-in mechanism instead of files.
    #[arg(long, value_enum, conflicts_with_all = ["mech", "strategies", "domains"])]
    pub fixture: Option<FixtureName>,
    /// Writes the fixture's mech/strategies/domains JSON into this directory.
    #[arg(long, requires = "fixture")]
    pub export: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureName {
    SingleLeaf,
    SealedSecondPrice,
    SerialSecondPrice,
    SmallSerialSecondPrice,
    PaddedSecondPrice,
    AscendingBundle,
    FigureOne,
    UndecidedRooms,
    TwoPrices,
}

#[derive(Subcommand, Debug)]
pub enum Verify {
    /// Dominant-strategy check; prints a certificate on violation.
    Ds(MechArgs),
    /// Ex-post check of a social choice table (or of a mechanism's table).
    Expost {
        table: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "table")]
        fixture: Option<FixtureName>,
    },
    /// Semi-simultaneity check.
    Semisim(MechArgs),
    /// Payment uniqueness and containment on every induced tree.
    Payments(MechArgs),
}

#[derive(Subcommand, Debug)]
pub enum Mu {
    /// Optimal split; `--mode crossing|brute|enumerate`.
    Opt { instance: PathBuf },
    /// FPTAS against the exact optimum, one CSV row per epsilon.
    Fptas {
        instance: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1/2,1/4,1/8")]
        eps: Vec<String>,
    },
    /// Enumerates a weighted family and checks it.
    Families {
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        gamma: u64,
        /// `nd` or `d`.
        #[arg(long, default_value = "nd")]
        family: String,
    },
    /// Recovers the first bidder's values from menu prices.
    Reconstruct {
        instance: PathBuf,
        /// Shift added to every price, as `p/q`.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        perturb: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum Gs {
    /// Gross-substitutes test of one valuation.
    Check { valuation: PathBuf },
    /// Welfare maximization; `--mode brute|ascending`.
    Wdp { instance: PathBuf },
    /// Generates members of the hard families and checks each is GS.
    Families {
        #[arg(long, default_value_t = 5)]
        m: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimAlg {
    FirstCome,
    Silent,
    ExactReport,
    Truncated,
    Cheat,
}

#[derive(Subcommand, Debug)]
pub enum Sim {
    /// Draws a hard instance.
    Gen {
        #[arg(long, default_value = "general")]
        generator: String,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        /// Exponent `p/q` of the general distribution.
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        group_size: Option<usize>,
        /// Matroid parameters as JSON (the desk defaults otherwise).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Runs a simultaneous algorithm; prints `seed,welfare,opt,ratio,bits`.
    Run {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "first-come")]
        algorithm: SimAlg,
        #[arg(long, default_value_t = 1)]
        bits: usize,
    },
    /// Frequent-message statistics on one group.
    Stats {
        #[arg(long, value_enum, default_value = "truncated")]
        algorithm: SimAlg,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Joint message budget of the group.
        #[arg(long, default_value_t = 4)]
        bits: usize,
        #[arg(long, default_value_t = 7)]
        factor: u32,
    },
    /// The reduction toy, every profile.
    Reduce {
        /// Adds the phantom reserve bidder.
        #[arg(long)]
        reserve: bool,
    },
    /// Three-player separation checks.
    Sep {
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum MatroidCmd {
    /// Samples a rank-profile matroid that passes the axiom check.
    Gen {
        #[arg(long, default_value_t = 12)]
        ground: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        s: usize,
        #[arg(long, default_value_t = 3)]
        b: usize,
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        full_rank: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        retries: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Axiom check; `--mode exhaustive|sampled`.
    Verify { matroid: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli::run(&cli) {
        Ok(cli::Status::Ok) => ExitCode::SUCCESS,
        Ok(cli::Status::Violation) => ExitCode::from(2),
        Ok(cli::Status::Incomplete) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
