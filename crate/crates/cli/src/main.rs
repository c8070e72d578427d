use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "betti",
    version,
    about = "Exact Betti numbers and gradients along finite-index chains"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Largest quotient (number of cosets) any builder may create.
    #[arg(long, global = true, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    pub index_budget: u64,
    /// Largest row or column count of a relation matrix.
    #[arg(long, global = true, default_value_t = 4000, value_parser = clap::value_parser!(u64).range(1..))]
    pub matrix_budget: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Abelian invariants and first Betti numbers of a presentation.
    B1 {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        primes: Vec<u64>,
    },
    /// Per-level report along a chain of finite-index normal subgroups.
    Chain(commands::ChainArgs),
    /// 𝔽_p-approximation and rank-gradient bound along the derived p-series.
    Gradient {
        file: PathBuf,
        #[arg(short, long)]
        p: u64,
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
    /// `(ℤ/p ∗ ℤ/q ∗ ℤ/q) ∗ ℤ` along cyclic covers of the free factor.
    Counterexample {
        #[arg(short, long, default_value_t = 2)]
        p: u64,
        #[arg(short, long, default_value_t = 3)]
        q: u64,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
        moduli: Vec<u64>,
    },
    /// Random dimension-inequality checks over group rings of p-groups.
    OracleGroupring {
        /// Matrices per group.
        #[arg(long, default_value_t = 500)]
        per_group: usize,
        /// Groups as NAME:PRIME, e.g. `C4:2,Q8:2`; defaults to the built-in suite.
        #[arg(long, value_delimiter = ',')]
        groups: Vec<String>,
    },
    /// Search for a witness that a presentation is p-regular.
    Regularity {
        file: PathBuf,
        #[arg(short, long)]
        p: u64,
        /// Deepest derived-series level tried.
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
    /// Staged tower construction with independent verification.
    Construct(commands::ConstructArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::B1 { file, primes } => commands::b1(&file, &primes),
        Command::Chain(args) => commands::chain(&cli.global, &args),
        Command::Gradient { file, p, depth } => commands::gradient(&cli.global, &file, p, depth),
        Command::Counterexample { p, q, moduli } => commands::counterexample(&cli.global, p, q, &moduli),
        Command::OracleGroupring { per_group, groups } => commands::oracle_groupring(&cli.global, per_group, &groups),
        Command::Regularity { file, p, depth } => commands::regularity(&cli.global, &file, p, depth),
        Command::Construct(args) => commands::construct(&cli.global, &args),
    };
    let outcome = result.and_then(|out| {
        let text = out.render(cli.global.format)?;
        print!("{text}");
        match out.violation {
            Some(v) => Err(Failure::Violation(v)),
            None => Ok(()),
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
