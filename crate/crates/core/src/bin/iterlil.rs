use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use iterlil::cli::{run_subcommand, Subcommand};
use iterlil::config::parse_config;

#[derive(Parser)]
#[command(name = "iterlil", version, about = "Monte Carlo and renewal numerics for iterated perturbed random walks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(ClapSubcommand)]
enum Cmd {
    /// Dump one trajectory and per-replicate generation counts
    Simulate(Flags),
    /// Tabulate U and V_1..V_j
    Renewal(Flags),
    /// Normalized iterated-logarithm scan of Y_j
    LilScan(Flags),
    /// Growth exponent of Var Y_j
    VarScan(Flags),
    /// Supermartingale, tail-sum, CLT, increment-bound and nu-increment checks
    Checks(Flags),
    /// The full acceptance suite
    All(Flags),
}

#[derive(Args)]
struct Flags {
    /// `key = value` file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    law: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    j: Option<String>,
    /// Renewal table step
    #[arg(long)]
    step: Option<String>,
    #[arg(long = "t-min")]
    t_min: Option<String>,
    /// Comma-separated supermartingale parameters
    #[arg(long, allow_hyphen_values = true)]
    u: Option<String>,
    /// Comma-separated times for var-scan and checks
    #[arg(long = "t-points")]
    t_points: Option<String>,
    /// Output directory (default: $ITERLIL_OUT or ./iterlil-out)
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    workers: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(String, String)> {
        let named = [
            ("law", &self.law),
            ("seed", &self.seed),
            ("reps", &self.reps),
            ("horizon", &self.horizon),
            ("grid", &self.grid),
            ("j", &self.j),
            ("step", &self.step),
            ("t-min", &self.t_min),
            ("u", &self.u),
            ("t-points", &self.t_points),
            ("out", &self.out),
            ("workers", &self.workers),
        ];
        named
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, flags) = match &cli.cmd {
        Cmd::Simulate(f) => (Subcommand::Simulate, f),
        Cmd::Renewal(f) => (Subcommand::Renewal, f),
        Cmd::LilScan(f) => (Subcommand::LilScan, f),
        Cmd::VarScan(f) => (Subcommand::VarScan, f),
        Cmd::Checks(f) => (Subcommand::Checks, f),
        Cmd::All(f) => (Subcommand::All, f),
    };
    let text = match &flags.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => Some(t),
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", p.display());
                return ExitCode::from(2);
            }
        },
        None => None,
    };
    let cfg = match parse_config(text.as_deref(), &flags.pairs()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_subcommand(sub, &cfg) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for a in &report.artifacts {
                println!("wrote {}", a.display());
            }
            println!("{}", if report.pass { "PASS" } else { "FAIL" });
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
