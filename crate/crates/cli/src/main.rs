//! `tmtrace`: trace polynomials, germ certificates and Cantor trees of the
//! Thue–Morse trace map from the command line.

mod commands;
mod report;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::Format;

#[derive(Parser, Debug)]
#[command(name = "tmtrace", version, about = "Thue-Morse trace polynomials, germs and Cantor trees")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Coupling λ as a decimal (`0.75`) or rational (`3/4`); parsed exactly.
    #[arg(long, global = true, default_value = "3", allow_hyphen_values = true)]
    pub lambda: String,
    /// Base working precision in bits.
    #[arg(long = "precision-bits", global = true, env = "TM_PRECISION_BITS", default_value_t = 256)]
    pub precision_bits: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Counting {
    Mesh,
    Cover,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Sigma,
    Tree,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate h_n(x) with a dual-precision certificate.
    Eval {
        #[arg(long)]
        n: u32,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
    /// Certified zeros of h_n on a window.
    Roots {
        #[arg(long)]
        n: u32,
        #[arg(long, allow_hyphen_values = true)]
        window: String,
    },
    /// Closeness level of (h_{k+4}, h_{k+5}) at the initial point.
    GermCheck {
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long, default_value_t = 40)]
        order: usize,
    },
    /// Build the nested interval tree.
    CantorBuild {
        #[arg(long = "K", default_value_t = 140)]
        big_k: u32,
        #[arg(long, default_value_t = 2)]
        depth: u32,
        /// Jet order of the endpoint regularity checks.
        #[arg(long, default_value_t = 40)]
        order: usize,
        #[arg(long, value_enum, default_value_t = SideArg::Right)]
        side: SideArg,
        /// Skip the endpoint regularity checks.
        #[arg(long)]
        skip_cascade: bool,
        /// Write per-node samples (x, h_m(x)) as CSV.
        #[arg(long = "emit-plot-data")]
        emit_plot_data: Option<PathBuf>,
    },
    /// Dimension lower bound ln2/(K ln 2.1).
    DimBound {
        #[arg(long = "K", default_value_t = 140)]
        big_k: u32,
    },
    /// Check the constant chain in exact arithmetic.
    ConstantsCheck,
    /// Bands {|h_n| <= 2} on a window.
    Bands {
        #[arg(long)]
        n: u32,
        #[arg(long, allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value_t = 1024)]
        resolution: usize,
        /// Write samples (x, h_n(x)) across the window as CSV.
        #[arg(long = "emit-plot-data")]
        emit_plot_data: Option<PathBuf>,
    },
    /// Zeros of h_1..h_n on a window, merged across levels.
    Sigma {
        #[arg(long)]
        n: u32,
        #[arg(long, allow_hyphen_values = true)]
        window: String,
    },
    /// Box-counting slope of sigma points or tree endpoints.
    Boxdim {
        #[arg(long, value_enum, default_value_t = Source::Sigma)]
        source: Source,
        /// Level for sigma points.
        #[arg(long, default_value_t = 10)]
        n: u32,
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        #[arg(long = "K", default_value_t = 8)]
        big_k: u32,
        #[arg(long, default_value_t = 5)]
        depth: u32,
        #[arg(long, value_enum, default_value_t = Counting::Mesh)]
        counting: Counting,
        /// Number of scales for sigma points.
        #[arg(long, default_value_t = 8)]
        scales: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let report = match commands::run(&cli.global, &cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let stdout = io::stdout();
    if let Err(e) = report::emit(&report, cli.global.format, &mut stdout.lock()) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    if report.flags.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in &report.flags {
            eprintln!("flagged: {f}");
        }
        ExitCode::from(2)
    }
}
