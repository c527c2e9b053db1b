use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod verify;

#[derive(Parser, Debug)]
#[command(name = "nlscat", version, about = "Scattering for 1-D Schrödinger operators and low-energy NLS")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Potential description (JSON). Defaults to V = 0 on the standard box.
    #[arg(long, global = true)]
    pub potential: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long = "grid-n", global = true)]
    pub grid_n: Option<usize>,
    #[arg(long = "grid-xmax", global = true)]
    pub grid_xmax: Option<f64>,
    #[arg(long, global = true)]
    pub kmax: Option<f64>,
    #[arg(long, global = true)]
    pub kmin: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Transmission and reflection coefficients on a uniform k-grid.
    Coeffs {
        #[arg(long, default_value_t = 64)]
        nk: usize,
    },
    /// Generic/exceptional verdict.
    Classify,
    /// Negative eigenvalues `-β²` and eigenfunction residuals.
    BoundStates,
    /// Continuous-spectrum kernel on the observation window.
    Kernel {
        #[arg(long)]
        t: f64,
        /// Write the full kernel slice, not only its summary.
        #[arg(long)]
        dump: bool,
    },
    /// `√t·sup|K_t|` over a list of times.
    Decay {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4,8,16,32")]
        times: Vec<f64>,
    },
    /// Linear evolution of the reference packet.
    EvolveLinear {
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Nonlinear evolution of the reference packet.
    EvolveNls {
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, default_value_t = 5.0)]
        p: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Two-channel scattering matrix from wave packets.
    Smatrix {
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<f64>,
    },
    /// Coupling constant from nonlinear scattering data.
    RecoverLambda {
        #[arg(long = "true-lambda", allow_hyphen_values = true)]
        true_lambda: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 5.0)]
        p: f64,
        #[arg(long, default_value_t = 40.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// Invariant suite over the bundled fixtures.
    Verify,
}

#[derive(Debug)]
pub enum CliError {
    Core(nlscat::Error),
    Config(String),
    Failed(String),
}

impl From<nlscat::Error> for CliError {
    fn from(e: nlscat::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use nlscat::Error as E;
        match self {
            CliError::Config(_) | CliError::Core(E::Validation(_) | E::Io(_)) => 2,
            CliError::Core(E::Hypothesis(_)) => 4,
            CliError::Core(_) | CliError::Failed(_) => 3,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let (kind, message) = match self {
            CliError::Core(e) => (format!("{e:?}").split(['(', ' ', '{']).next().unwrap_or("").to_string(), e.to_string()),
            CliError::Config(m) => ("Config".into(), m.clone()),
            CliError::Failed(m) => ("Failed".into(), m.clone()),
        };
        serde_json::json!({ "error": kind, "message": message })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
