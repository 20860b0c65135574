use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "carnot", version, about = "Step-two Carnot group toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Spec file, or a builtin: heisenberg, gk:<k>, gk:inf
    #[arg(long, global = true, default_value = "heisenberg")]
    pub spec: String,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Search budget (random starts / candidates)
    #[arg(long, global = true, default_value_t = 2000)]
    pub budget: usize,

    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Shooting,
    Control,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check antisymmetry and the bracket-generating condition
    Validate,
    /// Dimensions and Métivier verdict
    Info,
    /// Search for N_0
    N0,
    /// The operator J_u
    Jmap {
        /// Second-layer vector, comma separated
        #[arg(long, allow_hyphen_values = true)]
        u: String,
    },
    /// Carnot–Carathéodory distance
    Dist {
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
    },
    /// Exponential map
    Exp {
        /// Covector xi0 then u0, comma separated
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Empirical contraction exponent
    Mcp {
        #[arg(long)]
        samples: usize,
        /// Values of s in (0, 1), comma separated
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        s_grid: String,
        /// Sample only covectors with u0 = 0
        #[arg(long)]
        horizontal: bool,
    },
    /// Experiments on the G_k family
    Family {
        #[command(subcommand)]
        which: FamilyCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum FamilyCommand {
    /// Distances d_k against d_inf on seeded pairs in the unit box
    Converge {
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        #[arg(long, default_value = "1,2,4,8,16,32,64")]
        k_list: String,
    },
    /// Métivier verdicts and N_0 along the family
    Semicontinuity,
}
