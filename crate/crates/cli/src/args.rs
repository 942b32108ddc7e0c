use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use difftree::tree::PruneRule;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "difftree",
    version,
    about = "Differential trees for event datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Grow and prune one tree; report its minimum p-value.
    Grow(CommonArgs),
    /// Build (or load) a permutation null and adjust the observed tree.
    Permute(CommonArgs),
    /// Bagged estimate of the adjusted minimum p-value.
    Bag(CommonArgs),
    /// Sliding two-window detection over a time-stamped event stream.
    Seqdetect(CommonArgs),
    /// Power simulation by duplicate-and-reassign with injected events.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Re-run the configuration embedded in an earlier output file.
    Replay {
        file: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Event CSV (the first dataset when --input2 is given).
    #[arg(long)]
    pub input: PathBuf,
    /// Second dataset; each file becomes one group.
    #[arg(long)]
    pub input2: Option<PathBuf>,
    /// Column whose values tag the group of each row.
    #[arg(long = "group-col")]
    pub group_col: Option<String>,
    /// TOML schema; inferred from the data when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long = "time-col")]
    pub time_col: Option<String>,
    /// Smallest child size (default 5 times the number of response levels).
    #[arg(long = "min-child")]
    pub min_child: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub pcut: f64,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// pmin, cost-complexity or none.
    #[arg(long, default_value = "pmin")]
    pub prune: PruneRule,
    #[arg(long, value_enum, default_value_t = Atomic::Poisson)]
    pub atomic: Atomic,
    /// Exposure per group for --atomic exposure, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub exposures: Vec<f64>,
    #[arg(long = "R", default_value_t = 1000)]
    pub r: usize,
    #[arg(long = "B", default_value_t = 50)]
    pub b: usize,
    /// Seeds every random draw; derived from the clock and printed if absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// self, historical:<csv> or file:<null sample>.
    #[arg(long)]
    pub null: Option<NullArg>,
    /// Carry the raw minimum p into the permutation step instead of min(mp, 1).
    #[arg(long = "raw-p")]
    pub raw_p: bool,
    /// Use bagged estimates (seqdetect, simulate).
    #[arg(long)]
    pub bag: bool,
    #[arg(long = "window-days", default_value_t = 365)]
    pub window_days: i64,
    #[arg(long = "step-days", default_value_t = 7)]
    pub step_days: i64,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    /// Signal sizes, comma separated.
    #[arg(
        long = "n-delta",
        value_delimiter = ',',
        default_value = "0,10,20,30,40,50"
    )]
    pub n_delta: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Injected share per response level, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.7")]
    pub mix: Vec<f64>,
    /// Tree report whose node selects the signal pool from --input2.
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    /// Node id in --pattern (default: its most significant terminal).
    #[arg(long)]
    pub node: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atomic {
    Poisson,
    Exposure,
    Multinomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NullArg {
    SelfPermutation,
    Historical(PathBuf),
    File(PathBuf),
}

impl FromStr for NullArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "self" {
            return Ok(NullArg::SelfPermutation);
        }
        match s.split_once(':') {
            Some(("historical", p)) if !p.is_empty() => Ok(NullArg::Historical(p.into())),
            Some(("file", p)) if !p.is_empty() => Ok(NullArg::File(p.into())),
            _ => Err(format!(
                "`{s}`: expected self, historical:<path> or file:<path>"
            )),
        }
    }
}

impl TryFrom<String> for NullArg {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<NullArg> for String {
    fn from(n: NullArg) -> String {
        n.to_string()
    }
}

impl fmt::Display for NullArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NullArg::SelfPermutation => f.write_str("self"),
            NullArg::Historical(p) => write!(f, "historical:{}", p.display()),
            NullArg::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_argument_forms() {
        assert_eq!("self".parse::<NullArg>(), Ok(NullArg::SelfPermutation));
        assert_eq!(
            "historical:old.csv".parse::<NullArg>(),
            Ok(NullArg::Historical("old.csv".into()))
        );
        assert_eq!(
            "file:n.txt".parse::<NullArg>().unwrap().to_string(),
            "file:n.txt"
        );
        assert!("file:".parse::<NullArg>().is_err());
        assert!("other".parse::<NullArg>().is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
