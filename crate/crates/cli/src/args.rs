use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use procmap_core::{MachineShape, ProcKind};

use crate::report::Format;

#[derive(Debug, Parser)]
#[command(name = "procmap", version, about = "Map iteration spaces onto processor grids and check the result")]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a mapper file; list its statements and functions.
    Parse {
        file: PathBuf,
    },
    /// Evaluate a mapper over a full iteration space.
    Map {
        file: PathBuf,
        /// Task whose IndexTaskMap binding is evaluated.
        #[arg(long)]
        task: String,
        /// Evaluate this function instead of the task's binding.
        #[arg(long)]
        func: Option<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        ispace: Vec<i64>,
        #[command(flatten)]
        machine: MachineArgs,
    },
    /// Optimal and greedy processor grids for a block decomposition.
    Decompose {
        /// Number of processors to factor.
        #[arg(long)]
        procs: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        extents: Vec<u64>,
        #[arg(long, value_enum, default_value_t = ObjectiveKind::Isotropic)]
        objective: ObjectiveKind,
        /// Halo widths per dimension (default all 1).
        #[arg(long, value_delimiter = ',')]
        halo: Vec<u64>,
        /// Dimensions with an all-to-all transpose.
        #[arg(long, value_delimiter = ',')]
        transpose: Vec<usize>,
        /// Only consider grids that divide every extent.
        #[arg(long)]
        strict_divisible: bool,
    },
    /// Communication volumes of one block grid.
    Commvol {
        #[arg(long, value_delimiter = ',', required = true)]
        extents: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        halo: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        transpose: Vec<usize>,
        /// Also count boundary cells by enumeration (small spaces only).
        #[arg(long)]
        oracle: bool,
    },
    /// Run the task lifecycle simulator and check the trace.
    Simulate {
        #[arg(long)]
        mapper: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Mapping function for tasks without an IndexTaskMap binding.
        #[arg(long)]
        func: Option<String>,
        /// Use the seeded random scheduler instead of the priority one.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        machine: MachineArgs,
    },
    /// Model-predicted improvement of optimal over greedy grids across a
    /// parameter grid of 2D stencils.
    Sweep {
        /// Aspect ratios `r` of `1 : r` iteration spaces.
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 4, 8, 16, 32])]
        ratios: Vec<u64>,
        /// Iteration-space area per node; accepts `1e6` style.
        #[arg(long, value_delimiter = ',', default_values_t = [Count(1_000_000), Count(10_000_000), Count(100_000_000), Count(200_000_000), Count(400_000_000)])]
        areas: Vec<Count>,
        #[arg(long, value_delimiter = ',', default_values_t = [4u64, 8, 16, 32, 64, 128])]
        gpus: Vec<u64>,
        #[arg(long, default_value_t = 4)]
        gpus_per_node: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveKind {
    Isotropic,
    Halo,
    Transpose,
}

#[derive(Debug, Args)]
pub struct MachineArgs {
    /// Machine size as NODESxPROCS.
    #[arg(long, default_value = "2x2")]
    pub machine: MachineDims,
    #[arg(long, default_value = "GPU")]
    pub kind: ProcKind,
}

impl MachineArgs {
    pub fn shape(&self) -> MachineShape {
        MachineShape::new(self.kind, self.machine.nodes, self.machine.procs).expect("dimensions are checked when parsed")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MachineDims {
    pub nodes: u32,
    pub procs: u32,
}

impl FromStr for MachineDims {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected NODESxPROCS with positive sizes, got `{s}`");
        let (n, p) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let nodes: u32 = n.trim().parse().map_err(|_| bad())?;
        let procs: u32 = p.trim().parse().map_err(|_| bad())?;
        if nodes == 0 || procs == 0 {
            return Err(bad());
        }
        Ok(MachineDims { nodes, procs })
    }
}

/// A positive integer, also accepted in `4e8` shorthand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Count(pub u64);

impl FromStr for Count {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected a positive integer such as 1000000 or 1e6, got `{s}`");
        if let Ok(n) = s.parse::<u64>() {
            return if n > 0 { Ok(Count(n)) } else { Err(bad()) };
        }
        let (mantissa, exp) = s.split_once(['e', 'E']).ok_or_else(bad)?;
        let mantissa: u64 = mantissa.parse().map_err(|_| bad())?;
        let exp: u32 = exp.parse().map_err(|_| bad())?;
        match 10u64.checked_pow(exp).and_then(|p| p.checked_mul(mantissa)) {
            Some(n) if n > 0 => Ok(Count(n)),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for Count {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn machine_dims() {
        assert_eq!("2x4".parse(), Ok(MachineDims { nodes: 2, procs: 4 }));
        assert!("0x4".parse::<MachineDims>().is_err());
        assert!("24".parse::<MachineDims>().is_err());
    }

    #[test]
    fn counts() {
        assert_eq!("1e6".parse(), Ok(Count(1_000_000)));
        assert_eq!("4e8".parse(), Ok(Count(400_000_000)));
        assert_eq!("12".parse(), Ok(Count(12)));
        assert!("0".parse::<Count>().is_err());
        assert!("1.5e3".parse::<Count>().is_err());
    }

    #[test]
    fn definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
