use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "dgsim", version, about = "Nodal DG Maxwell solver on an emulated SIMT device")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// L2 errors of a cavity mode over box refinements, with fitted orders.
    Convergence(ConvergenceArgs),
    /// Run one cavity simulation and report error, energy and device counters as JSON.
    Simulate(SimulateArgs),
    /// Sweep kernel parameters against the device cost model.
    Tune(TuneArgs),
    /// Gather-block sizes, face categories and padding waste.
    LayoutStats(LayoutArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MeshArgs {
    /// Box extent a,b,d.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0, 1.0])]
    pub extent: Vec<f64>,
    /// Cells per axis: one value for all axes or nx,ny,nz.
    #[arg(long, value_delimiter = ',', default_values_t = [2])]
    pub cells: Vec<usize>,
    /// TetGen .node file (use with --tetgen-ele instead of a box).
    #[arg(long, requires = "tetgen_ele")]
    pub tetgen_node: Option<PathBuf>,
    #[arg(long, requires = "tetgen_node")]
    pub tetgen_ele: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModeArgs {
    /// Cavity mode numbers m,n,p (TM family, m and n positive).
    #[arg(long, value_delimiter = ',', default_values_t = [1, 1, 1])]
    pub mode: Vec<u32>,
    #[arg(long, default_value_t = 0.25)]
    pub final_time: f64,
    /// Timestep safety factor in (0, 1].
    #[arg(long, default_value_t = dgsim_core::maxwell::DEFAULT_CFL)]
    pub cfl: f64,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    /// Polynomial orders.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4])]
    pub orders: Vec<usize>,
    /// Cells per axis of each refinement level (at least two).
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4])]
    pub levels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0, 1.0])]
    pub extent: Vec<f64>,
    #[command(flatten)]
    pub mode: ModeArgs,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub mode: ModeArgs,
    /// Evaluate the energy every this many steps (0: only at the end).
    #[arg(long, default_value_t = 1)]
    pub energy_every: usize,
    /// JSON destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// TOML tuning space.
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Seed of the random fixture state.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes <output>.csv and <output>.json; CSV to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6, 7])]
    pub orders: Vec<usize>,
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Microblock size override (elements); heuristic when omitted.
    #[arg(long)]
    pub k_m: Option<usize>,
    /// Microblocks per gather block.
    #[arg(long, default_value_t = 1)]
    pub m_b: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
