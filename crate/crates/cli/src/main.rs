//! `hcoarea`: drives the library from the command line and writes JSON/CSV
//! artifacts. Exit codes: 0 success, 1 invalid input, 2 failed check,
//! 3 resource cap.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hcoarea::ErrorKind;

#[derive(Parser, Debug)]
#[command(name = "hcoarea", version, about = "Areas of rough curves, vertical fibers and the coarea formula in the Heisenberg group")]
pub struct Cli {
    /// Worker threads (defaults to available parallelism). Results do not
    /// depend on this.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Signed area of a curve from dyadic and probe partitions.
    Area(AreaArgs),
    /// The dyadic square sum of a curve, with bounds where they are known.
    Sigma(SigmaArgs),
    /// The curve whose dyadic areas vanish while refined partitions see area 1.
    Pathological {
        #[command(subcommand)]
        action: PathAction,
    },
    /// Measure of a vertical curve: fiber formula, box count, patchwork.
    Fiber(FiberArgs),
    /// Both sides of the coarea formula for a built-in field.
    Coarea {
        #[command(subcommand)]
        action: CoareaAction,
    },
    /// β-number, affine fit and bilipschitz check of a field on a ball.
    Beta(BetaArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum AreaBuiltin {
    Circle,
    Line,
    Pathological,
    Theta,
}

#[derive(Args, Debug)]
pub struct PathParamArgs {
    /// Dyadic exponents r_0 < r_1 < ...
    #[arg(long, value_delimiter = ',', default_value = "0,18,36")]
    pub r: Vec<u32>,
    /// Square indices k_0, k_1, ...
    #[arg(long, value_delimiter = ',', default_value = "1,1")]
    pub k: Vec<u32>,
}

#[derive(Args, Debug)]
pub struct AreaArgs {
    #[arg(long, value_enum, conflicts_with = "csv", required_unless_present = "csv")]
    pub builtin: Option<AreaBuiltin>,
    /// Curve samples with header t,c1,...,c2n.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Finest dyadic level.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..=30))]
    pub level_cap: u32,
    /// Pathological curve: refined partitions of stages below this are used as probes.
    #[arg(long, default_value_t = 1)]
    pub stage_cap: usize,
    /// Pathological curve: exponents r.
    #[arg(long, value_delimiter = ',', default_value = "0,18,36")]
    pub r: Vec<u32>,
    /// Pathological curve: indices k. Theta: the first entry is used.
    #[arg(long, value_delimiter = ',', default_value = "1,1")]
    pub k: Vec<u32>,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Directory for area.json and area_levels.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SigmaBuiltin {
    Theta,
    Alpha,
    Circle,
    Line,
}

#[derive(Args, Debug)]
pub struct SigmaArgs {
    #[arg(long, value_enum, conflicts_with = "csv", required_unless_present = "csv")]
    pub builtin: Option<SigmaBuiltin>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Theta: the indices k to certify.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub k: Vec<u32>,
    /// Alpha: the truncation height i of D_{2i}α.
    #[arg(long, default_value_t = 1)]
    pub i: u32,
    /// Last level of the partial sum for curves that are not piecewise linear.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(0..=29))]
    pub max_level: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum PathAction {
    /// Checks that dyadic areas vanish and refined-partition areas equal 1.
    Verify {
        #[command(flatten)]
        params: PathParamArgs,
        /// Stages whose refined partitions are checked.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        stage: Vec<usize>,
        /// Dyadic levels 0..=this are checked.
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(0..=28))]
        dyadic_levels: u32,
        /// Largest refined partition materialized.
        #[arg(long, default_value_t = 1 << 24)]
        point_cap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes curve samples on a dyadic grid as CSV.
    Generate {
        #[command(flatten)]
        params: PathParamArgs,
        /// Stage to sample; defaults to the limit.
        #[arg(long)]
        stage: Option<usize>,
        #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(0..=24))]
        level: u32,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact σ certificates for θ_k, D_{2i}α and the stages.
    Certify {
        #[command(flatten)]
        params: PathParamArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        theta_k: Vec<u32>,
        #[arg(long, default_value_t = 18, value_parser = clap::value_parser!(u32).range(0..=26))]
        level_cap: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct FieldArgs {
    /// Built-in field name.
    #[arg(long, default_value = "shear")]
    pub field: String,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=5))]
    pub n: u32,
}

#[derive(Args, Debug)]
pub struct FiberArgs {
    /// Vertical curve samples with header t,x1,y1,...,z.
    #[arg(long, conflicts_with = "w")]
    pub csv: Option<PathBuf>,
    /// Trace the fiber of a built-in field over this target value.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required_unless_present = "csv")]
    pub w: Option<Vec<f64>>,
    #[command(flatten)]
    pub field: FieldArgs,
    /// Tracer step.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    /// Bound on the patchwork constant.
    #[arg(long, default_value_t = 64.0)]
    pub mu: f64,
    /// Box-count scales, as multiples of the diameter, halving from 0.4.
    #[arg(long, default_value_t = 3)]
    pub box_scales: usize,
    /// Directory for fiber.json and the traced samples.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum CoareaAction {
    /// Runs an experiment. Flags override values from --config.
    Run(CoareaArgs),
    /// Prints the configuration the given flags resolve to.
    Config(CoareaArgs),
}

#[derive(Args, Debug)]
pub struct CoareaArgs {
    /// Experiment file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub w_cells: Option<usize>,
    #[arg(long)]
    pub w_refine: Option<u32>,
    #[arg(long)]
    pub refine_tol: Option<f64>,
    #[arg(long)]
    pub lhs_cells: Option<usize>,
    #[arg(long)]
    pub trace_step: Option<f64>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub identity_tol: Option<f64>,
    /// Directory for coarea.json and coarea_rows.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BetaArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Ball center x1,y1,...,z; defaults to the identity.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.25)]
    pub radius: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Bilipschitz hypothesis: sup over 5D of |D_H f − id| below this.
    #[arg(long, default_value_t = 0.05)]
    pub c: f64,
    /// Also trace the fiber over this w in the unit box and report T.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub fiber_w: Option<Vec<f64>>,
    /// Finest net level of the T sum.
    #[arg(long, default_value_t = 3)]
    pub depth: i32,
    /// Ball enlargement A in the T sum; defaults to 10μ + 1 with μ = 64.
    #[arg(long)]
    pub ball_factor: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<hcoarea::Error>().map(hcoarea::Error::kind) {
        Some(ErrorKind::Assertion) => 2,
        Some(ErrorKind::Resource) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t as usize).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
