//! Command-line front end: solve-and-diagnose, mesh audit, adaptation, and
//! nondimensional-number reports.
//!
//! Exit codes: 0 = success / all checks pass, 1 = a principled check failed
//! (mesh criterion violated, adaptation not converged), 2 = input error,
//! 3 = numerical or backend error. Principle violations found by `solve`
//! are data, not failures.

mod manifest;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "dmpmesh", version, about = "Galerkin FEM with discrete-maximum-principle verification and metric-based mesh adaptation", long_about = None)]
struct Cli {
    /// Worker threads for element-parallel loops (0 = library default);
    /// results are independent of the thread count
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonInputs {
    /// Mesh file (.msh = MSH 2.2 ASCII, .node/.ele = Triangle pair)
    #[arg(long)]
    mesh: PathBuf,
    /// Problem-spec JSON file
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Criterion {
    /// anisotropic non-obtuse angle condition (per element)
    Nonobtuse,
    /// generalized Delaunay-type angle condition (per interior edge)
    Delaunay,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble, solve, and verify discrete principles; writes VTK + JSON +
    /// CSV reports
    Solve {
        #[command(flatten)]
        inputs: CommonInputs,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Physical bounds "lo,hi" for violation percentages
        #[arg(long)]
        bounds: Option<String>,
        /// Dense cap for the exact matrix-level verdicts
        #[arg(long, default_value_t = dmpmesh::principles::DEFAULT_DENSE_CAP)]
        dense_cap: usize,
    },
    /// Check a mesh-restriction criterion; exit 0 iff 100% pass
    CheckMesh {
        #[command(flatten)]
        inputs: CommonInputs,
        #[arg(long, value_enum, default_value_t = Criterion::Nonobtuse)]
        criterion: Criterion,
        /// Output directory for the margin VTK + JSON report
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Iteratively adapt the mesh until the criterion holds; exit 0 iff
    /// converged
    Adapt {
        #[command(flatten)]
        inputs: CommonInputs,
        #[arg(long, value_enum, default_value_t = Criterion::Nonobtuse)]
        criterion: Criterion,
        /// Maximum adaptation iterations
        #[arg(long, default_value_t = 50)]
        max_iters: usize,
        /// Constant metric scale Theta (mutually exclusive with
        /// --target-count)
        #[arg(long)]
        theta: Option<f64>,
        /// Calibrate Theta for this many elements
        #[arg(long)]
        target_count: Option<usize>,
        /// Remesher backend: "builtin" or "external:<command template>"
        /// with {background_mesh} {metric_file} {output_mesh} placeholders
        #[arg(long, default_value = "builtin")]
        backend: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Report element/edge/global and physics-based Peclet and Damkohler
    /// numbers
    Numbers {
        #[command(flatten)]
        inputs: CommonInputs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // deterministic reductions keep results independent of this
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("dmpmesh: failed to configure thread pool: {err}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Solve {
            inputs,
            out,
            bounds,
            dense_cap,
        } => run::cmd_solve(
            &inputs.mesh,
            &inputs.spec,
            &out,
            bounds.as_deref(),
            dense_cap,
        ),
        Command::CheckMesh {
            inputs,
            criterion,
            out,
        } => run::cmd_check_mesh(&inputs.mesh, &inputs.spec, criterion.into(), &out),
        Command::Adapt {
            inputs,
            criterion,
            max_iters,
            theta,
            target_count,
            backend,
            out,
        } => run::cmd_adapt(
            &inputs.mesh,
            &inputs.spec,
            criterion.into(),
            max_iters,
            theta,
            target_count,
            &backend,
            &out,
        ),
        Command::Numbers { inputs, out } => run::cmd_numbers(&inputs.mesh, &inputs.spec, &out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("dmpmesh: {err}");
            ExitCode::from(run::exit_code_for(&err))
        }
    }
}

impl From<Criterion> for dmpmesh::adapt::StopCriterion {
    fn from(c: Criterion) -> Self {
        match c {
            Criterion::Nonobtuse => dmpmesh::adapt::StopCriterion::AnisotropicNonobtuse,
            Criterion::Delaunay => dmpmesh::adapt::StopCriterion::GeneralizedDelaunay,
        }
    }
}
