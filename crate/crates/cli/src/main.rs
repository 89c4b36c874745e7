use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cepkit::io::save_instance;
use cepkit::oracle::{generate, Generator};
use cepkit::report::Method;
use cepkit::solver::{Backend, SOLVER_BIN_ENV};
use cepkit_cli::{cmd_compare_flexibility, cmd_solve, cmd_validate, parse_variant, FlexVariant, RunManifest};

#[derive(Parser)]
#[command(name = "cepkit", version, about = "Stochastic capacity expansion planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ef,
    Pha,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Inproc,
    Subprocess,
}

#[derive(clap::Args)]
struct SolverArgs {
    /// Solver time limit per solve, seconds.
    #[arg(long, default_value_t = 1800.0)]
    time_limit: f64,
    #[arg(long, value_enum, default_value = "inproc")]
    solver: SolverArg,
    /// External HiGHS-compatible binary for `--solver subprocess`.
    #[arg(long, env = SOLVER_BIN_ENV)]
    solver_bin: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> cepkit::solver::SolverConfig {
        cepkit::solver::SolverConfig {
            backend: match self.solver {
                SolverArg::Inproc => Backend::InProcess,
                SolverArg::Subprocess => Backend::Subprocess {
                    binary: self.solver_bin.clone(),
                },
            },
            time_limit_s: self.time_limit,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file and list its violations.
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Solve an instance and write the report directory.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "ef")]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
        /// Relative gap: MIP gap for the extensive form, bound-gap stop for the decomposition.
        #[arg(long)]
        gap: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Solve the decomposition with integer columns relaxed.
        #[arg(long)]
        relax: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve the extensive form once per tier variant of a load tech.
    CompareFlexibility {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        load_tech: String,
        /// `name=u1,u2,...:phi1,phi2,...`, repeatable, in table order.
        #[arg(long = "variant", required = true, value_parser = parse_variant)]
        variants: Vec<FlexVariant>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Write a synthetic oracle instance.
    Generate {
        #[arg(long)]
        generator: Generator,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    let code = match cli.command {
        Command::Validate { instance } => cmd_validate(&instance, &mut stdout),
        Command::Solve {
            instance,
            method,
            out,
            gap,
            rho,
            beta,
            max_iters,
            relax,
            solver,
        } => {
            let method = match method {
                MethodArg::Ef => Method::Ef,
                MethodArg::Pha => Method::Pha,
            };
            let mut m = RunManifest::new(instance, method, out);
            m.seed = solver.seed;
            m.solver = solver.config();
            if let Some(g) = gap {
                match method {
                    Method::Ef => m.solver.mip_gap = g,
                    Method::Pha => m.pha.gap_tol = g,
                }
            }
            m.pha.rho = rho;
            m.pha.beta = beta;
            if let Some(k) = max_iters {
                m.pha.max_iters = k;
            }
            m.pha.relax_integrality = relax;
            cmd_solve(&m, &mut stdout)
        }
        Command::CompareFlexibility {
            instance,
            load_tech,
            variants,
            solver,
        } => match cmd_compare_flexibility(&instance, &load_tech, &variants, &solver.config()) {
            Ok(table) => {
                let _ = stdout.write_all(table.to_text().as_bytes());
                0
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                cepkit_cli::EXIT_INVALID
            }
        },
        Command::Generate { generator, seed, out } => match save_instance(&generate(generator, seed), &out) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                cepkit_cli::EXIT_IO
            }
        },
    };
    ExitCode::from(code as u8)
}
