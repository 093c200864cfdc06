use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nonlocal::cli::{exit_code, parse_job, run, write_outputs, Overrides};
use nonlocal::Error;

/// Nonlocal and fractional vector calculus: constants, operators, equivalence kernels,
/// Green identities and volume-constrained solves, driven by JSON job files.
///
/// Every run writes its output atomically next to `<stem>.manifest.json` (job hash, seed,
/// thread count, versions, output hashes). Floats are written with 17 significant digits.
/// Exit status: 0 success, 1 quadrature or coercivity failure, 2 bad job or arguments.
#[derive(Parser)]
#[command(name = "nonlocal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON job file.
    #[arg(long)]
    job: PathBuf,
    /// Output path; defaults to the job's `output`, then `<subcommand>.<csv|json>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for Monte Carlo oracles; overrides the job's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "NONLOCAL_THREADS")]
    threads: Option<usize>,
    /// Relative quadrature tolerance; overrides the job's `quadrature.rel_tol`.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Named constants against their oracles.
    /// CSV: name,n,s_or_beta,lambda_r,value,oracle,rel_err,method,pass
    Constants(Common),
    /// Apply an operator at points.
    /// CSV: point,value,error_estimate (coordinates and vector components joined by ';')
    Apply(Common),
    /// Equivalence kernel at radii.
    /// CSV: radius,two_gamma_eq,closed_form,rel_err,error_estimate
    Eqkernel(Common),
    /// Check a Green identity; JSON report with `pass`.
    Green {
        #[command(flatten)]
        common: Common,
        /// unweighted, weighted, variational, fractional, fractional_dipierro,
        /// reconciliation or set_decomposition.
        #[arg(long)]
        identity: Option<String>,
    },
    /// Assemble and solve a volume-constrained problem.
    /// CSV: node,value,free; report in `<stem>.report.json`
    Solve(Common),
    /// Truncation gaps of the fractional gradient against their bounds.
    /// CSV: delta,measured_L2,bound_L2,measured_pointwise,bound_pointwise,l2_pass,pointwise_pass;
    /// fitted slope in `<stem>.summary.json`
    Converge(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, identity) = match cli.command {
        Command::Constants(c) => ("constants", c, None),
        Command::Apply(c) => ("apply", c, None),
        Command::Eqkernel(c) => ("eqkernel", c, None),
        Command::Green { common, identity } => ("green", common, identity),
        Command::Solve(c) => ("solve", c, None),
        Command::Converge(c) => ("converge", c, None),
    };
    match execute(name, &common, identity) {
        Ok(pass) => {
            if pass == Some(false) {
                eprintln!("{name}: completed; some checks did not pass (see output)");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nonlocal {name}: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn execute(name: &str, c: &Common, identity: Option<String>) -> Result<Option<bool>, Error> {
    if let Some(t) = c.threads {
        if t == 0 {
            return Err(Error::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    let bytes = std::fs::read(&c.job).map_err(|e| Error::config(format!("cannot read {}: {e}", c.job.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::config("job file is not UTF-8"))?;
    let job = parse_job(&text)?;
    let ov = Overrides {
        seed: c.seed,
        tol: c.tol,
        identity,
        base: c.job.parent().map(|p| p.to_path_buf()),
    };
    let art = run(name, &job, &ov)?;
    let out = c
        .out
        .clone()
        .or(job.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{name}.{}", art.extension)));
    for p in write_outputs(&out, &art, &bytes, rayon::current_num_threads(), c.tol)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(art.pass)
}
