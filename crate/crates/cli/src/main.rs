use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use delab_cli::{
    best_constant, convergence, convergence_table, parse_params, run_suite, run_transform, CliError, FieldSource,
    Quantity, RunConfig, TransformOp, CONSTANT_HEADER,
    truncation,
};

#[derive(Parser)]
#[command(name = "delab", version, about = "Numerical checks for a weighted degenerate elliptic equation")]
struct Cli {
    /// Worker threads; falls back to DELAB_THREADS, then the rayon default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 5.0 / 3.0)]
    s: f64,
    /// Cells per axis.
    #[arg(long, default_value_t = 32)]
    grid: usize,
    /// Box half-width.
    #[arg(long = "L", default_value_t = 8.0)]
    l: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a check suite: exponents, transforms, pohozaev, kazdan-warner, probes or all.
    Check {
        suite: String,
        #[command(flatten)]
        common: Common,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discrete Rayleigh quotient minimum over comma-separated alpha and s lists (CSV on stdout).
    BestConstant {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1.6666666666666667")]
        s: Vec<f64>,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long = "L", default_value_t = 8.0)]
        l: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
    },
    /// Apply a comma-separated chain of kelvin, invert, hardy, lift, ball or sample.
    Transform {
        #[arg(long, value_delimiter = ',', required = true)]
        op: Vec<String>,
        /// Input field file (AWF1 or .csv).
        #[arg(long = "in", conflicts_with = "field")]
        input: Option<PathBuf>,
        /// Closed-form input: U, power:<l> or const:<c>.
        #[arg(long)]
        field: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Residual table under grid refinement, or under box growth with --halfwidths.
    Convergence {
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        grids: Vec<usize>,
        /// Sweep the box half-width at the spacing set by --grid and --L instead of refining.
        #[arg(long, value_delimiter = ',')]
        halfwidths: Option<Vec<f64>>,
        /// annulus-residual, explicit-residual, pohozaev-residual or kazdan-warner-radial.
        #[arg(long, default_value = "explicit-residual")]
        quantity: String,
        #[command(flatten)]
        common: Common,
    },
}

fn config(c: &Common) -> Result<RunConfig, CliError> {
    Ok(RunConfig { params: parse_params(c.n, c.alpha, c.s)?, grid: c.grid, half_width: c.l, seed: c.seed })
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.cmd {
        Cmd::Check { suite, common, out } => {
            let report = run_suite(&suite, &config(&common)?)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            match out {
                Some(path) => std::fs::write(&path, json + "\n")
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
                None => println!("{json}"),
            }
            for c in report.checks.iter().filter(|c| !c.pass) {
                eprintln!("FAIL {}: value {} expected {} tol {}", c.name, c.value, c.expected, c.tol);
            }
            Ok(report.passed())
        }
        Cmd::BestConstant { n, alpha, s, grid, l, seed, max_iters } => {
            let rows = best_constant(n, &alpha, &s, grid, l, seed, max_iters)?;
            println!("{CONSTANT_HEADER}");
            for r in &rows {
                println!("{}", r.csv());
            }
            Ok(rows.iter().any(|r| r.rayleigh.is_finite()))
        }
        Cmd::Transform { op, input, field, lambda, out, common } => {
            let ops = op.iter().map(|o| o.parse()).collect::<Result<Vec<TransformOp>, _>>()?;
            let source = match (input, field) {
                (Some(p), None) => FieldSource::File(p),
                (None, Some(f)) => FieldSource::Analytic(f),
                _ => return Err(CliError::Usage("exactly one of --in or --field is required".into())),
            };
            let report = run_transform(&source, &ops, lambda, &config(&common)?, &out)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(true)
        }
        Cmd::Convergence { grids, halfwidths, quantity, common } => {
            let q: Quantity = quantity.parse()?;
            let cfg = config(&common)?;
            let table = match halfwidths {
                Some(ls) => convergence_table(&truncation(&ls, q, &cfg)?, "rel_change"),
                None => convergence_table(&convergence(&grids, q, &cfg)?, "order"),
            };
            print!("{table}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var("DELAB_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
