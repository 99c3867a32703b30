//! `archkernel` command-line front end.
//!
//! Results go to stdout as CSV or JSON. Usage errors exit with status 2,
//! library errors with status 1 and a JSON object `{"error", "message"}` on
//! stderr. `ARCHKERNEL_THREADS` caps the worker pool.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use archkernel::conditional::{box_mixture_identity_check, log_convexity_check, mixture_identity_check};
use archkernel::estimation::{estimate_conditional_zeta, fit_mle, fit_tau_inversion};
use archkernel::experiment::run_file;
use archkernel::fmt::g12;
use archkernel::metrics::{kernel_metric, kernel_metrics, zeta1, zeta1_conditional, KernelMetric};
use archkernel::sampling::{sample, sample_conditional};
use archkernel::{ArchimedeanCopula, ConditionalCopula, Error, FamilyId, GeneratorSpec, IntegrationSpec, SampleMatrix};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "archkernel", version, about = "Markov kernels and conditional copulas of Archimedean copulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CopulaArgs {
    /// independence, gumbel, clayton, frank or clayton-boundary.
    #[arg(long)]
    family: FamilyId,
    /// Family parameter (not needed for independence and clayton-boundary).
    #[arg(long)]
    theta: Option<f64>,
    /// Dimension of the copula.
    #[arg(long, default_value_t = 3)]
    dim: usize,
}

impl CopulaArgs {
    fn build(&self) -> archkernel::Result<ArchimedeanCopula> {
        let spec = GeneratorSpec { family: self.family, theta: self.theta, dim: self.dim };
        Ok(ArchimedeanCopula::new(spec.build()?))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Gauss,
    Mc,
}

#[derive(Args, Clone)]
struct IntegrationArgs {
    /// Tensor Gauss-Legendre quadrature or Monte Carlo.
    #[arg(long, value_enum, default_value = "mc")]
    method: Method,
    /// Nodes per axis (gauss, default 64) or sample size (mc, default 100000).
    #[arg(long)]
    points: Option<usize>,
    /// Seed of the Monte Carlo streams; required with `--method mc`.
    #[arg(long)]
    seed: Option<u64>,
}

impl IntegrationArgs {
    fn spec(&self) -> IntegrationSpec {
        match self.method {
            Method::Gauss => IntegrationSpec::gauss(self.points.unwrap_or(64)),
            Method::Mc => {
                let Some(seed) = self.seed else {
                    Cli::command()
                        .error(ErrorKind::MissingRequiredArgument, "--seed is required for Monte Carlo integration")
                        .exit()
                };
                IntegrationSpec::monte_carlo(self.points.unwrap_or(100_000), seed)
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    /// Sign pattern and convexity of the generator derivatives on a grid.
    DMonotone,
    /// Log-convexity of the top derivative, which makes every conditional copula conditionally increasing.
    LogConvex,
    /// Mixture identity of the conditional generators (box version with `--x`).
    Mixture,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMethod {
    Mle,
    Tau,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an exact sample, as CSV, from a copula or one of its conditional copulas.
    Sample {
        #[command(flatten)]
        copula: CopulaArgs,
        /// Sample size.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Conditioning point (comma list); samples the conditional copula instead.
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the l-Markov kernel K(x, [0, y]) as CSV rows (x..., y..., value, branch).
    Kernel {
        #[command(flatten)]
        copula: CopulaArgs,
        /// Number of conditioning coordinates.
        #[arg(long, default_value_t = 1)]
        l: usize,
        /// Conditioning point, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        /// Target point, comma separated; repeat for several rows.
        #[arg(long, required = true)]
        y: Vec<String>,
    },
    /// Tabulate the generator and the normalized conditional generators as CSV.
    CondGen {
        #[command(flatten)]
        copula: CopulaArgs,
        /// Number of conditioning coordinates; each x value is used on the diagonal.
        #[arg(long, default_value_t = 1)]
        l: usize,
        /// Conditioning values, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        /// Tabulate the box-conditional generators psi(z + phi(x)) / x instead.
        #[arg(long = "box")]
        box_conditional: bool,
        #[arg(long, default_value_t = 10.0)]
        z_max: f64,
        #[arg(long, default_value_t = 201)]
        z_points: usize,
    },
    /// zeta_1 of the copula, as JSON.
    Zeta1 {
        #[command(flatten)]
        copula: CopulaArgs,
        #[command(flatten)]
        integration: IntegrationArgs,
    },
    /// zeta_1 of the conditional copula at x, as JSON.
    Zeta1x {
        #[command(flatten)]
        copula: CopulaArgs,
        /// Conditioning point, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[command(flatten)]
        integration: IntegrationArgs,
    },
    /// Fit a family to a sample CSV, optionally with conditional zeta_1 estimates.
    Fit {
        /// Sample CSV as written by `sample`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        family: FamilyId,
        #[arg(long, value_enum, default_value = "mle")]
        method: FitMethod,
        /// Conditioning values at which to estimate zeta_1^x (diagonal when l > 1).
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        l: usize,
        /// Gauss-Legendre nodes for the zeta_1^x estimates.
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
    /// Kernel metrics between two copulas of the same dimension, as JSON.
    Metric {
        #[command(flatten)]
        copula: CopulaArgs,
        /// Family of the second copula (defaults to the first one).
        #[arg(long)]
        family_b: Option<FamilyId>,
        /// Parameter of the second copula.
        #[arg(long)]
        theta_b: Option<f64>,
        /// D1, D2 or Dinf; all three when absent.
        #[arg(long)]
        metric: Option<KernelMetric>,
        /// Gauss-Legendre nodes per axis.
        #[arg(long, default_value_t = 32)]
        points: usize,
    },
    /// Structural checks of a generator, as JSON with a pass/fail status.
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
        #[command(flatten)]
        copula: CopulaArgs,
        #[arg(long, default_value_t = 0.05)]
        z_min: f64,
        #[arg(long, default_value_t = 20.0)]
        z_max: f64,
        #[arg(long, default_value_t = 400)]
        z_points: usize,
        /// Conditioning point for the box mixture identity.
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
    },
    /// Run an experiment described by a JSON config and print its manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_list(s: &str) -> archkernel::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::InvalidConfig(format!("bad number {t:?}: {e}"))))
        .collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn print_json(v: &Value) -> archkernel::Result<()> {
    writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn write_rows(header: &[String], rows: &[Vec<String>]) -> archkernel::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        writeln!(out, "{}", r.join(","))?;
    }
    Ok(())
}

fn execute(cmd: Command) -> archkernel::Result<()> {
    match cmd {
        Command::Sample { copula, n, seed, x, out } => {
            let c = copula.build()?;
            let s = if x.is_empty() { sample(&c, n, seed)? } else { sample_conditional(&ConditionalCopula::new(&c, &x)?, n, seed)? };
            match out {
                Some(path) => s.write_csv(io::BufWriter::new(File::create(path)?))?,
                None => s.write_csv(io::stdout().lock())?,
            }
        }
        Command::Kernel { copula, l, x, y } => {
            let c = copula.build()?;
            if x.len() != l {
                return Err(Error::DimensionMismatch(format!("--x has {} values, --l is {l}", x.len())));
            }
            let mut header: Vec<String> = (1..=l).map(|i| format!("x{i}")).collect();
            header.extend((l + 1..=copula.dim).map(|i| format!("y{i}")));
            header.extend(["value".to_string(), "branch".to_string()]);
            let mut rows = Vec::new();
            for ys in &y {
                let ys = parse_list(ys)?;
                let e = c.kernel_cdf(&x, &ys)?;
                let mut row: Vec<String> = x.iter().chain(&ys).map(|v| g12(*v)).collect();
                row.push(g12(e.value));
                row.push(e.branch.name().to_string());
                rows.push(row);
            }
            write_rows(&header, &rows)?;
        }
        Command::CondGen { copula, l, x, box_conditional, z_max, z_points } => {
            let c = copula.build()?;
            let zs = linspace(0.0, z_max, z_points);
            let mut header = vec!["z".to_string(), "psi".to_string()];
            let mut columns = Vec::new();
            for &xv in &x {
                let point = vec![xv; l];
                if box_conditional {
                    header.push(format!("psi_box_{}", g12(xv)));
                    columns.push(
                        zs.iter()
                            .map(|&z| archkernel::conditional::box_conditional_generator(&c, &point, z))
                            .collect::<archkernel::Result<Vec<_>>>()?,
                    );
                } else {
                    header.push(format!("psi_x_{}", g12(xv)));
                    let g = ConditionalCopula::new(&c, &point)?.normalized_generator()?;
                    columns.push(zs.iter().map(|&z| g.psi(z)).collect::<archkernel::Result<Vec<_>>>()?);
                }
            }
            let mut rows = Vec::with_capacity(zs.len());
            for (i, &z) in zs.iter().enumerate() {
                let mut row = vec![g12(z), g12(c.generator().psi(z)?)];
                row.extend(columns.iter().map(|col| g12(col[i])));
                rows.push(row);
            }
            write_rows(&header, &rows)?;
        }
        Command::Zeta1 { copula, integration } => {
            let e = zeta1(&copula.build()?, &integration.spec())?;
            print_json(&serde_json::to_value(e)?)?;
        }
        Command::Zeta1x { copula, x, integration } => {
            let e = zeta1_conditional(&copula.build()?, &x, &integration.spec())?;
            print_json(&serde_json::to_value(e)?)?;
        }
        Command::Fit { input, family, method, x, l, points } => {
            let s = SampleMatrix::read_csv(BufReader::new(File::open(input)?))?;
            let fit = match method {
                FitMethod::Mle => fit_mle(family, s.d, &s)?,
                FitMethod::Tau => fit_tau_inversion(family, s.d, &s)?,
            };
            let mut out = json!({ "fit": fit });
            if !x.is_empty() {
                let grid: Vec<Vec<f64>> = x.iter().map(|&v| vec![v; l]).collect();
                let table = estimate_conditional_zeta(&s, family, &grid, &IntegrationSpec::gauss(points))?;
                out["fit"] = serde_json::to_value(&table.fit)?;
                out["zeta1x"] = serde_json::to_value(&table.rows)?;
            }
            print_json(&out)?;
        }
        Command::Metric { copula, family_b, theta_b, metric, points } => {
            let a = copula.build()?;
            let b = CopulaArgs { family: family_b.unwrap_or(copula.family), theta: theta_b.or(copula.theta), dim: copula.dim }.build()?;
            let spec = IntegrationSpec::gauss(points);
            let v = match metric {
                Some(m) => json!({ "metric": m, "value": kernel_metric(&a, &b, m, &spec)? }),
                None => serde_json::to_value(kernel_metrics(&a, &b, &spec)?)?,
            };
            print_json(&v)?;
        }
        Command::Check { kind, copula, z_min, z_max, z_points, x } => {
            let c = copula.build()?;
            let grid = linspace(z_min, z_max, z_points);
            let v = match kind {
                CheckKind::DMonotone => {
                    let r = c.generator().validate_d_monotone(&grid);
                    json!({ "check": "d-monotone", "status": if r.passed { "pass" } else { "fail" }, "report": r })
                }
                CheckKind::LogConvex => {
                    let r = log_convexity_check(&c, copula.dim - 1, &grid);
                    json!({ "check": "log-convex", "status": r.status, "report": r })
                }
                CheckKind::Mixture => {
                    let zs = linspace(0.5, 5.0, 10);
                    let spec = IntegrationSpec::gauss(64);
                    let r = if x.is_empty() { mixture_identity_check(&c, 1, &zs, &spec)? } else { box_mixture_identity_check(&c, &x, &zs, &spec)? };
                    json!({ "check": "mixture", "status": if r.passed { "pass" } else { "fail" }, "report": r })
                }
            };
            print_json(&v)?;
        }
        Command::Run { config } => {
            let r = run_file(&config)?;
            print_json(&serde_json::to_value(r)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("ARCHKERNEL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Only fails if a global pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`| head`) is not a failure of the computation.
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(1)
        }
    }
}
