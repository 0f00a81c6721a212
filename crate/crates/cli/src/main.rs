//! `phs-decay`: certify, sweep, simulate and verify boundary-damped
//! port-Hamiltonian systems from the command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use phs_decay::catalog::{self, CatalogEntry};
use phs_decay::certifier::Family;
use phs_decay::io::{self as pio, CertificateFile};
use phs_decay::simulator::DEFAULT_FIT_WINDOW;
use phs_decay::system::energy_balance_residual;
use phs_decay::{
    assemble_certificate, best_certificate, discretize, fit_decay, simulate, validate_system, verify_certificate, Certificate,
    Error, MultiplierSpec, PhSystem, SimulationTrace, DEFAULT_GRID,
};

#[derive(Parser, Debug)]
#[command(name = "phs-decay", version, about = "Exponential decay certificates for boundary-damped port-Hamiltonian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the structural assumptions of a system.
    Validate {
        #[command(flatten)]
        source: Source,
        #[arg(long, env = "PHS_DECAY_GRID", default_value_t = DEFAULT_GRID)]
        grid: usize,
    },
    /// Compute a decay certificate (M, alpha).
    Certify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        cert: CertOpts,
        /// Where to write the certificate file.
        #[arg(long, default_value = "certificate.json")]
        out: PathBuf,
    },
    /// Certify once per value of a parameter and write one CSV row each.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        cert: CertOpts,
        #[arg(long, value_enum)]
        var: SweepVar,
        /// Comma-separated values; fractions such as 1/3 are accepted.
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_real)]
        values: Vec<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Simulate the closed-loop system and write the energy trace.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        cert: CertOpts,
        #[command(flatten)]
        sim: SimOpts,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Binary dump of the state snapshots.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify, simulate, and check the energy against the certified envelope.
    Verify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        cert: CertOpts,
        #[command(flatten)]
        sim: SimOpts,
        /// Use a stored certificate instead of certifying.
        #[arg(long)]
        certificate: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// List the built-in systems, or export one as JSON.
    Catalog {
        #[arg(long)]
        catalog: Option<String>,
        #[arg(long, value_parser = parse_real)]
        k: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Source {
    /// System description (JSON).
    #[arg(long, required_unless_present = "catalog", conflicts_with = "catalog")]
    system: Option<PathBuf>,
    /// Built-in system name.
    #[arg(long)]
    catalog: Option<String>,
    /// Boundary gain for catalog entries that have one.
    #[arg(long, value_parser = parse_real, requires = "catalog")]
    k: Option<f64>,
}

#[derive(Args, Debug)]
struct CertOpts {
    #[arg(long, value_enum, default_value_t = MultiplierChoice::Auto)]
    multiplier: MultiplierChoice,
    /// Fraction of min(eps0, eps1) used as eps; defaults to the catalog value, else 1/2.
    #[arg(long, value_parser = parse_real)]
    xi: Option<f64>,
    /// Exponential multiplier rate; defaults to the optimal one.
    #[arg(long, value_parser = parse_real)]
    beta: Option<f64>,
    #[arg(long, env = "PHS_DECAY_GRID", default_value_t = DEFAULT_GRID)]
    grid: usize,
}

#[derive(Args, Debug)]
struct SimOpts {
    /// Number of grid cells.
    #[arg(long = "N", default_value_t = 200)]
    cells: usize,
    #[arg(long, value_parser = parse_real, default_value = "1e-3")]
    dt: f64,
    /// Final time; defaults to 5 / alpha.
    #[arg(long = "T", value_parser = parse_real)]
    t_end: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum MultiplierChoice {
    Linear,
    Exponential,
    Affine,
    Auto,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum SweepVar {
    Xi,
    K,
    Beta,
}

impl SweepVar {
    fn name(self) -> &'static str {
        match self {
            SweepVar::Xi => "xi",
            SweepVar::K => "k",
            SweepVar::Beta => "beta",
        }
    }
}

/// A real number or an exact ratio `p/q`.
fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|e| format!("'{s}': {e}"))?;
            let q: f64 = q.trim().parse().map_err(|e| format!("'{s}': {e}"))?;
            if q == 0.0 {
                return Err(format!("'{s}': zero denominator"));
            }
            p / q
        }
        None => s.parse().map_err(|e| format!("'{s}': {e}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

/// A failed run and the exit code it maps to.
#[derive(Debug)]
enum Failure {
    Config(String),
    Validation(Vec<String>),
    Uncertifiable(Vec<String>),
    Envelope(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Uncertifiable(_) => 4,
            Failure::Envelope(_) => 5,
        }
    }

    fn report(&self) {
        match self {
            Failure::Config(m) => eprintln!("error: {m}"),
            Failure::Runtime(m) => eprintln!("error: {m}"),
            Failure::Envelope(m) => eprintln!("envelope violated: {m}"),
            Failure::Validation(fails) => {
                eprintln!("validation failed:");
                for f in fails {
                    eprintln!("  {f}");
                }
            }
            Failure::Uncertifiable(fails) => {
                eprintln!("uncertifiable:");
                for f in fails {
                    eprintln!("  {f}");
                }
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Uncertifiable { failures } => Failure::Uncertifiable(failures),
            Error::Structural(_) | Error::Parse { .. } | Error::Domain(_) => Failure::Config(e.to_string()),
            Error::Precondition(_) | Error::Numerical(_) | Error::Io(_) => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

struct Loaded {
    name: String,
    system: PhSystem,
    entry: Option<CatalogEntry>,
}

impl Loaded {
    fn xi(&self, requested: Option<f64>) -> f64 {
        requested.or(self.entry.as_ref().map(|e| e.xi)).unwrap_or(0.5)
    }
}

const GAINED: [&str; 2] = ["wave-unit", "timoshenko-inviscid"];

fn load_catalog(name: &str, k: Option<f64>) -> Result<CatalogEntry, Failure> {
    if k.is_some() && !GAINED.contains(&name) {
        return Err(Failure::Config(format!("catalog entry '{name}' has no adjustable gain k")));
    }
    Ok(catalog::by_name(name, k)?)
}

fn load(source: &Source) -> Result<Loaded, Failure> {
    match (&source.system, &source.catalog) {
        (Some(path), _) => {
            let system = pio::read_system(path).map_err(|e| Failure::Config(e.to_string()))?;
            Ok(Loaded { name: path.display().to_string(), system, entry: None })
        }
        (None, Some(name)) => {
            let entry = load_catalog(name, source.k)?;
            Ok(Loaded { name: entry.name.clone(), system: entry.system.clone(), entry: Some(entry) })
        }
        (None, None) => Err(Failure::Config("one of --system or --catalog is required".into())),
    }
}

fn validated(source: &Source, grid: usize) -> Result<Loaded, Failure> {
    let loaded = load(source)?;
    require_valid(&loaded.system, grid)?;
    Ok(loaded)
}

fn require_valid(sys: &PhSystem, grid: usize) -> Outcome {
    let report = validate_system(sys, grid)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation(report.failures().iter().map(|c| format!("{}: {}", c.name, c.detail)).collect()))
    }
}

fn certify(sys: &PhSystem, choice: MultiplierChoice, xi: f64, beta: Option<f64>, grid: usize) -> Result<Certificate, Failure> {
    let families: &[Family] = match (choice, beta) {
        (MultiplierChoice::Exponential | MultiplierChoice::Auto, Some(b)) => {
            return Ok(assemble_certificate(sys, &MultiplierSpec::exponential(b), xi, grid)?);
        }
        (_, Some(_)) => return Err(Failure::Config("--beta applies only to the exponential multiplier".into())),
        (MultiplierChoice::Linear, None) => {
            return Ok(assemble_certificate(sys, &MultiplierSpec::linear(sys.a), xi, grid)?);
        }
        (MultiplierChoice::Exponential, None) => &[Family::Exponential],
        (MultiplierChoice::Affine, None) => &[Family::Affine],
        (MultiplierChoice::Auto, None) => &Family::ALL,
    };
    Ok(best_certificate(sys, xi, families, grid)?)
}

fn certify_loaded(loaded: &Loaded, opts: &CertOpts) -> Result<Certificate, Failure> {
    certify(&loaded.system, opts.multiplier, loaded.xi(opts.xi), opts.beta, opts.grid)
}

/// Writes data to `path`, or to stdout when there is none.
fn data_sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Human-readable lines go to stdout unless stdout carries data.
fn say(data_on_stdout: bool, text: &str) {
    if data_on_stdout {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
}

fn run_validate(source: &Source, grid: usize) -> Outcome {
    let loaded = load(source)?;
    let report = validate_system(&loaded.system, grid)?;
    for c in &report.checks {
        println!("{:<4} {:<24} {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    require_valid(&loaded.system, grid)
}

fn run_certify(source: &Source, opts: &CertOpts, out: &Path) -> Outcome {
    let loaded = validated(source, opts.grid)?;
    let cert = certify_loaded(&loaded, opts)?;
    print!("{}", pio::certificate_summary(&loaded.name, &cert));
    let file = CertificateFile::new(&loaded.name, &loaded.system, cert);
    let mut f = create(out)?;
    writeln!(f, "{}", file.to_json())?;
    println!("certificate written to {}", out.display());
    Ok(())
}

fn run_sweep(source: &Source, opts: &CertOpts, var: SweepVar, values: &[f64], csv: Option<&Path>) -> Outcome {
    let base = validated(source, opts.grid)?;
    if var == SweepVar::K && base.entry.as_ref().map_or(true, |e| !GAINED.contains(&e.name.as_str())) {
        return Err(Failure::Config(format!("--var k needs one of the catalog entries {}", GAINED.join(", "))));
    }
    if var == SweepVar::Beta && !matches!(opts.multiplier, MultiplierChoice::Exponential | MultiplierChoice::Auto) {
        return Err(Failure::Config("--var beta sweeps the exponential multiplier".into()));
    }
    let xi = base.xi(opts.xi);

    let rows: Vec<Result<(f64, Certificate), Failure>> = values
        .par_iter()
        .map(|&v| {
            let cert = match var {
                SweepVar::Xi => certify(&base.system, opts.multiplier, v, opts.beta, opts.grid),
                SweepVar::Beta => certify(&base.system, MultiplierChoice::Exponential, xi, Some(v), opts.grid),
                SweepVar::K => {
                    let entry = load_catalog(&base.name, Some(v))?;
                    require_valid(&entry.system, opts.grid)?;
                    certify(&entry.system, opts.multiplier, xi, opts.beta, opts.grid)
                }
            };
            cert.map(|c| (v, c)).map_err(|f| match f {
                Failure::Uncertifiable(msgs) => {
                    Failure::Uncertifiable(msgs.into_iter().map(|m| format!("{} = {v}: {m}", var.name())).collect())
                }
                other => other,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    pio::write_sweep_csv(data_sink(csv)?, &rows)?;
    say(csv.is_none(), &format!("{} rows over {} written\n", rows.len(), var.name()));
    Ok(())
}

/// Simulate with `T` taken from the options or from `5 / alpha`.
fn run_simulation(sys: &PhSystem, sim: &SimOpts, alpha: Option<f64>) -> Result<SimulationTrace, Failure> {
    let t_end = match (sim.t_end, alpha) {
        (Some(t), _) => t,
        (None, Some(a)) => 5.0 / a,
        (None, None) => return Err(Failure::Config("--T is required when no certificate is available".into())),
    };
    let disc = discretize(sys, sim.cells)?;
    Ok(simulate(&disc, &disc.default_initial_state(), t_end, sim.dt)?)
}

fn trace_summary(sys: &PhSystem, trace: &SimulationTrace) -> Result<String, Failure> {
    let h0 = trace.energy[0];
    let residual = energy_balance_residual(sys, trace)?.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let mut s = format!(
        "steps {}  T {:.6}  H(0) {:.6e}  H(T) {:.6e}  residual {:.3e} H0\n",
        trace.times.len() - 1,
        trace.final_time(),
        h0,
        trace.energy.last().unwrap(),
        residual / h0
    );
    if let Ok(fit) = fit_decay(trace, DEFAULT_FIT_WINDOW) {
        s.push_str(&format!(
            "alpha_emp {:.6} (r^2 {:.4}, {} points{})\n",
            fit.alpha_emp,
            fit.r_squared,
            fit.points,
            if fit.truncated { ", truncated at numerical zero" } else { "" }
        ));
    }
    Ok(s)
}

fn run_simulate(source: &Source, opts: &CertOpts, sim: &SimOpts, csv: Option<&Path>, out: Option<&Path>) -> Outcome {
    let loaded = validated(source, opts.grid)?;
    let alpha = match sim.t_end {
        Some(_) => None,
        None => Some(certify_loaded(&loaded, opts)?.alpha),
    };
    let trace = run_simulation(&loaded.system, sim, alpha)?;
    pio::write_trace_csv(data_sink(csv)?, &trace)?;
    if let Some(p) = out {
        pio::write_state_dump(BufWriter::new(create(p)?), &trace)?;
    }
    say(csv.is_none(), &trace_summary(&loaded.system, &trace)?);
    Ok(())
}

fn run_verify(source: &Source, opts: &CertOpts, sim: &SimOpts, stored: Option<&Path>, csv: Option<&Path>) -> Outcome {
    let loaded = validated(source, opts.grid)?;
    let cert = match stored {
        Some(path) => {
            let file = CertificateFile::read(path).map_err(|e| Failure::Config(e.to_string()))?;
            if file.system_sha256 != pio::system_hash(&loaded.system) {
                return Err(Failure::Config(format!(
                    "{} was issued for system '{}', not {}",
                    path.display(),
                    file.system,
                    loaded.name
                )));
            }
            file.certificate
        }
        None => certify_loaded(&loaded, opts)?,
    };
    let trace = run_simulation(&loaded.system, sim, Some(cert.alpha))?;
    if let Some(p) = csv {
        pio::write_trace_csv(BufWriter::new(create(p)?), &trace)?;
    }
    let check = verify_certificate(&cert, &trace);
    println!("system      {}", loaded.name);
    println!("certificate M={:.10} alpha={:.10}", cert.overshoot, cert.alpha);
    print!("{}", trace_summary(&loaded.system, &trace)?);
    println!("envelope    max violation {:.6e} at t = {:.6}", check.max_violation, check.at_time);
    if check.passed {
        println!("verified");
        Ok(())
    } else {
        Err(Failure::Envelope(format!(
            "H(t) exceeds {:.6} exp(-{:.6} t) H(0) by {:.6e} (relative) at t = {:.6}",
            cert.overshoot, cert.alpha, check.max_violation, check.at_time
        )))
    }
}

fn run_catalog(name: Option<&str>, k: Option<f64>, out: Option<&Path>) -> Outcome {
    let Some(name) = name else {
        for name in catalog::NAMES {
            let e = catalog::by_name(name, None)?;
            println!("{name}  (n = {}, [{}, {}], xi = {})", e.system.n, e.system.a, e.system.b, e.xi);
            for x in &e.expected {
                println!("    {:<18} {:<20} {}", x.quantity, x.value, x.note);
            }
        }
        return Ok(());
    };
    let entry = load_catalog(name, k)?;
    let mut sink = data_sink(out)?;
    writeln!(sink, "{}", pio::system_to_json(&entry.system))?;
    sink.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Validate { source, grid } => run_validate(source, *grid),
        Command::Certify { source, cert, out } => run_certify(source, cert, out),
        Command::Sweep { source, cert, var, values, csv } => run_sweep(source, cert, *var, values, csv.as_deref()),
        Command::Simulate { source, cert, sim, csv, out } => run_simulate(source, cert, sim, csv.as_deref(), out.as_deref()),
        Command::Verify { source, cert, sim, certificate, csv } => {
            run_verify(source, cert, sim, certificate.as_deref(), csv.as_deref())
        }
        Command::Catalog { catalog, k, out } => run_catalog(catalog.as_deref(), *k, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code())
        }
    }
}
