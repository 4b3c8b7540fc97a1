mod config;
mod error;
mod pipeline;
mod report;
mod tasks;

use clap::{Args, Parser, Subcommand};
use config::{check_h_grid, default_h_grid, parse_list, JobConfig};
use error::{CliError, CliResult};
use report::{write_csv, write_json};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tasks::{PhiParams, Settings, Which};

#[derive(Parser)]
#[command(name = "critrace", version, about = "Trace-formula coefficients at a critical energy level")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Absolute tolerance for checks, integrators and quadrature.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cone sample count.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Strictly decreasing h values, comma separated.
    #[arg(long = "h-grid", global = true, value_name = "H1,H2,...")]
    h_grid: Option<String>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PeriodArg {
    /// Period to study; the first total period when absent.
    #[arg(long)]
    period: Option<f64>,
}

#[derive(Args, Clone)]
struct PhiArgs {
    /// Center of the test function's transform; defaults to the period.
    #[arg(long)]
    center: Option<f64>,
    /// Half width of the support of the transform.
    #[arg(long, default_value_t = 0.5)]
    half_width: f64,
    /// Subprincipal value at the critical point; defaults to the file's value.
    #[arg(long)]
    p1: Option<f64>,
}

impl PhiArgs {
    fn params(&self) -> PhiParams {
        PhiParams { center: self.center, half_width: self.half_width, p1: self.p1 }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check that the declared point is critical with the declared normal form.
    Verify { hamiltonian: PathBuf },
    /// Integrate the Hamiltonian flow from a point.
    Flow {
        hamiltonian: PathBuf,
        /// Start point, 2n comma-separated coordinates (x…, ξ…).
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long)]
        t: f64,
    },
    /// Linearized flow at the critical point.
    Monodromy {
        hamiltonian: PathBuf,
        #[arg(long)]
        t: f64,
    },
    /// Derivative tensor of order 2–4 of the flow at the critical point.
    Jet {
        hamiltonian: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long)]
        t: f64,
    },
    /// Periods of the linearized flow in a window.
    Periods {
        hamiltonian: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        t_min: f64,
        #[arg(long, default_value_t = 20.0)]
        t_max: f64,
    },
    /// Resonances and pseudo-resonances of a frequency vector.
    Resonance {
        /// Comma-separated frequencies.
        #[arg(long, allow_hyphen_values = true)]
        w: String,
        #[arg(long, default_value_t = 3)]
        order: usize,
    },
    /// First non-vanishing R_k at a period, by the jet and integral routes.
    Rk {
        hamiltonian: PathBuf,
        #[command(flatten)]
        period: PeriodArg,
        /// Force the order instead of taking the first non-vanishing one.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Liouville mass and R_k integral over the cone of Q_T.
    Cone {
        hamiltonian: PathBuf,
        #[command(flatten)]
        period: PeriodArg,
        /// Also write the samples as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Build and verify the local normal-form charts on the cone model.
    Charts {
        hamiltonian: PathBuf,
        #[command(flatten)]
        period: PeriodArg,
    },
    /// Model integral ∫₀^∞ e^{iλr^k} b(r) dr.
    Osc {
        #[command(subcommand)]
        op: OscOp,
    },
    /// Leading trace term at a period.
    Trace {
        hamiltonian: PathBuf,
        #[command(flatten)]
        period: PeriodArg,
        #[command(flatten)]
        phi: PhiArgs,
        /// Force the definite (1) or indefinite (2) branch.
        #[arg(long)]
        branch: Option<u8>,
    },
    /// Spectral sum of the perturbed-oscillator example over an h grid (CSV).
    Spectral {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        e_c: f64,
        #[command(flatten)]
        phi: PhiArgs,
        /// Subtract the closed-form invariant-torus contribution before fitting.
        #[arg(long)]
        background: bool,
    },
    /// Run a job file.
    Run { job: PathBuf },
}

#[derive(Subcommand)]
enum OscOp {
    /// Asymptotic expansion coefficients.
    Expand {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        terms: usize,
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
    },
    /// Quadrature on a log-spaced λ grid (CSV λ, Re, Im, error).
    Quad {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1e2)]
        lambda_min: f64,
        #[arg(long, default_value_t = 1e4)]
        lambda_max: f64,
        #[arg(long, default_value_t = 12)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
    },
    /// Fit of the leading power and coefficient to quadrature values.
    Fit {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1e2)]
        lambda_min: f64,
        #[arg(long, default_value_t = 1e4)]
        lambda_max: f64,
        #[arg(long, default_value_t = 12)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
    },
}

impl Global {
    fn settings(&self) -> Settings {
        let mut s = Settings::default();
        self.apply(&mut s);
        s
    }

    fn apply(&self, s: &mut Settings) {
        if let Some(t) = self.tol {
            s.tol = t;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(n) = self.samples {
            s.samples = n;
        }
    }

    fn check(&self) -> CliResult<()> {
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(CliError::Config(format!("--tol must be positive, got {t}")));
            }
        }
        if self.samples == Some(0) {
            return Err(CliError::Config("--samples must be positive".into()));
        }
        Ok(())
    }

    fn h_grid(&self) -> CliResult<Option<Vec<f64>>> {
        match &self.h_grid {
            Some(s) => {
                let hs = parse_list(s)?;
                check_h_grid(&hs)?;
                Ok(Some(hs))
            }
            None => Ok(None),
        }
    }
}

fn numbers(s: &str) -> CliResult<Vec<f64>> {
    parse_list(s)
}

fn emit(o: tasks::Outcome, out: Option<&Path>) -> CliResult<bool> {
    write_json(&o.value, out)?;
    Ok(o.pass)
}

fn execute(cli: Cli) -> CliResult<bool> {
    let g = &cli.global;
    g.check()?;
    let s = g.settings();
    let out = g.out.as_deref();
    match cli.command {
        Command::Verify { hamiltonian } => {
            let h = tasks::load_hamiltonian(&hamiltonian)?;
            let o = tasks::verify(&h, s.tol);
            if !o.pass {
                write_json(&o.value, out)?;
                return Err(CliError::Hypothesis(o.value["message"].as_str().unwrap_or("criticality check failed").to_string()));
            }
            emit(o, out)
        }
        Command::Flow { hamiltonian, z, t } => {
            let h = tasks::load_hamiltonian(&hamiltonian)?;
            emit(tasks::flow(&h, &numbers(&z)?, t, s.tol)?, out)
        }
        Command::Monodromy { hamiltonian, t } => emit(tasks::monodromy(&tasks::load_hamiltonian(&hamiltonian)?, t), out),
        Command::Jet { hamiltonian, order, t } => {
            let h = tasks::load_hamiltonian(&hamiltonian)?;
            emit(tasks::jet(&h, order, t, s.tol)?, out)
        }
        Command::Periods { hamiltonian, t_min, t_max } => {
            let h = tasks::load_hamiltonian(&hamiltonian)?;
            emit(tasks::periods(&h, t_min, t_max, s.tol)?, out)
        }
        Command::Resonance { w, order } => emit(tasks::resonance(&numbers(&w)?, order)?, out),
        Command::Rk { hamiltonian, period, k } => {
            let h = tasks::load_hamiltonian(&hamiltonian)?;
            let p = tasks::select_period(&h, period.period, s.tol)?;
            emit(tasks::rk(&h, &p, k, s.tol)?.0, out)
        }
        Command::Cone { hamiltonian, period, dump } => {
            let h = tasks::load_hamiltonian(&hamiltonian)?;
            let p = tasks::select_period(&h, period.period, s.tol)?;
            let (_, r) = tasks::rk(&h, &p, None, s.tol)?;
            emit(tasks::cone(&p, &r, &s, dump.as_deref())?, out)
        }
        Command::Charts { hamiltonian, period } => {
            let h = tasks::load_hamiltonian(&hamiltonian)?;
            let p = tasks::select_period(&h, period.period, s.tol)?;
            let (_, r) = tasks::rk(&h, &p, None, s.tol)?;
            emit(tasks::charts(&p, &r, &s)?, out)
        }
        Command::Osc { op } => match op {
            OscOp::Expand { k, terms, half_width } => emit(tasks::osc_expand(k, terms, half_width)?, out),
            OscOp::Quad { k, lambda_min, lambda_max, points, half_width } => {
                let grid = critrace::oscillatory::log_grid(lambda_min, lambda_max, points);
                let data = tasks::osc_quad(k, &grid, half_width, s.tol)?;
                let rows: Vec<Vec<f64>> = data.iter().map(|(l, v, e)| vec![*l, v.re, v.im, *e]).collect();
                write_csv(&["lambda", "re", "im", "error"], &rows, &[], out)?;
                Ok(true)
            }
            OscOp::Fit { k, lambda_min, lambda_max, points, half_width } => {
                emit(tasks::osc_fit(k, lambda_min, lambda_max, points, half_width, s.tol)?, out)
            }
        },
        Command::Trace { hamiltonian, period, phi, branch } => {
            let h = tasks::load_hamiltonian(&hamiltonian)?;
            let p = tasks::select_period(&h, period.period, s.tol)?;
            let which = match branch {
                None => Which::Auto,
                Some(1) => Which::Definite,
                Some(2) => Which::Indefinite,
                Some(b) => return Err(CliError::Config(format!("--branch must be 1 or 2, got {b}"))),
            };
            emit(tasks::trace(&h, &p, None, &phi.params(), which, &s)?, out)
        }
        Command::Spectral { e_c, phi, background } => {
            let hs = g.h_grid()?.unwrap_or_else(default_h_grid);
            let run = tasks::spectral(e_c, &phi.params(), &hs, background)?;
            write_csv(&["h", "re_gamma", "im_gamma", "abs_gamma"], &run.rows, &run.trailer, out)?;
            Ok(run.outcome.pass)
        }
        Command::Run { job } => {
            let mut cfg = JobConfig::load(&job)?;
            g.apply(&mut cfg.settings);
            if let Some(hs) = g.h_grid()? {
                cfg.h_grid = hs;
            }
            if let Some(o) = &g.out {
                cfg.report = Some(o.clone());
            }
            let r = pipeline::run_and_write(&cfg)?;
            for f in &r.failures {
                eprintln!("critrace: {f}");
            }
            if r.hypothesis_failure {
                return Err(CliError::Hypothesis(r.failures.join("; ")));
            }
            Ok(r.pass)
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
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("critrace: some checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("critrace: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
