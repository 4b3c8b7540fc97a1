//! The `run` subcommand: execute the tasks of a job file in order and
//! collect one report.

use crate::config::{JobConfig, Task};
use crate::error::{CliError, CliResult};
use crate::report::{write_csv, write_json};
use crate::tasks::{self, Outcome, Which};
use critrace::periods::PeriodRecord;
use critrace::rk_cone::HomogForm;
use critrace::symbol::Hamiltonian;
use serde_json::{json, Map, Value};

pub struct RunResult {
    pub report: Value,
    /// Every task ran and every check passed.
    pub pass: bool,
    /// One line per failed task or check.
    pub failures: Vec<String>,
    /// Some failure came from a violated hypothesis or wrong branch.
    pub hypothesis_failure: bool,
}

/// Lazily computed shared inputs; errors are kept so dependent tasks report them.
struct Context<'a> {
    cfg: &'a JobConfig,
    ham: Option<Hamiltonian>,
    period: Option<Result<PeriodRecord, String>>,
    rk: Option<Result<(Outcome, HomogForm), String>>,
}

impl<'a> Context<'a> {
    fn ham(&self) -> CliResult<&Hamiltonian> {
        self.ham.as_ref().ok_or_else(|| CliError::Config("no Hamiltonian loaded".into()))
    }

    fn period(&mut self) -> CliResult<PeriodRecord> {
        if self.period.is_none() {
            let r = tasks::select_period(self.ham()?, self.cfg.period, self.cfg.settings.tol).map_err(|e| e.to_string());
            self.period = Some(r);
        }
        self.period.clone().expect("set above").map_err(CliError::Hypothesis)
    }

    fn rk(&mut self) -> CliResult<(Value, bool, HomogForm)> {
        if self.rk.is_none() {
            let p = self.period()?;
            let r = tasks::rk(self.ham()?, &p, self.cfg.rk_order, self.cfg.settings.tol).map_err(|e| e.to_string());
            self.rk = Some(r);
        }
        match self.rk.as_ref().expect("set above") {
            Ok((o, r)) => Ok((o.value.clone(), o.pass, r.clone())),
            Err(e) => Err(CliError::Hypothesis(e.clone())),
        }
    }
}

fn run_task(ctx: &mut Context, task: Task) -> CliResult<Outcome> {
    let cfg = ctx.cfg;
    let s = &cfg.settings;
    match task {
        Task::Verify => Ok(tasks::verify(ctx.ham()?, s.tol)),
        Task::Monodromy => {
            let t = match cfg.monodromy_t {
                Some(t) => t,
                None => ctx.period()?.t,
            };
            Ok(tasks::monodromy(ctx.ham()?, t))
        }
        Task::Jet => {
            let t = match cfg.jet_t {
                Some(t) => t,
                None => ctx.period()?.t,
            };
            tasks::jet(ctx.ham()?, cfg.jet_order, t, s.tol)
        }
        Task::Periods => tasks::periods(ctx.ham()?, cfg.t_window.0, cfg.t_window.1, s.tol),
        Task::Resonance => tasks::resonance(&ctx.ham()?.critical.w, cfg.resonance_order),
        Task::Rk => {
            let (value, pass, _) = ctx.rk()?;
            Ok(Outcome { value, pass })
        }
        Task::Cone => {
            let p = ctx.period()?;
            let (_, _, r) = ctx.rk()?;
            tasks::cone(&p, &r, s, cfg.samples_csv.as_deref())
        }
        Task::Charts => {
            let p = ctx.period()?;
            let (_, _, r) = ctx.rk()?;
            tasks::charts(&p, &r, s)
        }
        Task::Trace | Task::Theorem1 | Task::Theorem2 => {
            let p = ctx.period()?;
            let which = match task {
                Task::Theorem1 => Which::Definite,
                Task::Theorem2 => Which::Indefinite,
                _ => Which::Auto,
            };
            let r = if p.definite_sign().is_none() { Some(ctx.rk()?.2) } else { None };
            tasks::trace(ctx.ham()?, &p, r.as_ref(), &cfg.phi, which, s)
        }
        Task::Spectral => {
            let run = tasks::spectral(cfg.e_c, &cfg.phi, &cfg.h_grid, cfg.background)?;
            if let Some(path) = &cfg.csv {
                write_csv(&["h", "re_gamma", "im_gamma", "abs_gamma"], &run.rows, &run.trailer, Some(path))?;
            }
            Ok(run.outcome)
        }
    }
}

fn is_hypothesis(e: &CliError) -> bool {
    matches!(
        e,
        CliError::Hypothesis(_) | CliError::Library(critrace::Error::Hypothesis(_)) | CliError::Library(critrace::Error::Branch(_))
    )
}

pub fn run(cfg: &JobConfig) -> CliResult<RunResult> {
    cfg.validate()?;
    let ham = match &cfg.hamiltonian {
        Some(p) if !cfg.tasks.is_empty() => Some(tasks::load_hamiltonian(p)?),
        _ => None,
    };
    let mut ctx = Context { cfg, ham, period: None, rk: None };
    let mut results = Map::new();
    let mut failures = Vec::new();
    let mut hypothesis_failure = false;
    for &task in &cfg.tasks {
        let entry = match run_task(&mut ctx, task) {
            Ok(o) => {
                if !o.pass {
                    failures.push(format!("{}: check failed", task.name()));
                }
                o.value
            }
            Err(e) => {
                if matches!(e, CliError::Config(_)) {
                    return Err(e);
                }
                hypothesis_failure |= is_hypothesis(&e);
                failures.push(format!("{}: {e}", task.name()));
                json!({ "error": e.to_string() })
            }
        };
        results.insert(task.name().to_string(), entry);
    }
    let report = json!({
        "tool": { "name": "critrace", "version": env!("CARGO_PKG_VERSION") },
        "hamiltonian": ctx.ham.as_ref().map(|h| h.name.clone()),
        "tasks": cfg.tasks.iter().map(|t| t.name()).collect::<Vec<_>>(),
        "settings": {
            "tol": cfg.settings.tol,
            "seed": cfg.settings.seed,
            "samples": cfg.settings.samples,
            "shell": cfg.settings.shell,
        },
        "results": results,
        "failures": failures,
        "pass": failures.is_empty(),
    });
    Ok(RunResult { pass: failures.is_empty(), report, failures, hypothesis_failure })
}

pub fn run_and_write(cfg: &JobConfig) -> CliResult<RunResult> {
    let r = run(cfg)?;
    write_json(&r.report, cfg.report.as_deref())?;
    Ok(r)
}
