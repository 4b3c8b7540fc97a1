//! Job files: INI-style sections of `key = value` lines, `#` or `;` comments.
//! Unknown sections or keys are rejected. See `docs/job-format.md`.

use crate::error::{CliError, CliResult};
use crate::tasks::{PhiParams, Settings};
use ini::Ini;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Verify,
    Monodromy,
    Jet,
    Periods,
    Resonance,
    Rk,
    Cone,
    Charts,
    Trace,
    Theorem1,
    Theorem2,
    Spectral,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Verify => "verify",
            Task::Monodromy => "monodromy",
            Task::Jet => "jet",
            Task::Periods => "periods",
            Task::Resonance => "resonance",
            Task::Rk => "rk",
            Task::Cone => "cone",
            Task::Charts => "charts",
            Task::Trace => "trace",
            Task::Theorem1 => "theorem1",
            Task::Theorem2 => "theorem2",
            Task::Spectral => "spectral",
        }
    }
}

impl FromStr for Task {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "verify" => Task::Verify,
            "monodromy" => Task::Monodromy,
            "jet" => Task::Jet,
            "periods" => Task::Periods,
            "resonance" => Task::Resonance,
            "rk" => Task::Rk,
            "cone" => Task::Cone,
            "charts" => Task::Charts,
            "trace" => Task::Trace,
            "theorem1" => Task::Theorem1,
            "theorem2" => Task::Theorem2,
            "spectral" => Task::Spectral,
            other => return Err(CliError::Config(format!("unknown task `{other}`"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct JobConfig {
    pub hamiltonian: Option<PathBuf>,
    pub tasks: Vec<Task>,
    pub settings: Settings,
    pub phi: PhiParams,
    /// Period under study; the first total period when absent.
    pub period: Option<f64>,
    pub t_window: (f64, f64),
    pub jet_order: usize,
    pub jet_t: Option<f64>,
    pub monodromy_t: Option<f64>,
    pub resonance_order: usize,
    pub rk_order: Option<usize>,
    pub e_c: f64,
    pub h_grid: Vec<f64>,
    pub background: bool,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub samples_csv: Option<PathBuf>,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            hamiltonian: None,
            tasks: Vec::new(),
            settings: Settings::default(),
            phi: PhiParams::default(),
            period: None,
            t_window: (0.0, 20.0),
            jet_order: 2,
            jet_t: None,
            monodromy_t: None,
            resonance_order: 3,
            rk_order: None,
            e_c: 0.0,
            h_grid: default_h_grid(),
            background: false,
            report: None,
            csv: None,
            samples_csv: None,
        }
    }
}

/// 24 log-spaced values from 1/50 down to 1/400.
pub fn default_h_grid() -> Vec<f64> {
    let (hi, lo, n): (f64, f64, usize) = (1.0 / 50.0, 1.0 / 400.0, 24);
    (0..n).map(|i| hi * (lo / hi).powf(i as f64 / (n - 1) as f64)).collect()
}

fn parse_num<T: FromStr>(section: &str, key: &str, v: &str) -> CliResult<T> {
    v.trim().parse().map_err(|_| CliError::Config(format!("[{section}] {key}: cannot parse `{v}`")))
}

pub fn parse_list(v: &str) -> CliResult<Vec<f64>> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Config(format!("cannot parse `{s}` as a number"))))
        .collect()
}

pub fn check_h_grid(hs: &[f64]) -> CliResult<()> {
    if hs.is_empty() {
        return Err(CliError::Config("h grid is empty".into()));
    }
    if hs.iter().any(|h| !(*h > 0.0)) {
        return Err(CliError::Config("h grid values must be positive".into()));
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Config("h grid must be strictly decreasing".into()));
    }
    Ok(())
}

fn resolve(base: &Path, v: &str) -> PathBuf {
    let p = PathBuf::from(v.trim());
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl JobConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parse job text; relative paths are taken from `base`.
    pub fn parse(text: &str, base: &Path) -> CliResult<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("line {}: {}", e.line, e.msg)))?;
        let mut c = JobConfig::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(CliError::Config(format!("key `{k}` outside any section")));
                }
                continue;
            };
            for (key, v) in props.iter() {
                let bad_key = || CliError::Config(format!("unknown key `{key}` in [{section}]"));
                match section {
                    "input" => match key {
                        "hamiltonian" => c.hamiltonian = Some(resolve(base, v)),
                        _ => return Err(bad_key()),
                    },
                    "tasks" => match key {
                        "run" => c.tasks = v.split_whitespace().map(Task::from_str).collect::<CliResult<_>>()?,
                        _ => return Err(bad_key()),
                    },
                    "tolerances" => match key {
                        "tol" => c.settings.tol = parse_num(section, key, v)?,
                        _ => return Err(bad_key()),
                    },
                    "cone" => match key {
                        "samples" => c.settings.samples = parse_num(section, key, v)?,
                        "seed" => c.settings.seed = parse_num(section, key, v)?,
                        "shell" => c.settings.shell = parse_num(section, key, v)?,
                        _ => return Err(bad_key()),
                    },
                    "test_function" => match key {
                        "center" => c.phi.center = Some(parse_num(section, key, v)?),
                        "half_width" => c.phi.half_width = parse_num(section, key, v)?,
                        "p1" => c.phi.p1 = Some(parse_num(section, key, v)?),
                        _ => return Err(bad_key()),
                    },
                    "periods" => match key {
                        "t_min" => c.t_window.0 = parse_num(section, key, v)?,
                        "t_max" => c.t_window.1 = parse_num(section, key, v)?,
                        "period" => c.period = Some(parse_num(section, key, v)?),
                        _ => return Err(bad_key()),
                    },
                    "jet" => match key {
                        "order" => c.jet_order = parse_num(section, key, v)?,
                        "t" => c.jet_t = Some(parse_num(section, key, v)?),
                        _ => return Err(bad_key()),
                    },
                    "monodromy" => match key {
                        "t" => c.monodromy_t = Some(parse_num(section, key, v)?),
                        _ => return Err(bad_key()),
                    },
                    "resonance" => match key {
                        "order" => c.resonance_order = parse_num(section, key, v)?,
                        _ => return Err(bad_key()),
                    },
                    "rk" => match key {
                        "order" => c.rk_order = Some(parse_num(section, key, v)?),
                        _ => return Err(bad_key()),
                    },
                    "spectral" => match key {
                        "e_c" => c.e_c = parse_num(section, key, v)?,
                        "h_grid" => c.h_grid = parse_list(v)?,
                        "background" => {
                            c.background = match v.trim() {
                                "torus" => true,
                                "none" => false,
                                other => return Err(CliError::Config(format!("[spectral] background: expected `torus` or `none`, got `{other}`"))),
                            }
                        }
                        _ => return Err(bad_key()),
                    },
                    "output" => match key {
                        "report" => c.report = Some(resolve(base, v)),
                        "csv" => c.csv = Some(resolve(base, v)),
                        "samples_csv" => c.samples_csv = Some(resolve(base, v)),
                        _ => return Err(bad_key()),
                    },
                    other => return Err(CliError::Config(format!("unknown section [{other}]"))),
                }
            }
        }
        Ok(c)
    }

    /// Checks that do not depend on command-line overrides being applied first.
    pub fn validate(&self) -> CliResult<()> {
        let needs_ham = self.tasks.iter().any(|t| *t != Task::Spectral);
        match &self.hamiltonian {
            Some(p) if !p.is_file() => return Err(CliError::Config(format!("Hamiltonian file {} does not exist", p.display()))),
            None if needs_ham => {
                return Err(CliError::Config("[input] hamiltonian is required for the requested tasks".into()))
            }
            _ => {}
        }
        if !(self.settings.tol > 0.0) {
            return Err(CliError::Config(format!("tol must be positive, got {}", self.settings.tol)));
        }
        if self.settings.samples == 0 {
            return Err(CliError::Config("samples must be positive".into()));
        }
        if !(self.settings.shell > 0.0) {
            return Err(CliError::Config("shell must be positive".into()));
        }
        if !(self.phi.half_width > 0.0) {
            return Err(CliError::Config("half_width must be positive".into()));
        }
        if !(self.t_window.1 > self.t_window.0) {
            return Err(CliError::Config("period window is empty".into()));
        }
        if !(2..=4).contains(&self.jet_order) {
            return Err(CliError::Config(format!("jet order {} outside 2..=4", self.jet_order)));
        }
        check_h_grid(&self.h_grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_resolves_paths() {
        let text = "# job\n[input]\nhamiltonian = h.ham\n\n[tasks]\nrun = verify periods trace\n\n[cone]\nsamples = 1000\nseed = 3\n\n[spectral]\nh_grid = 0.1, 0.05 0.01\n";
        let c = JobConfig::parse(text, Path::new("/data")).unwrap();
        assert_eq!(c.hamiltonian.as_deref(), Some(Path::new("/data/h.ham")));
        assert_eq!(c.tasks, vec![Task::Verify, Task::Periods, Task::Trace]);
        assert_eq!(c.settings.samples, 1000);
        assert_eq!(c.settings.seed, 3);
        assert_eq!(c.h_grid, vec![0.1, 0.05, 0.01]);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(JobConfig::parse("[inputs]\nhamiltonian = a\n", Path::new(".")).is_err());
        assert!(JobConfig::parse("[input]\nham = a\n", Path::new(".")).is_err());
        assert!(JobConfig::parse("[tasks]\nrun = verify fly\n", Path::new(".")).is_err());
        assert!(JobConfig::parse("tol = 1\n", Path::new(".")).is_err());
        assert!(JobConfig::parse("[cone]\nsamples = many\n", Path::new(".")).is_err());
    }

    #[test]
    fn validation() {
        let mut c = JobConfig::default();
        assert!(c.validate().is_ok());
        c.h_grid = vec![0.01, 0.02];
        assert!(c.validate().is_err());
        c.h_grid = default_h_grid();
        c.settings.tol = -1.0;
        assert!(c.validate().is_err());
        c.settings.tol = 1e-10;
        c.tasks = vec![Task::Verify];
        assert!(c.validate().is_err());
        c.hamiltonian = Some(PathBuf::from("/nonexistent/file.ham"));
        assert!(c.validate().is_err());
    }
}
