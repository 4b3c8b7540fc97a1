//! One function per pipeline step. Each returns a JSON fragment and, where
//! the step is a check, whether it passed.

use crate::error::{CliError, CliResult};
use crate::report::{complex, matrix, poly, tag, tag_c, tag_opt_c, Method};
use critrace::flow::{flow_jet, hamilton_flow, linearized_flow, FlowOpts};
use critrace::normal_forms::{build_chart, verify_chart, ChartGrid, ChartKind, ModelPhase};
use critrace::oscillatory::{expand_rk, fit_free_exponent, log_grid, quad_oscillatory, Factor, Profile, SmoothAmplitude};
use critrace::periods::{find_periods, pseudo_resonant, resonance_module, restrict_forms, PeriodRecord};
use critrace::rk_cone::{
    check_cone_geometry, cone_integral, cone_samples, first_nonvanishing_rk, rk_from_integral, rk_via_jets, ConeMethod,
    ConeSamples, HomogForm, Regularization, DEFAULT_SHELL,
};
use critrace::spectral_oracle::{diagonalization_check, h_sweep, torus_background};
use critrace::symbol::{parse_hamiltonian, verify_critical, Hamiltonian, PhasePoint};
use critrace::trace::{theorem1, theorem2, Branch, ConeOptions, TestFunction, TraceReport};
use critrace::Error;
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::path::Path;

/// Largest period searched when none is given.
pub const DEFAULT_T_MAX: f64 = 200.0;
/// Relative agreement required between the jet and integral routes to `R_k`.
pub const RK_AGREEMENT: f64 = 1e-6;
/// Directions used for the cone-geometry scan.
const GEOMETRY_SAMPLES: usize = 20_000;

#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
    pub shell: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { tol: 1e-10, seed: 1, samples: 200_000, shell: DEFAULT_SHELL }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PhiParams {
    /// Defaults to the period under study.
    pub center: Option<f64>,
    pub half_width: f64,
    /// Defaults to the subprincipal value in the Hamiltonian file.
    pub p1: Option<f64>,
}

impl Default for PhiParams {
    fn default() -> Self {
        PhiParams { center: None, half_width: 0.5, p1: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Auto,
    Definite,
    Indefinite,
}

pub struct Outcome {
    pub value: Value,
    pub pass: bool,
}

impl Outcome {
    fn ok(value: Value) -> Self {
        Outcome { value, pass: true }
    }
}

pub fn load_hamiltonian(path: &Path) -> CliResult<Hamiltonian> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_hamiltonian(&text)?)
}

pub fn verify(h: &Hamiltonian, tol: f64) -> Outcome {
    let r = verify_critical(&h.symbol, &h.critical, tol);
    let value = json!({
        "gradient_norm": tag(r.gradient_norm, Method::ClosedForm),
        "hessian_residual": tag(r.hessian_residual, Method::ClosedForm),
        "energy_residual": tag(r.energy_residual, Method::ClosedForm),
        "extracted_w": tag(&r.extracted_w, Method::Diagonalization),
        "extracted_blocks": r.extracted_sigma,
        "pass": r.pass,
        "message": r.message,
    });
    Outcome { value, pass: r.pass }
}

pub fn flow(h: &Hamiltonian, z: &[f64], t: f64, tol: f64) -> CliResult<Outcome> {
    let start = PhasePoint::new(z.to_vec())?;
    let r = hamilton_flow(&h.symbol, &start, t, FlowOpts { tol, ..FlowOpts::default() })?;
    Ok(Outcome::ok(json!({
        "t": t,
        "start": z,
        "end": tag(&r.z.coords, Method::Ode),
        "energy_drift": tag(r.energy_drift, Method::Ode),
        "steps": r.steps,
    })))
}

pub fn monodromy(h: &Hamiltonian, t: f64) -> Outcome {
    let m = linearized_flow(&h.critical, t);
    Outcome::ok(json!({
        "t": t,
        "matrix": tag(matrix(&m.m), Method::ClosedForm),
        "symplectic_defect": tag(m.symplectic_defect(), Method::ClosedForm),
    }))
}

pub fn jet(h: &Hamiltonian, order: usize, t: f64, tol: f64) -> CliResult<Outcome> {
    let j = flow_jet(&h.symbol, &h.critical, order, t, tol)?;
    let comps: Vec<Value> = j.components.iter().map(poly).collect();
    Ok(Outcome::ok(json!({
        "t": t,
        "order": order,
        "dim": j.dim,
        "components": tag(comps, Method::Ode),
    })))
}

pub fn periods(h: &Hamiltonian, t_min: f64, t_max: f64, tol: f64) -> CliResult<Outcome> {
    let recs = find_periods(&h.critical, t_min, t_max, tol)?;
    let list: Vec<Value> = recs.iter().map(|p| tag(p, Method::ClosedForm)).collect();
    Ok(Outcome::ok(json!({ "window": [t_min, t_max], "periods": list })))
}

pub fn resonance(w: &[f64], order: usize) -> CliResult<Outcome> {
    let set = resonance_module(w, order)?;
    let pr = pseudo_resonant(w, order)?;
    Ok(Outcome::ok(json!({
        "frequencies": w,
        "order": order,
        "resonances": set.vectors,
        "exact": set.exact,
        "pseudo_resonant": pr.found,
        "witness": pr.witness,
    })))
}

/// The period at `t`, or the first total period in `(0, DEFAULT_T_MAX]`
/// (the first period of any kind when there is no total one).
pub fn select_period(h: &Hamiltonian, t: Option<f64>, tol: f64) -> CliResult<PeriodRecord> {
    let p = match t {
        Some(t) => restrict_forms(&h.critical, t, tol)?,
        None => {
            let all = find_periods(&h.critical, 0.0, DEFAULT_T_MAX, tol)?;
            let first_total = all.iter().position(|p| p.is_total);
            match first_total.or(if all.is_empty() { None } else { Some(0) }) {
                Some(i) => all[i].clone(),
                None => return Err(CliError::Hypothesis(format!("no period in (0, {DEFAULT_T_MAX}]"))),
            }
        }
    };
    if p.d_t == 0 {
        return Err(CliError::Hypothesis(format!("T = {} is not a period of the linearized flow", p.t)));
    }
    Ok(p)
}

/// `R_k` at the period by both routes; `k = None` picks the first
/// non-vanishing order.
pub fn rk(h: &Hamiltonian, period: &PeriodRecord, k: Option<usize>, tol: f64) -> CliResult<(Outcome, HomogForm)> {
    let from_jet = match k {
        Some(k) => rk_via_jets(&h.symbol, &h.critical, period, k, tol)?,
        None => first_nonvanishing_rk(&h.symbol, &h.critical, period, tol)?
            .ok_or_else(|| CliError::Hypothesis("R_k vanishes identically for k ≤ 4".into()))?,
    };
    let from_int = rk_from_integral(&h.symbol, &h.critical, period, from_jet.degree, tol)?;
    let diff = from_jet.max_coeff_diff(&from_int);
    let scale = from_jet.max_abs_coeff().max(1e-300);
    let pass = diff <= RK_AGREEMENT * scale.max(1.0);
    let value = json!({
        "period": period.t,
        "k": from_jet.degree,
        "fixed_dim": from_jet.dim,
        "from_jet": tag(poly(&from_jet.poly), Method::Ode),
        "from_integral": tag(poly(&from_int.poly), Method::Quadrature),
        "max_coefficient_difference": tag(diff, Method::Quadrature),
        "pass": pass,
    });
    Ok((Outcome { value, pass }, from_jet))
}

fn pick_cone_method(period: &PeriodRecord, s: &Settings) -> CliResult<ConeMethod> {
    match cone_samples(&period.q_t, 4, s.seed, ConeMethod::Product) {
        Ok(_) => Ok(ConeMethod::Product),
        Err(Error::NotBlockUniform) => Ok(ConeMethod::MonteCarlo { shell: s.shell }),
        Err(e) => Err(e.into()),
    }
}

fn cone_method_tag(samples: &ConeSamples) -> Method {
    if samples.random {
        Method::MonteCarlo
    } else {
        Method::Quadrature
    }
}

/// Liouville mass of `{Q_T = 0} ∩ S` and the `R_k` cone integral; optional
/// CSV dump of the samples `(θ…, weight, R(θ))`.
pub fn cone(period: &PeriodRecord, r: &HomogForm, s: &Settings, dump: Option<&Path>) -> CliResult<Outcome> {
    let geometry = check_cone_geometry(&period.q_t, r, GEOMETRY_SAMPLES.min(s.samples), s.seed)?;
    let method = pick_cone_method(period, s)?;
    let samples = cone_samples(&period.q_t, s.samples, s.seed, method)?;
    let mtag = cone_method_tag(&samples);
    let mass = cone_integral(&|_| 1.0, &samples, Regularization::None)?;
    let beta = (2.0 * period.d_t as f64 - 2.0) / r.degree as f64;
    let reg = if geometry.intersection_empty { Regularization::AbsPower(beta) } else { Regularization::I0Power(beta) };
    let rr = r.clone();
    let int = cone_integral(&move |y| rr.eval(y), &samples, reg)?;
    if let Some(path) = dump {
        let dim = period.q_t.nrows();
        let mut header: Vec<String> = (0..dim).map(|i| format!("theta{}", i + 1)).collect();
        header.push("weight".into());
        header.push("r".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<f64>> = samples
            .samples
            .iter()
            .map(|c| c.theta.iter().copied().chain([c.weight, r.eval(&c.theta)]).collect())
            .collect();
        crate::report::write_csv(&header, &rows, &[], Some(path))?;
    }
    let pass = int.converged;
    let value = json!({
        "period": period.t,
        "sampler": method,
        "n_drawn": samples.n_drawn,
        "n_kept": samples.samples.len(),
        "seed": s.seed,
        "mass": tag(complex(mass.value), mtag),
        "mass_std_error": tag(mass.std_error, mtag),
        "regularization": reg,
        "integral": tag(complex(int.value), mtag),
        "integral_std_error": tag(int.std_error, mtag),
        "excluded_mass": tag(int.excluded_mass, mtag),
        "dropped_bound": tag(int.dropped_bound, mtag),
        "converged": int.converged,
        "geometry": tag(&geometry, Method::MonteCarlo),
    });
    Ok(Outcome { value, pass })
}

/// Base points of each chart kind that exist for this `(Q_T, R_k)`.
fn chart_bases(period: &PeriodRecord, r: &HomogForm, s: &Settings) -> CliResult<Vec<(ChartKind, Vec<f64>)>> {
    let mut out = Vec::new();
    let eig = SymmetricEigen::new(period.q_t.clone());
    let i = eig.eigenvalues.iamax();
    out.push((ChartKind::First, eig.eigenvectors.column(i).iter().copied().collect()));
    if period.definite_sign().is_some() {
        return Ok(out);
    }
    let method = pick_cone_method(period, s)?;
    let samples = cone_samples(&period.q_t, 4096, s.seed, method)?;
    if let Some(best) = samples.samples.iter().max_by(|a, b| r.eval(&a.theta).abs().total_cmp(&r.eval(&b.theta).abs())) {
        out.push((ChartKind::Second, best.theta.clone()));
    }
    let geometry = check_cone_geometry(&period.q_t, r, GEOMETRY_SAMPLES.min(s.samples), s.seed)?;
    if let Some(z) = geometry.zeros.iter().max_by(|a, b| a.margin.total_cmp(&b.margin)) {
        out.push((ChartKind::Third, z.theta.clone()));
    }
    Ok(out)
}

pub fn charts(period: &PeriodRecord, r: &HomogForm, s: &Settings) -> CliResult<Outcome> {
    let model = ModelPhase::new(period.q_t.clone(), r.clone())?;
    let grid = ChartGrid::standard(model.dim());
    let mut rows = Vec::new();
    let mut pass = true;
    for (kind, theta0) in chart_bases(period, r, s)? {
        let entry = match build_chart(&model, &theta0, kind) {
            Ok(chart) => {
                let rep = verify_chart(&chart, &model, &grid, s.tol);
                pass &= rep.pass;
                json!({
                    "kind": kind,
                    "theta0": theta0,
                    "sign": chart.sign,
                    "points": rep.points,
                    "max_residual": tag(rep.max_residual, Method::ClosedForm),
                    "analytic_jacobian": tag(rep.analytic_jacobian, Method::ClosedForm),
                    "numeric_jacobian": tag(rep.numeric_jacobian, Method::Quadrature),
                    "jacobian_rel_error": rep.jacobian_rel_error,
                    "min_abs_det": rep.min_abs_det,
                    "max_condition": rep.max_condition,
                    "pass": rep.pass,
                })
            }
            Err(e) => {
                pass = false;
                json!({ "kind": kind, "theta0": theta0, "error": e.to_string(), "pass": false })
            }
        };
        rows.push(entry);
    }
    Ok(Outcome { value: json!({ "period": period.t, "tol": s.tol, "charts": rows }), pass })
}

pub fn test_function(period: &PeriodRecord, p: &PhiParams) -> CliResult<TestFunction> {
    Ok(TestFunction::new(p.center.unwrap_or(period.t), p.half_width)?)
}

fn exponent_value(r: &TraceReport) -> Value {
    let e = r.exponent;
    json!({ "fraction": format!("{}/{}", e.numer(), e.denom()), "value": *e.numer() as f64 / *e.denom() as f64, "method": Method::ClosedForm })
}

fn trace_json(rep: &TraceReport, phi: &TestFunction, p1: f64) -> Value {
    let cone_tag = match &rep.cone {
        Some(c) if c.std_error > 0.0 => Method::MonteCarlo,
        _ => Method::Quadrature,
    };
    let leading_tag = match rep.branch {
        Branch::Definite => Method::Quadrature,
        Branch::Indefinite => cone_tag,
    };
    json!({
        "period": rep.period.t,
        "branch": rep.branch,
        "d_t": rep.period.d_t,
        "test_function": { "center": phi.center, "half_width": phi.delta, "scale": phi.scale },
        "p1": p1,
        "exponent": exponent_value(rep),
        "leading_coefficient": tag_c(rep.leading_coefficient, leading_tag),
        "amplitude": tag_c(rep.amplitude, Method::ClosedForm),
        "c_t": tag_opt_c(rep.c_t, Method::ClosedForm),
        "lambda_t": tag_opt_c(rep.lambda_t, Method::Quadrature),
        "k": rep.k,
        "mu_k": tag_opt_c(rep.mu_k, Method::ClosedForm),
        "mu_k_alt": tag_opt_c(rep.mu_k_alt, Method::ClosedForm),
        "k_t": tag_opt_c(rep.k_t, cone_tag),
        "cone": rep.cone.as_ref().map(|c| tag(c, cone_tag)),
        "cone_intersection_empty": rep.cone_intersection_empty,
        "det_qt": tag(rep.period.det_qt, Method::ClosedForm),
        "sgn_qt": rep.period.sgn_qt,
        "sign_qt": rep.period.sign_qt,
        "complement_empty": rep.complement_empty,
        "far_orbits_assumed": rep.far_orbits_assumed,
    })
}

/// Leading trace term at the period. `Which::Auto` follows the
/// definiteness of `Q_T`; the forced variants fail on the wrong branch.
pub fn trace(
    h: &Hamiltonian,
    period: &PeriodRecord,
    r: Option<&HomogForm>,
    phi: &PhiParams,
    which: Which,
    s: &Settings,
) -> CliResult<Outcome> {
    let tf = test_function(period, phi)?;
    let p1 = phi.p1.unwrap_or(h.symbol.subprincipal_at_z0);
    let definite = period.definite_sign().is_some();
    let use_one = match which {
        Which::Auto => definite,
        Which::Definite => true,
        Which::Indefinite => false,
    };
    let rep = if use_one {
        theorem1(&h.critical, period, &tf, p1)?
    } else if definite {
        return Err(Error::Branch(format!("Q_T is definite at T = {}; the indefinite branch does not apply", period.t)).into());
    } else {
        let owned;
        let r = match r {
            Some(r) => r,
            None => {
                owned = first_nonvanishing_rk(&h.symbol, &h.critical, period, s.tol)?
                    .ok_or_else(|| CliError::Hypothesis("R_k vanishes identically for k ≤ 4".into()))?;
                &owned
            }
        };
        let opts = ConeOptions { samples: s.samples, seed: s.seed, method: None };
        theorem2(&h.critical, period, r, &tf, p1, opts)?
    };
    Ok(Outcome::ok(trace_json(&rep, &tf, p1)))
}

pub struct SpectralRun {
    pub outcome: Outcome,
    pub rows: Vec<Vec<f64>>,
    pub trailer: Vec<String>,
}

/// `γ(E_c, h)` for the perturbed-oscillator example over the h grid, the
/// eigenvalue-rule check and the exponent fit.
pub fn spectral(e_c: f64, phi: &PhiParams, hs: &[f64], background: bool) -> CliResult<SpectralRun> {
    let tf = TestFunction::new(phi.center.unwrap_or(2.0 * PI), phi.half_width)?;
    let check = diagonalization_check(0.1, 20)?;
    let bg = move |h: f64| torus_background(&tf, h);
    let tf2 = TestFunction::new(phi.center.unwrap_or(2.0 * PI), phi.half_width)?;
    let sweep = if background { h_sweep(e_c, &tf2, hs, Some(&bg))? } else { h_sweep(e_c, &tf2, hs, None)? };
    let rows: Vec<Vec<f64>> = sweep.points.iter().map(|p| vec![p.h, p.gamma.re, p.gamma.im, p.gamma.norm()]).collect();
    let mut trailer = Vec::new();
    match &sweep.fit {
        Some(f) => trailer.push(format!("fit exponent={:.6} coefficient={:.6e} r2={:.4} background_subtracted={}", f.exponent, f.coefficient, f.r2, background)),
        None => trailer.push("fit unavailable".into()),
    }
    let pass = check.max_abs_error <= 1e-10;
    let points: Vec<Value> = sweep
        .points
        .iter()
        .map(|p| json!({ "h": p.h, "gamma": tag_c(p.gamma, Method::Quadrature), "corrected": tag_c(p.corrected, Method::Quadrature), "n_states": p.n_states }))
        .collect();
    let value = json!({
        "e_c": e_c,
        "test_function": { "center": tf2.center, "half_width": tf2.delta },
        "eigenvalue_rule_check": {
            "h": check.h,
            "nmax": check.nmax,
            "max_abs_error": tag(check.max_abs_error, Method::Diagonalization),
            "max_imag": tag(check.max_imag, Method::Diagonalization),
            "pass": pass,
        },
        "points": points,
        "fit": sweep.fit.as_ref().map(|f| tag(f, Method::Fit)),
        "background_subtracted": background,
        "note": "exploratory: invariant tori on the zero level contribute at the same order",
    });
    Ok(SpectralRun { outcome: Outcome { value, pass }, rows, trailer })
}

fn bump_amplitude(half_width: f64) -> Factor {
    Factor::single(Profile::Bump { center: 0.0, half_width })
}

/// Terms of `∫₀^∞ e^{iλr^k} b(r) dr` for a bump `b` of the given half width.
pub fn osc_expand(k: usize, terms: usize, half_width: f64) -> CliResult<Outcome> {
    let e = expand_rk(&bump_amplitude(half_width), k, terms)?;
    let list: Vec<Value> = e
        .terms
        .iter()
        .map(|t| json!({ "power": format!("{}/{}", t.power.numer(), t.power.denom()), "coefficient": tag_c(t.coefficient, Method::ClosedForm) }))
        .collect();
    Ok(Outcome::ok(json!({
        "k": k,
        "half_width": half_width,
        "terms": list,
        "remainder_power": format!("{}/{}", e.remainder_power.numer(), e.remainder_power.denom()),
    })))
}

/// Brute-force values of the same integral on the λ grid.
pub fn osc_quad(k: usize, lambdas: &[f64], half_width: f64, tol: f64) -> CliResult<Vec<(f64, Complex64, f64)>> {
    let a = SmoothAmplitude::new(1.0, vec![bump_amplitude(half_width)])?;
    let kk = k as i32;
    lambdas
        .iter()
        .map(|&l| {
            let q = quad_oscillatory(&|x| x[0].powi(kk), &a, &[(0.0, half_width)], l, tol)?;
            Ok((l, q.value, q.error))
        })
        .collect()
}

/// Leading exponent and coefficient fitted to quadrature values, against the expansion.
pub fn osc_fit(k: usize, lo: f64, hi: f64, n: usize, half_width: f64, tol: f64) -> CliResult<Outcome> {
    let data = osc_quad(k, &log_grid(lo, hi, n), half_width, tol)?;
    let pairs: Vec<(f64, Complex64)> = data.iter().map(|(l, v, _)| (*l, *v)).collect();
    let kf = k as f64;
    // even amplitude: corrections at 2/k, 4/k, 6/k
    let fit = fit_free_exponent(&pairs, &[2.0 / kf, 4.0 / kf, 6.0 / kf], 0.5 / kf, 1.5 / kf)?;
    let e = expand_rk(&bump_amplitude(half_width), k, 0)?;
    let lead = e.terms[0].coefficient;
    let rel = (fit.coefficients[0] - lead).norm() / lead.norm();
    Ok(Outcome::ok(json!({
        "k": k,
        "lambda_range": [lo, hi],
        "points": n,
        "exponent": tag(fit.exponent, Method::Fit),
        "expected_exponent": tag(-1.0 / kf, Method::ClosedForm),
        "leading_coefficient": tag_c(fit.coefficients[0], Method::Fit),
        "expected_coefficient": tag_c(lead, Method::ClosedForm),
        "coefficient_rel_error": rel,
        "max_rel_residual": fit.max_rel_residual,
    })))
}
