use critrace::fixtures;
use critrace::flow::{flow_jet, hamilton_flow_fixed, linearized_flow, JetTensor};
use critrace::normal_forms::{build_chart, verify_chart, ChartGrid, ChartKind, ModelPhase};
use critrace::numerics::Poly;
use critrace::oscillatory::{pair_distribution, Distribution, Factor, Jet1, Profile};
use critrace::periods::{pseudo_resonant, resonance_module, restrict_forms};
use critrace::rk_cone::{cone_samples, rk_via_jets, ConeMethod, HomogForm};
use critrace::symbol::{BlockType, PhasePoint, PolySymbol};
use critrace::trace::{theorem1, theorem2, ConeOptions, TestFunction};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn small_config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn random_poly(nvars: usize, coeffs: &[f64]) -> Poly {
    let mut p = Poly::zero(nvars);
    let mut it = coeffs.iter();
    for deg in 0..=4u32 {
        for e in critrace::numerics::multi_indices(nvars, deg) {
            if let Some(c) = it.next() {
                p.add_term(e, *c);
            }
        }
    }
    p
}

fn example1_jet3() -> &'static JetTensor {
    static J: OnceLock<JetTensor> = OnceLock::new();
    J.get_or_init(|| {
        let h = fixtures::example1();
        flow_jet(&h.symbol, &h.critical, 3, 1.3, 1e-12).unwrap()
    })
}

fn example1_r4() -> &'static HomogForm {
    static R: OnceLock<HomogForm> = OnceLock::new();
    R.get_or_init(|| {
        let h = fixtures::example1();
        let p = restrict_forms(&h.critical, 2.0 * PI, 1e-10).unwrap();
        rk_via_jets(&h.symbol, &h.critical, &p, 4, 1e-12).unwrap()
    })
}

fn siegel_moser_r3() -> &'static HomogForm {
    static R: OnceLock<HomogForm> = OnceLock::new();
    R.get_or_init(|| {
        let h = fixtures::siegel_moser();
        let p = restrict_forms(&h.critical, 2.0 * PI, 1e-10).unwrap();
        rk_via_jets(&h.symbol, &h.critical, &p, 3, 1e-12).unwrap()
    })
}

/// `c_a·a + c_b·b` as a pairing test function.
struct Combo<'a> {
    a: &'a Factor,
    b: &'a Factor,
    ca: Complex64,
    cb: Complex64,
}

impl Jet1 for Combo<'_> {
    fn jet(&self, x: f64, order: usize) -> Vec<Complex64> {
        let ja = Jet1::jet(self.a, x, order);
        let jb = Jet1::jet(self.b, x, order);
        ja.into_iter().zip(jb).map(|(u, v)| self.ca * u + self.cb * v).collect()
    }
    fn support(&self) -> (f64, f64) {
        let (a0, a1) = Jet1::support(self.a);
        let (b0, b1) = Jet1::support(self.b);
        (a0.min(b0), a1.max(b1))
    }
}

proptest! {
    #![proptest_config(small_config(48))]

    #[test]
    fn gradient_matches_directional_differences(
        coeffs in prop::collection::vec(-2.0f64..2.0, 70),
        z in prop::collection::vec(-1.0f64..1.0, 4),
        v in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let s = PolySymbol::new(random_poly(4, &coeffs), 0.0).unwrap();
        let zp = PhasePoint::new(z.clone()).unwrap();
        let g = s.gradient(&zp).unwrap();
        let at = |e: f64| {
            let w: Vec<f64> = z.iter().zip(&v).map(|(a, b)| a + e * b).collect();
            s.evaluate(&PhasePoint::new(w).unwrap()).unwrap()
        };
        let dir: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        let mut errs = Vec::new();
        for step in [1e-2, 5e-3] {
            errs.push(((at(step) - at(-step)) / (2.0 * step) - dir).abs());
        }
        // O(step²): halving the step divides the error by about four
        let scale = 1.0 + dir.abs();
        prop_assert!(errs[0] < 1e-2 * scale);
        prop_assert!(errs[1] <= errs[0] / 3.0 + 1e-9 * scale);
    }

    #[test]
    fn hessian_is_exactly_symmetric(
        coeffs in prop::collection::vec(-2.0f64..2.0, 70),
        z in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let s = PolySymbol::new(random_poly(4, &coeffs), 0.0).unwrap();
        let h = s.hessian(&PhasePoint::new(z).unwrap()).unwrap();
        prop_assert_eq!(h.clone(), h.transpose());
    }

    #[test]
    fn homogeneous_parts_reassemble(coeffs in prop::collection::vec(-2.0f64..2.0, 70)) {
        let p = random_poly(4, &coeffs);
        let s = PolySymbol::new(p.clone(), 0.0).unwrap();
        let mut sum = Poly::zero(4);
        for j in 0..=4 {
            sum = sum.add(&s.homogeneous_part(j));
        }
        prop_assert_eq!(sum.max_coeff_diff(&p), 0.0);
    }

    #[test]
    fn monodromy_is_symplectic(
        w1 in 0.1f64..3.0,
        w2 in -3.0f64..3.0,
        hyperbolic in any::<bool>(),
        t in -100.0f64..100.0,
    ) {
        let sig2 = if hyperbolic { BlockType::Hyperbolic } else { BlockType::Elliptic };
        let cd = fixtures::quadratic(&[w1, w2], &[BlockType::Elliptic, sig2]).critical;
        let m = linearized_flow(&cd, t);
        let norm = m.m.abs().max();
        prop_assert!(m.symplectic_defect() <= 1e-12 * norm.powi(2).max(1.0));
    }

    #[test]
    fn flow_group_law(
        z in prop::collection::vec(-0.3f64..0.3, 4),
        s in 0.0f64..2.0,
        t in 0.0f64..2.0,
    ) {
        let h = fixtures::siegel_moser();
        let steps = |d: f64| ((d * 400.0).ceil() as usize).max(1);
        let direct = hamilton_flow_fixed(&h.symbol, &z, s + t, steps(s + t));
        let mid = hamilton_flow_fixed(&h.symbol, &z, s, steps(s));
        let composed = hamilton_flow_fixed(&h.symbol, &mid, t, steps(t));
        let err = direct.iter().zip(&composed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9, "error {err}");
    }

    #[test]
    fn jet_tensor_is_symmetric(
        u in prop::collection::vec(-1.0f64..1.0, 4),
        v in prop::collection::vec(-1.0f64..1.0, 4),
        w in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let j = example1_jet3();
        let base = j.eval(&[&u, &v, &w]).unwrap();
        for args in [[&w, &u, &v], [&v, &w, &u], [&u, &w, &v]] {
            let other = j.eval(&[args[0], args[1], args[2]]).unwrap();
            for (a, b) in base.iter().zip(&other) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
        let diag = j.eval(&[&u, &u, &u]).unwrap();
        for (a, b) in diag.iter().zip(j.eval_diag(&u)) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn rk_is_homogeneous_and_satisfies_euler(y in prop::collection::vec(-1.0f64..1.0, 4)) {
        for (r, k) in [(example1_r4(), 4), (siegel_moser_r3(), 3)] {
            let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
            let scale = r.max_abs_coeff();
            prop_assert!((r.eval(&y2) - 2f64.powi(k) * r.eval(&y)).abs() <= 1e-12 * scale * 2f64.powi(k));
            let g = r.gradient(&y);
            let euler: f64 = g.iter().zip(&y).map(|(a, b)| a * b).sum();
            prop_assert!((euler - k as f64 * r.eval(&y)).abs() <= 1e-12 * scale * k as f64 * 4.0);
        }
    }

    #[test]
    fn pairing_is_linear_and_conjugation_symmetric(
        c1 in 0.0f64..0.5,
        c2 in -0.5f64..0.5,
        s in 0.3f64..1.5,
        ar in -2.0f64..2.0,
        ai in -2.0f64..2.0,
        m in 1u32..3,
    ) {
        let f = Factor::single(Profile::Bump { center: c1, half_width: 1.0 });
        let g = Factor::single(Profile::Gaussian { center: c2, sigma: s });
        let a = Complex64::new(ar, ai);
        let one = Complex64::new(1.0, 0.0);
        let combo = Combo { a: &f, b: &g, ca: a, cb: one };
        for d in [Distribution::MinusI0 { m, center: 0.1 }, Distribution::FtMinusPower(0.5 - m as f64)] {
            let lhs = pair_distribution(&d, &combo).unwrap();
            let rhs = a * pair_distribution(&d, &f).unwrap() + pair_distribution(&d, &g).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()), "{lhs} vs {rhs}");
        }
        let minus = pair_distribution(&Distribution::MinusI0 { m, center: 0.1 }, &g).unwrap();
        let plus = pair_distribution(&Distribution::PlusI0 { m, center: 0.1 }, &g).unwrap();
        prop_assert!((plus - minus.conj()).norm() <= 1e-10 * (1.0 + minus.norm()));
    }
}

proptest! {
    #![proptest_config(small_config(24))]

    #[test]
    fn even_orders_are_pseudo_resonant(
        w in prop::collection::vec(prop_oneof![-5i32..=-1, 1i32..=5], 2..4),
        half in 1usize..3,
    ) {
        let w: Vec<f64> = w.into_iter().map(f64::from).collect();
        prop_assert!(pseudo_resonant(&w, 2 * half).unwrap().found);
    }

    #[test]
    fn order_three_resonances_are_pseudo_resonances(
        w in prop::collection::vec(prop_oneof![-4i32..=-1, 1i32..=4], 2..4),
    ) {
        let w: Vec<f64> = w.into_iter().map(f64::from).collect();
        let set = resonance_module(&w, 3).unwrap();
        if !set.vectors.is_empty() {
            prop_assert!(pseudo_resonant(&w, 3).unwrap().found);
        }
    }

    #[test]
    fn period_multiples_keep_the_fixed_space(
        p in 1i64..4,
        q in 1i64..4,
        m in 2i64..4,
    ) {
        let cd = fixtures::quadratic(&[1.0, p as f64 / q as f64], &[BlockType::Elliptic, BlockType::Elliptic]).critical;
        let t = 2.0 * PI;
        let base = restrict_forms(&cd, t, 1e-10).unwrap();
        let multiple = restrict_forms(&cd, m as f64 * t, 1e-10).unwrap();
        for b in &base.blocks {
            prop_assert!(multiple.blocks.contains(b));
        }
        for col in base.f_basis.column_iter() {
            let v = DVector::from_iterator(4, col.iter().copied());
            let moved = linearized_flow(&cd, t).m * &v;
            prop_assert!((moved - &v).norm() <= 1e-10);
        }
    }

    #[test]
    fn charts_match_numeric_jacobians(a in 0.0f64..(2.0 * PI), b in 0.0f64..(2.0 * PI), c in 0.1f64..0.9) {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5, -0.5, -0.5]));
        let mut p = Poly::zero(4);
        p.add_term(vec![2, 0, 2, 0], 1.0);
        p.add_term(vec![0, 4, 0, 0], -1.0);
        p.add_term(vec![0, 0, 0, 4], 0.5);
        let model = ModelPhase::new(q, HomogForm::new(4, p).unwrap()).unwrap();
        let grid = ChartGrid::standard(4);
        // off the cone
        let s = (1.0 - c * c).sqrt();
        let th = [c * a.cos(), c * a.sin(), s * b.cos(), s * b.sin()];
        if model.q_value(&th).abs() > 1e-3 {
            let chart = build_chart(&model, &th, ChartKind::First).unwrap();
            let rep = verify_chart(&chart, &model, &grid, 1e-10);
            prop_assert!(rep.jacobian_rel_error <= 1e-6, "{rep:?}");
        }
        // on the cone
        let h = 0.5f64.sqrt();
        let th = [h * a.cos(), h * a.sin(), h * b.cos(), h * b.sin()];
        if model.r.eval(&th).abs() > 1e-3 {
            let chart = build_chart(&model, &th, ChartKind::Second).unwrap();
            prop_assert_eq!(chart.sign, model.r.eval(&th).signum() as i32);
            let rep = verify_chart(&chart, &model, &grid, 1e-10);
            prop_assert!(rep.jacobian_rel_error <= 1e-6, "{rep:?}");
        }
    }
}

proptest! {
    #![proptest_config(small_config(8))]

    #[test]
    fn cone_samples_are_deterministic(seed in any::<u64>()) {
        let h = fixtures::example1();
        let p = restrict_forms(&h.critical, 2.0 * PI, 1e-10).unwrap();
        let method = ConeMethod::MonteCarlo { shell: 0.05 };
        let a = cone_samples(&p.q_t, 5000, seed, method).unwrap();
        let b = cone_samples(&p.q_t, 5000, seed, method).unwrap();
        prop_assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            prop_assert_eq!(&x.theta, &y.theta);
            prop_assert_eq!(x.weight, y.weight);
        }
    }

    #[test]
    fn exactly_one_branch_accepts(w2 in prop_oneof![Just(-3.0), Just(-2.0), Just(-1.0), Just(1.0), Just(2.0), Just(3.0)]) {
        let cd = fixtures::quadratic(&[1.0, w2], &[BlockType::Elliptic, BlockType::Elliptic]).critical;
        let period = restrict_forms(&cd, 2.0 * PI, 1e-10).unwrap();
        let phi = TestFunction::new(2.0 * PI, 0.5).unwrap();
        let mut r = Poly::zero(4);
        for (e, c) in [([0, 4, 0, 0], 1.0), ([0, 2, 0, 2], 2.0), ([0, 0, 0, 4], 1.0), ([4, 0, 0, 0], 0.5)] {
            r.add_term(e.to_vec(), c);
        }
        let r = HomogForm::new(4, r).unwrap();
        let one = theorem1(&cd, &period, &phi, 0.0).is_ok();
        let two = theorem2(&cd, &period, &r, &phi, 0.0, ConeOptions { samples: 4096, ..Default::default() }).is_ok();
        prop_assert!(one != two, "theorem1 {one}, theorem2 {two}");
        prop_assert_eq!(one, w2 > 0.0);
    }

    #[test]
    fn leading_value_scales_with_the_test_function(c in -3.0f64..3.0, h in 0.001f64..0.1) {
        let cd = fixtures::quadratic(&[1.0, 2.0], &[BlockType::Elliptic, BlockType::Elliptic]).critical;
        let period = restrict_forms(&cd, 2.0 * PI, 1e-10).unwrap();
        let phi = TestFunction::new(2.0 * PI, 0.5).unwrap();
        let base = theorem1(&cd, &period, &phi, 0.3).unwrap().leading_value(h);
        let scaled = theorem1(&cd, &period, &phi.scaled(c), 0.3).unwrap().leading_value(h);
        prop_assert!((scaled - base * c).norm() <= 1e-12 * base.norm().max(1e-300) * (1.0 + c.abs()));
    }

    #[test]
    fn theorem2_is_seed_invariant(seed in 2u64..1000) {
        let h = fixtures::example1();
        let period = restrict_forms(&h.critical, 2.0 * PI, 1e-10).unwrap();
        let phi = TestFunction::new(2.0 * PI, 0.5).unwrap();
        let opts = |s| ConeOptions { samples: 50_000, seed: s, method: Some(ConeMethod::MonteCarlo { shell: 0.05 }) };
        let a = theorem2(&h.critical, &period, example1_r4(), &phi, 0.0, opts(1)).unwrap();
        let b = theorem2(&h.critical, &period, example1_r4(), &phi, 0.0, opts(seed)).unwrap();
        let (ca, cb) = (a.cone.unwrap(), b.cone.unwrap());
        let se = (ca.std_error.powi(2) + cb.std_error.powi(2)).sqrt();
        prop_assert!((ca.value - cb.value).norm() <= 3.0 * se, "{} vs {} (se {se})", ca.value, cb.value);
        let scale = a.leading_coefficient.norm() / ca.value.norm();
        prop_assert!((a.leading_coefficient - b.leading_coefficient).norm() <= 3.0 * se * scale * (1.0 + 1e-9));
    }
}
