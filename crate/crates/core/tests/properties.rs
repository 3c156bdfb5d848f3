//! Property tests for the lattice calculus and the functional layers:
//! quasi-norm axioms, derivative composition, Plancherel, translation
//! equivariance, and homogeneity of the cone functionals.

use hardylab::conegeo::TimeGrid;
use hardylab::elliptic::{assemble, random_elliptic_coefficients};
use hardylab::funcalc::factorize;
use hardylab::lattice::{
    apply_offset, forward_coefficients, gradient_block, hardy_littlewood_maximal, lp_quasinorm,
    make_grid, partial_derivative, synthesize, GridFunction, MultiIndex,
};
use ndarray::Array1;
use num_complex::Complex64;
use proptest::prelude::*;

fn grid_values(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), n)
}

fn function_from(grid_n: usize, vals: &[(f64, f64)]) -> GridFunction {
    let grid = make_grid(1, grid_n).unwrap();
    let values: Array1<Complex64> = vals.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    GridFunction::from_values(grid, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quasinorm_absolute_homogeneity(
        vals in grid_values(16),
        scale_re in -5.0..5.0f64,
        scale_im in -5.0..5.0f64,
        p in 0.2..4.0f64,
    ) {
        let f = function_from(16, &vals);
        let c = Complex64::new(scale_re, scale_im);
        let lhs = lp_quasinorm(&f.scale(c), p).unwrap();
        let rhs = c.norm() * lp_quasinorm(&f, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs));
    }

    #[test]
    fn quasinorm_triangle_inequalities(
        a in grid_values(16),
        b in grid_values(16),
        p in 0.2..4.0f64,
    ) {
        let f = function_from(16, &a);
        let g = function_from(16, &b);
        let sum = f.add(&g).unwrap();
        let nf = lp_quasinorm(&f, p).unwrap();
        let ng = lp_quasinorm(&g, p).unwrap();
        let ns = lp_quasinorm(&sum, p).unwrap();
        if p >= 1.0 {
            prop_assert!(ns <= nf + ng + 1e-10 * (1.0 + nf + ng));
        } else {
            // p-triangle inequality for the quasi-norm range
            prop_assert!(
                ns.powf(p) <= nf.powf(p) + ng.powf(p) + 1e-10 * (1.0 + nf.powf(p) + ng.powf(p))
            );
        }
    }

    #[test]
    fn derivative_composition(
        vals in grid_values(16),
        a in 0u32..3,
        b in 0u32..3,
    ) {
        // band-limit first so repeated differentiation stays in range
        let raw = function_from(16, &vals);
        let mut coeffs = forward_coefficients(&raw);
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let grid = raw.grid();
            if grid.frequencies(idx)[0].abs() > 4 {
                *c = Complex64::default();
            }
        }
        let f = synthesize(raw.grid(), &coeffs).unwrap();
        let alpha = MultiIndex::new(vec![a]);
        let beta = MultiIndex::new(vec![b]);
        let steps = partial_derivative(&partial_derivative(&f, &beta).unwrap(), &alpha).unwrap();
        let joint = partial_derivative(&f, &alpha.add(&beta)).unwrap();
        let scale = joint.norm_l2().max(1.0);
        prop_assert!(steps.sub(&joint).unwrap().norm_l2() <= 1e-10 * scale);
    }

    #[test]
    fn plancherel_for_random_functions(vals in grid_values(32)) {
        let f = function_from(32, &vals);
        let coeffs = forward_coefficients(&f);
        let sum: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let l2 = f.norm_l2().powi(2);
        prop_assert!((sum - l2).abs() <= 1e-12 * (1.0 + l2));
    }

    #[test]
    fn maximal_function_translation_equivariance(
        vals in grid_values(16),
        shift in 0usize..16,
    ) {
        let f = function_from(16, &vals);
        let grid = f.grid();
        let shifted_values: Array1<Complex64> = (0..16)
            .map(|i| f.values()[apply_offset(grid, i, [shift as i64, 0])])
            .collect();
        let fs = GridFunction::from_values(grid, shifted_values).unwrap();
        let mf = hardy_littlewood_maximal(&f);
        let mfs = hardy_littlewood_maximal(&fs);
        for i in 0..16usize {
            let expect = mf.values()[apply_offset(grid, i, [shift as i64, 0])];
            prop_assert!((mfs.values()[i].re - expect.re).abs() < 1e-12);
        }
    }

    #[test]
    fn maximal_dominates_pointwise(vals in grid_values(16)) {
        let f = function_from(16, &vals);
        let m = hardy_littlewood_maximal(&f);
        for (mv, fv) in m.values().iter().zip(f.values().iter()) {
            prop_assert!(mv.re >= fv.norm() - 1e-12);
        }
    }

    #[test]
    fn grid_function_serde_round_trip(vals in grid_values(8)) {
        let f = function_from(8, &vals);
        let json = serde_json::to_string(&f).unwrap();
        let back: GridFunction = serde_json::from_str(&json).unwrap();
        for (a, b) in f.values().iter().zip(back.values().iter()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}

#[test]
fn gradient_magnitude_of_mode_is_constant() {
    let g = make_grid(2, 8).unwrap();
    let f = GridFunction::fourier_mode(g, &[1, 2]);
    let mag = gradient_block(&f, 1).magnitude();
    let expect = 2.0 * std::f64::consts::PI * (5.0f64).sqrt();
    for v in mag.values() {
        assert!((v.re - expect).abs() < 1e-9);
    }
}

#[test]
fn aperture_change_constant_is_resolution_stable() {
    // the norm-level change-of-aperture constant moves by ≤ 25% under N → 2N
    use hardylab::conegeo::{a_functional_all, build_tent_field, ConeSampling, Generator};
    use hardylab::experiments::OperatorSpec;
    let mut constants = Vec::new();
    for n in [32usize, 64] {
        let g = make_grid(1, n).unwrap();
        let fact = OperatorSpec::polyharmonic(1).factorized(g).unwrap();
        let f = GridFunction::fourier_mode(g, &[2]);
        let tg = hardylab::conegeo::make_time_grid(0.03125, 0.25, 16).unwrap();
        let field = build_tent_field(&fact, &f, Generator::HeatPower { k: 1 }, &tg).unwrap();
        let narrow = ConeSampling::new(g, 1.0, &tg).unwrap();
        let wide = ConeSampling::new(g, 2.0, &tg).unwrap();
        let a1 = lp_quasinorm(&a_functional_all(&field, &narrow).unwrap(), 1.0).unwrap();
        let a2 = lp_quasinorm(&a_functional_all(&field, &wide).unwrap(), 1.0).unwrap();
        constants.push(a2 / a1);
    }
    let drift = (constants[1] / constants[0]).max(constants[0] / constants[1]);
    assert!(drift <= 1.25, "aperture constant drift ×{drift:.3}");
}

#[test]
fn molecule_psum_constant_is_resolution_stable() {
    // ‖Σ λ_j α_j‖_{H^p}^p ≤ C Σ|λ_j|^p with C stable within ±50% under N→2N
    use hardylab::experiments::{molecule_study, OperatorSpec};
    let mut constants = Vec::new();
    for n in [64usize, 128] {
        let g = make_grid(1, n).unwrap();
        let fact = OperatorSpec::polyharmonic(1).factorized(g).unwrap();
        // the same continuum time window on both resolutions
        let tg = hardylab::conegeo::make_time_grid(1.0 / 64.0, 0.25, 32).unwrap();
        let rep = molecule_study(&fact, 6, 0.08, 1.0, 2, 1.0, 31, &tg, 10.0).unwrap();
        assert!(rep.all_verified);
        constants.push(rep.psum_constant);
    }
    let drift = (constants[1] / constants[0]).max(constants[0] / constants[1]);
    assert!(drift <= 1.5, "p-sum control constant drift ×{drift:.3}");
}

#[test]
fn tent_lemma_hypothesis_and_conclusion_hold_on_data() {
    use hardylab::experiments::{tent_domination_check, FamilySpec, OperatorSpec};
    let g = make_grid(1, 32).unwrap();
    let fact = OperatorSpec::random(1, 0.3, 21).factorized(g).unwrap();
    let family = FamilySpec::standard(21).realize(&fact).unwrap();
    let tg = TimeGrid::default_for(g);
    for f in family.members.iter().take(3) {
        let rep = tent_domination_check(&fact, f, 1.0, &tg).unwrap();
        assert!(rep.pass, "C0 = {}, C1 = {}", rep.hypothesis_c0, rep.conclusion_c1);
        assert!(rep.hypothesis_c0 > 0.0 && rep.conclusion_c1 > 0.0);
    }
}

#[test]
fn two_dimensional_path_works_end_to_end() {
    use hardylab::conegeo::make_time_grid;
    use hardylab::functionals::{maximal_function, square_function, MaximalKind, SquareKind};
    let g = make_grid(2, 12).unwrap();
    let op = assemble(&hardylab::elliptic::polyharmonic_coefficients(1, g).unwrap()).unwrap();
    let fact = factorize(&op).unwrap();

    // semigroup on a 2-d mode matches the symbol
    let f = GridFunction::fourier_mode(g, &[1, 1]);
    let sigma = 2.0 * (2.0 * std::f64::consts::PI).powi(2);
    let t = 0.5 / sigma;
    let heat = hardylab::funcalc::semigroup_apply(&fact, t, &f).unwrap();
    let expect = (-t * sigma).exp();
    let err = heat
        .sub(&f.scale(Complex64::from(expect)))
        .unwrap()
        .norm_l2()
        / expect;
    assert!(err < 1e-9, "2d semigroup error {err}");

    // square and maximal functionals run and respect basic structure
    let tg = make_time_grid(g.spacing(), 0.25, 8).unwrap();
    let s = square_function(&fact, &f, SquareKind::Vertical, 1, 1.0, &tg).unwrap();
    assert!(s.values().iter().all(|v| v.re.is_finite() && v.re > 0.0));
    let c = GridFunction::constant(g, Complex64::from(1.5));
    let r = maximal_function(&fact, &c, MaximalKind::Radial, 1.0, &tg, None).unwrap();
    let first = r.values()[0].re;
    for v in r.values() {
        assert!((v.re - first).abs() < 1e-9 * first);
    }
}

#[test]
fn semigroup_contraction_and_kernel_conventions_hold_together() {
    // a cross-module smoke chain kept out of the unit suites: random (E1)
    // operator, random probes, the three kernel conventions at once
    let g = make_grid(1, 16).unwrap();
    let coeffs = random_elliptic_coefficients(1, g, 0.35, 1234).unwrap();
    let op = assemble(&coeffs).unwrap();
    let fact = factorize(&op).unwrap();
    let tg = TimeGrid::default_for(g);

    let one = GridFunction::constant(g, Complex64::from(1.0));
    let heat_one = hardylab::funcalc::semigroup_apply(&fact, 0.3, &one).unwrap();
    assert!(heat_one.sub(&one).unwrap().norm_l2() < 1e-8);

    let q_one = hardylab::funcalc::qk_apply(&fact, 2, 0.3, &one).unwrap();
    assert!(q_one.norm_l2() < 1e-8);

    let sqrt_one = hardylab::funcalc::sqrt_apply(&fact, &one).unwrap();
    assert!(sqrt_one.norm_l2() < 2e-5 * op.fro_norm());

    let _ = tg;
}
