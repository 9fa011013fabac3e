//! Closed-form comparisons and empirical brackets frozen from measured runs.

use rbmo_core::coefficients::{k_coefficient, k_log_bound, k_of_cube};
use rbmo_core::geometry::{build_family, doubling_subfamily, Cube, CubeFamily, FamilyParams};
use rbmo_core::measures::{gen_cantor, gen_lebesgue_grid, growth_check, AtomicMeasure};
use rbmo_core::operators::{
    all_pairs, size_check, t1_field, KernelSpec, TruncatedOperator, TruncationGrid,
    DEFAULT_CANCELLATION_CAP,
};
use rbmo_core::rbmo::{equivalence_probe, standard_basket, SampledFunction, SeminormProblem};
use rbmo_core::t1::{
    boundedness_probe, certify_kernel, default_cancellation, kernel_suite, probe_basket, CancellationPolicy,
};
use rbmo_core::testfn::{
    average_points, build_test_family, fit_lower_bound, lemma_k_check, oscillation_lemma_check, phi_field,
    phi_vs_k_probe, step_one_constants,
};

fn lebesgue_setup(atoms: usize, base: f64, levels: usize, stride: usize) -> (AtomicMeasure, CubeFamily, CubeFamily) {
    let mu = gen_lebesgue_grid(&[(0.0, 1.0)], atoms).unwrap();
    let fam = build_family(&mu, &FamilyParams::new(base, levels).stride(stride)).unwrap();
    let dbl = doubling_subfamily(&mu, &fam, 10.0, 20.0).unwrap();
    (mu, fam, dbl)
}

#[test]
fn t1_matches_log_integral() {
    let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 1000).unwrap();
    let eps = mu.min_gap().unwrap() / 2.0;
    let t1 = t1_field(&mu, &KernelSpec::cauchy1d(), eps).unwrap();
    let at = |x: f64| t1.values[(x * 1000.0 - 0.5).round() as usize];
    // atoms at 0.4995 and 0.5005 straddle the center
    assert!(at(0.4995).abs() < 5e-3, "{}", at(0.4995));
    let expected = (0.2495f64 / 0.7505).ln();
    assert!((at(0.2495) - expected).abs() < 5e-3, "{} vs {expected}", at(0.2495));
}

#[test]
fn signed_power_is_sharp_on_cantor() {
    let mu = gen_cantor(6, 1.0 / 3.0).unwrap();
    let k = KernelSpec::signed_power(mu.growth_dim()).unwrap();
    let r = size_check(&k, &mu, &all_pairs(&mu)).unwrap();
    assert!((r.ratio - 1.0).abs() < 1e-12);
}

#[test]
fn k_of_central_lebesgue_cube() {
    let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 1000).unwrap();
    let q = Cube::with_side(vec![0.5], 2f64.powi(-6)).unwrap();
    let k = k_of_cube(&mu, &q).unwrap();
    // the dilate of side 1/2 holds exactly half the atoms, which is not more than half
    assert_eq!(k.n_steps, 6);
    assert!((k.value - 7.0).abs() < 0.05, "{}", k.value);

    let r = Cube::with_side(vec![0.5], 0.25).unwrap();
    let dilates = CubeFamily::from_cubes((1..=4).map(|j| q.scaled(2f64.powi(j))).collect());
    let c = growth_check(&mu, &dilates).unwrap().constant;
    let bound = k_log_bound(&q, &r, c).unwrap();
    assert!(bound >= k_coefficient(&mu, &q, &r).unwrap().value);
    assert!((bound - 5.0).abs() < 0.15);
}

/// Largest residual of the plug-in witness `f_Q = phi(y_Q)` in the `rho = 5`
/// all-cubes program, over the probed base points.
const STEP_ONE_RESIDUAL: f64 = 2.0;

#[test]
fn step_one_witness_is_feasible() {
    let (mu, fam, _) = lebesgue_setup(256, 1.0 / 64.0, 8, 16);
    let problem = SeminormProblem::all_cubes(&mu, &fam, 5.0).unwrap();
    let mut worst = 0.0f64;
    for b in [0, 64, 128, 200, 255] {
        let x = mu.point(b).to_vec();
        let phi = SampledFunction::new(&mu, phi_field(&mu, &x), "phi").unwrap();
        let plug = problem.evaluate(&mu, &phi, &step_one_constants(&mu, &x, 1.0, &fam)).unwrap().seminorm;
        let lp = problem.solve(&mu, &phi).unwrap().seminorm;
        assert!(plug.is_finite());
        assert!(lp <= plug * (1.0 + 1e-9));
        worst = worst.max(plug);
    }
    assert!(worst <= STEP_ONE_RESIDUAL);
}

/// `[lo, hi]` for `||f||_E / ||f||_{A,2}` over the standard basket.
const EQUIVALENCE_BRACKET: (f64, f64) = (0.99, 1.3);

#[test]
fn seminorm_flavors_are_comparable() {
    let (mu, fam, dbl) = lebesgue_setup(128, 1.0 / 32.0, 7, 8);
    let basket = standard_basket(&mu, 6, 11);
    let rep = equivalence_probe(&mu, &basket, &dbl, &fam, 2.0).unwrap();
    assert_eq!(rep.skipped.len(), 1);
    assert!(rep.min_ratio.unwrap() >= EQUIVALENCE_BRACKET.0);
    assert!(rep.max_ratio.unwrap() <= EQUIVALENCE_BRACKET.1);
}

#[test]
fn phi_over_k_homogeneous_parts_scale_together() {
    let mu = gen_cantor(7, 1.0 / 3.0).unwrap();
    let radii: Vec<f64> = (1..=6).map(|k| 2f64.powi(-k)).collect();
    let x = mu.point(40).to_vec();
    let p = phi_vs_k_probe(&mu, &x, &radii).unwrap();
    for lambda in [0.5, 3.0, 10.0] {
        let scaled = mu.dilated(lambda).unwrap();
        let xs: Vec<f64> = x.iter().map(|c| c * lambda).collect();
        let rs: Vec<f64> = radii.iter().map(|r| r * lambda).collect();
        let q = phi_vs_k_probe(&scaled, &xs, &rs).unwrap();
        for (a, b) in p.rows.iter().zip(&q.rows) {
            if a.k > 1.0 {
                let ra = (a.phi - 1.0) / (a.k - 1.0);
                let rb = (b.phi - 1.0) / (b.k - 1.0);
                assert!((ra - rb).abs() <= 1e-9 * ra.abs().max(1.0), "{ra} vs {rb}");
            }
        }
    }
    let beyond = phi_vs_k_probe(&mu, &x, &[4.0]).unwrap();
    assert_eq!(beyond.rows[0].phi, 1.0);
    assert!((beyond.rows[0].ratio - 1.0).abs() < 0.5);
}

#[test]
fn averages_grow_linearly_in_k() {
    let (mu, _, dbl) = lebesgue_setup(512, 1.0 / 64.0, 8, 32);
    let atoms: Vec<usize> = (0..512).step_by(32).collect();
    let family = build_test_family(&mu, &atoms, &dbl).unwrap();
    let fit = fit_lower_bound(&average_points(&family)).unwrap();
    assert!(fit.c1 > 0.0 && fit.c2 > 0.0);
    for (k, avg) in average_points(&family) {
        assert!(avg >= fit.c1 * k - fit.c2 - 1e-12);
    }
}

/// Largest `|b_{3,Q} - b_{3,R}| / (||f||_* K(Q, R))` over the standard basket.
const LEMMA_K_MAX: f64 = 2.0;

#[test]
fn decomposition_lemmas_hold_with_stable_constants() {
    let (mu, _, dbl) = lebesgue_setup(128, 1.0 / 32.0, 7, 16);
    let op = TruncatedOperator::new(KernelSpec::cauchy1d(), mu.min_gap().unwrap() / 2.0).unwrap();
    let mut stability = 0.0f64;
    let mut k_max = 0.0f64;
    for f in standard_basket(&mu, 3, 5) {
        if f.is_constant() {
            let rep = lemma_k_check(&mu, &f, &dbl, &op).unwrap();
            assert!(rep.max_ratio == 0.0);
            continue;
        }
        let osc = oscillation_lemma_check(&mu, &f, &dbl, &op).unwrap();
        stability = stability.max(osc.stability().unwrap());
        k_max = k_max.max(lemma_k_check(&mu, &f, &dbl, &op).unwrap().max_ratio);
    }
    assert!(stability <= 10.0);
    assert!(k_max <= LEMMA_K_MAX);
}

#[test]
fn certificate_scales_with_kernel() {
    let (mu, _, dbl) = lebesgue_setup(128, 1.0 / 32.0, 7, 16);
    let grid = TruncationGrid::geometric(&mu, 3).unwrap();
    let base = certify_kernel(&mu, &KernelSpec::cauchy1d(), &grid, &dbl, CancellationPolicy::Warn).unwrap();
    for lambda in [-2.0, 0.5, 3.0] {
        let k = KernelSpec::cauchy1d().scaled(lambda);
        let c = certify_kernel(&mu, &k, &grid, &dbl, CancellationPolicy::Warn).unwrap();
        assert!((c.best_c - lambda.abs() * base.best_c).abs() <= 1e-9 * base.best_c);
    }
}

/// `sup |T_eps 1|` over the truncation grid for a kernel passing the
/// cancellation check.
const T1_SUP: f64 = 7.0;

#[test]
fn t1_bounded_when_cancellation_passes() {
    let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 512).unwrap();
    let k = KernelSpec::cauchy1d();
    assert!(default_cancellation(&k, &mu, DEFAULT_CANCELLATION_CAP).unwrap().passes);
    let grid = TruncationGrid::geometric(&mu, 8).unwrap();
    let sup = grid
        .epsilons
        .iter()
        .flat_map(|&e| t1_field(&mu, &k, e).unwrap().values)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(sup <= T1_SUP);
}

#[test]
fn boundedness_probe_is_homogeneous_and_monotone() {
    let (mu, _, dbl) = lebesgue_setup(128, 1.0 / 32.0, 7, 16);
    let grid = TruncationGrid::geometric(&mu, 3).unwrap();
    let basket = probe_basket(&mu, &dbl, 3, 3, 9).unwrap();
    let stretched: Vec<SampledFunction> = basket.iter().map(|f| f.scaled(-4.0)).collect();
    let k = KernelSpec::cauchy1d();
    let a = boundedness_probe(&mu, &k, &basket, &dbl, &grid).unwrap();
    let b = boundedness_probe(&mu, &k, &stretched, &dbl, &grid).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert!((x.ratio - y.ratio).abs() <= 1e-9 * x.ratio.max(1.0));
    }

    let mut table: Vec<(f64, f64)> = kernel_suite(&mu)
        .unwrap()
        .iter()
        .map(|k| {
            let c = certify_kernel(&mu, k, &grid, &dbl, CancellationPolicy::Warn).unwrap().best_c;
            (c, boundedness_probe(&mu, k, &basket, &dbl, &grid).unwrap().supremum)
        })
        .collect();
    table.sort_by(|x, y| x.0.total_cmp(&y.0));
    assert_eq!(table[0], (0.0, 0.0));
    for w in table.windows(2) {
        assert!(w[1].1 >= w[0].1 * (1.0 - 1e-9), "{table:?}");
    }
}
