use proptest::prelude::*;

use rbmo_core::coefficients::{k_coefficient, k_of_cube};
use rbmo_core::geometry::{contains, doubling_subfamily, is_doubling, Cube, CubeFamily};
use rbmo_core::measures::{gen_cantor, gen_lebesgue_grid, growth_check, mass_of_cube, AtomicMeasure};
use rbmo_core::operators::{KernelSpec, TruncatedOperator};
use rbmo_core::rbmo::{SampledFunction, SeminormProblem};
use rbmo_core::t1::certify_condition_ii;
use rbmo_core::testfn::{decompose, phi_field};

fn measure_strategy() -> impl Strategy<Value = AtomicMeasure> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.01f64..1.0), 1..40)
        .prop_map(|atoms| AtomicMeasure::new(2, 2.0, atoms.into_iter().map(|(x, y, w)| (vec![x, y], w)).collect()).unwrap())
}

fn cube_strategy() -> impl Strategy<Value = Cube> {
    (-1.5f64..1.5, -1.5f64..1.5, 0.01f64..1.5).prop_map(|(x, y, h)| Cube::new(vec![x, y], h).unwrap())
}

/// A cube together with one containing it.
fn nested_strategy() -> impl Strategy<Value = (Cube, Cube)> {
    (cube_strategy(), 1.0f64..8.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(q, grow, sx, sy)| {
        let big = q.half_side * grow;
        let slack = big - q.half_side;
        let r = Cube::new(vec![q.center[0] + sx * slack, q.center[1] + sy * slack], big).unwrap();
        (q, r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_is_monotone(mu in measure_strategy(), (q, r) in nested_strategy()) {
        prop_assume!(contains(&r, &q));
        prop_assert!(mass_of_cube(&mu, &q).unwrap() <= mass_of_cube(&mu, &r).unwrap());
    }

    #[test]
    fn bounding_cube_holds_all_mass(mu in measure_strategy()) {
        let bbox = mu.bounding_box();
        let center: Vec<f64> = bbox.iter().map(|(a, b)| 0.5 * (a + b)).collect();
        let half = bbox.iter().map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max).max(1e-9);
        let q = Cube::new(center, half).unwrap();
        prop_assert_eq!(mass_of_cube(&mu, &q).unwrap(), mu.total_mass());
    }

    #[test]
    fn growth_ratio_scales(mu in measure_strategy(), q in cube_strategy(), lambda in 0.1f64..10.0) {
        let scaled = mu.dilated(lambda).unwrap();
        let lq = Cube::new(q.center.iter().map(|c| c * lambda).collect(), q.half_side * lambda).unwrap();
        let a = growth_check(&mu, &CubeFamily::from_cubes(vec![q])).unwrap().constant;
        let b = growth_check(&scaled, &CubeFamily::from_cubes(vec![lq])).unwrap().constant;
        prop_assert!((b - a / lambda.powi(2)).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn containment_is_transitive(p in cube_strategy(), g1 in 1.0f64..3.0, g2 in 1.0f64..3.0, s in -1.0f64..1.0) {
        let q = Cube::new(vec![p.center[0] + s * p.half_side * (g1 - 1.0), p.center[1]], p.half_side * g1).unwrap();
        let r = Cube::new(q.center.clone(), q.half_side * g2).unwrap();
        if contains(&q, &p) && contains(&r, &q) {
            prop_assert!(contains(&r, &p));
        }
    }

    #[test]
    fn doubling_subfamily_grows_with_beta(mu in measure_strategy(), cubes in prop::collection::vec(cube_strategy(), 1..12), extra in 0.0f64..500.0) {
        let fam = CubeFamily::from_cubes(cubes);
        let small = doubling_subfamily(&mu, &fam, 2.0, 8.0).unwrap();
        let large = doubling_subfamily(&mu, &fam, 2.0, 8.0 + extra).unwrap();
        for q in small.iter() {
            prop_assert!(large.iter().any(|r| r == q));
        }
    }

    #[test]
    fn k_is_at_least_one_and_grows_with_outer_cube(mu in measure_strategy(), (q, r) in nested_strategy(), grow in 1.0f64..4.0) {
        prop_assume!(contains(&r, &q));
        let r2 = Cube::new(r.center.clone(), r.half_side * grow).unwrap();
        let k = k_coefficient(&mu, &q, &r).unwrap();
        let k2 = k_coefficient(&mu, &q, &r2).unwrap();
        prop_assert!(k.value >= 1.0);
        prop_assert!(k2.value >= k.value);
        prop_assert_eq!(k.terms.len(), k.n_steps);
    }

    #[test]
    fn k_splices_on_concentric_triples(mu in measure_strategy(), q in cube_strategy(), a in 0u32..5, b in 0u32..5) {
        let mid = q.scaled(2f64.powi(a as i32));
        let top = q.scaled(2f64.powi((a + b) as i32));
        let whole = k_coefficient(&mu, &q, &top).unwrap().value;
        let first = k_coefficient(&mu, &q, &mid).unwrap().value;
        let second = k_coefficient(&mu, &mid, &top).unwrap().value;
        let dilates: Vec<Cube> = (1..=a + b).map(|j| q.scaled(2f64.powi(j as i32))).collect();
        let c = if dilates.is_empty() { 0.0 } else { growth_check(&mu, &CubeFamily::from_cubes(dilates)).unwrap().constant };
        prop_assert!((whole - first - second).abs() <= 1.0 + c + 1e-12);
    }

    #[test]
    fn comparable_cubes_have_bounded_k(mu in measure_strategy(), (q, r) in nested_strategy()) {
        prop_assume!(contains(&r, &q) && r.side() <= 8.0 * q.side());
        let k = k_coefficient(&mu, &q, &r).unwrap();
        let dilates: Vec<Cube> = (1..=k.n_steps).map(|j| q.scaled(2f64.powi(j as i32))).collect();
        let c = if dilates.is_empty() { 0.0 } else { growth_check(&mu, &CubeFamily::from_cubes(dilates)).unwrap().constant };
        prop_assert!(k.value <= 1.0 + 3.0 * c + 1e-12);
    }

    #[test]
    fn truncated_operator_is_linear(
        vals in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 16),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        eps in 0.001f64..0.5,
    ) {
        let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 16).unwrap();
        let f = SampledFunction::new(&mu, vals.iter().map(|v| v.0).collect(), "f").unwrap();
        let g = SampledFunction::new(&mu, vals.iter().map(|v| v.1).collect(), "g").unwrap();
        let op = TruncatedOperator::new(KernelSpec::cauchy1d(), eps).unwrap();
        let lhs = op.apply(&mu, &f.scaled(alpha).plus(&g.scaled(beta)));
        let tf = op.apply(&mu, &f);
        let tg = op.apply(&mu, &g);
        for i in 0..mu.len() {
            let rhs = alpha * tf.values[i] + beta * tg.values[i];
            prop_assert!((lhs.values[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()) * 100.0);
        }
    }

    #[test]
    fn phi_is_at_least_one_and_radially_monotone(mu in measure_strategy(), base in 0usize..40) {
        let x = mu.point(base % mu.len()).to_vec();
        let field = phi_field(&mu, &x);
        let mut order: Vec<usize> = (0..mu.len()).collect();
        let dist = |i: usize| rbmo_core::measures::linf_dist(mu.point(i), &x);
        order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)));
        prop_assert!(field.iter().all(|&v| v >= 1.0));
        for w in order.windows(2) {
            prop_assert!(field[w[0]] >= field[w[1]]);
        }
    }

    #[test]
    fn decomposition_is_exact(vals in prop::collection::vec(-10.0f64..10.0, 32), c in -10.0f64..10.0, at in 0usize..32, h in 0.01f64..0.4) {
        let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 32).unwrap();
        let f = SampledFunction::new(&mu, vals, "f").unwrap();
        let q = Cube::new(mu.point(at).to_vec(), h).unwrap();
        let op = TruncatedOperator::new(KernelSpec::cauchy1d(), 0.01).unwrap();
        let d = decompose(&mu, &f, c, &q, &op).unwrap();
        for i in 0..mu.len() {
            prop_assert!((d.f1 + d.f2.values[i] + d.f3.values[i] - f.values[i]).abs() <= 1e-12);
            prop_assert_eq!(d.f2.values[i] * d.f3.values[i], 0.0);
        }
    }
}

fn lebesgue_family(mu: &AtomicMeasure, count: usize) -> CubeFamily {
    let cubes = (0..count)
        .map(|k| {
            let c = mu.point((k * 7) % mu.len()).to_vec();
            Cube::new(c, 0.03 * (1 + k % 5) as f64).unwrap()
        })
        .collect();
    CubeFamily::from_cubes(cubes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seminorm_homogeneous_subadditive_and_witnessed(
        fv in prop::collection::vec(-1.0f64..1.0, 24),
        gv in prop::collection::vec(-1.0f64..1.0, 24),
        lambda in -4.0f64..4.0,
    ) {
        let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 24).unwrap();
        let fam = lebesgue_family(&mu, 8);
        let p = SeminormProblem::doubling(&mu, &fam).unwrap();
        let f = SampledFunction::new(&mu, fv, "f").unwrap();
        let g = SampledFunction::new(&mu, gv, "g").unwrap();
        let wf = p.solve(&mu, &f).unwrap();
        let sg = p.solve(&mu, &g).unwrap().seminorm;
        let sl = p.solve(&mu, &f.scaled(lambda)).unwrap().seminorm;
        let sfg = p.solve(&mu, &f.plus(&g)).unwrap().seminorm;
        prop_assert!((sl - lambda.abs() * wf.seminorm).abs() <= 1e-9 * (lambda.abs() * wf.seminorm).max(1e-12));
        prop_assert!(sfg <= wf.seminorm + sg + 1e-9);
        let again = p.evaluate(&mu, &f, &wf.constant_values()).unwrap();
        prop_assert!(again.seminorm <= wf.seminorm * (1.0 + 1e-9));
        for e in &wf.constants {
            prop_assert!(e.osc_residual <= wf.seminorm * (1.0 + 1e-9));
        }
    }

    #[test]
    fn adding_cubes_never_lowers_values(fv in prop::collection::vec(-1.0f64..1.0, 24), extra in 1usize..6) {
        let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 24).unwrap();
        let small = lebesgue_family(&mu, 5);
        let large = lebesgue_family(&mu, 5 + extra);
        let f = SampledFunction::new(&mu, fv, "f").unwrap();
        let a = SeminormProblem::doubling(&mu, &small).unwrap().solve(&mu, &f).unwrap().seminorm;
        let b = SeminormProblem::doubling(&mu, &large).unwrap().solve(&mu, &f).unwrap().seminorm;
        prop_assert!(b >= a * (1.0 - 1e-9) - 1e-12);
        let ca = certify_condition_ii(&mu, &[(0.01, f.clone())], &small).unwrap().best_c;
        let cb = certify_condition_ii(&mu, &[(0.01, f.clone())], &large).unwrap().best_c;
        prop_assert!(cb >= ca * (1.0 - 1e-9) - 1e-12);
    }

    #[test]
    fn certificate_is_gauge_invariant(fv in prop::collection::vec(-1.0f64..1.0, 24), shift in -50.0f64..50.0) {
        let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 24).unwrap();
        let fam = lebesgue_family(&mu, 8);
        let f = SampledFunction::new(&mu, fv, "f").unwrap();
        let a = certify_condition_ii(&mu, &[(0.01, f.clone())], &fam).unwrap().best_c;
        let b = certify_condition_ii(&mu, &[(0.01, f.shifted(shift))], &fam).unwrap().best_c;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }
}

/// The map `x -> x / 3` carries the depth-`d - 1` Cantor measure onto the left
/// half of the depth-`d` one; aligned triadic cubes keep their doubling status.
#[test]
fn cantor_doubling_is_self_similar() {
    let coarse = gen_cantor(6, 1.0 / 3.0).unwrap();
    let fine = gen_cantor(7, 1.0 / 3.0).unwrap();
    let n = fine.growth_dim();
    let (alpha, beta) = (9.0, 2.0 * 9f64.powf(n));
    let mut compared = 0;
    for level in 1..=6 {
        let side = 3f64.powi(-level);
        for j in 0..3u32.pow(level as u32) {
            let q = Cube::with_side(vec![(j as f64 + 0.5) * side], side).unwrap();
            if q.center[0] + alpha * q.half_side >= 2.0 {
                continue;
            }
            let image = Cube::with_side(vec![q.center[0] / 3.0], side / 3.0).unwrap();
            assert_eq!(
                is_doubling(&coarse, &q, alpha, beta).unwrap(),
                is_doubling(&fine, &image, alpha, beta).unwrap(),
                "level {level}, interval {j}"
            );
            compared += 1;
        }
    }
    assert!(compared > 100);
}

#[test]
fn k_of_cube_is_k_to_first_heavy_dilate() {
    let mu = gen_cantor(6, 0.25).unwrap();
    for i in (0..mu.len()).step_by(5) {
        let q = Cube::new(mu.point(i).to_vec(), 0.01).unwrap();
        let k = k_of_cube(&mu, &q).unwrap();
        let top = q.scaled(2f64.powi(k.n_steps as i32));
        assert!(mass_of_cube(&mu, &top).unwrap() > 0.5);
        if k.n_steps > 1 {
            assert!(mass_of_cube(&mu, &q.scaled(2f64.powi(k.n_steps as i32 - 1))).unwrap() <= 0.5);
        }
        assert!((k.value - k_coefficient(&mu, &q, &top).unwrap().value).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn measure_json_round_trips_exactly(
        atoms in prop::collection::vec((prop::collection::vec(-1e3f64..1e3, 2), 1e-6f64..1e3), 1..12)
    ) {
        let mu = AtomicMeasure::new(2, 1.5, atoms).unwrap();
        let text = mu.to_json_string();
        let back = AtomicMeasure::from_json_str(&text).unwrap();
        prop_assert_eq!(back.to_json_string(), text);
    }
}
