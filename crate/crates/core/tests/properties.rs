use isaacs_core::engine::{
    build_lattice, dp_value_deterministic, dp_value_random, simulate, CoinSource, NoiseSource, PlayMode,
};
use isaacs_core::hamiltonian::{hamiltonians, DifferentialState, HamiltonianKind};
use isaacs_core::pde::{solve_with, SpatialGrid};
use isaacs_core::problem::{
    eval_coefficients, ActionSet, CoefficientFamily, CoefficientSpec, PayoffSpec, PrioritySpec, ProblemSpec,
};
use isaacs_core::schedule::{check_density, forced_epsilon, make_marks, make_uniform_partition, MarkSequence, SubGrid};
use isaacs_core::static_game::{
    lower_value, mixed_value, representation_residual, saddle, upper_value, LocalGameMatrix,
};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = CoefficientFamily> {
    let p = -3.0..3.0f64;
    prop_oneof![
        (p.clone(), p.clone()).prop_map(|(drift, vol)| CoefficientFamily::Constant { drift, vol }),
        (p.clone(), p.clone(), p.clone(), p.clone(), p.clone()).prop_map(|(drift, reversion, u_gain, v_gain, vol)| {
            CoefficientFamily::Affine {
                drift,
                reversion,
                u_gain,
                v_gain,
                vol,
            }
        }),
        (p.clone(), p.clone()).prop_map(|(kappa, vol)| CoefficientFamily::Bilinear { kappa, vol }),
        (p.clone(), p.clone(), p).prop_map(|(kappa, vol, vol_gain)| CoefficientFamily::BilinearVol {
            kappa,
            vol,
            vol_gain
        }),
    ]
}

fn priority() -> impl Strategy<Value = PrioritySpec> {
    prop_oneof![
        (0.0..=1.0f64).prop_map(PrioritySpec::constant),
        (-1.0..2.0f64, -2.0..2.0f64).prop_map(|(intercept, slope)| PrioritySpec::LinearTime { intercept, slope }),
        (0.0..=1.0f64, 0.0..=1.0f64, -5.0..5.0f64, -2.0..2.0f64).prop_map(|(low, high, slope, center)| {
            PrioritySpec::Logistic {
                low,
                high,
                slope,
                center,
            }
        }),
    ]
}

fn time_only_priority() -> impl Strategy<Value = PrioritySpec> {
    prop_oneof![
        (0.0..=1.0f64).prop_map(PrioritySpec::constant),
        (0.0..1.0f64, -1.0..1.0f64).prop_map(|(intercept, slope)| PrioritySpec::LinearTime { intercept, slope }),
    ]
}

fn matrix() -> impl Strategy<Value = LocalGameMatrix> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(r, c)| {
        // Small integers make ties common, which exercises tie-breaking.
        prop::collection::vec(prop_oneof![(-3i32..=3).prop_map(f64::from), -10.0..10.0f64], r * c)
            .prop_map(move |v| LocalGameMatrix::new(r, c, v).unwrap())
    })
}

fn scalar_actions() -> impl Strategy<Value = ActionSet> {
    prop::collection::btree_set(-4i32..=4, 1..=3)
        .prop_map(|s| ActionSet::scalar(&s.into_iter().map(|a| a as f64 * 0.5).collect::<Vec<_>>()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn coefficients_finite_with_declared_shape(
        fam in family(), dim in 1usize..=3, noise in 1usize..=3,
        t in 0.0..1.0f64, x in prop::collection::vec(-50.0..50.0f64, 3),
        ui in 0usize..2, vi in 0usize..2,
    ) {
        let mut spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.5));
        spec.horizon = 1.0;
        spec.coefficients = CoefficientSpec::new(fam, dim, noise).unwrap();
        spec.start_state = vec![0.0; dim];
        let u = spec.u_actions.get(ui).to_vec();
        let v = spec.v_actions.get(vi).to_vec();
        let c = eval_coefficients(&spec, t, &x[..dim], &u, &v).unwrap();
        prop_assert_eq!(c.drift.len(), dim);
        prop_assert_eq!(c.diffusion.len(), dim * noise);
        prop_assert!(c.drift.iter().chain(&c.diffusion).all(|v| v.is_finite()));
    }

    #[test]
    fn priority_is_a_probability(prio in priority(), t in 0.0..5.0f64, x in -100.0..100.0f64) {
        let p = prio.eval_scalar(t, x);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn state_independent_families_ignore_the_state(
        fam in family(), t in 0.0..1.0f64, x in -20.0..20.0f64, y in -20.0..20.0f64,
    ) {
        let spec = CoefficientSpec::scalar(fam);
        prop_assume!(spec.state_independent());
        let a = spec.eval(t, &[x], &[1.0], &[-1.0]);
        let b = spec.eval(t, &[y], &[1.0], &[-1.0]);
        prop_assert!(a.drift.iter().zip(&b.drift).all(|(p, q)| p.to_bits() == q.to_bits()));
        prop_assert!(a.diffusion.iter().zip(&b.diffusion).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn lower_never_exceeds_upper(f in matrix()) {
        prop_assert!(lower_value(&f).value <= upper_value(&f).value + 1e-12);
    }

    #[test]
    fn mixed_value_is_affine_in_priority(f in matrix(), a in 0.0..=1.0f64, b in 0.0..=1.0f64, lambda in 0.0..=1.0f64) {
        let lhs = mixed_value(&f, lambda * a + (1.0 - lambda) * b).unwrap();
        let rhs = lambda * mixed_value(&f, a).unwrap() + (1.0 - lambda) * mixed_value(&f, b).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn representation_identity(f in matrix(), prio in 0.0..=1.0f64) {
        prop_assert!(representation_residual(&f, prio).unwrap().residual < 1e-12);
    }

    #[test]
    fn saddle_indices_are_reproducible(f in matrix()) {
        let copy = LocalGameMatrix::new(f.rows(), f.cols(), f.values().to_vec()).unwrap();
        prop_assert_eq!(saddle(&f), saddle(&copy));
    }

    #[test]
    fn hamiltonian_sandwich(
        prio in 0.0..=1.0f64, t in 0.0..0.5f64, x in -5.0..5.0f64, q in -10.0..10.0f64, m in -10.0..10.0f64,
    ) {
        let spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(prio));
        let h = hamiltonians(&spec, &DifferentialState::scalar(t, x, q, m)).unwrap();
        prop_assert!(h.lower <= h.mixed + 1e-12 && h.mixed <= h.upper + 1e-12);
    }

    #[test]
    fn hamiltonians_are_degenerate_elliptic(
        fam in family(), prio in 0.0..=1.0f64, x in -3.0..3.0f64, q in -5.0..5.0f64, m in -5.0..5.0f64, bump in 0.0..5.0f64,
    ) {
        let mut spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(prio));
        spec.coefficients = CoefficientSpec::scalar(fam);
        let h1 = hamiltonians(&spec, &DifferentialState::scalar(0.1, x, q, m)).unwrap();
        let h2 = hamiltonians(&spec, &DifferentialState::scalar(0.1, x, q, m + bump)).unwrap();
        let tol = 1e-12 * (1.0 + h1.upper.abs() + h2.upper.abs());
        prop_assert!(h2.lower >= h1.lower - tol);
        prop_assert!(h2.upper >= h1.upper - tol);
        prop_assert!(h2.mixed >= h1.mixed - tol);
    }

    #[test]
    fn hessian_additivity_with_action_free_diffusion(
        vol in -2.0..2.0f64, prio in 0.0..=1.0f64, q in -5.0..5.0f64, m1 in -5.0..5.0f64, m2 in -5.0..5.0f64,
    ) {
        let mut spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(prio));
        spec.coefficients = CoefficientSpec::scalar(CoefficientFamily::Bilinear { kappa: 4.0, vol });
        let h1 = hamiltonians(&spec, &DifferentialState::scalar(0.0, 0.0, q, m1)).unwrap();
        let h12 = hamiltonians(&spec, &DifferentialState::scalar(0.0, 0.0, q, m1 + m2)).unwrap();
        let shift = 0.5 * vol * vol * m2;
        let tol = 1e-12 * (1.0 + h12.upper.abs() + h1.upper.abs() + shift.abs());
        prop_assert!((h12.lower - h1.lower - shift).abs() <= tol);
        prop_assert!((h12.upper - h1.upper - shift).abs() <= tol);
        prop_assert!((h12.mixed - h1.mixed - shift).abs() <= tol);
    }

    #[test]
    fn marks_meet_their_forced_epsilon(prio in time_only_priority(), n in 1usize..200, block in 1usize..20, end in 0.1..2.0f64) {
        let part = make_uniform_partition(0.0, end, n).unwrap();
        let (marks, sub) = make_marks(&part, &prio, block).unwrap();
        let eps = forced_epsilon(&part, &sub, &prio).unwrap();
        let report = check_density(&part, &marks, &sub, &prio, eps).unwrap();
        prop_assert!(report.pass, "{:?}", report);
        prop_assert_eq!(sub.indices()[0], 0);
        prop_assert!(sub.indices().windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*sub.indices().last().unwrap(), n);
    }

    #[test]
    fn refinement_halves_the_deviation_bound(p in 0.0..=1.0f64, m in 1usize..10, block in 1usize..12) {
        let n = m * block;
        let prio = PrioritySpec::constant(p);
        let coarse = make_uniform_partition(0.0, 1.0, n).unwrap();
        let fine = make_uniform_partition(0.0, 1.0, 2 * n).unwrap();
        let (m1, s1) = make_marks(&coarse, &prio, block).unwrap();
        let (m2, s2) = make_marks(&fine, &prio, 2 * block).unwrap();
        // A block of `block` steps deviates by less than one step over the block length.
        let bound = 1.0 / block as f64;
        let d1 = check_density(&coarse, &m1, &s1, &prio, 1.0).unwrap().max_deviation;
        let d2 = check_density(&fine, &m2, &s2, &prio, 1.0).unwrap().max_deviation;
        prop_assert!(d1 <= bound + 1e-9, "coarse {}", d1);
        prop_assert!(d2 <= 0.5 * bound + 1e-9, "fine {}", d2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pde_maximum_principle_and_ordering(
        fam in family(), prio in priority(), amp in 0.1..2.0f64, freq in 0.2..3.0f64, phase in -3.0..3.0f64,
        u_set in scalar_actions(), v_set in scalar_actions(),
    ) {
        let mut spec = ProblemSpec::bilinear_benchmark(prio);
        spec.horizon = 0.1;
        spec.coefficients = CoefficientSpec::scalar(fam);
        spec.payoff = PayoffSpec::Cos { amplitude: amp, frequency: freq, phase };
        spec.u_actions = u_set;
        spec.v_actions = v_set;
        let grid = SpatialGrid::new(-3.0, 3.0, 41).unwrap();
        let dt = isaacs_core::pde::cfl_max_dt(&spec, &grid).unwrap().min(0.01);
        let lo = solve_with(&spec, &grid, dt, HamiltonianKind::Lower).unwrap();
        let mid = solve_with(&spec, &grid, dt, HamiltonianKind::Mixed).unwrap();
        let hi = solve_with(&spec, &grid, dt, HamiltonianKind::Upper).unwrap();
        let g: Vec<f64> = grid.coordinates().iter().map(|&x| spec.payoff.eval_scalar(x)).collect();
        let (gmin, gmax) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        for field in [&lo, &mid, &hi] {
            prop_assert!(field.min() >= gmin - 1e-9 && field.max() <= gmax + 1e-9);
        }
        for ((a, b), c) in lo.values().iter().zip(mid.values()).zip(hi.values()) {
            prop_assert!(*a <= b + 1e-9 && *b <= c + 1e-9);
        }
    }

    #[test]
    fn pde_comparison(fam in family(), prio in priority(), c1 in 0.5..4.0f64, extra in 0.0..4.0f64) {
        let mut spec = ProblemSpec::bilinear_benchmark(prio);
        spec.horizon = 0.1;
        spec.coefficients = CoefficientSpec::scalar(fam);
        let grid = SpatialGrid::new(-3.0, 3.0, 41).unwrap();
        let dt = isaacs_core::pde::cfl_max_dt(&spec, &grid).unwrap().min(0.01);
        spec.payoff = PayoffSpec::TruncatedQuadratic { cap: c1 };
        let v1 = solve_with(&spec, &grid, dt, HamiltonianKind::Mixed).unwrap();
        spec.payoff = PayoffSpec::TruncatedQuadratic { cap: c1 + extra };
        let v2 = solve_with(&spec, &grid, dt, HamiltonianKind::Mixed).unwrap();
        for (a, b) in v1.values().iter().zip(v2.values()) {
            prop_assert!(*a <= b + 1e-9);
        }
    }

    #[test]
    fn lattice_moments_are_exact(fam in family(), q in prop::sample::select(vec![3usize, 5, 7]), j in 0usize..81, ui in 0usize..2, vi in 0usize..2) {
        let mut spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.5));
        spec.coefficients = CoefficientSpec::scalar(fam);
        let grid = SpatialGrid::new(-20.0, 20.0, 81).unwrap();
        let part = make_uniform_partition(0.0, 0.5, 10).unwrap();
        let lat = build_lattice(&spec, &grid, &part, q).unwrap();
        let x = grid.node(j);
        let (b, a) = spec.drift_variance(0.0, x, ui, vi);
        let succ = lat.successors(0, j, ui, vi);
        let mean: f64 = succ.iter().map(|(y, w)| w * (y - x)).sum();
        let var: f64 = succ.iter().map(|(y, w)| w * (y - x - mean).powi(2)).sum();
        prop_assert!((mean - b * 0.05).abs() <= 1e-12 * (1.0 + x.abs()));
        prop_assert!((var - a * 0.05).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn dp_tables_are_ordered(
        p in 0.0..=1.0f64, n in 1usize..10, block in 1usize..5,
        marks in prop::collection::vec(any::<bool>(), 10), u_set in scalar_actions(), v_set in scalar_actions(),
    ) {
        let mut spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(p));
        spec.horizon = 0.2;
        spec.u_actions = u_set;
        spec.v_actions = v_set;
        let grid = SpatialGrid::new(-10.0, 10.0, 101).unwrap();
        let part = make_uniform_partition(0.0, 0.2, n).unwrap();
        let lat = build_lattice(&spec, &grid, &part, 3).unwrap();
        let marks = MarkSequence::new(marks[..n].to_vec());
        let sub = SubGrid::blocks_of(n, block).unwrap();
        let det = dp_value_deterministic(&lat, &marks, &sub).unwrap();
        prop_assert!(det.ordering_violation() <= 1e-9);
        for (i, &l) in sub.indices().iter().enumerate() {
            for j in 0..grid.nodes() {
                let v = det.value.at(l, j);
                prop_assert!(det.v_minus.at(i, j) <= v + 1e-9 && v <= det.v_plus.at(i, j) + 1e-9);
            }
        }
        let random = dp_value_random(&lat).unwrap();
        prop_assert!(random.ordering_violation() <= 1e-9);
    }

    #[test]
    fn extremes_agree_bitwise(ones in any::<bool>(), n in 1usize..8, u_set in scalar_actions(), v_set in scalar_actions()) {
        let p = if ones { 1.0 } else { 0.0 };
        let mut spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(p));
        spec.horizon = 0.2;
        spec.u_actions = u_set;
        spec.v_actions = v_set;
        let grid = SpatialGrid::new(-10.0, 10.0, 101).unwrap();
        let part = make_uniform_partition(0.0, 0.2, n).unwrap();
        let lat = build_lattice(&spec, &grid, &part, 5).unwrap();
        let random = dp_value_random(&lat).unwrap();
        let det = dp_value_deterministic(&lat, &MarkSequence::constant(ones, n), &SubGrid::every_interval(n)).unwrap();
        for field in [&det.value, &det.v_minus, &det.v_plus] {
            prop_assert!(random.value.values().iter().zip(field.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn replay_is_bitwise(seed in any::<u64>(), p in 0.0..=1.0f64) {
        let spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(p));
        let grid = SpatialGrid::new(-6.0, 6.0, 61).unwrap();
        let part = make_uniform_partition(0.0, 0.5, 5).unwrap();
        let lat = build_lattice(&spec, &grid, &part, 3).unwrap();
        let t = dp_value_random(&lat).unwrap();
        let run = || simulate(&spec, &part, PlayMode::Random(CoinSource { seed }), &t.u_strategy, &t.v_strategy, 16, 2, NoiseSource { seed: !seed }, 16).unwrap();
        let (a, b) = (run(), run());
        prop_assert_eq!(a.records, b.records);
        prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }
}
