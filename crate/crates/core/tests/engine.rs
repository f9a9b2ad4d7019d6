use isaacs_core::{
    build_lattice, cfl_max_dt, dp_value_deterministic, dp_value_random, make_uniform_partition, simulate, solve_with,
    ActionSet, CoinSource, HamiltonianKind, MarkSequence, NoiseSource, PlayMode, PrioritySpec, ProblemSpec,
    SpatialGrid, SubGrid,
};

fn sup_gap_near_origin(dp_grid: &SpatialGrid, dp: &[f64], reference: &isaacs_core::ValueField) -> f64 {
    (0..dp_grid.nodes())
        .filter(|&j| dp_grid.node(j).abs() <= 2.0)
        .map(|j| (dp[j] - reference.interpolate(0, dp_grid.node(j))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn one_controller_game_matches_its_control_equation() {
    for marks_value in [true, false] {
        let mut spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.5));
        spec.v_actions = ActionSet::scalar(&[1.0]).unwrap();
        let n = 50;
        let grid = SpatialGrid::with_spacing(-6.0, 6.0, 0.02).unwrap();
        let part = make_uniform_partition(0.0, spec.horizon, n).unwrap();
        let lat = build_lattice(&spec, &grid, &part, 5).unwrap();
        let marks = MarkSequence::constant(marks_value, n);
        let det = dp_value_deterministic(&lat, &marks, &SubGrid::every_interval(n)).unwrap();

        let fine = SpatialGrid::with_spacing(-8.0, 8.0, 0.01).unwrap();
        let kind = if marks_value {
            HamiltonianKind::Lower
        } else {
            HamiltonianKind::Upper
        };
        let reference = solve_with(&spec, &fine, cfl_max_dt(&spec, &fine).unwrap(), kind).unwrap();
        let gap = sup_gap_near_origin(&grid, det.value.slice(0), &reference);
        assert!(gap < 5e-2, "marks {marks_value}: gap {gap}");
    }
}

#[test]
fn saddle_profile_reproduces_the_lattice_value() {
    let spec = ProblemSpec::bilinear_benchmark(PrioritySpec::LinearTime {
        intercept: 0.3,
        slope: 0.4,
    });
    let grid = SpatialGrid::with_spacing(-6.0, 6.0, 0.02).unwrap();
    let part = make_uniform_partition(0.0, spec.horizon, 10).unwrap();
    let lat = build_lattice(&spec, &grid, &part, 5).unwrap();
    let tables = dp_value_random(&lat).unwrap();
    let mc = simulate(
        &spec,
        &part,
        PlayMode::Random(CoinSource { seed: 11 }),
        &tables.u_strategy,
        &tables.v_strategy,
        20_000,
        4,
        NoiseSource { seed: 12 },
        0,
    )
    .unwrap();
    let value = tables.value_at(0.0);
    assert!(
        (mc.mean - value).abs() <= 3.0 * mc.std_error,
        "mc {} ± {} vs {value}",
        mc.mean,
        mc.std_error
    );
}
