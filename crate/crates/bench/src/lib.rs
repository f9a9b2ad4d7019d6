//! Fixtures shared by the kernel benchmarks.

use isaacs_core::{build_lattice, make_uniform_partition, PrioritySpec, ProblemSpec, SpatialGrid, TransitionModel};

/// The bilinear benchmark with coin priority 1/2.
pub fn benchmark_spec() -> ProblemSpec {
    ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.5))
}

/// Benchmark lattice with `n` intervals on `[-6, 6]` at spacing `dx`.
pub fn benchmark_lattice(n: usize, dx: f64) -> TransitionModel {
    let spec = benchmark_spec();
    let grid = SpatialGrid::with_spacing(-6.0, 6.0, dx).expect("static grid");
    let part = make_uniform_partition(spec.start_time, spec.horizon, n).expect("static partition");
    build_lattice(&spec, &grid, &part, 5).expect("static lattice")
}
