//! Explicit monotone finite-difference solver for `−v_t − H(t,x,v_x,v_xx) = 0`,
//! `v(T,·) = g`, on a truncated one-dimensional domain.
//!
//! Each local-game entry `(u, v)` uses the upwind difference selected by the
//! sign of its own drift and a central second difference, so every entry is
//! a monotone function of the neighbouring values under the CFL bound; the
//! min/max reduction over actions keeps that monotonicity. The domain edges
//! copy the adjacent node (zero Neumann extension).

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianKind;
use crate::problem::ProblemSpec;

/// Uniform one-dimensional grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpatialGrid {
    lower: f64,
    upper: f64,
    nodes: usize,
    dx: f64,
}

impl SpatialGrid {
    pub fn new(lower: f64, upper: f64, nodes: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(Error::Invalid(format!(
                "grid needs finite lower < upper, got [{lower}, {upper}]"
            )));
        }
        if nodes < 3 {
            return Err(Error::Invalid(format!("grid needs at least 3 nodes, got {nodes}")));
        }
        Ok(Self {
            lower,
            upper,
            nodes,
            dx: (upper - lower) / (nodes - 1) as f64,
        })
    }

    /// Grid on `[lower, upper]` with spacing as close to `dx` as divides the width.
    pub fn with_spacing(lower: f64, upper: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::Invalid(format!("grid spacing must be positive, got {dx}")));
        }
        let cells = ((upper - lower) / dx).round().max(2.0) as usize;
        Self::new(lower, upper, cells + 1)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        if j + 1 == self.nodes {
            self.upper
        } else {
            self.lower + j as f64 * self.dx
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nodes).map(|j| self.node(j)).collect()
    }

    /// Cell index and weight of the right neighbour for `x` clamped into the grid.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let pos = ((x - self.lower) / self.dx).clamp(0.0, (self.nodes - 1) as f64);
        let j = (pos.floor() as usize).min(self.nodes - 2);
        (j, pos - j as f64)
    }

    /// Linear interpolation of nodal values, constant beyond the edges.
    #[inline]
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let (j, w) = self.locate(x);
        if w == 0.0 {
            values[j]
        } else {
            (1.0 - w) * values[j] + w * values[j + 1]
        }
    }

    /// Index of the node closest to `x`, clamped to the grid.
    #[inline]
    pub fn nearest(&self, x: f64) -> usize {
        let pos = ((x - self.lower) / self.dx).round();
        pos.clamp(0.0, (self.nodes - 1) as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lower..=self.upper).contains(&x)
    }
}

/// Values `v(t_k, x_j)` on a time × node lattice, times ascending.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueField {
    times: Vec<f64>,
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl ValueField {
    pub fn new(times: Vec<f64>, grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || values.len() != times.len() * grid.nodes() {
            return Err(Error::Dimension(format!(
                "{} values for {} times x {} nodes",
                values.len(),
                times.len(),
                grid.nodes()
            )));
        }
        Ok(Self { times, grid, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.nodes();
        &self.values[k * n..(k + 1) * n]
    }

    pub(crate) fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.grid.nodes();
        &mut self.values[k * n..(k + 1) * n]
    }

    pub fn at(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.grid.nodes() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolate(&self, k: usize, x: f64) -> f64 {
        self.grid.interpolate(self.slice(k), x)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise `self − other` on an identical lattice.
    pub fn difference(&self, other: &ValueField) -> Result<ValueField> {
        if self.times != other.times || self.grid != other.grid {
            return Err(Error::Misaligned("value fields live on different lattices".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        ValueField::new(self.times.clone(), self.grid.clone(), values)
    }

    /// Header row `t, x_0, …, x_{N−1}`, then one row per time slice.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.grid.coordinates().iter().map(f64::to_string));
        w.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.slice(k).iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Invalid(format!("value field csv: bad number {s:?}")))
        };
        let coords: Vec<f64> = r.headers()?.iter().skip(1).map(parse).collect::<Result<_>>()?;
        if coords.len() < 3 {
            return Err(Error::Invalid("value field csv needs at least 3 nodes".into()));
        }
        let grid = SpatialGrid::new(coords[0], coords[coords.len() - 1], coords.len())?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let mut fields = rec.iter();
            times.push(parse(fields.next().unwrap_or(""))?);
            for f in fields {
                values.push(parse(f)?);
            }
        }
        ValueField::new(times, grid, values)
    }
}

/// Safety factor applied to the monotonicity bound.
const CFL_MARGIN: f64 = 1e-6;
/// Times sampled when bounding coefficients over `[s, T]`.
const CFL_TIME_SAMPLES: usize = 33;

/// Largest explicit step with `dt·(|b|/dx + σσᵀ/dx²) ≤ 1 − 1e−6` at every node,
/// action pair and sampled time.
pub fn cfl_max_dt(spec: &ProblemSpec, grid: &SpatialGrid) -> Result<f64> {
    spec.require_scalar()?;
    let dx = grid.dx();
    let mut rate: f64 = 0.0;
    for s in 0..CFL_TIME_SAMPLES {
        let t = spec.start_time + (spec.horizon - spec.start_time) * s as f64 / (CFL_TIME_SAMPLES - 1) as f64;
        for j in 0..grid.nodes() {
            let x = grid.node(j);
            for ui in 0..spec.u_actions.len() {
                for vi in 0..spec.v_actions.len() {
                    let (b, a) = spec.drift_variance(t, x, ui, vi);
                    rate = rate.max(b.abs() / dx + a / (dx * dx));
                }
            }
        }
    }
    Ok(if rate > 0.0 {
        (1.0 - CFL_MARGIN) / rate
    } else {
        f64::INFINITY
    })
}

/// Solve with the priority-weighted Hamiltonian `H^p`.
pub fn solve(spec: &ProblemSpec, grid: &SpatialGrid, dt: f64) -> Result<ValueField> {
    solve_with(spec, grid, dt, HamiltonianKind::Mixed)
}

/// Solve with the chosen Hamiltonian. Steps of at most `dt` tile `[s, T]` exactly.
pub fn solve_with(spec: &ProblemSpec, grid: &SpatialGrid, dt: f64, kind: HamiltonianKind) -> Result<ValueField> {
    spec.require_scalar()?;
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    let max_dt = cfl_max_dt(spec, grid)?;
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, max_dt });
    }
    let (s, horizon) = (spec.start_time, spec.horizon);
    let nodes = grid.nodes();
    let terminal: Vec<f64> = (0..nodes).map(|j| spec.payoff.eval_scalar(grid.node(j))).collect();
    if horizon == s {
        return ValueField::new(vec![s], grid.clone(), terminal);
    }

    let steps = ((horizon - s) / dt).ceil().max(1.0) as usize;
    let step = (horizon - s) / steps as f64;
    let mut times: Vec<f64> = (0..=steps).map(|k| s + k as f64 * step).collect();
    times[steps] = horizon;

    let mut field = ValueField::new(times.clone(), grid.clone(), vec![0.0; (steps + 1) * nodes])?;
    field.slice_mut(steps).copy_from_slice(&terminal);

    let (nu, nv) = (spec.u_actions.len(), spec.v_actions.len());
    let dx = grid.dx();
    let mut next = terminal;
    let mut current = vec![0.0; nodes];
    for k in (1..=steps).rev() {
        let t = times[k];
        let prev = &next;
        current.par_chunks_mut(256).enumerate().for_each_init(
            || vec![0.0; nu * nv],
            |table, (chunk, out)| {
                for (offset, slot) in out.iter_mut().enumerate() {
                    let j = chunk * 256 + offset;
                    let x = grid.node(j);
                    let here = prev[j];
                    let left = prev[j.saturating_sub(1)];
                    let right = prev[(j + 1).min(nodes - 1)];
                    let forward = (right - here) / dx;
                    let backward = (here - left) / dx;
                    let second = (right - 2.0 * here + left) / (dx * dx);
                    for ui in 0..nu {
                        for vi in 0..nv {
                            let (b, a) = spec.drift_variance(t, x, ui, vi);
                            let first = if b > 0.0 { forward } else { backward };
                            table[ui * nv + vi] = b * first + 0.5 * a * second;
                        }
                    }
                    let prio = spec.priority.eval_scalar(t, x);
                    *slot = here + step * kind.reduce(table, nu, nv, prio);
                }
            },
        );
        if let Some(j) = current.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: times[k - 1],
                node: j,
            });
        }
        field.slice_mut(k - 1).copy_from_slice(&current);
        std::mem::swap(&mut next, &mut current);
    }
    Ok(field)
}

/// `v⁺ − v⁻` from the upper and lower Isaacs equations on one discretization.
pub fn isaacs_gap(spec: &ProblemSpec, grid: &SpatialGrid, dt: f64) -> Result<ValueField> {
    let upper = solve_with(spec, grid, dt, HamiltonianKind::Upper)?;
    let lower = solve_with(spec, grid, dt, HamiltonianKind::Lower)?;
    upper.difference(&lower)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ActionSet, CoefficientFamily, CoefficientSpec, PayoffSpec, PrioritySpec};
    use std::f64::consts::SQRT_2;

    fn linear_problem(drift: f64, vol: f64, payoff: PayoffSpec, horizon: f64) -> ProblemSpec {
        let mut spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.5));
        spec.coefficients = CoefficientSpec::scalar(CoefficientFamily::Constant { drift, vol });
        spec.u_actions = ActionSet::scalar(&[0.0]).unwrap();
        spec.v_actions = ActionSet::scalar(&[0.0]).unwrap();
        spec.payoff = payoff;
        spec.horizon = horizon;
        spec
    }

    #[test]
    fn grid_geometry() {
        let g = SpatialGrid::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.coordinates(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.locate(0.25), (2, 0.5));
        assert_eq!(g.locate(5.0), (3, 1.0));
        assert_eq!(g.nearest(-7.0), 0);
        assert!(SpatialGrid::new(0.0, 1.0, 2).is_err());
        assert!(SpatialGrid::new(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn cfl_bounds() {
        let grid = SpatialGrid::new(-1.0, 1.0, 21).unwrap();
        let spec = linear_problem(0.0, SQRT_2, PayoffSpec::cos(), 0.5);
        let dt = cfl_max_dt(&spec, &grid).unwrap();
        assert!((dt - 0.005 * (1.0 - 1e-6)).abs() < 1e-15);

        let spec = ProblemSpec {
            coefficients: CoefficientSpec::scalar(CoefficientFamily::Bilinear { kappa: 4.0, vol: 0.0 }),
            ..ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.5))
        };
        let dt = cfl_max_dt(&spec, &grid).unwrap();
        assert!((dt - 0.025 * (1.0 - 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn cfl_scales_quadratically_for_diffusion() {
        let spec = linear_problem(0.0, 1.0, PayoffSpec::cos(), 0.5);
        let fine = cfl_max_dt(&spec, &SpatialGrid::new(-1.0, 1.0, 41).unwrap()).unwrap();
        let coarse = cfl_max_dt(&spec, &SpatialGrid::new(-1.0, 1.0, 21).unwrap()).unwrap();
        assert!((coarse / fine - 4.0).abs() < 1e-9);
    }

    #[test]
    fn cfl_violation_is_an_error() {
        let grid = SpatialGrid::new(-1.0, 1.0, 21).unwrap();
        let spec = linear_problem(0.0, SQRT_2, PayoffSpec::cos(), 0.5);
        assert!(matches!(solve(&spec, &grid, 0.01), Err(Error::Cfl { .. })));
    }

    #[test]
    fn constants_are_stationary() {
        let grid = SpatialGrid::new(-3.0, 3.0, 61).unwrap();
        let spec = ProblemSpec {
            payoff: PayoffSpec::Constant { value: 0.7 },
            ..ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.3))
        };
        let dt = cfl_max_dt(&spec, &grid).unwrap();
        let v = solve(&spec, &grid, dt).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.7));
    }

    #[test]
    fn quadratic_expectation() {
        // E[X_T²] = x² + σ²(T − t) with σ² = 2, so v(0, 0) = 1 at T = 0.5.
        let grid = SpatialGrid::new(-5.0, 5.0, 201).unwrap();
        let spec = linear_problem(0.0, SQRT_2, PayoffSpec::TruncatedQuadratic { cap: 25.0 }, 0.5);
        let v = solve(&spec, &grid, cfl_max_dt(&spec, &grid).unwrap()).unwrap();
        assert!((v.interpolate(0, 0.0) - 1.0).abs() < 2e-2);
    }

    #[test]
    fn zero_horizon_is_terminal_data() {
        let grid = SpatialGrid::new(-1.0, 1.0, 11).unwrap();
        let spec = linear_problem(0.0, 1.0, PayoffSpec::cos(), 0.0);
        let v = solve(&spec, &grid, 0.001).unwrap();
        assert_eq!(v.times(), &[0.0]);
        assert_eq!(v.at(0, 3), grid.node(3).cos());
    }

    #[test]
    fn singleton_gap_vanishes_and_extremes_match() {
        let grid = SpatialGrid::new(-4.0, 4.0, 81).unwrap();
        let spec = linear_problem(0.3, 1.0, PayoffSpec::cos(), 0.2);
        let dt = cfl_max_dt(&spec, &grid).unwrap();
        assert!(isaacs_gap(&spec, &grid, dt).unwrap().values().iter().all(|&g| g == 0.0));

        let spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.0));
        let dt = cfl_max_dt(&spec, &grid).unwrap();
        let mixed = solve(&spec, &grid, dt).unwrap();
        let upper = solve_with(&spec, &grid, dt, HamiltonianKind::Upper).unwrap();
        assert!(mixed
            .values()
            .iter()
            .zip(upper.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn csv_round_trip() {
        let grid = SpatialGrid::new(-1.0, 1.0, 5).unwrap();
        let field = ValueField::new(vec![0.0, 0.1], grid, (0..10).map(|i| (i as f64).sqrt() / 3.0).collect()).unwrap();
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        let back = ValueField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), field.values());
        assert_eq!(back.times(), field.times());
    }
}
