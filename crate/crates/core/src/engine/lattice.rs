//! One-step transition model on a spatial lattice.
//!
//! From node `x` over interval `k` with actions `(u, v)` frozen, the Euler step
//! `x + bΔt + σ√Δt·ζ` is replaced by a Gauss–Hermite distribution over `ζ`,
//! which matches the first and second moments of the step exactly.
//! Continuation values at successors are read by linear interpolation,
//! clamped at the domain edges.

use crate::error::{Error, Result};
use crate::pde::SpatialGrid;
use crate::problem::ProblemSpec;
use crate::schedule::Partition;
use crate::static_game::LocalGameMatrix;

/// Gauss–Hermite rule for the standard normal (probabilists' weights summing to one).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(points: usize) -> Result<Self> {
        let (nodes, weights) = match points {
            3 => {
                let r = 3f64.sqrt();
                (vec![-r, 0.0, r], vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])
            }
            5 => {
                let s10 = 10f64.sqrt();
                let (inner, outer) = ((5.0 - s10).sqrt(), (5.0 + s10).sqrt());
                let (w_in, w_out) = ((7.0 + 2.0 * s10) / 60.0, (7.0 - 2.0 * s10) / 60.0);
                (
                    vec![-outer, -inner, 0.0, inner, outer],
                    vec![w_out, w_in, 8.0 / 15.0, w_in, w_out],
                )
            }
            7 => {
                let x = [3.750_439_717_725_742_5, 2.366_759_410_734_541, 1.154_405_394_739_968_2];
                let w = [
                    5.482_688_559_722_169e-4,
                    3.075_712_396_758_651_5e-2,
                    0.240_123_178_605_012_64,
                ];
                (
                    vec![-x[0], -x[1], -x[2], 0.0, x[2], x[1], x[0]],
                    vec![w[0], w[1], w[2], 16.0 / 35.0, w[2], w[1], w[0]],
                )
            }
            _ => {
                return Err(Error::Invalid(format!(
                    "Gauss-Hermite rule must have 3, 5 or 7 points, got {points}"
                )))
            }
        };
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn max_abs_node(&self) -> f64 {
        self.nodes.iter().fold(0.0, |m, z| m.max(z.abs()))
    }
}

/// Lattice transition model for a one-dimensional problem.
#[derive(Clone, Debug)]
pub struct TransitionModel {
    spec: ProblemSpec,
    grid: SpatialGrid,
    partition: Partition,
    rule: GaussHermite,
}

pub fn build_lattice(
    spec: &ProblemSpec,
    grid: &SpatialGrid,
    partition: &Partition,
    quad_points: usize,
) -> Result<TransitionModel> {
    spec.require_scalar()?;
    let rule = GaussHermite::new(quad_points)?;
    if (partition.end() - spec.horizon).abs() > 1e-12 {
        return Err(Error::Misaligned(format!(
            "partition ends at {}, horizon is {}",
            partition.end(),
            spec.horizon
        )));
    }
    if partition.start() < 0.0 {
        return Err(Error::Misaligned("partition starts before time 0".into()));
    }
    let model = TransitionModel {
        spec: spec.clone(),
        grid: grid.clone(),
        partition: partition.clone(),
        rule,
    };

    // The one-step reach must fit well inside the domain, otherwise clamping
    // dominates the transition law.
    let half_width = 0.5 * (grid.upper() - grid.lower());
    for k in 0..partition.intervals() {
        let dt = partition.step(k);
        let t = partition.times()[k];
        for j in 0..grid.nodes() {
            for ui in 0..spec.u_actions.len() {
                for vi in 0..spec.v_actions.len() {
                    let (b, a) = spec.drift_variance(t, grid.node(j), ui, vi);
                    let reach = b.abs() * dt + (a * dt).sqrt() * model.rule.max_abs_node();
                    if !(reach < half_width) {
                        return Err(Error::Invalid(format!(
                            "grid too coarse: one-step reach {reach} over interval {k} exceeds half the domain width {half_width}"
                        )));
                    }
                }
            }
        }
    }
    Ok(model)
}

impl TransitionModel {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn rule(&self) -> &GaussHermite {
        &self.rule
    }

    pub fn u_count(&self) -> usize {
        self.spec.u_actions.len()
    }

    pub fn v_count(&self) -> usize {
        self.spec.v_actions.len()
    }

    /// Successor states and weights from node `j` over interval `k`, before clamping.
    pub fn successors(&self, k: usize, j: usize, ui: usize, vi: usize) -> Vec<(f64, f64)> {
        let (mean, sd) = self.step_moments(k, j, ui, vi);
        self.rule
            .nodes
            .iter()
            .zip(&self.rule.weights)
            .map(|(z, w)| (mean + sd * z, *w))
            .collect()
    }

    #[inline]
    fn step_moments(&self, k: usize, j: usize, ui: usize, vi: usize) -> (f64, f64) {
        let dt = self.partition.step(k);
        let x = self.grid.node(j);
        let (b, a) = self.spec.drift_variance(self.partition.times()[k], x, ui, vi);
        (x + b * dt, (a * dt).sqrt())
    }

    /// `E[W(successor)]` with `W` given at the lattice nodes.
    #[inline]
    pub fn expectation(&self, k: usize, j: usize, ui: usize, vi: usize, values: &[f64]) -> f64 {
        let (mean, sd) = self.step_moments(k, j, ui, vi);
        if sd == 0.0 {
            return self.grid.interpolate(values, mean);
        }
        let mut acc = 0.0;
        for (z, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            acc += w * self.grid.interpolate(values, mean + sd * z);
        }
        acc
    }

    /// Row-major `|U| × |V|` table of continuation expectations.
    #[inline]
    pub(crate) fn fill_table(&self, k: usize, j: usize, values: &[f64], table: &mut [f64]) {
        let nv = self.v_count();
        for ui in 0..self.u_count() {
            for vi in 0..nv {
                table[ui * nv + vi] = self.expectation(k, j, ui, vi, values);
            }
        }
    }

    /// The local game played at node `j` over interval `k` against continuation `values`.
    pub fn local_game(&self, k: usize, j: usize, values: &[f64]) -> Result<LocalGameMatrix> {
        let mut table = vec![0.0; self.u_count() * self.v_count()];
        self.fill_table(k, j, values, &mut table);
        LocalGameMatrix::new(self.u_count(), self.v_count(), table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{CoefficientFamily, CoefficientSpec, PrioritySpec};
    use crate::schedule::make_uniform_partition;
    use std::f64::consts::SQRT_2;

    /// Independent moment sums `Σ w ζ^m`.
    fn moment(rule: &GaussHermite, m: i32) -> f64 {
        rule.nodes()
            .iter()
            .zip(rule.weights())
            .map(|(z, w)| w * z.powi(m))
            .sum()
    }

    fn double_factorial_odd(m: i32) -> f64 {
        (1..m).step_by(2).map(|x| x as f64).product()
    }

    #[test]
    fn three_point_rule() {
        let r = GaussHermite::new(3).unwrap();
        assert_eq!(r.nodes()[2], 3f64.sqrt());
        assert_eq!(r.weights(), &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]);
        assert!(moment(&r, 1).abs() < 1e-16);
        assert!((moment(&r, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in [3usize, 5, 7] {
            let r = GaussHermite::new(n).unwrap();
            for m in 0..(2 * n as i32) {
                let exact = if m % 2 == 1 { 0.0 } else { double_factorial_odd(m) };
                let got = moment(&r, m);
                let scale: f64 = r
                    .nodes()
                    .iter()
                    .zip(r.weights())
                    .map(|(z, w)| w * z.abs().powi(m))
                    .sum();
                assert!(
                    (got - exact).abs() <= 1e-14 * scale.max(1.0),
                    "n={n} m={m}: {got} vs {exact}"
                );
            }
        }
        assert!(GaussHermite::new(4).is_err());
    }

    fn spec_with(kappa: f64, vol: f64) -> ProblemSpec {
        ProblemSpec {
            coefficients: CoefficientSpec::scalar(CoefficientFamily::Bilinear { kappa, vol }),
            ..ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.5))
        }
    }

    #[test]
    fn degenerate_diffusion_has_one_successor_location() {
        let spec = spec_with(4.0, 0.0);
        let grid = SpatialGrid::new(-2.0, 2.0, 41).unwrap();
        let part = make_uniform_partition(0.0, 0.5, 5).unwrap();
        let lat = build_lattice(&spec, &grid, &part, 5).unwrap();
        let succ = lat.successors(0, 20, 1, 1);
        assert!(succ.iter().all(|(x, _)| (*x - 0.4).abs() < 1e-15));
        let total: f64 = succ.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn successor_variance() {
        let mut spec = spec_with(0.0, SQRT_2);
        spec.horizon = 0.01;
        let grid = SpatialGrid::new(-2.0, 2.0, 41).unwrap();
        let part = make_uniform_partition(0.0, 0.01, 1).unwrap();
        for q in [3, 5, 7] {
            let lat = build_lattice(&spec, &grid, &part, q).unwrap();
            let succ = lat.successors(0, 20, 0, 0);
            let mean: f64 = succ.iter().map(|(x, w)| w * x).sum();
            let var: f64 = succ.iter().map(|(x, w)| w * (x - mean).powi(2)).sum();
            assert!(mean.abs() < 1e-15);
            assert!((var - 0.02).abs() < 1e-14);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let spec = spec_with(4.0, SQRT_2);
        let grid = SpatialGrid::new(-0.5, 0.5, 11).unwrap();
        let part = make_uniform_partition(0.0, 0.5, 1).unwrap();
        assert!(build_lattice(&spec, &grid, &part, 3).is_err());
    }

    #[test]
    fn partition_must_reach_horizon() {
        let spec = spec_with(4.0, SQRT_2);
        let grid = SpatialGrid::new(-5.0, 5.0, 101).unwrap();
        let part = make_uniform_partition(0.0, 0.4, 4).unwrap();
        assert!(matches!(
            build_lattice(&spec, &grid, &part, 3),
            Err(Error::Misaligned(_))
        ));
    }
}
