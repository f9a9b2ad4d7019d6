//! Convergence of lattice game values to the PDE solution under refinement.

use std::io::Write;

use isaacs_core::engine::SimulationResult;
use isaacs_core::schedule::forced_epsilon;
use isaacs_core::{
    build_lattice, check_density, dp_value_deterministic, dp_value_random, make_marks, make_uniform_partition,
    simulate, solve, CoinSource, GameValueTables, NoiseSource, PlayMode, SpatialGrid, ValueField,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowMode {
    Random,
    Deterministic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub mode: RowMode,
    pub block: Option<usize>,
    /// Sup distance to the reference over the window at the start time.
    pub gap: f64,
    pub value_at_start: f64,
    pub reference_at_start: f64,
    pub v_minus_at_start: f64,
    pub v_plus_at_start: f64,
    pub ordering_violation: f64,
    pub mc_mean: f64,
    pub mc_std_error: f64,
    pub clamped_decisions: usize,
    pub density_epsilon: Option<f64>,
    pub density_deviation: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub reference_dt: f64,
    pub reference: ValueField,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn gaps(&self, mode: RowMode) -> Vec<f64> {
        self.rows.iter().filter(|r| r.mode == mode).map(|r| r.gap).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(isaacs_core::Error::from)?;
        }
        w.flush().map_err(isaacs_core::Error::from)?;
        Ok(())
    }
}

/// True when each gap exceeds the previous one by at most `slack` relative.
pub fn non_increasing_within(gaps: &[f64], slack: f64) -> bool {
    gaps.windows(2).all(|w| w[1] <= (1.0 + slack) * w[0])
}

/// Fine fixed-resolution PDE solution used as the convergence oracle.
pub fn reference_solution(config: &ExperimentConfig) -> CliResult<(ValueField, f64)> {
    let grid = config.discretization.reference.build()?;
    let dt = config.discretization.dt.resolve(&config.problem, &grid)?;
    Ok((solve(&config.problem, &grid, dt)?, dt))
}

/// Largest `|values_j − reference(s, x_j)|` over grid nodes inside `window`.
pub fn window_gap(grid: &SpatialGrid, values: &[f64], reference: &ValueField, window: [f64; 2]) -> CliResult<f64> {
    let mut gap: f64 = 0.0;
    let mut seen = false;
    for (j, &v) in values.iter().enumerate() {
        let x = grid.node(j);
        if x >= window[0] && x <= window[1] {
            seen = true;
            gap = gap.max((v - reference.interpolate(0, x)).abs());
        }
    }
    if !seen {
        return Err(CliError::Config(format!("window {window:?} contains no grid node")));
    }
    Ok(gap)
}

fn row(
    level: usize,
    mode: RowMode,
    block: Option<usize>,
    tables: &GameValueTables,
    config: &ExperimentConfig,
    reference: &ValueField,
    mc: &SimulationResult,
) -> CliResult<ConvergenceRow> {
    let x0 = config.problem.start_state[0];
    let (lo, hi) = tables.bounds_at(x0);
    Ok(ConvergenceRow {
        level,
        mode,
        block,
        gap: window_gap(
            tables.value.grid(),
            tables.value.slice(0),
            reference,
            config.discretization.window,
        )?,
        value_at_start: tables.value_at(x0),
        reference_at_start: reference.interpolate(0, x0),
        v_minus_at_start: lo,
        v_plus_at_start: hi,
        ordering_violation: tables.ordering_violation().max(0.0),
        mc_mean: mc.mean,
        mc_std_error: mc.std_error,
        clamped_decisions: mc.clamped_decisions,
        density_epsilon: None,
        density_deviation: None,
    })
}

/// Rows for a game that is already over: every value is the payoff.
fn zero_horizon(config: &ExperimentConfig, reference: &ValueField) -> CliResult<Vec<ConvergenceRow>> {
    let g = &config.problem.payoff;
    let grid = config.discretization.grid.build()?;
    let terminal: Vec<f64> = grid.coordinates().iter().map(|&x| g.eval_scalar(x)).collect();
    let gap = window_gap(&grid, &terminal, reference, config.discretization.window)?;
    let gx = g.eval_scalar(config.problem.start_state[0]);
    let mut rows = Vec::new();
    for &level in &config.run.levels {
        for (mode, on) in [
            (RowMode::Random, config.run.mode.random()),
            (RowMode::Deterministic, config.run.mode.deterministic()),
        ] {
            if on {
                rows.push(ConvergenceRow {
                    level,
                    mode,
                    block: None,
                    gap,
                    value_at_start: gx,
                    reference_at_start: reference.interpolate(0, config.problem.start_state[0]),
                    v_minus_at_start: gx,
                    v_plus_at_start: gx,
                    ordering_violation: 0.0,
                    mc_mean: gx,
                    mc_std_error: 0.0,
                    clamped_decisions: 0,
                    density_epsilon: None,
                    density_deviation: None,
                });
            }
        }
    }
    Ok(rows)
}

/// One row per refinement level and mode against a single reference solve.
pub fn run_converge(config: &ExperimentConfig) -> CliResult<ConvergenceTable> {
    if config.run.levels.len() < 2 {
        return Err(CliError::Config(format!(
            "convergence needs at least 2 refinement levels, got {:?}",
            config.run.levels
        )));
    }
    let (reference, reference_dt) = reference_solution(config)?;
    let spec = &config.problem;
    if spec.horizon == spec.start_time {
        let rows = zero_horizon(config, &reference)?;
        return Ok(ConvergenceTable {
            reference_dt,
            reference,
            rows,
        });
    }

    let grid = config.discretization.grid.build()?;
    let run = &config.run;
    let noise = NoiseSource { seed: run.seed };
    let mut rows = Vec::new();
    for &n in &run.levels {
        let partition = make_uniform_partition(spec.start_time, spec.horizon, n)?;
        let lattice = build_lattice(spec, &grid, &partition, config.discretization.quad_points)?;
        if run.mode.random() {
            let tables = dp_value_random(&lattice)?;
            let mode = PlayMode::Random(CoinSource { seed: run.seed });
            let mc = simulate(
                spec,
                &partition,
                mode,
                &tables.u_strategy,
                &tables.v_strategy,
                run.paths,
                run.substeps,
                noise,
                0,
            )?;
            rows.push(row(n, RowMode::Random, None, &tables, config, &reference, &mc)?);
        }
        if run.mode.deterministic() {
            let block = config.discretization.block_for(n);
            let (marks, subgrid) = make_marks(&partition, &spec.priority, block)?;
            let eps = match run.epsilon {
                Some(e) => e,
                None => forced_epsilon(&partition, &subgrid, &spec.priority)?,
            };
            let density = check_density(&partition, &marks, &subgrid, &spec.priority, eps)?.into_result()?;
            let tables = dp_value_deterministic(&lattice, &marks, &subgrid)?;
            let mode = PlayMode::Deterministic(&marks);
            let mc = simulate(
                spec,
                &partition,
                mode,
                &tables.u_strategy,
                &tables.v_strategy,
                run.paths,
                run.substeps,
                noise,
                0,
            )?;
            let mut r = row(n, RowMode::Deterministic, Some(block), &tables, config, &reference, &mc)?;
            r.density_epsilon = Some(eps);
            r.density_deviation = Some(density.max_deviation);
            rows.push(r);
        }
    }
    Ok(ConvergenceTable {
        reference_dt,
        reference,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_rule() {
        assert!(non_increasing_within(&[0.04, 0.042, 0.01], 0.1));
        assert!(!non_increasing_within(&[0.04, 0.045], 0.1));
        assert!(non_increasing_within(&[0.1], 0.1));
    }
}
