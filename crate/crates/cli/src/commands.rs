//! Subcommands. Each writes CSV tables and a manifest into the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use isaacs_core::engine::{exploitability, write_records_csv, MonteCarloSettings};
use isaacs_core::schedule::{forced_epsilon, write_schedule_csv};
use isaacs_core::static_game::representation_residual;
use isaacs_core::{
    build_lattice, check_density, dp_value_deterministic, dp_value_random, hamiltonians, make_marks,
    make_uniform_partition, simulate, solve_with, CoinSource, DifferentialState, GameValueTables, HamiltonianKind,
    LocalGameMatrix, MarkSequence, NoiseSource, Partition, PlayMode, SubGrid, TransitionModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::converge::run_converge;
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_hex, Manifest, MANIFEST_FILE};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Static,
    Hamiltonian,
    Schedule,
    Pde,
    Dp,
    Simulate,
    Converge,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Static,
        Command::Hamiltonian,
        Command::Schedule,
        Command::Pde,
        Command::Dp,
        Command::Simulate,
        Command::Converge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Static => "static",
            Command::Hamiltonian => "hamiltonian",
            Command::Schedule => "schedule",
            Command::Pde => "pde",
            Command::Dp => "dp",
            Command::Simulate => "simulate",
            Command::Converge => "converge",
        }
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command {s:?}")))
    }
}

/// Collects CSV outputs in memory with their digests, then writes them out.
#[derive(Default)]
struct Outputs {
    files: BTreeMap<String, Vec<u8>>,
}

impl Outputs {
    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> CliResult<()>) -> CliResult<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.insert(name.to_string(), buf);
        Ok(())
    }

    fn rows<R: serde::Serialize>(&mut self, name: &str, rows: &[R]) -> CliResult<()> {
        self.csv(name, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            for r in rows {
                w.serialize(r).map_err(isaacs_core::Error::from)?;
            }
            w.flush().map_err(isaacs_core::Error::from)?;
            Ok(())
        })
    }

    fn flush(self, dir: &Path) -> CliResult<BTreeMap<String, String>> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_owned(),
            source,
        })?;
        let mut digests = BTreeMap::new();
        for (name, bytes) in self.files {
            let path = dir.join(&name);
            fs::write(&path, &bytes).map_err(|source| CliError::Io { path, source })?;
            digests.insert(name, sha256_hex(&bytes));
        }
        Ok(digests)
    }
}

/// Runs `command` and writes its tables plus `manifest.toml` into `out`.
pub fn execute(command: Command, config: &ExperimentConfig, out: &Path) -> CliResult<Manifest> {
    config.validate()?;
    let mut outputs = Outputs::default();
    match command {
        Command::Static => run_static(config, &mut outputs)?,
        Command::Hamiltonian => run_hamiltonian(config, &mut outputs)?,
        Command::Schedule => run_schedule(config, &mut outputs)?,
        Command::Pde => run_pde(config, &mut outputs)?,
        Command::Dp => run_dp(config, &mut outputs)?,
        Command::Simulate => run_simulate(config, &mut outputs)?,
        Command::Converge => {
            let table = run_converge(config)?;
            outputs.csv("convergence.csv", |buf| table.write_csv(buf))?;
        }
    }
    let digests = outputs.flush(out)?;
    let manifest = Manifest::new(command.name(), config, digests)?;
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_toml()?).map_err(|source| CliError::Io { path, source })?;
    Ok(manifest)
}

/// Re-runs a manifest into `out` and checks every recorded digest.
pub fn replay(manifest_path: &Path, out: &Path) -> CliResult<Manifest> {
    let recorded = Manifest::load(manifest_path)?;
    let command: Command = recorded.manifest.command.parse()?;
    let fresh = execute(command, &recorded.config, out)?;
    if fresh.manifest.outputs != recorded.manifest.outputs {
        let differing: Vec<&String> = recorded
            .manifest
            .outputs
            .iter()
            .filter(|(name, digest)| fresh.manifest.outputs.get(*name) != Some(digest))
            .map(|(name, _)| name)
            .chain(
                fresh
                    .manifest
                    .outputs
                    .keys()
                    .filter(|k| !recorded.manifest.outputs.contains_key(*k)),
            )
            .collect();
        return Err(CliError::Replay(format!("outputs differ: {differing:?}")));
    }
    Ok(fresh)
}

/// Output directory: the flag wins over the config, then `out`.
pub fn resolve_out(flag: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(serde::Serialize)]
struct StaticRow {
    sample: usize,
    rows: usize,
    cols: usize,
    prio: f64,
    lower: f64,
    upper: f64,
    mixed: f64,
    supinf: f64,
    infsup: f64,
    residual: f64,
}

fn run_static(config: &ExperimentConfig, outputs: &mut Outputs) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    let mut rows = Vec::with_capacity(config.run.samples);
    for sample in 0..config.run.samples {
        let (r, c) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let f = LocalGameMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))?;
        let prio: f64 = rng.random();
        let rep = representation_residual(&f, prio)?;
        rows.push(StaticRow {
            sample,
            rows: r,
            cols: c,
            prio,
            lower: isaacs_core::lower_value(&f).value,
            upper: isaacs_core::upper_value(&f).value,
            mixed: rep.mixed,
            supinf: rep.supinf,
            infsup: rep.infsup,
            residual: rep.residual,
        });
    }
    outputs.rows("static.csv", &rows)
}

#[derive(serde::Serialize)]
struct HamiltonianRow {
    sample: usize,
    t: f64,
    x: f64,
    grad: f64,
    hess: f64,
    priority: f64,
    lower: f64,
    mixed: f64,
    upper: f64,
}

fn run_hamiltonian(config: &ExperimentConfig, outputs: &mut Outputs) -> CliResult<()> {
    let spec = &config.problem;
    let [lo, hi] = config.discretization.window;
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    let mut rows = Vec::with_capacity(config.run.samples);
    for sample in 0..config.run.samples {
        let t = spec.start_time + (spec.horizon - spec.start_time) * rng.random::<f64>();
        let x = lo + (hi - lo) * rng.random::<f64>();
        let grad = rng.random_range(-10.0..10.0);
        let hess = rng.random_range(-10.0..10.0);
        let h = hamiltonians(spec, &DifferentialState::scalar(t, x, grad, hess))?;
        rows.push(HamiltonianRow {
            sample,
            t,
            x,
            grad,
            hess,
            priority: h.priority,
            lower: h.lower,
            mixed: h.mixed,
            upper: h.upper,
        });
    }
    outputs.rows("hamiltonian.csv", &rows)
}

#[derive(serde::Serialize)]
struct DensityRow {
    block: usize,
    length: f64,
    deviation: f64,
    epsilon: f64,
}

fn partition(config: &ExperimentConfig) -> CliResult<Partition> {
    let spec = &config.problem;
    Ok(make_uniform_partition(
        spec.start_time,
        spec.horizon,
        config.discretization.intervals,
    )?)
}

/// Marks and sub-grid for the configured partition, after the density check.
fn schedule(config: &ExperimentConfig, part: &Partition, outputs: &mut Outputs) -> CliResult<(MarkSequence, SubGrid)> {
    let prio = &config.problem.priority;
    let (marks, subgrid) = make_marks(part, prio, config.discretization.block_for(part.intervals()))?;
    let eps = match config.run.epsilon {
        Some(e) => e,
        None => forced_epsilon(part, &subgrid, prio)?,
    };
    let report = check_density(part, &marks, &subgrid, prio, eps)?;
    let rows: Vec<DensityRow> = report
        .block_lengths
        .iter()
        .zip(&report.deviations)
        .enumerate()
        .map(|(block, (&length, &deviation))| DensityRow {
            block,
            length,
            deviation,
            epsilon: eps,
        })
        .collect();
    outputs.csv("schedule.csv", |buf| {
        Ok(write_schedule_csv(buf, part, &marks, &subgrid)?)
    })?;
    outputs.rows("density.csv", &rows)?;
    report.into_result()?;
    Ok((marks, subgrid))
}

fn run_schedule(config: &ExperimentConfig, outputs: &mut Outputs) -> CliResult<()> {
    let part = partition(config)?;
    schedule(config, &part, outputs).map(|_| ())
}

#[derive(serde::Serialize)]
struct PdeRow {
    x: f64,
    lower: f64,
    mixed: f64,
    upper: f64,
    gap: f64,
}

fn run_pde(config: &ExperimentConfig, outputs: &mut Outputs) -> CliResult<()> {
    let spec = &config.problem;
    let grid = config.discretization.grid.build()?;
    let dt = config.discretization.dt.resolve(spec, &grid)?;
    let lower = solve_with(spec, &grid, dt, HamiltonianKind::Lower)?;
    let mixed = solve_with(spec, &grid, dt, HamiltonianKind::Mixed)?;
    let upper = solve_with(spec, &grid, dt, HamiltonianKind::Upper)?;
    let rows: Vec<PdeRow> = (0..grid.nodes())
        .map(|j| PdeRow {
            x: grid.node(j),
            lower: lower.at(0, j),
            mixed: mixed.at(0, j),
            upper: upper.at(0, j),
            gap: upper.at(0, j) - lower.at(0, j),
        })
        .collect();
    outputs.rows("pde.csv", &rows)
}

struct Solved {
    tables: GameValueTables,
    marks: Option<MarkSequence>,
    label: &'static str,
}

fn lattice(config: &ExperimentConfig, part: &Partition) -> CliResult<TransitionModel> {
    let grid = config.discretization.grid.build()?;
    Ok(build_lattice(
        &config.problem,
        &grid,
        part,
        config.discretization.quad_points,
    )?)
}

/// DP tables for every configured mode, with their CSVs.
fn solve_games(config: &ExperimentConfig, lat: &TransitionModel, outputs: &mut Outputs) -> CliResult<Vec<Solved>> {
    let part = lat.partition();
    let mut solved = Vec::new();
    if config.run.mode.random() {
        solved.push(Solved {
            tables: dp_value_random(lat)?,
            marks: None,
            label: "random",
        });
    }
    if config.run.mode.deterministic() {
        let (marks, subgrid) = schedule(config, part, outputs)?;
        let tables = dp_value_deterministic(lat, &marks, &subgrid)?;
        solved.push(Solved {
            tables,
            marks: Some(marks),
            label: "deterministic",
        });
    }
    for s in &solved {
        let t = &s.tables;
        outputs.csv(&format!("value_{}.csv", s.label), |buf| Ok(t.value.write_csv(buf)?))?;
        if s.marks.is_some() {
            outputs.csv(&format!("v_minus_{}.csv", s.label), |buf| {
                Ok(t.v_minus.write_csv(buf)?)
            })?;
            outputs.csv(&format!("v_plus_{}.csv", s.label), |buf| Ok(t.v_plus.write_csv(buf)?))?;
        }
        outputs.csv(&format!("u_strategy_{}.csv", s.label), |buf| {
            Ok(t.u_strategy.write_csv(buf, part)?)
        })?;
        outputs.csv(&format!("v_strategy_{}.csv", s.label), |buf| {
            Ok(t.v_strategy.write_csv(buf, part)?)
        })?;
    }
    Ok(solved)
}

fn run_dp(config: &ExperimentConfig, outputs: &mut Outputs) -> CliResult<()> {
    let part = partition(config)?;
    let lat = lattice(config, &part)?;
    solve_games(config, &lat, outputs).map(|_| ())
}

#[derive(serde::Serialize)]
struct SimulationRow {
    mode: &'static str,
    paths: usize,
    substeps: usize,
    mean: f64,
    std_error: f64,
    value: f64,
    v_minus: f64,
    v_plus: f64,
    clamped_decisions: usize,
}

#[derive(serde::Serialize)]
struct ExploitRow {
    mode: &'static str,
    fixed_side: String,
    label: String,
    mean: f64,
    std_error: f64,
    best_response_value: f64,
    shift: f64,
}

fn run_simulate(config: &ExperimentConfig, outputs: &mut Outputs) -> CliResult<()> {
    let spec = &config.problem;
    let run = &config.run;
    let part = partition(config)?;
    let lat = lattice(config, &part)?;
    let noise = NoiseSource { seed: run.seed };
    let x0 = spec.start_state[0];
    let mut summary = Vec::new();
    let mut exploit_rows = Vec::new();
    for s in solve_games(config, &lat, outputs)? {
        let mode = match &s.marks {
            Some(m) => PlayMode::Deterministic(m),
            None => PlayMode::Random(CoinSource { seed: run.seed }),
        };
        let t = &s.tables;
        let r = simulate(
            spec,
            &part,
            mode,
            &t.u_strategy,
            &t.v_strategy,
            run.paths,
            run.substeps,
            noise,
            run.keep_paths,
        )?;
        let (v_minus, v_plus) = t.bounds_at(x0);
        summary.push(SimulationRow {
            mode: s.label,
            paths: run.paths,
            substeps: run.substeps,
            mean: r.mean,
            std_error: r.std_error,
            value: t.value_at(x0),
            v_minus,
            v_plus,
            clamped_decisions: r.clamped_decisions,
        });
        outputs.csv(&format!("paths_{}.csv", s.label), |buf| {
            Ok(write_records_csv(buf, &r.records)?)
        })?;
        if run.challengers > 0 {
            let mc = MonteCarloSettings {
                paths: run.paths,
                substeps: run.substeps,
                noise,
            };
            for fixed in [&t.u_strategy, &t.v_strategy] {
                let report = exploitability(&lat, mode, fixed, run.challengers, run.seed, mc)?;
                for o in &report.outcomes {
                    exploit_rows.push(ExploitRow {
                        mode: s.label,
                        fixed_side: format!("{:?}", report.fixed_side),
                        label: o.label.clone(),
                        mean: o.mean,
                        std_error: o.std_error,
                        best_response_value: report.best_response_value,
                        shift: report.shift,
                    });
                }
            }
        }
    }
    outputs.rows("simulate.csv", &summary)?;
    if run.challengers > 0 {
        outputs.rows("exploit.csv", &exploit_rows)?;
    }
    Ok(())
}
