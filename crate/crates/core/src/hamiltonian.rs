//! Generator `L^{u,v} = b·∇ + ½Tr(σσᵀ∇²)` and the lower, upper and
//! priority-weighted Hamiltonians, evaluated by exact enumeration over the
//! action grids.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::static_game::{self, convex_mix, LocalGameMatrix};

/// `(t, x, ∇v, ∇²v)` at which the Hamiltonians are evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferentialState {
    pub t: f64,
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    /// Row-major symmetric `d × d`.
    pub hess: Vec<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl DifferentialState {
    pub fn new(t: f64, x: Vec<f64>, grad: Vec<f64>, hess: Vec<f64>) -> Result<Self> {
        let d = x.len();
        if grad.len() != d || hess.len() != d * d {
            return Err(Error::Dimension(format!(
                "state has d = {d}, gradient {} entries, hessian {} entries",
                grad.len(),
                hess.len()
            )));
        }
        for i in 0..d {
            for j in 0..i {
                if (hess[i * d + j] - hess[j * d + i]).abs() > SYMMETRY_TOL {
                    return Err(Error::Invalid(format!("hessian not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { t, x, grad, hess })
    }

    pub fn scalar(t: f64, x: f64, grad: f64, hess: f64) -> Self {
        Self {
            t,
            x: vec![x],
            grad: vec![grad],
            hess: vec![hess],
        }
    }

    fn check_against(&self, spec: &ProblemSpec) -> Result<()> {
        if self.x.len() != spec.dim() {
            return Err(Error::Dimension(format!(
                "differential state has d = {}, problem has d = {}",
                self.x.len(),
                spec.dim()
            )));
        }
        Ok(())
    }
}

fn generator_unchecked(spec: &ProblemSpec, ds: &DifferentialState, ui: usize, vi: usize) -> f64 {
    let c = spec
        .coefficients
        .eval(ds.t, &ds.x, spec.u_actions.get(ui), spec.v_actions.get(vi));
    let d = ds.x.len();
    let transport: f64 = c.drift.iter().zip(&ds.grad).map(|(b, g)| b * g).sum();
    let cov = c.covariance();
    let trace: f64 = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| cov[i * d + j] * ds.hess[j * d + i])
        .sum();
    transport + 0.5 * trace
}

/// `b(t,x,u,v)·grad + ½Tr(σσᵀ hess)` for action indices `(ui, vi)`.
pub fn generator(spec: &ProblemSpec, ds: &DifferentialState, ui: usize, vi: usize) -> Result<f64> {
    ds.check_against(spec)?;
    if ui >= spec.u_actions.len() || vi >= spec.v_actions.len() {
        return Err(Error::Strategy(format!("action pair ({ui}, {vi}) outside the grids")));
    }
    Ok(generator_unchecked(spec, ds, ui, vi))
}

/// Local game whose entry `(i, j)` is the generator at `(u_i, v_j)`.
pub fn generator_matrix(spec: &ProblemSpec, ds: &DifferentialState) -> Result<LocalGameMatrix> {
    ds.check_against(spec)?;
    LocalGameMatrix::from_fn(spec.u_actions.len(), spec.v_actions.len(), |i, j| {
        generator_unchecked(spec, ds, i, j)
    })
}

pub fn hamiltonian_lower(spec: &ProblemSpec, ds: &DifferentialState) -> Result<f64> {
    Ok(static_game::lower_value(&generator_matrix(spec, ds)?).value)
}

pub fn hamiltonian_upper(spec: &ProblemSpec, ds: &DifferentialState) -> Result<f64> {
    Ok(static_game::upper_value(&generator_matrix(spec, ds)?).value)
}

pub fn hamiltonian_mixed(spec: &ProblemSpec, ds: &DifferentialState) -> Result<f64> {
    Ok(hamiltonians(spec, ds)?.mixed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Hamiltonians {
    pub lower: f64,
    pub upper: f64,
    pub mixed: f64,
    pub priority: f64,
}

/// All three Hamiltonians from a single enumeration of the local game.
pub fn hamiltonians(spec: &ProblemSpec, ds: &DifferentialState) -> Result<Hamiltonians> {
    let f = generator_matrix(spec, ds)?;
    let lower = static_game::lower_value(&f).value;
    let upper = static_game::upper_value(&f).value;
    let priority = spec.priority.eval(ds.t, &ds.x);
    static_game::check_probability(priority)?;
    Ok(Hamiltonians {
        lower,
        upper,
        mixed: convex_mix(priority, lower, upper),
        priority,
    })
}

/// Which Hamiltonian drives a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    Lower,
    Upper,
    Mixed,
}

impl HamiltonianKind {
    /// Reduce a row-major generator table at a point with priority `prio`.
    #[inline]
    pub(crate) fn reduce(self, table: &[f64], rows: usize, cols: usize, prio: f64) -> f64 {
        match self {
            HamiltonianKind::Lower => static_game::lower_of(table, cols),
            HamiltonianKind::Upper => static_game::upper_of(table, rows, cols),
            HamiltonianKind::Mixed => convex_mix(
                prio,
                static_game::lower_of(table, cols),
                static_game::upper_of(table, rows, cols),
            ),
        }
    }
}
