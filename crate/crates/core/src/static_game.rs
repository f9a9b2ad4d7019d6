//! One-period zero-sum game with a coin-tossed priority rule.
//!
//! `f⁻ = max_u min_v f(u,v)` is the value when `v` sees `u` first, `f⁺ =
//! min_v max_u f(u,v)` when `u` sees `v`. Tossing a coin with heads
//! probability `p` before the players move gives the value `p·f⁻ + (1−p)·f⁺`,
//! and the pairs `(u*, α*)`, `(v*, β*)` found below are a saddle point of that
//! randomized game. All argmin/argmax ties resolve to the lowest index.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest action count per side accepted by [`representation_residual`].
pub const MAX_ENUMERATION: usize = 4;

/// Dense `|U| × |V|` payoff table, row-major, entry `(i, j) = f(u_i, v_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalGameMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl LocalGameMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "entry ({}, {}) is not finite",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Solution of the game where `v` sees `u`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerSolution {
    pub value: f64,
    pub u_star: usize,
    /// `β*: U → V`, the minimizing reply to each row.
    pub beta_star: Vec<usize>,
}

/// Solution of the game where `u` sees `v`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpperSolution {
    pub value: f64,
    pub v_star: usize,
    /// `α*: V → U`, the maximizing reply to each column.
    pub alpha_star: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StaticSaddle {
    pub lower_value: f64,
    pub upper_value: f64,
    pub u_star: usize,
    pub v_star: usize,
    pub beta_star: Vec<usize>,
    pub alpha_star: Vec<usize>,
}

#[inline]
fn argmin_in(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

pub fn lower_value(f: &LocalGameMatrix) -> LowerSolution {
    let beta_star: Vec<usize> = (0..f.rows)
        .map(|i| argmin_in(&f.values[i * f.cols..(i + 1) * f.cols]).0)
        .collect();
    let mut u_star = 0;
    let mut value = f.get(0, beta_star[0]);
    for (i, &j) in beta_star.iter().enumerate().skip(1) {
        let candidate = f.get(i, j);
        if candidate > value {
            value = candidate;
            u_star = i;
        }
    }
    LowerSolution {
        value,
        u_star,
        beta_star,
    }
}

pub fn upper_value(f: &LocalGameMatrix) -> UpperSolution {
    let alpha_star: Vec<usize> = (0..f.cols)
        .map(|j| {
            let mut best = (0, f.get(0, j));
            for i in 1..f.rows {
                if f.get(i, j) > best.1 {
                    best = (i, f.get(i, j));
                }
            }
            best.0
        })
        .collect();
    let mut v_star = 0;
    let mut value = f.get(alpha_star[0], 0);
    for (j, &i) in alpha_star.iter().enumerate().skip(1) {
        let candidate = f.get(i, j);
        if candidate < value {
            value = candidate;
            v_star = j;
        }
    }
    UpperSolution {
        value,
        v_star,
        alpha_star,
    }
}

pub fn saddle(f: &LocalGameMatrix) -> StaticSaddle {
    let lo = lower_value(f);
    let up = upper_value(f);
    StaticSaddle {
        lower_value: lo.value,
        upper_value: up.value,
        u_star: lo.u_star,
        v_star: up.v_star,
        beta_star: lo.beta_star,
        alpha_star: up.alpha_star,
    }
}

/// `max_i min_j` on a raw row-major slice; same comparisons as [`lower_value`].
#[inline]
pub(crate) fn lower_of(values: &[f64], cols: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (i, row) in values.chunks_exact(cols).enumerate() {
        let m = argmin_in(row).1;
        if i == 0 || m > best {
            best = m;
        }
    }
    best
}

/// `min_j max_i` on a raw row-major slice; same comparisons as [`upper_value`].
#[inline]
pub(crate) fn upper_of(values: &[f64], rows: usize, cols: usize) -> f64 {
    let mut best = f64::INFINITY;
    for j in 0..cols {
        let mut m = values[j];
        for i in 1..rows {
            let x = values[i * cols + j];
            if x > m {
                m = x;
            }
        }
        if j == 0 || m < best {
            best = m;
        }
    }
    best
}

pub(crate) fn check_probability(prio: f64) -> Result<()> {
    if (0.0..=1.0).contains(&prio) {
        Ok(())
    } else {
        Err(Error::Probability(prio))
    }
}

/// `p·lower + (1−p)·upper`, returning the endpoint exactly when `p ∈ {0, 1}`.
#[inline]
pub fn convex_mix(prio: f64, lower: f64, upper: f64) -> f64 {
    if prio == 1.0 {
        lower
    } else if prio == 0.0 {
        upper
    } else {
        prio * lower + (1.0 - prio) * upper
    }
}

/// Value `p·f⁻ + (1−p)·f⁺` of the coin-tossed one-period game.
pub fn mixed_value(f: &LocalGameMatrix, prio: f64) -> Result<f64> {
    check_probability(prio)?;
    Ok(convex_mix(prio, lower_value(f).value, upper_value(f).value))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Representation {
    pub supinf: f64,
    pub infsup: f64,
    pub mixed: f64,
    pub residual: f64,
}

/// Every map `{0..domain} → {0..codomain}`, encoded as vectors.
fn all_maps(domain: usize, codomain: usize) -> Vec<Vec<usize>> {
    let count = codomain.pow(domain as u32);
    (0..count)
        .map(|mut code| {
            (0..domain)
                .map(|_| {
                    let digit = code % codomain;
                    code /= codomain;
                    digit
                })
                .collect()
        })
        .collect()
}

/// Brute-force sup-inf and inf-sup of the randomized game over all pairs
/// `(u, α)` and `(v, β)`, compared with [`mixed_value`].
pub fn representation_residual(f: &LocalGameMatrix, prio: f64) -> Result<Representation> {
    check_probability(prio)?;
    if f.rows > MAX_ENUMERATION || f.cols > MAX_ENUMERATION {
        return Err(Error::TooLargeForEnumeration {
            rows: f.rows,
            cols: f.cols,
            max: MAX_ENUMERATION,
        });
    }
    let alphas = all_maps(f.cols, f.rows);
    let betas = all_maps(f.rows, f.cols);
    let u_pairs: Vec<(usize, &Vec<usize>)> = (0..f.rows).flat_map(|u| alphas.iter().map(move |a| (u, a))).collect();
    let v_pairs: Vec<(usize, &Vec<usize>)> = (0..f.cols).flat_map(|v| betas.iter().map(move |b| (v, b))).collect();

    let payoff = |(u, alpha): (usize, &Vec<usize>), (v, beta): (usize, &Vec<usize>)| {
        prio * f.get(u, beta[u]) + (1.0 - prio) * f.get(alpha[v], v)
    };

    let supinf = u_pairs
        .iter()
        .map(|&up| v_pairs.iter().map(|&vp| payoff(up, vp)).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let infsup = v_pairs
        .iter()
        .map(|&vp| {
            u_pairs
                .iter()
                .map(|&up| payoff(up, vp))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min);

    let mixed = mixed_value(f, prio)?;
    Ok(Representation {
        supinf,
        infsup,
        mixed,
        residual: (supinf - mixed).abs().max((infsup - mixed).abs()),
    })
}

/// One round: heads (`coin < prio`) plays `u` against `β`, tails plays `α` against `v`.
pub fn play_one_period(
    f: &LocalGameMatrix,
    prio: f64,
    u_choice: (usize, &[usize]),
    v_choice: (usize, &[usize]),
    coin: f64,
) -> Result<f64> {
    check_probability(prio)?;
    if !(0.0..1.0).contains(&coin) {
        return Err(Error::Invalid(format!("coin draw {coin} outside [0, 1)")));
    }
    let (u, alpha) = u_choice;
    let (v, beta) = v_choice;
    if u >= f.rows || v >= f.cols {
        return Err(Error::Strategy("plain action index out of range".into()));
    }
    if alpha.len() != f.cols || alpha.iter().any(|&i| i >= f.rows) {
        return Err(Error::Strategy("malformed counter-map α: V → U".into()));
    }
    if beta.len() != f.rows || beta.iter().any(|&j| j >= f.cols) {
        return Err(Error::Strategy("malformed counter-map β: U → V".into()));
    }
    Ok(if coin < prio {
        f.get(u, beta[u])
    } else {
        f.get(alpha[v], v)
    })
}
