//! Backward induction on the lattice.
//!
//! Random mode solves the coin-tossed local game at every node and step.
//! Deterministic mode solves the lower game on marked intervals and the upper
//! game elsewhere. It also computes Markov-class bounds: within each sub-grid
//! block the maximizer of `V_minus` commits to a pair `(a, α)` while the
//! minimizer replies step by step, and symmetrically for `V_plus`.

use std::collections::HashMap;

use rayon::prelude::*;

use super::lattice::TransitionModel;
use super::strategy::{Decision, MarkovStrategy, ResponseStrategy, Side, Strategy};
use crate::error::{Error, Result};
use crate::pde::ValueField;
use crate::schedule::{MarkSequence, SubGrid};
use crate::static_game::{convex_mix, lower_value, upper_value, LocalGameMatrix};

/// Upper bound on committed pairs `|A|·|A|^|B|` enumerated per block.
pub const MAX_COMMITTED_PAIRS: usize = 4096;

/// How priority is resolved on each interval.
#[derive(Clone, Copy, Debug)]
pub enum PriorityRule<'a> {
    Marks(&'a MarkSequence),
    Coin,
}

/// Lattice values and the Markov profile extracted from them.
#[derive(Clone, Debug)]
pub struct GameValueTables {
    /// Value of the discrete game with per-step play, at every partition time.
    pub value: ValueField,
    /// Value guaranteed by `u_strategy`; equals `value` in random mode.
    pub v_minus: ValueField,
    /// Value guaranteed by `v_strategy`; equals `value` in random mode.
    pub v_plus: ValueField,
    pub u_strategy: MarkovStrategy,
    pub v_strategy: MarkovStrategy,
}

impl GameValueTables {
    /// Game value at the first time, interpolated at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        self.value.interpolate(0, x)
    }

    /// `(V_minus, V_plus)` at the first time, interpolated at `x`.
    pub fn bounds_at(&self, x: f64) -> (f64, f64) {
        (self.v_minus.interpolate(0, x), self.v_plus.interpolate(0, x))
    }

    /// Largest `V_minus − V_plus` over the whole table; nonpositive when ordered.
    pub fn ordering_violation(&self) -> f64 {
        self.v_minus
            .values()
            .iter()
            .zip(self.v_plus.values())
            .map(|(lo, hi)| lo - hi)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn terminal(lattice: &TransitionModel) -> Vec<f64> {
    let g = &lattice.spec().payoff;
    lattice
        .grid()
        .coordinates()
        .into_iter()
        .map(|x| g.eval_scalar(x))
        .collect()
}

fn check_finite(values: &[f64], t: f64) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::NonFinite { t, node }),
        None => Ok(()),
    }
}

pub fn dp_value_random(lattice: &TransitionModel) -> Result<GameValueTables> {
    let spec = lattice.spec();
    let grid = lattice.grid();
    let times = lattice.partition().times();
    let (value, u_strategy, v_strategy) = stepwise(lattice, |k, j| spec.priority.eval_scalar(times[k], grid.node(j)))?;
    Ok(GameValueTables {
        v_minus: value.clone(),
        v_plus: value.clone(),
        value,
        u_strategy,
        v_strategy,
    })
}

/// Per-step backward induction with the local game mixed by `prio(k, j)`.
fn stepwise(
    lattice: &TransitionModel,
    prio: impl Fn(usize, usize) -> f64 + Sync,
) -> Result<(ValueField, MarkovStrategy, MarkovStrategy)> {
    let grid = lattice.grid();
    let part = lattice.partition();
    let (n, nodes, nu, nv) = (part.intervals(), grid.nodes(), lattice.u_count(), lattice.v_count());

    let mut values = vec![0.0; (n + 1) * nodes];
    values[n * nodes..].copy_from_slice(&terminal(lattice));
    let mut u_tables = vec![Vec::new(); n];
    let mut v_tables = vec![Vec::new(); n];

    for k in (0..n).rev() {
        let (head, tail) = values.split_at_mut((k + 1) * nodes);
        let next = &tail[..nodes];
        let t = part.times()[k];
        let solved: Vec<(f64, Decision, Decision)> = (0..nodes)
            .into_par_iter()
            .map(|j| {
                let mut table = vec![0.0; nu * nv];
                lattice.fill_table(k, j, next, &mut table);
                let f = LocalGameMatrix::new(nu, nv, table).expect("nonempty action sets");
                let lo = lower_value(&f);
                let up = upper_value(&f);
                (
                    convex_mix(prio(k, j), lo.value, up.value),
                    Decision {
                        plain: lo.u_star,
                        counter: up.alpha_star,
                    },
                    Decision {
                        plain: up.v_star,
                        counter: lo.beta_star,
                    },
                )
            })
            .collect();
        let cur = &mut head[k * nodes..];
        let (mut us, mut vs) = (Vec::with_capacity(nodes), Vec::with_capacity(nodes));
        for (j, (value, du, dv)) in solved.into_iter().enumerate() {
            cur[j] = value;
            us.push(du);
            vs.push(dv);
        }
        check_finite(cur, t)?;
        u_tables[k] = us;
        v_tables[k] = vs;
    }

    let sub = SubGrid::every_interval(n);
    Ok((
        ValueField::new(part.times().to_vec(), grid.clone(), values)?,
        MarkovStrategy::new(Side::U, grid.clone(), sub.clone(), u_tables, nu, nv)?,
        MarkovStrategy::new(Side::V, grid.clone(), sub, v_tables, nv, nu)?,
    ))
}

/// All pairs `(plain, counter)` with `counter: opponent → own`, plain-major.
fn committed_pairs(own: usize, opponent: usize) -> Result<Vec<Decision>> {
    let maps = (own as u128).pow(opponent as u32);
    let total = own as u128 * maps;
    if total > MAX_COMMITTED_PAIRS as u128 {
        return Err(Error::Invalid(format!(
            "{total} committed pairs exceed the enumeration limit {MAX_COMMITTED_PAIRS}"
        )));
    }
    let maps = maps as usize;
    Ok((0..own)
        .flat_map(|plain| {
            (0..maps).map(move |code| Decision {
                plain,
                counter: (0..opponent).map(|l| code / own.pow(l as u32) % own).collect(),
            })
        })
        .collect())
}

fn check_schedule(lattice: &TransitionModel, marks: &MarkSequence, subgrid: &SubGrid) -> Result<()> {
    let n = lattice.partition().intervals();
    if marks.len() != n || subgrid.intervals() != n {
        return Err(Error::Misaligned(format!(
            "{} intervals, {} marks, sub-grid over {} intervals",
            n,
            marks.len(),
            subgrid.intervals()
        )));
    }
    Ok(())
}

#[inline]
fn arg_extreme(len: usize, mut value: impl FnMut(usize) -> f64, maximize: bool) -> (usize, f64) {
    let mut best = (0, value(0));
    for i in 1..len {
        let x = value(i);
        if (maximize && x > best.1) || (!maximize && x < best.1) {
            best = (i, x);
        }
    }
    best
}

/// One backward step of the inner DP with the maximizer committed to `pair`.
#[inline]
fn u_committed_step(lattice: &TransitionModel, k: usize, j: usize, pair: &Decision, mark: bool, w: &[f64]) -> f64 {
    let nv = lattice.v_count();
    if mark {
        arg_extreme(nv, |l| lattice.expectation(k, j, pair.plain, l, w), false).1
    } else {
        arg_extreme(nv, |l| lattice.expectation(k, j, pair.counter[l], l, w), false).1
    }
}

/// One backward step of the inner DP with the minimizer committed to `pair`.
#[inline]
fn v_committed_step(lattice: &TransitionModel, k: usize, j: usize, pair: &Decision, mark: bool, w: &[f64]) -> f64 {
    let nu = lattice.u_count();
    if mark {
        arg_extreme(nu, |i| lattice.expectation(k, j, i, pair.counter[i], w), true).1
    } else {
        arg_extreme(nu, |i| lattice.expectation(k, j, i, pair.plain, w), true).1
    }
}

pub fn dp_value_deterministic(
    lattice: &TransitionModel,
    marks: &MarkSequence,
    subgrid: &SubGrid,
) -> Result<GameValueTables> {
    let spec = lattice.spec();
    if !spec.priority.time_only() {
        return Err(Error::StateDependentPriority);
    }
    check_schedule(lattice, marks, subgrid)?;
    let grid = lattice.grid();
    let part = lattice.partition();
    let (nodes, nu, nv) = (grid.nodes(), lattice.u_count(), lattice.v_count());
    let u_pairs = committed_pairs(nu, nv)?;
    let v_pairs = committed_pairs(nv, nu)?;
    let blocks = subgrid.blocks();

    let mut minus = vec![0.0; (blocks + 1) * nodes];
    let mut plus = vec![0.0; (blocks + 1) * nodes];
    let g = terminal(lattice);
    minus[blocks * nodes..].copy_from_slice(&g);
    plus[blocks * nodes..].copy_from_slice(&g);
    let mut u_tables = vec![Vec::new(); blocks];
    let mut v_tables = vec![Vec::new(); blocks];

    for i in (0..blocks).rev() {
        let t = part.times()[subgrid.indices()[i]];
        let (values, table) = commit_block(
            lattice,
            marks,
            subgrid,
            i,
            &u_pairs,
            &minus[(i + 1) * nodes..][..nodes],
            true,
        );
        minus[i * nodes..(i + 1) * nodes].copy_from_slice(&values);
        check_finite(&values, t)?;
        u_tables[i] = table;
        let (values, table) = commit_block(
            lattice,
            marks,
            subgrid,
            i,
            &v_pairs,
            &plus[(i + 1) * nodes..][..nodes],
            false,
        );
        plus[i * nodes..(i + 1) * nodes].copy_from_slice(&values);
        check_finite(&values, t)?;
        v_tables[i] = table;
    }

    let (value, _, _) = stepwise(lattice, |k, _| if marks.get(k) { 1.0 } else { 0.0 })?;
    let times: Vec<f64> = subgrid.indices().iter().map(|&l| part.times()[l]).collect();
    Ok(GameValueTables {
        value,
        v_minus: ValueField::new(times.clone(), grid.clone(), minus)?,
        v_plus: ValueField::new(times, grid.clone(), plus)?,
        u_strategy: MarkovStrategy::new(Side::U, grid.clone(), subgrid.clone(), u_tables, nu, nv)?,
        v_strategy: MarkovStrategy::new(Side::V, grid.clone(), subgrid.clone(), v_tables, nv, nu)?,
    })
}

/// Best committed pair per node for block `i` and the resulting block-start values.
fn commit_block(
    lattice: &TransitionModel,
    marks: &MarkSequence,
    subgrid: &SubGrid,
    i: usize,
    pairs: &[Decision],
    end: &[f64],
    maximizer_commits: bool,
) -> (Vec<f64>, Vec<Decision>) {
    let nodes = end.len();
    let mut best = vec![0.0; nodes];
    let mut choice = vec![0usize; nodes];
    for (pi, pair) in pairs.iter().enumerate() {
        let mut w = end.to_vec();
        for k in subgrid.block_range(i).rev() {
            let mark = marks.get(k);
            w = (0..nodes)
                .into_par_iter()
                .map(|j| {
                    if maximizer_commits {
                        u_committed_step(lattice, k, j, pair, mark, &w)
                    } else {
                        v_committed_step(lattice, k, j, pair, mark, &w)
                    }
                })
                .collect();
        }
        for j in 0..nodes {
            let better = if maximizer_commits {
                w[j] > best[j]
            } else {
                w[j] < best[j]
            };
            if pi == 0 || better {
                best[j] = w[j];
                choice[j] = pi;
            }
        }
    }
    (best, choice.into_iter().map(|pi| pairs[pi].clone()).collect())
}

/// Lattice value of the best reply to `fixed` and the reply itself.
#[derive(Clone, Debug)]
pub struct BestResponse {
    pub value: ValueField,
    pub strategy: ResponseStrategy,
}

/// Optimal reply, on the lattice, to a fixed Markov strategy of either player.
pub fn best_response(
    lattice: &TransitionModel,
    rule: PriorityRule<'_>,
    fixed: &MarkovStrategy,
) -> Result<BestResponse> {
    let grid = lattice.grid();
    if fixed.grid() != grid {
        return Err(Error::Misaligned("fixed strategy lives on a different grid".into()));
    }
    let part = lattice.partition();
    let sub = fixed.subgrid();
    if sub.intervals() != part.intervals() {
        return Err(Error::Misaligned(
            "fixed strategy sub-grid does not match the partition".into(),
        ));
    }
    if let PriorityRule::Marks(m) = rule {
        if m.len() != part.intervals() {
            return Err(Error::Misaligned(format!(
                "{} marks for {} intervals",
                m.len(),
                part.intervals()
            )));
        }
    }
    let nodes = grid.nodes();
    let blocks = sub.blocks();
    let mut values = vec![0.0; (blocks + 1) * nodes];
    values[blocks * nodes..].copy_from_slice(&terminal(lattice));
    let mut keys = vec![HashMap::new(); blocks];
    let mut tables = vec![Vec::new(); blocks];

    for i in (0..blocks).rev() {
        let mut distinct: Vec<&Decision> = Vec::new();
        for d in &fixed.tables()[i] {
            if !keys[i].contains_key(d) {
                keys[i].insert(d.clone(), distinct.len());
                distinct.push(d);
            }
        }
        let range = sub.block_range(i);
        let start = range.start;
        let end = values[(i + 1) * nodes..(i + 2) * nodes].to_vec();
        let mut block_tables = Vec::with_capacity(distinct.len());
        let mut block_values = Vec::with_capacity(distinct.len());
        for fixed_decision in &distinct {
            let mut w = end.clone();
            let mut steps: Vec<Vec<Decision>> = vec![Vec::new(); range.len()];
            for k in range.clone().rev() {
                let solved: Vec<(f64, Decision)> = (0..nodes)
                    .into_par_iter()
                    .map(|j| respond(lattice, rule, k, j, fixed.side(), fixed_decision, &w))
                    .collect();
                let (vals, decs): (Vec<f64>, Vec<Decision>) = solved.into_iter().unzip();
                check_finite(&vals, part.times()[k])?;
                w = vals;
                steps[k - start] = decs;
            }
            block_tables.push(steps.concat());
            block_values.push(w);
        }
        for (j, d) in fixed.tables()[i].iter().enumerate() {
            values[i * nodes + j] = block_values[keys[i][d]][j];
        }
        tables[i] = block_tables;
    }

    let times: Vec<f64> = sub.indices().iter().map(|&l| part.times()[l]).collect();
    Ok(BestResponse {
        value: ValueField::new(times, grid.clone(), values)?,
        strategy: ResponseStrategy {
            side: fixed.side().opponent(),
            opponent: fixed.clone(),
            keys,
            tables,
        },
    })
}

/// Reply of the free player at node `j` on interval `k` to the fixed decision.
fn respond(
    lattice: &TransitionModel,
    rule: PriorityRule<'_>,
    k: usize,
    j: usize,
    fixed_side: Side,
    fixed: &Decision,
    w: &[f64],
) -> (f64, Decision) {
    let (nu, nv) = (lattice.u_count(), lattice.v_count());
    let mut f = vec![0.0; nu * nv];
    lattice.fill_table(k, j, w, &mut f);
    let at = |i: usize, l: usize| f[i * nv + l];
    let (heads, tails, decision) = match fixed_side {
        Side::V => {
            // Heads: v sees u and answers with its counter-map.
            let (plain, heads) = arg_extreme(nu, |i| at(i, fixed.counter[i]), true);
            let counter: Vec<usize> = (0..nv).map(|l| arg_extreme(nu, |i| at(i, l), true).0).collect();
            let tails = at(counter[fixed.plain], fixed.plain);
            (heads, tails, Decision { plain, counter })
        }
        Side::U => {
            let counter: Vec<usize> = (0..nu).map(|i| arg_extreme(nv, |l| at(i, l), false).0).collect();
            let heads = at(fixed.plain, counter[fixed.plain]);
            let (plain, tails) = arg_extreme(nv, |l| at(fixed.counter[l], l), false);
            (heads, tails, Decision { plain, counter })
        }
    };
    let value = match rule {
        PriorityRule::Marks(m) => {
            if m.get(k) {
                heads
            } else {
                tails
            }
        }
        PriorityRule::Coin => {
            let p = lattice
                .spec()
                .priority
                .eval_scalar(lattice.partition().times()[k], lattice.grid().node(j));
            convex_mix(p, heads, tails)
        }
    };
    (value, decision)
}
