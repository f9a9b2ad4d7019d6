//! Strategy classes: Markov tables from the DP, history-keyed feedback tables,
//! best responders and perturbations.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::SpatialGrid;
use crate::schedule::{Partition, SubGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    U,
    V,
}

impl Side {
    pub fn opponent(self) -> Side {
        match self {
            Side::U => Side::V,
            Side::V => Side::U,
        }
    }
}

/// A plain action and a counter-map from the opponent's actions to own actions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Decision {
    pub plain: usize,
    pub counter: Vec<usize>,
}

impl Decision {
    fn validate(&self, own: usize, opponent: usize) -> Result<()> {
        if self.plain >= own || self.counter.len() != opponent || self.counter.iter().any(|&a| a >= own) {
            return Err(Error::Strategy(format!(
                "decision {self:?} is not a member of {own} actions with {opponent} opponent actions"
            )));
        }
        Ok(())
    }

    fn random<R: Rng>(own: usize, opponent: usize, rng: &mut R) -> Self {
        Decision {
            plain: rng.random_range(0..own),
            counter: (0..opponent).map(|_| rng.random_range(0..own)).collect(),
        }
    }
}

/// Observed path at the partition times reached so far; the last entry is the
/// state at the current decision time.
#[derive(Clone, Copy, Debug)]
pub struct History<'a> {
    pub times: &'a [f64],
    pub states: &'a [f64],
}

impl History<'_> {
    pub fn current(&self) -> f64 {
        *self.states.last().expect("history holds at least the start state")
    }
}

/// A discrete strategy for one player. `k` is the 0-based interval about to be played.
pub trait Strategy: Send + Sync {
    fn side(&self) -> Side;

    /// Action when this player moves first.
    fn plain(&self, k: usize, history: &History<'_>) -> usize;

    /// Action when this player sees the opponent's action first.
    fn counter(&self, k: usize, history: &History<'_>, opponent: usize) -> usize;

    /// Lattice on which lookups are defined, if any. States outside it are clamped.
    fn domain(&self) -> Option<&SpatialGrid> {
        None
    }
}

/// Decisions fixed per sub-grid block, chosen by the lattice node nearest to the
/// state at the block's first time.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovStrategy {
    side: Side,
    grid: SpatialGrid,
    subgrid: SubGrid,
    tables: Vec<Vec<Decision>>,
}

impl MarkovStrategy {
    pub fn new(
        side: Side,
        grid: SpatialGrid,
        subgrid: SubGrid,
        tables: Vec<Vec<Decision>>,
        own: usize,
        opponent: usize,
    ) -> Result<Self> {
        if tables.len() != subgrid.blocks() {
            return Err(Error::Misaligned(format!(
                "{} strategy tables for {} sub-grid blocks",
                tables.len(),
                subgrid.blocks()
            )));
        }
        for table in &tables {
            if table.len() != grid.nodes() {
                return Err(Error::Misaligned(format!(
                    "table has {} entries, grid has {} nodes",
                    table.len(),
                    grid.nodes()
                )));
            }
            for d in table {
                d.validate(own, opponent)?;
            }
        }
        Ok(Self {
            side,
            grid,
            subgrid,
            tables,
        })
    }

    /// Independent uniform decisions at every block and node.
    pub fn uniform_random<R: Rng>(
        side: Side,
        grid: SpatialGrid,
        subgrid: SubGrid,
        own: usize,
        opponent: usize,
        rng: &mut R,
    ) -> Self {
        let tables = (0..subgrid.blocks())
            .map(|_| {
                (0..grid.nodes())
                    .map(|_| Decision::random(own, opponent, rng))
                    .collect()
            })
            .collect();
        Self {
            side,
            grid,
            subgrid,
            tables,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn subgrid(&self) -> &SubGrid {
        &self.subgrid
    }

    pub fn tables(&self) -> &[Vec<Decision>] {
        &self.tables
    }

    /// Decision in force over interval `k` given the state at the block start.
    pub fn decision_at(&self, k: usize, anchor_state: f64) -> &Decision {
        let block = self.subgrid.block_of(k);
        &self.tables[block][self.grid.nearest(anchor_state)]
    }

    fn decision(&self, k: usize, history: &History<'_>) -> &Decision {
        let anchor = self.subgrid.indices()[self.subgrid.block_of(k)];
        self.decision_at(k, history.states[anchor])
    }

    /// One row per block and node: `block, t, node, x, plain, counter` with the
    /// counter-map written as `;`-separated indices.
    pub fn write_csv<W: Write>(&self, out: W, partition: &Partition) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["block", "t", "node", "x", "plain", "counter"])?;
        for (i, table) in self.tables.iter().enumerate() {
            let t = partition.times()[self.subgrid.indices()[i]];
            for (j, d) in table.iter().enumerate() {
                let counter: Vec<String> = d.counter.iter().map(|a| a.to_string()).collect();
                w.write_record([
                    i.to_string(),
                    format!("{t:?}"),
                    j.to_string(),
                    format!("{:?}", self.grid.node(j)),
                    d.plain.to_string(),
                    counter.join(";"),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl Strategy for MarkovStrategy {
    fn side(&self) -> Side {
        self.side
    }

    fn plain(&self, k: usize, history: &History<'_>) -> usize {
        self.decision(k, history).plain
    }

    fn counter(&self, k: usize, history: &History<'_>, opponent: usize) -> usize {
        self.decision(k, history).counter[opponent]
    }

    fn domain(&self) -> Option<&SpatialGrid> {
        Some(&self.grid)
    }
}

/// Decisions keyed by interval, a coarse bucket of the current state and the
/// sign of the last observed move.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackStrategy {
    side: Side,
    intervals: usize,
    buckets: usize,
    window: (f64, f64),
    table: Vec<Decision>,
}

impl FeedbackStrategy {
    #[allow(clippy::too_many_arguments)]
    pub fn uniform_random<R: Rng>(
        side: Side,
        intervals: usize,
        buckets: usize,
        window: (f64, f64),
        own: usize,
        opponent: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if buckets == 0 || !(window.1 > window.0) {
            return Err(Error::Invalid(
                "feedback strategy needs buckets ≥ 1 and a nonempty window".into(),
            ));
        }
        let table = (0..intervals * buckets * 2)
            .map(|_| Decision::random(own, opponent, rng))
            .collect();
        Ok(Self {
            side,
            intervals,
            buckets,
            window,
            table,
        })
    }

    fn decision(&self, k: usize, history: &History<'_>) -> &Decision {
        let x = history.current();
        let (lo, hi) = self.window;
        let pos = ((x - lo) / (hi - lo) * self.buckets as f64).floor();
        let bucket = pos.clamp(0.0, (self.buckets - 1) as f64) as usize;
        let n = history.states.len();
        let rising = n >= 2 && history.states[n - 1] >= history.states[n - 2];
        &self.table[(k.min(self.intervals - 1) * self.buckets + bucket) * 2 + rising as usize]
    }
}

impl Strategy for FeedbackStrategy {
    fn side(&self) -> Side {
        self.side
    }

    fn plain(&self, k: usize, history: &History<'_>) -> usize {
        self.decision(k, history).plain
    }

    fn counter(&self, k: usize, history: &History<'_>, opponent: usize) -> usize {
        self.decision(k, history).counter[opponent]
    }
}

/// Optimal reply to a fixed Markov strategy, computed on the lattice. Within a
/// block the reply depends on which of the opponent's committed decisions is in
/// force and on the current node.
#[derive(Clone, Debug)]
pub struct ResponseStrategy {
    pub(crate) side: Side,
    pub(crate) opponent: MarkovStrategy,
    /// Per block: index of each distinct opponent decision.
    pub(crate) keys: Vec<HashMap<Decision, usize>>,
    /// Per block, per opponent decision: `steps × nodes` decisions, row-major.
    pub(crate) tables: Vec<Vec<Vec<Decision>>>,
}

impl ResponseStrategy {
    fn decision(&self, k: usize, history: &History<'_>) -> &Decision {
        let sub = self.opponent.subgrid();
        let block = sub.block_of(k);
        let start = sub.indices()[block];
        let opp = self.opponent.decision_at(k, history.states[start]);
        let key = self.keys[block][opp];
        let grid = self.opponent.grid();
        &self.tables[block][key][(k - start) * grid.nodes() + grid.nearest(history.current())]
    }
}

impl Strategy for ResponseStrategy {
    fn side(&self) -> Side {
        self.side
    }

    fn plain(&self, k: usize, history: &History<'_>) -> usize {
        self.decision(k, history).plain
    }

    fn counter(&self, k: usize, history: &History<'_>, opponent: usize) -> usize {
        self.decision(k, history).counter[opponent]
    }

    fn domain(&self) -> Option<&SpatialGrid> {
        Some(self.opponent.grid())
    }
}

/// Wraps a strategy and replaces its choice by a uniform action with
/// probability `epsilon`, keyed deterministically on `(k, node, branch)`.
pub struct Perturbed<S> {
    inner: S,
    grid: SpatialGrid,
    epsilon: f64,
    seed: u64,
    own: usize,
}

impl<S: Strategy> Perturbed<S> {
    pub fn new(inner: S, grid: SpatialGrid, epsilon: f64, seed: u64, own: usize) -> Self {
        Self {
            inner,
            grid,
            epsilon,
            seed,
            own,
        }
    }

    fn maybe_replace(&self, k: usize, history: &History<'_>, branch: u64, action: usize) -> usize {
        let node = self.grid.nearest(history.current()) as u64;
        let h = splitmix64(self.seed ^ splitmix64((k as u64) << 32 ^ node ^ branch << 56));
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        if u < self.epsilon {
            (splitmix64(h) % self.own as u64) as usize
        } else {
            action
        }
    }
}

impl<S: Strategy> Strategy for Perturbed<S> {
    fn side(&self) -> Side {
        self.inner.side()
    }

    fn plain(&self, k: usize, history: &History<'_>) -> usize {
        self.maybe_replace(k, history, 0, self.inner.plain(k, history))
    }

    fn counter(&self, k: usize, history: &History<'_>, opponent: usize) -> usize {
        let a = self.inner.counter(k, history, opponent);
        self.maybe_replace(k, history, 1 + opponent as u64, a)
    }

    fn domain(&self) -> Option<&SpatialGrid> {
        self.inner.domain()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
