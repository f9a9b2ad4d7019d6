//! Path simulation with actions frozen per interval and Euler sub-steps.
//!
//! Each path draws from its own coin and noise streams, derived from the
//! source seeds and the path index, so results do not depend on scheduling.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::strategy::{History, Side, Strategy};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::schedule::{MarkSequence, Partition};

const COIN_SALT: u64 = 0x636f_696e_5f73_7472;
const NOISE_SALT: u64 = 0x6e6f_6973_655f_7374;

/// Uniform draws on `[0, 1)`, one per interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CoinSource {
    pub seed: u64,
}

/// Brownian increments over Euler sub-steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NoiseSource {
    pub seed: u64,
}

fn path_rng(seed: u64, salt: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(path as u64);
    rng
}

impl CoinSource {
    pub fn path_stream(&self, path: usize) -> ChaCha8Rng {
        path_rng(self.seed, COIN_SALT, path)
    }
}

impl NoiseSource {
    pub fn path_stream(&self, path: usize) -> ChaCha8Rng {
        path_rng(self.seed, NOISE_SALT, path)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum PlayMode<'a> {
    Deterministic(&'a MarkSequence),
    Random(CoinSource),
}

/// One simulated path. `times`, `states` are at sub-step resolution; actions,
/// coins and priority outcomes are per interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    /// Brownian increment of each sub-step.
    pub noise: Vec<f64>,
    pub u_actions: Vec<usize>,
    pub v_actions: Vec<usize>,
    pub coins: Vec<Option<f64>>,
    /// `true` when `v` saw `u`'s action on that interval.
    pub v_sees_u: Vec<bool>,
    pub payoff: f64,
}

impl PathRecord {
    /// Largest deviation of the recorded states from the Euler recursion
    /// driven by the recorded actions and noise.
    pub fn euler_residual(&self, spec: &ProblemSpec) -> f64 {
        let n = self.u_actions.len();
        let substeps = self.noise.len() / n.max(1);
        let mut worst: f64 = 0.0;
        for m in 0..self.noise.len() {
            let k = m / substeps;
            let h = self.times[m + 1] - self.times[m];
            let (b, s) = spec.drift_vol(self.times[m], self.states[m], self.u_actions[k], self.v_actions[k]);
            let next = self.states[m] + b * h + s * self.noise[m];
            worst = worst.max((next - self.states[m + 1]).abs());
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub mean: f64,
    pub std_error: f64,
    pub payoffs: Vec<f64>,
    /// Decisions taken at states outside a strategy's lattice.
    pub clamped_decisions: usize,
    pub records: Vec<PathRecord>,
}

fn check_action(side: Side, a: usize, count: usize) -> Result<usize> {
    if a < count {
        Ok(a)
    } else {
        Err(Error::Strategy(format!(
            "{side:?} strategy returned action {a} outside {count} actions"
        )))
    }
}

/// Plays `paths` independent games and keeps full records for the first `keep` paths.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    spec: &ProblemSpec,
    partition: &Partition,
    mode: PlayMode<'_>,
    strat_u: &dyn Strategy,
    strat_v: &dyn Strategy,
    paths: usize,
    substeps: usize,
    noise: NoiseSource,
    keep: usize,
) -> Result<SimulationResult> {
    spec.require_scalar()?;
    if paths == 0 || substeps == 0 {
        return Err(Error::Invalid("paths and substeps must be at least 1".into()));
    }
    if strat_u.side() != Side::U || strat_v.side() != Side::V {
        return Err(Error::Strategy("strategies passed for the wrong players".into()));
    }
    if let PlayMode::Deterministic(marks) = mode {
        if marks.len() != partition.intervals() {
            return Err(Error::Misaligned(format!(
                "{} marks for {} intervals",
                marks.len(),
                partition.intervals()
            )));
        }
    }
    let outcomes: Vec<(f64, usize, Option<PathRecord>)> = (0..paths)
        .into_par_iter()
        .map(|path| {
            play_path(
                spec,
                partition,
                mode,
                strat_u,
                strat_v,
                substeps,
                noise,
                path,
                path < keep,
            )
        })
        .collect::<Result<_>>()?;

    let mut payoffs = Vec::with_capacity(paths);
    let mut records = Vec::new();
    let mut clamped_decisions = 0;
    for (payoff, clamped, record) in outcomes {
        payoffs.push(payoff);
        clamped_decisions += clamped;
        records.extend(record);
    }
    let n = paths as f64;
    let mean = payoffs.iter().sum::<f64>() / n;
    let std_error = if paths > 1 {
        (payoffs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(SimulationResult {
        mean,
        std_error,
        payoffs,
        clamped_decisions,
        records,
    })
}

#[allow(clippy::too_many_arguments)]
fn play_path(
    spec: &ProblemSpec,
    partition: &Partition,
    mode: PlayMode<'_>,
    strat_u: &dyn Strategy,
    strat_v: &dyn Strategy,
    substeps: usize,
    noise: NoiseSource,
    path: usize,
    record: bool,
) -> Result<(f64, usize, Option<PathRecord>)> {
    let n = partition.intervals();
    let times = partition.times();
    let (nu, nv) = (spec.u_actions.len(), spec.v_actions.len());
    let mut coin_rng = match mode {
        PlayMode::Random(c) => Some(c.path_stream(path)),
        PlayMode::Deterministic(_) => None,
    };
    let mut noise_rng = noise.path_stream(path);

    let mut x = spec.start_state[0];
    let mut anchors = Vec::with_capacity(n + 1);
    anchors.push(x);
    let mut rec = record.then(|| PathRecord {
        times: vec![times[0]],
        states: vec![x],
        noise: Vec::with_capacity(n * substeps),
        u_actions: Vec::with_capacity(n),
        v_actions: Vec::with_capacity(n),
        coins: Vec::with_capacity(n),
        v_sees_u: Vec::with_capacity(n),
        payoff: 0.0,
    });
    let mut clamped = 0;

    for k in 0..n {
        let t = times[k];
        let (coin, v_sees_u) = match (mode, coin_rng.as_mut()) {
            (PlayMode::Random(_), Some(rng)) => {
                let eta: f64 = rng.random();
                (Some(eta), eta < spec.priority.eval_scalar(t, x))
            }
            (PlayMode::Deterministic(marks), _) => (None, marks.get(k)),
            _ => unreachable!("coin stream exists exactly in random mode"),
        };
        let history = History {
            times: &times[..=k],
            states: &anchors,
        };
        for s in [strat_u, strat_v] {
            if s.domain().is_some_and(|g| !g.contains(x)) {
                clamped += 1;
            }
        }
        let (u, v) = if v_sees_u {
            let u = check_action(Side::U, strat_u.plain(k, &history), nu)?;
            (u, check_action(Side::V, strat_v.counter(k, &history, u), nv)?)
        } else {
            let v = check_action(Side::V, strat_v.plain(k, &history), nv)?;
            (check_action(Side::U, strat_u.counter(k, &history, v), nu)?, v)
        };

        let h = partition.step(k) / substeps as f64;
        let sqrt_h = h.sqrt();
        for m in 0..substeps {
            let tm = t + m as f64 * h;
            let (b, s) = spec.drift_vol(tm, x, u, v);
            let z: f64 = noise_rng.sample(StandardNormal);
            let dw = sqrt_h * z;
            x += b * h + s * dw;
            if let Some(r) = rec.as_mut() {
                r.times.push(if m + 1 == substeps {
                    times[k + 1]
                } else {
                    t + (m + 1) as f64 * h
                });
                r.states.push(x);
                r.noise.push(dw);
            }
        }
        if !x.is_finite() {
            return Err(Error::NonFinite {
                t: times[k + 1],
                node: path,
            });
        }
        anchors.push(x);
        if let Some(r) = rec.as_mut() {
            r.u_actions.push(u);
            r.v_actions.push(v);
            r.coins.push(coin);
            r.v_sees_u.push(v_sees_u);
        }
    }
    let payoff = spec.payoff.eval_scalar(x);
    if let Some(r) = rec.as_mut() {
        r.payoff = payoff;
    }
    Ok((payoff, clamped, rec))
}

/// Long-format dump: one row per sub-step of each recorded path.
pub fn write_records_csv<W: Write>(out: W, records: &[PathRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "path", "step", "t", "x", "dw", "interval", "u", "v", "coin", "v_sees_u", "payoff",
    ])?;
    for (p, r) in records.iter().enumerate() {
        let n = r.u_actions.len();
        let substeps = r.noise.len() / n.max(1);
        for m in 0..r.states.len() {
            let k = if m == 0 { 0 } else { (m - 1) / substeps.max(1) };
            let (dw, interval, u, v, coin, sees) = if m == 0 || n == 0 {
                (
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                )
            } else {
                (
                    format!("{:?}", r.noise[m - 1]),
                    k.to_string(),
                    r.u_actions[k].to_string(),
                    r.v_actions[k].to_string(),
                    r.coins[k].map(|c| format!("{c:?}")).unwrap_or_default(),
                    (r.v_sees_u[k] as u8).to_string(),
                )
            };
            let payoff = if m + 1 == r.states.len() {
                format!("{:?}", r.payoff)
            } else {
                String::new()
            };
            w.write_record([
                p.to_string(),
                m.to_string(),
                format!("{:?}", r.times[m]),
                format!("{:?}", r.states[m]),
                dw,
                interval,
                u,
                v,
                coin,
                sees,
                payoff,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
