//! Time partitions, deterministic priority marks and the sub-grid on which
//! Markov strategies may change, plus the density diagnostics that tie the
//! marks to a time-only priority `p(t)`.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::PrioritySpec;

/// Strictly increasing times `s = t_0 < … < t_n = T`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    times: Vec<f64>,
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Invalid("a partition needs at least one interval".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Invalid("partition times must be finite".into()));
        }
        if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(format!(
                "partition not strictly increasing at interval {}",
                k + 1
            )));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of intervals `n`.
    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Length of interval `k` (0-based), i.e. `t_{k+1} − t_k`.
    pub fn step(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Mesh `‖Δ‖`.
    pub fn mesh(&self) -> f64 {
        (0..self.intervals()).map(|k| self.step(k)).fold(0.0, f64::max)
    }
}

pub fn make_uniform_partition(start: f64, end: f64, n: usize) -> Result<Partition> {
    if n == 0 {
        return Err(Error::Invalid("partition needs n ≥ 1 intervals".into()));
    }
    if !(start < end) {
        return Err(Error::Invalid(format!(
            "partition needs s < T, got s = {start}, T = {end}"
        )));
    }
    let width = end - start;
    let mut times: Vec<f64> = (0..=n).map(|k| start + k as f64 * width / n as f64).collect();
    times[n] = end;
    Partition::new(times)
}

/// Marks `ξ_k ∈ {0, 1}` per interval; `1` means `v` sees `u`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkSequence {
    marks: Vec<bool>,
}

impl MarkSequence {
    pub fn new(marks: Vec<bool>) -> Self {
        Self { marks }
    }

    pub fn constant(value: bool, n: usize) -> Self {
        Self { marks: vec![value; n] }
    }

    pub fn marks(&self) -> &[bool] {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn get(&self, k: usize) -> bool {
        self.marks[k]
    }
}

/// Partition indices `0 = l(0) < l(1) < … < l(I) = n` of the decision times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubGrid {
    indices: Vec<usize>,
}

impl SubGrid {
    pub fn new(indices: Vec<usize>, intervals: usize) -> Result<Self> {
        if indices.len() < 2 || indices[0] != 0 || *indices.last().unwrap() != intervals {
            return Err(Error::Misaligned(format!("sub-grid must run from 0 to {intervals}")));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Misaligned("sub-grid indices must increase strictly".into()));
        }
        Ok(Self { indices })
    }

    /// Every partition time is a decision time.
    pub fn every_interval(intervals: usize) -> Self {
        Self {
            indices: (0..=intervals).collect(),
        }
    }

    /// Consecutive blocks of `block` intervals, the last one possibly shorter.
    pub fn blocks_of(intervals: usize, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::Invalid("block size must be at least 1".into()));
        }
        let mut indices: Vec<usize> = (0..intervals).step_by(block).collect();
        indices.push(intervals);
        Self::new(indices, intervals)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn blocks(&self) -> usize {
        self.indices.len() - 1
    }

    /// Interval index range `[l(i), l(i+1))` of block `i` (0-based).
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.indices[i]..self.indices[i + 1]
    }

    /// Block containing interval `k` (0-based).
    pub fn block_of(&self, k: usize) -> usize {
        self.indices.partition_point(|&l| l <= k) - 1
    }

    pub fn intervals(&self) -> usize {
        *self.indices.last().unwrap()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub max_block_length: f64,
    pub max_deviation: f64,
    pub block_lengths: Vec<f64>,
    pub deviations: Vec<f64>,
    pub epsilon: f64,
    pub pass: bool,
}

impl DensityReport {
    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(Error::Density {
                max_block_length: self.max_block_length,
                max_deviation: self.max_deviation,
                epsilon: self.epsilon,
            })
        }
    }
}

/// Tolerance below which a running deficit counts as zero, relative to the step.
const TIE_TOL: f64 = 1e-9;

/// Rounding allowance when comparing block lengths and densities against `ε`.
const DENSITY_SLACK: f64 = 1e-12;

/// Greedy running-deficit marks over blocks of `block` intervals.
///
/// Interval `k` is marked iff the marked time so far falls short of `∫p` up to
/// and including `k`, with `p` read at each interval's left end. The deficit
/// carries across block boundaries, so rounding errors alternate in sign
/// instead of repeating in every block. Each block's marked time differs from
/// its share of `∫p` by less than one step.
pub fn make_marks(partition: &Partition, prio: &PrioritySpec, block: usize) -> Result<(MarkSequence, SubGrid)> {
    if !prio.time_only() {
        return Err(Error::StateDependentPriority);
    }
    let subgrid = SubGrid::blocks_of(partition.intervals(), block)?;
    let mut marks = Vec::with_capacity(partition.intervals());
    // Marked time minus target time so far.
    let mut surplus = 0.0;
    for k in 0..partition.intervals() {
        let dt = partition.step(k);
        surplus -= prio.eval_time(partition.times()[k])? * dt;
        let mark = surplus < -TIE_TOL * dt;
        if mark {
            surplus += dt;
        }
        marks.push(mark);
    }
    Ok((MarkSequence::new(marks), subgrid))
}

/// The `ε` that [`make_marks`] output is guaranteed to meet: per block, the
/// larger of its length and `max step / length` plus the spread of `p` over
/// the block's left endpoints.
pub fn forced_epsilon(partition: &Partition, subgrid: &SubGrid, prio: &PrioritySpec) -> Result<f64> {
    let t = partition.times();
    let mut eps: f64 = 0.0;
    for i in 0..subgrid.blocks() {
        let range = subgrid.block_range(i);
        let duration = t[range.end] - t[range.start];
        let start = prio.eval_time(t[range.start])?;
        let mut max_step: f64 = 0.0;
        let mut spread: f64 = 0.0;
        for k in range {
            max_step = max_step.max(partition.step(k));
            spread = spread.max((prio.eval_time(t[k])? - start).abs());
        }
        eps = eps.max(duration.max(max_step / duration + spread));
    }
    Ok(eps)
}

/// Block-length and time-weighted mark-density conditions against `p` within `epsilon`.
pub fn check_density(
    partition: &Partition,
    marks: &MarkSequence,
    subgrid: &SubGrid,
    prio: &PrioritySpec,
    epsilon: f64,
) -> Result<DensityReport> {
    if marks.len() != partition.intervals() {
        return Err(Error::Misaligned(format!(
            "{} marks for {} intervals",
            marks.len(),
            partition.intervals()
        )));
    }
    if subgrid.intervals() != partition.intervals() {
        return Err(Error::Misaligned(format!(
            "sub-grid ends at {}, partition has {} intervals",
            subgrid.intervals(),
            partition.intervals()
        )));
    }
    let t = partition.times();
    let mut block_lengths = Vec::with_capacity(subgrid.blocks());
    let mut deviations = Vec::with_capacity(subgrid.blocks());
    for i in 0..subgrid.blocks() {
        let range = subgrid.block_range(i);
        let duration = t[range.end] - t[range.start];
        let marked: f64 = range.clone().filter(|&k| marks.get(k)).map(|k| partition.step(k)).sum();
        let target = prio.eval_time(t[range.start])?;
        block_lengths.push(duration);
        deviations.push((marked / duration - target).abs());
    }
    let max_block_length = block_lengths.iter().copied().fold(0.0, f64::max);
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(DensityReport {
        max_block_length,
        max_deviation,
        block_lengths,
        deviations,
        epsilon,
        pass: max_block_length <= epsilon + DENSITY_SLACK && max_deviation <= epsilon + DENSITY_SLACK,
    })
}

/// One row per interval: `t_prev, t_next, mark, block`.
pub fn write_schedule_csv<W: Write>(
    out: W,
    partition: &Partition,
    marks: &MarkSequence,
    subgrid: &SubGrid,
) -> Result<()> {
    if marks.len() != partition.intervals() || subgrid.intervals() != partition.intervals() {
        return Err(Error::Misaligned(
            "schedule components disagree on interval count".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_prev", "t_next", "mark", "block"])?;
    for k in 0..partition.intervals() {
        w.write_record([
            partition.times()[k].to_string(),
            partition.times()[k + 1].to_string(),
            u8::from(marks.get(k)).to_string(),
            subgrid.block_of(k).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_schedule_csv`].
pub fn read_schedule_csv<R: Read>(input: R) -> Result<(Partition, MarkSequence, SubGrid)> {
    let mut r = csv::Reader::from_reader(input);
    let mut times = Vec::new();
    let mut marks = Vec::new();
    let mut blocks: Vec<usize> = Vec::new();
    let parse_err = |what: &str| Error::Invalid(format!("schedule csv: bad {what}"));
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Invalid(format!(
                "schedule csv: row {k} has {} fields",
                rec.len()
            )));
        }
        let t0: f64 = rec[0].parse().map_err(|_| parse_err("t_prev"))?;
        let t1: f64 = rec[1].parse().map_err(|_| parse_err("t_next"))?;
        if k == 0 {
            times.push(t0);
        } else if times[k].to_bits() != t0.to_bits() {
            return Err(Error::Misaligned(format!(
                "row {k} does not start where row {} ended",
                k - 1
            )));
        }
        times.push(t1);
        marks.push(match &rec[2] {
            "0" => false,
            "1" => true,
            _ => return Err(parse_err("mark")),
        });
        blocks.push(rec[3].parse().map_err(|_| parse_err("block"))?);
    }
    let partition = Partition::new(times)?;
    let mut indices = vec![0];
    for k in 1..blocks.len() {
        if blocks[k] != blocks[k - 1] {
            indices.push(k);
        }
    }
    indices.push(blocks.len());
    let subgrid = SubGrid::new(indices, partition.intervals())?;
    Ok((partition, MarkSequence::new(marks), subgrid))
}
