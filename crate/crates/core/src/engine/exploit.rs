//! Empirical exploitability of a fixed Markov strategy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::dp::{best_response, PriorityRule};
use super::lattice::TransitionModel;
use super::simulate::{simulate, NoiseSource, PlayMode, SimulationResult};
use super::strategy::{FeedbackStrategy, MarkovStrategy, Perturbed, Side, Strategy};
use crate::error::{Error, Result};
use crate::schedule::SubGrid;

/// Probability with which a perturbed best response deviates.
pub const PERTURBATION: f64 = 0.1;

/// Monte Carlo settings shared by every challenger.
#[derive(Clone, Copy, Debug)]
pub struct MonteCarloSettings {
    pub paths: usize,
    pub substeps: usize,
    pub noise: NoiseSource,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChallengerOutcome {
    pub label: String,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExploitabilityReport {
    pub fixed_side: Side,
    /// Lattice value of the best reply at the start state.
    pub best_response_value: f64,
    /// Monte Carlo payoff of the lattice best reply.
    pub baseline: ChallengerOutcome,
    /// Challenger most favourable to the free player.
    pub extreme: ChallengerOutcome,
    /// How far the extreme challenger improves on the baseline, in the free player's favour.
    pub shift: f64,
    pub outcomes: Vec<ChallengerOutcome>,
    pub clamped_decisions: usize,
}

/// Plays `fixed` against the lattice best reply, its perturbations, random
/// Markov tables and random feedback tables, all on common random numbers.
pub fn exploitability(
    lattice: &TransitionModel,
    mode: PlayMode<'_>,
    fixed: &MarkovStrategy,
    challengers: usize,
    seed: u64,
    mc: MonteCarloSettings,
) -> Result<ExploitabilityReport> {
    if challengers == 0 {
        return Err(Error::Invalid("at least one challenger is required".into()));
    }
    let spec = lattice.spec();
    let part = lattice.partition();
    let grid = lattice.grid();
    let free = fixed.side().opponent();
    let (own, opp) = match free {
        Side::U => (lattice.u_count(), lattice.v_count()),
        Side::V => (lattice.v_count(), lattice.u_count()),
    };
    let rule = match mode {
        PlayMode::Deterministic(marks) => PriorityRule::Marks(marks),
        PlayMode::Random(_) => PriorityRule::Coin,
    };
    let br = best_response(lattice, rule, fixed)?;
    let x0 = spec.start_state[0];
    let best_response_value = br.value.interpolate(0, x0);

    let play = |challenger: &dyn Strategy| -> Result<SimulationResult> {
        let (su, sv): (&dyn Strategy, &dyn Strategy) = match free {
            Side::U => (challenger, fixed),
            Side::V => (fixed, challenger),
        };
        simulate(spec, part, mode, su, sv, mc.paths, mc.substeps, mc.noise, 0)
    };

    let rest = challengers - 1;
    let perturbed = rest.div_ceil(3);
    let feedback = (rest - perturbed) / 2;
    let markov = rest - perturbed - feedback;
    let window = (spec.start_state[0] - 3.0, spec.start_state[0] + 3.0);

    let mut outcomes = Vec::with_capacity(challengers);
    let mut clamped_decisions = 0;
    let mut record = |label: String, r: SimulationResult| {
        clamped_decisions += r.clamped_decisions;
        outcomes.push(ChallengerOutcome {
            label,
            mean: r.mean,
            std_error: r.std_error,
        });
    };
    record("best_response".into(), play(&br.strategy)?);
    for i in 0..perturbed {
        let s = Perturbed::new(
            br.strategy.clone(),
            grid.clone(),
            PERTURBATION,
            seed.wrapping_add(i as u64),
            own,
        );
        record(format!("perturbed_{i}"), play(&s)?);
    }
    for i in 0..markov {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x1000 + i as u64));
        let s = MarkovStrategy::uniform_random(
            free,
            grid.clone(),
            SubGrid::every_interval(part.intervals()),
            own,
            opp,
            &mut rng,
        );
        record(format!("markov_{i}"), play(&s)?);
    }
    for i in 0..feedback {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x2000 + i as u64));
        let s = FeedbackStrategy::uniform_random(free, part.intervals(), 16, window, own, opp, &mut rng)?;
        record(format!("feedback_{i}"), play(&s)?);
    }

    let sign = match free {
        Side::U => 1.0,
        Side::V => -1.0,
    };
    let extreme = outcomes.iter().skip(1).fold(outcomes[0].clone(), |best, o| {
        if sign * o.mean > sign * best.mean {
            o.clone()
        } else {
            best
        }
    });
    let baseline = outcomes[0].clone();
    Ok(ExploitabilityReport {
        fixed_side: fixed.side(),
        best_response_value,
        shift: sign * (extreme.mean - baseline.mean),
        baseline,
        extreme,
        outcomes,
        clamped_decisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::dp::dp_value_random;
    use crate::engine::lattice::build_lattice;
    use crate::engine::simulate::CoinSource;
    use crate::pde::SpatialGrid;
    use crate::problem::{ActionSet, PrioritySpec, ProblemSpec};
    use crate::schedule::make_uniform_partition;

    fn lattice(spec: &ProblemSpec, n: usize) -> TransitionModel {
        let grid = SpatialGrid::new(-6.0, 6.0, 241).unwrap();
        let part = make_uniform_partition(0.0, spec.horizon, n).unwrap();
        build_lattice(spec, &grid, &part, 5).unwrap()
    }

    fn settings(paths: usize) -> MonteCarloSettings {
        MonteCarloSettings {
            paths,
            substeps: 2,
            noise: NoiseSource { seed: 21 },
        }
    }

    #[test]
    fn singleton_sets_have_zero_shift() {
        let mut spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.5));
        spec.u_actions = ActionSet::scalar(&[1.0]).unwrap();
        spec.v_actions = ActionSet::scalar(&[-1.0]).unwrap();
        let lat = lattice(&spec, 5);
        let tables = dp_value_random(&lat).unwrap();
        let mode = PlayMode::Random(CoinSource { seed: 3 });
        let r = exploitability(&lat, mode, &tables.v_strategy, 7, 1, settings(200)).unwrap();
        assert_eq!(r.shift, 0.0);
        assert_eq!(r.outcomes.len(), 7);
        assert!(r.outcomes.iter().all(|o| o.mean == r.baseline.mean));
    }

    #[test]
    fn saddle_strategy_is_not_exploited() {
        let spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.5));
        let lat = lattice(&spec, 5);
        let tables = dp_value_random(&lat).unwrap();
        let value = tables.value_at(0.0);
        let mode = PlayMode::Random(CoinSource { seed: 8 });
        let r = exploitability(&lat, mode, &tables.v_strategy, 6, 2, settings(4000)).unwrap();
        assert!(r.extreme.mean <= value + 3.0 * r.extreme.std_error, "{r:?}");
        assert!((r.best_response_value - value).abs() < 1e-12);
    }

    #[test]
    fn random_maximizer_is_punished() {
        let spec = ProblemSpec::bilinear_benchmark(PrioritySpec::constant(0.5));
        let lat = lattice(&spec, 5);
        let tables = dp_value_random(&lat).unwrap();
        let value = tables.value_at(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sub = SubGrid::every_interval(5);
        let random_u = MarkovStrategy::uniform_random(Side::U, lat.grid().clone(), sub, 2, 2, &mut rng);
        let mode = PlayMode::Random(CoinSource { seed: 8 });
        let r = exploitability(&lat, mode, &random_u, 1, 2, settings(4000)).unwrap();
        assert!(r.extreme.mean <= value + 3.0 * r.extreme.std_error);
        assert!(r.best_response_value <= value + 1e-12);
    }
}
