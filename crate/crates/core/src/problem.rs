//! Controlled-SDE data: coefficients, payoff, priority function and action grids.
//!
//! Every ingredient is drawn from a small registry of parametric families so a
//! problem can be written down in a config file and replayed exactly. Each
//! family also declares the analytic constants (Lipschitz, linear growth,
//! payoff bound) that [`validate_assumptions`] checks by sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite, ordered grid of action vectors. Order is used for tie-breaking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActionPoints", into = "ActionPoints")]
pub struct ActionSet {
    points: Vec<Vec<f64>>,
}

/// Accepts either scalar actions `[-1.0, 1.0]` or vectors `[[-1.0], [1.0]]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ActionPoints {
    Scalars(Vec<f64>),
    Vectors(Vec<Vec<f64>>),
}

impl TryFrom<ActionPoints> for ActionSet {
    type Error = Error;

    fn try_from(raw: ActionPoints) -> Result<Self> {
        match raw {
            ActionPoints::Scalars(xs) => ActionSet::scalar(&xs),
            ActionPoints::Vectors(points) => ActionSet::new(points),
        }
    }
}

impl From<ActionSet> for ActionPoints {
    fn from(set: ActionSet) -> Self {
        if set.dim() == 1 {
            ActionPoints::Scalars(set.points.into_iter().map(|p| p[0]).collect())
        } else {
            ActionPoints::Vectors(set.points)
        }
    }
}

impl ActionSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("action set is empty".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::Invalid("actions must have at least one component".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Dimension(format!(
                    "action {i} has {} components, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::Invalid(format!("action {i} is not finite")));
            }
            if points[..i].contains(p) {
                return Err(Error::Invalid(format!("action {i} duplicates an earlier action")));
            }
        }
        Ok(Self { points })
    }

    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn get(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    /// Leading component of action `index`; the registered families only read this one.
    pub fn lead(&self, index: usize) -> f64 {
        self.points[index][0]
    }

    pub fn index_of(&self, action: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == action)
    }

    fn max_abs_lead(&self) -> f64 {
        self.points.iter().map(|p| p[0].abs()).fold(0.0, f64::max)
    }
}

/// Drift and diffusion families. All of them read only the leading component
/// of each action vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientFamily {
    /// `b = drift`, `σ = vol·I`.
    Constant { drift: f64, vol: f64 },
    /// `b_i = drift − reversion·x_i + u_gain·u + v_gain·v`, `σ = vol·I`.
    Affine {
        drift: f64,
        reversion: f64,
        u_gain: f64,
        v_gain: f64,
        vol: f64,
    },
    /// `b = kappa·u·v`, `σ = vol·I`.
    Bilinear { kappa: f64, vol: f64 },
    /// `b = kappa·u·v`, `σ = (vol + vol_gain·u·v)·I`.
    BilinearVol { kappa: f64, vol: f64, vol_gain: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    #[serde(flatten)]
    pub family: CoefficientFamily,
    pub dim: usize,
    pub noise_dim: usize,
}

/// Drift vector and row-major `d × d′` diffusion matrix at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub dim: usize,
    pub noise_dim: usize,
}

impl Coefficients {
    pub fn diffusion_at(&self, row: usize, col: usize) -> f64 {
        self.diffusion[row * self.noise_dim + col]
    }

    /// Row-major `σσᵀ`.
    pub fn covariance(&self) -> Vec<f64> {
        let (d, m) = (self.dim, self.noise_dim);
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..m).map(|k| self.diffusion_at(i, k) * self.diffusion_at(j, k)).sum();
            }
        }
        out
    }
}

impl CoefficientSpec {
    pub fn new(family: CoefficientFamily, dim: usize, noise_dim: usize) -> Result<Self> {
        let spec = Self { family, dim, noise_dim };
        spec.validate()?;
        Ok(spec)
    }

    /// One-dimensional state and noise.
    pub fn scalar(family: CoefficientFamily) -> Self {
        Self {
            family,
            dim: 1,
            noise_dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.noise_dim == 0 {
            return Err(Error::Dimension("state and noise dimensions must be positive".into()));
        }
        let params: &[f64] = match &self.family {
            CoefficientFamily::Constant { drift, vol } => &[*drift, *vol],
            CoefficientFamily::Affine {
                drift,
                reversion,
                u_gain,
                v_gain,
                vol,
            } => &[*drift, *reversion, *u_gain, *v_gain, *vol],
            CoefficientFamily::Bilinear { kappa, vol } => &[*kappa, *vol],
            CoefficientFamily::BilinearVol { kappa, vol, vol_gain } => &[*kappa, *vol, *vol_gain],
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Invalid("coefficient parameters must be finite".into()));
        }
        Ok(())
    }

    fn diag_len(&self) -> usize {
        self.dim.min(self.noise_dim)
    }

    /// Per-component drift and the scalar multiplying the rectangular identity in `σ`.
    #[inline]
    fn drift_and_vol(&self, x_i: f64, u: f64, v: f64) -> (f64, f64) {
        match self.family {
            CoefficientFamily::Constant { drift, vol } => (drift, vol),
            CoefficientFamily::Affine {
                drift,
                reversion,
                u_gain,
                v_gain,
                vol,
            } => (drift - reversion * x_i + u_gain * u + v_gain * v, vol),
            CoefficientFamily::Bilinear { kappa, vol } => (kappa * u * v, vol),
            CoefficientFamily::BilinearVol { kappa, vol, vol_gain } => (kappa * u * v, vol + vol_gain * u * v),
        }
    }

    /// Drift and variance rate `σσᵀ` for a scalar state with leading action components `u`, `v`.
    #[inline]
    pub fn scalar_drift_variance(&self, _t: f64, x: f64, u: f64, v: f64) -> (f64, f64) {
        let (b, s) = self.drift_and_vol(x, u, v);
        // σ is 1 × d′ with a single nonzero entry.
        (b, s * s)
    }

    /// Drift and the single nonzero diffusion entry for a scalar state.
    #[inline]
    pub fn scalar_drift_vol(&self, _t: f64, x: f64, u: f64, v: f64) -> (f64, f64) {
        self.drift_and_vol(x, u, v)
    }

    pub fn eval(&self, _t: f64, x: &[f64], u: &[f64], v: &[f64]) -> Coefficients {
        let mut drift = vec![0.0; self.dim];
        let mut diffusion = vec![0.0; self.dim * self.noise_dim];
        let mut vol = 0.0;
        for (i, slot) in drift.iter_mut().enumerate() {
            let (b, s) = self.drift_and_vol(x[i], u[0], v[0]);
            *slot = b;
            vol = s;
        }
        for i in 0..self.diag_len() {
            diffusion[i * self.noise_dim + i] = vol;
        }
        Coefficients {
            drift,
            diffusion,
            dim: self.dim,
            noise_dim: self.noise_dim,
        }
    }

    /// True when `b` and `σ` do not depend on the state.
    pub fn state_independent(&self) -> bool {
        match self.family {
            CoefficientFamily::Affine { reversion, .. } => reversion == 0.0,
            _ => true,
        }
    }

    /// True when the coefficient `b(t,x,u,v)` is odd in `u`.
    pub fn odd_in_u(&self) -> bool {
        matches!(
            self.family,
            CoefficientFamily::Bilinear { .. } | CoefficientFamily::BilinearVol { .. }
        )
    }

    /// Declared state-Lipschitz constant of `|b| + |σ|`.
    pub fn lipschitz_constant(&self) -> f64 {
        match self.family {
            CoefficientFamily::Affine { reversion, .. } => reversion.abs(),
            _ => 0.0,
        }
    }

    /// Declared `C` with `|b| + |σ| ≤ C(1 + |x|)` over the given action grids.
    pub fn growth_constant(&self, u_set: &ActionSet, v_set: &ActionSet) -> f64 {
        let sd = (self.dim as f64).sqrt();
        let sm = (self.diag_len() as f64).sqrt();
        let (um, vm) = (u_set.max_abs_lead(), v_set.max_abs_lead());
        match self.family {
            CoefficientFamily::Constant { drift, vol } => sd * drift.abs() + sm * vol.abs(),
            CoefficientFamily::Affine {
                drift,
                reversion,
                u_gain,
                v_gain,
                vol,
            } => {
                let base = sd * (drift.abs() + u_gain.abs() * um + v_gain.abs() * vm) + sm * vol.abs();
                base.max(reversion.abs())
            }
            CoefficientFamily::Bilinear { kappa, vol } => sd * kappa.abs() * um * vm + sm * vol.abs(),
            CoefficientFamily::BilinearVol { kappa, vol, vol_gain } => {
                sd * kappa.abs() * um * vm + sm * (vol.abs() + vol_gain.abs() * um * vm)
            }
        }
    }
}

/// Terminal payoff `g` paid by `v` to `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PayoffSpec {
    Constant {
        value: f64,
    },
    /// `amplitude·cos(frequency·Σx_i + phase)`.
    Cos {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// `min(|x|², cap)`.
    TruncatedQuadratic {
        cap: f64,
    },
    /// `amplitude·tanh(slope·x_0)`.
    Tanh {
        amplitude: f64,
        slope: f64,
    },
}

impl PayoffSpec {
    pub fn cos() -> Self {
        PayoffSpec::Cos {
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PayoffSpec::Constant { value } => value.is_finite(),
            PayoffSpec::Cos {
                amplitude,
                frequency,
                phase,
            } => amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
            PayoffSpec::TruncatedQuadratic { cap } => cap.is_finite() && cap >= 0.0,
            PayoffSpec::Tanh { amplitude, slope } => amplitude.is_finite() && slope.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid payoff parameters: {self:?}")))
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            PayoffSpec::Constant { value } => value,
            PayoffSpec::Cos {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * x.iter().sum::<f64>() + phase).cos(),
            PayoffSpec::TruncatedQuadratic { cap } => x.iter().map(|c| c * c).sum::<f64>().min(cap),
            PayoffSpec::Tanh { amplitude, slope } => amplitude * (slope * x[0]).tanh(),
        }
    }

    #[inline]
    pub fn eval_scalar(&self, x: f64) -> f64 {
        self.eval(std::slice::from_ref(&x))
    }

    /// Declared `sup |g|`.
    pub fn bound(&self) -> f64 {
        match *self {
            PayoffSpec::Constant { value } => value.abs(),
            PayoffSpec::Cos { amplitude, .. } | PayoffSpec::Tanh { amplitude, .. } => amplitude.abs(),
            PayoffSpec::TruncatedQuadratic { cap } => cap,
        }
    }
}

/// Priority probability `p(t, x)`: the chance that `v` sees `u` on an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PrioritySpec {
    Constant {
        value: f64,
    },
    /// `clamp(intercept + slope·t, 0, 1)`.
    LinearTime {
        intercept: f64,
        slope: f64,
    },
    /// `low + (high − low)/(1 + exp(−slope·(x_0 − center)))`.
    Logistic {
        low: f64,
        high: f64,
        slope: f64,
        center: f64,
    },
}

impl PrioritySpec {
    pub fn constant(value: f64) -> Self {
        PrioritySpec::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PrioritySpec::Constant { value } if !(0.0..=1.0).contains(&value) => Err(Error::Probability(value)),
            PrioritySpec::LinearTime { intercept, slope } if !(intercept.is_finite() && slope.is_finite()) => {
                Err(Error::Invalid("linear_time priority parameters must be finite".into()))
            }
            PrioritySpec::Logistic {
                low,
                high,
                slope,
                center,
            } => {
                for p in [low, high] {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::Probability(p));
                    }
                }
                if slope.is_finite() && center.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Invalid("logistic priority parameters must be finite".into()))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn time_only(&self) -> bool {
        !matches!(self, PrioritySpec::Logistic { .. })
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match *self {
            PrioritySpec::Constant { value } => value,
            PrioritySpec::LinearTime { intercept, slope } => (intercept + slope * t).clamp(0.0, 1.0),
            PrioritySpec::Logistic {
                low,
                high,
                slope,
                center,
            } => {
                let s = 1.0 / (1.0 + (-slope * (x[0] - center)).exp());
                (low + (high - low) * s).clamp(0.0, 1.0)
            }
        }
    }

    #[inline]
    pub fn eval_scalar(&self, t: f64, x: f64) -> f64 {
        self.eval(t, std::slice::from_ref(&x))
    }

    /// Evaluation for time-only families; the state argument is irrelevant.
    pub fn eval_time(&self, t: f64) -> Result<f64> {
        if !self.time_only() {
            return Err(Error::StateDependentPriority);
        }
        Ok(self.eval_scalar(t, 0.0))
    }
}

/// A complete game: dynamics, payoff, priority rule, action grids, horizon and start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub coefficients: CoefficientSpec,
    pub payoff: PayoffSpec,
    pub priority: PrioritySpec,
    pub u_actions: ActionSet,
    pub v_actions: ActionSet,
    pub horizon: f64,
    pub start_time: f64,
    pub start_state: Vec<f64>,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        coefficients: CoefficientSpec,
        payoff: PayoffSpec,
        priority: PrioritySpec,
        u_actions: ActionSet,
        v_actions: ActionSet,
        horizon: f64,
        start_time: f64,
        start_state: Vec<f64>,
    ) -> Result<Self> {
        let spec = Self {
            coefficients,
            payoff,
            priority,
            u_actions,
            v_actions,
            horizon,
            start_time,
            start_state,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        self.payoff.validate()?;
        self.priority.validate()?;
        if !(self.horizon.is_finite() && self.start_time.is_finite()) {
            return Err(Error::Invalid("horizon and start time must be finite".into()));
        }
        if !(0.0 <= self.start_time && self.start_time <= self.horizon) {
            return Err(Error::Invalid(format!(
                "start time {} must lie in [0, {}]",
                self.start_time, self.horizon
            )));
        }
        if self.start_state.len() != self.coefficients.dim {
            return Err(Error::Dimension(format!(
                "start state has {} components, coefficients expect {}",
                self.start_state.len(),
                self.coefficients.dim
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim
    }

    /// The benchmark game without the Isaacs condition: `b = 4uv`, `σ = √2`,
    /// `U = V = {−1, 1}`, `g = cos`, `T = 0.5`.
    pub fn bilinear_benchmark(priority: PrioritySpec) -> Self {
        Self {
            coefficients: CoefficientSpec::scalar(CoefficientFamily::Bilinear {
                kappa: 4.0,
                vol: std::f64::consts::SQRT_2,
            }),
            payoff: PayoffSpec::cos(),
            priority,
            u_actions: ActionSet::scalar(&[-1.0, 1.0]).expect("static action set"),
            v_actions: ActionSet::scalar(&[-1.0, 1.0]).expect("static action set"),
            horizon: 0.5,
            start_time: 0.0,
            start_state: vec![0.0],
        }
    }

    /// Drift and variance rate at a scalar state for action indices `(ui, vi)`.
    #[inline]
    pub fn drift_variance(&self, t: f64, x: f64, ui: usize, vi: usize) -> (f64, f64) {
        self.coefficients
            .scalar_drift_variance(t, x, self.u_actions.lead(ui), self.v_actions.lead(vi))
    }

    #[inline]
    pub fn drift_vol(&self, t: f64, x: f64, ui: usize, vi: usize) -> (f64, f64) {
        self.coefficients
            .scalar_drift_vol(t, x, self.u_actions.lead(ui), self.v_actions.lead(vi))
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if t.is_finite() && (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfDomain {
                t,
                horizon: self.horizon,
            })
        }
    }

    pub(crate) fn require_scalar(&self) -> Result<()> {
        if self.dim() != 1 {
            return Err(Error::Dimension(format!(
                "lattice solvers support d = 1, problem has d = {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Drift `b(t,x,u,v)` and diffusion `σ(t,x,u,v)` with domain checks.
pub fn eval_coefficients(spec: &ProblemSpec, t: f64, x: &[f64], u: &[f64], v: &[f64]) -> Result<Coefficients> {
    spec.check_time(t)?;
    if x.len() != spec.dim() {
        return Err(Error::Dimension(format!(
            "state has {} components, expected {}",
            x.len(),
            spec.dim()
        )));
    }
    spec.u_actions
        .index_of(u)
        .ok_or_else(|| Error::UnknownAction(u.to_vec()))?;
    spec.v_actions
        .index_of(v)
        .ok_or_else(|| Error::UnknownAction(v.to_vec()))?;
    Ok(spec.coefficients.eval(t, x, u, v))
}

/// Sampled surrogates for the standing assumptions, with pass flags against
/// the family-declared constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub samples: usize,
    pub max_lipschitz_ratio: f64,
    pub max_growth_ratio: f64,
    pub max_abs_payoff: f64,
    pub min_priority: f64,
    pub max_priority: f64,
    pub declared_lipschitz: f64,
    pub declared_growth: f64,
    pub declared_payoff_bound: f64,
    pub lipschitz_ok: bool,
    pub growth_ok: bool,
    pub payoff_ok: bool,
    pub priority_ok: bool,
    pub time_only_ok: bool,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.lipschitz_ok && self.growth_ok && self.payoff_ok && self.priority_ok && self.time_only_ok
    }
}

fn norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

const REL_SLACK: f64 = 1e-12;

pub fn validate_assumptions(spec: &ProblemSpec, box_radius: f64, samples: usize, seed: u64) -> AssumptionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim();
    let coef = &spec.coefficients;
    let mut max_lip: f64 = 0.0;
    let mut max_growth: f64 = 0.0;
    let mut max_g: f64 = 0.0;
    let mut min_p = f64::INFINITY;
    let mut max_p = f64::NEG_INFINITY;
    let mut time_only_ok = true;
    let draw_point =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.random_range(-box_radius..=box_radius)).collect() };

    for _ in 0..samples.max(1) {
        let t = rng.random_range(0.0..=spec.horizon);
        let x = draw_point(&mut rng);
        let y = draw_point(&mut rng);
        let u = spec.u_actions.get(rng.random_range(0..spec.u_actions.len()));
        let v = spec.v_actions.get(rng.random_range(0..spec.v_actions.len()));
        let cx = coef.eval(t, &x, u, v);
        let cy = coef.eval(t, &y, u, v);

        let dist = diff_norm(&x, &y);
        if dist > 0.0 {
            let num = diff_norm(&cx.drift, &cy.drift) + diff_norm(&cx.diffusion, &cy.diffusion);
            max_lip = max_lip.max(num / dist);
        }
        max_growth = max_growth.max((norm(&cx.drift) + norm(&cx.diffusion)) / (1.0 + norm(&x)));
        max_g = max_g.max(spec.payoff.eval(&x).abs());

        let px = spec.priority.eval(t, &x);
        min_p = min_p.min(px);
        max_p = max_p.max(px);
        if spec.priority.time_only() && px.to_bits() != spec.priority.eval(t, &y).to_bits() {
            time_only_ok = false;
        }
    }

    let declared_lipschitz = coef.lipschitz_constant();
    let declared_growth = coef.growth_constant(&spec.u_actions, &spec.v_actions);
    let declared_payoff_bound = spec.payoff.bound();
    AssumptionReport {
        samples: samples.max(1),
        max_lipschitz_ratio: max_lip,
        max_growth_ratio: max_growth,
        max_abs_payoff: max_g,
        min_priority: min_p,
        max_priority: max_p,
        declared_lipschitz,
        declared_growth,
        declared_payoff_bound,
        lipschitz_ok: max_lip <= declared_lipschitz * (1.0 + REL_SLACK) + REL_SLACK,
        growth_ok: max_growth <= declared_growth * (1.0 + REL_SLACK) + REL_SLACK,
        payoff_ok: max_g <= declared_payoff_bound * (1.0 + REL_SLACK) + REL_SLACK,
        priority_ok: (0.0..=1.0).contains(&min_p) && (0.0..=1.0).contains(&max_p),
        time_only_ok,
    }
}
