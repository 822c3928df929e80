//! Random walk of the coefficients K, ε and γ, and the stochastic simulation
//! driven by it.
//!
//! Every `update_interval` ms the three coefficients move in the order
//! K → ε → γ:
//!
//! * `K ← K (1 + 0.1 U¹)`, reflected to `K (1 − 0.1 U¹)` if it leaves the range;
//! * `ε ← ε + 0.01 U²`, reflected the same way;
//! * `γ ← γ + 0.1 U³`, with `U³` redrawn until `εγ` is back in its range.
//!
//! `U¹, U², U³` come from three independent streams of [`UniformPm1`].

use std::ops::ControlFlow;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{IntegrationConfig, IntegrationError, Stepper};
use crate::model::{ModelParams, State};
use crate::rng::UniformPm1;

/// Scale and offset mapping `u` to the plotted E-conductance `ū`.
pub const U_BAR_SCALE: f64 = 1.96;
pub const U_BAR_OFFSET: f64 = 0.00672;
/// Ratio of E- to I-current per unit conductance.
pub const E_CURRENT_FACTOR: f64 = 3.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("invalid walk config: {0}")]
    InvalidConfig(String),
    #[error(
        "no acceptable γ step after {redraws} draws: ε = {eps}, γ = {gamma}, \
         acceptance interval for γ is [{lo}, {hi}]"
    )]
    RedrawExhausted {
        eps: f64,
        gamma: f64,
        lo: f64,
        hi: f64,
        redraws: u32,
    },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("signal has zero variance")]
    ZeroVariance,
    #[error("need at least two samples, got {0}")]
    TooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub k_range: [f64; 2],
    pub eps_range: [f64; 2],
    /// Range for the product εγ.
    pub f_range: [f64; 2],
    /// ms between coefficient updates.
    pub update_interval: f64,
    /// Relative step of K.
    pub k_step: f64,
    pub eps_step: f64,
    pub gamma_step: f64,
    pub max_redraws: u32,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            k_range: [30.0, 100.0],
            eps_range: [0.04, 0.1],
            f_range: [0.2, 0.5],
            update_interval: 0.1,
            k_step: 0.1,
            eps_step: 0.01,
            gamma_step: 0.1,
            max_redraws: 1000,
            seed: 1,
        }
    }
}

impl WalkConfig {
    /// The narrower K range quoted alongside the conductance traces.
    pub fn narrow_k_preset() -> Self {
        Self {
            k_range: [30.0, 50.0],
            ..Self::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), WalkError> {
        for (name, r) in [
            ("K", self.k_range),
            ("eps", self.eps_range),
            ("f", self.f_range),
        ] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
                return Err(WalkError::InvalidConfig(format!(
                    "{name} range [{}, {}] must be finite with min < max",
                    r[0], r[1]
                )));
            }
        }
        if self.k_range[0] <= 0.0 || self.eps_range[0] <= 0.0 || self.f_range[0] <= 0.0 {
            return Err(WalkError::InvalidConfig("ranges must be positive".into()));
        }
        if !(self.update_interval > 0.0 && self.update_interval.is_finite()) {
            return Err(WalkError::InvalidConfig(format!(
                "update_interval must be positive, got {}",
                self.update_interval
            )));
        }
        for (name, s) in [
            ("K", self.k_step),
            ("eps", self.eps_step),
            ("gamma", self.gamma_step),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(WalkError::InvalidConfig(format!(
                    "{name} step must be non-negative"
                )));
            }
        }
        if self.max_redraws == 0 {
            return Err(WalkError::InvalidConfig(
                "max_redraws must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Midpoints of the K and ε ranges, γ chosen so that εγ is mid-range.
    pub fn midpoint_start(&self) -> WalkStart {
        let k = 0.5 * (self.k_range[0] + self.k_range[1]);
        let eps = 0.5 * (self.eps_range[0] + self.eps_range[1]);
        let f = 0.5 * (self.f_range[0] + self.f_range[1]);
        WalkStart {
            k,
            eps,
            gamma: f / eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkStart {
    pub k: f64,
    pub eps: f64,
    pub gamma: f64,
}

/// How a bounded update landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Direct,
    Reflected,
    Clamped,
}

fn in_range(x: f64, r: [f64; 2]) -> bool {
    x >= r[0] && x <= r[1]
}

fn bounded(candidate: f64, reflected: f64, range: [f64; 2]) -> (f64, Move) {
    if in_range(candidate, range) {
        (candidate, Move::Direct)
    } else if in_range(reflected, range) {
        (reflected, Move::Reflected)
    } else {
        let clamped = candidate.clamp(range[0], range[1]);
        warn!("walk update clamped {candidate} to {clamped} (reflection {reflected} also out of range)");
        (clamped, Move::Clamped)
    }
}

/// `K (1 + step·u)`, or `K (1 − step·u)` if that leaves the range.
pub fn update_k(k: f64, draw: f64, cfg: &WalkConfig) -> (f64, Move) {
    bounded(
        k * (1.0 + cfg.k_step * draw),
        k * (1.0 - cfg.k_step * draw),
        cfg.k_range,
    )
}

/// `ε + step·u`, or `ε − step·u` if that leaves the range.
pub fn update_eps(eps: f64, draw: f64, cfg: &WalkConfig) -> (f64, Move) {
    bounded(
        eps + cfg.eps_step * draw,
        eps - cfg.eps_step * draw,
        cfg.eps_range,
    )
}

/// `γ + step·u` with `u` redrawn from `draws` until `εγ ∈ f_range`. Returns
/// the new γ and the number of draws consumed.
pub fn update_gamma(
    gamma: f64,
    eps: f64,
    draws: &mut impl FnMut() -> f64,
    cfg: &WalkConfig,
) -> Result<(f64, u32), WalkError> {
    for n in 1..=cfg.max_redraws {
        let candidate = gamma + cfg.gamma_step * draws();
        if in_range(eps * candidate, cfg.f_range) {
            return Ok((candidate, n));
        }
    }
    let lo = (cfg.f_range[0] / eps).max(gamma - cfg.gamma_step);
    let hi = (cfg.f_range[1] / eps).min(gamma + cfg.gamma_step);
    Err(WalkError::RedrawExhausted {
        eps,
        gamma,
        lo,
        hi,
        redraws: cfg.max_redraws,
    })
}

/// Counters of the walk's boundary handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WalkStats {
    pub updates: u64,
    pub k_reflections: u64,
    pub k_clamps: u64,
    pub eps_reflections: u64,
    pub eps_clamps: u64,
    /// Draws rejected by the εγ constraint.
    pub gamma_rejections: u64,
    /// Updates where no γ step could restore εγ for the new ε, so the ε
    /// move was undone.
    pub eps_reverts: u64,
    pub floor_events: u64,
}

/// The three draw streams of one run.
#[derive(Debug, Clone)]
pub struct WalkRng {
    k: UniformPm1,
    eps: UniformPm1,
    gamma: UniformPm1,
}

impl WalkRng {
    pub fn new(seed: u64) -> Self {
        Self {
            k: UniformPm1::new(seed, 0),
            eps: UniformPm1::new(seed, 1),
            gamma: UniformPm1::new(seed, 2),
        }
    }
}

/// One update instant. Order K → ε → γ, the γ test using the new ε. If the
/// redraw budget runs out for the new ε, the ε move is undone and γ is
/// redrawn against the previous ε, for which a feasible step always exists.
pub fn walk_update(
    current: WalkStart,
    rng: &mut WalkRng,
    cfg: &WalkConfig,
    stats: &mut WalkStats,
) -> Result<WalkStart, WalkError> {
    let (k, km) = update_k(current.k, rng.k.draw(), cfg);
    let (eps, em) = update_eps(current.eps, rng.eps.draw(), cfg);
    match km {
        Move::Reflected => stats.k_reflections += 1,
        Move::Clamped => stats.k_clamps += 1,
        Move::Direct => {}
    }
    match em {
        Move::Reflected => stats.eps_reflections += 1,
        Move::Clamped => stats.eps_clamps += 1,
        Move::Direct => {}
    }
    let mut draw_gamma = || rng.gamma.draw();
    let (eps, (gamma, used)) = match update_gamma(current.gamma, eps, &mut draw_gamma, cfg) {
        Ok(r) => (eps, r),
        Err(WalkError::RedrawExhausted { .. }) => {
            debug!("reverting ε {eps} -> {} (no feasible γ step)", current.eps);
            stats.eps_reverts += 1;
            stats.gamma_rejections += cfg.max_redraws as u64;
            (
                current.eps,
                update_gamma(current.gamma, current.eps, &mut draw_gamma, cfg)?,
            )
        }
        Err(e) => return Err(e),
    };
    stats.gamma_rejections += (used - 1) as u64;
    stats.updates += 1;
    Ok(WalkStart { k, eps, gamma })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub k_trace: Vec<f64>,
    pub eps_trace: Vec<f64>,
    pub gamma_trace: Vec<f64>,
    pub base_params: ModelParams,
    pub walk: WalkConfig,
    pub stats: WalkStats,
}

impl StochasticTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn u(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.u).collect()
    }

    pub fn v(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.v).collect()
    }
}

/// Number of integration steps per walk update. `dt` must divide the update
/// interval.
pub fn steps_per_update(walk: &WalkConfig, icfg: &IntegrationConfig) -> Result<u64, WalkError> {
    let ratio = walk.update_interval / icfg.dt;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
        return Err(WalkError::InvalidConfig(format!(
            "dt = {} does not divide update_interval = {}",
            icfg.dt, walk.update_interval
        )));
    }
    Ok(n as u64)
}

/// Integrate with coefficients held constant between updates. `base`
/// supplies a1, a2, b, c; its K, ε and γ are replaced by `start`.
pub fn simulate_stochastic(
    s0: State,
    start: WalkStart,
    base: &ModelParams,
    walk: &WalkConfig,
    icfg: &IntegrationConfig,
) -> Result<StochasticTrajectory, WalkError> {
    simulate_with(s0, start, base, walk, icfg, |_, _, _| {
        ControlFlow::Continue(())
    })
}

fn simulate_with(
    s0: State,
    start: WalkStart,
    base: &ModelParams,
    walk: &WalkConfig,
    icfg: &IntegrationConfig,
    mut visit: impl FnMut(f64, State, &WalkStart) -> ControlFlow<()>,
) -> Result<StochasticTrajectory, WalkError> {
    walk.validate()?;
    icfg.validate().map_err(WalkError::from)?;
    if !in_range(start.k, walk.k_range)
        || !in_range(start.eps, walk.eps_range)
        || !in_range(start.eps * start.gamma, walk.f_range)
    {
        return Err(WalkError::InvalidConfig(format!(
            "initial coefficients {start:?} outside the configured ranges"
        )));
    }
    let params = |w: &WalkStart| ModelParams {
        k: w.k,
        epsilon: w.eps,
        gamma: w.gamma,
        ..*base
    };
    params(&start).validate().map_err(IntegrationError::from)?;
    let per_update = steps_per_update(walk, icfg)?;
    let stride = icfg.record_stride as u64;
    let n_steps = icfg.n_steps();
    let capacity = (n_steps / stride + 1) as usize;

    let mut out = StochasticTrajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        k_trace: Vec::with_capacity(capacity),
        eps_trace: Vec::with_capacity(capacity),
        gamma_trace: Vec::with_capacity(capacity),
        base_params: *base,
        walk: *walk,
        stats: WalkStats::default(),
    };
    let mut rng = WalkRng::new(walk.seed);
    let mut current = start;
    let mut stepper = Stepper::new(s0, params(&current), icfg.dt, icfg.state_floor);
    for i in 0..=n_steps {
        if i > 0 && i % per_update == 0 {
            current = walk_update(current, &mut rng, walk, &mut out.stats)?;
            stepper.set_params(params(&current));
        }
        let s = stepper.state();
        if i % stride == 0 {
            out.times.push(i as f64 * icfg.dt);
            out.states.push(s);
            out.k_trace.push(current.k);
            out.eps_trace.push(current.eps);
            out.gamma_trace.push(current.gamma);
        }
        if visit(i as f64 * icfg.dt, s, &current).is_break() {
            break;
        }
        if i < n_steps {
            stepper.step()?;
        }
    }
    out.stats.floor_events = stepper.floor_events();
    Ok(out)
}

/// Independent runs for each seed, returned in seed order.
pub fn simulate_ensemble(
    seeds: &[u64],
    s0: State,
    start: WalkStart,
    base: &ModelParams,
    walk: &WalkConfig,
    icfg: &IntegrationConfig,
) -> Vec<Result<StochasticTrajectory, WalkError>> {
    seeds
        .par_iter()
        .map(|&seed| simulate_stochastic(s0, start, base, &walk.with_seed(seed), icfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductanceRow {
    pub t: f64,
    pub u_bar: f64,
    pub e_current: f64,
    pub v: f64,
}

/// `ū = 1.96 u + 0.00672`, the E-current proxy `3.5 ū`, and `v`.
pub fn u_bar(u: f64) -> f64 {
    U_BAR_SCALE * u + U_BAR_OFFSET
}

pub fn conductance_outputs(times: &[f64], states: &[State]) -> Vec<ConductanceRow> {
    times
        .iter()
        .zip(states)
        .map(|(&t, s)| {
            let ub = u_bar(s.u);
            ConductanceRow {
                t,
                u_bar: ub,
                e_current: E_CURRENT_FACTOR * ub,
                v: s.v,
            }
        })
        .collect()
}

/// Pearson correlation of the two series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, WalkError> {
    let n = x.len().min(y.len());
    if n < 2 {
        return Err(WalkError::TooShort(n));
    }
    let constant = |s: &[f64]| s.iter().all(|&a| a == s[0]);
    if constant(&x[..n]) || constant(&y[..n]) {
        return Err(WalkError::ZeroVariance);
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x[..n].iter().zip(&y[..n]) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(WalkError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between `3.5 ū(t)` and `v(t)` over samples with `t ≥ from_ms`.
pub fn ei_balance_correlation(
    times: &[f64],
    states: &[State],
    from_ms: f64,
) -> Result<f64, WalkError> {
    let start = times.partition_point(|&t| t < from_ms);
    let rows = conductance_outputs(&times[start..], &states[start..]);
    let e: Vec<f64> = rows.iter().map(|r| r.e_current).collect();
    let i: Vec<f64> = rows.iter().map(|r| r.v).collect();
    pearson(&e, &i)
}
