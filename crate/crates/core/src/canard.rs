//! Local analysis near the fold point `(0, f(0)) = (0, −K a1 a2)` of the
//! `u = 0` branch, where trajectories may follow the repelling part of the
//! critical manifold before leaving it.
//!
//! Coordinates:
//!
//! * fold frame: `x = u`, `y = v + K a1 a2`, on the fast clock `τ = t/ε`;
//! * blow-up chart: `x = r x₂`, `y = r² y₂`, `ε = r³`, clock `s = r τ`.
//!
//! The fields below are derived from the model equations directly. With
//! `m = K a1 a2` they read
//!
//! ```text
//! x' = x (K(a1+a2) x − K x² − y)
//! y' = εγ (−m(c+m) − b m x + (c+2m) y + b x y − y²)
//!
//! x₂' = K(a1+a2) x₂² − K r x₂³ − r x₂ y₂
//! y₂' = γ (−m(c+m) − b m r x₂ + (c+2m) r² y₂ + b r³ x₂ y₂ − r⁴ y₂²)
//! ```

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{CrossingDetector, EventSpec};
use crate::integrator::{run_live, IntegrationConfig, IntegrationError};
use crate::model::{ModelParams, State};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CanardError {
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("entry coefficient k must be non-zero")]
    ZeroEntry,
    #[error("x₂(0) must be non-zero")]
    ZeroInitialX,
    #[error("t = {t} is at or past the blow-up time {blowup} of the r = 0 solution")]
    PastBlowup { t: f64, blowup: f64 },
    #[error("epsilon list must be positive and strictly decreasing")]
    InvalidEpsilonList,
    #[error("trajectory from ε = {epsilon} did not reach x = {target} within {t_end} ms")]
    NoCrossing {
        epsilon: f64,
        target: f64,
        t_end: f64,
    },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldFrame {
    pub x: f64,
    pub y: f64,
}

pub fn to_fold_frame(s: State, p: &ModelParams) -> FoldFrame {
    FoldFrame {
        x: s.u,
        y: s.v + p.k * p.a1 * p.a2,
    }
}

pub fn from_fold_frame(ff: FoldFrame, p: &ModelParams) -> State {
    State::new(ff.x, -p.k * p.a1 * p.a2 + ff.y)
}

/// The field in fold coordinates on the fast clock, `d/dτ = ε d/dt`.
pub fn fold_frame_field(ff: FoldFrame, p: &ModelParams) -> (f64, f64) {
    let (x, y) = (ff.x, ff.y);
    let m = p.k * p.a1 * p.a2;
    let dx = x * (p.k * (p.a1 + p.a2) * x - p.k * x * x - y);
    let dy = p.epsilon
        * p.gamma
        * (-m * (p.c + m) - p.b * m * x + (p.c + 2.0 * m) * y + p.b * x * y - y * y);
    (dx, dy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupCoords {
    pub x2: f64,
    pub y2: f64,
    pub r: f64,
}

pub fn blowup(ff: FoldFrame, epsilon: f64) -> Result<BlowupCoords, CanardError> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(CanardError::NonPositiveEpsilon(epsilon));
    }
    let r = epsilon.cbrt();
    Ok(BlowupCoords {
        x2: ff.x / r,
        y2: ff.y / (r * r),
        r,
    })
}

pub fn blowdown(b: BlowupCoords) -> FoldFrame {
    FoldFrame {
        x: b.r * b.x2,
        y: b.r * b.r * b.y2,
    }
}

/// The field in the blow-up chart on the clock `s = r τ`.
pub fn blowup_field(b: BlowupCoords, p: &ModelParams) -> (f64, f64) {
    let (x2, y2, r) = (b.x2, b.y2, b.r);
    let m = p.k * p.a1 * p.a2;
    let dx2 = p.k * (p.a1 + p.a2) * x2 * x2 - p.k * r * x2 * x2 * x2 - r * x2 * y2;
    let dy2 = p.gamma
        * (-m * (p.c + m) - p.b * m * r * x2
            + (p.c + 2.0 * m) * r * r * y2
            + p.b * r * r * r * x2 * y2
            - r.powi(4) * y2 * y2);
    (dx2, dy2)
}

/// Blow-up time of the `r = 0` system, `1 / (x₂(0) K (a1 + a2))`; infinite
/// when `x₂(0)` and `a1 + a2` have opposite signs.
pub fn r0_blowup_time(x2_0: f64, p: &ModelParams) -> f64 {
    let t = 1.0 / (x2_0 * p.k * (p.a1 + p.a2));
    if t > 0.0 {
        t
    } else {
        f64::INFINITY
    }
}

/// Closed-form solution of `x₂' = K(a1+a2) x₂²`, `y₂' = −m(c + m)`.
pub fn r0_solution(
    x2_0: f64,
    y2_0: f64,
    t: f64,
    p: &ModelParams,
) -> Result<(f64, f64), CanardError> {
    if x2_0 == 0.0 {
        return Err(CanardError::ZeroInitialX);
    }
    let blowup = r0_blowup_time(x2_0, p);
    if t >= blowup {
        return Err(CanardError::PastBlowup { t, blowup });
    }
    let m = p.k * p.a1 * p.a2;
    let x2 = 1.0 / (1.0 / x2_0 - p.k * (p.a1 + p.a2) * t);
    let y2 = y2_0 - m * (p.c + m) * t;
    Ok((x2, y2))
}

/// Ordinate approached by the `r = 0` orbit as `x₂ → ±∞`.
pub fn r0_horizontal_asymptote(x2_0: f64, y2_0: f64, p: &ModelParams) -> f64 {
    let m = p.k * p.a1 * p.a2;
    y2_0 - p.a1 * p.a2 * (p.c + m) / (p.a1 + p.a2) / x2_0
}

/// Limit of the exit ordinate `ȳ` for entry `x(0) = kε` on `y = 0`:
/// `−a1 a2 (c + K a1 a2) / (k (a1 + a2))`.
pub fn canard_prediction(k: f64, p: &ModelParams) -> Result<f64, CanardError> {
    if k == 0.0 {
        return Err(CanardError::ZeroEntry);
    }
    Ok(-p.a1 * p.a2 * (p.c + p.k * p.a1 * p.a2) / (k * (p.a1 + p.a2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanardMeasurement {
    pub epsilon: f64,
    pub k_measured: f64,
    pub y_bar: f64,
    pub prediction: f64,
    pub abs_error: f64,
}

impl CanardMeasurement {
    pub fn rel_error(&self) -> f64 {
        self.abs_error / self.prediction.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanardConfig {
    /// `dt = dt_fraction · ε`.
    pub dt_fraction: f64,
    /// Give up after this many ms.
    pub t_end: f64,
    pub state_floor: f64,
}

impl Default for CanardConfig {
    fn default() -> Self {
        Self {
            dt_fraction: 0.01,
            t_end: 100.0,
            state_floor: 1e-12,
        }
    }
}

pub const DEFAULT_EPSILONS: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// Start on `y = 0` at `x = k ε`, integrate the model with γ = 1 until `x`
/// first crosses `a2 / 2`, and record the ordinate there.
pub fn measure_one(
    p: &ModelParams,
    epsilon: f64,
    entry_k: f64,
    cfg: &CanardConfig,
) -> Result<CanardMeasurement, CanardError> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(CanardError::NonPositiveEpsilon(epsilon));
    }
    let prediction = canard_prediction(entry_k, p)?;
    let params = p.with_epsilon(epsilon).with_gamma(1.0);
    let s0 = from_fold_frame(
        FoldFrame {
            x: entry_k * epsilon,
            y: 0.0,
        },
        &params,
    );
    let target = 0.5 * p.a2;
    let icfg = IntegrationConfig {
        dt: cfg.dt_fraction * epsilon,
        t_end: cfg.t_end,
        record_stride: 1,
        transient_discard: 0.0,
        state_floor: cfg.state_floor,
    };
    let mut det = CrossingDetector::new(EventSpec::u_up(target));
    let mut hit = None;
    run_live(s0, &params, &icfg, |t, s| match det.push(t, s) {
        Some(ev) => {
            hit = Some(ev.state);
            ControlFlow::Break(())
        }
        None => ControlFlow::Continue(()),
    })?;
    let at = hit.ok_or(CanardError::NoCrossing {
        epsilon,
        target,
        t_end: cfg.t_end,
    })?;
    let y_bar = to_fold_frame(at, &params).y;
    Ok(CanardMeasurement {
        epsilon,
        k_measured: to_fold_frame(s0, &params).x / epsilon,
        y_bar,
        prediction,
        abs_error: (y_bar - prediction).abs(),
    })
}

/// [`measure_one`] for each ε, in the given order.
pub fn measure_canard(
    p: &ModelParams,
    epsilons: &[f64],
    entry_k: f64,
    cfg: &CanardConfig,
) -> Result<Vec<CanardMeasurement>, CanardError> {
    if epsilons.is_empty()
        || epsilons.iter().any(|&e| e.is_nan() || e <= 0.0)
        || epsilons.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(CanardError::InvalidEpsilonList);
    }
    if entry_k <= 0.0 {
        return Err(CanardError::ZeroEntry);
    }
    epsilons
        .par_iter()
        .map(|&e| measure_one(p, e, entry_k, cfg))
        .collect()
}
