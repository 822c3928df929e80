//! Fixed-step RK4 integration, event-based period measurement, attractor
//! classification, and the boundedness / singular-orbit harnesses.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{CrossingDetector, EventSpec};
use crate::model::{
    self, hopf_epsilon, interior_fixed_point, jacobian, radial_derivative, vector_field,
    ModelError, ModelParams, SingularOrbit, State,
};
use crate::rng::UniformPm1;

/// Start used when a routine needs an initial condition and none is given.
pub const DEFAULT_INITIAL_STATE: State = State::new(0.05, 0.1);

/// Peak-to-peak u-amplitude below which a run counts as settled on a sink.
pub const SINK_AMPLITUDE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid integration config: {0}")]
    InvalidConfig(String),
    #[error("integration blew up at t = {t} ms (u = {u}, v = {v})")]
    Blowup { t: f64, u: f64, v: f64 },
    #[error("not oscillating: {0}")]
    NotOscillating(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    /// Step in ms.
    pub dt: f64,
    /// Final time in ms.
    pub t_end: f64,
    /// Keep every `record_stride`-th step.
    pub record_stride: usize,
    /// Samples before this time are ignored by the measuring routines.
    pub transient_discard: f64,
    /// Components falling below this are lifted back to it.
    pub state_floor: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 2000.0,
            record_stride: 1,
            transient_discard: 500.0,
            state_floor: 1e-12,
        }
    }
}

impl IntegrationConfig {
    /// `dt = min(0.01, ε/10)`, other fields at their defaults.
    pub fn for_params(p: &ModelParams, t_end: f64) -> Self {
        Self {
            dt: default_dt(p.epsilon),
            t_end,
            ..Self::default()
        }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }

    pub fn with_stride(self, record_stride: usize) -> Self {
        Self {
            record_stride,
            ..self
        }
    }

    pub fn with_transient(self, transient_discard: f64) -> Self {
        Self {
            transient_discard,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        let bad = |msg: String| Err(IntegrationError::InvalidConfig(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if !(self.transient_discard >= 0.0 && self.transient_discard <= self.t_end) {
            return bad(format!(
                "transient_discard {} must lie in [0, t_end = {}]",
                self.transient_discard, self.t_end
            ));
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        if !(self.state_floor >= 0.0 && self.state_floor.is_finite()) {
            return bad(format!(
                "state_floor must be non-negative, got {}",
                self.state_floor
            ));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

pub fn default_dt(epsilon: f64) -> f64 {
    (epsilon / 10.0).min(0.01)
}

/// One classical RK4 step of the vector field. No flooring.
pub fn rk4_step(s: State, p: &ModelParams, dt: f64) -> State {
    let at =
        |base: State, (du, dv): (f64, f64), h: f64| State::new(base.u + h * du, base.v + h * dv);
    let k1 = vector_field(s, p);
    let k2 = vector_field(at(s, k1, 0.5 * dt), p);
    let k3 = vector_field(at(s, k2, 0.5 * dt), p);
    let k4 = vector_field(at(s, k3, dt), p);
    State::new(
        s.u + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        s.v + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

/// Lift components below `floor` up to it. Returns whether anything moved.
pub fn apply_floor(s: State, floor: f64) -> (State, bool) {
    let u = s.u.max(floor);
    let v = s.v.max(floor);
    (State::new(u, v), u != s.u || v != s.v)
}

/// Step-by-step driver used by every routine in the crate, so that a run is
/// bit-identical no matter which routine performs it.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: ModelParams,
    dt: f64,
    floor: f64,
    index: u64,
    state: State,
    floor_events: u64,
    min_raw: f64,
}

impl Stepper {
    pub fn new(s0: State, params: ModelParams, dt: f64, floor: f64) -> Self {
        Self {
            params,
            dt,
            floor,
            index: 0,
            state: s0,
            floor_events: 0,
            min_raw: s0.u.min(s0.v),
        }
    }

    pub fn time(&self) -> f64 {
        self.index as f64 * self.dt
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn state(&self) -> State {
        self.state
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn set_params(&mut self, params: ModelParams) {
        self.params = params;
    }

    /// Number of steps on which flooring changed the state.
    pub fn floor_events(&self) -> u64 {
        self.floor_events
    }

    /// Smallest component seen before flooring.
    pub fn min_raw_component(&self) -> f64 {
        self.min_raw
    }

    pub fn step(&mut self) -> Result<State, IntegrationError> {
        self.step_with(self.dt)
    }

    /// A step of a different size. Does not advance the uniform clock, so it
    /// is only used by the stiff start-up phase.
    fn step_with(&mut self, dt: f64) -> Result<State, IntegrationError> {
        let raw = rk4_step(self.state, &self.params, dt);
        if !raw.is_finite() {
            return Err(IntegrationError::Blowup {
                t: self.time() + dt,
                u: raw.u,
                v: raw.v,
            });
        }
        self.min_raw = self.min_raw.min(raw.u.min(raw.v));
        let (s, floored) = apply_floor(raw, self.floor);
        if floored {
            self.floor_events += 1;
        }
        self.state = s;
        if dt == self.dt {
            self.index += 1;
        }
        Ok(s)
    }
}

/// Integrate from `s0`, calling `visit(t, state)` at t = 0 and after every
/// step. Returns the final stepper.
pub fn run_live<F>(
    s0: State,
    p: &ModelParams,
    cfg: &IntegrationConfig,
    mut visit: F,
) -> Result<Stepper, IntegrationError>
where
    F: FnMut(f64, State) -> ControlFlow<()>,
{
    p.validate()?;
    cfg.validate()?;
    let mut stepper = Stepper::new(s0, *p, cfg.dt, cfg.state_floor);
    if visit(0.0, s0).is_break() {
        return Ok(stepper);
    }
    for _ in 0..cfg.n_steps() {
        let s = stepper.step()?;
        if visit(stepper.time(), s).is_break() {
            break;
        }
    }
    Ok(stepper)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub params_used: ModelParams,
    pub config: IntegrationConfig,
    pub floor_events: u64,
    pub min_raw_component: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the first sample at or after the transient.
    pub fn post_transient_start(&self) -> usize {
        self.times
            .partition_point(|&t| t < self.config.transient_discard)
    }

    pub fn u(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.u).collect()
    }

    pub fn v(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.v).collect()
    }
}

pub fn integrate(
    s0: State,
    p: &ModelParams,
    cfg: &IntegrationConfig,
) -> Result<Trajectory, IntegrationError> {
    cfg.validate()?;
    let stride = cfg.record_stride as u64;
    let capacity = (cfg.n_steps() / stride + 1) as usize;
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);
    let mut i = 0u64;
    let stepper = run_live(s0, p, cfg, |_, s| {
        if i.is_multiple_of(stride) {
            times.push(i as f64 * cfg.dt);
            states.push(s);
        }
        i += 1;
        ControlFlow::Continue(())
    })?;
    Ok(Trajectory {
        times,
        states,
        params_used: *p,
        config: *cfg,
        floor_events: stepper.floor_events(),
        min_raw_component: stepper.min_raw_component(),
    })
}

/// Mean interval between the last `m` upward crossings of `v = v*`, after
/// the transient. Requires `εγ` below the Hopf value for `K`.
pub fn limit_cycle_period(
    p: &ModelParams,
    cfg: &IntegrationConfig,
    m: usize,
) -> Result<f64, IntegrationError> {
    limit_cycle_period_from(DEFAULT_INITIAL_STATE, p, cfg, m)
}

pub fn limit_cycle_period_from(
    s0: State,
    p: &ModelParams,
    cfg: &IntegrationConfig,
    m: usize,
) -> Result<f64, IntegrationError> {
    let eh = hopf_epsilon(p.k, p)?;
    let scaled = p.epsilon * p.gamma;
    if scaled >= eh {
        return Err(IntegrationError::NotOscillating(format!(
            "εγ = {scaled} is not below the Hopf value {eh} for K = {}",
            p.k
        )));
    }
    let times = section_crossings(s0, p, cfg)?;
    if m == 0 || times.len() < m + 1 {
        return Err(IntegrationError::NotOscillating(format!(
            "only {} crossings after {} ms, need {}",
            times.len(),
            cfg.transient_discard,
            m + 1
        )));
    }
    let tail = &times[times.len() - (m + 1)..];
    Ok((tail[m] - tail[0]) / m as f64)
}

/// Times of upward crossings of `v = v*` after the transient.
pub fn section_crossings(
    s0: State,
    p: &ModelParams,
    cfg: &IntegrationConfig,
) -> Result<Vec<f64>, IntegrationError> {
    let star = interior_fixed_point(p)?;
    let mut det = CrossingDetector::new(EventSpec::v_up(star.v));
    let mut times = Vec::new();
    run_live(s0, p, cfg, |t, s| {
        if let Some(ev) = det.push(t, s) {
            if ev.t >= cfg.transient_discard {
                times.push(ev.t);
            }
        }
        ControlFlow::Continue(())
    })?;
    Ok(times)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorKind {
    Sink,
    LimitCycle,
}

impl AttractorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttractorKind::Sink => "sink",
            AttractorKind::LimitCycle => "limit_cycle",
        }
    }
}

/// Extent of the final quarter of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorSummary {
    pub kind: AttractorKind,
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl AttractorSummary {
    pub fn u_amplitude(&self) -> f64 {
        self.u_max - self.u_min
    }
}

pub fn classify_attractor(
    p: &ModelParams,
    cfg: &IntegrationConfig,
) -> Result<AttractorKind, IntegrationError> {
    Ok(attractor_summary(DEFAULT_INITIAL_STATE, p, cfg)?.kind)
}

/// Sink if the u peak-to-peak over the last 25% of the run (and after the
/// transient) is below [`SINK_AMPLITUDE`], limit cycle otherwise.
pub fn attractor_summary(
    s0: State,
    p: &ModelParams,
    cfg: &IntegrationConfig,
) -> Result<AttractorSummary, IntegrationError> {
    let from = (0.75 * cfg.t_end).max(cfg.transient_discard);
    let (mut u_min, mut u_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY);
    run_live(s0, p, cfg, |t, s| {
        if t >= from {
            u_min = u_min.min(s.u);
            u_max = u_max.max(s.u);
            v_min = v_min.min(s.v);
            v_max = v_max.max(s.v);
        }
        ControlFlow::Continue(())
    })?;
    let kind = if u_max - u_min < SINK_AMPLITUDE {
        AttractorKind::Sink
    } else {
        AttractorKind::LimitCycle
    };
    Ok(AttractorSummary {
        kind,
        u_min,
        u_max,
        v_min,
        v_max,
    })
}

/// Largest distance from a post-transient sample to the singular orbit,
/// skipping samples within `exclusion_radius` of the fold point `(0, f(0))`
/// and of the jump point `A`.
pub fn orbit_distance_to_singular(
    traj: &Trajectory,
    orbit: &SingularOrbit,
    exclusion_radius: f64,
) -> f64 {
    let fold = State::new(0.0, traj.params_used.fold_ordinate());
    traj.states[traj.post_transient_start()..]
        .par_iter()
        .filter(|s| s.distance(&fold) > exclusion_radius && s.distance(&orbit.a) > exclusion_radius)
        .map(|s| orbit.distance(*s))
        .reduce(|| 0.0, f64::max)
}

/// Mean `v` at the post-transient upward crossings of `u = level`. For small
/// ε the departure from `u = 0` is almost horizontal, so this measures the
/// exit ordinate of the singular orbit.
pub fn measure_exit_ordinate(
    s0: State,
    p: &ModelParams,
    cfg: &IntegrationConfig,
    level: f64,
) -> Result<f64, IntegrationError> {
    let mut det = CrossingDetector::new(EventSpec::u_up(level));
    let (mut sum, mut n) = (0.0, 0usize);
    run_live(s0, p, cfg, |t, s| {
        if let Some(ev) = det.push(t, s) {
            if ev.t >= cfg.transient_discard {
                sum += ev.state.v;
                n += 1;
            }
        }
        ControlFlow::Continue(())
    })?;
    if n == 0 {
        return Err(IntegrationError::NotOscillating(format!(
            "no upward crossing of u = {level} after the transient"
        )));
    }
    Ok(sum / n as f64)
}

/// Integrate with a stability-limited step (`dt ≤ 0.5 / ‖J‖∞`) until the
/// configured step is safe, then hand over to the uniform clock. Far starts
/// are stiff in u (the cubic term), which a fixed 0.01 ms step cannot take.
fn stiff_start(
    s0: State,
    p: &ModelParams,
    cfg: &IntegrationConfig,
    mut on_step: impl FnMut(State, State),
) -> Result<(Stepper, f64), IntegrationError> {
    let mut stepper = Stepper::new(s0, *p, cfg.dt, cfg.state_floor);
    let mut elapsed = 0.0;
    loop {
        let s = stepper.state();
        let h = 0.5 / jacobian(s, p).norm_inf();
        if h >= cfg.dt || elapsed >= cfg.t_end {
            break;
        }
        let next = stepper.step_with(h)?;
        on_step(s, next);
        elapsed += h;
    }
    Ok((stepper, elapsed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialReport {
    pub n_starts: usize,
    /// Threshold above which a start counts as far.
    pub bound: f64,
    pub max_initial: f64,
    /// Max over runs of the largest `εu² + v²` in the final 10% of the run.
    pub max_final: f64,
    pub n_far_starts: usize,
    /// Far starts whose final value ended below their initial value.
    pub n_far_decayed: usize,
    /// Steps where `radial_derivative < 0` at both ends but `εu² + v²` grew.
    pub monotonicity_violations: u64,
    pub min_raw_component: f64,
}

impl RadialReport {
    pub fn holds(&self) -> bool {
        self.n_far_decayed == self.n_far_starts
            && self.max_final < self.bound
            && self.monotonicity_violations == 0
            && self.min_raw_component >= -1e-15
    }
}

fn radial_energy(s: State, p: &ModelParams) -> f64 {
    p.epsilon * s.u * s.u + s.v * s.v
}

/// Track `εu² + v²` along one run: its final-10% maximum and any step that
/// contradicts the sign of its derivative.
pub fn radial_run(
    s0: State,
    p: &ModelParams,
    cfg: &IntegrationConfig,
) -> Result<(f64, u64, f64), IntegrationError> {
    p.validate()?;
    cfg.validate()?;
    let mut violations = 0u64;
    let mut check = |a: State, b: State| {
        let (ea, eb) = (radial_energy(a, p), radial_energy(b, p));
        if radial_derivative(a, p) < 0.0 && radial_derivative(b, p) < 0.0 && eb > ea * (1.0 + 1e-14)
        {
            violations += 1;
        }
    };
    let (mut stepper, elapsed) = stiff_start(s0, p, cfg, &mut check)?;
    let remaining = ((cfg.t_end - elapsed).max(0.0) / cfg.dt).round() as u64;
    let tail_from = remaining - remaining / 10;
    let mut final_max = if remaining == 0 {
        radial_energy(stepper.state(), p)
    } else {
        0.0
    };
    for i in 0..remaining {
        let a = stepper.state();
        let b = stepper.step()?;
        check(a, b);
        if i + 1 >= tail_from {
            final_max = final_max.max(radial_energy(b, p));
        }
    }
    Ok((final_max, violations, stepper.min_raw_component()))
}

/// Integrate from `n_starts` uniform random states in `[0, 20]²` and check
/// that far starts fall into a bounded set.
pub fn radial_boundedness_check(
    p: &ModelParams,
    n_starts: usize,
    cfg: &IntegrationConfig,
    bound: f64,
    seed: u64,
) -> Result<RadialReport, IntegrationError> {
    let mut rng = UniformPm1::new(seed, 0);
    let starts: Vec<State> = (0..n_starts)
        .map(|_| State::new(10.0 + 10.0 * rng.draw(), 10.0 + 10.0 * rng.draw()))
        .collect();
    radial_check_from(p, &starts, cfg, bound)
}

pub fn radial_check_from(
    p: &ModelParams,
    starts: &[State],
    cfg: &IntegrationConfig,
    bound: f64,
) -> Result<RadialReport, IntegrationError> {
    let runs: Vec<(f64, f64, u64, f64)> = starts
        .par_iter()
        .map(|&s0| {
            radial_run(s0, p, cfg)
                .map(|(fin, viol, min_raw)| (radial_energy(s0, p), fin, viol, min_raw))
        })
        .collect::<Result<_, _>>()?;
    let mut report = RadialReport {
        n_starts: starts.len(),
        bound,
        max_initial: 0.0,
        max_final: 0.0,
        n_far_starts: 0,
        n_far_decayed: 0,
        monotonicity_violations: 0,
        min_raw_component: f64::INFINITY,
    };
    for (init, fin, viol, min_raw) in runs {
        report.max_initial = report.max_initial.max(init);
        report.max_final = report.max_final.max(fin);
        report.monotonicity_violations += viol;
        report.min_raw_component = report.min_raw_component.min(min_raw);
        if init > bound {
            report.n_far_starts += 1;
            if fin < init {
                report.n_far_decayed += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub n_starts: usize,
    pub n_steps: u64,
    pub min_raw_component: f64,
    pub floor_events: u64,
}

/// Run `n_starts` random starts in `(0, 1]²` for `cfg.t_end` and report the
/// smallest component produced by any step before flooring.
pub fn positivity_check(
    p: &ModelParams,
    n_starts: usize,
    cfg: &IntegrationConfig,
    seed: u64,
) -> Result<PositivityReport, IntegrationError> {
    p.validate()?;
    cfg.validate()?;
    let mut rng = UniformPm1::new(seed, 1);
    let starts: Vec<State> = (0..n_starts)
        .map(|_| {
            State::new(
                1.0 - 0.5 * (1.0 + rng.draw()),
                1.0 - 0.5 * (1.0 + rng.draw()),
            )
        })
        .map(|s| State::new(s.u.max(f64::MIN_POSITIVE), s.v.max(f64::MIN_POSITIVE)))
        .collect();
    let runs: Vec<(f64, u64)> = starts
        .par_iter()
        .map(|&s0| {
            let (mut stepper, elapsed) = stiff_start(s0, p, cfg, |_, _| {})?;
            let remaining = ((cfg.t_end - elapsed).max(0.0) / cfg.dt).round() as u64;
            for _ in 0..remaining {
                stepper.step()?;
            }
            Ok((stepper.min_raw_component(), stepper.floor_events()))
        })
        .collect::<Result<_, IntegrationError>>()?;
    Ok(PositivityReport {
        n_starts,
        n_steps: cfg.n_steps(),
        min_raw_component: runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        floor_events: runs.iter().map(|r| r.1).sum(),
    })
}

/// Convenience: the singular orbit for `p` with exit ordinate taken from a
/// run at the same parameters.
pub fn singular_orbit_from_run(
    p: &ModelParams,
    cfg: &IntegrationConfig,
) -> Result<SingularOrbit, IntegrationError> {
    let y_c = measure_exit_ordinate(DEFAULT_INITIAL_STATE, p, cfg, 0.5 * p.a2)?;
    Ok(model::singular_orbit(
        p,
        y_c,
        model::DEFAULT_ARC_RESOLUTION,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k60(eps: f64) -> ModelParams {
        ModelParams::new(60.0, eps, 1.0)
    }

    #[test]
    fn fixed_point_is_preserved() {
        let p = k60(0.1);
        let star = interior_fixed_point(&p).unwrap();
        let next = rk4_step(star, &p, 0.01);
        assert!((next.u - star.u).abs() < 1e-16);
        assert!((next.v - star.v).abs() < 1e-16);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let p = k60(0.1);
        let s0 = State::new(0.05, 0.1);
        let solve = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            (0..n).fold(s0, |s, _| rk4_step(s, &p, dt))
        };
        let reference = solve(2.5e-3 / 16.0);
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&dt| solve(dt).distance(&reference))
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 3.7, "observed order {order}, errors {errs:?}");
        }
    }

    #[test]
    fn zero_length_run_is_single_sample() {
        let p = k60(0.1);
        let cfg = IntegrationConfig {
            t_end: 0.0,
            transient_discard: 0.0,
            ..IntegrationConfig::default()
        };
        let traj = integrate(State::new(0.3, 0.2), &p, &cfg).unwrap();
        assert_eq!(traj.times, vec![0.0]);
        assert_eq!(traj.states, vec![State::new(0.3, 0.2)]);
    }

    #[test]
    fn recording_is_uniform_and_deterministic() {
        let p = k60(0.1);
        let cfg = IntegrationConfig::for_params(&p, 50.0)
            .with_stride(10)
            .with_transient(0.0);
        let a = integrate(DEFAULT_INITIAL_STATE, &p, &cfg).unwrap();
        let b = integrate(DEFAULT_INITIAL_STATE, &p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 501);
        for (i, t) in a.times.iter().enumerate() {
            assert_eq!(*t, i as f64 * 10.0 * cfg.dt);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let p = k60(0.1);
        let bad = [
            IntegrationConfig::default().with_dt(0.0),
            IntegrationConfig::default().with_stride(0),
            IntegrationConfig::default().with_transient(5000.0),
        ];
        for cfg in bad {
            assert!(matches!(
                integrate(DEFAULT_INITIAL_STATE, &p, &cfg),
                Err(IntegrationError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn blowup_is_reported() {
        let p = k60(0.1);
        let cfg = IntegrationConfig::for_params(&p, 10.0)
            .with_dt(1.0)
            .with_transient(0.0);
        let err = integrate(State::new(5.0, 5.0), &p, &cfg).unwrap_err();
        assert!(matches!(err, IntegrationError::Blowup { .. }), "{err}");
    }

    #[test]
    fn floor_lifts_tiny_components() {
        let (s, floored) = apply_floor(State::new(-1e-20, 0.5), 1e-12);
        assert!(floored);
        assert_eq!(s, State::new(1e-12, 0.5));
        assert!(!apply_floor(State::new(0.1, 0.1), 1e-12).1);
    }

    #[test]
    fn period_requires_oscillatory_regime() {
        let p = k60(0.4);
        let cfg = IntegrationConfig::for_params(&p, 1000.0);
        assert!(matches!(
            limit_cycle_period(&p, &cfg, 10),
            Err(IntegrationError::NotOscillating(_))
        ));
    }
}
