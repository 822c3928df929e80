//! The two-variable conductance oscillator
//!
//! ```text
//! ε du/dt = u (−K (u − a1)(u − a2) − v)
//!   dv/dt = γ v (b u − v + c)
//! ```
//!
//! `u` and `v` are the magnitudes of the E- and I-conductances. Time is in
//! milliseconds. Everything here is a pure function of a state and a
//! parameter set: nullclines, fixed points and their linearisation, the Hopf
//! value of ε and the singular orbit made of fast jumps and slow drifts.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Real parts with magnitude below this count as zero when classifying.
pub const HYPERBOLICITY_TOL: f64 = 1e-9;

/// Default number of points used to sample the parabolic arc of the
/// singular orbit.
pub const DEFAULT_ARC_RESOLUTION: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("K = {k} breaks the unique-intersection condition (requires K < {bound:.4})")]
    NotUniqueIntersection { k: f64, bound: f64 },
    #[error("no interior fixed point in (0, a2) for K = {k}")]
    NoInteriorRoot { k: f64 },
    #[error("exit ordinate y_C = {y_c} outside (0, {max}]")]
    ExitOrdinateOutOfRange { y_c: f64, max: f64 },
    #[error("invalid range: {0}")]
    InvalidRange(String),
}

/// Coefficients of the oscillator. `a1`, `a2`, `b`, `c` are fixed in
/// practice; `k`, `epsilon` and `gamma` are the ones that wander.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub c: f64,
    pub k: f64,
    pub epsilon: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub const A1: f64 = -0.01;
    pub const A2: f64 = 0.1;
    pub const B: f64 = 11.9;
    pub const C: f64 = 6.6e-4;

    /// Default fixed coefficients with the given wandering ones.
    pub fn new(k: f64, epsilon: f64, gamma: f64) -> Self {
        Self {
            a1: Self::A1,
            a2: Self::A2,
            b: Self::B,
            c: Self::C,
            k,
            epsilon,
            gamma,
        }
    }

    pub fn with_k(self, k: f64) -> Self {
        Self { k, ..self }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    /// Abscissa of the parabola's maximum, `(a1 + a2) / 2`.
    pub fn jump_abscissa(&self) -> f64 {
        0.5 * (self.a1 + self.a2)
    }

    /// `f(0) = −K a1 a2`, the ordinate of the fold point on `u = 0`.
    pub fn fold_ordinate(&self) -> f64 {
        -self.k * self.a1 * self.a2
    }

    /// Largest K for which the parabola meets `v = bu + c` only once in the
    /// open quadrant.
    pub fn unique_intersection_bound(&self) -> f64 {
        (self.b * self.jump_abscissa() + self.c) / (0.25 * (self.a2 - self.a1).powi(2))
    }

    /// Checks signs and the unique-intersection condition.
    pub fn validate(&self) -> Result<(), ModelError> {
        let checks: [(&'static str, f64, bool, &'static str); 7] = [
            ("K", self.k, self.k > 0.0, "must be positive"),
            (
                "epsilon",
                self.epsilon,
                self.epsilon > 0.0,
                "must be positive",
            ),
            ("gamma", self.gamma, self.gamma > 0.0, "must be positive"),
            ("a1", self.a1, self.a1 < 0.0, "must be negative"),
            ("a2", self.a2, self.a2 > 0.0, "must be positive"),
            ("b", self.b, self.b > 0.0, "must be positive"),
            ("c", self.c, self.c > 0.0, "must be positive"),
        ];
        for (name, value, ok, reason) in checks {
            if !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
            if !ok {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason,
                });
            }
        }
        let lhs = self.b * self.jump_abscissa() + self.c;
        let rhs = 0.25 * self.k * (self.a2 - self.a1).powi(2);
        if lhs <= rhs {
            return Err(ModelError::NotUniqueIntersection {
                k: self.k,
                bound: self.unique_intersection_bound(),
            });
        }
        Ok(())
    }
}

/// A point of the (closed) positive quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub u: f64,
    pub v: f64,
}

impl State {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn distance(&self, other: &State) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    Source,
    Sink,
    Saddle,
    NonHyperbolic,
}

impl FixedPointKind {
    pub fn from_eigenvalues(eigenvalues: &[Complex64; 2]) -> Self {
        let (r1, r2) = (eigenvalues[0].re, eigenvalues[1].re);
        if r1.abs() < HYPERBOLICITY_TOL || r2.abs() < HYPERBOLICITY_TOL {
            FixedPointKind::NonHyperbolic
        } else if r1 > 0.0 && r2 > 0.0 {
            FixedPointKind::Source
        } else if r1 < 0.0 && r2 < 0.0 {
            FixedPointKind::Sink
        } else {
            FixedPointKind::Saddle
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FixedPointKind::Source => "source",
            FixedPointKind::Sink => "sink",
            FixedPointKind::Saddle => "saddle",
            FixedPointKind::NonHyperbolic => "non_hyperbolic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub location: State,
    pub eigenvalues: [Complex64; 2],
    pub kind: FixedPointKind,
}

/// Row-major 2×2 Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian(pub [[f64; 2]; 2]);

impl Jacobian {
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn determinant(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Closed-form eigenvalues from trace and determinant, larger real part
    /// first.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let tr = self.trace();
        let det = self.determinant();
        let half = 0.5 * tr;
        let disc = half * half - det;
        if disc >= 0.0 {
            let root = disc.sqrt();
            // Take the larger-magnitude root first and recover the other from
            // the determinant to avoid cancellation.
            let big = if half >= 0.0 {
                half + root
            } else {
                half - root
            };
            let small = if big != 0.0 { det / big } else { 0.0 };
            let (hi, lo) = if big >= small {
                (big, small)
            } else {
                (small, big)
            };
            [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
        } else {
            let im = (-disc).sqrt();
            [Complex64::new(half, im), Complex64::new(half, -im)]
        }
    }

    /// Infinity-norm; used as a cheap bound on the stiffness.
    pub fn norm_inf(&self) -> f64 {
        let r0 = self.0[0][0].abs() + self.0[0][1].abs();
        let r1 = self.0[1][0].abs() + self.0[1][1].abs();
        r0.max(r1)
    }
}

/// `f(u) = −K (u − a1)(u − a2)`
pub fn nullcline_f(u: f64, p: &ModelParams) -> f64 {
    -p.k * (u - p.a1) * (u - p.a2)
}

/// `g(u) = b u + c`
pub fn nullcline_g(u: f64, p: &ModelParams) -> f64 {
    p.b * u + p.c
}

/// Time derivatives `(du/dt, dv/dt)`.
pub fn vector_field(s: State, p: &ModelParams) -> (f64, f64) {
    let du = s.u * (nullcline_f(s.u, p) - s.v) / p.epsilon;
    let dv = p.gamma * s.v * (nullcline_g(s.u, p) - s.v);
    (du, dv)
}

/// Jacobian of [`vector_field`]. The second row carries the factor γ, so at
/// γ = 1 it is the classical form.
pub fn jacobian(s: State, p: &ModelParams) -> Jacobian {
    let (u, v, k) = (s.u, s.v, p.k);
    let j11 = (-3.0 * k * u * u + 2.0 * k * (p.a1 + p.a2) * u - k * p.a1 * p.a2 - v) / p.epsilon;
    let j12 = -u / p.epsilon;
    let j21 = p.gamma * p.b * v;
    let j22 = p.gamma * (-2.0 * v + p.b * u + p.c);
    Jacobian([[j11, j12], [j21, j22]])
}

/// The interior equilibrium `(u*, v*)`: the root in `(0, a2)` of
/// `K (u − a1)(u − a2) + b u + c = 0` and `v* = b u* + c`.
pub fn interior_fixed_point(p: &ModelParams) -> Result<State, ModelError> {
    p.validate()?;
    // K u² + (b − K (a1 + a2)) u + (K a1 a2 + c) = 0
    let qa = p.k;
    let qb = p.b - p.k * (p.a1 + p.a2);
    let qc = p.k * p.a1 * p.a2 + p.c;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(ModelError::NoInteriorRoot { k: p.k });
    }
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let mut roots = [q / qa, if q != 0.0 { qc / q } else { f64::NAN }];
    roots.sort_by(|a, b| b.total_cmp(a));
    let u = roots
        .into_iter()
        .find(|r| r.is_finite() && *r > 0.0 && *r < p.a2)
        .ok_or(ModelError::NoInteriorRoot { k: p.k })?;
    Ok(State::new(u, nullcline_g(u, p)))
}

/// The four equilibria of the closed quadrant: `(0,0)`, `(0,c)`, `(a2,0)`
/// and `(u*,v*)`, in that order.
pub fn fixed_points(p: &ModelParams) -> Result<Vec<FixedPoint>, ModelError> {
    let interior = interior_fixed_point(p)?;
    let locations = [
        State::new(0.0, 0.0),
        State::new(0.0, p.c),
        State::new(p.a2, 0.0),
        interior,
    ];
    Ok(locations
        .into_iter()
        .map(|location| {
            let eigenvalues = jacobian(location, p).eigenvalues();
            FixedPoint {
                location,
                eigenvalues,
                kind: FixedPointKind::from_eigenvalues(&eigenvalues),
            }
        })
        .collect())
}

/// Value of εγ at which the trace of the Jacobian at `(u*, v*)` vanishes:
/// `ε_H = K u* (a1 + a2 − 2u*) / (b u* + c)`. The other fields of `p` are
/// taken as they are; only `K` is overridden.
pub fn hopf_epsilon(k: f64, p: &ModelParams) -> Result<f64, ModelError> {
    let p = p.with_k(k);
    let star = interior_fixed_point(&p)?;
    let u = star.u;
    Ok(k * u * (p.a1 + p.a2 - 2.0 * u) / (p.b * u + p.c))
}

/// `n_samples` evenly spaced rows `(K, ε_H)` over `[k_min, k_max]`.
pub fn hopf_curve(
    k_min: f64,
    k_max: f64,
    n_samples: usize,
    p: &ModelParams,
) -> Result<Vec<(f64, f64)>, ModelError> {
    if n_samples < 2 {
        return Err(ModelError::InvalidRange(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    if !(k_min.is_finite() && k_max.is_finite() && k_min > 0.0 && k_min < k_max) {
        return Err(ModelError::InvalidRange(format!(
            "K range [{k_min}, {k_max}] must be positive and increasing"
        )));
    }
    let step = (k_max - k_min) / (n_samples - 1) as f64;
    (0..n_samples)
        .map(|i| {
            let k = if i + 1 == n_samples {
                k_max
            } else {
                k_min + step * i as f64
            };
            hopf_epsilon(k, p).map(|e| (k, e))
        })
        .collect()
}

/// `d/dt (ε u² + v²)` written out as a polynomial.
pub fn radial_derivative(s: State, p: &ModelParams) -> f64 {
    let (u, v, k, g) = (s.u, s.v, p.k, p.gamma);
    let u2 = u * u;
    2.0 * (-k * u2 * u2 + k * (p.a1 + p.a2) * u2 * u - k * p.a1 * p.a2 * u2 - u2 * v
        + p.b * g * u * v * v
        - g * v * v * v
        + p.c * g * v * v)
}

/// Closed curve `[A,B] ∪ [B,C] ∪ [C,D] ∪ ζ` formed by the two fast jumps,
/// the slow drift down `u = 0` and the parabolic arc ζ from `D` back up to
/// the jump point `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularOrbit {
    pub a: State,
    pub b: State,
    pub c: State,
    pub d: State,
    /// `A, B, C, D, …ζ…, A`
    pub polyline: Vec<State>,
    k: f64,
    apex: State,
}

impl SingularOrbit {
    /// The sampled arc ζ, from `D` to `A`.
    pub fn arc(&self) -> &[State] {
        &self.polyline[3..]
    }

    /// Distance from `s` to the curve, with the arc treated exactly rather
    /// than through its chords.
    pub fn distance(&self, s: State) -> f64 {
        let straight = [
            segment_distance(s, self.a, self.b),
            segment_distance(s, self.b, self.c),
            segment_distance(s, self.c, self.d),
        ];
        let arc = self.arc_distance(s);
        straight.into_iter().fold(arc, f64::min)
    }

    /// Distance to the polyline only (chords of ζ).
    pub fn polyline_distance(&self, s: State) -> f64 {
        self.polyline
            .windows(2)
            .map(|w| segment_distance(s, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    fn arc_distance(&self, s: State) -> f64 {
        // Arc: u = m + w, v = f(m) − K w², w ∈ [0, w_D]. Stationary points of
        // the squared distance solve 2K² w³ + (1 − 2K (f(m) − v_s)) w + (m − u_s) = 0.
        let (m, fm, k) = (self.apex.u, self.apex.v, self.k);
        let w_end = self.d.u - m;
        let point = |w: f64| State::new(m + w, fm - k * w * w);
        let lead = 2.0 * k * k;
        let lin = (1.0 - 2.0 * k * (fm - s.v)) / lead;
        let cst = (m - s.u) / lead;
        let mut best = s.distance(&point(0.0)).min(s.distance(&point(w_end)));
        for w in depressed_cubic_roots(lin, cst) {
            if (0.0..=w_end).contains(&w) {
                best = best.min(s.distance(&point(w)));
            }
        }
        best
    }
}

/// Build the singular orbit for exit ordinate `y_c ∈ (0, f(0)]`, with the
/// arc sampled at `resolution` points (`D` and `A` included).
pub fn singular_orbit(
    p: &ModelParams,
    y_c: f64,
    resolution: usize,
) -> Result<SingularOrbit, ModelError> {
    let f0 = p.fold_ordinate();
    if !(y_c > 0.0 && y_c <= f0) {
        return Err(ModelError::ExitOrdinateOutOfRange { y_c, max: f0 });
    }
    if resolution < 2 {
        return Err(ModelError::InvalidRange(format!(
            "arc resolution must be at least 2, got {resolution}"
        )));
    }
    let m = p.jump_abscissa();
    let fm = nullcline_f(m, p);
    let apex = State::new(m, fm);
    let w_d = ((fm - y_c) / p.k).sqrt();
    let d = State::new(m + w_d, nullcline_f(m + w_d, p));
    let b = State::new(0.0, fm);
    let c = State::new(0.0, y_c);

    let mut polyline = Vec::with_capacity(resolution + 3);
    polyline.extend([apex, b, c]);
    let last = resolution - 1;
    for i in 0..resolution {
        let u = if i == 0 {
            d.u
        } else if i == last {
            m
        } else {
            d.u - (d.u - m) * (i as f64 / last as f64)
        };
        polyline.push(State::new(u, nullcline_f(u, p)));
    }
    Ok(SingularOrbit {
        a: apex,
        b,
        c,
        d: polyline[3],
        polyline,
        k: p.k,
        apex,
    })
}

/// Euclidean distance from `s` to the segment `[p, q]`.
pub fn segment_distance(s: State, p: State, q: State) -> f64 {
    let (du, dv) = (q.u - p.u, q.v - p.v);
    let len2 = du * du + dv * dv;
    if len2 == 0.0 {
        return s.distance(&p);
    }
    let t = (((s.u - p.u) * du + (s.v - p.v) * dv) / len2).clamp(0.0, 1.0);
    s.distance(&State::new(p.u + t * du, p.v + t * dv))
}

/// Real roots of `t³ + p t + q = 0`, polished with a couple of Newton steps.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    let mut roots = Vec::with_capacity(3);
    let disc = (0.5 * q).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        roots.push((-0.5 * q + sq).cbrt() + (-0.5 * q - sq).cbrt());
    } else if p == 0.0 {
        roots.push(0.0);
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        for j in 0..3 {
            roots.push(r * (phi - 2.0 * std::f64::consts::PI * j as f64 / 3.0).cos());
        }
    }
    for t in roots.iter_mut() {
        for _ in 0..2 {
            let d = 3.0 * *t * *t + p;
            if d != 0.0 {
                *t -= (*t * *t * *t + p * *t + q) / d;
            }
        }
    }
    roots
}
