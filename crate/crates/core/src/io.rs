//! CSV tables for every result type.
//!
//! Numbers are written in plain decimal notation with 17 significant digits,
//! which round-trips every `f64` and keeps the output byte-stable.

use std::io::{Read, Write};

use thiserror::Error;

use crate::canard::CanardMeasurement;
use crate::model::{FixedPoint, State};
use crate::spectral::{PsdResult, Spectrogram};
use crate::walk::{conductance_outputs, StochasticTrajectory};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("expected header {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
}

/// `x` in decimal notation with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0.0000000000000000"
        } else {
            "0.0000000000000000"
        }
        .into();
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (16 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>, IoError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn write_rows<W, I>(out: W, header: &[&str], rows: I) -> Result<(), IoError>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = writer(out, header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub const TRAJECTORY_HEADER: [&str; 3] = ["t_ms", "u", "v"];

pub fn write_trajectory<W: Write>(out: W, times: &[f64], states: &[State]) -> Result<(), IoError> {
    write_rows(
        out,
        &TRAJECTORY_HEADER,
        times
            .iter()
            .zip(states)
            .map(|(&t, s)| vec![fmt17(t), fmt17(s.u), fmt17(s.v)]),
    )
}

/// Read a table whose first three columns are `t_ms,u,v`; extra columns are
/// ignored.
pub fn read_trajectory<R: Read>(input: R) -> Result<(Vec<f64>, Vec<State>), IoError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers()?.clone();
    let found: Vec<&str> = header.iter().take(3).collect();
    if found != TRAJECTORY_HEADER {
        return Err(IoError::Header {
            expected: TRAJECTORY_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| -> Result<f64, IoError> {
            let raw = rec.get(j).ok_or_else(|| IoError::Row {
                row: i + 1,
                msg: format!("missing column {}", j + 1),
            })?;
            raw.parse().map_err(|e| IoError::Row {
                row: i + 1,
                msg: format!("{raw:?}: {e}"),
            })
        };
        times.push(field(0)?);
        states.push(State::new(field(1)?, field(2)?));
    }
    Ok((times, states))
}

pub fn write_stochastic<W: Write>(out: W, traj: &StochasticTrajectory) -> Result<(), IoError> {
    write_rows(
        out,
        &["t_ms", "u", "v", "K", "eps", "gamma"],
        (0..traj.len()).map(|i| {
            let s = traj.states[i];
            vec![
                fmt17(traj.times[i]),
                fmt17(s.u),
                fmt17(s.v),
                fmt17(traj.k_trace[i]),
                fmt17(traj.eps_trace[i]),
                fmt17(traj.gamma_trace[i]),
            ]
        }),
    )
}

pub fn write_conductance<W: Write>(out: W, times: &[f64], states: &[State]) -> Result<(), IoError> {
    write_rows(
        out,
        &["t_ms", "u_bar", "e_current_3p5", "v"],
        conductance_outputs(times, states)
            .into_iter()
            .map(|r| vec![fmt17(r.t), fmt17(r.u_bar), fmt17(r.e_current), fmt17(r.v)]),
    )
}

/// Bins `0..=N/2` of the averaged spectrum.
pub fn write_psd<W: Write>(out: W, psd: &PsdResult) -> Result<(), IoError> {
    let half = psd.freqs_hz.len() / 2;
    write_rows(
        out,
        &["freq_hz", "power"],
        (0..=half).map(|k| vec![fmt17(psd.freqs_hz[k]), fmt17(psd.power[k])]),
    )
}

pub fn write_spectrogram<W: Write>(out: W, sg: &Spectrogram) -> Result<(), IoError> {
    let mut w = writer(out, &["window_start_ms", "freq_hz", "power"])?;
    for (start, row) in sg.window_starts_ms.iter().zip(&sg.power) {
        let start = fmt17(*start);
        for (f, p) in sg.freqs_hz.iter().zip(row) {
            w.write_record([start.as_str(), &fmt17(*f), &fmt17(*p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_canard<W: Write>(out: W, rows: &[CanardMeasurement]) -> Result<(), IoError> {
    write_rows(
        out,
        &["epsilon", "k", "y_bar", "prediction", "abs_error"],
        rows.iter().map(|m| {
            vec![
                fmt17(m.epsilon),
                fmt17(m.k_measured),
                fmt17(m.y_bar),
                fmt17(m.prediction),
                fmt17(m.abs_error),
            ]
        }),
    )
}

pub fn write_fixed_points<W: Write>(out: W, points: &[FixedPoint]) -> Result<(), IoError> {
    write_rows(
        out,
        &["u", "v", "kind", "re_l1", "im_l1", "re_l2", "im_l2"],
        points.iter().map(|fp| {
            let [l1, l2] = fp.eigenvalues;
            vec![
                fmt17(fp.location.u),
                fmt17(fp.location.v),
                fp.kind.as_str().to_string(),
                fmt17(l1.re),
                fmt17(l1.im),
                fmt17(l2.re),
                fmt17(l2.im),
            ]
        }),
    )
}

pub fn write_hopf<W: Write>(out: W, curve: &[(f64, f64)]) -> Result<(), IoError> {
    write_rows(
        out,
        &["K", "eps_h"],
        curve.iter().map(|&(k, e)| vec![fmt17(k), fmt17(e)]),
    )
}

/// One grid point of an (ε, K) sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub k: f64,
    pub kind: String,
    pub period_ms: Option<f64>,
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), IoError> {
    write_rows(
        out,
        &[
            "eps",
            "K",
            "kind",
            "period_ms",
            "u_min",
            "u_max",
            "v_min",
            "v_max",
        ],
        rows.iter().map(|r| {
            vec![
                fmt17(r.epsilon),
                fmt17(r.k),
                r.kind.clone(),
                r.period_ms.map(fmt17).unwrap_or_default(),
                fmt17(r.u_min),
                fmt17(r.u_max),
                fmt17(r.v_min),
                fmt17(r.v_max),
            ]
        }),
    )
}
