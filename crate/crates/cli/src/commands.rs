use std::fs::File;
use std::io::{self, BufReader, IsTerminal, Read};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;
use wanderode::canard::{measure_canard, CanardConfig};
use wanderode::integrator::{
    attractor_summary, default_dt, integrate, limit_cycle_period_from, IntegrationConfig,
};
use wanderode::io::{self as table, SweepRow};
use wanderode::model::{fixed_points as equilibria, hopf_curve, hopf_epsilon, ModelParams, State};
use wanderode::spectral::{
    averaged_psd, peak_frequency, spectrogram as windowed, Channel, Signal, SpectralConfig,
};
use wanderode::walk::{
    ei_balance_correlation, simulate_ensemble, StochasticTrajectory, WalkConfig, WalkStart,
};

use crate::config::{RunConfig, Source};
use crate::error::CliError;
use crate::output::Sink;

/// What a command reports besides its table.
pub struct Report {
    pub summary: serde_json::Value,
    pub seed: Option<i64>,
    pub extra_outputs: Vec<PathBuf>,
}

impl Report {
    fn new(summary: serde_json::Value) -> Self {
        Self {
            summary,
            seed: None,
            extra_outputs: Vec::new(),
        }
    }
}

fn model(cfg: &RunConfig, k: Option<f64>) -> Result<ModelParams, CliError> {
    let k = match k {
        Some(k) => k,
        None => cfg.float("model.K")?,
    };
    let p = ModelParams {
        a1: cfg.float("model.a1")?,
        a2: cfg.float("model.a2")?,
        b: cfg.float("model.b")?,
        c: cfg.float("model.c")?,
        k,
        epsilon: cfg.float("model.eps")?,
        gamma: cfg.float("model.gamma")?,
    };
    p.validate()?;
    Ok(p)
}

fn initial_state(cfg: &RunConfig) -> Result<State, CliError> {
    Ok(State::new(
        cfg.float("integrate.u0")?,
        cfg.float("integrate.v0")?,
    ))
}

/// `dt` and `stride` fall back to the given values when unset; a default
/// transient longer than the run is cut to the run length.
fn integration(cfg: &RunConfig, dt: f64, stride: usize) -> Result<IntegrationConfig, CliError> {
    let t_end = cfg.float("integrate.t_end")?;
    let mut transient = cfg.float("integrate.transient")?;
    if cfg.source("integrate.transient") == Some(Source::Default) {
        transient = transient.min(t_end);
    }
    let stride = match cfg.int_opt("integrate.stride") {
        Some(s) => usize::try_from(s)
            .map_err(|_| CliError::Usage(format!("integrate.stride must be positive, got {s}")))?,
        None => stride,
    };
    let icfg = IntegrationConfig {
        dt: cfg.float_opt("integrate.dt").unwrap_or(dt),
        t_end,
        record_stride: stride,
        transient_discard: transient,
        state_floor: cfg.float("integrate.floor")?,
    };
    icfg.validate()?;
    Ok(icfg)
}

fn walk_config(cfg: &RunConfig) -> Result<WalkConfig, CliError> {
    let seed = cfg.int("walk.seed")?;
    let w = WalkConfig {
        k_range: [cfg.float("walk.K_min")?, cfg.float("walk.K_max")?],
        eps_range: [cfg.float("walk.eps_min")?, cfg.float("walk.eps_max")?],
        f_range: [cfg.float("walk.f_min")?, cfg.float("walk.f_max")?],
        update_interval: cfg.float("walk.interval")?,
        k_step: cfg.float("walk.K_step")?,
        eps_step: cfg.float("walk.eps_step")?,
        gamma_step: cfg.float("walk.gamma_step")?,
        max_redraws: u32::try_from(cfg.int("walk.max_redraws")?)
            .map_err(|_| CliError::Usage("walk.max_redraws out of range".into()))?,
        seed: u64::try_from(seed)
            .map_err(|_| CliError::Usage(format!("walk.seed must be non-negative, got {seed}")))?,
    };
    w.validate()?;
    Ok(w)
}

fn walk_start(cfg: &RunConfig, w: &WalkConfig) -> WalkStart {
    let mid = w.midpoint_start();
    let k = cfg.float_opt("walk.K0").unwrap_or(mid.k);
    let eps = cfg.float_opt("walk.eps0").unwrap_or(mid.eps);
    let gamma = cfg
        .float_opt("walk.gamma0")
        .unwrap_or(0.5 * (w.f_range[0] + w.f_range[1]) / eps);
    WalkStart { k, eps, gamma }
}

fn spectral_config(cfg: &RunConfig) -> Result<SpectralConfig, CliError> {
    Ok(SpectralConfig {
        window_ms: cfg.float("spectral.window")?,
        shift_ms: cfg.float("spectral.shift")?,
        t0: cfg.float("spectral.t0")?,
        t1: cfg.float("spectral.t1")?,
        sample_dt: cfg.float("spectral.sample_dt")?,
    })
}

fn band(cfg: &RunConfig) -> Result<[f64; 2], CliError> {
    Ok([
        cfg.float("spectral.band_lo")?,
        cfg.float("spectral.band_hi")?,
    ])
}

pub fn fixed_points(cfg: &RunConfig, sink: &Sink) -> Result<Report, CliError> {
    let p = model(cfg, None)?;
    let points = equilibria(&p)?;
    let star = points[3].location;
    let line = format!(
        "u_star={} v_star={} kind={}",
        star.u,
        star.v,
        points[3].kind.as_str()
    );
    sink.deliver("fixed points", &line, |w| {
        table::write_fixed_points(w, &points)
    })?;
    Ok(Report::new(
        json!({ "u_star": star.u, "v_star": star.v, "kind": points[3].kind.as_str() }),
    ))
}

pub fn simulate(cfg: &RunConfig, sink: &Sink) -> Result<Report, CliError> {
    let p = model(cfg, None)?;
    let icfg = integration(cfg, default_dt(p.epsilon), 1)?;
    let traj = integrate(initial_state(cfg)?, &p, &icfg)?;
    let last = *traj.states.last().expect("at least one sample");
    let line = format!(
        "samples={} u_end={} v_end={} floor_events={}",
        traj.len(),
        last.u,
        last.v,
        traj.floor_events
    );
    sink.deliver("trajectory", &line, |w| {
        table::write_trajectory(w, &traj.times, &traj.states)
    })?;
    Ok(Report::new(json!({
        "samples": traj.len(),
        "u_end": last.u,
        "v_end": last.v,
        "floor_events": traj.floor_events,
    })))
}

pub fn period(cfg: &RunConfig, sink: &Sink) -> Result<Report, CliError> {
    let p = model(cfg, None)?;
    let icfg = integration(cfg, default_dt(p.epsilon), 1)?;
    let m = cfg.count("period.crossings")?;
    let t = limit_cycle_period_from(initial_state(cfg)?, &p, &icfg, m)?;
    let line = format!("period_ms={t}");
    sink.deliver("period", &line, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["K", "eps", "gamma", "period_ms"])?;
        c.write_record([p.k, p.epsilon, p.gamma, t].map(table::fmt17))?;
        c.flush()?;
        Ok(())
    })?;
    Ok(Report::new(json!({ "period_ms": t })))
}

pub fn hopf(cfg: &RunConfig, sink: &Sink) -> Result<Report, CliError> {
    let (k_min, k_max) = (cfg.float("hopf.K_min")?, cfg.float("hopf.K_max")?);
    let p = model(cfg, Some(cfg.float_opt("model.K").unwrap_or(k_min)))?;
    let curve = hopf_curve(k_min, k_max, cfg.count("hopf.samples")?, &p)?;
    let (k_top, e_top) =
        curve.iter().copied().fold(
            (f64::NAN, f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 { b } else { a },
        );
    let mut line = format!("rows={} eps_h_max={e_top} at K={k_top}", curve.len());
    let mut summary = json!({ "rows": curve.len(), "eps_h_max": e_top, "k_at_max": k_top });
    if let Some(k) = cfg.float_opt("model.K") {
        let e = hopf_epsilon(k, &p)?;
        line.push_str(&format!(" eps_h(K={k})={e}"));
        summary["eps_h"] = json!(e);
    }
    sink.deliver("hopf curve", &line, |w| table::write_hopf(w, &curve))?;
    Ok(Report::new(summary))
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

pub fn sweep(cfg: &RunConfig, sink: &Sink) -> Result<Report, CliError> {
    let eps = grid(
        cfg.float("sweep.eps_min")?,
        cfg.float("sweep.eps_max")?,
        cfg.count("sweep.eps_n")?,
    );
    let ks = grid(
        cfg.float("sweep.K_min")?,
        cfg.float("sweep.K_max")?,
        cfg.count("sweep.K_n")?,
    );
    let m = cfg.count("period.crossings")?;
    let s0 = initial_state(cfg)?;
    let points: Vec<(f64, f64)> = eps
        .iter()
        .flat_map(|&e| ks.iter().map(move |&k| (e, k)))
        .collect();
    if points.is_empty() {
        return Err(CliError::Usage("sweep grid is empty".into()));
    }
    let rows = points
        .par_iter()
        .map(|&(e, k)| -> Result<SweepRow, CliError> {
            let p = ModelParams {
                epsilon: e,
                ..model(cfg, Some(k))?
            };
            p.validate()?;
            let icfg = integration(cfg, default_dt(e), 1)?;
            let s = attractor_summary(s0, &p, &icfg)?;
            let period_ms = match s.kind {
                wanderode::integrator::AttractorKind::LimitCycle => {
                    limit_cycle_period_from(s0, &p, &icfg, m).ok()
                }
                wanderode::integrator::AttractorKind::Sink => None,
            };
            Ok(SweepRow {
                epsilon: e,
                k,
                kind: s.kind.as_str().to_string(),
                period_ms,
                u_min: s.u_min,
                u_max: s.u_max,
                v_min: s.v_min,
                v_max: s.v_max,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cycles = rows
        .iter()
        .filter(|r| r.period_ms.is_some() || r.kind == "limit_cycle")
        .count();
    let line = format!(
        "points={} limit_cycles={cycles} sinks={}",
        rows.len(),
        rows.len() - cycles
    );
    sink.deliver("sweep", &line, |w| table::write_sweep(w, &rows))?;
    Ok(Report::new(
        json!({ "points": rows.len(), "limit_cycles": cycles }),
    ))
}

/// Integration settings for a stochastic run: the step resolves the
/// smallest ε of the walk and samples are kept every `sample_ms` when that
/// is a whole number of steps.
fn stochastic_integration(
    cfg: &RunConfig,
    w: &WalkConfig,
    sample_ms: f64,
) -> Result<IntegrationConfig, CliError> {
    let dt = cfg
        .float_opt("integrate.dt")
        .unwrap_or_else(|| default_dt(w.eps_range[0]));
    let ratio = sample_ms / dt;
    let stride = if (ratio - ratio.round()).abs() < 1e-9 * ratio && ratio >= 1.0 {
        ratio.round() as usize
    } else {
        1
    };
    integration(cfg, dt, stride)
}

fn run_walk(
    cfg: &RunConfig,
    t_end_floor: Option<f64>,
) -> Result<(WalkConfig, Vec<StochasticTrajectory>), CliError> {
    let w = walk_config(cfg)?;
    let start = walk_start(cfg, &w);
    let base = model(cfg, Some(start.k))?;
    let mut icfg = stochastic_integration(cfg, &w, cfg.float("spectral.sample_dt")?)?;
    if let Some(t) = t_end_floor {
        if cfg.source("integrate.t_end") == Some(Source::Default) && icfg.t_end < t {
            icfg.t_end = t;
        }
    }
    let runs = cfg.count("walk.runs")?;
    if runs == 0 {
        return Err(CliError::Usage("walk.runs must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..runs as u64).map(|i| w.seed + i).collect();
    let trajs = simulate_ensemble(&seeds, initial_state(cfg)?, start, &base, &w, &icfg)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok((w, trajs))
}

/// `run.csv` with seed 4 becomes `run.seed4.csv`.
fn seeded_path(path: &Path, seed: u64) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.seed{seed}"),
    };
    path.with_file_name(name)
}

pub fn stochastic(
    cfg: &RunConfig,
    sink: &Sink,
    conductance: Option<&Path>,
) -> Result<Report, CliError> {
    let (w, trajs) = run_walk(cfg, Some(cfg.float("spectral.t1")?))?;
    let transient = cfg.float("integrate.transient")?;
    let mut lines = Vec::new();
    let mut per_run = Vec::new();
    for (i, tr) in trajs.iter().enumerate() {
        let seed = w.seed + i as u64;
        let corr = ei_balance_correlation(
            &tr.times,
            &tr.states,
            transient.min(*tr.times.last().unwrap()),
        )
        .ok();
        lines.push(format!(
            "seed={seed} samples={} ei_correlation={} eps_reverts={} clamps={}",
            tr.len(),
            corr.map_or("n/a".to_string(), |c| c.to_string()),
            tr.stats.eps_reverts,
            tr.stats.k_clamps + tr.stats.eps_clamps,
        ));
        per_run.push(json!({
            "seed": seed,
            "samples": tr.len(),
            "ei_correlation": corr,
            "stats": tr.stats,
        }));
    }
    let mut extra = Vec::new();
    if trajs.len() == 1 {
        let tr = &trajs[0];
        sink.deliver("stochastic trajectory", &lines.join("\n"), |out| {
            table::write_stochastic(out, tr)
        })?;
        if let Some(path) = conductance {
            sink.to_file(path, "conductance table", |out| {
                table::write_conductance(out, &tr.times, &tr.states)
            })?;
            extra.push(path.to_path_buf());
        }
    } else {
        let Some(out) = &sink.output else {
            return Err(CliError::Usage("several runs need --output".into()));
        };
        for (i, tr) in trajs.iter().enumerate() {
            let seed = w.seed + i as u64;
            let path = seeded_path(out, seed);
            sink.to_file(&path, "stochastic trajectory", |o| {
                table::write_stochastic(o, tr)
            })?;
            extra.push(path);
            if let Some(c) = conductance {
                let path = seeded_path(c, seed);
                sink.to_file(&path, "conductance table", |o| {
                    table::write_conductance(o, &tr.times, &tr.states)
                })?;
                extra.push(path);
            }
        }
        // the main output lists the runs
        sink.to_file(out, "run index", |o| {
            let mut c = csv::Writer::from_writer(o);
            c.write_record(["seed", "path"])?;
            for (i, p) in extra
                .iter()
                .step_by(if conductance.is_some() { 2 } else { 1 })
                .enumerate()
            {
                c.write_record([(w.seed + i as u64).to_string(), p.display().to_string()])?;
            }
            c.flush()?;
            Ok(())
        })?;
        println!("{}", lines.join("\n"));
    }
    Ok(Report {
        summary: json!({ "runs": per_run }),
        seed: Some(w.seed as i64),
        extra_outputs: extra,
    })
}

/// Where the analysed trajectory comes from.
pub enum Input<'a> {
    File(&'a Path),
    Stdin,
    Inline,
}

impl<'a> Input<'a> {
    /// `--input` wins, then `--inline`; otherwise stdin when it is piped and
    /// an inline run when it is a terminal.
    pub fn choose(input: Option<&'a Path>, inline: bool) -> Self {
        match input {
            Some(p) if p == Path::new("-") => Input::Stdin,
            Some(p) => Input::File(p),
            None if inline => Input::Inline,
            None if io::stdin().is_terminal() => Input::Inline,
            None => Input::Stdin,
        }
    }
}

fn load_signal(cfg: &RunConfig, input: Input<'_>) -> Result<(Signal, Option<i64>), CliError> {
    let channel_name = cfg.text("spectral.channel")?;
    let channel = Channel::parse(channel_name)
        .ok_or_else(|| CliError::Usage(format!("unknown spectral.channel {channel_name:?}")))?;
    let read = |r: &mut dyn Read, origin: &str| -> Result<(Vec<f64>, Vec<State>), CliError> {
        let (t, s) = table::read_trajectory(r).map_err(|e| CliError::Table {
            stage: "reading trajectory",
            source: e,
        })?;
        if t.is_empty() {
            return Err(CliError::Usage(format!("{origin}: no trajectory rows")));
        }
        Ok((t, s))
    };
    let ((times, states), seed) = match input {
        Input::File(path) => {
            let f = File::open(path).map_err(|e| CliError::Io {
                stage: "opening trajectory",
                path: path.display().to_string(),
                source: e,
            })?;
            (
                read(&mut BufReader::new(f), &path.display().to_string())?,
                None,
            )
        }
        Input::Stdin => (read(&mut io::stdin().lock(), "<stdin>")?, None),
        Input::Inline => {
            let (w, mut trajs) = run_walk(cfg, Some(cfg.float("spectral.t1")?))?;
            if trajs.len() != 1 {
                return Err(CliError::Usage(
                    "spectral analysis takes a single run".into(),
                ));
            }
            let tr = trajs.remove(0);
            ((tr.times, tr.states), Some(w.seed as i64))
        }
    };
    let sc = spectral_config(cfg)?;
    let signal = Signal::from_states(&times, &states, channel)?.decimate_to(sc.sample_dt)?;
    Ok((signal, seed))
}

pub fn psd(cfg: &RunConfig, sink: &Sink, input: Input<'_>) -> Result<Report, CliError> {
    let (signal, seed) = load_signal(cfg, input)?;
    let sc = spectral_config(cfg)?;
    let result = averaged_psd(&signal, &sc)?;
    let b = band(cfg)?;
    let peak = peak_frequency(&result, b)?;
    let broad = result.bins_above(0.5, b);
    let line = format!(
        "peak_hz={peak} band=[{}, {}] windows={} bins_above_half={broad}",
        b[0], b[1], result.n_windows
    );
    sink.deliver("power spectrum", &line, |w| table::write_psd(w, &result))?;
    let mut report = Report::new(json!({
        "peak_hz": peak,
        "band_hz": b,
        "n_windows": result.n_windows,
        "bins_above_half": broad,
    }));
    report.seed = seed;
    Ok(report)
}

pub fn spectrogram(cfg: &RunConfig, sink: &Sink, input: Input<'_>) -> Result<Report, CliError> {
    let (signal, seed) = load_signal(cfg, input)?;
    let sg = windowed(&signal, &spectral_config(cfg)?)?;
    let track = sg.peak_track();
    let mean_peak = track.iter().sum::<f64>() / track.len() as f64;
    let line = format!(
        "windows={} bins={} mean_peak_hz={mean_peak}",
        sg.window_starts_ms.len(),
        sg.freqs_hz.len()
    );
    sink.deliver("spectrogram", &line, |w| table::write_spectrogram(w, &sg))?;
    let mut report = Report::new(json!({
        "windows": sg.window_starts_ms.len(),
        "bins": sg.freqs_hz.len(),
        "mean_peak_hz": mean_peak,
    }));
    report.seed = seed;
    Ok(report)
}

pub fn canard(cfg: &RunConfig, sink: &Sink) -> Result<Report, CliError> {
    let p = model(cfg, None)?;
    let cc = CanardConfig {
        dt_fraction: cfg.float("canard.dt_fraction")?,
        t_end: cfg.float("canard.t_end")?,
        state_floor: cfg.float("integrate.floor").unwrap_or(1e-12),
    };
    let rows = measure_canard(
        &p,
        cfg.list("canard.eps_list")?,
        cfg.float("canard.entry_k")?,
        &cc,
    )?;
    let last = rows.last().expect("non-empty list");
    let monotone = rows.windows(2).all(|w| w[1].abs_error < w[0].abs_error);
    let line = format!(
        "prediction={} final_abs_error={} final_rel_error={} monotone={monotone}",
        last.prediction,
        last.abs_error,
        last.rel_error()
    );
    sink.deliver("canard table", &line, |w| table::write_canard(w, &rows))?;
    Ok(Report::new(json!({
        "prediction": last.prediction,
        "final_abs_error": last.abs_error,
        "final_rel_error": last.rel_error(),
        "monotone": monotone,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_both_ends() {
        assert_eq!(grid(1.0, 2.0, 3), vec![1.0, 1.5, 2.0]);
        assert_eq!(grid(1.0, 2.0, 1), vec![1.0]);
        assert!(grid(1.0, 2.0, 0).is_empty());
    }

    #[test]
    fn seeded_paths() {
        assert_eq!(
            seeded_path(Path::new("out/run.csv"), 4),
            PathBuf::from("out/run.seed4.csv")
        );
        assert_eq!(seeded_path(Path::new("run"), 2), PathBuf::from("run.seed2"));
    }

    #[test]
    fn stochastic_sampling_follows_spectral_step() {
        let cfg = RunConfig::defaults();
        let w = walk_config(&cfg).unwrap();
        let icfg = stochastic_integration(&cfg, &w, 0.1).unwrap();
        assert!((icfg.dt - 0.004).abs() < 1e-15);
        assert_eq!(icfg.record_stride, 25);
    }

    #[test]
    fn default_transient_is_cut_to_short_runs() {
        let mut cfg = RunConfig::defaults();
        cfg.set_raw("integrate.t_end", "100", Source::Flag).unwrap();
        assert_eq!(integration(&cfg, 0.01, 1).unwrap().transient_discard, 100.0);
        cfg.set_raw("integrate.transient", "500", Source::Flag)
            .unwrap();
        assert!(integration(&cfg, 0.01, 1).is_err());
    }
}
