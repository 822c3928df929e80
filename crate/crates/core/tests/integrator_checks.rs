use approx::assert_relative_eq;
use wanderode::events::{detect_events, EventSpec};
use wanderode::integrator::*;
use wanderode::model::*;

fn k60(eps: f64, gamma: f64) -> ModelParams {
    ModelParams::new(60.0, eps, gamma)
}

fn period(p: &ModelParams) -> f64 {
    let cfg = IntegrationConfig::for_params(p, 2000.0);
    limit_cycle_period(p, &cfg, 10).unwrap()
}

#[test]
fn period_near_44ms_at_eps_point_one() {
    let t = period(&k60(0.1, 1.0));
    assert!((t - 44.0).abs() <= 4.4, "period {t}");
    // frozen from an independent LSODA run
    assert_relative_eq!(t, 46.15, max_relative = 2e-3);
}

#[test]
fn period_near_4_4ms_at_fast_gamma() {
    let t = period(&k60(0.01, 10.0));
    assert!((t - 4.4).abs() <= 0.44, "period {t}");
}

#[test]
fn scaling_eps_and_gamma_rescales_time() {
    let (p1, p2) = (k60(0.1, 1.0), k60(0.05, 2.0));
    let c1 = IntegrationConfig::for_params(&p1, 1000.0).with_transient(0.0);
    let c2 = IntegrationConfig::for_params(&p2, 500.0).with_transient(0.0);
    assert_eq!(c2.dt * 2.0, c1.dt);
    let t1 = integrate(DEFAULT_INITIAL_STATE, &p1, &c1).unwrap();
    let t2 = integrate(DEFAULT_INITIAL_STATE, &p2, &c2).unwrap();
    assert_eq!(t1.len(), t2.len());
    let gap = t1
        .states
        .iter()
        .zip(&t2.states)
        .map(|(a, b)| a.distance(b))
        .fold(0.0, f64::max);
    assert!(gap < 1e-4, "gap {gap}");

    let ratio = period(&p1) / period(&p2);
    assert!((ratio - 2.0).abs() < 0.02, "ratio {ratio}");
}

#[test]
fn hopf_flip_for_three_k() {
    for k in [30.0, 60.0, 90.0] {
        let base = ModelParams::new(k, 0.1, 1.0);
        let eh = hopf_epsilon(k, &base).unwrap();
        let kind = |e: f64| {
            let p = base.with_epsilon(e);
            classify_attractor(&p, &IntegrationConfig::for_params(&p, 20000.0)).unwrap()
        };
        assert_eq!(kind(eh - 0.02), AttractorKind::LimitCycle, "K={k}");
        assert_eq!(kind(eh + 0.02), AttractorKind::Sink, "K={k}");
    }
}

#[test]
fn halving_dt_barely_moves_the_state() {
    for (e, g) in [(0.1, 1.0), (0.05, 2.0), (0.01, 10.0)] {
        let p = k60(e, g);
        let cfg = IntegrationConfig::for_params(&p, 100.0).with_transient(0.0);
        let a = integrate(DEFAULT_INITIAL_STATE, &p, &cfg).unwrap();
        let b = integrate(DEFAULT_INITIAL_STATE, &p, &cfg.with_dt(cfg.dt / 2.0)).unwrap();
        let gap = a.states.last().unwrap().distance(b.states.last().unwrap());
        assert!(gap < 1e-6, "eps={e}: {gap}");
    }
}

#[test]
fn integration_is_bit_stable() {
    let p = k60(0.1, 1.0);
    let cfg = IntegrationConfig::for_params(&p, 300.0).with_transient(0.0);
    let a = integrate(DEFAULT_INITIAL_STATE, &p, &cfg).unwrap();
    let b = integrate(DEFAULT_INITIAL_STATE, &p, &cfg).unwrap();
    assert!(a
        .states
        .iter()
        .zip(&b.states)
        .all(|(x, y)| x.u.to_bits() == y.u.to_bits() && x.v.to_bits() == y.v.to_bits()));
}

#[test]
fn stride_keeps_every_nth_sample() {
    let p = k60(0.1, 1.0);
    let cfg = IntegrationConfig::for_params(&p, 50.0).with_transient(0.0);
    let full = integrate(DEFAULT_INITIAL_STATE, &p, &cfg).unwrap();
    let thin = integrate(DEFAULT_INITIAL_STATE, &p, &cfg.with_stride(10)).unwrap();
    assert_eq!(thin.len(), 501);
    for (i, s) in thin.states.iter().enumerate() {
        assert_eq!(*s, full.states[10 * i]);
    }
}

#[test]
fn cycle_crosses_v_star_twice_per_period() {
    let p = k60(0.1, 1.0);
    let cfg = IntegrationConfig::for_params(&p, 2000.0);
    let tr = integrate(DEFAULT_INITIAL_STATE, &p, &cfg).unwrap();
    let vstar = interior_fixed_point(&p).unwrap().v;
    let i0 = tr.post_transient_start();
    let up = detect_events(&tr.times[i0..], &tr.states[i0..], EventSpec::v_up(vstar));
    let both = detect_events(
        &tr.times[i0..],
        &tr.states[i0..],
        EventSpec::new(
            wanderode::events::Section::VCrosses(vstar),
            wanderode::events::Direction::Both,
        ),
    );
    assert!(both.len() as i64 - 2 * up.len() as i64 <= 1);
    assert!(both.len() >= 2 * up.len() - 1);
}

#[test]
fn sink_above_hopf_and_cycle_below_at_k60() {
    // the two states quoted for K = 60
    let cfg = |p: &ModelParams| IntegrationConfig::for_params(p, 20000.0);
    let p = k60(0.4, 1.0);
    assert_eq!(
        classify_attractor(&p, &cfg(&p)).unwrap(),
        AttractorKind::Sink
    );
    let p = k60(0.36, 1.0);
    assert_eq!(
        classify_attractor(&p, &cfg(&p)).unwrap(),
        AttractorKind::LimitCycle
    );
}

#[test]
fn positivity_from_random_starts() {
    let p = k60(0.1, 1.0);
    let cfg = IntegrationConfig::for_params(&p, 100.0).with_transient(0.0);
    let report = positivity_check(&p, 200, &cfg, 3).unwrap();
    assert!(report.min_raw_component > -1e-15);
}

#[test]
fn far_starts_fall_into_a_bounded_set() {
    let p = k60(0.1, 1.0);
    let cfg = IntegrationConfig::for_params(&p, 200.0).with_transient(0.0);
    let report = radial_boundedness_check(&p, 200, &cfg, 1.0, 5).unwrap();
    assert!(report.holds(), "{report:?}");
    assert!(report.max_final < 0.1);
    assert_eq!(report.monotonicity_violations, 0);
}

#[test]
fn limit_cycle_approaches_singular_orbit_as_eps_shrinks() {
    let base = k60(1e-4, 1.0);
    let cfg = IntegrationConfig::for_params(&base, 600.0).with_transient(200.0);
    let y_c = measure_exit_ordinate(DEFAULT_INITIAL_STATE, &base, &cfg, 0.5 * base.a2).unwrap();
    let orbit = singular_orbit(&base, y_c, DEFAULT_ARC_RESOLUTION).unwrap();
    let dist = |e: f64| {
        let p = base.with_epsilon(e);
        let tr = integrate(
            DEFAULT_INITIAL_STATE,
            &p,
            &IntegrationConfig::for_params(&p, 1000.0),
        )
        .unwrap();
        orbit_distance_to_singular(&tr, &orbit, 0.01)
    };
    let (d2, d3) = (dist(1e-2), dist(1e-3));
    assert!(d3 < d2, "{d3} vs {d2}");
}
