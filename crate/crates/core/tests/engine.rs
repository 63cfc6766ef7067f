use handover_core::analytic::SchemeKind;
use handover_core::engine::{completion_probability, sweep, StreamConfig, TimerSet, TrialConfig};
use handover_core::stochastic::SeedSequence;

#[test]
fn sweep_is_reproducible_and_order_independent() {
    let timers = TimerSet::reference(0.0).unwrap();
    let stream = StreamConfig::default();
    let seeds = SeedSequence::new(123);
    let a = sweep(
        &timers,
        &stream,
        &SchemeKind::ALL,
        &[5.0, 20.0],
        500,
        &seeds,
    )
    .unwrap();
    let b = sweep(
        &timers,
        &stream,
        &SchemeKind::ALL,
        &[5.0, 20.0],
        500,
        &seeds,
    )
    .unwrap();
    assert_eq!(a, b);
    let other = sweep(
        &timers,
        &stream,
        &SchemeKind::ALL,
        &[5.0, 20.0],
        500,
        &SeedSequence::new(124),
    )
    .unwrap();
    assert_ne!(a, other);
}

#[test]
fn reactive_equals_or_beats_predictive_in_close_topologies() {
    let timers = TimerSet::reference(0.0).unwrap();
    let rows = sweep(
        &timers,
        &StreamConfig::default(),
        &[SchemeKind::Reactive, SchemeKind::Predictive],
        &[0.0, 5.0, 30.0],
        10_000,
        &SeedSequence::new(9),
    )
    .unwrap();
    let loss = |d: f64, s: SchemeKind| {
        rows.iter()
            .find(|r| r.distance == d && r.scheme == s)
            .unwrap()
            .mean_loss_packets
    };
    assert!(loss(0.0, SchemeKind::Reactive) <= loss(0.0, SchemeKind::Predictive));
    assert!(loss(5.0, SchemeKind::Reactive) <= loss(5.0, SchemeKind::Predictive));
    assert!(loss(30.0, SchemeKind::Predictive) < loss(30.0, SchemeKind::Reactive));
}

#[test]
fn completion_probability_decreases_with_distance() {
    let seeds = SeedSequence::new(10);
    let mut last = (1.0, 0.0);
    for d in [0.0, 10.0, 20.0, 30.0, 40.0] {
        let cfg = TrialConfig {
            scheme: SchemeKind::Predictive,
            timers: TimerSet::reference(d).unwrap(),
            stream: StreamConfig::default(),
        };
        let est = completion_probability(&cfg, 10_000, &seeds).unwrap();
        assert!(est.p <= last.0 + last.1 + est.half_width, "{d}: {est:?}");
        last = (est.p, est.half_width);
    }
}

#[test]
fn bt_loss_tracks_home_agent_distance() {
    let mut timers = TimerSet::reference(5.0).unwrap();
    let stream = StreamConfig::default();
    let seeds = SeedSequence::new(2);
    let near = sweep(
        &timers,
        &stream,
        &[SchemeKind::BidirectionalTunneling],
        &[5.0],
        2000,
        &seeds,
    )
    .unwrap();
    timers.l2 = timers.l2.with_mean(60.0).unwrap();
    let far = sweep(
        &timers,
        &stream,
        &[SchemeKind::BidirectionalTunneling],
        &[5.0],
        2000,
        &seeds,
    )
    .unwrap();
    // Window grows by exactly 40 ms for every draw.
    let diff = far[0].mean_loss_window - near[0].mean_loss_window;
    assert!((diff - 40.0).abs() < 1e-9, "{diff}");
    assert!((far[0].mean_added_delay - near[0].mean_added_delay - 40.0).abs() < 1e-9);
}
