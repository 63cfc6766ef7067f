//! Event-driven simulation of a single handover with a CBR packet stream.
//!
//! A trial draws every timer once, then replays the handover as a sequence
//! of timestamped events: link disconnect, reattachment, binding/fast
//! binding signalling and the packets of the stream. Packets are judged at
//! the node that decides where they go (the HA for tunneling, the previous
//! access router otherwise). A packet that passed that node while the old
//! link was still up is delivered; a packet forwarded towards the new router
//! is delivered only if the MN is already attached there when it arrives.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::analytic::{NetworkGeometry, SchemeKind};
use crate::error::{Error, Result};
use crate::stochastic::{sample_perturbed, Millis, PerturbedTimer, RandomSource, SeedSequence};

/// Label that separates handover sub-streams from other experiment families.
const STREAM_DOMAIN: u64 = 0x4d48_4f5f_454e_4731;

/// Default number of trials per sweep point.
pub const DEFAULT_TRIALS: usize = 10_000;

/// Constant bit rate stream from the CN towards the MN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    packet_period: Millis,
}

impl StreamConfig {
    pub fn new(packet_period: Millis) -> Result<Self> {
        if !(packet_period.is_finite() && packet_period > 0.0) {
            return Err(Error::InvalidParameter {
                name: "packet_period",
                reason: format!("must be > 0, got {packet_period}"),
            });
        }
        Ok(Self { packet_period })
    }

    pub fn packet_period(&self) -> Millis {
        self.packet_period
    }
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            packet_period: 10.0,
        }
    }
}

/// Timer distributions for one handover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimerSet {
    pub anticipation: PerturbedTimer,
    pub l2_handoff: PerturbedTimer,
    pub local_ip: PerturbedTimer,
    pub m1: PerturbedTimer,
    pub m2: PerturbedTimer,
    pub l1: PerturbedTimer,
    pub l2: PerturbedTimer,
    pub router_distance: PerturbedTimer,
}

impl TimerSet {
    /// Anticipation 50±30, L2 handoff 50±10, access links 2±1, router
    /// distance ±2.5 around `router_distance_mean`. Local IP configuration
    /// is 0 and the HA legs are a fixed 20 ms.
    pub fn reference(router_distance_mean: Millis) -> Result<Self> {
        Ok(Self {
            anticipation: PerturbedTimer::new(50.0, 30.0)?,
            l2_handoff: PerturbedTimer::new(50.0, 10.0)?,
            local_ip: PerturbedTimer::fixed(0.0)?,
            m1: PerturbedTimer::new(2.0, 1.0)?,
            m2: PerturbedTimer::new(2.0, 1.0)?,
            l1: PerturbedTimer::fixed(20.0)?,
            l2: PerturbedTimer::fixed(20.0)?,
            router_distance: PerturbedTimer::new(router_distance_mean, 2.5)?,
        })
    }

    /// Every timer fixed at the corresponding geometry value.
    pub fn zero_variance(g: &NetworkGeometry) -> Result<Self> {
        g.validate()?;
        Ok(Self {
            anticipation: PerturbedTimer::fixed(g.t_anticipation)?,
            l2_handoff: PerturbedTimer::fixed(g.t_l2_handoff)?,
            local_ip: PerturbedTimer::fixed(g.t_local_ip)?,
            m1: PerturbedTimer::fixed(g.t_m1)?,
            m2: PerturbedTimer::fixed(g.t_m2)?,
            l1: PerturbedTimer::fixed(g.t_l1)?,
            l2: PerturbedTimer::fixed(g.t_l2)?,
            router_distance: PerturbedTimer::fixed(g.t_l3)?,
        })
    }

    pub fn with_router_distance_mean(mut self, mean: Millis) -> Result<Self> {
        self.router_distance = self.router_distance.with_mean(mean)?;
        Ok(self)
    }

    pub fn means(&self) -> NetworkGeometry {
        NetworkGeometry {
            t_m1: self.m1.mean(),
            t_m2: self.m2.mean(),
            t_l1: self.l1.mean(),
            t_l2: self.l2.mean(),
            t_l3: self.router_distance.mean(),
            t_l2_handoff: self.l2_handoff.mean(),
            t_local_ip: self.local_ip.mean(),
            t_anticipation: self.anticipation.mean(),
        }
    }

    /// Draws one value of every timer plus the stream phase, in a fixed order.
    pub fn sample(&self, stream: &StreamConfig, rng: &mut RandomSource) -> SampledTimers {
        let phase = rng.uniform() * stream.packet_period;
        let geometry = NetworkGeometry {
            t_anticipation: sample_perturbed(&self.anticipation, rng),
            t_l2_handoff: sample_perturbed(&self.l2_handoff, rng),
            t_local_ip: sample_perturbed(&self.local_ip, rng),
            t_m1: sample_perturbed(&self.m1, rng),
            t_m2: sample_perturbed(&self.m2, rng),
            t_l1: sample_perturbed(&self.l1, rng),
            t_l2: sample_perturbed(&self.l2, rng),
            t_l3: sample_perturbed(&self.router_distance, rng),
        };
        SampledTimers { geometry, phase }
    }
}

/// The draws of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledTimers {
    pub geometry: NetworkGeometry,
    /// Offset of the first packet after the disconnect instant, in `[0, period)`.
    pub phase: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub scheme: SchemeKind,
    pub timers: TimerSet,
    pub stream: StreamConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: SchemeKind,
    pub lost_packets: u64,
    pub loss_window: Millis,
    pub added_delay: Millis,
    /// Whether forwarding was set up before the MN left the old link.
    /// `None` for non-predictive schemes.
    pub prediction_completed: Option<bool>,
    pub sampled: SampledTimers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Disconnect,
    Reattach,
    /// A binding update (or its fast variant's negotiation) leaves the MN side.
    SignalSent,
    ForwardingStart,
    PacketAtDecision(usize),
    PacketAtTarget(usize),
}

impl EventKind {
    /// State changes take effect before packets stamped with the same time.
    fn rank(&self) -> u8 {
        match self {
            EventKind::Disconnect | EventKind::Reattach => 0,
            EventKind::SignalSent | EventKind::ForwardingStart => 1,
            EventKind::PacketAtDecision(_) | EventKind::PacketAtTarget(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    at: Millis,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap and we pop the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .total_cmp(&self.at)
            .then_with(|| other.kind.rank().cmp(&self.kind.rank()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    fn schedule(&mut self, at: Millis, kind: EventKind) {
        self.heap.push(Event {
            at,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }
}

/// Per-scheme path legs, seen from the decision node.
#[derive(Debug, Clone, Copy)]
struct Paths {
    /// Decision node to MN over the old attachment.
    old_leg: Millis,
    /// Decision node to the new access router.
    redirect_leg: Millis,
    /// New access router to MN.
    new_last_hop: Millis,
}

/// Instants at which the handover state changed.
#[derive(Debug, Clone, Copy)]
struct StateTrace {
    disconnect: Millis,
    reattach: Millis,
    forwarding: Millis,
}

impl StateTrace {
    /// Fate of a packet reaching the decision node at `s`; `Some(t)` is its
    /// delivery time, `None` a loss.
    fn fate(&self, paths: &Paths, s: Millis) -> Option<Millis> {
        if s >= self.forwarding {
            let at_target = s + paths.redirect_leg;
            (at_target >= self.reattach).then_some(at_target + paths.new_last_hop)
        } else if s < self.disconnect {
            Some(s + paths.old_leg)
        } else {
            None
        }
    }

    /// Total length of decision-node time during which arrivals are lost.
    fn loss_measure(&self, paths: &Paths) -> Millis {
        let mut cuts = [
            self.disconnect,
            self.forwarding,
            self.reattach - paths.redirect_leg,
        ];
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .filter(|w| self.fate(paths, 0.5 * (w[0] + w[1])).is_none())
            .map(|w| w[1] - w[0])
            .sum()
    }
}

/// Replays a handover for fixed draws. This is deterministic: all
/// randomness lives in `sampled`.
pub fn simulate(
    scheme: SchemeKind,
    sampled: &SampledTimers,
    stream: &StreamConfig,
) -> SchemeOutcome {
    let g = &sampled.geometry;
    let period = stream.packet_period;
    let mut queue = EventQueue::default();

    let (paths, disconnect_at, signal_at, signal_latency) = match scheme {
        SchemeKind::BidirectionalTunneling => {
            let reattach = g.t_l2_handoff + g.t_local_ip;
            queue.schedule(reattach, EventKind::Reattach);
            (
                Paths {
                    old_leg: g.t_l1 + g.t_m1,
                    redirect_leg: g.t_l2,
                    new_last_hop: g.t_m2,
                },
                0.0,
                reattach,
                g.t_m2 + g.t_l2,
            )
        }
        SchemeKind::Reactive => {
            let reattach = g.t_l2_handoff + g.t_local_ip;
            queue.schedule(reattach, EventKind::Reattach);
            (
                Paths {
                    old_leg: g.t_m1,
                    redirect_leg: g.t_l3,
                    new_last_hop: g.t_m2,
                },
                0.0,
                reattach,
                g.t_m2 + g.t_l3,
            )
        }
        SchemeKind::Predictive => {
            // FBU to the previous router, then HI/HAck with the next one.
            queue.schedule(g.t_anticipation + g.t_l2_handoff, EventKind::Reattach);
            (
                Paths {
                    old_leg: g.t_m1,
                    redirect_leg: g.t_l3,
                    new_last_hop: g.t_m2,
                },
                g.t_anticipation,
                0.0,
                g.t_m1 + 2.0 * g.t_l3,
            )
        }
    };
    queue.schedule(disconnect_at, EventKind::Disconnect);
    queue.schedule(signal_at, EventKind::SignalSent);

    let forwarding_at = signal_at + signal_latency;
    let reattach_at = match scheme {
        SchemeKind::Predictive => g.t_anticipation + g.t_l2_handoff,
        _ => g.t_l2_handoff + g.t_local_ip,
    };
    let first = disconnect_at.min(forwarding_at).min(0.0) - period;
    let last =
        disconnect_at.max(forwarding_at).max(reattach_at) + paths.redirect_leg + 2.0 * period;
    let origin = disconnect_at + sampled.phase;
    let n_lo = ((first - origin) / period).floor() as i64;
    let n_hi = ((last - origin) / period).ceil() as i64;
    let packet_times: Vec<Millis> = (n_lo..=n_hi).map(|n| origin + n as f64 * period).collect();
    for (id, &s) in packet_times.iter().enumerate() {
        queue.schedule(s, EventKind::PacketAtDecision(id));
    }

    let mut attached_old = true;
    let mut attached_new = false;
    let mut forwarding = false;
    let mut trace = StateTrace {
        disconnect: f64::INFINITY,
        reattach: f64::INFINITY,
        forwarding: f64::INFINITY,
    };
    let mut lost = 0u64;
    let mut first_redirected_delay: Option<Millis> = None;

    while let Some(ev) = queue.pop() {
        match ev.kind {
            EventKind::Disconnect => {
                attached_old = false;
                trace.disconnect = ev.at;
            }
            EventKind::Reattach => {
                attached_new = true;
                trace.reattach = ev.at;
            }
            EventKind::SignalSent => {
                queue.schedule(ev.at + signal_latency, EventKind::ForwardingStart)
            }
            EventKind::ForwardingStart => {
                forwarding = true;
                trace.forwarding = ev.at;
            }
            EventKind::PacketAtDecision(id) => {
                if forwarding {
                    queue.schedule(ev.at + paths.redirect_leg, EventKind::PacketAtTarget(id));
                } else if !attached_old {
                    lost += 1;
                }
            }
            EventKind::PacketAtTarget(id) => {
                if attached_new {
                    let delivered = ev.at + paths.new_last_hop;
                    first_redirected_delay
                        .get_or_insert(delivered - (packet_times[id] + paths.old_leg));
                } else {
                    lost += 1;
                }
            }
        }
    }

    let added_delay =
        first_redirected_delay.unwrap_or(paths.redirect_leg + paths.new_last_hop - paths.old_leg);
    SchemeOutcome {
        scheme,
        lost_packets: lost,
        loss_window: trace.loss_measure(&paths),
        added_delay,
        prediction_completed: (scheme == SchemeKind::Predictive)
            .then_some(trace.forwarding <= trace.disconnect),
        sampled: *sampled,
    }
}

fn run_checked(
    cfg: &TrialConfig,
    expected: SchemeKind,
    rng: &mut RandomSource,
) -> Result<SchemeOutcome> {
    if cfg.scheme != expected {
        return Err(Error::Unsupported(format!(
            "trial configured for `{}` but `{}` was requested",
            cfg.scheme, expected
        )));
    }
    Ok(run_trial(cfg, rng))
}

pub fn run_trial(cfg: &TrialConfig, rng: &mut RandomSource) -> SchemeOutcome {
    let sampled = cfg.timers.sample(&cfg.stream, rng);
    simulate(cfg.scheme, &sampled, &cfg.stream)
}

pub fn run_bt_trial(cfg: &TrialConfig, rng: &mut RandomSource) -> Result<SchemeOutcome> {
    run_checked(cfg, SchemeKind::BidirectionalTunneling, rng)
}

pub fn run_reactive_trial(cfg: &TrialConfig, rng: &mut RandomSource) -> Result<SchemeOutcome> {
    run_checked(cfg, SchemeKind::Reactive, rng)
}

/// Friendly predictive handover: the MN always moves to the router the
/// forwarding was negotiated with.
pub fn run_predictive_trial(cfg: &TrialConfig, rng: &mut RandomSource) -> Result<SchemeOutcome> {
    run_checked(cfg, SchemeKind::Predictive, rng)
}

/// Bernoulli proportion with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProportionEstimate {
    pub p: f64,
    pub half_width: f64,
    pub trials: usize,
}

impl ProportionEstimate {
    pub fn from_counts(successes: usize, trials: usize) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            p,
            half_width: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}

pub fn completion_probability(
    cfg: &TrialConfig,
    trials: usize,
    seeds: &SeedSequence,
) -> Result<ProportionEstimate> {
    if cfg.scheme != SchemeKind::Predictive {
        return Err(Error::Unsupported(
            "completion probability is defined for the predictive scheme only".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be >= 1".into(),
        });
    }
    let completed = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = seeds.substream(&[STREAM_DOMAIN, 0, i as u64]);
            run_trial(cfg, &mut rng).prediction_completed == Some(true)
        })
        .count();
    Ok(ProportionEstimate::from_counts(completed, trials))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Mean router distance of this sweep point.
    pub distance: Millis,
    pub scheme: SchemeKind,
    pub mean_loss_packets: f64,
    pub mean_loss_window: Millis,
    pub mean_added_delay: Millis,
    pub completion: Option<ProportionEstimate>,
    pub trials: usize,
}

/// Sweeps the mean router distance. Every scheme at a sweep point sees the
/// same draws (common random numbers); rows come out in (value, scheme) order.
pub fn sweep(
    timers: &TimerSet,
    stream: &StreamConfig,
    schemes: &[SchemeKind],
    distances: &[Millis],
    trials: usize,
    seeds: &SeedSequence,
) -> Result<Vec<SweepRow>> {
    if distances.is_empty() {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: "sweep needs at least one value".into(),
        });
    }
    if schemes.is_empty() {
        return Err(Error::InvalidParameter {
            name: "schemes",
            reason: "sweep needs at least one scheme".into(),
        });
    }
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be >= 1".into(),
        });
    }

    let mut rows = Vec::with_capacity(distances.len() * schemes.len());
    for (point, &distance) in distances.iter().enumerate() {
        let point_timers = timers.with_router_distance_mean(distance)?;
        let outcomes: Vec<Vec<SchemeOutcome>> = (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeds.substream(&[STREAM_DOMAIN, point as u64 + 1, i as u64]);
                let sampled = point_timers.sample(stream, &mut rng);
                schemes
                    .iter()
                    .map(|&s| simulate(s, &sampled, stream))
                    .collect()
            })
            .collect();

        for (col, &scheme) in schemes.iter().enumerate() {
            let (mut packets, mut window, mut delay, mut completed) = (0.0, 0.0, 0.0, 0usize);
            for trial in &outcomes {
                let o = &trial[col];
                packets += o.lost_packets as f64;
                window += o.loss_window;
                delay += o.added_delay;
                completed += usize::from(o.prediction_completed == Some(true));
            }
            let n = trials as f64;
            rows.push(SweepRow {
                distance,
                scheme,
                mean_loss_packets: packets / n,
                mean_loss_window: window / n,
                mean_added_delay: delay / n,
                completion: (scheme == SchemeKind::Predictive)
                    .then(|| ProportionEstimate::from_counts(completed, trials)),
                trials,
            });
        }
    }
    Ok(rows)
}
