//! Closed-form loss and delay windows, handover probabilities and
//! signalling overheads.
//!
//! All windows are exact durations in milliseconds. Packet counts are
//! obtained downstream by dividing by the stream's packet period.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stochastic::Millis;

/// One-way delays and timers of the two-router handover topology.
///
/// The MN is attached to AR1 over `m1` and moves to AR2 (`m2`). `l1`/`l2`
/// lead from the routers to the HA/CN, `l3` joins the two routers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NetworkGeometry {
    pub t_m1: Millis,
    pub t_m2: Millis,
    pub t_l1: Millis,
    pub t_l2: Millis,
    pub t_l3: Millis,
    pub t_l2_handoff: Millis,
    pub t_local_ip: Millis,
    pub t_anticipation: Millis,
}

impl NetworkGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("t_m1", self.t_m1),
            ("t_m2", self.t_m2),
            ("t_l1", self.t_l1),
            ("t_l2", self.t_l2),
            ("t_l3", self.t_l3),
            ("t_L2", self.t_l2_handoff),
            ("t_local_IP", self.t_local_ip),
            ("t_Ant", self.t_anticipation),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be a finite duration >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossDelayWindow {
    /// Duration of the undeliverable part of the stream.
    pub loss_window: Millis,
    /// Extra one-way delay of packets after the handover. Signed.
    pub added_delay: Millis,
    pub delta_plus: Millis,
    pub delta_minus: Millis,
}

impl LossDelayWindow {
    /// Signed slack between anticipation and negotiation, `delta_plus - delta_minus`.
    pub fn delta(&self) -> Millis {
        self.delta_plus - self.delta_minus
    }
}

pub fn handoff_decomposition(g: &NetworkGeometry, t_bu: Millis) -> Result<Millis> {
    if !(t_bu.is_finite() && t_bu >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_BU",
            reason: format!("must be a finite duration >= 0, got {t_bu}"),
        });
    }
    Ok(g.t_l2_handoff + g.t_local_ip + t_bu)
}

/// Bi-directional tunneling through the home agent.
pub fn bt_window(g: &NetworkGeometry) -> LossDelayWindow {
    LossDelayWindow {
        loss_window: g.t_l2_handoff + g.t_local_ip + g.t_m2 + g.t_l2,
        added_delay: (g.t_l2 - g.t_l1) + (g.t_m2 - g.t_m1),
        ..Default::default()
    }
}

/// Reactive (hierarchical) handover: forwarding from AR1 starts once the
/// binding update sent after reattachment reaches it.
pub fn reactive_window(g: &NetworkGeometry) -> LossDelayWindow {
    LossDelayWindow {
        loss_window: g.t_l2_handoff + g.t_local_ip + g.t_m2 + g.t_l3,
        added_delay: g.t_l3 + g.t_m2 - g.t_m1,
        ..Default::default()
    }
}

/// Anticipation slack: `(delta_plus, delta_minus)`.
pub fn anticipation_deltas(g: &NetworkGeometry) -> (Millis, Millis) {
    let negotiation = 2.0 * g.t_l3 + g.t_m1;
    let plus = (g.t_anticipation - negotiation).max(0.0);
    let minus = (negotiation - g.t_anticipation).max(0.0);
    (plus, minus)
}

/// Predictive (fast) handover. `prediction_correct` selects whether the MN
/// actually arrives at the router the forwarding was negotiated with.
pub fn predictive_window(g: &NetworkGeometry, prediction_correct: bool) -> LossDelayWindow {
    let (delta_plus, delta_minus) = anticipation_deltas(g);
    let delta = delta_plus - delta_minus;
    let loss_window = if prediction_correct {
        delta_minus + (delta + g.t_l2_handoff - g.t_l3).max(0.0)
    } else {
        delta_plus + reactive_window(g).loss_window
    };
    LossDelayWindow {
        loss_window,
        added_delay: g.t_l3 + g.t_m2 - g.t_m1,
        delta_plus,
        delta_minus,
    }
}

/// Call-to-mobility factor together with its constituent rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams {
    alpha: f64,
    eta: f64,
    k: f64,
    rho: f64,
}

impl MobilityParams {
    /// From the call holding rate `alpha` and the AR cell residence rate `eta` (both 1/ms).
    pub fn from_rates(alpha: f64, eta: f64, k: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be >= 0, got {alpha}"),
            });
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be > 0, got {eta}"),
            });
        }
        check_k(k)?;
        Ok(Self {
            alpha,
            eta,
            k,
            rho: alpha / eta,
        })
    }

    /// From `rho` and a residence rate; `alpha = rho * eta`.
    pub fn from_rho(rho: f64, eta: f64, k: f64) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: format!("must be >= 0, got {rho}"),
            });
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be > 0, got {eta}"),
            });
        }
        check_k(k)?;
        Ok(Self {
            alpha: rho * eta,
            eta,
            k,
            rho,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

fn check_k(k: f64) -> Result<()> {
    if !(k.is_finite() && k >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("AR-to-MAP ratio must be >= 1, got {k}"),
        });
    }
    Ok(())
}

/// Probability that the MN leaves its cell before the call ends.
pub fn handover_probability(p: &MobilityParams, use_map: bool) -> f64 {
    let scale = if use_map { p.k.sqrt() } else { 1.0 };
    1.0 / (1.0 + scale * p.rho)
}

/// Closed form of `sum_{i>=1} i * q^i` with `q = 1 / (1 + sqrt(k) rho)`.
pub fn expected_handovers(p: &MobilityParams) -> Result<f64> {
    if p.rho == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(1.0 / (p.k * p.rho * p.rho) + 1.0 / (p.k.sqrt() * p.rho))
}

/// Residence rate at MAP granularity, `eta_AR / sqrt(k)`.
pub fn map_residence_scaling(eta_ar: f64, k: f64) -> Result<f64> {
    if !(eta_ar.is_finite() && eta_ar > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eta_AR",
            reason: format!("must be > 0, got {eta_ar}"),
        });
    }
    check_k(k)?;
    Ok(eta_ar / k.sqrt())
}

/// Mobility scheme under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    /// MIPv6 bi-directional tunneling via the home agent.
    BidirectionalTunneling,
    /// M-HMIPv6 reactive handover.
    Reactive,
    /// M-FMIPv6 predictive handover.
    Predictive,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [
        SchemeKind::BidirectionalTunneling,
        SchemeKind::Reactive,
        SchemeKind::Predictive,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::BidirectionalTunneling => "bt",
            SchemeKind::Reactive => "reactive",
            SchemeKind::Predictive => "predictive",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bt" | "mipv6" | "bidirectional" => Ok(SchemeKind::BidirectionalTunneling),
            "reactive" | "hmipv6" => Ok(SchemeKind::Reactive),
            "predictive" | "fmipv6" => Ok(SchemeKind::Predictive),
            other => Err(Error::Unsupported(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandoverKind {
    IntraMap,
    InterMap,
    Any,
}

impl HandoverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            HandoverKind::IntraMap => "intra_map",
            HandoverKind::InterMap => "inter_map",
            HandoverKind::Any => "any",
        }
    }
}

/// Number of handover signalling messages of a scheme.
pub fn signalling_overhead(scheme: SchemeKind, kind: HandoverKind) -> Result<u32> {
    match (scheme, kind) {
        (SchemeKind::Reactive, HandoverKind::IntraMap) => Ok(1),
        (SchemeKind::Reactive, HandoverKind::InterMap) => Ok(2),
        (SchemeKind::Predictive, HandoverKind::Any) => Ok(7),
        (SchemeKind::Reactive, HandoverKind::Any) => Err(Error::Unsupported(
            "hierarchical handover cost depends on intra_map vs inter_map".into(),
        )),
        (SchemeKind::Predictive, k) => Err(Error::Unsupported(format!(
            "fast handover signalling has no `{}` qualifier",
            k.as_str()
        ))),
        (SchemeKind::BidirectionalTunneling, _) => Err(Error::Unsupported(
            "no local handover signalling count for bi-directional tunneling".into(),
        )),
    }
}
