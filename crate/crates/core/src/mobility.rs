//! Honeycomb cell plane, straight-line motion and prediction outcomes.
//!
//! Cells are pointy-top hexagons of circumradius `R` addressed by axial
//! coordinates. Each cell's radio coverage is the closed disk of radius `R`
//! about its centre, i.e. the smallest circle enclosing the hexagon. Two
//! adjacent disks overlap in a lens bounded by the shared edge's end points,
//! so every overlap lies inside the two hexagons it joins.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::analytic::{map_residence_scaling, MobilityParams};
use crate::engine::ProportionEstimate;
use crate::error::{Error, Result};
use crate::stochastic::{sample_exponential, ExponentialTimer, RandomSource, SeedSequence};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const PREDICTION_DOMAIN: u64 = 0x4d4f_4249_5052_4544;
const RESIDENCE_DOMAIN: u64 = 0x4d4f_4249_5245_5349;
const COUNT_DOMAIN: u64 = 0x4d4f_4249_434f_554e;

/// Relative tolerance for boundary decisions (edge ties, closed disks).
const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        dx * dx + dy * dy
    }
}

/// Axial hexagon coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub q: i64,
    pub r: i64,
}

impl CellId {
    pub const ORIGIN: CellId = CellId { q: 0, r: 0 };

    pub fn new(q: i64, r: i64) -> Self {
        Self { q, r }
    }

    /// Neighbour across edge `i`; edge `i` faces the direction `60° * i`.
    pub fn neighbor(&self, i: usize) -> CellId {
        let (dq, dr) = NEIGHBOR_OFFSETS[i % 6];
        CellId::new(self.q + dq, self.r + dr)
    }

    pub fn neighbors(&self) -> [CellId; 6] {
        std::array::from_fn(|i| self.neighbor(i))
    }
}

const NEIGHBOR_OFFSETS: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

fn edge_normal(i: usize) -> (f64, f64) {
    let a = (i as f64) * PI / 3.0;
    (a.cos(), a.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    radius: f64,
}

impl CellGrid {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("must be > 0, got {radius}"),
            });
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Distance from a centre to an edge midpoint.
    pub fn apothem(&self) -> f64 {
        0.5 * SQRT3 * self.radius
    }

    pub fn center(&self, cell: CellId) -> Point {
        let (q, r) = (cell.q as f64, cell.r as f64);
        Point::new(self.radius * SQRT3 * (q + 0.5 * r), self.radius * 1.5 * r)
    }

    /// Whether `p` lies in the closed hexagon of `cell`.
    pub fn hexagon_contains(&self, cell: CellId, p: Point) -> bool {
        let c = self.center(cell);
        let limit = self.apothem() * (1.0 + BOUNDARY_EPS);
        (0..6).all(|i| {
            let (nx, ny) = edge_normal(i);
            nx * (p.x - c.x) + ny * (p.y - c.y) <= limit
        })
    }

    /// Whether `p` lies in the closed radio disk of `cell`.
    pub fn disk_contains(&self, cell: CellId, p: Point) -> bool {
        p.distance_sq(&self.center(cell)) <= self.radius * self.radius * (1.0 + BOUNDARY_EPS)
    }

    /// Hexagon containing `p`. On shared edges and vertices the
    /// lexicographically smallest `(q, r)` wins.
    pub fn cell_at(&self, p: Point) -> CellId {
        let fq = (SQRT3 / 3.0 * p.x - p.y / 3.0) / self.radius;
        let fr = (2.0 / 3.0 * p.y) / self.radius;
        let guess = cube_round(fq, fr);
        let tie = self.radius * self.radius * BOUNDARY_EPS * 8.0;
        let mut best = guess;
        let mut best_d = p.distance_sq(&self.center(guess));
        for cand in guess.neighbors() {
            let d = p.distance_sq(&self.center(cand));
            if d < best_d - tie || ((d - best_d).abs() <= tie && cand < best) {
                best = cand;
                best_d = d.min(best_d);
            }
        }
        best
    }

    /// Neighbours of `current` whose radio disk also covers `p`, sorted.
    /// Empty when `p` lies in no overlap or outside `current`'s disk.
    pub fn in_prediction_region(&self, p: Point, current: CellId) -> Vec<CellId> {
        if !self.disk_contains(current, p) {
            return Vec::new();
        }
        let mut cells: Vec<CellId> = current
            .neighbors()
            .into_iter()
            .filter(|&n| self.disk_contains(n, p))
            .collect();
        cells.sort();
        cells
    }

    /// Parameter interval `[t0, t1]` during which `o + t d` is inside the
    /// disk of `cell`, for a unit direction `d`.
    fn disk_interval(&self, cell: CellId, o: Point, d: (f64, f64)) -> Option<(f64, f64)> {
        let c = self.center(cell);
        let (fx, fy) = (o.x - c.x, o.y - c.y);
        let b = fx * d.0 + fy * d.1;
        let cc = fx * fx + fy * fy - self.radius * self.radius;
        let disc = b * b - cc;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        Some((-b - s, -b + s))
    }

    /// Distance along the ray `o + t d` (from `t_from`) at which it leaves
    /// the hexagon of `cell`, and the index of the edge crossed.
    fn exit_along(&self, cell: CellId, o: Point, d: (f64, f64)) -> (f64, usize) {
        let c = self.center(cell);
        let ap = self.apothem();
        let mut best = (f64::INFINITY, 0);
        for i in 0..6 {
            let (nx, ny) = edge_normal(i);
            let den = nx * d.0 + ny * d.1;
            if den > 1e-15 {
                let t = (ap - (nx * (o.x - c.x) + ny * (o.y - c.y))) / den;
                if t < best.0 {
                    best = (t, i);
                }
            }
        }
        best
    }
}

fn cube_round(fq: f64, fr: f64) -> CellId {
    let fs = -fq - fr;
    let (mut q, mut r, s) = (fq.round(), fr.round(), fs.round());
    let (dq, dr, ds) = ((q - fq).abs(), (r - fr).abs(), (s - fs).abs());
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    CellId::new(q as i64, r as i64)
}

/// Straight-line motion for the duration of one call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub origin: Point,
    /// Unit vector.
    pub direction: (f64, f64),
    pub speed: f64,
    pub holding_time: f64,
}

impl Trajectory {
    pub fn position(&self, t: f64) -> Point {
        let s = self.speed * t;
        Point::new(
            self.origin.x + s * self.direction.0,
            self.origin.y + s * self.direction.1,
        )
    }
}

/// Stay in one cell, in trajectory time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellVisit {
    pub cell: CellId,
    pub enter: f64,
    pub exit: f64,
    /// Cell entered at `exit`.
    pub next: CellId,
}

/// Cells visited along the unbounded straight line, starting from the cell
/// containing the origin, until `horizon` or `max_cells` visits.
pub fn walk(grid: &CellGrid, traj: &Trajectory, horizon: f64, max_cells: usize) -> Vec<CellVisit> {
    let mut visits = Vec::new();
    let mut cell = grid.cell_at(traj.origin);
    let mut enter = 0.0;
    while visits.len() < max_cells && enter < horizon {
        let (dist, edge) = grid.exit_along(cell, traj.origin, traj.direction);
        let exit = dist / traj.speed;
        let next = cell.neighbor(edge);
        visits.push(CellVisit {
            cell,
            enter,
            exit,
            next,
        });
        cell = next;
        enter = exit;
    }
    visits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictionOutcome {
    Correct,
    ErroneousWrongCell,
    ErroneousCallTerminated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionEvent {
    pub triggered_at: f64,
    pub predicted_cell: CellId,
    pub outcome: PredictionOutcome,
    /// The overlap was left again before any cell change.
    pub traversed_without_change: bool,
}

/// Predictions along a trajectory. A prediction towards cell `j` fires when
/// the MN, located in another cell, enters `j`'s radio disk; it is correct
/// if the next cell change leads into `j` before the call ends.
pub fn trajectory_predictions(
    grid: &CellGrid,
    traj: &Trajectory,
    max_cells: usize,
) -> Vec<PredictionEvent> {
    let visits = walk(grid, traj, traj.holding_time, max_cells);
    let mut events = Vec::new();
    for v in &visits {
        for j in v.cell.neighbors() {
            let Some((a, b)) = grid.disk_interval(j, traj.origin, traj.direction) else {
                continue;
            };
            let (a, b) = (a / traj.speed, b / traj.speed);
            if !(a > 0.0 && a >= v.enter && a < v.exit && a < traj.holding_time) {
                continue;
            }
            let outcome = if v.exit > traj.holding_time {
                PredictionOutcome::ErroneousCallTerminated
            } else if v.next == j {
                PredictionOutcome::Correct
            } else {
                PredictionOutcome::ErroneousWrongCell
            };
            events.push(PredictionEvent {
                triggered_at: a,
                predicted_cell: j,
                outcome,
                traversed_without_change: b < v.exit.min(traj.holding_time),
            });
        }
    }
    events.sort_by(|x, y| x.triggered_at.total_cmp(&y.triggered_at));
    events
}

fn random_point_in_cell(grid: &CellGrid, cell: CellId, rng: &mut RandomSource) -> Point {
    let c = grid.center(cell);
    let (hw, hh) = (grid.apothem(), grid.radius());
    loop {
        let p = Point::new(
            c.x + rng.uniform_range(-hw, hw),
            c.y + rng.uniform_range(-hh, hh),
        );
        if grid.cell_at(p) == cell {
            return p;
        }
    }
}

fn random_direction(rng: &mut RandomSource) -> (f64, f64) {
    let a = rng.uniform() * 2.0 * PI;
    (a.cos(), a.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidenceEstimate {
    pub mean: f64,
    pub crossings: usize,
}

/// Cells walked per calibration trajectory.
const RESIDENCE_CELLS: usize = 16;

/// Mean time between boundary crossings of random straight lines. The first
/// (partial) stay of each line is discarded.
pub fn measure_residence_time(
    grid: &CellGrid,
    speed: f64,
    trajectories: usize,
    seeds: &SeedSequence,
) -> Result<ResidenceEstimate> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::InvalidParameter {
            name: "speed",
            reason: format!("must be > 0, got {speed}"),
        });
    }
    if trajectories == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be >= 1".into(),
        });
    }
    let sums: Vec<(f64, usize)> = (0..trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.substream(&[RESIDENCE_DOMAIN, i as u64]);
            let traj = Trajectory {
                origin: random_point_in_cell(grid, CellId::ORIGIN, &mut rng),
                direction: random_direction(&mut rng),
                speed,
                holding_time: f64::INFINITY,
            };
            let visits = walk(grid, &traj, f64::INFINITY, RESIDENCE_CELLS + 1);
            let total: f64 = visits[1..].iter().map(|v| v.exit - v.enter).sum();
            (total, visits.len() - 1)
        })
        .collect();
    let (total, crossings) = sums
        .iter()
        .fold((0.0, 0usize), |(t, n), &(dt, dn)| (t + dt, n + dn));
    Ok(ResidenceEstimate {
        mean: total / crossings as f64,
        crossings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionSetup {
    pub grid: CellGrid,
    pub speed: f64,
    /// Calibrated mean cell residence time, see [`measure_residence_time`].
    pub mean_residence: f64,
    pub spawn_cell: CellId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRates {
    pub rho: f64,
    pub trajectories: usize,
    pub predictions: usize,
    pub correct: ProportionEstimate,
    pub wrong_cell: ProportionEstimate,
    pub call_terminated: ProportionEstimate,
    /// Predictions whose overlap was left without a cell change.
    pub traversals: ProportionEstimate,
}

impl PredictionRates {
    /// Wrong-cell and call-terminated predictions together.
    pub fn erroneous(&self) -> ProportionEstimate {
        let bad = (self.wrong_cell.p + self.call_terminated.p) * self.predictions as f64;
        ProportionEstimate::from_counts(bad.round() as usize, self.predictions)
    }
}

/// Monte-Carlo classification of predictions for call-to-mobility factor
/// `rho`. Call holding times are exponential with `alpha = rho / mean_residence`.
pub fn simulate_prediction_outcomes(
    rho: f64,
    setup: &PredictionSetup,
    trajectories: usize,
    seeds: &SeedSequence,
) -> Result<PredictionRates> {
    if trajectories == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be >= 1".into(),
        });
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("must be > 0, got {rho}"),
        });
    }
    let holding = ExponentialTimer::new(rho / setup.mean_residence)?;
    let counts: Vec<[usize; 4]> = (0..trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.substream(&[PREDICTION_DOMAIN, rho.to_bits(), i as u64]);
            let traj = Trajectory {
                origin: random_point_in_cell(&setup.grid, setup.spawn_cell, &mut rng),
                direction: random_direction(&mut rng),
                speed: setup.speed,
                holding_time: sample_exponential(&holding, &mut rng),
            };
            let mut c = [0usize; 4];
            for ev in trajectory_predictions(&setup.grid, &traj, usize::MAX) {
                c[match ev.outcome {
                    PredictionOutcome::Correct => 0,
                    PredictionOutcome::ErroneousWrongCell => 1,
                    PredictionOutcome::ErroneousCallTerminated => 2,
                }] += 1;
                c[3] += usize::from(ev.traversed_without_change);
            }
            c
        })
        .collect();
    let mut total = [0usize; 4];
    for c in &counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    let n = total[0] + total[1] + total[2];
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "no predictions were triggered; increase the trial count".into(),
        });
    }
    Ok(PredictionRates {
        rho,
        trajectories,
        predictions: n,
        correct: ProportionEstimate::from_counts(total[0], n),
        wrong_cell: ProportionEstimate::from_counts(total[1], n),
        call_terminated: ProportionEstimate::from_counts(total[2], n),
        traversals: ProportionEstimate::from_counts(total[3], n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoverCountEstimate {
    /// Mean number of residences that end before the call, `E[N]`.
    pub mean_handovers: f64,
    /// Mean of `N (N + 1) / 2 = sum_{i<=N} i`, which estimates
    /// `sum_i i * P(N >= i)`, the closed form of `expected_handovers`.
    pub series_estimate: f64,
    /// 95% half-width of `series_estimate`.
    pub series_half_width: f64,
    pub trials: usize,
}

/// Races exponential residence times (MAP granularity) against the
/// remaining exponential call holding time and counts the handovers.
pub fn count_handovers(
    p: &MobilityParams,
    trials: usize,
    seeds: &SeedSequence,
) -> Result<HandoverCountEstimate> {
    if p.rho() == 0.0 {
        return Err(Error::Singularity);
    }
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be >= 1".into(),
        });
    }
    let holding = ExponentialTimer::new(p.alpha())?;
    let residence = ExponentialTimer::new(map_residence_scaling(p.eta(), p.k())?)?;
    let counts: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng =
                seeds.substream(&[COUNT_DOMAIN, p.rho().to_bits(), p.k().to_bits(), i as u64]);
            let mut remaining = sample_exponential(&holding, &mut rng);
            let mut n = 0u64;
            loop {
                let stay = sample_exponential(&residence, &mut rng);
                if stay >= remaining {
                    break n;
                }
                remaining -= stay;
                n += 1;
            }
        })
        .collect();
    let nf = trials as f64;
    let (mut sum_n, mut sum_s, mut sum_s2) = (0.0, 0.0, 0.0);
    for &n in &counts {
        let n = n as f64;
        let s = 0.5 * n * (n + 1.0);
        sum_n += n;
        sum_s += s;
        sum_s2 += s * s;
    }
    let mean_s = sum_s / nf;
    let var = (sum_s2 / nf - mean_s * mean_s).max(0.0);
    Ok(HandoverCountEstimate {
        mean_handovers: sum_n / nf,
        series_estimate: mean_s,
        series_half_width: 1.96 * (var / nf).sqrt(),
        trials,
    })
}
