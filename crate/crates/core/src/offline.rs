//! Offline scheduling with every intruder known in advance.
//!
//! Three routes are provided:
//! * [`to_trp_tw`] turns intruders into time-windowed services on the segment
//!   `[-theta, theta]` (a repairperson problem with time windows).
//! * [`build_reachability_graph`] and [`longest_path_schedule`] solve the
//!   `r = rho` case exactly as a longest path in a DAG.
//! * [`brute_force_optimal`] enumerates capture orders and is the ground
//!   truth for small instances, for any `r >= rho`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Intruder, IntruderId, ProblemInstance, EPS};

/// Default enumeration limit for [`brute_force_optimal`].
pub const DEFAULT_ORACLE_CAP: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OfflineError {
    #[error("intruder {id} already breached (radius {radius} ≤ rho)")]
    AlreadyBreached { id: IntruderId, radius: f64 },
    #[error("reachability DAG requires r = rho (got r = {r}, rho = {rho})")]
    RangeNotPerimeter { r: f64, rho: f64 },
    #[error("instance too large for oracle: {count} intruders, cap {cap}")]
    TooLarge { count: usize, cap: usize },
}

/// A unit-reward service at `location` that must be locked no earlier than
/// `earliest_lock` and completed no later than `latest_completion`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub id: IntruderId,
    pub location: f64,
    pub earliest_lock: f64,
    pub latest_completion: f64,
    pub reward: u32,
}

impl TimeWindow {
    /// Window of one intruder, in absolute time. Intruders released later than
    /// zero have their window shifted by the release time.
    pub fn for_intruder(p: &ProblemInstance, i: &Intruder) -> Self {
        let z = i.release_radius;
        let wait = if z <= p.lock_outer_radius() + EPS {
            0.0
        } else {
            (z - p.r) / p.v - p.delta
        };
        Self {
            id: i.id,
            location: i.angle,
            earliest_lock: i.release_time + wait,
            latest_completion: i.release_time + (z - p.rho) / p.v,
            reward: 1,
        }
    }

    /// No room for a single service of length `delta`.
    pub fn is_void(&self, delta: f64) -> bool {
        self.earliest_lock > self.latest_completion - delta + EPS
    }
}

/// Maps intruders onto time-windowed services on the segment. Collocated
/// intruders become separate services with identical windows.
pub fn to_trp_tw(p: &ProblemInstance, intruders: &[Intruder]) -> Result<Vec<TimeWindow>, OfflineError> {
    intruders
        .iter()
        .map(|i| {
            if i.release_radius <= p.rho {
                Err(OfflineError::AlreadyBreached {
                    id: i.id,
                    radius: i.release_radius,
                })
            } else {
                Ok(TimeWindow::for_intruder(p, i))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub id: IntruderId,
    pub lock: f64,
    pub capture: f64,
}

/// A timed capture plan. Serializes as `{"value":k,"steps":[...]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr")]
pub struct Schedule {
    value: usize,
    steps: Vec<ScheduleStep>,
}

#[derive(Deserialize)]
struct ScheduleRepr {
    value: usize,
    steps: Vec<ScheduleStep>,
}

impl TryFrom<ScheduleRepr> for Schedule {
    type Error = String;

    fn try_from(r: ScheduleRepr) -> Result<Self, Self::Error> {
        if r.value != r.steps.len() {
            return Err(format!("value {} but {} steps", r.value, r.steps.len()));
        }
        Ok(Schedule::new(r.steps))
    }
}

impl Schedule {
    pub fn new(steps: Vec<ScheduleStep>) -> Self {
        Self {
            value: steps.len(),
            steps,
        }
    }

    pub fn value(&self) -> usize {
        self.value
    }

    pub fn steps(&self) -> &[ScheduleStep] {
        &self.steps
    }

    pub fn ids(&self) -> Vec<IntruderId> {
        self.steps.iter().map(|s| s.id).collect()
    }

    /// `(intruder, lock time)` pairs for replay through the engine.
    pub fn locks(&self) -> Vec<(IntruderId, f64)> {
        self.steps.iter().map(|s| (s.id, s.lock)).collect()
    }
}

/// Why an order cannot be served.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Infeasible {
    pub index: usize,
    pub id: IntruderId,
    pub reason: String,
}

/// Earliest-feasible timing of a capture order: turn at full speed, wait for
/// the window to open if early, spool up, and require the lock to land inside
/// the lock window.
pub fn schedule_feasible(
    order: &[IntruderId],
    p: &ProblemInstance,
    intruders: &[Intruder],
    gamma0: f64,
) -> Result<Schedule, Infeasible> {
    let by_id: BTreeMap<IntruderId, &Intruder> = intruders.iter().map(|i| (i.id, i)).collect();
    let mut clock = 0.0;
    let mut heading = gamma0;
    let mut steps = Vec::with_capacity(order.len());
    for (index, &id) in order.iter().enumerate() {
        let Some(i) = by_id.get(&id) else {
            return Err(Infeasible {
                index,
                id,
                reason: "unknown intruder".into(),
            });
        };
        match next_service(p, i, clock, heading) {
            Some(step) => {
                clock = step.capture;
                heading = i.angle;
                steps.push(step);
            }
            None => {
                return Err(Infeasible {
                    index,
                    id,
                    reason: format!("window closes before the turret can lock (ready at {clock})"),
                })
            }
        }
    }
    Ok(Schedule::new(steps))
}

/// Serves `i` as early as possible from `(clock, heading)`.
fn next_service(p: &ProblemInstance, i: &Intruder, clock: f64, heading: f64) -> Option<ScheduleStep> {
    let w = TimeWindow::for_intruder(p, i);
    let lock = (clock + p.travel_time(heading, i.angle)).max(w.earliest_lock);
    p.lock_radius_ok(i.radius_unchecked(lock, p.v)).then_some(ScheduleStep {
        id: i.id,
        lock,
        capture: lock + p.delta,
    })
}

/// Exhaustive search over capture orders. Prefixes reaching the same set of
/// captured intruders with the same last intruder no earlier than a previously
/// seen prefix are pruned. Returns the lexicographically smallest order among
/// the maximal ones.
pub fn brute_force_optimal(
    p: &ProblemInstance,
    intruders: &[Intruder],
    gamma0: f64,
    cap: usize,
) -> Result<(usize, Schedule), OfflineError> {
    if intruders.len() > cap || intruders.len() > 31 {
        return Err(OfflineError::TooLarge {
            count: intruders.len(),
            cap,
        });
    }
    let mut sorted = intruders.to_vec();
    sorted.sort_by_key(|i| i.id);
    let mut search = Search {
        p,
        intruders: &sorted,
        seen: HashMap::new(),
        path: Vec::new(),
        best: Vec::new(),
    };
    search.descend(0, 0.0, gamma0);
    let schedule = Schedule::new(search.best);
    Ok((schedule.value(), schedule))
}

struct Search<'a> {
    p: &'a ProblemInstance,
    intruders: &'a [Intruder],
    seen: HashMap<(u32, usize), f64>,
    path: Vec<ScheduleStep>,
    best: Vec<ScheduleStep>,
}

impl Search<'_> {
    fn descend(&mut self, mask: u32, clock: f64, heading: f64) {
        if self.path.len() > self.best.len() {
            self.best = self.path.clone();
        }
        let n = self.intruders.len();
        if self.best.len() == n || self.path.len() + (n - mask.count_ones() as usize) <= self.best.len() {
            return;
        }
        for k in 0..n {
            if mask & (1 << k) != 0 {
                continue;
            }
            let i = self.intruders[k];
            let Some(step) = next_service(self.p, &i, clock, heading) else {
                continue;
            };
            let key = (mask | (1 << k), k);
            if self.seen.get(&key).is_some_and(|&c| c <= step.capture) {
                continue;
            }
            self.seen.insert(key, step.capture);
            self.path.push(step);
            self.descend(key.0, step.capture, i.angle);
            self.path.pop();
        }
    }
}

/// Directed acyclic graph over intruders for the `r = rho` case. Vertex `k`
/// is `ids[k]`; the turret's initial heading is an extra source vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityGraph {
    pub gamma0: f64,
    pub ids: Vec<IntruderId>,
    /// Radius each intruder would have at time zero on its motion line.
    pub radius0: Vec<f64>,
    pub angles: Vec<f64>,
    /// Vertices reachable directly from the initial heading.
    pub source_edges: Vec<usize>,
    /// Out-neighbours per vertex, ascending.
    pub edges: Vec<Vec<usize>>,
}

impl ReachabilityGraph {
    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    fn index_of(&self, id: IntruderId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn has_edge(&self, from: IntruderId, to: IntruderId) -> bool {
        match (self.index_of(from), self.index_of(to)) {
            (Some(a), Some(b)) => self.edges[a].binary_search(&b).is_ok(),
            _ => false,
        }
    }

    pub fn has_source_edge(&self, to: IntruderId) -> bool {
        self.index_of(to)
            .is_some_and(|b| self.source_edges.binary_search(&b).is_ok())
    }

    /// Pairs `(i, j)` with edges both ways.
    pub fn two_cycles(&self) -> Vec<(IntruderId, IntruderId)> {
        let mut out = Vec::new();
        for (a, outs) in self.edges.iter().enumerate() {
            for &b in outs {
                if a < b && self.edges[b].binary_search(&a).is_ok() {
                    out.push((self.ids[a], self.ids[b]));
                }
            }
        }
        out
    }

    /// Kahn's algorithm, smallest vertex first. `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.vertex_count();
        let mut indegree = vec![0usize; n];
        for outs in &self.edges {
            for &b in outs {
                indegree[b] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&k| indegree[k] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(a) = ready.pop_first() {
            order.push(a);
            for &b in &self.edges[a] {
                indegree[b] -= 1;
                if indegree[b] == 0 {
                    ready.insert(b);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }
}

/// Builds the reachability DAG. Edge `i -> j` exists when, after capturing
/// `i` exactly at the perimeter, the turret can still turn to `j` and capture
/// it by the perimeter: `z_j - z_i >= v*delta + (v/omega)|theta_j - theta_i|`.
/// The source reaches `i` when `z_i >= rho + delta*v + (v/omega)|gamma0 - theta_i|`.
pub fn build_reachability_graph(
    p: &ProblemInstance,
    intruders: &[Intruder],
    gamma0: f64,
) -> Result<ReachabilityGraph, OfflineError> {
    if (p.r - p.rho).abs() > EPS {
        return Err(OfflineError::RangeNotPerimeter { r: p.r, rho: p.rho });
    }
    let mut sorted = intruders.to_vec();
    sorted.sort_by_key(|i| i.id);
    for i in &sorted {
        if i.release_radius <= p.rho {
            return Err(OfflineError::AlreadyBreached {
                id: i.id,
                radius: i.release_radius,
            });
        }
    }
    let inner = p.lock_inner_radius();
    // an intruder released inside the lock radius can never be locked on
    let lockable: Vec<bool> = sorted.iter().map(|i| i.release_radius >= inner - EPS).collect();
    let radius0: Vec<f64> = sorted.iter().map(|i| i.radius_at_zero(p.v)).collect();
    let angles: Vec<f64> = sorted.iter().map(|i| i.angle).collect();
    let slope = p.v / p.omega;

    let source_edges = (0..sorted.len())
        .filter(|&k| lockable[k] && radius0[k] >= inner + slope * p.angular_gap(gamma0, angles[k]) - EPS)
        .collect();
    let edges = (0..sorted.len())
        .map(|a| {
            if !lockable[a] || radius0[a] < inner - EPS {
                return Vec::new();
            }
            (0..sorted.len())
                .filter(|&b| {
                    b != a
                        && lockable[b]
                        && radius0[b] - radius0[a]
                            >= p.v * p.delta + slope * p.angular_gap(angles[a], angles[b]) - EPS
                })
                .collect()
        })
        .collect();
    Ok(ReachabilityGraph {
        gamma0,
        ids: sorted.iter().map(|i| i.id).collect(),
        radius0,
        angles,
        source_edges,
        edges,
    })
}

/// Longest path from the source, realized just in time: every intruder on
/// the path is locked at radius `rho + delta*v` and captured at `rho`.
/// Among maximal paths the lexicographically smallest id sequence is chosen.
pub fn longest_path_schedule(g: &ReachabilityGraph, p: &ProblemInstance) -> Schedule {
    let Some(order) = g.topological_order() else {
        unreachable!("reachability graphs are acyclic by construction");
    };
    // longest path (in vertices) starting at each vertex
    let mut suffix = vec![1usize; g.vertex_count()];
    for &a in order.iter().rev() {
        if let Some(best) = g.edges[a].iter().map(|&b| suffix[b]).max() {
            suffix[a] = 1 + best;
        }
    }
    let pick = |candidates: &[usize]| -> Option<usize> {
        let need = candidates.iter().map(|&b| suffix[b]).max()?;
        // vertices are sorted by id, so the first hit is the smallest id
        candidates.iter().copied().find(|&b| suffix[b] == need)
    };
    let mut path = Vec::new();
    let mut cursor = pick(&g.source_edges);
    while let Some(a) = cursor {
        path.push(a);
        cursor = pick(&g.edges[a]);
    }
    Schedule::new(
        path.into_iter()
            .map(|k| {
                let capture = (g.radius0[k] - p.rho) / p.v;
                ScheduleStep {
                    id: g.ids[k],
                    lock: capture - p.delta,
                    capture,
                }
            })
            .collect(),
    )
}
