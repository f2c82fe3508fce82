//! Continuous-time, event-driven simulation of the capture game.
//!
//! The engine jumps between exact event instants (releases, alignments,
//! boundary hits, spool-up completions, breaches and policy wake-ups) and
//! consults the policy whenever the turret is free to act. Control is
//! bang-off-bang: a policy either turns at full speed in one direction, holds
//! still, or locks onto an aligned intruder.
//!
//! Simultaneous events resolve as: spool-up completions, then breaches, then
//! releases. A capture completing at the exact breach instant of its target
//! therefore counts as a capture.

use std::collections::BTreeMap;

use log::{debug, trace};
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    CaptureRecord, Event, EventKind, InputSequence, Intruder, IntruderId, LossRecord,
    ProblemInstance, SimulationResult, TurretMode, TurretState, Violation, EPS,
};

/// Why the policy is being consulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Start,
    Release,
    Alignment,
    SpoolComplete,
    Breach,
    Boundary,
    WakeUp,
}

/// A released, still-active intruder as seen by the policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observed {
    pub intruder: Intruder,
    pub radius: f64,
}

impl Observed {
    pub fn id(&self) -> IntruderId {
        self.intruder.id
    }

    pub fn angle(&self) -> f64 {
        self.intruder.angle
    }
}

/// Everything a policy may look at when it decides.
#[derive(Debug)]
pub struct DecisionPoint<'a> {
    pub time: f64,
    pub state: TurretState,
    pub triggers: &'a [Trigger],
    /// Released intruders that are neither captured nor lost, by id.
    pub intruders: &'a [Observed],
    pub instance: &'a ProblemInstance,
}

impl DecisionPoint<'_> {
    pub fn heading(&self) -> f64 {
        self.state.heading
    }

    pub fn get(&self, id: IntruderId) -> Option<&Observed> {
        self.intruders.iter().find(|o| o.id() == id)
    }

    pub fn has_trigger(&self, t: Trigger) -> bool {
        self.triggers.contains(&t)
    }

    pub fn is_aligned_with(&self, angle: f64) -> bool {
        self.instance.angular_gap(self.state.heading, angle) <= EPS
    }

    /// Whether locking onto `id` right now would be accepted by the engine.
    pub fn can_lock(&self, id: IntruderId) -> bool {
        self.get(id)
            .is_some_and(|o| lock_legal(&self.state, &o.intruder, self.time, self.instance))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PolicyDecision {
    /// Turn at `direction * omega`; 0 holds the current heading.
    Turn(i8),
    /// Begin the non-preemptible spool-up on an aligned intruder.
    Lock(IntruderId),
}

/// A policy's answer: an action plus an optional request to be consulted
/// again at a given time. Each decision replaces any earlier wake-up request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: PolicyDecision,
    pub wake_at: Option<f64>,
}

impl Decision {
    pub fn turn(direction: i8) -> Self {
        Self {
            action: PolicyDecision::Turn(direction),
            wake_at: None,
        }
    }

    pub fn hold() -> Self {
        Self::turn(0)
    }

    pub fn lock(id: IntruderId) -> Self {
        Self {
            action: PolicyDecision::Lock(id),
            wake_at: None,
        }
    }

    pub fn wake_at(mut self, t: f64) -> Self {
        self.wake_at = Some(t);
        self
    }
}

/// A turret controller. Implementations are stateful and bound to one run.
pub trait Policy {
    fn decide(&mut self, dp: &DecisionPoint<'_>) -> Decision;

    fn name(&self) -> &str {
        "policy"
    }
}

/// Where intruders come from. Static sequences and adaptive adversaries both
/// implement this; adaptive sources see every logged event as it happens.
pub trait ReleaseSource {
    /// Time of the next pending release, if any.
    fn next_release_time(&self) -> Option<f64>;

    /// Removes and returns every release due at or before `now`.
    fn take_due(&mut self, now: f64) -> Vec<Intruder>;

    fn observe(&mut self, _event: &Event, _state: &TurretState) {}
}

/// Replays a fixed list of intruders in release order.
#[derive(Debug, Clone)]
pub struct StaticSource {
    pending: Vec<Intruder>,
    cursor: usize,
}

impl StaticSource {
    pub fn new(intruders: &[Intruder]) -> Self {
        let mut pending = intruders.to_vec();
        pending.sort_by(|a, b| {
            a.release_time
                .total_cmp(&b.release_time)
                .then(a.id.cmp(&b.id))
        });
        Self { pending, cursor: 0 }
    }
}

impl From<&InputSequence> for StaticSource {
    fn from(seq: &InputSequence) -> Self {
        Self::new(&seq.intruders())
    }
}

impl ReleaseSource for StaticSource {
    fn next_release_time(&self) -> Option<f64> {
        self.pending.get(self.cursor).map(|i| i.release_time)
    }

    fn take_due(&mut self, now: f64) -> Vec<Intruder> {
        let start = self.cursor;
        while self
            .pending
            .get(self.cursor)
            .is_some_and(|i| i.release_time <= now)
        {
            self.cursor += 1;
        }
        self.pending[start..self.cursor].to_vec()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid instance: {}", join_violations(.0))]
    InvalidInstance(Vec<Violation>),
    #[error("initial heading {gamma0} outside [-theta, theta]")]
    InvalidStart { gamma0: f64 },
    #[error("illegal lock on intruder {id} at t={time} (triggers {triggers:?}): {reason}")]
    IllegalLock {
        time: f64,
        id: IntruderId,
        triggers: Vec<Trigger>,
        reason: String,
    },
    #[error("source released more than n_max = {n_max} intruders")]
    TooManyIntruders { n_max: usize },
    #[error("source released intruder id {id} twice")]
    DuplicateId { id: IntruderId },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Lock-on legality: aligned within `EPS` and the intruder's radius inside
/// `[rho + delta*v, r + delta*v]`, so that the capture after `delta` lands in
/// `[rho, r]`.
pub fn lock_legal(state: &TurretState, j: &Intruder, t: f64, p: &ProblemInstance) -> bool {
    if t < j.release_time {
        return false;
    }
    p.angular_gap(state.heading, j.angle) <= EPS && p.lock_radius_ok(j.radius_unchecked(t, p.v))
}

/// Runs `policy` against `source` from heading `gamma0` until every released
/// intruder is resolved, or until `horizon`.
pub fn simulate(
    p: &ProblemInstance,
    source: &mut dyn ReleaseSource,
    policy: &mut dyn Policy,
    gamma0: f64,
    horizon: f64,
) -> Result<SimulationResult, EngineError> {
    let violations = p.validate();
    if !violations.is_empty() {
        return Err(EngineError::InvalidInstance(violations));
    }
    if !p.angle_in_range(gamma0) {
        return Err(EngineError::InvalidStart { gamma0 });
    }
    Sim::new(p, source, policy, gamma0, horizon).run()
}

/// Convenience wrapper for a static input sequence.
pub fn simulate_sequence(
    p: &ProblemInstance,
    seq: &InputSequence,
    policy: &mut dyn Policy,
    gamma0: f64,
    horizon: f64,
) -> Result<SimulationResult, EngineError> {
    let mut source = StaticSource::from(seq);
    simulate(p, &mut source, policy, gamma0, horizon)
}

struct Sim<'a> {
    p: &'a ProblemInstance,
    source: &'a mut dyn ReleaseSource,
    policy: &'a mut dyn Policy,
    horizon: f64,
    t: f64,
    heading: f64,
    direction: i8,
    spool: Option<(IntruderId, f64)>,
    wake: Option<f64>,
    alive: BTreeMap<IntruderId, Intruder>,
    seen: usize,
    result: SimulationResult,
}

impl<'a> Sim<'a> {
    fn new(
        p: &'a ProblemInstance,
        source: &'a mut dyn ReleaseSource,
        policy: &'a mut dyn Policy,
        gamma0: f64,
        horizon: f64,
    ) -> Self {
        Self {
            p,
            source,
            policy,
            horizon,
            t: 0.0,
            heading: gamma0,
            direction: 0,
            spool: None,
            wake: None,
            alive: BTreeMap::new(),
            seen: 0,
            result: SimulationResult::default(),
        }
    }

    fn state(&self) -> TurretState {
        TurretState {
            heading: self.heading,
            mode: match self.spool {
                Some((target, completes_at)) => TurretMode::SpoolingUp {
                    target,
                    completes_at,
                },
                None => TurretMode::Turning {
                    direction: self.direction,
                },
            },
        }
    }

    fn log(&mut self, kind: EventKind) {
        let event = Event { t: self.t, kind };
        trace!("{:?}", event);
        let state = self.state();
        self.source.observe(&event, &state);
        self.result.events.push(event);
    }

    fn run(mut self) -> Result<SimulationResult, EngineError> {
        let mut triggers = vec![Trigger::Start];
        if self.absorb_releases()? {
            triggers.push(Trigger::Release);
        }
        loop {
            self.consult(&triggers)?;
            // an adaptive source may react to the decision at the same instant
            while self
                .source
                .next_release_time()
                .is_some_and(|rt| rt <= self.t)
            {
                self.absorb_releases()?;
                self.consult(&[Trigger::Release])?;
            }

            if self.source.next_release_time().is_none()
                && self.alive.is_empty()
                && self.spool.is_none()
            {
                break;
            }
            let Some(next) = self.next_event_time() else {
                break;
            };
            if next > self.horizon {
                self.advance_to(self.horizon);
                self.result.pending = self.alive.keys().copied().collect();
                break;
            }
            triggers = self.step(next)?;
        }
        debug!(
            "{}: captured {} lost {} of {} released",
            self.policy.name(),
            self.result.captured.len(),
            self.result.lost.len(),
            self.result.released
        );
        Ok(self.result)
    }

    fn consult(&mut self, triggers: &[Trigger]) -> Result<(), EngineError> {
        if self.spool.is_some() {
            return Ok(());
        }
        let observed: Vec<Observed> = self
            .alive
            .values()
            .map(|i| Observed {
                intruder: *i,
                radius: i.radius_unchecked(self.t, self.p.v),
            })
            .collect();
        let dp = DecisionPoint {
            time: self.t,
            state: self.state(),
            triggers,
            intruders: &observed,
            instance: self.p,
        };
        let decision = self.policy.decide(&dp);
        self.wake = decision.wake_at.filter(|&w| w > self.t);
        match decision.action {
            PolicyDecision::Turn(d) => {
                let d = self.clamp_direction(d.signum());
                if d != self.direction {
                    self.direction = d;
                    self.log(EventKind::Turn {
                        heading: self.heading,
                        direction: d,
                    });
                }
            }
            PolicyDecision::Lock(id) => {
                let illegal = |reason: String| EngineError::IllegalLock {
                    time: self.t,
                    id,
                    triggers: triggers.to_vec(),
                    reason,
                };
                let Some(target) = self.alive.get(&id).copied() else {
                    return Err(illegal("intruder is not active".into()));
                };
                let state = self.state();
                if !lock_legal(&state, &target, self.t, self.p) {
                    let z = target.radius_unchecked(self.t, self.p.v);
                    return Err(illegal(format!(
                        "heading {} vs angle {}, radius {} vs window [{}, {}]",
                        self.heading,
                        target.angle,
                        z,
                        self.p.lock_inner_radius(),
                        self.p.lock_outer_radius()
                    )));
                }
                self.direction = 0;
                self.spool = Some((id, self.t + self.p.delta));
                self.log(EventKind::Lock {
                    id,
                    heading: self.heading,
                    radius: target.radius_unchecked(self.t, self.p.v),
                });
            }
        }
        Ok(())
    }

    /// Turning outward at a cone edge is a no-op.
    fn clamp_direction(&self, d: i8) -> i8 {
        if self.p.wraps() || d == 0 {
            return d;
        }
        let edge = f64::from(d) * self.p.theta;
        if (self.heading - edge).abs() <= EPS {
            0
        } else {
            d
        }
    }

    /// Returns whether anything was released.
    fn absorb_releases(&mut self) -> Result<bool, EngineError> {
        let due = self.source.take_due(self.t);
        let any = !due.is_empty();
        for i in due {
            if self.seen >= self.p.n_max {
                return Err(EngineError::TooManyIntruders { n_max: self.p.n_max });
            }
            if self.alive.contains_key(&i.id) {
                return Err(EngineError::DuplicateId { id: i.id });
            }
            self.seen += 1;
            self.result.released += 1;
            self.alive.insert(i.id, i);
            self.log(EventKind::Release {
                id: i.id,
                angle: i.angle,
                radius: i.radius_unchecked(self.t, self.p.v),
            });
        }
        Ok(any)
    }

    fn spool_target(&self) -> Option<IntruderId> {
        self.spool.map(|(id, _)| id)
    }

    /// Forward angular distance to `angle` when turning in `direction`. On a
    /// wrapping cone an angle the turret is on now comes round again after a
    /// full turn; otherwise it is `None`.
    fn forward_gap(&self, angle: f64) -> Option<f64> {
        let d = f64::from(self.direction);
        let full = 2.0 * std::f64::consts::PI;
        if self.p.wraps() {
            let gap = (d * (angle - self.heading)).rem_euclid(full);
            return Some(if gap <= EPS || gap >= full - EPS { full } else { gap });
        }
        let gap = d * (angle - self.heading);
        (gap > EPS).then_some(gap)
    }

    /// Next instant the turning turret lines up with an active intruder, and
    /// that intruder's angle.
    fn alignment(&self) -> Option<(f64, f64)> {
        if self.spool.is_some() || self.direction == 0 {
            return None;
        }
        self.alive
            .values()
            .filter_map(|i| self.forward_gap(i.angle).map(|g| (self.t + g / self.p.omega, i.angle)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    fn boundary_time(&self) -> Option<f64> {
        if self.spool.is_some() || self.direction == 0 || self.p.wraps() {
            return None;
        }
        let edge = f64::from(self.direction) * self.p.theta;
        let dist = (edge - self.heading).abs();
        (dist > EPS).then(|| self.t + dist / self.p.omega)
    }

    fn next_event_time(&self) -> Option<f64> {
        let target = self.spool_target();
        let breach = self
            .alive
            .values()
            .filter(|i| Some(i.id) != target)
            .map(|i| i.breach_time(self.p))
            .min_by(f64::total_cmp);
        let wake = if self.spool.is_some() { None } else { self.wake };
        [
            self.source.next_release_time(),
            self.spool.map(|(_, c)| c),
            breach,
            self.alignment().map(|a| a.0),
            self.boundary_time(),
            wake,
        ]
        .into_iter()
        .flatten()
        .map(|t| t.max(self.t))
        .min_by(f64::total_cmp)
    }

    fn advance_to(&mut self, next: f64) {
        if self.spool.is_none() && self.direction != 0 {
            let h = self.heading + f64::from(self.direction) * self.p.omega * (next - self.t);
            self.heading = self.p.normalize_heading(h);
        }
        self.t = next;
    }

    fn step(&mut self, next: f64) -> Result<Vec<Trigger>, EngineError> {
        let align = self.alignment().filter(|a| a.0 == next).map(|a| a.1);
        let boundary = self.boundary_time() == Some(next);
        let wake = self.spool.is_none() && self.wake == Some(next);
        self.advance_to(next);
        let mut triggers = Vec::new();

        if let Some((id, completes_at)) = self.spool {
            if completes_at <= self.t {
                self.spool = None;
                let target = self.alive.remove(&id).expect("spool target is active");
                let z = target.radius_unchecked(self.t, self.p.v);
                if self.p.capture_radius_ok(z) {
                    self.result.captured.push(CaptureRecord {
                        id,
                        time: self.t,
                        radius: z,
                    });
                    self.log(EventKind::Capture {
                        id,
                        heading: self.heading,
                        radius: z,
                    });
                } else {
                    self.result.lost.push(LossRecord { id, time: self.t });
                    self.log(EventKind::Breach {
                        id,
                        angle: target.angle,
                    });
                }
                triggers.push(Trigger::SpoolComplete);
            }
        }

        let target = self.spool_target();
        let breached: Vec<Intruder> = self
            .alive
            .values()
            .filter(|i| Some(i.id) != target && i.breach_time(self.p) <= self.t)
            .copied()
            .collect();
        for i in &breached {
            self.alive.remove(&i.id);
            self.result.lost.push(LossRecord {
                id: i.id,
                time: self.t,
            });
            self.log(EventKind::Breach {
                id: i.id,
                angle: i.angle,
            });
        }
        if !breached.is_empty() {
            triggers.push(Trigger::Breach);
        }

        if self.absorb_releases()? {
            triggers.push(Trigger::Release);
        }

        if let Some(angle) = align {
            // absorb rounding drift accumulated while turning
            self.heading = self.p.normalize_heading(angle);
            triggers.push(Trigger::Alignment);
        }
        if boundary {
            self.heading = f64::from(self.direction) * self.p.theta;
            self.direction = 0;
            self.log(EventKind::Turn {
                heading: self.heading,
                direction: 0,
            });
            triggers.push(Trigger::Boundary);
        }
        if wake {
            self.wake = None;
            triggers.push(Trigger::WakeUp);
        }
        Ok(triggers)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule step {index} names unknown intruder {id}")]
    UnknownIntruder { index: usize, id: IntruderId },
    #[error("schedule step {index} repeats intruder {id}")]
    DuplicateIntruder { index: usize, id: IntruderId },
    #[error("overlapping spool-up: step {index} (intruder {id}) locks {gap} after the previous lock, less than delta")]
    OverlappingSpoolUp {
        index: usize,
        id: IntruderId,
        gap: f64,
    },
    #[error("step {index} (intruder {id}) locks at {lock} but the turret cannot be aligned before {earliest}")]
    InsufficientTravel {
        index: usize,
        id: IntruderId,
        lock: f64,
        earliest: f64,
    },
    #[error("step {index} (intruder {id}) is infeasible: {reason}")]
    Infeasible {
        index: usize,
        id: IntruderId,
        reason: String,
    },
    #[error(transparent)]
    Engine(EngineError),
}

/// Replays a timed list of `(intruder, lock time)` pairs through the engine.
/// Succeeds only if exactly the scheduled intruders are captured.
pub fn run_fixed_schedule(
    p: &ProblemInstance,
    intruders: &[Intruder],
    schedule: &[(IntruderId, f64)],
    gamma0: f64,
) -> Result<SimulationResult, ScheduleError> {
    let by_id: BTreeMap<IntruderId, &Intruder> = intruders.iter().map(|i| (i.id, i)).collect();
    let mut heading = gamma0;
    let mut ready = 0.0;
    let mut last_lock: Option<f64> = None;
    let mut used = std::collections::BTreeSet::new();
    let mut targets = Vec::with_capacity(schedule.len());
    for (index, &(id, lock)) in schedule.iter().enumerate() {
        let Some(target) = by_id.get(&id) else {
            return Err(ScheduleError::UnknownIntruder { index, id });
        };
        if !used.insert(id) {
            return Err(ScheduleError::DuplicateIntruder { index, id });
        }
        if let Some(prev) = last_lock {
            if lock - prev < p.delta - EPS {
                return Err(ScheduleError::OverlappingSpoolUp {
                    index,
                    id,
                    gap: lock - prev,
                });
            }
        }
        let earliest = ready + p.travel_time(heading, target.angle);
        if lock < earliest - EPS {
            return Err(ScheduleError::InsufficientTravel {
                index,
                id,
                lock,
                earliest,
            });
        }
        targets.push((id, target.angle, lock));
        heading = target.angle;
        ready = lock + p.delta;
        last_lock = Some(lock);
    }

    let mut policy = ReplayPolicy {
        steps: targets,
        next: 0,
    };
    let mut source = StaticSource::new(intruders);
    let result = simulate(p, &mut source, &mut policy, gamma0, f64::INFINITY).map_err(|e| {
        match e {
            EngineError::IllegalLock { id, reason, .. } => {
                let index = schedule.iter().position(|s| s.0 == id).unwrap_or(0);
                ScheduleError::Infeasible { index, id, reason }
            }
            other => ScheduleError::Engine(other),
        }
    })?;
    for (index, &(id, _)) in schedule.iter().enumerate() {
        if !result.was_captured(id) {
            return Err(ScheduleError::Infeasible {
                index,
                id,
                reason: "not captured on replay".into(),
            });
        }
    }
    Ok(result)
}

/// Turns toward each scheduled target, waits for its lock time, locks.
struct ReplayPolicy {
    steps: Vec<(IntruderId, f64, f64)>,
    next: usize,
}

impl Policy for ReplayPolicy {
    fn decide(&mut self, dp: &DecisionPoint<'_>) -> Decision {
        let Some(&(id, angle, lock)) = self.steps.get(self.next) else {
            return Decision::hold();
        };
        let p = dp.instance;
        let gap = p.angular_gap(dp.heading(), angle);
        if gap > EPS {
            let dir = p.direction_toward(dp.heading(), angle);
            return Decision::turn(dir).wake_at(dp.time + gap / p.omega);
        }
        if dp.time + EPS < lock {
            return Decision::hold().wake_at(lock);
        }
        self.next += 1;
        Decision::lock(id)
    }

    fn name(&self) -> &str {
        "replay"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inst() -> ProblemInstance {
        ProblemInstance {
            theta: std::f64::consts::FRAC_PI_4,
            rho: 0.5,
            v: 0.1,
            omega: 1.0,
            r: 1.0,
            n_max: 10,
            delta: 0.01,
        }
    }

    /// Waits where it is and locks anything aligned as soon as it is legal.
    struct WaitAndLock;

    impl Policy for WaitAndLock {
        fn decide(&mut self, dp: &DecisionPoint<'_>) -> Decision {
            let mut best: Option<&Observed> = None;
            for o in dp.intruders.iter().filter(|o| dp.is_aligned_with(o.angle())) {
                if dp.can_lock(o.id()) {
                    return Decision::lock(o.id());
                }
                if o.radius > dp.instance.lock_outer_radius()
                    && best.is_none_or(|b| o.radius < b.radius)
                {
                    best = Some(o);
                }
            }
            match best {
                Some(o) => Decision::hold().wake_at(
                    o.intruder
                        .time_at_radius(dp.instance.lock_outer_radius(), dp.instance.v),
                ),
                None => Decision::hold(),
            }
        }
    }

    #[test]
    fn lock_window_examples() {
        let p = inst();
        let aligned = TurretState {
            heading: 0.0,
            mode: TurretMode::Turning { direction: 0 },
        };
        let j = Intruder::new(0, 0.0, 0.0, 1.0);
        assert!(lock_legal(&aligned, &j, 0.0, &p));
        // z = rho + delta v exactly
        let t_edge = j.time_at_radius(p.lock_inner_radius(), p.v);
        assert!(lock_legal(&aligned, &j, t_edge, &p));
        assert!(!lock_legal(&aligned, &j, t_edge + 1e-6, &p));
        let off = TurretState {
            heading: 1e-6,
            ..aligned
        };
        assert!(!lock_legal(&off, &j, 0.0, &p));
    }

    #[test]
    fn empty_sequence_yields_empty_result() {
        let r = simulate_sequence(&inst(), &InputSequence::empty(), &mut WaitAndLock, 0.0, 100.0)
            .unwrap();
        assert!(r.captured.is_empty() && r.lost.is_empty());
    }

    #[test]
    fn single_intruder_is_captured_after_delta() {
        let mut s = InputSequence::empty();
        s.push(0.0, vec![0.0]);
        let r = simulate_sequence(&inst(), &s, &mut WaitAndLock, 0.0, 100.0).unwrap();
        assert_eq!(r.captured.len(), 1);
        assert_relative_eq!(r.captured[0].time, 0.01, epsilon = 1e-12);
        assert_relative_eq!(r.captured[0].radius, 0.999, epsilon = 1e-12);
    }

    #[test]
    fn collocated_intruders_take_n_delta() {
        let mut s = InputSequence::empty();
        s.push(0.0, vec![0.0, 0.0, 0.0]);
        let r = simulate_sequence(&inst(), &s, &mut WaitAndLock, 0.0, 100.0).unwrap();
        let times: Vec<f64> = r.captured.iter().map(|c| c.time).collect();
        assert_eq!(times.len(), 3);
        for (k, t) in times.iter().enumerate() {
            assert_relative_eq!(*t, 0.01 * (k + 1) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn capture_at_breach_instant_wins() {
        // r = rho: the only legal lock is at z = rho + delta v
        let p = ProblemInstance { r: 0.5, ..inst() };
        let i = Intruder::at_start(0, 0.7, 0.0);
        let lock = i.time_at_radius(p.lock_inner_radius(), p.v);
        let r = run_fixed_schedule(&p, &[i], &[(0, lock)], 0.0).unwrap();
        assert_eq!(r.captured.len(), 1);
        assert_relative_eq!(r.captured[0].radius, 0.5, epsilon = 1e-9);
        assert_relative_eq!(r.captured[0].time, i.breach_time(&p), epsilon = 1e-9);
    }

    #[test]
    fn unattended_intruder_is_lost_at_breach() {
        let mut s = InputSequence::empty();
        s.push(1.0, vec![0.5]);
        let r = simulate_sequence(&inst(), &s, &mut WaitAndLock, 0.0, 100.0).unwrap();
        assert_eq!(r.lost.len(), 1);
        assert_relative_eq!(r.lost[0].time, 6.0, epsilon = 1e-12);
    }

    struct BadLock;
    impl Policy for BadLock {
        fn decide(&mut self, dp: &DecisionPoint<'_>) -> Decision {
            match dp.intruders.first() {
                Some(o) => Decision::lock(o.id()),
                None => Decision::hold(),
            }
        }
    }

    #[test]
    fn illegal_lock_aborts_with_context() {
        let mut s = InputSequence::empty();
        s.push(0.5, vec![0.3]);
        let err = simulate_sequence(&inst(), &s, &mut BadLock, 0.0, 100.0).unwrap_err();
        match err {
            EngineError::IllegalLock { id, time, triggers, .. } => {
                assert_eq!(id, 0);
                assert_eq!(time, 0.5);
                assert!(triggers.contains(&Trigger::Release));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn too_many_releases_are_rejected() {
        let p = ProblemInstance { n_max: 2, ..inst() };
        let mut source = StaticSource::new(&[
            Intruder::new(0, 0.0, 0.0, 1.0),
            Intruder::new(1, 0.0, 0.1, 1.0),
            Intruder::new(2, 0.5, 0.2, 1.0),
        ]);
        let err = simulate(&p, &mut source, &mut WaitAndLock, 0.0, 100.0).unwrap_err();
        assert_eq!(err, EngineError::TooManyIntruders { n_max: 2 });
    }

    #[test]
    fn replay_rejects_overlapping_spool_ups() {
        let p = inst();
        let a = Intruder::at_start(0, 0.9, 0.0);
        let b = Intruder::at_start(1, 0.9, 0.0);
        let err = run_fixed_schedule(&p, &[a, b], &[(0, 0.0), (1, 0.005)], 0.0).unwrap_err();
        assert!(matches!(err, ScheduleError::OverlappingSpoolUp { index: 1, .. }));
        assert!(err.to_string().contains("overlapping spool-up"));
    }

    #[test]
    fn replay_of_empty_schedule_captures_nothing() {
        let p = inst();
        let a = Intruder::at_start(0, 0.9, 0.0);
        let r = run_fixed_schedule(&p, &[a], &[], 0.0).unwrap();
        assert!(r.captured.is_empty());
        assert_eq!(r.lost_ids(), vec![0]);
    }

    #[test]
    fn replay_turns_then_waits() {
        let p = ProblemInstance { r: 0.8, ..inst() };
        let a = Intruder::at_start(0, 0.95, 0.5);
        // in range at z = 0.801 -> t = 1.49
        let lock = a.time_at_radius(p.lock_outer_radius(), p.v);
        let r = run_fixed_schedule(&p, &[a], &[(0, lock)], -0.5).unwrap();
        assert_relative_eq!(r.captured[0].time, lock + p.delta, epsilon = 1e-12);
        assert_relative_eq!(r.captured[0].radius, 0.8, epsilon = 1e-9);
        // too early for travel
        let err = run_fixed_schedule(&p, &[a], &[(0, 0.5)], -0.5).unwrap_err();
        assert!(matches!(err, ScheduleError::InsufficientTravel { .. }));
        // reachable but out of range at that time
        let err = run_fixed_schedule(&p, &[a], &[(0, 1.2)], -0.5).unwrap_err();
        assert!(matches!(err, ScheduleError::Infeasible { index: 0, id: 0, .. }), "{err:?}");
    }

    #[test]
    fn wrap_around_turning() {
        let p = ProblemInstance {
            theta: std::f64::consts::PI,
            ..inst()
        };
        let a = Intruder::at_start(0, 0.9, -3.0);
        // 3.0 -> -3.0 is 2π - 6 the short way, through ±π
        let lock = p.travel_time(3.0, -3.0);
        let r = run_fixed_schedule(&p, &[a], &[(0, lock)], 3.0).unwrap();
        assert_eq!(r.captured.len(), 1);
    }

    /// Keeps turning and locks whatever it meets that is lockable.
    struct Circle;

    impl Policy for Circle {
        fn decide(&mut self, dp: &DecisionPoint<'_>) -> Decision {
            match dp.intruders.iter().find(|o| dp.can_lock(o.id())) {
                Some(o) => Decision::lock(o.id()),
                None => Decision::turn(1),
            }
        }
    }

    #[test]
    fn full_circle_comes_back_round() {
        let p = ProblemInstance {
            theta: std::f64::consts::PI,
            r: 0.8,
            v: 0.05,
            ..inst()
        };
        // aligned at the start but out of range; reachable only on a later lap
        let mut s = InputSequence::empty();
        s.push(0.0, vec![std::f64::consts::PI]);
        let r = simulate_sequence(&p, &s, &mut Circle, -std::f64::consts::PI, 100.0).unwrap();
        assert_eq!(r.captured.len(), 1);
        let lap = 2.0 * std::f64::consts::PI / p.omega;
        let lock = r.captured[0].time - p.delta;
        assert!(((lock / lap).round() * lap - lock).abs() < 1e-9);
    }

    #[test]
    fn identical_runs_give_identical_logs() {
        let mut s = InputSequence::empty();
        s.push(0.0, vec![0.0, 0.2]);
        s.push(0.3, vec![0.0]);
        let a = simulate_sequence(&inst(), &s, &mut WaitAndLock, 0.0, 100.0).unwrap();
        let b = simulate_sequence(&inst(), &s, &mut WaitAndLock, 0.0, 100.0).unwrap();
        assert_eq!(a.event_log_jsonl(), b.event_log_jsonl());
    }
}
