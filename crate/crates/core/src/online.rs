//! Online turret policies.
//!
//! [`Sit`] sweeps the cone back and forth and locks onto whatever is in range
//! when it passes. [`Dpac`] works in epochs: at the start of each epoch it
//! counts intruders on both halves of the cone, including the ones projected
//! to come into range by the time the turret gets back, and serves the
//! heavier side out and back.
//!
//! A few baseline policies ([`Idle`], [`Greedy`], [`RandomTurret`]) are kept
//! here for comparisons and adversary tests.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{Decision, DecisionPoint, Observed, Policy};
use crate::model::{IntruderId, ProblemInstance, EPS};

/// Sweeping turret: turns toward `theta`, reverses at the cone edges (keeps
/// circling when the cone is the full disc), and locks every aligned intruder
/// within `min(r + delta*v, 1)`, one spool-up each.
#[derive(Debug, Clone)]
pub struct Sit {
    direction: i8,
}

impl Sit {
    pub fn new() -> Self {
        Self { direction: 1 }
    }

    pub fn default_gamma0(p: &ProblemInstance) -> f64 {
        -p.theta
    }
}

impl Default for Sit {
    fn default() -> Self {
        Self::new()
    }
}

impl Policy for Sit {
    fn decide(&mut self, dp: &DecisionPoint<'_>) -> Decision {
        let p = dp.instance;
        let gate = (p.r + p.v * p.delta).min(1.0);
        let urgent = dp
            .intruders
            .iter()
            .filter(|o| o.radius <= gate + EPS && dp.is_aligned_with(o.angle()) && dp.can_lock(o.id()))
            .min_by(|a, b| a.radius.total_cmp(&b.radius).then(a.id().cmp(&b.id())));
        if let Some(o) = urgent {
            return Decision::lock(o.id());
        }
        if !p.wraps() {
            let h = dp.heading();
            if self.direction > 0 && h >= p.theta - EPS {
                self.direction = -1;
            } else if self.direction < 0 && h <= -p.theta + EPS {
                self.direction = 1;
            }
        }
        Decision::turn(self.direction)
    }

    fn name(&self) -> &str {
        "sit"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Angles in `[0, theta]`.
    Right,
    /// Angles in `[-theta, 0)`.
    Left,
}

impl Side {
    pub fn sign(self) -> i8 {
        match self {
            Side::Right => 1,
            Side::Left => -1,
        }
    }

    pub fn of(angle: f64) -> Self {
        if angle >= 0.0 {
            Side::Right
        } else {
            Side::Left
        }
    }
}

/// Per-epoch intruder sets, frozen at the epoch start: in range (`right`,
/// `left`) and projected into range by the time the turret returns
/// (`right_projected`, `left_projected`).
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EpochSets {
    pub right: Vec<IntruderId>,
    pub left: Vec<IntruderId>,
    pub right_projected: Vec<IntruderId>,
    pub left_projected: Vec<IntruderId>,
}

impl EpochSets {
    pub fn weight(&self, side: Side) -> usize {
        match side {
            Side::Right => self.right.len() + self.right_projected.len(),
            Side::Left => self.left.len() + self.left_projected.len(),
        }
    }

    /// Heavier side, ties going right.
    pub fn choose(&self) -> Side {
        if self.weight(Side::Right) >= self.weight(Side::Left) {
            Side::Right
        } else {
            Side::Left
        }
    }

    pub fn contains(&self, id: IntruderId) -> bool {
        [&self.right, &self.left, &self.right_projected, &self.left_projected]
            .iter()
            .any(|s| s.contains(&id))
    }

    /// Members the turret commits to when it picks `side`.
    pub fn committed(&self, side: Side) -> impl Iterator<Item = IntruderId> + '_ {
        let (a, b) = match side {
            Side::Right => (&self.right, &self.right_projected),
            Side::Left => (&self.left, &self.left_projected),
        };
        a.iter().chain(b.iter()).copied()
    }
}

/// Outer radius of a projected set given the size of the matching in-range
/// set.
pub fn projected_bound(p: &ProblemInstance, in_range: usize) -> f64 {
    (p.r + (p.theta / p.omega + (in_range as f64 + 1.0) * p.delta) * p.v).min(1.0)
}

/// Computes the four sets from the intruders visible at an epoch start.
pub fn epoch_sets(p: &ProblemInstance, visible: &[Observed]) -> EpochSets {
    let outer = p.lock_outer_radius();
    let mut sets = EpochSets::default();
    for o in visible.iter().filter(|o| o.radius <= outer + EPS) {
        match Side::of(o.angle()) {
            Side::Right => sets.right.push(o.id()),
            Side::Left => sets.left.push(o.id()),
        }
    }
    if outer < 1.0 {
        let right_bound = projected_bound(p, sets.right.len());
        let left_bound = projected_bound(p, sets.left.len());
        for o in visible.iter().filter(|o| o.radius > outer + EPS) {
            match Side::of(o.angle()) {
                Side::Right if o.radius <= right_bound + EPS => sets.right_projected.push(o.id()),
                Side::Left if o.radius <= left_bound + EPS => sets.left_projected.push(o.id()),
                _ => {}
            }
        }
    }
    sets
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Moving to heading 0 before the first epoch.
    Homing,
    Outbound,
    Inbound,
}

/// Snapshot of one DPaC epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochState {
    pub k: usize,
    pub start: f64,
    pub side: Side,
    pub sets: EpochSets,
}

/// Dynamically project and capture.
///
/// Outbound toward the chosen edge it locks only the frozen in-range members
/// of that side, nearest to the centre first; inbound it locks the frozen
/// projected members, outermost angle first. A member whose lock window has
/// closed by the time the turret reaches it is skipped; one that is not yet in
/// range is waited for.
#[derive(Debug, Clone)]
pub struct Dpac {
    phase: Phase,
    side: Side,
    outbound: VecDeque<IntruderId>,
    inbound: VecDeque<IntruderId>,
    epochs: Vec<EpochState>,
    started: bool,
}

impl Dpac {
    pub fn new() -> Self {
        Self {
            phase: Phase::Homing,
            side: Side::Right,
            outbound: VecDeque::new(),
            inbound: VecDeque::new(),
            epochs: Vec::new(),
            started: false,
        }
    }

    pub fn default_gamma0(_p: &ProblemInstance) -> f64 {
        0.0
    }

    pub fn epochs(&self) -> &[EpochState] {
        &self.epochs
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    fn start_epoch(&mut self, dp: &DecisionPoint<'_>) {
        let p = dp.instance;
        let sets = epoch_sets(p, dp.intruders);
        let side = sets.choose();
        let lookup = |id: IntruderId| dp.get(id).expect("set members are visible");
        let order = |ids: &[IntruderId], outward: bool| -> VecDeque<IntruderId> {
            let mut v: Vec<&Observed> = ids.iter().map(|&id| lookup(id)).collect();
            v.sort_by(|a, b| {
                let by_angle = a.angle().abs().total_cmp(&b.angle().abs());
                let by_angle = if outward { by_angle } else { by_angle.reverse() };
                by_angle
                    .then(a.radius.total_cmp(&b.radius))
                    .then(a.id().cmp(&b.id()))
            });
            v.into_iter().map(|o| o.id()).collect()
        };
        let (near, far) = match side {
            Side::Right => (&sets.right, &sets.right_projected),
            Side::Left => (&sets.left, &sets.left_projected),
        };
        self.outbound = order(near, true);
        self.inbound = order(far, false);
        self.side = side;
        self.phase = Phase::Outbound;
        log::trace!("dpac epoch {} at t={} goes {:?}: {:?}", self.epochs.len() + 1, dp.time, side, sets);
        self.epochs.push(EpochState {
            k: self.epochs.len() + 1,
            start: dp.time,
            side,
            sets,
        });
    }

    /// Serves the front of `queue` if the turret is on it. Returns a decision
    /// when the turret must lock or wait here.
    fn serve(queue: &mut VecDeque<IntruderId>, dp: &DecisionPoint<'_>, outward: bool) -> Option<Decision> {
        let p = dp.instance;
        let h = dp.heading().abs();
        while let Some(&id) = queue.front() {
            let Some(o) = dp.get(id) else {
                queue.pop_front();
                continue;
            };
            let behind = if outward {
                o.angle().abs() < h - EPS
            } else {
                o.angle().abs() > h + EPS
            };
            if behind || o.radius < p.lock_inner_radius() - EPS {
                queue.pop_front();
                continue;
            }
            if !dp.is_aligned_with(o.angle()) {
                return None;
            }
            if dp.can_lock(id) {
                queue.pop_front();
                return Some(Decision::lock(id));
            }
            if o.radius > p.lock_outer_radius() {
                let ready = o.intruder.time_at_radius(p.lock_outer_radius(), p.v);
                return Some(Decision::hold().wake_at(ready));
            }
            queue.pop_front();
        }
        None
    }

    fn head_to(dp: &DecisionPoint<'_>, target: f64, direction: i8) -> Decision {
        let gap = (target - dp.heading()).abs();
        Decision::turn(direction).wake_at(dp.time + gap / dp.instance.omega)
    }
}

impl Default for Dpac {
    fn default() -> Self {
        Self::new()
    }
}

impl Policy for Dpac {
    fn decide(&mut self, dp: &DecisionPoint<'_>) -> Decision {
        let p = dp.instance;
        if !self.started {
            self.started = true;
            self.phase = Phase::Homing;
        }
        // bounded: each pass either returns or advances the phase
        for _ in 0..4 {
            match self.phase {
                Phase::Homing => {
                    if dp.heading().abs() <= EPS {
                        self.start_epoch(dp);
                        continue;
                    }
                    let dir = if dp.heading() > 0.0 { -1 } else { 1 };
                    return Self::head_to(dp, 0.0, dir);
                }
                Phase::Outbound => {
                    if let Some(d) = Self::serve(&mut self.outbound, dp, true) {
                        return d;
                    }
                    let edge = f64::from(self.side.sign()) * p.theta;
                    if (dp.heading() - edge).abs() <= EPS {
                        self.phase = Phase::Inbound;
                        continue;
                    }
                    return Self::head_to(dp, edge, self.side.sign());
                }
                Phase::Inbound => {
                    if let Some(d) = Self::serve(&mut self.inbound, dp, false) {
                        return d;
                    }
                    if dp.heading().abs() <= EPS {
                        self.inbound.clear();
                        self.start_epoch(dp);
                        continue;
                    }
                    return Self::head_to(dp, 0.0, -self.side.sign());
                }
            }
        }
        Decision::hold()
    }

    fn name(&self) -> &str {
        "dpac"
    }
}

/// Never moves, never locks.
#[derive(Debug, Clone, Default)]
pub struct Idle;

impl Policy for Idle {
    fn decide(&mut self, _dp: &DecisionPoint<'_>) -> Decision {
        Decision::hold()
    }

    fn name(&self) -> &str {
        "idle"
    }
}

/// Turns to a fixed post and locks whatever lines up with it there.
#[derive(Debug, Clone)]
pub struct Sentry {
    pub post: f64,
}

impl Sentry {
    pub fn new(post: f64) -> Self {
        Self { post }
    }
}

impl Policy for Sentry {
    fn decide(&mut self, dp: &DecisionPoint<'_>) -> Decision {
        let p = dp.instance;
        if !dp.is_aligned_with(self.post) {
            let dir = p.direction_toward(dp.heading(), self.post);
            return Decision::turn(dir).wake_at(dp.time + p.travel_time(dp.heading(), self.post));
        }
        let mut here: Vec<&Observed> = dp
            .intruders
            .iter()
            .filter(|o| dp.is_aligned_with(o.angle()))
            .collect();
        here.sort_by(|a, b| a.radius.total_cmp(&b.radius).then(a.id().cmp(&b.id())));
        if let Some(o) = here.iter().find(|o| dp.can_lock(o.id())) {
            return Decision::lock(o.id());
        }
        // wake when the next one comes into range
        let next = here
            .iter()
            .filter(|o| o.radius > p.lock_outer_radius())
            .map(|o| o.intruder.time_at_radius(p.lock_outer_radius(), p.v))
            .min_by(f64::total_cmp);
        match next {
            Some(t) => Decision::hold().wake_at(t),
            None => Decision::hold(),
        }
    }

    fn name(&self) -> &str {
        "sentry"
    }
}

/// Earliest-deadline-first: chases the visible intruder whose lock window
/// closes soonest among those it can still reach, waits for it to come into
/// range, and locks.
#[derive(Debug, Clone, Default)]
pub struct Greedy;

impl Policy for Greedy {
    fn decide(&mut self, dp: &DecisionPoint<'_>) -> Decision {
        let p = dp.instance;
        let target = dp
            .intruders
            .iter()
            .filter_map(|o| {
                let deadline = o.intruder.time_at_radius(p.lock_inner_radius(), p.v);
                let arrive = dp.time + p.travel_time(dp.heading(), o.angle());
                (arrive <= deadline + EPS).then_some((deadline, o))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id().cmp(&b.1.id())));
        let Some((_, o)) = target else {
            return Decision::hold();
        };
        if dp.is_aligned_with(o.angle()) {
            if dp.can_lock(o.id()) {
                return Decision::lock(o.id());
            }
            let ready = o.intruder.time_at_radius(p.lock_outer_radius(), p.v);
            return Decision::hold().wake_at(ready);
        }
        let dir = p.direction_toward(dp.heading(), o.angle());
        Decision::turn(dir).wake_at(dp.time + p.travel_time(dp.heading(), o.angle()))
    }

    fn name(&self) -> &str {
        "greedy"
    }
}

/// Seeded random controller: locks an aligned lockable intruder with
/// probability one half, otherwise picks a random direction for a random
/// stretch of time.
#[derive(Debug, Clone)]
pub struct RandomTurret {
    rng: ChaCha8Rng,
}

impl RandomTurret {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomTurret {
    fn decide(&mut self, dp: &DecisionPoint<'_>) -> Decision {
        let lockable: Vec<IntruderId> = dp
            .intruders
            .iter()
            .filter(|o| dp.can_lock(o.id()))
            .map(|o| o.id())
            .collect();
        if !lockable.is_empty() && self.rng.gen_bool(0.5) {
            return Decision::lock(lockable[self.rng.gen_range(0..lockable.len())]);
        }
        let dir = self.rng.gen_range(-1i8..=1);
        let stretch = self.rng.gen_range(0.0..=dp.instance.theta / dp.instance.omega);
        Decision::turn(dir).wake_at(dp.time + stretch.max(1e-3))
    }

    fn name(&self) -> &str {
        "random"
    }
}

/// Policies selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Sit,
    Dpac,
    Greedy,
    Idle,
    Random,
}

impl PolicyKind {
    /// Builds a fresh policy; `seed` only matters for the random policy.
    pub fn build(self, seed: u64) -> Box<dyn Policy> {
        match self {
            PolicyKind::Sit => Box::new(Sit::new()),
            PolicyKind::Dpac => Box::new(Dpac::new()),
            PolicyKind::Greedy => Box::new(Greedy),
            PolicyKind::Idle => Box::new(Idle),
            PolicyKind::Random => Box::new(RandomTurret::new(seed)),
        }
    }

    /// Starting heading each policy's guarantees assume.
    pub fn default_gamma0(self, p: &ProblemInstance) -> f64 {
        match self {
            PolicyKind::Sit => Sit::default_gamma0(p),
            _ => 0.0,
        }
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sit" => Ok(PolicyKind::Sit),
            "dpac" => Ok(PolicyKind::Dpac),
            "greedy" => Ok(PolicyKind::Greedy),
            "idle" => Ok(PolicyKind::Idle),
            "random" => Ok(PolicyKind::Random),
            other => Err(format!("unknown policy '{other}' (expected sit, dpac, greedy, idle, random)")),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PolicyKind::Sit => "sit",
            PolicyKind::Dpac => "dpac",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Idle => "idle",
            PolicyKind::Random => "random",
        };
        f.write_str(s)
    }
}
