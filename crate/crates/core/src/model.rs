//! Domain types shared by every other module: the game parameters, intruders,
//! input sequences, turret state and simulation results, plus the kinematic
//! helpers (radial motion and turret travel time).

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for "heading equals intruder angle" and for radius-window
/// boundary tests.
pub const EPS: f64 = 1e-9;

pub type IntruderId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("intruder {id} not yet released at t={t} (release at {release_time})")]
    NotYetReleased {
        id: IntruderId,
        t: f64,
        release_time: f64,
    },
    #[error("sequence release times must be non-decreasing (release {index} at t={t})")]
    UnorderedReleases { index: usize, t: f64 },
    #[error("sequence holds {count} intruders, more than n_max = {n_max}")]
    TooManyIntruders { count: usize, n_max: usize },
    #[error("angle {angle} outside [-theta, theta] = [-{theta}, {theta}]")]
    AngleOutOfRange { angle: f64, theta: f64 },
    #[error("release radius {radius} outside (rho, 1] for rho = {rho}")]
    RadiusOutOfRange { radius: f64, rho: f64 },
    #[error("release {index} lists {angles} angles but {radii} radii")]
    RadiusCountMismatch {
        index: usize,
        angles: usize,
        radii: usize,
    },
}

/// The seven parameters of a game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    /// Half-angle of the conical environment, radians.
    pub theta: f64,
    /// Perimeter radius (environment radius is 1).
    pub rho: f64,
    /// Intruder radial speed.
    pub v: f64,
    /// Turret angular speed.
    pub omega: f64,
    /// Turret range.
    pub r: f64,
    /// Maximum number of intruders.
    pub n_max: usize,
    /// Spool-up (service) time.
    pub delta: f64,
}

/// One violated parameter constraint, named by the constraint that failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub constraint: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "violated {}: {}", self.constraint, self.detail)
    }
}

impl ProblemInstance {
    /// Returns every violated parameter constraint. An empty vector means the
    /// instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, constraint: &'static str, detail: String| {
            if !ok {
                out.push(Violation { constraint, detail });
            }
        };
        check(self.rho > 0.0, "0 < rho", format!("rho = {}", self.rho));
        check(self.rho < 1.0, "rho < 1", format!("rho = {}", self.rho));
        check(
            self.rho <= self.r,
            "rho ≤ r",
            format!("rho = {}, r = {}", self.rho, self.r),
        );
        check(self.r <= 1.0, "r ≤ 1", format!("r = {}", self.r));
        check(self.theta > 0.0, "0 < theta", format!("theta = {}", self.theta));
        check(self.theta <= PI, "theta ≤ π", format!("theta = {}", self.theta));
        check(self.v > 0.0, "v > 0", format!("v = {}", self.v));
        check(self.omega > 0.0, "omega > 0", format!("omega = {}", self.omega));
        check(self.delta > 0.0, "delta > 0", format!("delta = {}", self.delta));
        check(self.n_max >= 2, "n_max ≥ 2", format!("n_max = {}", self.n_max));
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// The full circle is the only configuration where the turret may wrap.
    pub fn wraps(&self) -> bool {
        self.theta >= PI
    }

    /// Angular separation the turret has to cover between two headings.
    pub fn angular_gap(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        if self.wraps() {
            let d = d.rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        } else {
            d
        }
    }

    /// Time for the turret to turn from one angle to another at full speed.
    pub fn travel_time(&self, from: f64, to: f64) -> f64 {
        self.angular_gap(from, to) / self.omega
    }

    /// Sign of the turn that moves `from` toward `to` along the shortest
    /// admissible arc. Zero when already aligned.
    pub fn direction_toward(&self, from: f64, to: f64) -> i8 {
        if self.angular_gap(from, to) <= EPS {
            return 0;
        }
        let mut d = to - from;
        if self.wraps() {
            d = (d + PI).rem_euclid(2.0 * PI) - PI;
        }
        if d > 0.0 {
            1
        } else {
            -1
        }
    }

    /// Normalizes a heading into the admissible interval. Only meaningful for
    /// the wrapping cone; otherwise the value is clamped.
    pub fn normalize_heading(&self, h: f64) -> f64 {
        if self.wraps() {
            let w = (h + PI).rem_euclid(2.0 * PI) - PI;
            // keep +π representable when the caller asked for it exactly
            if (h - PI).abs() <= EPS {
                PI
            } else {
                w
            }
        } else {
            h.clamp(-self.theta, self.theta)
        }
    }

    pub fn angle_in_range(&self, a: f64) -> bool {
        a >= -self.theta - EPS && a <= self.theta + EPS
    }

    /// Largest radius at which a lock-on still captures inside the range.
    pub fn lock_outer_radius(&self) -> f64 {
        self.r + self.delta * self.v
    }

    /// Smallest radius at which a lock-on still captures before the breach.
    pub fn lock_inner_radius(&self) -> f64 {
        self.rho + self.delta * self.v
    }

    /// Whether a lock-on at radius `z` completes with the intruder in
    /// `[rho, r]`.
    pub fn lock_radius_ok(&self, z: f64) -> bool {
        z >= self.lock_inner_radius() - EPS && z <= self.lock_outer_radius() + EPS
    }

    /// Whether a capture at radius `z` is inside `[rho, r]`.
    pub fn capture_radius_ok(&self, z: f64) -> bool {
        z >= self.rho - EPS && z <= self.r + EPS
    }

    /// Time an intruder needs to cover the band between the boundary and
    /// the perimeter.
    pub fn lifetime(&self) -> f64 {
        (1.0 - self.rho) / self.v
    }

    /// The same game with a different intruder speed.
    pub fn with_v(&self, v: f64) -> Self {
        Self { v, ..*self }
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        Self { rho, ..*self }
    }
}

/// An intruder moving radially inward along a fixed angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intruder {
    pub id: IntruderId,
    pub release_time: f64,
    pub angle: f64,
    /// 1 for online releases; below 1 for offline initial conditions.
    pub release_radius: f64,
}

impl Intruder {
    pub fn new(id: IntruderId, release_time: f64, angle: f64, release_radius: f64) -> Self {
        Self {
            id,
            release_time,
            angle,
            release_radius,
        }
    }

    /// An intruder already on the field at time zero.
    pub fn at_start(id: IntruderId, radius: f64, angle: f64) -> Self {
        Self::new(id, 0.0, angle, radius)
    }

    /// Radial distance at time `t`. Values below `rho` mean the perimeter was
    /// already breached; interpreting that is up to the caller.
    pub fn radius_at(&self, t: f64, v: f64) -> Result<f64, ModelError> {
        if t < self.release_time {
            return Err(ModelError::NotYetReleased {
                id: self.id,
                t,
                release_time: self.release_time,
            });
        }
        Ok(self.radius_unchecked(t, v))
    }

    /// Motion law extended to all `t`, including before release.
    pub(crate) fn radius_unchecked(&self, t: f64, v: f64) -> f64 {
        self.release_radius - v * (t - self.release_time)
    }

    /// Instant at which the intruder reaches the perimeter.
    pub fn breach_time(&self, p: &ProblemInstance) -> f64 {
        self.release_time + (self.release_radius - p.rho) / p.v
    }

    /// Instant at which the intruder reaches radius `z` (may precede release).
    pub fn time_at_radius(&self, z: f64, v: f64) -> f64 {
        self.release_time + (self.release_radius - z) / v
    }

    /// Radius the intruder would have had at time zero if it had always been
    /// moving. Equal to `release_radius` for intruders released at zero.
    pub fn radius_at_zero(&self, v: f64) -> f64 {
        self.release_radius + v * self.release_time
    }
}

/// One release instant and the intruders released there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Release {
    pub t: f64,
    pub angles: Vec<f64>,
    /// Per-intruder initial radius; omitted for online releases at radius 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Vec<f64>>,
}

/// The ordered releases making up an input sequence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InputSequence {
    pub releases: Vec<Release>,
}

impl InputSequence {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Offline initial conditions: every intruder present at time zero.
    pub fn from_initial(positions: &[(f64, f64)]) -> Self {
        if positions.is_empty() {
            return Self::empty();
        }
        Self {
            releases: vec![Release {
                t: 0.0,
                angles: positions.iter().map(|&(_, a)| a).collect(),
                radius: Some(positions.iter().map(|&(z, _)| z).collect()),
            }],
        }
    }

    pub fn push(&mut self, t: f64, angles: Vec<f64>) {
        self.releases.push(Release {
            t,
            angles,
            radius: None,
        });
    }

    pub fn total(&self) -> usize {
        self.releases.iter().map(|r| r.angles.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Expands the sequence into intruders with ids `0..total` in release
    /// order. This is the id assignment the engine uses as well.
    pub fn intruders(&self) -> Vec<Intruder> {
        let mut out = Vec::with_capacity(self.total());
        for rel in &self.releases {
            for (k, &angle) in rel.angles.iter().enumerate() {
                let z = rel
                    .radius
                    .as_ref()
                    .and_then(|r| r.get(k).copied())
                    .unwrap_or(1.0);
                out.push(Intruder::new(out.len(), rel.t, angle, z));
            }
        }
        out
    }

    /// Rebuilds a sequence from intruders, grouping equal release times.
    pub fn from_intruders(intruders: &[Intruder]) -> Self {
        let mut sorted: Vec<&Intruder> = intruders.iter().collect();
        sorted.sort_by(|a, b| {
            a.release_time
                .total_cmp(&b.release_time)
                .then(a.id.cmp(&b.id))
        });
        let mut seq = Self::empty();
        for i in sorted {
            match seq.releases.last_mut() {
                Some(last) if last.t == i.release_time => {
                    last.angles.push(i.angle);
                    last.radius.get_or_insert_with(Vec::new).push(i.release_radius);
                }
                _ => seq.releases.push(Release {
                    t: i.release_time,
                    angles: vec![i.angle],
                    radius: Some(vec![i.release_radius]),
                }),
            }
        }
        // drop radius lists that only restate the default
        for rel in &mut seq.releases {
            if rel
                .radius
                .as_ref()
                .is_some_and(|r| r.iter().all(|&z| z == 1.0))
            {
                rel.radius = None;
            }
        }
        seq
    }

    /// Checks ordering, count, angle and radius constraints against `p`.
    pub fn validate(&self, p: &ProblemInstance) -> Result<(), ModelError> {
        let mut prev = f64::NEG_INFINITY;
        for (index, rel) in self.releases.iter().enumerate() {
            if rel.t.is_nan() || rel.t < prev || rel.t < 0.0 {
                return Err(ModelError::UnorderedReleases { index, t: rel.t });
            }
            prev = rel.t;
            if let Some(radii) = &rel.radius {
                if radii.len() != rel.angles.len() {
                    return Err(ModelError::RadiusCountMismatch {
                        index,
                        angles: rel.angles.len(),
                        radii: radii.len(),
                    });
                }
                for &z in radii {
                    if !(z > p.rho && z <= 1.0) {
                        return Err(ModelError::RadiusOutOfRange { radius: z, rho: p.rho });
                    }
                }
            }
            for &angle in &rel.angles {
                if !p.angle_in_range(angle) {
                    return Err(ModelError::AngleOutOfRange {
                        angle,
                        theta: p.theta,
                    });
                }
            }
        }
        let count = self.total();
        if count > p.n_max {
            return Err(ModelError::TooManyIntruders {
                count,
                n_max: p.n_max,
            });
        }
        Ok(())
    }
}

/// What the turret is doing right now.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TurretMode {
    /// Rotating at `direction * omega` (direction 0 means holding still).
    Turning { direction: i8 },
    /// Heading frozen until `completes_at`, then `target` is captured.
    SpoolingUp { target: IntruderId, completes_at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurretState {
    pub heading: f64,
    pub mode: TurretMode,
}

impl TurretState {
    pub fn is_spooling(&self) -> bool {
        matches!(self.mode, TurretMode::SpoolingUp { .. })
    }

    pub fn direction(&self) -> i8 {
        match self.mode {
            TurretMode::Turning { direction } => direction,
            TurretMode::SpoolingUp { .. } => 0,
        }
    }
}

/// Log entry kinds with their payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    Release {
        id: IntruderId,
        angle: f64,
        radius: f64,
    },
    Turn {
        heading: f64,
        direction: i8,
    },
    Lock {
        id: IntruderId,
        heading: f64,
        radius: f64,
    },
    Capture {
        id: IntruderId,
        heading: f64,
        radius: f64,
    },
    Breach {
        id: IntruderId,
        angle: f64,
    },
}

impl EventKind {
    /// Heading recorded with the event, when it carries one.
    pub fn heading(&self) -> Option<f64> {
        match *self {
            EventKind::Turn { heading, .. }
            | EventKind::Lock { heading, .. }
            | EventKind::Capture { heading, .. } => Some(heading),
            _ => None,
        }
    }
}

/// One timestamped log line. Serializes as `{"t":..,"kind":..,"payload":..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub id: IntruderId,
    pub time: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub id: IntruderId,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimulationResult {
    pub captured: Vec<CaptureRecord>,
    pub lost: Vec<LossRecord>,
    /// Intruders still in flight when the horizon cut the run short.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pending: Vec<IntruderId>,
    pub released: usize,
    #[serde(skip)]
    pub events: Vec<Event>,
}

impl SimulationResult {
    pub fn captured_count(&self) -> usize {
        self.captured.len()
    }

    pub fn lost_count(&self) -> usize {
        self.lost.len()
    }

    pub fn captured_ids(&self) -> Vec<IntruderId> {
        let mut ids: Vec<_> = self.captured.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn lost_ids(&self) -> Vec<IntruderId> {
        let mut ids: Vec<_> = self.lost.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn was_captured(&self, id: IntruderId) -> bool {
        self.captured.iter().any(|c| c.id == id)
    }

    /// The event log as JSON lines, one event per line.
    pub fn event_log_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events always serialize"));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_4;

    pub(crate) fn fig4(rho: f64, v: f64) -> ProblemInstance {
        ProblemInstance {
            theta: FRAC_PI_4,
            rho,
            v,
            omega: 1.0,
            r: 1.0,
            n_max: 40,
            delta: 0.01,
        }
    }

    #[test]
    fn fig4_instance_is_valid() {
        assert!(fig4(0.5, 0.1).validate().is_empty());
    }

    #[test]
    fn rho_above_one_is_reported() {
        let p = ProblemInstance {
            rho: 1.2,
            ..fig4(0.5, 0.1)
        };
        let v = p.validate();
        assert!(v.iter().any(|x| x.constraint == "rho < 1"), "{v:?}");
    }

    #[test]
    fn range_below_perimeter_is_reported() {
        let p = ProblemInstance {
            r: 0.4,
            ..fig4(0.5, 0.1)
        };
        let v = p.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, "rho ≤ r");
    }

    #[test]
    fn radius_follows_motion_law() {
        let i = Intruder::new(0, 0.0, 0.0, 1.0);
        assert_relative_eq!(i.radius_at(2.0, 0.1).unwrap(), 0.8, epsilon = 1e-12);
        assert_eq!(i.radius_at(0.0, 0.1).unwrap(), 1.0);
        assert_relative_eq!(i.radius_at(5.0, 0.1).unwrap(), 0.5, epsilon = 1e-12);
        let p = fig4(0.5, 0.1);
        assert_relative_eq!(i.breach_time(&p), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn radius_before_release_is_an_error() {
        let i = Intruder::new(3, 1.0, 0.0, 1.0);
        assert!(matches!(
            i.radius_at(0.5, 0.1),
            Err(ModelError::NotYetReleased { id: 3, .. })
        ));
    }

    #[test]
    fn travel_time_cases() {
        let p = fig4(0.5, 0.1);
        assert_relative_eq!(p.travel_time(-FRAC_PI_4, FRAC_PI_4), PI / 2.0, epsilon = 1e-12);
        assert_eq!(p.travel_time(0.3, 0.3), 0.0);
        let full = ProblemInstance { theta: PI, ..p };
        assert!(full.travel_time(-PI, PI).abs() < 1e-12);
        assert_relative_eq!(full.travel_time(-3.0, 3.0), 2.0 * PI - 6.0, epsilon = 1e-12);
        assert_eq!(full.direction_toward(3.0, -3.0), 1);
        assert_eq!(p.direction_toward(0.5, -0.5), -1);
    }

    #[test]
    fn sequence_ids_and_round_trip() {
        let mut s = InputSequence::empty();
        s.push(0.0, vec![0.1, -0.2]);
        s.push(1.5, vec![0.3]);
        let ids: Vec<_> = s.intruders().iter().map(|i| (i.id, i.release_time)).collect();
        assert_eq!(ids, vec![(0, 0.0), (1, 0.0), (2, 1.5)]);
        assert_eq!(InputSequence::from_intruders(&s.intruders()), s);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            r#"{"releases":[{"t":0.0,"angles":[0.1,-0.2]},{"t":1.5,"angles":[0.3]}]}"#
        );
    }

    #[test]
    fn sequence_validation() {
        let p = ProblemInstance { n_max: 2, ..fig4(0.5, 0.1) };
        let mut s = InputSequence::empty();
        s.push(1.0, vec![0.0]);
        s.push(0.5, vec![0.0]);
        assert!(matches!(s.validate(&p), Err(ModelError::UnorderedReleases { index: 1, .. })));
        let mut s = InputSequence::empty();
        s.push(0.0, vec![0.0, 0.1, 0.2]);
        assert!(matches!(s.validate(&p), Err(ModelError::TooManyIntruders { count: 3, .. })));
        let mut s = InputSequence::empty();
        s.push(0.0, vec![1.0]);
        assert!(matches!(s.validate(&p), Err(ModelError::AngleOutOfRange { .. })));
        let s = InputSequence::from_initial(&[(0.4, 0.0)]);
        assert!(matches!(s.validate(&p), Err(ModelError::RadiusOutOfRange { .. })));
    }

    #[test]
    fn event_serializes_with_stable_field_order() {
        let e = Event {
            t: 1.25,
            kind: EventKind::Lock {
                id: 4,
                heading: 0.5,
                radius: 0.75,
            },
        };
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"t":1.25,"kind":"lock","payload":{"id":4,"heading":0.5,"radius":0.75}}"#
        );
        let back: Event = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn instance() -> impl Strategy<Value = ProblemInstance> {
        (0.01f64..PI, 0.05f64..0.95, 0.01f64..1.0, 0.1f64..3.0, 0.0f64..1.0, 2usize..50, 0.001f64..0.5)
            .prop_map(|(theta, rho, v, omega, rfrac, n_max, delta)| ProblemInstance {
                theta,
                rho,
                v,
                omega,
                r: rho + rfrac * (1.0 - rho),
                n_max,
                delta,
            })
    }

    proptest! {
        #[test]
        fn radius_decreases_with_slope_v(z0 in 0.2f64..1.0, t0 in 0.0f64..10.0, v in 0.01f64..2.0,
                                         dt in 0.0f64..5.0, h in 1e-4f64..1e-2) {
            let i = Intruder::new(0, t0, 0.0, z0);
            let a = i.radius_at(t0 + dt, v).unwrap();
            let b = i.radius_at(t0 + dt + h, v).unwrap();
            prop_assert!(b < a);
            prop_assert!(((b - a) / h + v).abs() < 1e-6 * (1.0 + v));
        }

        #[test]
        fn travel_time_is_symmetric_and_metric(p in instance(), a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
            let (a, b, c) = (a * p.theta, b * p.theta, c * p.theta);
            prop_assert!((p.travel_time(a, b) - p.travel_time(b, a)).abs() < 1e-12);
            prop_assert!(p.travel_time(a, c) <= p.travel_time(a, b) + p.travel_time(b, c) + 1e-12);
            prop_assert!(p.travel_time(a, a) == 0.0);
        }

        #[test]
        fn validation_accepts_the_parameter_box(p in instance()) {
            prop_assert!(p.validate().is_empty(), "{:?}", p.validate());
        }

        #[test]
        fn validation_rejects_each_boundary(p in instance(), pick in 0usize..8, off in 1e-9f64..0.5) {
            let bad = match pick {
                0 => ProblemInstance { rho: 1.0 + off, r: 1.0, ..p },
                1 => ProblemInstance { rho: -off, ..p },
                2 => ProblemInstance { r: p.rho - off.min(p.rho / 2.0), ..p },
                3 => ProblemInstance { r: 1.0 + off, ..p },
                4 => ProblemInstance { theta: PI + off, ..p },
                5 => ProblemInstance { v: -off, ..p },
                6 => ProblemInstance { omega: 0.0, ..p },
                _ => ProblemInstance { n_max: 1, ..p },
            };
            prop_assert!(!bad.validate().is_empty());
        }
    }
}
