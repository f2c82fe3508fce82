//! Input-sequence constructors: the adaptive stream-and-burst adversary and
//! seeded random sequences.
//!
//! The adversary releases a slow stream of single intruders at one edge of the
//! cone, spaced so that at most one is alive at a time. The moment the online
//! policy locks a stream intruder (its capture is then certain) it releases
//! every remaining intruder at once at the opposite edge, where the turret
//! cannot get to before they breach. An offline turret that knew the burst was
//! coming would have waited there instead.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    run_fixed_schedule, simulate, EngineError, Policy, ReleaseSource, ScheduleError,
};
use crate::model::{
    Event, EventKind, InputSequence, Intruder, IntruderId, ProblemInstance, SimulationResult,
    TurretState, EPS,
};
use crate::offline::{Schedule, ScheduleStep, TimeWindow};
use crate::regimes::{stream_burst_interval, VelocityInterval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("v = {v} outside the stream-burst regime {interval}")]
    OutsideRegime { v: f64, interval: VelocityInterval },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("offline witness rejected by replay: {0}")]
    Witness(#[from] ScheduleError),
}

/// Time between consecutive stream releases.
pub fn stream_spacing(p: &ProblemInstance) -> f64 {
    let dwell = 2.0 * p.delta;
    ((1.0 - p.rho) / p.v + dwell).max(2.0 * p.theta / p.omega + dwell)
}

/// Time of the first stream release.
pub fn stream_start(p: &ProblemInstance) -> f64 {
    p.theta / p.omega + p.delta
}

/// Angle the burst is released at: the far edge, or the centre when the cone
/// is the full disc.
pub fn burst_angle(p: &ProblemInstance) -> f64 {
    if p.wraps() {
        0.0
    } else {
        -p.theta
    }
}

/// Adaptive release source driving the construction.
#[derive(Debug, Clone)]
pub struct StreamBurst {
    p: ProblemInstance,
    spacing: f64,
    streamed: usize,
    next_stream: f64,
    burst: Vec<Intruder>,
    trigger: Option<(usize, f64)>,
    released: Vec<Intruder>,
}

impl StreamBurst {
    pub fn new(p: &ProblemInstance) -> Self {
        Self {
            p: *p,
            spacing: stream_spacing(p),
            streamed: 0,
            next_stream: stream_start(p),
            burst: Vec::new(),
            trigger: None,
            released: Vec::new(),
        }
    }

    /// 1-based stream index of the first intruder the policy locked, and the
    /// lock time.
    pub fn trigger(&self) -> Option<(usize, f64)> {
        self.trigger
    }

    pub fn released(&self) -> &[Intruder] {
        &self.released
    }

    fn is_stream(&self, id: IntruderId) -> bool {
        id < self.streamed
    }
}

impl ReleaseSource for StreamBurst {
    fn next_release_time(&self) -> Option<f64> {
        if let Some(b) = self.burst.first() {
            return Some(b.release_time);
        }
        if self.trigger.is_none() && self.streamed < self.p.n_max {
            return Some(self.next_stream);
        }
        None
    }

    fn take_due(&mut self, now: f64) -> Vec<Intruder> {
        let mut out = Vec::new();
        if self.burst.first().is_some_and(|b| b.release_time <= now) {
            out.append(&mut self.burst);
        }
        while self.trigger.is_none() && self.streamed < self.p.n_max && self.next_stream <= now {
            out.push(Intruder::new(self.streamed, self.next_stream, self.p.theta, 1.0));
            self.streamed += 1;
            self.next_stream += self.spacing;
        }
        self.released.extend_from_slice(&out);
        out
    }

    fn observe(&mut self, event: &Event, _state: &TurretState) {
        let EventKind::Lock { id, .. } = event.kind else {
            return;
        };
        if self.trigger.is_some() || !self.is_stream(id) {
            return;
        }
        let i = id + 1;
        self.trigger = Some((i, event.t));
        let angle = burst_angle(&self.p);
        self.burst = (0..self.p.n_max - i)
            .map(|k| Intruder::new(self.streamed + k, event.t, angle, 1.0))
            .collect();
        log::debug!("stream intruder {i} locked at t={}; bursting {}", event.t, self.burst.len());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The policy captured stream intruder `i` and the burst followed.
    Burst,
    /// The policy never captured anything; the stream ran out.
    NonCompetitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "snake_case")]
pub enum Fate {
    Captured { time: f64, radius: f64 },
    Lost { time: f64 },
    Pending,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntruderFate {
    pub id: IntruderId,
    #[serde(flatten)]
    pub fate: Fate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversaryTranscript {
    pub instance: ProblemInstance,
    pub policy: String,
    pub sequence: InputSequence,
    pub outcome: Outcome,
    /// 1-based index of the stream intruder whose lock triggered the burst.
    pub first_capture: Option<usize>,
    pub burst_time: Option<f64>,
    pub burst_size: usize,
    pub online_captures: usize,
    pub fates: Vec<IntruderFate>,
    pub witness: Schedule,
    #[serde(skip)]
    pub intruders: Vec<Intruder>,
    #[serde(skip)]
    pub result: SimulationResult,
}

impl AdversaryTranscript {
    pub fn offline_value(&self) -> usize {
        self.witness.value()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcripts always serialize")
    }
}

/// Runs `policy` from heading 0 against the stream-and-burst source and
/// builds the offline witness, checked by engine replay.
pub fn stream_burst_adversary(
    p: &ProblemInstance,
    policy: &mut dyn Policy,
) -> Result<AdversaryTranscript, AdversaryError> {
    let interval = stream_burst_interval(p);
    if !interval.contains(p.v) {
        return Err(AdversaryError::OutsideRegime { v: p.v, interval });
    }
    run_stream_burst(p, policy)
}

/// Same as [`stream_burst_adversary`] without the velocity check.
pub fn run_stream_burst(
    p: &ProblemInstance,
    policy: &mut dyn Policy,
) -> Result<AdversaryTranscript, AdversaryError> {
    let mut source = StreamBurst::new(p);
    let result = simulate(p, &mut source, policy, 0.0, f64::INFINITY)?;
    let intruders = source.released().to_vec();
    let trigger = source.trigger();
    let witness = witness_schedule(p, &intruders, trigger.map(|t| t.0));
    run_fixed_schedule(p, &intruders, &witness.locks(), 0.0)?;

    let fates = intruders
        .iter()
        .map(|i| {
            let fate = if let Some(c) = result.captured.iter().find(|c| c.id == i.id) {
                Fate::Captured {
                    time: c.time,
                    radius: c.radius,
                }
            } else if let Some(l) = result.lost.iter().find(|l| l.id == i.id) {
                Fate::Lost { time: l.time }
            } else {
                Fate::Pending
            };
            IntruderFate { id: i.id, fate }
        })
        .collect();
    let burst_size = trigger.map_or(0, |(i, _)| p.n_max - i);
    Ok(AdversaryTranscript {
        instance: *p,
        policy: policy.name().to_string(),
        sequence: InputSequence::from_intruders(&intruders),
        outcome: if trigger.is_some() {
            Outcome::Burst
        } else {
            Outcome::NonCompetitive
        },
        first_capture: trigger.map(|t| t.0),
        burst_time: trigger.map(|t| t.1),
        burst_size,
        online_captures: result.captured_count(),
        fates,
        witness,
        intruders,
        result,
    })
}

/// Offline schedule from heading 0: wait at the stream edge for the first
/// `i - 1` stream intruders, then swing to the burst and take as much of it as
/// fits before it breaches. With no burst, take the whole stream.
fn witness_schedule(p: &ProblemInstance, intruders: &[Intruder], first: Option<usize>) -> Schedule {
    let (stream, burst): (Vec<&Intruder>, Vec<&Intruder>) = match first {
        Some(i) => {
            let stream = intruders.iter().filter(|x| x.id < i - 1).collect();
            let burst = intruders.iter().filter(|x| x.id >= i).collect();
            (stream, burst)
        }
        None => (intruders.iter().collect(), Vec::new()),
    };
    let mut heading = 0.0;
    let mut ready = 0.0;
    let mut steps = Vec::new();
    for x in stream.into_iter().chain(burst) {
        let window = TimeWindow::for_intruder(p, x);
        let lock = (ready + p.travel_time(heading, x.angle)).max(window.earliest_lock);
        if !p.lock_radius_ok(x.radius_unchecked(lock, p.v)) {
            // the rest of the burst is later still
            break;
        }
        steps.push(ScheduleStep {
            id: x.id,
            lock,
            capture: lock + p.delta,
        });
        heading = x.angle;
        ready = lock + p.delta;
    }
    Schedule::new(steps)
}

/// How random release angles are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngleDistribution {
    Uniform,
    /// Only `-theta` and `theta`.
    Edges,
    /// Uniform over `clusters` fixed angles spread across the cone.
    Clustered { clusters: usize },
}

/// Parameters of [`random_sequence`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub count: usize,
    /// Releases fall in `[0, span]`.
    pub span: f64,
    pub angles: AngleDistribution,
    /// Probability that a release shares the previous release's instant.
    #[serde(default)]
    pub burstiness: f64,
    /// Mirror every release across angle 0 so both halves get equally many.
    #[serde(default)]
    pub equal_sides: bool,
}

impl SequenceSpec {
    pub fn uniform(count: usize, span: f64) -> Self {
        Self {
            count,
            span,
            angles: AngleDistribution::Uniform,
            burstiness: 0.0,
            equal_sides: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("count {count} exceeds n_max = {n_max}")]
    TooMany { count: usize, n_max: usize },
    #[error("equal-sides sequences need an even count, got {0}")]
    OddEqualSides(usize),
    #[error("span must be finite and non-negative, got {0}")]
    BadSpan(f64),
}

/// Deterministic-by-seed online sequence: every intruder released at radius 1
/// with an angle in `[-theta, theta]`.
pub fn random_sequence(
    p: &ProblemInstance,
    seed: u64,
    spec: &SequenceSpec,
) -> Result<InputSequence, SequenceError> {
    if spec.count > p.n_max {
        return Err(SequenceError::TooMany {
            count: spec.count,
            n_max: p.n_max,
        });
    }
    if spec.equal_sides && spec.count % 2 == 1 {
        return Err(SequenceError::OddEqualSides(spec.count));
    }
    if !(spec.span.is_finite() && spec.span >= 0.0) {
        return Err(SequenceError::BadSpan(spec.span));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = if spec.equal_sides { spec.count / 2 } else { spec.count };
    let mut times: Vec<f64> = (0..slots).map(|_| rng.gen_range(0.0..=spec.span)).collect();
    times.sort_by(f64::total_cmp);
    for k in 1..times.len() {
        if rng.gen_bool(spec.burstiness.clamp(0.0, 1.0)) {
            times[k] = times[k - 1];
        }
    }
    let clusters: Vec<f64> = match spec.angles {
        AngleDistribution::Clustered { clusters } if clusters > 1 => (0..clusters)
            .map(|c| -p.theta + 2.0 * p.theta * c as f64 / (clusters - 1) as f64)
            .collect(),
        AngleDistribution::Clustered { .. } => vec![0.0],
        _ => Vec::new(),
    };
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        match spec.angles {
            AngleDistribution::Uniform => rng.gen_range(-p.theta..=p.theta),
            AngleDistribution::Edges => {
                if rng.gen_bool(0.5) {
                    p.theta
                } else {
                    -p.theta
                }
            }
            AngleDistribution::Clustered { .. } => *clusters.choose(rng).expect("at least one cluster"),
        }
    };

    let mut seq = InputSequence::empty();
    for t in times {
        let mut angles = if spec.equal_sides {
            // strictly positive so that the mirror lands on the other side
            let a = draw(&mut rng).abs().max(EPS.min(p.theta));
            vec![a, -a]
        } else {
            vec![draw(&mut rng)]
        };
        match seq.releases.last_mut() {
            Some(last) if last.t == t => last.angles.append(&mut angles),
            _ => seq.push(t, angles),
        }
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::online::{Dpac, Greedy, Idle, RandomTurret, Sentry, Sit};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn six() -> ProblemInstance {
        ProblemInstance {
            theta: FRAC_PI_4,
            rho: 0.9,
            v: 0.5,
            omega: 1.0,
            r: 1.0,
            n_max: 6,
            delta: 0.01,
        }
    }

    #[test]
    fn stream_timing() {
        let p = six();
        assert_relative_eq!(stream_start(&p), FRAC_PI_4 + 0.01, epsilon = 1e-15);
        assert_relative_eq!(stream_spacing(&p), PI / 2.0 + 0.02, epsilon = 1e-15);
        let slow = ProblemInstance { v: 0.05, ..p };
        assert_relative_eq!(stream_spacing(&slow), 0.1 / 0.05 + 0.02, epsilon = 1e-12);
    }

    #[test]
    fn sentry_takes_the_first_stream_intruder() {
        let p = six();
        let t = stream_burst_adversary(&p, &mut Sentry::new(p.theta)).unwrap();
        assert_eq!(t.outcome, Outcome::Burst);
        assert_eq!(t.first_capture, Some(1));
        assert_eq!(t.burst_size, 5);
        assert_relative_eq!(t.burst_time.unwrap(), stream_start(&p), epsilon = 1e-9);
        assert_eq!(t.online_captures, 1);
        assert_eq!(t.offline_value(), 5);
        assert_eq!(t.intruders.len(), 6);
        assert!(t.intruders[1..].iter().all(|i| i.angle == -p.theta));
        // burst release = capture time of the triggering intruder − Δ
        let cap = t.result.captured.iter().find(|c| c.id == 0).unwrap();
        assert_relative_eq!(t.burst_time.unwrap(), cap.time - p.delta, epsilon = 1e-12);
    }

    #[test]
    fn idle_is_non_competitive() {
        let p = six();
        let t = stream_burst_adversary(&p, &mut Idle).unwrap();
        assert_eq!(t.outcome, Outcome::NonCompetitive);
        assert_eq!(t.online_captures, 0);
        assert_eq!(t.burst_size, 0);
        assert_eq!(t.offline_value(), p.n_max);
        assert!(t.fates.iter().all(|f| matches!(f.fate, Fate::Lost { .. })));
    }

    #[test]
    fn outside_regime_is_rejected() {
        let p = ProblemInstance { v: 0.05, ..six() };
        let err = stream_burst_adversary(&p, &mut Greedy).unwrap_err();
        assert!(err.to_string().contains("outside the stream-burst regime"));
    }

    #[test]
    fn burst_fits_inside_window() {
        let p = six();
        assert!((p.n_max - 2) as f64 * p.delta <= (p.r - p.rho) / p.v);
    }

    #[test]
    fn burst_can_overrun_near_top_of_interval() {
        // (N-2)Δ ≤ (r-ρ)/v holds but (N-1)Δ > (1-ρ)/v: one burst intruder breaches
        let p = ProblemInstance { n_max: 3, v: 6.0, ..six() };
        assert!(stream_burst_interval(&p).contains(p.v));
        let t = stream_burst_adversary(&p, &mut Sentry::new(p.theta)).unwrap();
        assert_eq!(t.first_capture, Some(1));
        assert_eq!(t.offline_value(), 1);
        let q = ProblemInstance { v: 4.9, ..p };
        let t = stream_burst_adversary(&q, &mut Sentry::new(q.theta)).unwrap();
        assert_eq!(t.offline_value(), 2);
    }

    #[test]
    fn full_circle_bursts_at_centre() {
        let p = ProblemInstance { theta: PI, ..six() };
        assert_eq!(burst_angle(&p), 0.0);
        let t = run_stream_burst(&p, &mut Sentry::new(p.theta)).unwrap();
        assert_eq!(t.first_capture, Some(1));
        assert!(t.intruders[1..].iter().all(|i| i.angle == 0.0));
        assert_eq!(t.offline_value(), p.n_max - 1);
    }

    #[test]
    fn transcript_serializes() {
        let p = six();
        let t = stream_burst_adversary(&p, &mut Sentry::new(p.theta)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["outcome"], "burst");
        assert_eq!(v["witness"]["value"], 5);
        assert_eq!(v["fates"][0]["fate"], "captured");
    }

    #[test]
    fn random_sequence_contract() {
        let p = six();
        assert!(random_sequence(&p, 1, &SequenceSpec::uniform(0, 5.0)).unwrap().is_empty());
        assert!(matches!(
            random_sequence(&p, 1, &SequenceSpec::uniform(7, 5.0)),
            Err(SequenceError::TooMany { .. })
        ));
        let spec = SequenceSpec {
            equal_sides: true,
            ..SequenceSpec::uniform(6, 5.0)
        };
        let s = random_sequence(&p, 9, &spec).unwrap();
        let angles: Vec<f64> = s.intruders().iter().map(|i| i.angle).collect();
        assert_eq!(angles.iter().filter(|&&a| a >= 0.0).count(), 3);
        assert_eq!(angles.iter().filter(|&&a| a < 0.0).count(), 3);
        assert_eq!(s, random_sequence(&p, 9, &spec).unwrap());
        assert_ne!(s, random_sequence(&p, 10, &spec).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_sequences_are_valid(seed in any::<u64>(), count in 0usize..20, burst in 0.0f64..1.0, mode in 0u8..3) {
            let p = ProblemInstance { n_max: 20, ..six() };
            let angles = match mode {
                0 => AngleDistribution::Uniform,
                1 => AngleDistribution::Edges,
                _ => AngleDistribution::Clustered { clusters: 3 },
            };
            let spec = SequenceSpec { count, span: 10.0, angles, burstiness: burst, equal_sides: false };
            let s = random_sequence(&p, seed, &spec).unwrap();
            prop_assert_eq!(s.total(), count);
            prop_assert!(s.validate(&p).is_ok());
        }

        #[test]
        fn stream_keeps_one_alive(v in 0.07f64..2.5, n in 3usize..8) {
            let p = ProblemInstance { v, n_max: n, ..six() };
            let t = run_stream_burst(&p, &mut Idle).unwrap();
            let mut alive = 0i32;
            for e in &t.result.events {
                match e.kind {
                    EventKind::Release { .. } => { alive += 1; prop_assert!(alive <= 1); }
                    EventKind::Breach { .. } | EventKind::Capture { .. } => alive -= 1,
                    _ => {}
                }
            }
        }

        #[test]
        fn no_policy_beats_one(frac in 0.01f64..1.0, seed in any::<u64>(), n in 3usize..9) {
            let base = ProblemInstance { n_max: n, ..six() };
            let i = stream_burst_interval(&base);
            prop_assume!(!i.is_empty());
            let hi = if i.unbounded { 3.0 } else { i.hi };
            let p = ProblemInstance { v: i.lo + frac * (hi - i.lo), ..base };
            let mut policies: Vec<Box<dyn Policy>> = vec![
                Box::new(Sit::new()), Box::new(Dpac::new()), Box::new(Greedy), Box::new(RandomTurret::new(seed)),
                Box::new(Sentry::new(p.theta)), Box::new(Sentry::new(-p.theta)),
            ];
            for pol in policies.iter_mut() {
                let t = stream_burst_adversary(&p, pol.as_mut()).unwrap();
                prop_assert!(t.online_captures <= 1, "{} captured {}", pol.name(), t.online_captures);
                // the whole burst fits only if its last capture lands by the perimeter
                let fits = (n - 1) as f64 * p.delta <= (1.0 - p.rho) / p.v;
                if t.first_capture == Some(1) && fits {
                    prop_assert_eq!(t.offline_value(), n - 1);
                }
            }
        }
    }
}
