use std::f64::consts::FRAC_PI_4;

use approx::assert_relative_eq;
use turret_core::adversary::{stream_burst_adversary, stream_start, Outcome};
use turret_core::engine::run_fixed_schedule;
use turret_core::offline::brute_force_optimal;
use turret_core::online::{Dpac, Sentry, Sit};
use turret_core::regimes::{competitive_ratio, Oracle, Ratio};
use turret_core::ProblemInstance;

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
fn edge_sentry_gets_one_of_six() {
    let p = six();
    let t = stream_burst_adversary(&p, &mut Sentry::new(p.theta)).unwrap();
    assert_eq!(t.outcome, Outcome::Burst);
    assert_eq!(t.first_capture, Some(1));
    assert_eq!(t.burst_size, 5);
    assert_relative_eq!(t.burst_time.unwrap(), stream_start(&p), epsilon = 1e-9);
    assert_eq!(t.online_captures, 1);

    let replay = run_fixed_schedule(&p, &t.intruders, &t.witness.locks(), 0.0).unwrap();
    assert_eq!(replay.captured_count(), 5);
    assert_eq!(replay.captured_ids(), vec![1, 2, 3, 4, 5]);
    let (best, _) = brute_force_optimal(&p, &t.intruders, 0.0, 9).unwrap();
    assert_eq!(best, 5);

    for oracle in [Oracle::BruteForce(9), Oracle::Witness(&t.witness)] {
        let report = competitive_ratio(&p, &t.sequence, &mut Sentry::new(p.theta), 0.0, oracle).unwrap();
        assert_eq!((report.online, report.offline), (1, 5));
        assert_eq!(report.ratio, Ratio::Finite(5.0));
    }
}

#[test]
fn sweeping_and_projecting_policies_capture_at_most_one() {
    let p = six();
    let sit = stream_burst_adversary(&p, &mut Sit::new()).unwrap();
    let dpac = stream_burst_adversary(&p, &mut Dpac::new()).unwrap();
    for t in [&sit, &dpac] {
        assert!(t.online_captures <= 1);
        // neither is at the stream edge while a stream intruder is catchable
        assert_eq!(t.outcome, Outcome::NonCompetitive);
        assert_eq!(t.offline_value(), p.n_max);
        let report = competitive_ratio(&p, &t.sequence, &mut Sit::new(), 0.0, Oracle::Witness(&t.witness)).unwrap();
        assert_eq!(report.ratio, Ratio::NotCompetitive);
    }
}

#[test]
fn transcripts_are_deterministic() {
    let p = six();
    let a = stream_burst_adversary(&p, &mut Dpac::new()).unwrap();
    let b = stream_burst_adversary(&p, &mut Dpac::new()).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}
