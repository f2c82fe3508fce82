#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_4, PI};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use turret_core::{Event, Intruder, ProblemInstance};

pub fn fig4(rho: f64, v: f64) -> ProblemInstance {
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

/// Random valid instance; `r = rho` when `perimeter_range` is set.
pub fn random_instance(rng: &mut ChaCha8Rng, perimeter_range: bool, n_max: usize) -> ProblemInstance {
    let theta = if rng.gen_bool(0.1) { PI } else { rng.gen_range(0.1..PI) };
    let rho = rng.gen_range(0.1..0.9);
    let r = if perimeter_range { rho } else { rng.gen_range(rho..=1.0) };
    ProblemInstance {
        theta,
        rho,
        v: rng.gen_range(0.02..0.6),
        omega: rng.gen_range(0.3..3.0),
        r,
        n_max,
        delta: rng.gen_range(0.005..0.3),
    }
}

/// Offline intruders with radii in `(rho, 1]`, some released later.
pub fn random_intruders(rng: &mut ChaCha8Rng, p: &ProblemInstance, n: usize) -> Vec<Intruder> {
    let span = (1.0 - p.rho) / p.v;
    (0..n)
        .map(|id| {
            let t = if rng.gen_bool(0.3) { rng.gen_range(0.0..span) } else { 0.0 };
            let z = rng.gen_range(p.rho + 1e-3..=1.0);
            let angle = if rng.gen_bool(0.15) {
                // shared angles exercise collocated service
                0.0
            } else {
                rng.gen_range(-p.theta..=p.theta)
            };
            Intruder::new(id, t, angle, z)
        })
        .collect()
}

pub fn random_gamma0(rng: &mut ChaCha8Rng, p: &ProblemInstance) -> f64 {
    rng.gen_range(-p.theta..=p.theta)
}

/// Replays the heading-bearing events of a run and checks that the heading
/// moves at exactly `direction * omega` between them and stays put while
/// spooling up. Returns the first mismatch.
pub fn check_heading_trajectory(p: &ProblemInstance, events: &[Event], gamma0: f64) -> Result<(), String> {
    use turret_core::EventKind;
    let mut t = 0.0;
    let mut heading = gamma0;
    let mut direction = 0i8;
    let mut spooling: Option<f64> = None;
    for e in events {
        let Some(h) = e.kind.heading() else { continue };
        let predicted = p.normalize_heading(heading + f64::from(direction) * p.omega * (e.t - t));
        let err = p.angular_gap(predicted, h);
        if err > 1e-7 {
            return Err(format!("t={}: heading {h}, expected {predicted} ({:?})", e.t, e.kind));
        }
        // |Δheading| ≤ ω Δt
        if p.angular_gap(heading, h) > p.omega * (e.t - t) + 1e-7 {
            return Err(format!("t={}: heading jumps from {heading} to {h}", e.t));
        }
        if spooling.is_some() && p.angular_gap(heading, h) > 1e-12 {
            return Err(format!("t={}: heading moved during spool-up", e.t));
        }
        match e.kind {
            EventKind::Turn { direction: d, .. } => {
                if spooling.is_some() {
                    return Err(format!("t={}: turn during spool-up", e.t));
                }
                direction = d;
            }
            EventKind::Lock { .. } => {
                direction = 0;
                spooling = Some(e.t + p.delta);
            }
            EventKind::Capture { .. } => {
                if spooling.is_some_and(|done| (done - e.t).abs() > 1e-9) {
                    return Err(format!("t={}: capture off the spool-up clock", e.t));
                }
                spooling = None;
            }
            _ => {}
        }
        t = e.t;
        heading = h;
    }
    Ok(())
}
