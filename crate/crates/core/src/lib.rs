//! Single-turret perimeter defense: an event-driven simulator of the capture
//! game, exact and brute-force offline schedulers, the sweeping and
//! project-and-capture online policies, the stream-and-burst adversary, and
//! closed-form parameter-regime bounds.

pub mod adversary;
pub mod engine;
pub mod model;
pub mod offline;
pub mod online;
pub mod regimes;

pub use model::{
    Event, EventKind, InputSequence, Intruder, IntruderId, ProblemInstance, Release,
    SimulationResult, TurretMode, TurretState, Violation, EPS,
};
