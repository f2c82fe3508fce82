//! Closed-form velocity regimes for the online policies, the competitive
//! ratio harness, and the `(rho, v)` parameter sweep.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_fixed_schedule, simulate_sequence, EngineError, Policy, ScheduleError};
use crate::model::{InputSequence, ProblemInstance};
use crate::offline::{
    brute_force_optimal, build_reachability_graph, longest_path_schedule, OfflineError, Schedule,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegimeError {
    #[error("j = {j} out of range: need 1 ≤ j < n_max = {n_max}")]
    JOutOfRange { j: usize, n_max: usize },
    #[error("empty {0} grid")]
    EmptyGrid(&'static str),
}

/// Which disjunct of a velocity condition produced the bound: the one where
/// every intruder is released inside the turret's range (`v ≤ (1-r)/delta`)
/// or the one where intruders must first travel into range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    ReleasedInRange,
    TravelsIntoRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeBound {
    pub v: f64,
    pub branch: Branch,
}

impl RegimeBound {
    pub fn admits(&self, v: f64) -> bool {
        v <= self.v
    }
}

/// Largest `v` satisfying either `v ≤ first` (with `first` already capped by
/// `(1-r)/delta`) or `(1-r)/delta < v ≤ second`.
fn best_branch(p: &ProblemInstance, first: f64, second: f64) -> RegimeBound {
    let threshold = (1.0 - p.r) / p.delta;
    let first = first.min(threshold).max(0.0);
    if second > threshold && second >= first {
        RegimeBound {
            v: second,
            branch: Branch::TravelsIntoRange,
        }
    } else {
        RegimeBound {
            v: first,
            branch: Branch::ReleasedInRange,
        }
    }
}

/// `ceil(n / 2)` on integers.
pub fn half_ceil(n: usize) -> usize {
    n.div_ceil(2)
}

/// Velocity below which the sweeping policy captures every intruder. `p.v` is
/// ignored.
pub fn sit_regime_bound(p: &ProblemInstance) -> RegimeBound {
    let a = if p.wraps() { 2.0 } else { 4.0 };
    let n = p.n_max as f64;
    let w = p.omega;
    let first = w * (p.r - p.rho) / (a * p.theta + (n - 1.0) * p.delta * w);
    let second = w * (1.0 - p.rho) / (a * p.theta + n * p.delta * w);
    best_branch(p, first, second)
}

/// Velocity below which the project-and-capture policy captures at least
/// half of the intruders. `p.v` is ignored.
pub fn dpac_regime_bound(p: &ProblemInstance) -> RegimeBound {
    let h = half_ceil(p.n_max) as f64;
    let w = p.omega;
    let outer = w * (1.0 - p.rho) / (3.0 * p.theta + h * p.delta * w);
    let inner = w * (p.r - p.rho) / (2.0 * p.theta + (h - 1.0) * p.delta * w);
    best_branch(p, outer.min(inner), outer)
}

/// Half-open velocity interval `(lo, hi]` on which no online policy does
/// better than `ratio`-competitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityInterval {
    pub j: usize,
    pub lo: f64,
    /// `f64::INFINITY` when `unbounded`; serialized as null then.
    pub hi: f64,
    pub unbounded: bool,
    pub ratio: usize,
}

impl VelocityInterval {
    pub fn is_empty(&self) -> bool {
        self.lo.is_nan() || self.hi.is_nan() || self.lo >= self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        !self.is_empty() && v > self.lo && v <= self.hi
    }
}

impl fmt::Display for VelocityInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "empty (j = {})", self.j);
        }
        write!(
            f,
            "({}, {}] at best {}-competitive",
            self.lo, self.hi, self.ratio
        )
    }
}

/// Velocities at which a stream of intruders followed by a burst of
/// `n_max - j` holds every online policy to `n_max - j` times fewer captures
/// than an offline one.
pub fn lower_bound_interval(p: &ProblemInstance, j: usize) -> Result<VelocityInterval, RegimeError> {
    if j < 1 || j >= p.n_max {
        return Err(RegimeError::JOutOfRange { j, n_max: p.n_max });
    }
    let lo = p.omega * (1.0 - p.rho) / (2.0 * p.delta * p.omega + 2.0 * p.theta);
    let k = p.n_max - j - 1;
    let (hi, unbounded) = if k == 0 {
        (f64::INFINITY, true)
    } else {
        ((p.r - p.rho) / (k as f64 * p.delta), false)
    };
    Ok(VelocityInterval {
        j,
        lo,
        hi,
        unbounded,
        ratio: p.n_max - j,
    })
}

/// The `j = 1` interval: a burst of `n_max - 1`.
pub fn stream_burst_interval(p: &ProblemInstance) -> VelocityInterval {
    lower_bound_interval(p, 1).unwrap_or(VelocityInterval {
        j: 1,
        lo: 0.0,
        hi: 0.0,
        unbounded: false,
        ratio: p.n_max.saturating_sub(1),
    })
}

/// Offline reference used for a competitive ratio.
#[derive(Debug, Clone, Copy)]
pub enum Oracle<'a> {
    /// Exhaustive search up to the given intruder count.
    BruteForce(usize),
    /// Longest path in the reachability graph; needs `r = rho`.
    Dag,
    /// A precomputed schedule, checked by replay.
    Witness(&'a Schedule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    BruteForce,
    Dag,
    Witness,
}

impl std::str::FromStr for OracleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brute" | "brute_force" | "brute-force" => Ok(Self::BruteForce),
            "dag" => Ok(Self::Dag),
            "witness" => Ok(Self::Witness),
            other => Err(format!("unknown oracle '{other}' (expected brute_force, dag, witness)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Ratio {
    Finite(f64),
    /// The offline algorithm captured something and the online one nothing.
    NotCompetitive,
}

impl Ratio {
    pub fn from_counts(online: usize, offline: usize) -> Result<Self, RatioError> {
        if offline == 0 {
            return Err(RatioError::NothingCapturable);
        }
        Ok(if online == 0 {
            Ratio::NotCompetitive
        } else {
            Ratio::Finite(offline as f64 / online as f64)
        })
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(x) => write!(f, "{x}"),
            Ratio::NotCompetitive => f.write_str("not c-competitive"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatioError {
    #[error("the offline optimum captures nothing; the ratio is undefined")]
    NothingCapturable,
    #[error(transparent)]
    Offline(#[from] OfflineError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("witness schedule rejected: {0}")]
    Witness(#[from] ScheduleError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub policy: String,
    pub online: usize,
    pub offline: usize,
    pub ratio: Ratio,
    pub oracle: OracleMode,
}

/// Runs `policy` on `seq` from `gamma0`, solves the same sequence offline from
/// the same heading, and reports `offline / online`.
pub fn competitive_ratio(
    p: &ProblemInstance,
    seq: &InputSequence,
    policy: &mut dyn Policy,
    gamma0: f64,
    oracle: Oracle<'_>,
) -> Result<RatioReport, RatioError> {
    let intruders = seq.intruders();
    let (offline, mode) = match oracle {
        Oracle::BruteForce(cap) => (brute_force_optimal(p, &intruders, gamma0, cap)?.0, OracleMode::BruteForce),
        Oracle::Dag => {
            let g = build_reachability_graph(p, &intruders, gamma0)?;
            (longest_path_schedule(&g, p).value(), OracleMode::Dag)
        }
        Oracle::Witness(s) => {
            run_fixed_schedule(p, &intruders, &s.locks(), gamma0)?;
            (s.value(), OracleMode::Witness)
        }
    };
    if offline == 0 {
        return Err(RatioError::NothingCapturable);
    }
    let online = simulate_sequence(p, seq, policy, gamma0, f64::INFINITY)?.captured_count();
    Ok(RatioReport {
        policy: policy.name().to_string(),
        online,
        offline,
        ratio: Ratio::from_counts(online, offline)?,
        oracle: mode,
    })
}

/// Base parameters plus the grids to sweep. `base.rho` and `base.v` are
/// overridden per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub base: ProblemInstance,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
    pub j: Vec<usize>,
}

impl SweepGrid {
    /// `N = 40`, `omega = 1`, `theta = pi/4`, `delta = 0.01`, `r = 1`, with
    /// `rho` from 0.3 to 0.999 and `v` in `(0, 0.5]`, and `j` in `{1, 9}`.
    pub fn figure4() -> Self {
        let mut rho: Vec<f64> = (30..=99).map(|k| k as f64 / 100.0).collect();
        rho.extend([0.995, 0.999]);
        Self {
            base: ProblemInstance {
                theta: std::f64::consts::FRAC_PI_4,
                rho: 0.5,
                v: 0.1,
                omega: 1.0,
                r: 1.0,
                n_max: 40,
                delta: 0.01,
            },
            rho,
            v: (1..=50).map(|k| k as f64 / 100.0).collect(),
            j: vec![1, 9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub rho: f64,
    pub v: f64,
    pub omega: f64,
    pub r: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub delta: f64,
    pub sit_bound: f64,
    pub sit_ok: bool,
    pub dpac_bound: f64,
    pub dpac_ok: bool,
    pub j: usize,
    pub lb_lo: f64,
    pub lb_hi: f64,
    pub in_lb: bool,
}

/// One row per `(rho, v, j)`, in grid order (rho outermost).
pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>, RegimeError> {
    if grid.rho.is_empty() {
        return Err(RegimeError::EmptyGrid("rho"));
    }
    if grid.v.is_empty() {
        return Err(RegimeError::EmptyGrid("v"));
    }
    if grid.j.is_empty() {
        return Err(RegimeError::EmptyGrid("j"));
    }
    for &j in &grid.j {
        lower_bound_interval(&grid.base, j)?;
    }
    let points: Vec<(f64, f64)> = grid
        .rho
        .iter()
        .flat_map(|&rho| grid.v.iter().map(move |&v| (rho, v)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(rho, v)| {
            let p = grid.base.with_rho(rho).with_v(v);
            let sit = sit_regime_bound(&p);
            let dpac = dpac_regime_bound(&p);
            grid.j
                .iter()
                .map(|&j| {
                    let lb = lower_bound_interval(&p, j).expect("j checked above");
                    SweepRow {
                        theta: p.theta,
                        rho,
                        v,
                        omega: p.omega,
                        r: p.r,
                        n: p.n_max,
                        delta: p.delta,
                        sit_bound: sit.v,
                        sit_ok: sit.admits(v),
                        dpac_bound: dpac.v,
                        dpac_ok: dpac.admits(v),
                        j,
                        lb_lo: lb.lo,
                        lb_hi: lb.hi,
                        in_lb: lb.contains(v),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    Ok(rows.into_iter().flatten().collect())
}

pub const CSV_HEADER: [&str; 15] = [
    "theta", "rho", "v", "omega", "r", "N", "delta", "sit_bound", "sit_ok", "dpac_bound", "dpac_ok",
    "j", "lb_lo", "lb_hi", "in_lb",
];

/// Formats like C's `%.9g`.
pub fn format_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    const SIG: i32 = 9;
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..SIG).contains(&exp) {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record([
            format_g9(row.theta),
            format_g9(row.rho),
            format_g9(row.v),
            format_g9(row.omega),
            format_g9(row.r),
            row.n.to_string(),
            format_g9(row.delta),
            format_g9(row.sit_bound),
            row.sit_ok.to_string(),
            format_g9(row.dpac_bound),
            row.dpac_ok.to_string(),
            row.j.to_string(),
            format_g9(row.lb_lo),
            format_g9(row.lb_hi),
            row.in_lb.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
