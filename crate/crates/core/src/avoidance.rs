//! Per-tick singularity avoidance.
//!
//! Each tick the reference pose `x_r` and the measured pose `x_m` are scored
//! with the proximity index α. Close to a singularity the integer accumulator
//! `Δl` is nudged on the two actuators responsible (the limb pair attaining
//! α at `x_m`), and the command becomes `q_d = q_r + v_d·t_s·Δl`. Once both
//! poses are clear again `Δl` is walked back to zero.

use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{alpha, pair_index, within_limits, JointVector, Pose, RobotModel};
use crate::screw::LimbPair;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidanceConfig {
    /// Sample time, s.
    pub t_s: f64,
    /// Actuator deviation rate, native actuator units per second.
    pub v_d: f64,
    /// Proximity threshold, rad.
    pub lim_alpha: f64,
}

impl AvoidanceConfig {
    pub fn five_bar() -> Self {
        AvoidanceConfig {
            t_s: 0.020,
            v_d: 0.5,
            lim_alpha: 0.1047,
        }
    }

    pub fn spatial() -> Self {
        AvoidanceConfig {
            t_s: 0.010,
            v_d: 0.01,
            lim_alpha: 0.0349,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_s.is_finite() && self.t_s > 0.0) {
            return Err(Error::Config(format!("t_s must be positive, got {}", self.t_s)));
        }
        if !(self.v_d.is_finite() && self.v_d > 0.0) {
            return Err(Error::Config(format!("v_d must be positive, got {}", self.v_d)));
        }
        if !(self.lim_alpha > 0.0 && self.lim_alpha < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!("lim_alpha must lie in (0, pi/2), got {}", self.lim_alpha)));
        }
        Ok(())
    }

    /// Joint increment per accumulator count.
    pub fn quantum(&self) -> f64 {
        self.v_d * self.t_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Track,
    Avoid,
    Hold,
    Return,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Track => "TRACK",
            Mode::Avoid => "AVOID",
            Mode::Hold => "HOLD",
            Mode::Return => "RETURN",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "TRACK" => Ok(Mode::Track),
            "AVOID" => Ok(Mode::Avoid),
            "HOLD" => Ok(Mode::Hold),
            "RETURN" => Ok(Mode::Return),
            other => Err(Error::Parse(format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvoidanceState {
    pub delta_l: Vec<i64>,
    pub mode: Mode,
    pub i_ch: Option<LimbPair>,
    pub i_re: Option<LimbPair>,
}

impl AvoidanceState {
    pub fn new(dof: usize) -> Self {
        AvoidanceState {
            delta_l: vec![0; dof],
            mode: Mode::Track,
            i_ch: None,
            i_re: None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.delta_l.iter().all(|d| *d == 0)
    }
}

/// Candidate increments for the two selected rows, one column each.
pub const M_AV: [[i64; 8]; 2] = [[1, -1, 1, -1, 1, -1, 0, 0], [1, -1, -1, 1, 0, 0, 1, -1]];

pub fn l1(v: &[i64]) -> i64 {
    v.iter().map(|d| d.abs()).sum()
}

/// Why a candidate was not eligible.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    JointLimits,
    Kinematics(Error),
    Index(Error),
    NotDecreasing,
    Overshoot,
    BelowThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub column: usize,
    pub delta_l: Vec<i64>,
    pub pose: Option<Pose>,
    /// Score used for selection: the i_ch pair index when avoiding, α when returning.
    pub score: Option<f64>,
    pub rejected: Option<Rejection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub alpha_r: f64,
    pub pair_r: LimbPair,
    pub alpha_m: f64,
    pub pair_m: LimbPair,
    /// α at the commanded pose, `None` if undefined there.
    pub alpha_d: Option<f64>,
    pub mode: Mode,
    pub i_ch: Option<LimbPair>,
    pub i_re: Option<LimbPair>,
    pub delta_l: Vec<i64>,
    pub candidates: Vec<Candidate>,
    /// AVOID found no candidate improving on α_m; Δl was kept.
    pub no_improvement: bool,
    /// RETURN found no admissible candidate; Δl was kept.
    pub return_blocked: bool,
    /// AVOID was entered because of the measured pose while the reference was clear.
    pub measurement_trigger: bool,
    pub step_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub q_r: JointVector,
    pub q_d: JointVector,
    pub x_d: Pose,
    pub state: AvoidanceState,
    pub diagnostics: Diagnostics,
}

fn command(cfg: &AvoidanceConfig, q_r: &JointVector, delta_l: &[i64]) -> JointVector {
    let mut q = q_r.clone();
    for (qk, d) in q.iter_mut().zip(delta_l) {
        *qk += cfg.quantum() * (*d as f64);
    }
    q
}

fn with_column(delta_l: &[i64], rows: LimbPair, column: usize) -> Vec<i64> {
    let mut out = delta_l.to_vec();
    out[rows.i] += M_AV[0][column];
    out[rows.j] += M_AV[1][column];
    out
}

/// Joint command and pose for an accumulator value, or the reason it is infeasible.
fn realize(
    model: &dyn RobotModel,
    cfg: &AvoidanceConfig,
    q_r: &JointVector,
    delta_l: &[i64],
    x_m: &Pose,
) -> std::result::Result<(JointVector, Pose), Rejection> {
    let q = command(cfg, q_r, delta_l);
    if !within_limits(model, &q) {
        return Err(Rejection::JointLimits);
    }
    let x = model.forward_kinematics(&q, x_m).map_err(Rejection::Kinematics)?;
    Ok((q, x))
}

/// Fig-4a style modification of Δl on the rows of `i_ch`.
///
/// Returns the new accumulator, the candidate table and whether the best
/// candidate failed to improve on `alpha_m`.
pub fn avoid_modify(
    model: &dyn RobotModel,
    cfg: &AvoidanceConfig,
    delta_l: &[i64],
    q_r: &JointVector,
    x_m: &Pose,
    alpha_m: f64,
    i_ch: LimbPair,
) -> Result<(Vec<i64>, Vec<Candidate>, bool)> {
    let mut table = Vec::with_capacity(8);
    let mut best: Option<(usize, f64)> = None;
    for column in 0..8 {
        let dl = with_column(delta_l, i_ch, column);
        let mut cand = Candidate {
            column,
            delta_l: dl,
            pose: None,
            score: None,
            rejected: None,
        };
        match realize(model, cfg, q_r, &cand.delta_l, x_m) {
            Err(r) => cand.rejected = Some(r),
            Ok((_, x)) => {
                match pair_index(model, &x, i_ch) {
                    Ok(a) => {
                        cand.score = Some(a);
                        if best.is_none_or(|(_, b)| a > b) {
                            best = Some((column, a));
                        }
                    }
                    Err(e) => cand.rejected = Some(Rejection::Index(e)),
                }
                cand.pose = Some(x);
            }
        }
        table.push(cand);
    }
    match best {
        None => Err(Error::InfeasibleCommand("all avoidance candidates are infeasible".into())),
        Some((column, a)) if a > alpha_m => Ok((table[column].delta_l.clone(), table, false)),
        Some(_) => Ok((delta_l.to_vec(), table, true)),
    }
}

/// The two rows with the largest |Δl|, lowest index first on ties.
pub fn return_rows(delta_l: &[i64]) -> LimbPair {
    let mut idx: Vec<usize> = (0..delta_l.len()).collect();
    idx.sort_by_key(|&k| (std::cmp::Reverse(delta_l[k].abs()), k));
    LimbPair::new(idx[0].min(idx[1]), idx[0].max(idx[1]))
}

/// Fig-4b style step of Δl back toward zero. `None` means no admissible
/// candidate, the caller holds.
pub fn return_step(
    model: &dyn RobotModel,
    cfg: &AvoidanceConfig,
    delta_l: &[i64],
    q_r: &JointVector,
    x_m: &Pose,
) -> (Option<Vec<i64>>, LimbPair, Vec<Candidate>) {
    let rows = return_rows(delta_l);
    let base = l1(delta_l);
    let mut table = Vec::with_capacity(8);
    let mut best: Option<(usize, i64, f64)> = None;
    for column in 0..8 {
        let dl = with_column(delta_l, rows, column);
        let mut cand = Candidate {
            column,
            delta_l: dl,
            pose: None,
            score: None,
            rejected: None,
        };
        let overshoot = [rows.i, rows.j]
            .iter()
            .any(|&r| cand.delta_l[r] * delta_l[r] < 0 || (delta_l[r] == 0 && cand.delta_l[r] != 0));
        let norm = l1(&cand.delta_l);
        if norm >= base {
            cand.rejected = Some(Rejection::NotDecreasing);
        } else if overshoot {
            cand.rejected = Some(Rejection::Overshoot);
        } else {
            match realize(model, cfg, q_r, &cand.delta_l, x_m) {
                Err(r) => cand.rejected = Some(r),
                Ok((_, x)) => {
                    match alpha(model, &x) {
                        Ok(a) => {
                            cand.score = Some(a.value);
                            if a.value < cfg.lim_alpha {
                                cand.rejected = Some(Rejection::BelowThreshold);
                            } else if best.is_none_or(|(_, n, s)| norm < n || (norm == n && a.value > s)) {
                                best = Some((column, norm, a.value));
                            }
                        }
                        Err(e) => cand.rejected = Some(Rejection::Index(e)),
                    }
                    cand.pose = Some(x);
                }
            }
        }
        table.push(cand);
    }
    let chosen = best.map(|(c, _, _)| table[c].delta_l.clone());
    (chosen, rows, table)
}

/// One control tick. `t` is only used to label errors.
pub fn step(
    model: &dyn RobotModel,
    cfg: &AvoidanceConfig,
    state: &AvoidanceState,
    x_r: &Pose,
    x_m: &Pose,
    t: f64,
) -> Result<StepOutput> {
    let start = Instant::now();
    let q_r = model.inverse_kinematics(x_r)?;
    let a_r = alpha(model, x_r)?;
    let a_m = alpha(model, x_m)?;
    let lim = cfg.lim_alpha;

    let mut next = state.clone();
    let mut candidates = Vec::new();
    let mut no_improvement = false;
    let mut return_blocked = false;
    let mut measurement_trigger = false;
    let mut chosen_pose: Option<Pose> = None;

    if a_r.value < lim || a_m.value < lim {
        if a_m.value > lim && a_r.value < lim {
            next.mode = Mode::Hold;
        } else {
            measurement_trigger = a_r.value >= lim;
            next.mode = Mode::Avoid;
            next.i_ch = Some(a_m.pair);
            let (dl, table, flag) = avoid_modify(model, cfg, &state.delta_l, &q_r, x_m, a_m.value, a_m.pair)
                .map_err(|e| Error::Trapped {
                    t,
                    reason: e.to_string(),
                })?;
            if !flag {
                chosen_pose = table.iter().find(|c| c.delta_l == dl).and_then(|c| c.pose.clone());
            }
            next.delta_l = dl;
            no_improvement = flag;
            candidates = table;
        }
    } else if !state.is_zero() {
        next.mode = Mode::Return;
        let (dl, rows, table) = return_step(model, cfg, &state.delta_l, &q_r, x_m);
        next.i_re = Some(rows);
        match dl {
            Some(dl) => {
                chosen_pose = table.iter().find(|c| c.delta_l == dl).and_then(|c| c.pose.clone());
                next.delta_l = dl;
            }
            None => {
                next.mode = Mode::Hold;
                return_blocked = true;
            }
        }
        candidates = table;
    } else {
        next.mode = Mode::Track;
        next.i_ch = None;
        next.i_re = None;
    }

    let q_d = command(cfg, &q_r, &next.delta_l);
    let x_d = if next.is_zero() {
        x_r.clone()
    } else if let Some(x) = chosen_pose {
        x
    } else {
        model.forward_kinematics(&q_d, x_m).map_err(|e| Error::Trapped {
            t,
            reason: format!("held command is infeasible: {e}"),
        })?
    };
    let alpha_d = alpha(model, &x_d).ok().map(|a| a.value);
    let step_time = start.elapsed().as_secs_f64();

    let diagnostics = Diagnostics {
        alpha_r: a_r.value,
        pair_r: a_r.pair,
        alpha_m: a_m.value,
        pair_m: a_m.pair,
        alpha_d,
        mode: next.mode,
        i_ch: next.i_ch,
        i_re: next.i_re,
        delta_l: next.delta_l.clone(),
        candidates,
        no_improvement,
        return_blocked,
        measurement_trigger,
        step_time,
    };
    Ok(StepOutput {
        q_r,
        q_d,
        x_d,
        state: next,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mav_columns_are_distinct_unit_moves() {
        let mut seen = std::collections::HashSet::new();
        for k in 0..8 {
            let c = (M_AV[0][k], M_AV[1][k]);
            assert!(c != (0, 0));
            assert!(c.0.abs() <= 1 && c.1.abs() <= 1);
            assert!(seen.insert(c));
        }
    }

    #[test]
    fn return_rows_prefers_largest_then_lowest() {
        assert_eq!(return_rows(&[0, 0, 1, 1]), LimbPair::new(2, 3));
        assert_eq!(return_rows(&[0, 3, -5, 3]), LimbPair::new(1, 2));
        assert_eq!(return_rows(&[0, 0, 0, 0]), LimbPair::new(0, 1));
        assert_eq!(return_rows(&[2, -1]), LimbPair::new(0, 1));
    }

    #[test]
    fn config_validation() {
        assert!(AvoidanceConfig::five_bar().validate().is_ok());
        assert!(AvoidanceConfig::spatial().validate().is_ok());
        let bad = AvoidanceConfig {
            lim_alpha: 2.0,
            ..AvoidanceConfig::spatial()
        };
        assert!(bad.validate().is_err());
        let bad = AvoidanceConfig {
            t_s: 0.0,
            ..AvoidanceConfig::spatial()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mode_strings_round_trip() {
        for m in [Mode::Track, Mode::Avoid, Mode::Hold, Mode::Return] {
            assert_eq!(Mode::parse(m.as_str()).unwrap(), m);
        }
        assert!(Mode::parse("IDLE").is_err());
    }
}
