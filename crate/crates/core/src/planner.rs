//! Trajectory sampling and the offline / simulated-online planning loops.

use std::collections::HashMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::avoidance::{step, AvoidanceConfig, AvoidanceState, Mode};
use crate::error::{Error, Result};
use crate::model::{alpha, jacobians, JointVector, Pose, RobotModel, Unit};
use crate::screw::LimbPair;

/// Slack used when snapping sample times onto waypoint times and measurement grids.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub pose: Pose,
}

impl Waypoint {
    pub fn new(t: f64, pose: &[f64]) -> Self {
        Waypoint {
            t,
            pose: Pose::from_slice(pose),
        }
    }
}

fn check_waypoints(waypoints: &[Waypoint]) -> Result<()> {
    if waypoints.len() < 2 {
        return Err(Error::Trajectory(format!("need at least 2 waypoints, got {}", waypoints.len())));
    }
    let dim = waypoints[0].pose.len();
    for w in waypoints {
        if w.pose.len() != dim {
            return Err(Error::Trajectory("waypoints have differing dimensions".into()));
        }
        if !w.t.is_finite() || w.pose.iter().any(|v| !v.is_finite()) {
            return Err(Error::Trajectory("waypoint has non-finite values".into()));
        }
    }
    for pair in waypoints.windows(2) {
        if pair[1].t <= pair[0].t {
            return Err(Error::Trajectory(format!(
                "waypoint times must increase strictly ({} then {})",
                pair[0].t, pair[1].t
            )));
        }
    }
    Ok(())
}

/// Piecewise-linear samples at `t = k·t_s` from the first waypoint time.
pub fn interpolate(waypoints: &[Waypoint], t_s: f64) -> Result<Vec<(f64, Pose)>> {
    check_waypoints(waypoints)?;
    if !(t_s.is_finite() && t_s > 0.0) {
        return Err(Error::Trajectory(format!("sample time must be positive, got {t_s}")));
    }
    let t0 = waypoints[0].t;
    let span = waypoints[waypoints.len() - 1].t - t0;
    let n = (span / t_s + TIME_EPS).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let t = t0 + k as f64 * t_s;
        while seg + 2 < waypoints.len() && t > waypoints[seg + 1].t + TIME_EPS {
            seg += 1;
        }
        let (a, b) = (&waypoints[seg], &waypoints[seg + 1]);
        let pose = if (t - a.t).abs() <= TIME_EPS {
            a.pose.clone()
        } else if (t - b.t).abs() <= TIME_EPS {
            b.pose.clone()
        } else {
            let s = (t - a.t) / (b.t - a.t);
            Pose(&a.pose.0 + (&b.pose.0 - &a.pose.0) * s)
        };
        out.push((t, pose));
    }
    Ok(out)
}

/// One control tick of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRow {
    pub t: f64,
    /// Time stamp of the measurement used as `x_m`.
    pub t_meas: f64,
    pub x_r: Vec<f64>,
    pub x_m: Vec<f64>,
    pub x_d: Vec<f64>,
    pub q_r: Vec<f64>,
    pub q_d: Vec<f64>,
    pub alpha_r: f64,
    pub alpha_m: f64,
    pub alpha_d: Option<f64>,
    pub pair_m: LimbPair,
    pub det_jd_r: f64,
    pub det_jd_d: f64,
    pub delta_l: Vec<i64>,
    pub mode: Mode,
    pub no_improvement: bool,
    pub return_blocked: bool,
    pub measurement_trigger: bool,
    pub step_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub ticks: usize,
    /// Mean step time, s.
    pub t_l: f64,
    /// Largest |q_d − q_r| over ticks and actuators.
    pub delta_q: f64,
    /// Mean over ticks of the largest actuator rate deviation |Δq_d − Δq_r| / t_s.
    pub delta_qdot: f64,
    pub max_deviation: Vec<f64>,
    pub max_abs_delta_l: Vec<i64>,
    pub final_delta_l: Vec<i64>,
    pub avoid_ticks: usize,
    pub hold_ticks: usize,
    pub return_ticks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub robot: String,
    pub pose_labels: Vec<String>,
    pub pose_units: Vec<Unit>,
    pub joint_labels: Vec<String>,
    pub joint_units: Vec<Unit>,
    pub t_s: f64,
    pub rows: Vec<TickRow>,
    /// Set when the run stopped early; `rows` then holds the ticks completed.
    pub aborted: Option<Error>,
}

impl RunReport {
    fn empty(model: &dyn RobotModel, cfg: &AvoidanceConfig) -> Self {
        RunReport {
            robot: model.name().to_string(),
            pose_labels: model.pose_labels().iter().map(|s| s.to_string()).collect(),
            pose_units: model.pose_units().to_vec(),
            joint_labels: model.joint_labels().iter().map(|s| s.to_string()).collect(),
            joint_units: model.joint_units().to_vec(),
            t_s: cfg.t_s,
            rows: Vec::new(),
            aborted: None,
        }
    }

    pub fn summary(&self) -> Summary {
        let f = self.joint_labels.len();
        let mut s = Summary {
            ticks: self.rows.len(),
            t_l: 0.0,
            delta_q: 0.0,
            delta_qdot: 0.0,
            max_deviation: vec![0.0; f],
            max_abs_delta_l: vec![0; f],
            final_delta_l: self.rows.last().map(|r| r.delta_l.clone()).unwrap_or_else(|| vec![0; f]),
            avoid_ticks: 0,
            hold_ticks: 0,
            return_ticks: 0,
        };
        if self.rows.is_empty() {
            return s;
        }
        let mut rate_sum = 0.0;
        for (k, row) in self.rows.iter().enumerate() {
            s.t_l += row.step_time;
            for a in 0..f {
                let dev = (row.q_d[a] - row.q_r[a]).abs();
                s.max_deviation[a] = s.max_deviation[a].max(dev);
                s.max_abs_delta_l[a] = s.max_abs_delta_l[a].max(row.delta_l[a].abs());
            }
            if k > 0 {
                let prev = &self.rows[k - 1];
                let worst = (0..f)
                    .map(|a| ((row.q_d[a] - prev.q_d[a]) - (row.q_r[a] - prev.q_r[a])).abs() / self.t_s)
                    .fold(0.0, f64::max);
                rate_sum += worst;
            }
            match row.mode {
                Mode::Avoid => s.avoid_ticks += 1,
                Mode::Hold => s.hold_ticks += 1,
                Mode::Return => s.return_ticks += 1,
                Mode::Track => {}
            }
        }
        s.t_l /= self.rows.len() as f64;
        s.delta_q = s.max_deviation.iter().copied().fold(0.0, f64::max);
        if self.rows.len() > 1 {
            s.delta_qdot = rate_sum / (self.rows.len() - 1) as f64;
        }
        s
    }
}

fn det_or_nan(model: &dyn RobotModel, pose: &Pose) -> f64 {
    jacobians(model, pose).map(|j| j.det_forward).unwrap_or(f64::NAN)
}

fn check_start(model: &dyn RobotModel, cfg: &AvoidanceConfig, x0: &Pose) -> Result<()> {
    model.inverse_kinematics(x0)?;
    let a = alpha(model, x0)?;
    if a.value < cfg.lim_alpha {
        return Err(Error::Trajectory(format!(
            "start pose is inside the singular zone (alpha {:.4} deg < {:.4} deg)",
            a.value.to_degrees(),
            cfg.lim_alpha.to_degrees()
        )));
    }
    Ok(())
}

fn tick_row(
    model: &dyn RobotModel,
    t: f64,
    t_meas: f64,
    x_r: &Pose,
    x_m: &Pose,
    out: &crate::avoidance::StepOutput,
) -> TickRow {
    let d = &out.diagnostics;
    TickRow {
        t,
        t_meas,
        x_r: x_r.as_slice().to_vec(),
        x_m: x_m.as_slice().to_vec(),
        x_d: out.x_d.as_slice().to_vec(),
        q_r: out.q_r.as_slice().to_vec(),
        q_d: out.q_d.as_slice().to_vec(),
        alpha_r: d.alpha_r,
        alpha_m: d.alpha_m,
        alpha_d: d.alpha_d,
        pair_m: d.pair_m,
        det_jd_r: det_or_nan(model, x_r),
        det_jd_d: det_or_nan(model, &out.x_d),
        delta_l: d.delta_l.clone(),
        mode: d.mode,
        no_improvement: d.no_improvement,
        return_blocked: d.return_blocked,
        measurement_trigger: d.measurement_trigger,
        step_time: d.step_time,
    }
}

/// Offline planning: `x_m` starts at `x_r(0)` and is then the previous `x_d`.
pub fn run_offline(model: &dyn RobotModel, cfg: &AvoidanceConfig, waypoints: &[Waypoint]) -> Result<RunReport> {
    cfg.validate()?;
    let samples = interpolate(waypoints, cfg.t_s)?;
    check_start(model, cfg, &samples[0].1)?;
    let mut report = RunReport::empty(model, cfg);
    let mut state = AvoidanceState::new(model.dof());
    let mut x_m = samples[0].1.clone();
    for (t, x_r) in &samples {
        match step(model, cfg, &state, x_r, &x_m, *t) {
            Ok(out) => {
                report.rows.push(tick_row(model, *t, *t, x_r, &x_m, &out));
                state = out.state;
                x_m = out.x_d;
            }
            Err(e) => {
                report.aborted = Some(e);
                break;
            }
        }
    }
    Ok(report)
}

/// Pose offset added to measurements with `t0 ≤ t ≤ t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    pub t0: f64,
    pub t1: f64,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantOptions {
    /// Measurement rate, Hz.
    pub measurement_rate: f64,
    /// First-order actuator time constant, s; 0 reaches each command immediately.
    pub lag: f64,
    /// Standard deviation of additive noise on length coordinates, m.
    pub noise_length: f64,
    /// Standard deviation of additive noise on angle coordinates, rad.
    pub noise_angle: f64,
    pub seed: u64,
    pub disturbance: Option<Disturbance>,
}

impl Default for PlantOptions {
    fn default() -> Self {
        PlantOptions {
            measurement_rate: 120.0,
            lag: 0.0,
            noise_length: 0.0,
            noise_angle: 0.0,
            seed: 0,
            disturbance: None,
        }
    }
}

impl PlantOptions {
    /// Tracking-system accuracy used when noise is switched on.
    pub const TRACKER_SIGMA: f64 = 0.0005;

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.measurement_rate.is_finite() && self.measurement_rate > 0.0) {
            return Err(Error::Config("measurement rate must be positive".into()));
        }
        if !(self.lag >= 0.0 && self.noise_length >= 0.0 && self.noise_angle >= 0.0) {
            return Err(Error::Config("lag and noise levels must be non-negative".into()));
        }
        if let Some(d) = &self.disturbance {
            if !(d.t0 <= d.t1) || d.offset.len() != dim {
                return Err(Error::Config(format!(
                    "disturbance needs t0 <= t1 and {dim} offsets, got [{}, {}] with {}",
                    d.t0,
                    d.t1,
                    d.offset.len()
                )));
            }
        }
        Ok(())
    }
}

/// Kinematic plant: joint state relaxing toward the last command.
struct Plant<'a> {
    model: &'a dyn RobotModel,
    lag: f64,
    /// (issue time, command, joint state at issue time, pose at issue time)
    commands: Vec<(f64, JointVector, JointVector, Pose)>,
    initial: (JointVector, Pose),
}

impl Plant<'_> {
    fn joint_state(&self, tau: f64) -> (JointVector, Pose) {
        // latest command issued strictly before tau
        let idx = self.commands.partition_point(|c| c.0 < tau - TIME_EPS);
        if idx == 0 {
            return self.initial.clone();
        }
        let (t_c, cmd, q_start, pose_start) = &self.commands[idx - 1];
        if self.lag == 0.0 {
            return (cmd.clone(), pose_start.clone());
        }
        let decay = (-(tau - t_c) / self.lag).exp();
        let q = JointVector(&cmd.0 + (&q_start.0 - &cmd.0) * decay);
        (q, pose_start.clone())
    }

    fn pose_at(&self, tau: f64, x_d_of: &HashMap<usize, Pose>) -> Result<Pose> {
        let idx = self.commands.partition_point(|c| c.0 < tau - TIME_EPS);
        if self.lag == 0.0 {
            if idx == 0 {
                return Ok(self.initial.1.clone());
            }
            return Ok(x_d_of[&(idx - 1)].clone());
        }
        let (q, seed) = self.joint_state(tau);
        self.model.forward_kinematics(&q, &seed)
    }
}

/// Simulated online loop: the plant follows the commands, a tracker samples
/// it on its own grid and each control tick uses the latest measurement.
pub fn run_online_sim(
    model: &dyn RobotModel,
    cfg: &AvoidanceConfig,
    waypoints: &[Waypoint],
    plant: &PlantOptions,
) -> Result<RunReport> {
    cfg.validate()?;
    let samples = interpolate(waypoints, cfg.t_s)?;
    let dim = samples[0].1.len();
    plant.validate(dim)?;
    check_start(model, cfg, &samples[0].1)?;

    let q0 = model.inverse_kinematics(&samples[0].1)?;
    let mut sim = Plant {
        model,
        lag: plant.lag,
        commands: Vec::with_capacity(samples.len()),
        initial: (q0, samples[0].1.clone()),
    };
    let mut x_d_of: HashMap<usize, Pose> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(plant.seed);
    let noise_l = Normal::new(0.0, plant.noise_length).map_err(|e| Error::Config(e.to_string()))?;
    let noise_a = Normal::new(0.0, plant.noise_angle).map_err(|e| Error::Config(e.to_string()))?;
    let units = model.pose_units();
    let mut measurements: HashMap<i64, Pose> = HashMap::new();

    let mut report = RunReport::empty(model, cfg);
    let mut state = AvoidanceState::new(model.dof());
    for (k, (t, x_r)) in samples.iter().enumerate() {
        let j = ((t - samples[0].0) * plant.measurement_rate + TIME_EPS).floor() as i64;
        let t_meas = samples[0].0 + j as f64 / plant.measurement_rate;
        let x_m = match measurements.get(&j) {
            Some(m) => m.clone(),
            None => {
                let mut m = match sim.pose_at(t_meas, &x_d_of) {
                    Ok(p) => p,
                    Err(e) => {
                        report.aborted = Some(Error::Trapped {
                            t: *t,
                            reason: format!("plant pose unavailable: {e}"),
                        });
                        break;
                    }
                };
                for (c, unit) in units.iter().enumerate() {
                    let sigma = match unit {
                        Unit::Length => plant.noise_length,
                        Unit::Angle => plant.noise_angle,
                    };
                    if sigma > 0.0 {
                        m[c] += match unit {
                            Unit::Length => rng.sample(noise_l),
                            Unit::Angle => rng.sample(noise_a),
                        };
                    }
                }
                if let Some(d) = &plant.disturbance {
                    if t_meas >= d.t0 - TIME_EPS && t_meas <= d.t1 + TIME_EPS {
                        m.0 += DVector::from_column_slice(&d.offset);
                    }
                }
                measurements.insert(j, m.clone());
                m
            }
        };
        match step(model, cfg, &state, x_r, &x_m, *t) {
            Ok(out) => {
                report.rows.push(tick_row(model, *t, t_meas, x_r, &x_m, &out));
                let (q_now, pose_now) = sim.joint_state(*t + TIME_EPS * 0.5);
                let start_pose = if plant.lag == 0.0 { out.x_d.clone() } else { pose_now };
                sim.commands.push((*t, out.q_d.clone(), q_now, start_pose));
                x_d_of.insert(k, out.x_d.clone());
                state = out.state;
            }
            Err(e) => {
                report.aborted = Some(e);
                break;
            }
        }
    }
    Ok(report)
}

/// Mean index value at the point where each path first loses control, with
/// loss of control taken as `|det J_D| < eps · |det J_D(start)|`.
pub fn calibrate_lim(model: &dyn RobotModel, family: &[Vec<Waypoint>], t_s: f64, eps: f64) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::Trajectory("calibration family is empty".into()));
    }
    let mut total = 0.0;
    for (n, path) in family.iter().enumerate() {
        let samples = interpolate(path, t_s)?;
        let scale = jacobians(model, &samples[0].1)?.det_forward.abs();
        let mut hit = None;
        for (_, pose) in &samples {
            let Ok(j) = jacobians(model, pose) else { break };
            if j.det_forward.abs() < eps * scale {
                hit = Some(alpha(model, pose).map(|a| a.value).unwrap_or(0.0));
                break;
            }
        }
        total += hit.ok_or_else(|| {
            Error::Trajectory(format!("path {} never drops below the det J_D threshold", n + 1))
        })?;
    }
    Ok(total / family.len() as f64)
}
