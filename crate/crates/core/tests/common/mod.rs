#![allow(dead_code)]

use nalgebra::DVector;
use ots_core::five_bar::FiveBar;
use ots_core::model::{alpha, jacobians, within_limits, JointVector, Pose, RobotModel};
use ots_core::planner::Waypoint;
use ots_core::spatial::Spatial;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn deg(v: f64) -> f64 {
    v.to_radians()
}

pub fn table2() -> Vec<Waypoint> {
    vec![
        Waypoint::new(0.0, &[0.0, 0.09]),
        Waypoint::new(2.0, &[-0.03, 0.05]),
        Waypoint::new(4.0, &[0.0, 0.09]),
    ]
}

pub fn table5_start() -> [f64; 4] {
    [0.038, 0.640, deg(1.14), deg(3.64)]
}

pub fn table5_singular() -> [f64; 4] {
    [0.016, 0.707, deg(8.619), deg(18.15)]
}

pub fn table5() -> Vec<Waypoint> {
    vec![
        Waypoint::new(0.0, &table5_start()),
        Waypoint::new(12.76, &table5_singular()),
        Waypoint::new(40.53, &table5_start()),
    ]
}

pub fn table6() -> Vec<Waypoint> {
    let start = [0.170, 0.668, deg(12.56), deg(8.70)];
    vec![
        Waypoint::new(0.0, &start),
        Waypoint::new(16.35, &table5_singular()),
        Waypoint::new(47.69, &start),
    ]
}

/// Reachable pose within joint limits whose detector index exceeds `min_alpha`.
pub fn usable(model: &dyn RobotModel, pose: &Pose, min_alpha: f64) -> bool {
    let Ok(q) = model.inverse_kinematics(pose) else { return false };
    if !within_limits(model, &q) {
        return false;
    }
    let ok_alpha = alpha(model, pose).map(|a| a.value > min_alpha).unwrap_or(false);
    ok_alpha && jacobians(model, pose).map(|j| j.det_forward.abs() > 1e-12).unwrap_or(false)
}

pub fn random_five_bar_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::from_slice(&[rng.random_range(-0.05..0.05), rng.random_range(0.03..0.11)])
}

pub fn random_spatial_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::from_slice(&[
        rng.random_range(-0.05..0.2),
        rng.random_range(0.55..0.8),
        deg(rng.random_range(-20.0..20.0)),
        deg(rng.random_range(-25.0..25.0)),
    ])
}

/// `n` usable poses drawn with a fixed seed.
pub fn sample_poses(model: &dyn RobotModel, n: usize, seed: u64, min_alpha: f64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n {
        tries += 1;
        assert!(tries < 200 * n, "pose sampler starved");
        let p = match model.dof() {
            2 => random_five_bar_pose(&mut rng),
            _ => random_spatial_pose(&mut rng),
        };
        if usable(model, &p, min_alpha) {
            out.push(p);
        }
    }
    out
}

/// Motion of the platform when only actuator `k` moves, by central differences
/// through forward kinematics, in the model's motion coordinates.
pub fn single_actuator_motion(model: &dyn RobotModel, pose: &Pose, k: usize, h: f64) -> DVector<f64> {
    let q = model.inverse_kinematics(pose).unwrap();
    let shifted = |s: f64| {
        let mut qq = q.0.clone();
        qq[k] += s;
        model.forward_kinematics(&JointVector(qq), pose).unwrap()
    };
    let rate = (&shifted(h).0 - &shifted(-h).0) / (2.0 * h);
    model.motion_coordinates(&model.platform_twist(pose, &rate))
}

/// Angle between two lines, folded to [0, π/2].
pub fn line_angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).abs().min(1.0);
    c.acos()
}

pub fn five_bar() -> FiveBar {
    FiveBar::default()
}

pub fn spatial() -> Spatial {
    Spatial::default()
}
