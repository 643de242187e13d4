//! Symmetric planar five-bar (5R) mechanism.
//!
//! Base pivots `A1 = (-r10, 0)` and `A2 = (r20, 0)`, origin midway between
//! them. Limb `i` has a proximal link `r_i1` driven at `A_i` and a distal link
//! `r_i2` joining the elbow `B_i` to the end-effector point `P`. Both
//! transmission wrenches are pure forces along the distal links through `P`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::model::{IndexKind, JointLimit, JointVector, Pose, RobotModel, Unit};
use crate::numkit::null_unit;
use crate::screw::{folded_angle, Screw};

/// Slack allowed on the triangle inequality before a pose is rejected.
const REACH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveBarGeometry {
    pub r10: f64,
    pub r20: f64,
    pub r11: f64,
    pub r21: f64,
    pub r12: f64,
    pub r22: f64,
}

impl Default for FiveBarGeometry {
    fn default() -> Self {
        FiveBarGeometry {
            r10: 0.04,
            r20: 0.04,
            r11: 0.06,
            r21: 0.06,
            r12: 0.05,
            r22: 0.05,
        }
    }
}

impl FiveBarGeometry {
    pub fn validate(&self) -> Result<()> {
        let all = [self.r10, self.r20, self.r11, self.r21, self.r12, self.r22];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("five-bar lengths must be positive: {all:?}")));
        }
        Ok(())
    }

    pub fn base(&self, limb: usize) -> Vector2<f64> {
        match limb {
            0 => Vector2::new(-self.r10, 0.0),
            _ => Vector2::new(self.r20, 0.0),
        }
    }

    pub fn proximal(&self, limb: usize) -> f64 {
        if limb == 0 { self.r11 } else { self.r21 }
    }

    pub fn distal(&self, limb: usize) -> f64 {
        if limb == 0 { self.r12 } else { self.r22 }
    }

    pub fn elbow(&self, limb: usize, q_active: f64) -> Vector2<f64> {
        self.base(limb) + self.proximal(limb) * Vector2::new(q_active.cos(), q_active.sin())
    }
}

/// Side of the directed line `A_i → P` on which the elbow `B_i` lies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElbowSide {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WorkingMode {
    pub limb1: ElbowSide,
    pub limb2: ElbowSide,
}

impl WorkingMode {
    /// Elbows pointing away from each other: limb-1 elbow on the −x side of
    /// `A1P`, limb-2 elbow on the +x side of `A2P`.
    pub const ELBOWS_OUT: WorkingMode = WorkingMode {
        limb1: ElbowSide::Left,
        limb2: ElbowSide::Right,
    };

    /// Fixed search order used when validating a mode against a singular pose.
    pub const SEARCH_ORDER: [WorkingMode; 4] = [
        WorkingMode::ELBOWS_OUT,
        WorkingMode {
            limb1: ElbowSide::Right,
            limb2: ElbowSide::Left,
        },
        WorkingMode {
            limb1: ElbowSide::Left,
            limb2: ElbowSide::Left,
        },
        WorkingMode {
            limb1: ElbowSide::Right,
            limb2: ElbowSide::Right,
        },
    ];

    pub fn side(&self, limb: usize) -> ElbowSide {
        if limb == 0 { self.limb1 } else { self.limb2 }
    }

    pub fn id(&self) -> &'static str {
        match (self.limb1, self.limb2) {
            (ElbowSide::Left, ElbowSide::Right) => "elbows_out",
            (ElbowSide::Right, ElbowSide::Left) => "elbows_in",
            (ElbowSide::Left, ElbowSide::Left) => "left_left",
            (ElbowSide::Right, ElbowSide::Right) => "right_right",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        WorkingMode::SEARCH_ORDER
            .into_iter()
            .find(|m| m.id() == id)
            .ok_or_else(|| Error::Config(format!("unknown working mode '{id}'")))
    }
}

impl Default for WorkingMode {
    fn default() -> Self {
        WorkingMode::ELBOWS_OUT
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPose {
    pub x_p: f64,
    pub y_p: f64,
}

impl PlanarPose {
    pub fn new(x_p: f64, y_p: f64) -> Self {
        PlanarPose { x_p, y_p }
    }

    pub fn point(&self) -> Vector2<f64> {
        Vector2::new(self.x_p, self.y_p)
    }
}

impl From<&Pose> for PlanarPose {
    fn from(p: &Pose) -> Self {
        PlanarPose::new(p[0], p[1])
    }
}

impl From<PlanarPose> for Pose {
    fn from(p: PlanarPose) -> Self {
        Pose::from_slice(&[p.x_p, p.y_p])
    }
}

/// Active joints `q11`, `q21` measured from +x; passive `q12`, `q22` relative
/// to the proximal link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveBarJoints {
    pub q11: f64,
    pub q21: f64,
    pub q12: f64,
    pub q22: f64,
}

impl FiveBarJoints {
    pub fn active(&self) -> JointVector {
        JointVector::from_slice(&[self.q11, self.q21])
    }

    pub fn absolute_distal(&self, limb: usize) -> f64 {
        if limb == 0 { self.q11 + self.q12 } else { self.q21 + self.q22 }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    } else if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// The two intersections of circle(c0, r0) and circle(c1, r1), as
/// (left of c0→c1, right of c0→c1). `None` when the circles are disjoint.
fn circle_intersections(
    c0: Vector2<f64>,
    r0: f64,
    c1: Vector2<f64>,
    r1: f64,
) -> Option<(Vector2<f64>, Vector2<f64>)> {
    let d = c1 - c0;
    let dist = d.norm();
    if dist == 0.0 || dist > r0 + r1 + REACH_TOL || dist < (r0 - r1).abs() - REACH_TOL {
        return None;
    }
    let a = (r0 * r0 - r1 * r1 + dist * dist) / (2.0 * dist);
    let h = (r0 * r0 - a * a).max(0.0).sqrt();
    let u = d / dist;
    let mid = c0 + u * a;
    let perp = Vector2::new(-u.y, u.x);
    Some((mid + perp * h, mid - perp * h))
}

pub fn ik_5r(g: &FiveBarGeometry, mode: WorkingMode, pose: &PlanarPose) -> Result<FiveBarJoints> {
    let p = pose.point();
    let mut active = [0.0; 2];
    let mut passive = [0.0; 2];
    for limb in 0..2 {
        let a = g.base(limb);
        let (left, right) = circle_intersections(a, g.proximal(limb), p, g.distal(limb))
            .ok_or_else(|| {
                Error::OutOfWorkspace(format!(
                    "limb {} cannot reach ({}, {})",
                    limb + 1,
                    pose.x_p,
                    pose.y_p
                ))
            })?;
        let b = match mode.side(limb) {
            ElbowSide::Left => left,
            ElbowSide::Right => right,
        };
        let q1 = (b.y - a.y).atan2(b.x - a.x);
        let distal = (p.y - b.y).atan2(p.x - b.x);
        active[limb] = q1;
        passive[limb] = wrap_angle(distal - q1);
    }
    Ok(FiveBarJoints {
        q11: active[0],
        q21: active[1],
        q12: passive[0],
        q22: passive[1],
    })
}

/// Both assembly solutions for the active joints, as (left of B1→B2, right of B1→B2).
pub fn fk_5r_both(g: &FiveBarGeometry, q11: f64, q21: f64) -> Result<(PlanarPose, PlanarPose)> {
    let b1 = g.elbow(0, q11);
    let b2 = g.elbow(1, q21);
    let (l, r) = circle_intersections(b1, g.r12, b2, g.r22).ok_or_else(|| {
        Error::InfeasibleCommand(format!("distal circles do not meet for q11={q11}, q21={q21}"))
    })?;
    Ok((PlanarPose::new(l.x, l.y), PlanarPose::new(r.x, r.y)))
}

/// Forward kinematics on the upper assembly mode (P left of `B1 → B2`).
pub fn fk_5r(g: &FiveBarGeometry, q11: f64, q21: f64) -> Result<PlanarPose> {
    fk_5r_both(g, q11, q21).map(|(upper, _)| upper)
}

/// Unit force directions along `B_i → P`, computed geometrically.
pub fn force_directions(g: &FiveBarGeometry, joints: &FiveBarJoints, pose: &PlanarPose) -> [Vector2<f64>; 2] {
    let p = pose.point();
    [0, 1].map(|limb| {
        let q = if limb == 0 { joints.q11 } else { joints.q21 };
        (p - g.elbow(limb, q)).normalize()
    })
}

/// Pure-force transmission wrenches about `P`, direction from the joint angles
/// through the angle-sum form `(cos(q_i1+q_i2), sin(q_i1+q_i2), 0)`.
pub fn wrenches_5r(pose: &PlanarPose, joints: &FiveBarJoints) -> [Screw; 2] {
    let p3 = Vector3::new(pose.x_p, pose.y_p, 0.0);
    [0, 1].map(|limb| {
        let a = joints.absolute_distal(limb);
        Screw::pure_force(Vector3::new(a.cos(), a.sin(), 0.0), p3)
    })
}

/// Output twists about `P`: `ω = (0, 0, 1)` and a unit linear part reciprocal
/// to the other limb's force.
pub fn ots_5r(g: &FiveBarGeometry, mode: WorkingMode, pose: &PlanarPose) -> Result<[Screw; 2]> {
    let joints = ik_5r(g, mode, pose)?;
    let w = wrenches_5r(pose, &joints);
    let p3 = Vector3::new(pose.x_p, pose.y_p, 0.0);
    let mut out = [Screw::twist(Vector3::z(), Vector3::zeros(), p3); 2];
    for (i, slot) in out.iter_mut().enumerate() {
        let f = w[1 - i].force();
        let v = null_unit(&DMatrix::from_row_slice(1, 2, &[f.x, f.y]))?;
        *slot = Screw::twist(Vector3::z(), Vector3::new(v[0], v[1], 0.0), p3);
    }
    Ok(out)
}

/// Folded angle between the distal links `B1P` and `B2P`.
pub fn distal_angle(g: &FiveBarGeometry, mode: WorkingMode, pose: &PlanarPose) -> Result<f64> {
    let j = ik_5r(g, mode, pose)?;
    let [f1, f2] = force_directions(g, &j, pose);
    folded_angle(&Vector3::new(f1.x, f1.y, 0.0), &Vector3::new(f2.x, f2.y, 0.0))
}

/// Θ12 at `pose` for every working mode, in search order.
pub fn mode_scan(g: &FiveBarGeometry, pose: &PlanarPose) -> Vec<(WorkingMode, Result<f64>)> {
    WorkingMode::SEARCH_ORDER
        .into_iter()
        .map(|m| (m, distal_angle(g, m, pose)))
        .collect()
}

/// First working mode in search order whose Θ12 at `singular_pose` is below
/// `threshold`.
pub fn validate_working_mode(g: &FiveBarGeometry, singular_pose: &PlanarPose, threshold: f64) -> Result<WorkingMode> {
    let scan = mode_scan(g, singular_pose);
    scan.iter()
        .find(|(_, th)| matches!(th, Ok(v) if *v < threshold))
        .map(|(m, _)| *m)
        .ok_or_else(|| {
            let detail: Vec<String> = scan
                .iter()
                .map(|(m, th)| match th {
                    Ok(v) => format!("{}={:.4}deg", m.id(), v.to_degrees()),
                    Err(e) => format!("{}: {e}", m.id()),
                })
                .collect();
            Error::Config(format!(
                "no working mode is singular at ({}, {}): {}",
                singular_pose.x_p,
                singular_pose.y_p,
                detail.join(", ")
            ))
        })
}

/// Five-bar robot model: geometry, working mode and actuator limits.
#[derive(Debug, Clone, PartialEq)]
pub struct FiveBar {
    pub geometry: FiveBarGeometry,
    pub mode: WorkingMode,
    limits: [JointLimit; 2],
}

impl FiveBar {
    pub fn new(geometry: FiveBarGeometry, mode: WorkingMode) -> Result<Self> {
        geometry.validate()?;
        Ok(FiveBar {
            geometry,
            mode,
            limits: [JointLimit { min: -PI, max: PI }; 2],
        })
    }

    pub fn with_limits(mut self, limits: [JointLimit; 2]) -> Self {
        self.limits = limits;
        self
    }

    pub fn joints(&self, pose: &PlanarPose) -> Result<FiveBarJoints> {
        ik_5r(&self.geometry, self.mode, pose)
    }
}

impl Default for FiveBar {
    fn default() -> Self {
        FiveBar::new(FiveBarGeometry::default(), WorkingMode::default()).expect("default geometry is valid")
    }
}

impl RobotModel for FiveBar {
    fn name(&self) -> &'static str {
        "5r"
    }

    fn dof(&self) -> usize {
        2
    }

    fn index_kind(&self) -> IndexKind {
        IndexKind::Theta
    }

    fn joint_limits(&self) -> &[JointLimit] {
        &self.limits
    }

    fn pose_labels(&self) -> &'static [&'static str] {
        &["x_p", "y_p"]
    }

    fn pose_units(&self) -> &'static [Unit] {
        &[Unit::Length, Unit::Length]
    }

    fn joint_labels(&self) -> &'static [&'static str] {
        &["q11", "q21"]
    }

    fn joint_units(&self) -> &'static [Unit] {
        &[Unit::Angle, Unit::Angle]
    }

    fn inverse_kinematics(&self, pose: &Pose) -> Result<JointVector> {
        Ok(self.joints(&pose.into())?.active())
    }

    fn forward_kinematics(&self, q: &JointVector, seed: &Pose) -> Result<Pose> {
        let (a, b) = fk_5r_both(&self.geometry, q[0], q[1])?;
        let s = PlanarPose::from(seed).point();
        let pick = if (a.point() - s).norm() <= (b.point() - s).norm() { a } else { b };
        Ok(pick.into())
    }

    fn constraint_residual(&self, pose: &Pose, q: &JointVector) -> DVector<f64> {
        let p = PlanarPose::from(pose).point();
        DVector::from_iterator(
            2,
            (0..2).map(|limb| {
                let r = self.geometry.distal(limb);
                (p - self.geometry.elbow(limb, q[limb])).norm_squared() - r * r
            }),
        )
    }

    fn transmission_wrenches(&self, pose: &Pose) -> Result<Vec<Screw>> {
        let p = PlanarPose::from(pose);
        Ok(wrenches_5r(&p, &self.joints(&p)?).to_vec())
    }

    fn output_twists(&self, pose: &Pose) -> Result<Vec<Screw>> {
        Ok(ots_5r(&self.geometry, self.mode, &pose.into())?.to_vec())
    }

    fn platform_twist(&self, pose: &Pose, rate: &DVector<f64>) -> Screw {
        Screw::twist(
            Vector3::zeros(),
            Vector3::new(rate[0], rate[1], 0.0),
            Vector3::new(pose[0], pose[1], 0.0),
        )
    }

    fn motion_coordinates(&self, twist: &Screw) -> DVector<f64> {
        DVector::from_vec(vec![twist.linear.x, twist.linear.y])
    }
}
