//! 3UPS+RPU four-DOF spatial parallel robot.
//!
//! Three UPS limbs join fixed vertices `A0, B0, C0` to mobile vertices
//! `A1, B1, C1`; the central RPU limb runs from `D0 = (±ds, 0, 0)` to the
//! platform centre `O_m`, its revolute axis parallel to `Y_f`. The pose is
//! `(x_m, z_m, θ, ψ)` with `O_m = (x_m, 0, z_m)` and the Euler Y-Z' rotation
//! `R = R_y(θ) R_z(ψ)`. Actuators are the four prismatic joints
//! `(q13, q23, q33, q42)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::{IndexKind, JointLimit, JointVector, Pose, RobotModel, Unit};
use crate::numkit::{newton_solve, null_unit, NewtonOptions};
use crate::screw::{LimbPair, Screw, ZERO_PART_TOL};

/// Largest |θ| for which the pitch-coupling row `w_x = w_z tan θ` is used.
pub const THETA_GUARD: f64 = 85.0 * PI / 180.0;

const MIN_LIMB_LENGTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGeometry {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub beta_fd: f64,
    pub beta_fi: f64,
    pub ds: f64,
    pub rm1: f64,
    pub rm2: f64,
    pub rm3: f64,
    pub beta_md: f64,
    pub beta_mi: f64,
}

impl Default for SpatialGeometry {
    fn default() -> Self {
        SpatialGeometry {
            r1: 0.4,
            r2: 0.4,
            r3: 0.4,
            beta_fd: 90f64.to_radians(),
            beta_fi: 45f64.to_radians(),
            ds: 0.15,
            rm1: 0.3,
            rm2: 0.3,
            rm3: 0.3,
            beta_md: 50f64.to_radians(),
            beta_mi: 90f64.to_radians(),
        }
    }
}

impl SpatialGeometry {
    pub fn validate(&self) -> Result<()> {
        let radii = [self.r1, self.r2, self.r3, self.rm1, self.rm2, self.rm3];
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!("platform radii must be positive: {radii:?}")));
        }
        let rest = [self.beta_fd, self.beta_fi, self.beta_md, self.beta_mi, self.ds];
        if rest.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("spatial geometry has non-finite values".into()));
        }
        Ok(())
    }
}

/// Which geometry angle a vertex placement is measured with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beta {
    Fd,
    Fi,
    Md,
    Mi,
    Zero,
}

/// Polar angle `quarter·π/2 + sign·β` of one platform vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngleRule {
    pub quarter: i8,
    pub sign: i8,
    pub beta: Beta,
}

const fn rule(quarter: i8, sign: i8, beta: Beta) -> AngleRule {
    AngleRule { quarter, sign, beta }
}

impl AngleRule {
    pub fn angle(&self, g: &SpatialGeometry) -> f64 {
        let b = match self.beta {
            Beta::Fd => g.beta_fd,
            Beta::Fi => g.beta_fi,
            Beta::Md => g.beta_md,
            Beta::Mi => g.beta_mi,
            Beta::Zero => 0.0,
        };
        f64::from(self.quarter) * FRAC_PI_2 + f64::from(self.sign) * b
    }
}

/// Vertex placement convention: polar rules for `A, B, C` on each platform and
/// the side of the central-limb base.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConventionVariant {
    pub id: &'static str,
    pub fixed: [AngleRule; 3],
    pub mobile: [AngleRule; 3],
    /// `D0 = (central_sign · ds, 0, 0)`.
    pub central_sign: i8,
}

use Beta::{Fd, Fi, Md, Mi, Zero};

/// Placement variants in validation order.
pub const VARIANTS: [ConventionVariant; 5] = [
    ConventionVariant {
        id: "mirror_x_plus",
        fixed: [rule(0, 1, Fd), rule(0, -1, Fi), rule(0, 1, Fi)],
        mobile: [rule(0, 1, Md), rule(0, -1, Mi), rule(0, 1, Mi)],
        central_sign: 1,
    },
    ConventionVariant {
        id: "mirror_x_minus",
        fixed: [rule(0, 1, Fd), rule(2, -1, Fi), rule(2, 1, Fi)],
        mobile: [rule(0, 1, Md), rule(2, -1, Mi), rule(2, 1, Mi)],
        central_sign: -1,
    },
    ConventionVariant {
        id: "mirror_x_plus_ds_minus",
        fixed: [rule(0, 1, Fd), rule(0, -1, Fi), rule(0, 1, Fi)],
        mobile: [rule(0, 1, Md), rule(0, -1, Mi), rule(0, 1, Mi)],
        central_sign: -1,
    },
    ConventionVariant {
        id: "mirror_x_minus_ds_plus",
        fixed: [rule(0, 1, Fd), rule(2, -1, Fi), rule(2, 1, Fi)],
        mobile: [rule(0, 1, Md), rule(2, -1, Mi), rule(2, 1, Mi)],
        central_sign: 1,
    },
    ConventionVariant {
        id: "rear_fan",
        fixed: [rule(2, 1, Fi), rule(2, 1, Fd), rule(2, -1, Fi)],
        mobile: [rule(2, 0, Zero), rule(2, 1, Mi), rule(2, -1, Mi)],
        central_sign: 1,
    },
];

pub const DEFAULT_VARIANT: &str = "rear_fan";

impl ConventionVariant {
    pub fn by_id(id: &str) -> Result<ConventionVariant> {
        VARIANTS
            .iter()
            .copied()
            .find(|v| v.id == id)
            .ok_or_else(|| Error::Config(format!("unknown convention variant '{id}'")))
    }
}

impl Default for ConventionVariant {
    fn default() -> Self {
        ConventionVariant::by_id(DEFAULT_VARIANT).expect("default variant is listed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialPose {
    pub x_m: f64,
    pub z_m: f64,
    pub theta: f64,
    pub psi: f64,
}

impl SpatialPose {
    pub fn new(x_m: f64, z_m: f64, theta: f64, psi: f64) -> Self {
        SpatialPose { x_m, z_m, theta, psi }
    }

    pub fn origin(&self) -> Vector3<f64> {
        Vector3::new(self.x_m, 0.0, self.z_m)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_yz(self.theta, self.psi)
    }
}

impl From<&Pose> for SpatialPose {
    fn from(p: &Pose) -> Self {
        SpatialPose::new(p[0], p[1], p[2], p[3])
    }
}

impl From<SpatialPose> for Pose {
    fn from(p: SpatialPose) -> Self {
        Pose::from_slice(&[p.x_m, p.z_m, p.theta, p.psi])
    }
}

/// Euler Y-Z' rotation from the mobile to the fixed frame.
pub fn rotation_yz(theta: f64, psi: f64) -> Matrix3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    Matrix3::new(ct * cp, -ct * sp, st, sp, cp, 0.0, -st * cp, st * sp, ct)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialJoints {
    pub q13: f64,
    pub q23: f64,
    pub q33: f64,
    pub q42: f64,
    pub q41: f64,
}

impl SpatialJoints {
    pub fn active(&self) -> JointVector {
        JointVector::from_slice(&[self.q13, self.q23, self.q33, self.q42])
    }
}

/// Fixed vertices `A0, B0, C0, D0` and world-frame mobile vertices `A1, B1, C1, O_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertices {
    pub fixed: [Vector3<f64>; 4],
    pub mobile: [Vector3<f64>; 4],
}

/// Geometry combined with a placement convention, with vertex coordinates precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub geometry: SpatialGeometry,
    pub variant: ConventionVariant,
    fixed: [Vector3<f64>; 4],
    local: [Vector3<f64>; 3],
}

impl Layout {
    pub fn new(geometry: SpatialGeometry, variant: ConventionVariant) -> Result<Layout> {
        geometry.validate()?;
        let polar = |r: f64, a: f64| Vector3::new(r * a.cos(), r * a.sin(), 0.0);
        let fr = [geometry.r1, geometry.r2, geometry.r3];
        let mr = [geometry.rm1, geometry.rm2, geometry.rm3];
        let mut fixed = [Vector3::zeros(); 4];
        let mut local = [Vector3::zeros(); 3];
        for k in 0..3 {
            fixed[k] = polar(fr[k], variant.fixed[k].angle(&geometry));
            local[k] = polar(mr[k], variant.mobile[k].angle(&geometry));
        }
        fixed[3] = Vector3::new(f64::from(variant.central_sign) * geometry.ds, 0.0, 0.0);
        Ok(Layout {
            geometry,
            variant,
            fixed,
            local,
        })
    }

    /// Mobile-frame coordinates of `A1, B1, C1` relative to `O_m`.
    pub fn local_points(&self) -> &[Vector3<f64>; 3] {
        &self.local
    }

    pub fn vertices(&self, pose: &SpatialPose) -> Vertices {
        let t = pose.origin();
        let r = pose.rotation();
        let mut mobile = [t; 4];
        for k in 0..3 {
            mobile[k] = t + r * self.local[k];
        }
        Vertices {
            fixed: self.fixed,
            mobile,
        }
    }
}

fn limb_vectors(layout: &Layout, pose: &SpatialPose) -> [Vector3<f64>; 4] {
    let v = layout.vertices(pose);
    [0, 1, 2, 3].map(|k| v.mobile[k] - v.fixed[k])
}

/// Joint values without stroke checks.
pub fn ik_unchecked(layout: &Layout, pose: &SpatialPose) -> SpatialJoints {
    let l = limb_vectors(layout, pose);
    SpatialJoints {
        q13: l[0].norm(),
        q23: l[1].norm(),
        q33: l[2].norm(),
        q42: l[3].norm(),
        q41: (-l[3].x).atan2(l[3].z),
    }
}

pub fn ik_spatial(layout: &Layout, limits: &[JointLimit; 4], pose: &SpatialPose) -> Result<SpatialJoints> {
    let j = ik_unchecked(layout, pose);
    let q = [j.q13, j.q23, j.q33, j.q42];
    for (k, (v, lim)) in q.iter().zip(limits).enumerate() {
        if !lim.contains(*v) {
            return Err(Error::OutOfWorkspace(format!(
                "actuator {} length {v:.6} m outside [{}, {}]",
                k + 1,
                lim.min,
                lim.max
            )));
        }
    }
    Ok(j)
}

/// Squared-length loop closure residuals, one per limb.
pub fn constraint_residual(layout: &Layout, pose: &SpatialPose, q: &[f64]) -> DVector<f64> {
    let l = limb_vectors(layout, pose);
    DVector::from_iterator(4, (0..4).map(|k| l[k].norm_squared() - q[k] * q[k]))
}

/// Newton forward kinematics seeded with `guess`.
pub fn fk_spatial(layout: &Layout, q: &[f64], guess: &SpatialPose) -> Result<SpatialPose> {
    if q.len() != 4 || q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract(format!("expected 4 finite actuator values, got {q:?}")));
    }
    let x0 = DVector::from_vec(vec![guess.x_m, guess.z_m, guess.theta, guess.psi]);
    let x = newton_solve(
        |x| constraint_residual(layout, &SpatialPose::new(x[0], x[1], x[2], x[3]), q),
        &x0,
        &NewtonOptions::default(),
    )?;
    Ok(SpatialPose::new(x[0], x[1], x[2], x[3]))
}

/// Transmission wrenches about `O_m`: the UPS limbs carry force and moment,
/// the central limb a pure force along `(−sin q41, 0, cos q41)`.
pub fn wrenches_spatial(layout: &Layout, pose: &SpatialPose) -> Result<[Screw; 4]> {
    let v = layout.vertices(pose);
    let om = pose.origin();
    let mut out = [Screw::pure_force(Vector3::z(), om); 4];
    for k in 0..4 {
        let d = v.mobile[k] - v.fixed[k];
        let n = d.norm();
        if n < MIN_LIMB_LENGTH {
            return Err(Error::OutOfWorkspace(format!("limb {} has zero length", k + 1)));
        }
        out[k] = if k < 3 {
            Screw::force_at(d / n, v.mobile[k], om)
        } else {
            let q41 = (-d.x).atan2(d.z);
            Screw::pure_force(Vector3::new(-q41.sin(), 0.0, q41.cos()), om)
        };
    }
    Ok(out)
}

/// Universal-joint angles `(q_i1, q_i2)` of a UPS limb with unit direction `f`.
pub fn universal_angles(f: &Vector3<f64>) -> (f64, f64) {
    let q2 = (-f.y).clamp(-1.0, 1.0).acos();
    let q1 = f.z.atan2(f.x);
    (q1, q2)
}

/// UPS force direction from its universal-joint angles.
pub fn ups_direction(q1: f64, q2: f64) -> Vector3<f64> {
    Vector3::new(q1.cos() * q2.sin(), -q2.cos(), q1.sin() * q2.sin())
}

/// Output twist of limb `i` (0-based) about `O_m`.
pub fn ots_spatial(layout: &Layout, pose: &SpatialPose, limb: usize) -> Result<Screw> {
    if limb >= 4 {
        return Err(Error::Contract(format!("limb index {limb} out of range")));
    }
    if pose.theta.abs() >= THETA_GUARD {
        return Err(Error::OutOfWorkspace(format!(
            "|theta| = {:.3} deg at or beyond the {:.0} deg coupling guard",
            pose.theta.to_degrees(),
            THETA_GUARD.to_degrees()
        )));
    }
    let w = wrenches_spatial(layout, pose)?;
    let mut a = DMatrix::zeros(4, 5);
    let mut row = 0;
    for (j, wj) in w.iter().enumerate() {
        if j == limb {
            continue;
        }
        let m = wj.moment();
        let f = wj.force();
        a.row_mut(row).copy_from_slice(&[m.x, m.y, m.z, f.x, f.z]);
        row += 1;
    }
    a.row_mut(3).copy_from_slice(&[1.0, 0.0, -pose.theta.tan(), 0.0, 0.0]);
    let n = null_unit(&a)?;
    let omega = Vector3::new(n[0], n[1], n[2]);
    let v = Vector3::new(n[3], 0.0, n[4]);
    let scale = if omega.norm() >= ZERO_PART_TOL { omega.norm() } else { v.norm() };
    Ok(Screw::twist(omega / scale, v / scale, pose.origin()))
}

pub fn ots_all_spatial(layout: &Layout, pose: &SpatialPose) -> Result<[Screw; 4]> {
    let mut out = [Screw::twist(Vector3::zeros(), Vector3::zeros(), pose.origin()); 4];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = ots_spatial(layout, pose, k)?;
    }
    Ok(out)
}

/// Default actuator stroke for all four prismatic joints, metres.
pub const DEFAULT_STROKE: (f64, f64) = (0.4, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Spatial {
    pub layout: Layout,
    limits: [JointLimit; 4],
}

impl Spatial {
    pub fn new(geometry: SpatialGeometry, variant: ConventionVariant) -> Result<Self> {
        let stroke = JointLimit::new(DEFAULT_STROKE.0, DEFAULT_STROKE.1)?;
        Ok(Spatial {
            layout: Layout::new(geometry, variant)?,
            limits: [stroke; 4],
        })
    }

    pub fn with_limits(mut self, limits: [JointLimit; 4]) -> Self {
        self.limits = limits;
        self
    }

    pub fn limits(&self) -> &[JointLimit; 4] {
        &self.limits
    }
}

impl Default for Spatial {
    fn default() -> Self {
        Spatial::new(SpatialGeometry::default(), ConventionVariant::default()).expect("default geometry is valid")
    }
}

impl RobotModel for Spatial {
    fn name(&self) -> &'static str {
        "3ups_rpu"
    }

    fn dof(&self) -> usize {
        4
    }

    fn index_kind(&self) -> IndexKind {
        IndexKind::Omega
    }

    fn joint_limits(&self) -> &[JointLimit] {
        &self.limits
    }

    fn pose_labels(&self) -> &'static [&'static str] {
        &["x_m", "z_m", "theta", "psi"]
    }

    fn pose_units(&self) -> &'static [Unit] {
        &[Unit::Length, Unit::Length, Unit::Angle, Unit::Angle]
    }

    fn joint_labels(&self) -> &'static [&'static str] {
        &["q13", "q23", "q33", "q42"]
    }

    fn joint_units(&self) -> &'static [Unit] {
        &[Unit::Length; 4]
    }

    fn inverse_kinematics(&self, pose: &Pose) -> Result<JointVector> {
        Ok(ik_spatial(&self.layout, &self.limits, &pose.into())?.active())
    }

    fn forward_kinematics(&self, q: &JointVector, seed: &Pose) -> Result<Pose> {
        Ok(fk_spatial(&self.layout, q.as_slice(), &seed.into())?.into())
    }

    fn constraint_residual(&self, pose: &Pose, q: &JointVector) -> DVector<f64> {
        constraint_residual(&self.layout, &pose.into(), q.as_slice())
    }

    fn transmission_wrenches(&self, pose: &Pose) -> Result<Vec<Screw>> {
        Ok(wrenches_spatial(&self.layout, &pose.into())?.to_vec())
    }

    fn output_twists(&self, pose: &Pose) -> Result<Vec<Screw>> {
        Ok(ots_all_spatial(&self.layout, &pose.into())?.to_vec())
    }

    fn platform_twist(&self, pose: &Pose, rate: &DVector<f64>) -> Screw {
        let (st, ct) = pose[2].sin_cos();
        let omega = Vector3::new(rate[3] * st, rate[2], rate[3] * ct);
        Screw::twist(omega, Vector3::new(rate[0], 0.0, rate[1]), Vector3::new(pose[0], 0.0, pose[1]))
    }

    fn motion_coordinates(&self, twist: &Screw) -> DVector<f64> {
        DVector::from_vec(vec![
            twist.angular.x,
            twist.angular.y,
            twist.angular.z,
            twist.linear.x,
            twist.linear.z,
        ])
    }
}

/// Outcome of checking one placement variant against a known singular pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ConventionCheck {
    pub variant: &'static str,
    /// Minimum Ω at the singular pose and the pair attaining it.
    pub alpha: Option<(f64, LimbPair)>,
    /// Line parameter of the first det J_D sign change near the singular pose
    /// (start = 0, singular pose = 1).
    pub crossing: Option<f64>,
    pub passed: bool,
}

/// Half-width of the line-parameter window searched for a det J_D sign change.
pub const CROSSING_WINDOW: f64 = 0.03;
const CROSSING_STEPS: usize = 240;

/// Checks every variant in order: min Ω below `alpha_max` at `singular`, attained
/// by `pair`, and det J_D changing sign on the line `start → singular` within
/// [`CROSSING_WINDOW`] of the singular pose. Returns all checks and the first
/// passing variant.
pub fn validate_convention(
    geometry: SpatialGeometry,
    start: &SpatialPose,
    singular: &SpatialPose,
    pair: LimbPair,
    alpha_max: f64,
) -> Result<(Vec<ConventionCheck>, Option<ConventionVariant>)> {
    let mut checks = Vec::with_capacity(VARIANTS.len());
    let mut first = None;
    let a = DVector::from_vec(vec![start.x_m, start.z_m, start.theta, start.psi]);
    let b = DVector::from_vec(vec![singular.x_m, singular.z_m, singular.theta, singular.psi]);
    for variant in VARIANTS {
        let model = Spatial::new(geometry, variant)?.with_limits([JointLimit { min: 0.0, max: f64::MAX }; 4]);
        let alpha = crate::model::alpha(&model, &Pose(b.clone())).ok().map(|a| (a.value, a.pair));
        let det = |u: f64| {
            crate::model::jacobians(&model, &Pose(&a + (&b - &a) * u))
                .map(|j| j.det_forward)
                .unwrap_or(f64::NAN)
        };
        let lo = 1.0 - CROSSING_WINDOW;
        let mut prev = det(lo);
        let mut crossing = None;
        for k in 1..=CROSSING_STEPS {
            let u = lo + 2.0 * CROSSING_WINDOW * k as f64 / CROSSING_STEPS as f64;
            let d = det(u);
            if d.is_finite() && prev.is_finite() && d.signum() != prev.signum() {
                crossing = Some(u);
                break;
            }
            prev = d;
        }
        let passed = crossing.is_some() && matches!(alpha, Some((v, p)) if v < alpha_max && p == pair);
        if passed && first.is_none() {
            first = Some(variant);
        }
        checks.push(ConventionCheck {
            variant: variant.id,
            alpha,
            crossing,
            passed,
        });
    }
    Ok((checks, first))
}
