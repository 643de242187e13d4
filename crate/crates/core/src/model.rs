//! Robot-model abstraction shared by the avoidance engine and the planner.
//!
//! A model exposes inverse/forward kinematics, the loop-closure residual, the
//! transmission wrenches and the output twist screws (OTSs). The free
//! functions in this module build the proximity index α, the kinematic
//! Jacobians and the twist-span check on top of any [`RobotModel`].

use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numkit::fd_jacobian;
use crate::screw::{index_vectors, min_index, reciprocal_product, IndexPair, IndexVectors, LimbPair, Screw};

/// Task-space coordinates, SI lengths and radians.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose(pub DVector<f64>);

/// Actuated joint values, radians for revolute and metres for prismatic actuators.
#[derive(Debug, Clone, PartialEq)]
pub struct JointVector(pub DVector<f64>);

macro_rules! vector_newtype {
    ($t:ident) => {
        impl $t {
            pub fn from_slice(v: &[f64]) -> Self {
                $t(DVector::from_column_slice(v))
            }

            pub fn zeros(n: usize) -> Self {
                $t(DVector::zeros(n))
            }
        }

        impl Deref for $t {
            type Target = DVector<f64>;
            fn deref(&self) -> &DVector<f64> {
                &self.0
            }
        }

        impl DerefMut for $t {
            fn deref_mut(&mut self) -> &mut DVector<f64> {
                &mut self.0
            }
        }

        impl From<DVector<f64>> for $t {
            fn from(v: DVector<f64>) -> Self {
                $t(v)
            }
        }
    };
}

vector_newtype!(Pose);
vector_newtype!(JointVector);

/// Which OTS angle measures proximity to a Type II singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    /// Angle between linear parts, used for planar robots.
    Theta,
    /// Angle between angular parts, used for spatial robots.
    Omega,
}

/// Physical unit of a pose or joint coordinate, for I/O conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Length,
    Angle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimit {
    pub min: f64,
    pub max: f64,
}

impl JointLimit {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if min.partial_cmp(&max) != Some(std::cmp::Ordering::Less) {
            return Err(Error::Config(format!("joint limit min {min} must be below max {max}")));
        }
        Ok(JointLimit { min, max })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

pub trait RobotModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Number of platform degrees of freedom, equal to the number of actuators.
    fn dof(&self) -> usize;

    fn index_kind(&self) -> IndexKind;

    fn joint_limits(&self) -> &[JointLimit];

    fn pose_labels(&self) -> &'static [&'static str];
    fn pose_units(&self) -> &'static [Unit];
    fn joint_labels(&self) -> &'static [&'static str];
    fn joint_units(&self) -> &'static [Unit];

    fn inverse_kinematics(&self, pose: &Pose) -> Result<JointVector>;

    /// Platform pose for actuator values `q`, on the solution branch nearest `seed`.
    fn forward_kinematics(&self, q: &JointVector, seed: &Pose) -> Result<Pose>;

    /// Loop-closure residual φ(x, q) in squared-length form, one row per limb.
    fn constraint_residual(&self, pose: &Pose, q: &JointVector) -> DVector<f64>;

    /// Unit transmission wrenches about the platform reference point.
    fn transmission_wrenches(&self, pose: &Pose) -> Result<Vec<Screw>>;

    /// Output twist screws about the platform reference point, one per limb.
    fn output_twists(&self, pose: &Pose) -> Result<Vec<Screw>>;

    /// Platform twist about the reference point for the pose rate `rate`.
    fn platform_twist(&self, pose: &Pose, rate: &DVector<f64>) -> Screw;

    /// Twist coordinates that are meaningful for this robot (used by span fits).
    fn motion_coordinates(&self, twist: &Screw) -> DVector<f64>;
}

pub fn ots_all(model: &dyn RobotModel, pose: &Pose) -> Result<Vec<Screw>> {
    model.output_twists(pose)
}

pub fn indices_at(model: &dyn RobotModel, pose: &Pose) -> Result<IndexVectors> {
    index_vectors(&model.output_twists(pose)?)
}

/// The index vector used as detector for this model.
pub fn detector_indices(model: &dyn RobotModel, pose: &Pose) -> Result<Vec<IndexPair>> {
    let iv = indices_at(model, pose)?;
    Ok(match model.index_kind() {
        IndexKind::Theta => iv.theta,
        IndexKind::Omega => iv.omega,
    })
}

/// Proximity index α and the limb pair that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha {
    pub value: f64,
    pub pair: LimbPair,
}

pub fn alpha_of(list: &[IndexPair]) -> Result<Alpha> {
    min_index(list)
        .map(|(value, pair)| Alpha { value, pair })
        .ok_or(Error::UndefinedIndex)
}

pub fn alpha(model: &dyn RobotModel, pose: &Pose) -> Result<Alpha> {
    alpha_of(&detector_indices(model, pose)?)
}

/// Detector value of one specific limb pair.
pub fn pair_index(model: &dyn RobotModel, pose: &Pose, pair: LimbPair) -> Result<f64> {
    IndexVectors::get(&detector_indices(model, pose)?, pair).ok_or(Error::UndefinedIndex)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jacobians {
    /// ∂φ/∂q
    pub inverse: DMatrix<f64>,
    /// ∂φ/∂x
    pub forward: DMatrix<f64>,
    pub det_forward: f64,
}

pub const JACOBIAN_FD_STEP: f64 = 1e-6;

pub fn jacobians(model: &dyn RobotModel, pose: &Pose) -> Result<Jacobians> {
    let q = model.inverse_kinematics(pose)?;
    let forward = fd_jacobian(
        |x| model.constraint_residual(&Pose(x.clone()), &q),
        pose,
        JACOBIAN_FD_STEP,
    );
    let inverse = fd_jacobian(
        |qq| model.constraint_residual(pose, &JointVector(qq.clone())),
        &q,
        JACOBIAN_FD_STEP,
    );
    let det_forward = forward.determinant();
    Ok(Jacobians {
        inverse,
        forward,
        det_forward,
    })
}

/// Pose rate produced by the joint rate `q_rate`: `ẋ = -J_D⁻¹ J_I q̇`.
pub fn pose_rate(model: &dyn RobotModel, pose: &Pose, q_rate: &DVector<f64>) -> Result<DVector<f64>> {
    let j = jacobians(model, pose)?;
    let rhs = -(&j.inverse * q_rate);
    j.forward
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Contract("forward Jacobian is singular".into()))
}

/// Largest |OTS_i ∘ T_j| over all i ≠ j.
pub fn reciprocity_residual(model: &dyn RobotModel, pose: &Pose) -> Result<f64> {
    let otss = model.output_twists(pose)?;
    let wrenches = model.transmission_wrenches(pose)?;
    let mut worst = 0.0f64;
    for (i, t) in otss.iter().enumerate() {
        for (j, w) in wrenches.iter().enumerate() {
            if i != j {
                worst = worst.max(reciprocal_product(t, w)?.abs());
            }
        }
    }
    Ok(worst)
}

/// Least-squares decomposition of a platform twist on the OTS basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanFit {
    pub amplitudes: DVector<f64>,
    pub residual: f64,
}

pub fn twist_span_check(model: &dyn RobotModel, pose: &Pose, twist: &Screw) -> Result<SpanFit> {
    let otss = model.output_twists(pose)?;
    let target = model.motion_coordinates(twist);
    let basis: Vec<DVector<f64>> = otss.iter().map(|s| model.motion_coordinates(s)).collect();
    let a = DMatrix::from_columns(&basis);
    if target.amax() == 0.0 {
        return Ok(SpanFit {
            amplitudes: DVector::zeros(otss.len()),
            residual: 0.0,
        });
    }
    let amplitudes = a
        .clone()
        .svd(true, true)
        .solve(&target, 1e-12)
        .map_err(|e| Error::Contract(e.to_string()))?;
    let residual = (&a * &amplitudes - &target).norm();
    Ok(SpanFit {
        amplitudes,
        residual,
    })
}

pub fn within_limits(model: &dyn RobotModel, q: &JointVector) -> bool {
    model
        .joint_limits()
        .iter()
        .zip(q.iter())
        .all(|(lim, v)| lim.contains(*v))
}
