//! Twists, wrenches and the angle indices between output twist screws.
//!
//! A [`Screw`] carries an angular and a linear 3-vector about an explicit
//! reference point. For twists these are the angular velocity and the
//! velocity of the reference point; for wrenches they are the moment about
//! the reference point and the force. The reciprocal product pairs the two.

use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Norm below which a screw part is treated as absent.
pub const ZERO_PART_TOL: f64 = 1e-8;

const UNIT_TOL: f64 = 1e-9;
const REF_POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScrewKind {
    Twist,
    Wrench,
}

/// Six-coordinate screw about `ref_point`.
///
/// For a twist `angular` is the angular velocity and `linear` the velocity of
/// the reference point. For a wrench `angular` holds the moment about the
/// reference point and `linear` the force, so the reciprocal product is the
/// plain dot product of the two coordinate arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Screw {
    pub angular: Vector3<f64>,
    pub linear: Vector3<f64>,
    pub kind: ScrewKind,
    pub ref_point: Vector3<f64>,
}

impl Screw {
    pub fn twist(angular: Vector3<f64>, linear: Vector3<f64>, ref_point: Vector3<f64>) -> Self {
        Screw {
            angular,
            linear,
            kind: ScrewKind::Twist,
            ref_point,
        }
    }

    /// Wrench with `force` and `moment` about `ref_point`.
    pub fn wrench(force: Vector3<f64>, moment: Vector3<f64>, ref_point: Vector3<f64>) -> Self {
        Screw {
            angular: moment,
            linear: force,
            kind: ScrewKind::Wrench,
            ref_point,
        }
    }

    /// Pure force along `direction` whose line passes through `ref_point`.
    pub fn pure_force(direction: Vector3<f64>, ref_point: Vector3<f64>) -> Self {
        Screw::wrench(direction, Vector3::zeros(), ref_point)
    }

    /// Force along `direction` applied at `point`, expressed about `ref_point`.
    pub fn force_at(direction: Vector3<f64>, point: Vector3<f64>, ref_point: Vector3<f64>) -> Self {
        Screw::wrench(direction, (point - ref_point).cross(&direction), ref_point)
    }

    pub fn force(&self) -> Vector3<f64> {
        debug_assert_eq!(self.kind, ScrewKind::Wrench);
        self.linear
    }

    pub fn moment(&self) -> Vector3<f64> {
        debug_assert_eq!(self.kind, ScrewKind::Wrench);
        self.angular
    }

    pub fn scaled(&self, c: f64) -> Self {
        Screw {
            angular: self.angular * c,
            linear: self.linear * c,
            ..*self
        }
    }

    /// The six coordinates `[angular; linear]`.
    pub fn coords(&self) -> [f64; 6] {
        [
            self.angular.x,
            self.angular.y,
            self.angular.z,
            self.linear.x,
            self.linear.y,
            self.linear.z,
        ]
    }

    /// Same physical twist expressed about another point.
    pub fn transported(&self, new_ref: Vector3<f64>) -> Self {
        debug_assert_eq!(self.kind, ScrewKind::Twist);
        // v_new = v_old + ω × (new - old)
        let linear = self.linear + self.angular.cross(&(new_ref - self.ref_point));
        Screw {
            linear,
            ref_point: new_ref,
            ..*self
        }
    }
}

/// Work pairing between a twist and a wrench about the same point:
/// `ω·m + v·f`.
pub fn reciprocal_product(t: &Screw, w: &Screw) -> Result<f64> {
    if t.kind != ScrewKind::Twist || w.kind != ScrewKind::Wrench {
        return Err(Error::Contract(
            "reciprocal product takes a twist and a wrench".into(),
        ));
    }
    if (t.ref_point - w.ref_point).amax() > REF_POINT_TOL {
        return Err(Error::Contract(format!(
            "screws expressed about different points: {:?} vs {:?}",
            t.ref_point.as_slice(),
            w.ref_point.as_slice()
        )));
    }
    Ok(t.angular.dot(&w.moment()) + t.linear.dot(&w.force()))
}

/// Angle between two lines with unit directions `u`, `v`, folded to `[0, π/2]`.
///
/// Parallel and antiparallel directions both give 0.
pub fn folded_angle(u: &Vector3<f64>, v: &Vector3<f64>) -> Result<f64> {
    for (name, x) in [("u", u), ("v", v)] {
        if (x.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::Contract(format!(
                "{name} must be a unit vector (norm {})",
                x.norm()
            )));
        }
    }
    // atan2 keeps full precision near 0 where acos(|u·v|) loses half the digits.
    Ok(u.cross(v).norm().atan2(u.dot(v).abs()))
}

/// Ordered limb pair `(i, j)` with `i < j`, zero-based.
///
/// Displayed one-based, matching the limb numbering of the robots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LimbPair {
    pub i: usize,
    pub j: usize,
}

impl LimbPair {
    pub fn new(i: usize, j: usize) -> Self {
        assert!(i < j, "limb pair must be ordered");
        LimbPair { i, j }
    }

    /// Build from one-based limb numbers.
    pub fn limbs(first: usize, second: usize) -> Self {
        LimbPair::new(first - 1, second - 1)
    }
}

impl fmt::Display for LimbPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i + 1, self.j + 1)
    }
}

/// One entry of an index vector. `value` is `None` when either screw lacks the
/// compared part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexPair {
    pub pair: LimbPair,
    pub value: Option<f64>,
}

/// All pairwise Θ (linear parts) and Ω (angular parts) angles of a set of OTSs.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexVectors {
    pub theta: Vec<IndexPair>,
    pub omega: Vec<IndexPair>,
}

impl IndexVectors {
    pub fn get(list: &[IndexPair], pair: LimbPair) -> Option<f64> {
        list.iter().find(|p| p.pair == pair).and_then(|p| p.value)
    }
}

fn unit_part(v: &Vector3<f64>) -> Option<Vector3<f64>> {
    let n = v.norm();
    (n >= ZERO_PART_TOL).then(|| v / n)
}

/// Pairwise folded angles between the OTSs, in lexicographic pair order.
pub fn index_vectors(otss: &[Screw]) -> Result<IndexVectors> {
    if otss.len() < 2 {
        return Err(Error::Contract(format!(
            "need at least two output twists, got {}",
            otss.len()
        )));
    }
    let reference = otss[0].ref_point;
    if otss
        .iter()
        .any(|s| s.kind != ScrewKind::Twist || (s.ref_point - reference).amax() > REF_POINT_TOL)
    {
        return Err(Error::Contract(
            "output twists must be twists about a common point".into(),
        ));
    }
    let lin: Vec<_> = otss.iter().map(|s| unit_part(&s.linear)).collect();
    let ang: Vec<_> = otss.iter().map(|s| unit_part(&s.angular)).collect();
    let angle = |a: &Option<Vector3<f64>>, b: &Option<Vector3<f64>>| -> Result<Option<f64>> {
        match (a, b) {
            (Some(a), Some(b)) => folded_angle(a, b).map(Some),
            _ => Ok(None),
        }
    };

    let n = otss.len();
    let mut theta = Vec::with_capacity(n * (n - 1) / 2);
    let mut omega = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let pair = LimbPair::new(i, j);
            theta.push(IndexPair {
                pair,
                value: angle(&lin[i], &lin[j])?,
            });
            omega.push(IndexPair {
                pair,
                value: angle(&ang[i], &ang[j])?,
            });
        }
    }
    Ok(IndexVectors { theta, omega })
}

/// Minimum defined entry; ties go to the lexicographically smallest pair.
pub fn min_index(list: &[IndexPair]) -> Option<(f64, LimbPair)> {
    list.iter()
        .filter_map(|p| p.value.map(|v| (v, p.pair)))
        .fold(None, |best, (v, pair)| match best {
            Some((bv, _)) if bv <= v => best,
            _ => Some((v, pair)),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn origin() -> Vector3<f64> {
        Vector3::zeros()
    }

    #[test]
    fn reciprocal_orthogonal_is_zero() {
        let t = Screw::twist(Vector3::z(), Vector3::zeros(), origin());
        let w = Screw::pure_force(Vector3::x(), origin());
        assert_eq!(reciprocal_product(&t, &w).unwrap(), 0.0);
    }

    #[test]
    fn reciprocal_aligned_translation_is_one() {
        let t = Screw::twist(Vector3::zeros(), Vector3::x(), origin());
        let w = Screw::pure_force(Vector3::x(), origin());
        assert_eq!(reciprocal_product(&t, &w).unwrap(), 1.0);
    }

    #[test]
    fn reciprocal_rejects_mismatched_points_and_kinds() {
        let t = Screw::twist(Vector3::z(), Vector3::zeros(), origin());
        let w = Screw::pure_force(Vector3::x(), Vector3::new(0.0, 1.0, 0.0));
        assert!(matches!(reciprocal_product(&t, &w), Err(Error::Contract(_))));
        assert!(matches!(reciprocal_product(&t, &t), Err(Error::Contract(_))));
    }

    #[test]
    fn reciprocal_is_invariant_under_transport() {
        let p = Vector3::new(0.3, -0.2, 0.5);
        let t = Screw::twist(Vector3::new(0.1, 0.7, -0.2), Vector3::new(1.0, 0.0, 2.0), origin());
        let w = Screw::force_at(Vector3::new(0.0, 0.6, 0.8), p, origin());
        let q = Vector3::new(-1.0, 2.0, 0.25);
        let a = reciprocal_product(&t, &w).unwrap();
        let b = reciprocal_product(&t.transported(q), &Screw::force_at(w.force(), p, q)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn folded_angle_cases() {
        let x = Vector3::x();
        assert_eq!(folded_angle(&x, &x).unwrap(), 0.0);
        assert_eq!(folded_angle(&x, &-x).unwrap(), 0.0);
        assert!((folded_angle(&x, &Vector3::y()).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(folded_angle(&(x * 2.0), &x).is_err());
    }

    #[test]
    fn planar_twists_have_zero_omega() {
        let p = origin();
        let s1 = Screw::twist(Vector3::z(), Vector3::new(0.6, 0.8, 0.0), p);
        let s2 = Screw::twist(Vector3::z(), Vector3::new(1.0, 0.0, 0.0), p);
        let iv = index_vectors(&[s1, s2]).unwrap();
        assert_eq!(iv.omega, vec![IndexPair { pair: LimbPair::limbs(1, 2), value: Some(0.0) }]);
        let th = iv.theta[0].value.unwrap();
        assert!((th - 0.8f64.atan2(0.6)).abs() < 1e-12);
    }

    #[test]
    fn four_screws_give_six_pairs() {
        let p = origin();
        let s: Vec<_> = (0..4)
            .map(|k| {
                let a = k as f64 * 0.4;
                Screw::twist(Vector3::new(a.cos(), a.sin(), 0.0), Vector3::new(0.0, a.cos(), a.sin()), p)
            })
            .collect();
        let iv = index_vectors(&s).unwrap();
        assert_eq!(iv.theta.len(), 6);
        assert_eq!(iv.omega.len(), 6);
        assert_eq!(iv.omega[5].pair, LimbPair::limbs(3, 4));
    }

    #[test]
    fn zero_linear_part_is_undefined_not_zero() {
        let p = origin();
        let s1 = Screw::twist(Vector3::z(), Vector3::zeros(), p);
        let s2 = Screw::twist(Vector3::x(), Vector3::zeros(), p);
        let iv = index_vectors(&[s1, s2]).unwrap();
        assert_eq!(iv.theta[0].value, None);
        assert!(min_index(&iv.theta).is_none());
        assert_eq!(min_index(&iv.omega).unwrap().1, LimbPair::limbs(1, 2));
    }

    #[test]
    fn index_vectors_needs_two() {
        let s = Screw::twist(Vector3::z(), Vector3::zeros(), origin());
        assert!(index_vectors(&[s]).is_err());
    }

    #[test]
    fn min_index_breaks_ties_lexicographically() {
        let list = vec![
            IndexPair { pair: LimbPair::limbs(1, 3), value: Some(0.2) },
            IndexPair { pair: LimbPair::limbs(2, 3), value: Some(0.1) },
            IndexPair { pair: LimbPair::limbs(3, 4), value: Some(0.1) },
        ];
        assert_eq!(min_index(&list), Some((0.1, LimbPair::limbs(2, 3))));
    }
}
