//! Constraint types, their error functions and analytic Jacobians.

use serde::{Deserialize, Serialize};

use super::mat3::{self, Mat3, Vec3};
use super::pose::Pose2;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Below this planar separation a distance edge has no defined direction.
pub const DEGENERATE_DISTANCE: f64 = 1e-6;

/// Identity of a pose node: robot and time index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub robot: u32,
    pub t: usize,
}

impl NodeId {
    pub fn new(robot: u32, t: usize) -> Self {
        Self { robot, t }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Constraint<T> {
    /// Relative pose `z` of `j` in the frame of `i`.
    RelativePose {
        i: NodeId,
        j: NodeId,
        z: Pose2<T>,
        info: Mat3<T>,
    },
    /// Planar distance `d` between `i` and `j` with scalar information `w`.
    Distance { i: NodeId, j: NodeId, d: T, w: T },
    /// Absolute pose prior on `i`.
    PosePrior { i: NodeId, z: Pose2<T>, info: Mat3<T> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    RelativePose,
    Distance,
    PosePrior,
}

impl<T: Real> Constraint<T> {
    pub fn kind(&self) -> ConstraintKind {
        match self {
            Constraint::RelativePose { .. } => ConstraintKind::RelativePose,
            Constraint::Distance { .. } => ConstraintKind::Distance,
            Constraint::PosePrior { .. } => ConstraintKind::PosePrior,
        }
    }

    /// First and (for binary edges) second endpoint.
    pub fn nodes(&self) -> (NodeId, Option<NodeId>) {
        match *self {
            Constraint::RelativePose { i, j, .. } | Constraint::Distance { i, j, .. } => (i, Some(j)),
            Constraint::PosePrior { i, .. } => (i, None),
        }
    }

    /// Checks endpoint distinctness and positive definiteness of the weight.
    pub fn validate(&self) -> Result<()> {
        match self {
            Constraint::RelativePose { i, j, info, .. } => {
                if i == j {
                    return Err(Error::Data(format!("relative-pose edge loops on {i:?}")));
                }
                check_info(info)
            }
            Constraint::Distance { i, j, d, w } => {
                if i == j {
                    return Err(Error::Data(format!("distance edge loops on {i:?}")));
                }
                if !(*d >= T::zero()) || !d.is_finite() {
                    return Err(Error::Data(format!("distance edge with d = {d}")));
                }
                if !(*w > T::zero()) || !w.is_finite() {
                    return Err(Error::Data(format!("distance edge with weight {w}")));
                }
                Ok(())
            }
            Constraint::PosePrior { info, .. } => check_info(info),
        }
    }

    /// `e^T Ω e` at the given endpoint poses.
    pub fn chi2(&self, xi: &Pose2<T>, xj: Option<&Pose2<T>>) -> T {
        match self {
            Constraint::RelativePose { z, info, .. } => {
                let e = relative_pose_error(xi, xj.expect("binary edge"), z);
                mat3::quad_form(info, &e)
            }
            Constraint::Distance { d, w, .. } => {
                let e = distance_error(xi, xj.expect("binary edge"), *d);
                *w * e * e
            }
            Constraint::PosePrior { z, info, .. } => mat3::quad_form(info, &prior_error(xi, z)),
        }
    }
}

fn check_info<T: Real>(info: &Mat3<T>) -> Result<()> {
    if !mat3::is_symmetric(info) {
        return Err(Error::Data("information matrix not symmetric".into()));
    }
    if mat3::cholesky(info).is_none() {
        return Err(Error::Data("information matrix not positive definite".into()));
    }
    Ok(())
}

/// `vec(z⁻¹ ∘ (x_i⁻¹ ∘ x_j))`, angle wrapped to (-pi, pi].
pub fn relative_pose_error<T: Real>(xi: &Pose2<T>, xj: &Pose2<T>, z: &Pose2<T>) -> Vec3<T> {
    let e = z.between(&xi.between(xj));
    [e.x, e.y, e.theta]
}

/// `‖p_j − p_i‖ − d`.
pub fn distance_error<T: Real>(xi: &Pose2<T>, xj: &Pose2<T>, d: T) -> T {
    xi.distance(xj) - d
}

/// `vec(z⁻¹ ∘ x)`.
pub fn prior_error<T: Real>(x: &Pose2<T>, z: &Pose2<T>) -> Vec3<T> {
    let e = z.between(x);
    [e.x, e.y, e.theta]
}

/// Jacobians of [`relative_pose_error`] with respect to `x_i` and `x_j`.
pub fn relative_pose_jacobians<T: Real>(xi: &Pose2<T>, xj: &Pose2<T>, z: &Pose2<T>) -> (Mat3<T>, Mat3<T>) {
    let (si, ci) = xi.theta.sin_cos();
    let (sz, cz) = z.theta.sin_cos();
    let dx = xj.x - xi.x;
    let dy = xj.y - xi.y;
    // translation of x_j in the frame of x_i
    let rx = ci * dx + si * dy;
    let ry = -si * dx + ci * dy;
    // R_z^T R_i^T
    let (s, c) = (si * cz + ci * sz, ci * cz - si * sz);
    let rot = [[c, s], [-s, c]];
    let zero = T::zero();
    let one = T::one();
    // R_z^T applied to d(R_i^T dt)/dθ_i = (ry, -rx)
    let dth = [cz * ry - sz * rx, -(sz * ry + cz * rx)];
    let jj = [
        [rot[0][0], rot[0][1], zero],
        [rot[1][0], rot[1][1], zero],
        [zero, zero, one],
    ];
    let ji = [
        [-rot[0][0], -rot[0][1], dth[0]],
        [-rot[1][0], -rot[1][1], dth[1]],
        [zero, zero, -one],
    ];
    (ji, jj)
}

/// Row Jacobians of [`distance_error`]; the flag reports the degenerate
/// coincident-position case, where the unit direction `(1, 0)` is substituted.
pub fn distance_jacobians<T: Real>(xi: &Pose2<T>, xj: &Pose2<T>) -> (Vec3<T>, Vec3<T>, bool) {
    let dx = xj.x - xi.x;
    let dy = xj.y - xi.y;
    let n = dx.hypot(dy);
    let (ux, uy, degenerate) = if n < T::lit(DEGENERATE_DISTANCE) {
        (T::one(), T::zero(), true)
    } else {
        (dx / n, dy / n, false)
    };
    ([-ux, -uy, T::zero()], [ux, uy, T::zero()], degenerate)
}

/// Jacobian of [`prior_error`] with respect to `x`.
pub fn prior_jacobian<T: Real>(z: &Pose2<T>) -> Mat3<T> {
    let (s, c) = z.theta.sin_cos();
    let zero = T::zero();
    [[c, s, zero], [-s, c, zero], [zero, zero, T::one()]]
}

/// Jacobians of a constraint's error, as full 3x3 blocks.
///
/// Distance edges fill only row 0. Prior edges return a zero `J_j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeJacobians<T> {
    pub rows: usize,
    pub ji: Mat3<T>,
    pub jj: Mat3<T>,
    pub degenerate: bool,
}

pub fn edge_jacobians<T: Real>(constraint: &Constraint<T>, xi: &Pose2<T>, xj: Option<&Pose2<T>>) -> EdgeJacobians<T> {
    match constraint {
        Constraint::RelativePose { z, .. } => {
            let (ji, jj) = relative_pose_jacobians(xi, xj.expect("binary edge"), z);
            EdgeJacobians {
                rows: 3,
                ji,
                jj,
                degenerate: false,
            }
        }
        Constraint::Distance { .. } => {
            let (ri, rj, degenerate) = distance_jacobians(xi, xj.expect("binary edge"));
            let mut ji = mat3::zeros();
            let mut jj = mat3::zeros();
            ji[0] = ri;
            jj[0] = rj;
            EdgeJacobians {
                rows: 1,
                ji,
                jj,
                degenerate,
            }
        }
        Constraint::PosePrior { z, .. } => EdgeJacobians {
            rows: 3,
            ji: prior_jacobian(z),
            jj: mat3::zeros(),
            degenerate: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn relative_pose_error_examples() {
        let a = Pose2::<f64>::new(0.3, -1.0, 0.7);
        let z = Pose2::new(1.0, 0.5, -0.2);
        let b = a.compose(&z);
        let e = relative_pose_error(&a, &b, &z);
        assert!(e.iter().all(|v| v.abs() < 1e-14));

        let e = relative_pose_error(&Pose2::identity(), &Pose2::new(1.0, 0.0, 0.0), &Pose2::identity());
        assert_eq!(e, [1.0, 0.0, 0.0]);

        let e = relative_pose_error(
            &Pose2::new(0.0, 0.0, FRAC_PI_2),
            &Pose2::new(0.0, 1.0, FRAC_PI_2),
            &Pose2::new(1.0, 0.0, 0.0),
        );
        assert!(e.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn distance_error_examples() {
        let o = Pose2::identity();
        assert_eq!(distance_error(&o, &Pose2::new(3.0, 4.0, 1.0), 5.0), 0.0);
        assert_eq!(distance_error(&o, &o, 2.0), -2.0);
        assert_eq!(distance_error(&o, &Pose2::new(1.0, 0.0, 0.0), 3.0), -2.0);
    }

    #[test]
    fn distance_jacobian_example() {
        let (ji, jj, deg) = distance_jacobians(&Pose2::identity(), &Pose2::new(1.0, 0.0, 0.0));
        assert_eq!(ji, [-1.0, 0.0, 0.0]);
        assert_eq!(jj, [1.0, 0.0, 0.0]);
        assert!(!deg);
        let (_, jj, deg) = distance_jacobians(&Pose2::identity(), &Pose2::new(1e-9, 0.0, 0.0));
        assert!(deg);
        assert_eq!(jj, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn validation() {
        let n = NodeId::new(0, 0);
        let m = NodeId::new(0, 1);
        let c = Constraint::<f64>::Distance {
            i: n,
            j: n,
            d: 1.0,
            w: 1.0,
        };
        assert!(c.validate().is_err());
        let c = Constraint::Distance {
            i: n,
            j: m,
            d: 1.0,
            w: 0.0,
        };
        assert!(c.validate().is_err());
        let c = Constraint::PosePrior {
            i: n,
            z: Pose2::identity(),
            info: mat3::diag([1.0, 1.0, -1.0]),
        };
        assert!(c.validate().is_err());
        let c = Constraint::<f64>::RelativePose {
            i: n,
            j: m,
            z: Pose2::identity(),
            info: mat3::identity(),
        };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn chi2_of_single_distance_edge() {
        let c = Constraint::Distance {
            i: NodeId::new(0, 0),
            j: NodeId::new(0, 1),
            d: 3.0,
            w: 0.25,
        };
        assert_eq!(c.chi2(&Pose2::identity(), Some(&Pose2::new(1.0, 0.0, 0.0))), 1.0);
    }
}
