//! Rotations and the two coordinate frames used by the channel model.
//!
//! The IRS lies in the xy-plane with z pointing away from the wall. A node
//! (laser source or receiver lens) is described by its distance from the
//! point it faces on the IRS and by the elevation/azimuth of that direction.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Counter-clockwise rotation about the y-axis.
pub fn rot_y(phi: f64) -> Mat3 {
    let (s, c) = phi.sin_cos();
    Mat3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

/// Counter-clockwise rotation about the z-axis.
pub fn rot_z(phi: f64) -> Mat3 {
    let (s, c) = phi.sin_cos();
    Mat3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Position and orientation of a source or receiver relative to the IRS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedNode {
    /// Distance to the point on the IRS the node faces (m).
    pub d: f64,
    /// Elevation of the node direction measured from the IRS plane (rad).
    pub theta: f64,
    /// Azimuth of the node direction (rad).
    pub phi: f64,
}

impl OrientedNode {
    pub fn new(d: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidGeometry(format!("distance must be positive, got {d}")));
        }
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidGeometry("angles must be finite".into()));
        }
        if theta.sin().abs() < 1e-12 {
            return Err(Error::InvalidGeometry(format!("sin(theta) vanishes at theta = {theta}")));
        }
        Ok(Self { d, theta, phi })
    }
}

/// Maps a point of the IRS plane into the source frame, where the beam
/// propagates along z and the footprint center sits at `(0, 0, d)`.
pub fn irs_to_ls_frame(r: &Vec3, ls: &OrientedNode, r_l0: &Vec3) -> Vec3 {
    rot_y(std::f64::consts::FRAC_PI_2 - ls.theta).transpose() * (r - r_l0) + Vec3::new(0.0, 0.0, ls.d)
}

/// Maps a point of the lens plane into IRS coordinates.
pub fn lens_to_irs_frame(r_p: &Vec3, pd: &OrientedNode, r_p0: &Vec3) -> Vec3 {
    rot_z(-pd.phi) * rot_y(std::f64::consts::FRAC_PI_2 - pd.theta) * (r_p + Vec3::new(0.0, 0.0, pd.d))
        + r_p0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn rotations_basic() {
        assert!((rot_y(0.0) - Mat3::identity()).norm() < 1e-15);
        assert!(close(&(rot_y(PI / 2.0) * Vec3::x()), &Vec3::z(), 1e-15));
        assert!((rot_y(0.3) * rot_y(-0.3) - Mat3::identity()).norm() < 1e-15);
        assert!((rot_z(0.0) - Mat3::identity()).norm() < 1e-15);
        assert!(close(&(rot_z(PI) * Vec3::x()), &(-Vec3::x()), 1e-15));
        assert!((rot_z(1.1).determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ls_frame_examples() {
        let ls = OrientedNode::new(1000.0, PI / 3.0, 0.0).unwrap();
        let r0 = Vec3::new(0.2, -0.1, 0.0);
        assert!(close(&irs_to_ls_frame(&r0, &ls, &r0), &Vec3::new(0.0, 0.0, 1000.0), 1e-12));

        let normal = OrientedNode::new(7.0, PI / 2.0, 0.0).unwrap();
        let p = irs_to_ls_frame(&Vec3::new(1.0, 2.0, 0.0), &normal, &Vec3::zeros());
        assert!(close(&p, &Vec3::new(1.0, 2.0, 7.0), 1e-12));

        // Direct product of the transposed matrix with (0.5, 0, 0): the
        // z-row of R_y(pi/6)^T is (-sin(pi/6), 0, cos(pi/6)).
        let p = irs_to_ls_frame(&Vec3::new(0.5, 0.0, 0.0), &ls, &Vec3::zeros());
        assert!((p.z - 999.75).abs() < 1e-9);
        assert!((p.x - 0.5 * (PI / 3.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn lens_frame_examples() {
        let pd = OrientedNode::new(3000.0, PI / 2.0, 0.0).unwrap();
        let o = lens_to_irs_frame(&Vec3::zeros(), &pd, &Vec3::zeros());
        assert!(close(&o, &Vec3::new(0.0, 0.0, 3000.0), 1e-9));

        let pd = OrientedNode::new(3000.0, PI / 6.0, PI).unwrap();
        let rp0 = Vec3::new(0.1, 0.2, 0.0);
        let o = lens_to_irs_frame(&Vec3::zeros(), &pd, &rp0);
        assert!(((o - rp0).norm() - 3000.0).abs() < 1e-9);

        // Componentwise oracle from the expanded matrix product.
        let rp = Vec3::new(0.1, 0.0, 0.0);
        let o = lens_to_irs_frame(&rp, &pd, &Vec3::zeros());
        let (st, ct) = pd.theta.sin_cos();
        let (sp, cp) = pd.phi.sin_cos();
        let u = st * rp.x - ct * pd.d;
        let expect = Vec3::new(cp * u - sp * rp.y, sp * u + cp * rp.y, ct * rp.x + st * pd.d);
        assert!(close(&o, &expect, 1e-9));
    }

    #[test]
    fn node_validation() {
        assert!(OrientedNode::new(1.0, 0.0, 0.0).is_err());
        assert!(OrientedNode::new(-1.0, 1.0, 0.0).is_err());
        assert!(OrientedNode::new(1.0, 1.0, f64::NAN).is_err());
    }
}
