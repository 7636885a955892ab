//! Inertial ↔ payload-body frame transforms.
//!
//! The body axes matrix `B = [b_x b_y b_z]` has the body unit vectors,
//! expressed in inertial coordinates, as its columns. It maps body-frame
//! vectors to the inertial frame.

use nalgebra::{Matrix3, Vector3};

pub fn body_to_inertial(axes: &Matrix3<f64>, v_body: &Vector3<f64>) -> Vector3<f64> {
    axes * v_body
}

/// Position of inertial point `r` in the body frame anchored at `origin`.
pub fn inertial_to_body(
    axes: &Matrix3<f64>,
    r: &Vector3<f64>,
    origin: &Vector3<f64>,
) -> Vector3<f64> {
    axes.tr_mul(&(r - origin))
}

/// Skew-symmetric cross-product matrix, `skew(w) * v == w × v`.
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Largest absolute entry of `BᵀB − I`.
pub fn orthonormality_error(axes: &Matrix3<f64>) -> f64 {
    (axes.tr_mul(axes) - Matrix3::identity()).amax()
}
