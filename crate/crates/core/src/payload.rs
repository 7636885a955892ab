//! Payload rigid-body dynamics.
//!
//! Translational motion is driven by drag, the anchor-link cable forces, an
//! optional external force (wind) and gravity. Rotation follows the Euler
//! equation written with the angular velocity and moment in inertial
//! coordinates and a constant inertia tensor. The attitude is carried as the
//! body-axes matrix and integrated directly.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::frame::{orthonormality_error, skew};

/// Largest `‖BᵀB − I‖_max` that [`orthonormalize`] will repair.
pub const MAX_REPAIRABLE_DRIFT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("body axes drifted too far from orthonormal (‖BᵀB − I‖ = {drift:e})")]
pub struct IntegrityError {
    pub drift: f64,
}

/// Inertia tensor with its cached inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inertia {
    pub matrix: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
}

impl Inertia {
    /// # Panics
    /// If `matrix` is singular.
    pub fn new(matrix: Matrix3<f64>) -> Self {
        let inverse = matrix
            .try_inverse()
            .expect("inertia tensor must be invertible");
        Inertia { matrix, inverse }
    }

    pub fn diagonal(principal: [f64; 3]) -> Self {
        Self::new(Matrix3::from_diagonal(&Vector3::from(principal)))
    }
}

/// Force/moment pair acting on the payload, both in inertial coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vector3<f64>,
    /// Moment about the center of mass.
    pub moment: Vector3<f64>,
}

impl Wrench {
    /// Resultant of point forces applied at `offsets` from the center of mass.
    pub fn from_point_forces(offsets: &[Vector3<f64>], forces: &[Vector3<f64>]) -> Self {
        let mut w = Wrench::default();
        for (r, f) in offsets.iter().zip(forces) {
            w.force += f;
            w.moment += r.cross(f);
        }
        w
    }
}

pub fn payload_translational_accel(
    velocity: &Vector3<f64>,
    mass: f64,
    drag: f64,
    cable_forces: &[Vector3<f64>],
    external_force: &Vector3<f64>,
    gravity: &Vector3<f64>,
) -> Vector3<f64> {
    let mut total = -drag * velocity;
    for f in cable_forces {
        total += f;
    }
    total += external_force;
    total / mass - gravity
}

/// ω̇ = I⁻¹(−ω × Iω + M).
pub fn angular_accel(
    angular_velocity: &Vector3<f64>,
    inertia: &Inertia,
    moment: &Vector3<f64>,
) -> Vector3<f64> {
    let h = inertia.matrix * angular_velocity;
    inertia.inverse * (moment - angular_velocity.cross(&h))
}

/// Angular acceleration under the cable forces applied at the inertial
/// anchor offsets `B·c^B_k`.
pub fn payload_angular_accel(
    angular_velocity: &Vector3<f64>,
    inertia: &Inertia,
    cable_forces: &[Vector3<f64>],
    anchor_offsets: &[Vector3<f64>],
) -> Vector3<f64> {
    let moment = anchor_offsets
        .iter()
        .zip(cable_forces)
        .fold(Vector3::zeros(), |m, (r, f)| m + r.cross(f));
    angular_accel(angular_velocity, inertia, &moment)
}

/// Column-wise `ḃ_i = ω × b_i`.
pub fn body_axes_derivative(axes: &Matrix3<f64>, angular_velocity: &Vector3<f64>) -> Matrix3<f64> {
    skew(angular_velocity) * axes
}

/// Nearest proper rotation to `axes` (orthogonal polar factor).
pub fn orthonormalize(axes: &Matrix3<f64>) -> Result<Matrix3<f64>, IntegrityError> {
    let drift = orthonormality_error(axes);
    if drift.is_nan() || drift >= MAX_REPAIRABLE_DRIFT {
        return Err(IntegrityError { drift });
    }
    let svd = axes.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        // reflect the weakest singular direction so det = +1
        let (i_min, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        let mut u = u;
        u.column_mut(i_min).neg_mut();
        r = u * v_t;
    }
    Ok(r)
}

/// Azimuth ψ and elevation θ (rad) of the payload-plane normal `b_z`.
///
/// ψ is reported as 0 when the normal is vertical.
pub fn measure_azimuth_elevation(axes: &Matrix3<f64>) -> (f64, f64) {
    let bz = axes.column(2);
    let elevation = bz.z.clamp(-1.0, 1.0).asin();
    let azimuth = if elevation.cos() < 1e-9 {
        0.0
    } else {
        bz.y.atan2(bz.x)
    };
    (azimuth, elevation)
}

/// Unit normal for azimuth ψ and elevation θ.
pub fn normal_from_angles(azimuth: f64, elevation: f64) -> Vector3<f64> {
    Vector3::new(
        elevation.cos() * azimuth.cos(),
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
    )
}
