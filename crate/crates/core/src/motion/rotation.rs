//! Axis-angle helpers on top of nalgebra quaternions.

use std::f64::consts::PI;

use nalgebra::{Rotation3, UnitQuaternion, Vector3};

use super::AxisAngle;

pub fn norm(v: AxisAngle) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn to_quaternion(v: AxisAngle) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(Vector3::from(v))
}

pub fn from_quaternion(q: &UnitQuaternion<f64>) -> AxisAngle {
    canonicalize(q.scaled_axis().into())
}

pub fn to_matrix(v: AxisAngle) -> Rotation3<f64> {
    Rotation3::from_scaled_axis(Vector3::from(v))
}

/// Maps a rotation vector to the equivalent one with magnitude in `[0, π]`.
/// Vectors already in range are returned bit-for-bit.
pub fn canonicalize(v: AxisAngle) -> AxisAngle {
    let angle = norm(v);
    if angle <= PI || !angle.is_finite() {
        return v;
    }
    let wrapped = angle.rem_euclid(2.0 * PI);
    let axis = [v[0] / angle, v[1] / angle, v[2] / angle];
    let (scale, sign) = if wrapped > PI {
        (2.0 * PI - wrapped, -1.0)
    } else {
        (wrapped, 1.0)
    };
    [
        sign * axis[0] * scale,
        sign * axis[1] * scale,
        sign * axis[2] * scale,
    ]
}

/// Shortest-arc spherical interpolation between two rotation vectors.
/// Returns `a` exactly at `t = 0` and whenever `a == b`.
pub fn slerp(a: AxisAngle, b: AxisAngle, t: f64) -> AxisAngle {
    if a == b || t <= 0.0 {
        return a;
    }
    if t >= 1.0 {
        return b;
    }
    let qa = to_quaternion(a);
    let mut qb = to_quaternion(b);
    if qa.coords.dot(&qb.coords) < 0.0 {
        qb = UnitQuaternion::new_unchecked(-qb.into_inner());
    }
    from_quaternion(&qa.slerp(&qb, t))
}

/// Angle of the relative rotation taking `a` to `b`, in `[0, π]`.
pub fn angle_between(a: AxisAngle, b: AxisAngle) -> f64 {
    if a == b {
        return 0.0;
    }
    to_quaternion(a).angle_to(&to_quaternion(b))
}

pub fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 || a == b {
        a
    } else {
        a + (b - a) * t
    }
}

pub fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [lerp(a[0], b[0], t), lerp(a[1], b[1], t), lerp(a[2], b[2], t)]
}
