//! Planar rigid-body poses and body-frame velocities.
//!
//! Poses live in SE(2) and are stored as `(x, y, theta)`. Body velocities are
//! elements of the Lie algebra se(2), stored as `(vx, vy, omega)` in the
//! moving frame. The hat map sends a body velocity to the 3x3 matrix
//! generator used by `g_dot = g * hat(xi)`.

use nalgebra::{Matrix3, Rotation2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = theta.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Removes 2*pi jumps from a sampled angle series.
pub fn unwrap_angles(theta: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(theta.len());
    let mut prev_raw: Option<f64> = None;
    let mut offset = 0.0;
    for &a in theta {
        if let Some(p) = prev_raw {
            let mut d = a - p;
            while d > std::f64::consts::PI {
                d -= std::f64::consts::TAU;
                offset -= std::f64::consts::TAU;
            }
            while d <= -std::f64::consts::PI {
                d += std::f64::consts::TAU;
                offset += std::f64::consts::TAU;
            }
        }
        prev_raw = Some(a);
        out.push(a + offset);
    }
    out
}

/// Planar pose: position of the body frame and its heading, world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn identity() -> Self {
        Pose { x: 0.0, y: 0.0, theta: 0.0 }
    }

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    /// Group composition: `self` followed by `other` in `self`'s frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose {
            x: self.x + c * other.x - s * other.y,
            y: self.y + s * other.x + c * other.y,
            theta: self.theta + other.theta,
        }
    }

    pub fn inverse(&self) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose {
            x: -(c * self.x + s * self.y),
            y: s * self.x - c * self.y,
            theta: -self.theta,
        }
    }

    /// Maps a point from the body frame to the world frame.
    pub fn transform_point(&self, p: Vector2<f64>) -> Vector2<f64> {
        Rotation2::new(self.theta) * p + Vector2::new(self.x, self.y)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix3::new(c, -s, self.x, s, c, self.y, 0.0, 0.0, 1.0)
    }
}

/// Body-frame velocity `(vx, vy, omega)`: the vee of `g^{-1} g_dot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl BodyVelocity {
    pub fn zero() -> Self {
        BodyVelocity { vx: 0.0, vy: 0.0, omega: 0.0 }
    }

    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        BodyVelocity { vx, vy, omega }
    }

    pub fn from_vector(v: &nalgebra::Vector3<f64>) -> Self {
        BodyVelocity { vx: v[0], vy: v[1], omega: v[2] }
    }

    pub fn as_vector(&self) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new(self.vx, self.vy, self.omega)
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }
}

impl std::ops::Add for BodyVelocity {
    type Output = BodyVelocity;
    fn add(self, rhs: BodyVelocity) -> BodyVelocity {
        BodyVelocity::new(self.vx + rhs.vx, self.vy + rhs.vy, self.omega + rhs.omega)
    }
}

impl std::ops::Sub for BodyVelocity {
    type Output = BodyVelocity;
    fn sub(self, rhs: BodyVelocity) -> BodyVelocity {
        BodyVelocity::new(self.vx - rhs.vx, self.vy - rhs.vy, self.omega - rhs.omega)
    }
}

impl std::ops::Mul<f64> for BodyVelocity {
    type Output = BodyVelocity;
    fn mul(self, k: f64) -> BodyVelocity {
        BodyVelocity::new(self.vx * k, self.vy * k, self.omega * k)
    }
}

impl std::ops::Neg for BodyVelocity {
    type Output = BodyVelocity;
    fn neg(self) -> BodyVelocity {
        BodyVelocity::new(-self.vx, -self.vy, -self.omega)
    }
}

/// Lie-algebra matrix of a body velocity.
pub fn hat(xi: &BodyVelocity) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -xi.omega, xi.vx, //
        xi.omega, 0.0, xi.vy, //
        0.0, 0.0, 0.0,
    )
}

/// Inverse of [`hat`]. Rejects matrices violating the se(2) structure
/// (skew upper block, zero bottom row) beyond `tol`.
pub fn vee(m: &Matrix3<f64>, tol: f64) -> Result<BodyVelocity> {
    let structure = [
        m[(0, 0)].abs(),
        m[(1, 1)].abs(),
        (m[(0, 1)] + m[(1, 0)]).abs(),
        m[(2, 0)].abs(),
        m[(2, 1)].abs(),
        m[(2, 2)].abs(),
    ];
    let worst = structure.iter().cloned().fold(0.0f64, f64::max);
    if worst > tol {
        return Err(Error::InvalidInput(format!(
            "matrix is not in se(2): structure residual {worst:.3e} exceeds {tol:.3e}"
        )));
    }
    Ok(BodyVelocity::new(m[(0, 2)], m[(1, 2)], m[(1, 0)]))
}

/// Pose stepping rule for a body velocity held over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// First-order update of the pose components.
    Euler,
    /// Exact group exponential of the held twist.
    Exp,
}

/// Displacement produced by holding `xi` for time `dt`, as a pose increment
/// in the starting body frame (closed-form SE(2) exponential).
pub fn exp_twist(xi: &BodyVelocity, dt: f64) -> Pose {
    let w = xi.omega * dt;
    let ux = xi.vx * dt;
    let uy = xi.vy * dt;
    if w.abs() < 1e-10 {
        // Series for V(w) ~ I + w/2 J + O(w^2); J rotates by +pi/2.
        let half = 0.5 * w;
        Pose::new(ux - half * uy, uy + half * ux, w)
    } else {
        let (sw, cw) = w.sin_cos();
        let a = sw / w;
        let b = (1.0 - cw) / w;
        Pose::new(a * ux - b * uy, b * ux + a * uy, w)
    }
}

/// Advances a pose by one step of body velocity `xi` held over `dt`.
pub fn step_pose(g: &Pose, xi: &BodyVelocity, dt: f64, method: Integrator) -> Pose {
    match method {
        Integrator::Euler => {
            let (s, c) = g.theta.sin_cos();
            Pose::new(
                g.x + dt * (c * xi.vx - s * xi.vy),
                g.y + dt * (s * xi.vx + c * xi.vy),
                g.theta + dt * xi.omega,
            )
        }
        Integrator::Exp => g.compose(&exp_twist(xi, dt)),
    }
}

/// Recovers body velocities from a uniformly sampled pose path by central
/// differences (one-sided at the ends). Headings are unwrapped before
/// differencing, and world-frame position rates are rotated into the body
/// frame, so the result is exactly left-invariant.
pub fn body_velocity_from_poses(poses: &[Pose], dt: f64) -> Result<Vec<BodyVelocity>> {
    if poses.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 poses to differentiate, got {}",
            poses.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let n = poses.len();
    let theta_u = unwrap_angles(&poses.iter().map(|p| p.theta).collect::<Vec<_>>());
    let deriv = |f: &dyn Fn(usize) -> f64, i: usize| -> f64 {
        if i == 0 {
            (f(1) - f(0)) / dt
        } else if i == n - 1 {
            (f(n - 1) - f(n - 2)) / dt
        } else {
            (f(i + 1) - f(i - 1)) / (2.0 * dt)
        }
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let xd = deriv(&|j| poses[j].x, i);
        let yd = deriv(&|j| poses[j].y, i);
        let td = deriv(&|j| theta_u[j], i);
        let (s, c) = poses[i].theta.sin_cos();
        out.push(BodyVelocity::new(c * xd + s * yd, -s * xd + c * yd, td));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pose_close(a: &Pose, b: &Pose, tol: f64) -> bool {
        (a.x - b.x).abs() < tol
            && (a.y - b.y).abs() < tol
            && wrap_angle(a.theta - b.theta).abs() < tol
    }

    #[test]
    fn wrap_angle_range_and_fixed_points() {
        assert_abs_diff_eq!(wrap_angle(0.0), 0.0);
        assert_abs_diff_eq!(wrap_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert_abs_diff_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI);
        assert_abs_diff_eq!(wrap_angle(7.0), 7.0 - std::f64::consts::TAU, epsilon = 1e-12);
    }

    #[test]
    fn unwrap_recovers_linear_ramp() {
        let truth: Vec<f64> = (0..200).map(|i| 0.1 * i as f64).collect();
        let wrapped: Vec<f64> = truth.iter().map(|&a| wrap_angle(a)).collect();
        let unwrapped = unwrap_angles(&wrapped);
        for (u, t) in unwrapped.iter().zip(&truth) {
            assert_abs_diff_eq!(u, t, epsilon = 1e-9);
        }
    }

    #[test]
    fn hat_vee_round_trip() {
        let xi = BodyVelocity::new(0.3, -1.2, 0.7);
        let back = vee(&hat(&xi), 1e-12).unwrap();
        assert_eq!(xi, back);
    }

    #[test]
    fn vee_rejects_structure_violations() {
        let mut m = hat(&BodyVelocity::new(1.0, 2.0, 3.0));
        m[(2, 2)] = 1e-6;
        assert!(vee(&m, 1e-9).is_err());
    }

    #[test]
    fn exp_pure_translation() {
        let d = exp_twist(&BodyVelocity::new(2.0, -1.0, 0.0), 0.5);
        assert!(pose_close(&d, &Pose::new(1.0, -0.5, 0.0), 1e-14));
    }

    #[test]
    fn exp_pure_rotation() {
        let d = exp_twist(&BodyVelocity::new(0.0, 0.0, 1.0), std::f64::consts::PI);
        assert!(pose_close(&d, &Pose::new(0.0, 0.0, std::f64::consts::PI), 1e-14));
    }

    #[test]
    fn exp_quarter_turn_arc() {
        // Unit forward speed with unit turn rate for pi/2 traces a quarter
        // circle of radius 1: ends at (1, 1) facing +y.
        let d = exp_twist(&BodyVelocity::new(1.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        assert!(pose_close(
            &d,
            &Pose::new(1.0, 1.0, std::f64::consts::FRAC_PI_2),
            1e-13
        ));
    }

    #[test]
    fn exp_matches_fine_euler_subdivision() {
        let xi = BodyVelocity::new(0.8, -0.3, 1.7);
        let dt = 0.4;
        let coarse = step_pose(&Pose::identity(), &xi, dt, Integrator::Exp);
        let n = 200_000;
        let mut g = Pose::identity();
        for _ in 0..n {
            g = step_pose(&g, &xi, dt / n as f64, Integrator::Euler);
        }
        assert!(pose_close(&coarse, &g, 1e-4), "exp {coarse:?} vs euler {g:?}");
    }

    #[test]
    fn euler_error_is_second_order_in_dt() {
        let xi = BodyVelocity::new(1.0, 0.5, 1.3);
        let exact = exp_twist(&xi, 0.2);
        let err = |n: usize| {
            let mut g = Pose::identity();
            for _ in 0..n {
                g = step_pose(&g, &xi, 0.2 / n as f64, Integrator::Euler);
            }
            ((g.x - exact.x).powi(2) + (g.y - exact.y).powi(2)).sqrt()
        };
        let e1 = err(10);
        let e2 = err(20);
        let rate = (e1 / e2).log2();
        assert!(rate > 0.9 && rate < 1.3, "global order {rate}");
    }

    #[test]
    fn retraced_twist_sequence_cancels() {
        // Holding a twist sequence and then its reverse with negated signs
        // is an exact group-level cancellation, independent of step size.
        let seq: Vec<BodyVelocity> = (0..50)
            .map(|i| {
                let s = i as f64 * 0.13;
                BodyVelocity::new(s.sin(), (2.0 * s).cos() * 0.4, 0.3 * (s * 0.7).sin())
            })
            .collect();
        let dt = 0.05;
        let mut g = Pose::new(0.2, -0.1, 0.4);
        let g0 = g;
        for xi in &seq {
            g = step_pose(&g, xi, dt, Integrator::Exp);
        }
        for xi in seq.iter().rev() {
            g = step_pose(&g, &(-*xi), dt, Integrator::Exp);
        }
        assert!(pose_close(&g, &g0, 1e-9), "residual {:?}", g);
    }

    #[test]
    fn body_velocity_recovers_constant_twist() {
        let xi = BodyVelocity::new(0.6, -0.2, 0.9);
        let dt = 1e-4;
        let mut poses = vec![Pose::new(1.0, 2.0, 0.7)];
        // Sample the continuous flow exactly via the exponential.
        for i in 1..400 {
            poses.push(poses[0].compose(&exp_twist(&xi, dt * i as f64)));
        }
        let est = body_velocity_from_poses(&poses, dt).unwrap();
        for e in &est[1..est.len() - 1] {
            assert!((e.as_vector() - xi.as_vector()).norm() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn compose_inverse_is_identity(
            x in -5.0f64..5.0, y in -5.0f64..5.0, th in -6.0f64..6.0
        ) {
            let g = Pose::new(x, y, th);
            let e = g.compose(&g.inverse());
            prop_assert!(pose_close(&e, &Pose::identity(), 1e-10));
        }

        #[test]
        fn hat_vee_round_trip_prop(
            vx in -10.0f64..10.0, vy in -10.0f64..10.0, w in -10.0f64..10.0
        ) {
            let xi = BodyVelocity::new(vx, vy, w);
            let back = vee(&hat(&xi), 1e-12).unwrap();
            prop_assert_eq!(xi, back);
        }

        #[test]
        fn exp_step_matches_matrix_exponential_action(
            vx in -2.0f64..2.0, vy in -2.0f64..2.0, w in -2.0f64..2.0,
            x in -3.0f64..3.0, y in -3.0f64..3.0, th in -3.0f64..3.0
        ) {
            // g * Exp(xi dt) as matrices matches step_pose.
            let g = Pose::new(x, y, th);
            let xi = BodyVelocity::new(vx, vy, w);
            let dt = 0.3;
            let stepped = step_pose(&g, &xi, dt, Integrator::Exp);
            let m = g.matrix() * exp_twist(&xi, dt).matrix();
            prop_assert!((m[(0, 2)] - stepped.x).abs() < 1e-10);
            prop_assert!((m[(1, 2)] - stepped.y).abs() < 1e-10);
            prop_assert!((m[(1, 0)] - stepped.theta.sin()).abs() < 1e-10);
        }

        #[test]
        fn body_velocity_is_left_invariant(
            hx in -3.0f64..3.0, hy in -3.0f64..3.0, hth in -3.0f64..3.0
        ) {
            // A world-frame offset applied to every pose leaves the
            // body-frame velocity estimates unchanged.
            let dt = 0.01;
            let poses: Vec<Pose> = (0..60)
                .map(|i| {
                    let t = i as f64 * dt;
                    Pose::new((3.0 * t).sin(), 0.5 * (2.0 * t).cos(), 1.2 * t)
                })
                .collect();
            let h = Pose::new(hx, hy, hth);
            let shifted: Vec<Pose> = poses.iter().map(|p| h.compose(p)).collect();
            let a = body_velocity_from_poses(&poses, dt).unwrap();
            let b = body_velocity_from_poses(&shifted, dt).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u.as_vector() - v.as_vector()).norm() < 1e-9);
            }
        }
    }
}
