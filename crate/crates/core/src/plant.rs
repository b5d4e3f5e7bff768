//! Built-in plants used to generate ground-truth data.
//!
//! Both plants share the same structure: a first-order actuator pulls each
//! shape coordinate toward a setpoint that is affine in the commanded
//! input, and a shape-dependent local connection converts shape velocity to
//! body velocity, `xi = -A(r) r_dot`. Drag dominates, so the body has no
//! momentum of its own.
//!
//! The swimmer is a three-link chain in a viscous fluid with anisotropic
//! drag on each slender link; its connection comes from force and torque
//! balance. The surrogate mimics a swelling-gel crawler: volume-like shape
//! coordinates with much faster shrinking than swelling, and a smooth
//! hand-picked connection with nonzero curl.

use std::ops::AddAssign;

use nalgebra::{DMatrix, Matrix3, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se2::{exp_twist, Pose};
use crate::waveform::CycleSchedule;

/// Three-link swimmer: middle link spans the body x-axis, outer links pivot
/// at its ends. Joint angles are zero when the chain is straight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwimmerConfig {
    pub link_length: f64,
    pub tangential_drag: f64,
    /// Normal-to-tangential drag ratio; must exceed zero, and must differ
    /// from 1 for the swimmer to go anywhere.
    pub drag_ratio: f64,
    /// First-order actuator rates for the two joints.
    pub rate: [f64; 2],
    /// Setpoint slope per unit input.
    pub gain: [f64; 2],
    /// Setpoint offset.
    pub bias: [f64; 2],
    pub input_range: [f64; 2],
    /// Symmetric joint limit in radians.
    pub joint_limit: f64,
}

impl Default for SwimmerConfig {
    fn default() -> Self {
        SwimmerConfig {
            link_length: 1.0,
            tangential_drag: 1.0,
            drag_ratio: 2.0,
            rate: [1.0, 0.5],
            gain: [0.5, 0.5],
            bias: [0.0, 0.0],
            input_range: [-1.0, 1.0],
            joint_limit: 0.5,
        }
    }
}

/// Swelling-gel surrogate: shape coordinates are normalized volumes that
/// shrink much faster than they swell. Times in hours, input in deg C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Swelling rate per hour for each coordinate.
    pub swell_rate: [f64; 2],
    /// Shrinking is this many times faster than swelling.
    pub shrink_ratio: f64,
    /// Setpoint slope per deg C (negative: heat shrinks the gel).
    pub gain: [f64; 2],
    pub bias: [f64; 2],
    pub input_range: [f64; 2],
    pub volume_range: [f64; 2],
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            swell_rate: [0.9, 0.6],
            shrink_ratio: 10.0,
            gain: [-0.019, -0.0175],
            bias: [1.33, 1.25],
            input_range: [20.0, 65.0],
            volume_range: [0.0, 1.5],
        }
    }
}

/// A simulatable plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantModel {
    Swimmer(SwimmerConfig),
    Surrogate(SurrogateConfig),
}

impl Default for PlantModel {
    fn default() -> Self {
        PlantModel::Swimmer(SwimmerConfig::default())
    }
}

fn rot90(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

fn cross2(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Per-link geometry in the body frame: anchor point, unit direction, and
/// the link's angular rate per unit of each joint rate.
struct Link {
    anchor: Vector2<f64>,
    dir: Vector2<f64>,
    joint_gain: [f64; 2],
}

fn swimmer_links(cfg: &SwimmerConfig, r: Vector2<f64>) -> [Link; 3] {
    let l = cfg.link_length;
    let rear_angle = std::f64::consts::PI + r[0];
    let front_angle = r[1];
    [
        Link {
            anchor: Vector2::new(-l / 2.0, 0.0),
            dir: Vector2::new(rear_angle.cos(), rear_angle.sin()),
            joint_gain: [1.0, 0.0],
        },
        Link {
            anchor: Vector2::new(-l / 2.0, 0.0),
            dir: Vector2::new(1.0, 0.0),
            joint_gain: [0.0, 0.0],
        },
        Link {
            anchor: Vector2::new(l / 2.0, 0.0),
            dir: Vector2::new(front_angle.cos(), front_angle.sin()),
            joint_gain: [0.0, 1.0],
        },
    ]
}

/// Total drag wrench on the swimmer, linear in body velocity and joint
/// rates: returns `(M, N)` with `wrench = M xi + N r_dot`.
fn swimmer_drag_system(cfg: &SwimmerConfig, r: Vector2<f64>) -> (Matrix3<f64>, Matrix3x2<f64>) {
    let l = cfg.link_length;
    let ct = cfg.tangential_drag;
    let cn = cfg.drag_ratio * ct;
    let mut m = Matrix3::zeros();
    let mut n = Matrix3x2::zeros();
    for link in swimmer_links(cfg, r) {
        let t = link.dir;
        let nrm = rot90(t);
        let drag = ct * t * t.transpose() + cn * nrm * nrm.transpose();
        // Material velocity along the link is affine in arc length:
        // v(s) = v0 + s v1. For unit xi components and unit joint rates:
        //   vx: v0 = ex;  vy: v0 = ey;  omega: v0 = J a, v1 = J e;
        //   r_j: v1 = gain_j J e.
        let je = rot90(link.dir);
        let ja = rot90(link.anchor);
        // Integrals of the drag force and torque for v(s) = v0 + s v1:
        //   F = -D (L v0 + L^2/2 v1)
        //   tau = -(a x D v0) L - (a x D v1 + e x D v0) L^2/2 - (e x D v1) L^3/3
        let accumulate = |v0: Vector2<f64>, v1: Vector2<f64>| -> Vector3<f64> {
            let f = -(drag * (l * v0 + l * l / 2.0 * v1));
            let tau = -(cross2(link.anchor, drag * v0) * l
                + (cross2(link.anchor, drag * v1) + cross2(link.dir, drag * v0)) * l * l / 2.0
                + cross2(link.dir, drag * v1) * l * l * l / 3.0);
            Vector3::new(f.x, f.y, tau)
        };
        m.column_mut(0).add_assign(&accumulate(Vector2::new(1.0, 0.0), Vector2::zeros()));
        m.column_mut(1).add_assign(&accumulate(Vector2::new(0.0, 1.0), Vector2::zeros()));
        m.column_mut(2).add_assign(&accumulate(ja, je));
        for j in 0..2 {
            if link.joint_gain[j] != 0.0 {
                n.column_mut(j)
                    .add_assign(&accumulate(Vector2::zeros(), link.joint_gain[j] * je));
            }
        }
    }
    (m, n)
}

/// Smooth synthetic connection for the surrogate, with nonzero curl so
/// non-reciprocal volume loops produce net displacement. Units: body
/// lengths per unit volume change.
fn surrogate_connection(r: Vector2<f64>) -> Matrix3x2<f64> {
    let s1 = r[0] - 0.5;
    let s2 = r[1] - 0.5;
    Matrix3x2::new(
        0.4 + 0.6 * s2,
        -0.4 - 0.6 * s1,
        0.3 * s1,
        0.3 * s2,
        0.5 + 0.8 * s2 * s2,
        -0.5 - 0.8 * s1 * s1,
    )
}

impl PlantModel {
    pub fn shape_dim(&self) -> usize {
        2
    }

    pub fn input_range(&self) -> [f64; 2] {
        match self {
            PlantModel::Swimmer(c) => c.input_range,
            PlantModel::Surrogate(c) => c.input_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.input_range();
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "input_range must be increasing, got [{lo}, {hi}]"
            )));
        }
        match self {
            PlantModel::Swimmer(c) => {
                if !(c.link_length > 0.0) {
                    return Err(Error::InvalidConfig("link_length must be positive".into()));
                }
                if !(c.tangential_drag > 0.0) || !(c.drag_ratio > 0.0) {
                    return Err(Error::InvalidConfig(
                        "drag coefficients must be positive".into(),
                    ));
                }
                if c.rate.iter().any(|&k| !(k > 0.0)) {
                    return Err(Error::InvalidConfig(
                        "actuator rates must be positive".into(),
                    ));
                }
                if !(c.joint_limit > 0.0) {
                    return Err(Error::InvalidConfig("joint_limit must be positive".into()));
                }
            }
            PlantModel::Surrogate(c) => {
                if c.swell_rate.iter().any(|&k| !(k > 0.0)) || !(c.shrink_ratio > 0.0) {
                    return Err(Error::InvalidConfig(
                        "surrogate rates must be positive".into(),
                    ));
                }
                if !(c.volume_range[0] < c.volume_range[1]) {
                    return Err(Error::InvalidConfig(
                        "volume_range must be increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Shape the actuators settle to under a constant input.
    pub fn steady_shape(&self, u: f64) -> Vector2<f64> {
        let (gain, bias) = match self {
            PlantModel::Swimmer(c) => (c.gain, c.bias),
            PlantModel::Surrogate(c) => (c.gain, c.bias),
        };
        Vector2::new(gain[0] * u + bias[0], gain[1] * u + bias[1])
    }

    /// First-order actuator response toward the setpoint.
    pub fn shape_rate(&self, r: Vector2<f64>, u: f64) -> Vector2<f64> {
        let target = self.steady_shape(u);
        match self {
            PlantModel::Swimmer(c) => Vector2::new(
                c.rate[0] * (target[0] - r[0]),
                c.rate[1] * (target[1] - r[1]),
            ),
            PlantModel::Surrogate(c) => {
                let pick = |i: usize| {
                    let base = c.swell_rate[i];
                    if target[i] < r[i] {
                        base * c.shrink_ratio
                    } else {
                        base
                    }
                };
                Vector2::new(pick(0) * (target[0] - r[0]), pick(1) * (target[1] - r[1]))
            }
        }
    }

    /// Net viscous wrench on the body at the given state. Zero exactly when
    /// `xi = -A(r) r_dot`. Only drag-balance plants carry a wrench model.
    pub fn drag_wrench(
        &self,
        r: Vector2<f64>,
        xi: Vector3<f64>,
        r_dot: Vector2<f64>,
    ) -> Result<Vector3<f64>> {
        match self {
            PlantModel::Swimmer(cfg) => {
                let (m, n) = swimmer_drag_system(cfg, r);
                Ok(m * xi + n * r_dot)
            }
            PlantModel::Surrogate(_) => Err(Error::InvalidInput(
                "the surrogate plant has no force balance".into(),
            )),
        }
    }

    /// Local connection `A(r)`, defined by `xi = -A(r) r_dot`.
    pub fn connection(&self, r: Vector2<f64>) -> Result<Matrix3x2<f64>> {
        match self {
            PlantModel::Swimmer(cfg) => {
                if !(cfg.drag_ratio > 0.0) || !(cfg.tangential_drag > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "drag coefficients must be positive, got ratio {} and tangential {}",
                        cfg.drag_ratio, cfg.tangential_drag
                    )));
                }
                let (m, n) = swimmer_drag_system(cfg, r);
                let lu = m.lu();
                let a = lu
                    .solve(&n)
                    .ok_or_else(|| Error::Numerical("drag system is singular".into()))?;
                // The drag matrix is strictly dissipative; a large residual
                // means the solve went bad numerically.
                let residual = (m * a - n).norm() / n.norm().max(1e-300);
                if residual > 1e-8 {
                    return Err(Error::Numerical(format!(
                        "ill-conditioned drag balance: relative residual {residual:.3e}"
                    )));
                }
                Ok(a)
            }
            PlantModel::Surrogate(_) => Ok(surrogate_connection(r)),
        }
    }

    fn shape_bounds(&self) -> (f64, f64) {
        match self {
            PlantModel::Swimmer(c) => (-c.joint_limit, c.joint_limit),
            PlantModel::Surrogate(c) => (c.volume_range[0], c.volume_range[1]),
        }
    }

    fn check_shape(&self, r: Vector2<f64>, t: f64) -> Result<()> {
        let (lo, hi) = self.shape_bounds();
        let tol = 1e-6 * (hi - lo).abs().max(1.0);
        for j in 0..2 {
            if r[j] < lo - tol || r[j] > hi + tol {
                return Err(Error::ShapeLimit {
                    t,
                    detail: format!("coordinate {} at {} outside [{lo}, {hi}]", j + 1, r[j]),
                });
            }
        }
        Ok(())
    }

    fn check_input(&self, u: &[f64]) -> Result<()> {
        let [lo, hi] = self.input_range();
        let tol = 1e-9 * (hi - lo).abs();
        for (i, &v) in u.iter().enumerate() {
            if v < lo - tol || v > hi + tol {
                return Err(Error::InvalidInput(format!(
                    "input sample {i} = {v} outside plant range [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// A simulated or predicted run on a uniform time grid. Rows of the shape
/// and velocity matrices are samples; `phi` carries the commanded phase
/// when the run came from a cycle schedule, zeros otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub u: Vec<f64>,
    pub r: DMatrix<f64>,
    pub r_dot: DMatrix<f64>,
    pub xi: DMatrix<f64>,
    pub pose: Vec<Pose>,
    pub phi: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| i as f64 * self.dt).collect()
    }

    pub fn shape_dim(&self) -> usize {
        self.r.ncols()
    }

    /// Pose of sample `i1` expressed in the body frame of sample `i0`:
    /// net displacement over the span, with `x` the forward progress along
    /// the starting heading.
    pub fn displacement(&self, i0: usize, i1: usize) -> Pose {
        self.pose[i0].inverse().compose(&self.pose[i1])
    }
}

/// Integrates the actuator ODE under the sampled input `u` (held piecewise
/// linear between samples) with classical fourth-order Runge-Kutta, then
/// reconstructs body velocity from the connection and accumulates the pose
/// by exact exponential steps, starting from `g0`.
///
/// The initial shape is the steady shape of the first input sample.
pub fn simulate(plant: &PlantModel, u: &[f64], dt: f64, g0: Pose) -> Result<Trajectory> {
    if u.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 input samples, got {}",
            u.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    plant.check_input(u)?;
    let n = u.len();
    let mut r = Vector2::from(plant.steady_shape(u[0]));
    let mut pose = g0;
    let mut r_mat = DMatrix::zeros(n, 2);
    let mut rdot_mat = DMatrix::zeros(n, 2);
    let mut xi_mat = DMatrix::zeros(n, 3);
    let mut poses = Vec::with_capacity(n);
    for i in 0..n {
        plant.check_shape(r, i as f64 * dt)?;
        let rdot = plant.shape_rate(r, u[i]);
        let a = plant.connection(r)?;
        let xi = -(a * rdot);
        r_mat.set_row(i, &r.transpose());
        rdot_mat.set_row(i, &rdot.transpose());
        xi_mat.set_row(i, &xi.transpose());
        poses.push(pose);
        if i + 1 < n {
            let u0 = u[i];
            let u1 = u[i + 1];
            let um = 0.5 * (u0 + u1);
            let k1 = plant.shape_rate(r, u0);
            let k2 = plant.shape_rate(r + 0.5 * dt * k1, um);
            let k3 = plant.shape_rate(r + 0.5 * dt * k2, um);
            let k4 = plant.shape_rate(r + dt * k3, u1);
            r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            pose = pose.compose(&exp_twist(
                &crate::se2::BodyVelocity::from_vector(&xi),
                dt,
            ));
        }
    }
    Ok(Trajectory {
        dt,
        u: u.to_vec(),
        r: r_mat,
        r_dot: rdot_mat,
        xi: xi_mat,
        pose: poses,
        phi: vec![0.0; n],
    })
}

/// Simulates the input program of a cycle schedule and attaches the
/// commanded phase.
pub fn simulate_schedule(plant: &PlantModel, schedule: &CycleSchedule) -> Result<Trajectory> {
    let u = schedule.synth();
    let mut traj = simulate(plant, &u, schedule.dt, Pose::identity())?;
    traj.phi = schedule.clock_phase();
    Ok(traj)
}
