//! Rollouts of a fitted gait model and prediction-quality scores.
//!
//! A rollout drives the actuator deviation model with the commanded clock
//! phase of a cycle schedule, integrates the shape deviation forward by
//! Euler steps, and reconstructs shape, shape velocity, body velocity, and
//! pose. The pose is also Euler-stepped by default, with exact exponential
//! stepping available for accuracy studies. The baseline rollout ignores
//! deviations entirely and replays the limit cycle; skill scores measure
//! how much of the baseline's residual the full model removes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gait_model::GaitModel;
use crate::plant::Trajectory;
use crate::se2::{step_pose, BodyVelocity, Integrator, Pose};
use crate::waveform::CycleSchedule;

/// Rolls the model forward over a cycle schedule from pose `g0`, starting
/// on the limit cycle (zero shape deviation).
pub fn predict(
    model: &GaitModel,
    schedule: &CycleSchedule,
    g0: Pose,
    integrator: Integrator,
) -> Result<Trajectory> {
    let zeros = DVector::zeros(model.shape_dim());
    predict_from(model, schedule, g0, &zeros, integrator)
}

/// Rollout with an explicit initial shape deviation.
pub fn predict_from(
    model: &GaitModel,
    schedule: &CycleSchedule,
    g0: Pose,
    delta_r0: &DVector<f64>,
    integrator: Integrator,
) -> Result<Trajectory> {
    if model.input_dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "schedule rollouts drive one input channel, model has {}",
            model.input_dim()
        )));
    }
    let d = model.shape_dim();
    if delta_r0.len() != d {
        return Err(Error::InvalidInput(format!(
            "initial deviation has {} coordinates, model expects {d}",
            delta_r0.len()
        )));
    }
    let u = schedule.synth();
    let phi = schedule.clock_phase();
    let dt = schedule.dt;
    let n = u.len();
    let cycle = &model.limit_cycle;
    let shape_deriv = cycle.shape.derivative();
    let mut delta_r = delta_r0.clone();
    let mut pose = g0;
    let mut r_mat = DMatrix::zeros(n, d);
    let mut rdot_mat = DMatrix::zeros(n, d);
    let mut xi_mat = DMatrix::zeros(n, 3);
    let mut poses = Vec::with_capacity(n);
    for i in 0..n {
        let p = phi[i];
        let theta_u = cycle.input.eval_channel(p, 0);
        let du = DVector::from_element(1, u[i] - theta_u);
        let drd = model.predict_delta_r_dot(p, &delta_r, &du);
        let theta_r = cycle.shape.eval(p);
        let theta_rd = shape_deriv.eval(p) * cycle.mean_rate;
        for j in 0..d {
            r_mat[(i, j)] = theta_r[j] + delta_r[j];
            rdot_mat[(i, j)] = theta_rd[j] + drd[j];
        }
        let xi = model.predict_xi(p, &delta_r, &drd);
        for k in 0..3 {
            xi_mat[(i, k)] = xi[k];
        }
        poses.push(pose);
        if i + 1 < n {
            delta_r += dt * drd;
            pose = step_pose(
                &pose,
                &BodyVelocity::new(xi[0], xi[1], xi[2]),
                dt,
                integrator,
            );
        }
    }
    Ok(Trajectory { dt, u, r: r_mat, r_dot: rdot_mat, xi: xi_mat, pose: poses, phi })
}

/// Replays the limit cycle with zero deviations: the no-skill reference
/// every prediction is scored against.
pub fn baseline(
    model: &GaitModel,
    schedule: &CycleSchedule,
    g0: Pose,
    integrator: Integrator,
) -> Result<Trajectory> {
    let d = model.shape_dim();
    let u = schedule.synth();
    let phi = schedule.clock_phase();
    let dt = schedule.dt;
    let n = u.len();
    let cycle = &model.limit_cycle;
    let shape_deriv = cycle.shape.derivative();
    let mut r_mat = DMatrix::zeros(n, d);
    let mut rdot_mat = DMatrix::zeros(n, d);
    let mut xi_mat = DMatrix::zeros(n, 3);
    let mut poses = Vec::with_capacity(n);
    let mut pose = g0;
    for i in 0..n {
        let p = phi[i];
        let theta_r = cycle.shape.eval(p);
        let theta_rd = shape_deriv.eval(p) * cycle.mean_rate;
        for j in 0..d {
            r_mat[(i, j)] = theta_r[j];
            rdot_mat[(i, j)] = theta_rd[j];
        }
        let c = model.bodyvel_at(p);
        for k in 0..3 {
            xi_mat[(i, k)] = c.intercept[k];
        }
        poses.push(pose);
        if i + 1 < n {
            pose = step_pose(
                &pose,
                &BodyVelocity::new(c.intercept[0], c.intercept[1], c.intercept[2]),
                dt,
                integrator,
            );
        }
    }
    Ok(Trajectory { dt, u, r: r_mat, r_dot: rdot_mat, xi: xi_mat, pose: poses, phi })
}

/// Skill score of a prediction against a baseline: one minus the ratio of
/// accumulated row-wise Euclidean error norms.
///
/// 1 is a perfect prediction, 0 matches the baseline, negative is worse
/// than the baseline. A zero prediction error scores 1 regardless of the
/// baseline; a perfect baseline with an imperfect prediction scores
/// negative infinity.
pub fn gamma(pred: &DMatrix<f64>, base: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    assert_eq!(pred.nrows(), truth.nrows(), "prediction/truth row mismatch");
    assert_eq!(base.nrows(), truth.nrows(), "baseline/truth row mismatch");
    let mut numer = 0.0;
    let mut denom = 0.0;
    for i in 0..truth.nrows() {
        numer += (pred.row(i) - truth.row(i)).norm();
        denom += (base.row(i) - truth.row(i)).norm();
    }
    if numer == 0.0 {
        return 1.0;
    }
    if denom == 0.0 {
        return f64::NEG_INFINITY;
    }
    1.0 - numer / denom
}

/// Prediction skill over one span of samples.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Evaluation {
    /// Skill on body velocity.
    pub gamma_xi: f64,
    /// Skill on shape velocity.
    pub gamma_shape_rate: f64,
    pub samples: usize,
}

/// Scores a prediction and baseline against observed truth, sample ranges
/// already aligned.
pub fn evaluate(truth: &Trajectory, pred: &Trajectory, base: &Trajectory) -> Result<Evaluation> {
    if truth.len() != pred.len() || truth.len() != base.len() {
        return Err(Error::InvalidInput(format!(
            "trajectory lengths disagree: truth {}, prediction {}, baseline {}",
            truth.len(),
            pred.len(),
            base.len()
        )));
    }
    Ok(Evaluation {
        gamma_xi: gamma(&pred.xi, &base.xi, &truth.xi),
        gamma_shape_rate: gamma(&pred.r_dot, &base.r_dot, &truth.r_dot),
        samples: truth.len(),
    })
}
