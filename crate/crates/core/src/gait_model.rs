//! Phase-windowed regression models of body velocity and actuator response.
//!
//! Samples are referenced to the limit cycle: perturbations are deviations
//! of shape, shape velocity, and input from their phase-indexed means. The
//! cycle is split into equal phase windows; within each window two linear
//! models are fitted:
//!
//! * body velocity: `xi ~ C + B dr + A drdot + dr' G drdot` (per body
//!   coordinate), capturing the connection, its shape derivative, and the
//!   drift of the mean cycle;
//! * actuator: `drdot ~ D + Er (dr - mean) + Eu (du - mean)`, fitted on
//!   window-centered regressors so `D` is exactly the window's mean shape
//!   velocity perturbation.
//!
//! Window coefficients are then smoothed across phase with a low-order
//! Fourier series, giving coefficient functions of phase.

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::LimitCycle;
use crate::signal::{fit_fourier, FourierSeries};

/// Condition number beyond which the window fit falls back to ridge.
pub const CONDITION_LIMIT: f64 = 1e8;
/// Relative ridge strength applied to the Gram matrix trace.
pub const RIDGE_SCALE: f64 = 1e-8;
/// Column standard deviation below which a regressor carries no signal.
pub const DEGENERATE_COLUMN_STD: f64 = 1e-10;

/// Equal partition of the circle: window of each wrapped phase, plus
/// per-window counts. Errors if any window receives no samples.
pub fn assign_windows(phi: &[f64], windows: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if windows == 0 {
        return Err(Error::InvalidInput("need at least one window".into()));
    }
    let tau = std::f64::consts::TAU;
    let mut idx = Vec::with_capacity(phi.len());
    let mut counts = vec![0usize; windows];
    for &p in phi {
        let w = ((p.rem_euclid(tau) / tau * windows as f64) as usize).min(windows - 1);
        idx.push(w);
        counts[w] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyWindow { window: empty, windows });
    }
    Ok((idx, counts))
}

/// Phase center of a window.
pub fn window_center(w: usize, windows: usize) -> f64 {
    std::f64::consts::TAU * (w as f64 + 0.5) / windows as f64
}

/// Samples prepared for window regressions: perturbations from the limit
/// cycle, already assigned to phase windows.
#[derive(Debug, Clone)]
pub struct RegressionDataset {
    pub shape_dim: usize,
    pub input_dim: usize,
    pub windows: usize,
    pub phi: Vec<f64>,
    pub delta_r: DMatrix<f64>,
    pub delta_r_dot: DMatrix<f64>,
    pub delta_u: DMatrix<f64>,
    pub xi: DMatrix<f64>,
    pub window: Vec<usize>,
    pub counts: Vec<usize>,
}

impl RegressionDataset {
    /// References samples to the limit cycle and bins them by phase.
    /// All row counts must match `phi.len()`.
    pub fn build(
        phi: &[f64],
        r: &DMatrix<f64>,
        r_dot: &DMatrix<f64>,
        u: &DMatrix<f64>,
        xi: &DMatrix<f64>,
        cycle: &LimitCycle,
        windows: usize,
    ) -> Result<RegressionDataset> {
        let n = phi.len();
        for (name, rows) in
            [("shape", r.nrows()), ("shape rate", r_dot.nrows()), ("input", u.nrows()), ("body velocity", xi.nrows())]
        {
            if rows != n {
                return Err(Error::InvalidInput(format!(
                    "{name} has {rows} rows for {n} phase samples"
                )));
            }
        }
        let d = r.ncols();
        let m = u.ncols();
        let shape_deriv = cycle.shape.derivative();
        let mut delta_r = DMatrix::zeros(n, d);
        let mut delta_r_dot = DMatrix::zeros(n, d);
        let mut delta_u = DMatrix::zeros(n, m);
        for i in 0..n {
            let p = phi[i];
            let theta_r = cycle.shape.eval(p);
            let theta_rd = shape_deriv.eval(p) * cycle.mean_rate;
            let theta_u = cycle.input.eval(p);
            for j in 0..d {
                delta_r[(i, j)] = r[(i, j)] - theta_r[j];
                delta_r_dot[(i, j)] = r_dot[(i, j)] - theta_rd[j];
            }
            for j in 0..m {
                delta_u[(i, j)] = u[(i, j)] - theta_u[j];
            }
        }
        let (window, counts) = assign_windows(phi, windows)?;
        Ok(RegressionDataset {
            shape_dim: d,
            input_dim: m,
            windows,
            phi: phi.to_vec(),
            delta_r,
            delta_r_dot,
            delta_u,
            xi: xi.clone(),
            window,
            counts,
        })
    }

    fn rows_of_window(&self, w: usize) -> Vec<usize> {
        (0..self.phi.len()).filter(|&i| self.window[i] == w).collect()
    }
}

/// Ordinary least squares with a conditioning check and a ridge fallback
/// for ill-conditioned windows. The condition number is that of the normal
/// equations (squared singular-value ratio of the design), since that is
/// the system the coefficients solve. Returns the coefficients, that
/// condition number, and whether ridge was used.
fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64, bool)> {
    let p = x.ncols();
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if cond <= CONDITION_LIMIT {
        let coeffs = svd
            .solve(y, 0.0)
            .map_err(|e| Error::Numerical(format!("window solve failed: {e}")))?;
        return Ok((coeffs, cond, false));
    }
    let gram = x.tr_mul(x);
    let lambda = RIDGE_SCALE * gram.trace().max(f64::MIN_POSITIVE);
    let regularized = gram + DMatrix::identity(p, p) * lambda;
    let chol = regularized
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge system not positive definite".into()))?;
    let coeffs = chol.solve(&x.tr_mul(y));
    Ok((coeffs, cond, true))
}

fn column_stds(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let mean = col.mean();
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt()
        })
        .collect()
}

/// One window's body-velocity model.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyVelWindow {
    /// Mean-cycle body velocity `C`.
    pub intercept: Vector3<f64>,
    /// Shape sensitivity `B`: 3 x d.
    pub shape_gain: DMatrix<f64>,
    /// Shape-rate sensitivity `A`: 3 x d.
    pub rate_gain: DMatrix<f64>,
    /// Bilinear shape/rate term `G`, one d x d matrix per body coordinate.
    pub mixed_gain: [DMatrix<f64>; 3],
    pub condition: f64,
    pub ridged: bool,
    /// True when the window had no usable perturbation signal and only the
    /// intercept was fitted.
    pub degenerate: bool,
    pub samples: usize,
}

/// One window's actuator model.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorWindow {
    /// Mean shape-velocity perturbation `D` (exactly the window mean).
    pub mean_response: DVector<f64>,
    /// Shape feedback `Er`: d x d.
    pub shape_gain: DMatrix<f64>,
    /// Input sensitivity `Eu`: d x m.
    pub input_gain: DMatrix<f64>,
    /// Window means the regressors were centered on.
    pub shape_mean: DVector<f64>,
    pub input_mean: DVector<f64>,
    pub condition: f64,
    pub ridged: bool,
    pub degenerate: bool,
    pub samples: usize,
}

/// Fits the body-velocity model in every window.
pub fn fit_bodyvel_windows(ds: &RegressionDataset) -> Result<Vec<BodyVelWindow>> {
    let d = ds.shape_dim;
    let p = 1 + 2 * d + d * d;
    let results: Vec<Result<BodyVelWindow>> = (0..ds.windows)
        .into_par_iter()
        .map(|w| {
            let rows = ds.rows_of_window(w);
            let n = rows.len();
            let mut x = DMatrix::zeros(n, p);
            let mut y = DMatrix::zeros(n, 3);
            for (k, &i) in rows.iter().enumerate() {
                x[(k, 0)] = 1.0;
                for j in 0..d {
                    x[(k, 1 + j)] = ds.delta_r[(i, j)];
                    x[(k, 1 + d + j)] = ds.delta_r_dot[(i, j)];
                }
                for a in 0..d {
                    for b in 0..d {
                        x[(k, 1 + 2 * d + a * d + b)] =
                            ds.delta_r[(i, a)] * ds.delta_r_dot[(i, b)];
                    }
                }
                for c in 0..3 {
                    y[(k, c)] = ds.xi[(i, c)];
                }
            }
            let stds = column_stds(&x);
            let degenerate = stds[1..].iter().all(|s| *s < DEGENERATE_COLUMN_STD);
            if degenerate {
                let mut intercept = Vector3::zeros();
                for c in 0..3 {
                    intercept[c] = y.column(c).mean();
                }
                return Ok(BodyVelWindow {
                    intercept,
                    shape_gain: DMatrix::zeros(3, d),
                    rate_gain: DMatrix::zeros(3, d),
                    mixed_gain: [
                        DMatrix::zeros(d, d),
                        DMatrix::zeros(d, d),
                        DMatrix::zeros(d, d),
                    ],
                    condition: 1.0,
                    ridged: false,
                    degenerate: true,
                    samples: n,
                });
            }
            if n < p {
                return Err(Error::UnderDetermined { window: w, samples: n, regressors: p });
            }
            let (coeffs, condition, ridged) = least_squares(&x, &y)?;
            let mut shape_gain = DMatrix::zeros(3, d);
            let mut rate_gain = DMatrix::zeros(3, d);
            let mut mixed_gain =
                [DMatrix::zeros(d, d), DMatrix::zeros(d, d), DMatrix::zeros(d, d)];
            let mut intercept = Vector3::zeros();
            for c in 0..3 {
                intercept[c] = coeffs[(0, c)];
                for j in 0..d {
                    shape_gain[(c, j)] = coeffs[(1 + j, c)];
                    rate_gain[(c, j)] = coeffs[(1 + d + j, c)];
                }
                for a in 0..d {
                    for b in 0..d {
                        mixed_gain[c][(a, b)] = coeffs[(1 + 2 * d + a * d + b, c)];
                    }
                }
            }
            Ok(BodyVelWindow {
                intercept,
                shape_gain,
                rate_gain,
                mixed_gain,
                condition,
                ridged,
                degenerate: false,
                samples: n,
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Fits the actuator model in every window on window-centered regressors.
pub fn fit_actuator_windows(ds: &RegressionDataset) -> Result<Vec<ActuatorWindow>> {
    let d = ds.shape_dim;
    let m = ds.input_dim;
    let p = 1 + d + m;
    let results: Vec<Result<ActuatorWindow>> = (0..ds.windows)
        .into_par_iter()
        .map(|w| {
            let rows = ds.rows_of_window(w);
            let n = rows.len();
            let nf = n as f64;
            let mut shape_mean = DVector::zeros(d);
            let mut input_mean = DVector::zeros(m);
            for &i in &rows {
                for j in 0..d {
                    shape_mean[j] += ds.delta_r[(i, j)] / nf;
                }
                for j in 0..m {
                    input_mean[j] += ds.delta_u[(i, j)] / nf;
                }
            }
            let mut x = DMatrix::zeros(n, p);
            let mut y = DMatrix::zeros(n, d);
            for (k, &i) in rows.iter().enumerate() {
                x[(k, 0)] = 1.0;
                for j in 0..d {
                    x[(k, 1 + j)] = ds.delta_r[(i, j)] - shape_mean[j];
                    y[(k, j)] = ds.delta_r_dot[(i, j)];
                }
                for j in 0..m {
                    x[(k, 1 + d + j)] = ds.delta_u[(i, j)] - input_mean[j];
                }
            }
            // The centered intercept is the exact response mean; compute it
            // directly so it holds to the last bit even under ridge.
            let mut mean_response = DVector::zeros(d);
            for j in 0..d {
                mean_response[j] = y.column(j).mean();
            }
            let stds = column_stds(&x);
            let degenerate = stds[1..].iter().all(|s| *s < DEGENERATE_COLUMN_STD);
            if degenerate {
                return Ok(ActuatorWindow {
                    mean_response,
                    shape_gain: DMatrix::zeros(d, d),
                    input_gain: DMatrix::zeros(d, m),
                    shape_mean,
                    input_mean,
                    condition: 1.0,
                    ridged: false,
                    degenerate: true,
                    samples: n,
                });
            }
            if n < p {
                return Err(Error::UnderDetermined { window: w, samples: n, regressors: p });
            }
            // Center the responses too; the slopes are unchanged and the
            // intercept of the centered system is ~0 by construction.
            let mut yc = y.clone();
            for j in 0..d {
                yc.column_mut(j).add_scalar_mut(-mean_response[j]);
            }
            let (coeffs, condition, ridged) = least_squares(&x, &yc)?;
            let mut shape_gain = DMatrix::zeros(d, d);
            let mut input_gain = DMatrix::zeros(d, m);
            for c in 0..d {
                for j in 0..d {
                    shape_gain[(c, j)] = coeffs[(1 + j, c)];
                }
                for j in 0..m {
                    input_gain[(c, j)] = coeffs[(1 + d + j, c)];
                }
            }
            Ok(ActuatorWindow {
                mean_response,
                shape_gain,
                input_gain,
                shape_mean,
                input_mean,
                condition,
                ridged,
                degenerate: false,
                samples: n,
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Channel count of the packed body-velocity coefficient vector.
fn bodyvel_channels(d: usize) -> usize {
    3 * (1 + 2 * d + d * d)
}

/// Channel count of the packed actuator coefficient vector.
fn actuator_channels(d: usize, m: usize) -> usize {
    d + d * d + d * m + d + m
}

/// Packs one window's body-velocity coefficients. Layout per body
/// coordinate: intercept, shape gains, rate gains, mixed gains row-major.
fn pack_bodyvel(wm: &BodyVelWindow, d: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(bodyvel_channels(d));
    for c in 0..3 {
        v.push(wm.intercept[c]);
        for j in 0..d {
            v.push(wm.shape_gain[(c, j)]);
        }
        for j in 0..d {
            v.push(wm.rate_gain[(c, j)]);
        }
        for a in 0..d {
            for b in 0..d {
                v.push(wm.mixed_gain[c][(a, b)]);
            }
        }
    }
    v
}

/// Packs one window's actuator coefficients. Layout: mean response, shape
/// gains row-major, input gains row-major, shape means, input means.
fn pack_actuator(wm: &ActuatorWindow, d: usize, m: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(actuator_channels(d, m));
    for j in 0..d {
        v.push(wm.mean_response[j]);
    }
    for a in 0..d {
        for b in 0..d {
            v.push(wm.shape_gain[(a, b)]);
        }
    }
    for a in 0..d {
        for b in 0..m {
            v.push(wm.input_gain[(a, b)]);
        }
    }
    for j in 0..d {
        v.push(wm.shape_mean[j]);
    }
    for j in 0..m {
        v.push(wm.input_mean[j]);
    }
    v
}

/// Body-velocity coefficients evaluated at one phase.
#[derive(Debug, Clone)]
pub struct BodyVelCoeffs {
    pub intercept: Vector3<f64>,
    pub shape_gain: DMatrix<f64>,
    pub rate_gain: DMatrix<f64>,
    pub mixed_gain: [DMatrix<f64>; 3],
}

/// Actuator coefficients evaluated at one phase.
#[derive(Debug, Clone)]
pub struct ActuatorCoeffs {
    pub mean_response: DVector<f64>,
    pub shape_gain: DMatrix<f64>,
    pub input_gain: DMatrix<f64>,
    pub shape_mean: DVector<f64>,
    pub input_mean: DVector<f64>,
}

/// Model metadata carried with the fitted coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub shape_dim: usize,
    pub input_dim: usize,
    pub windows: usize,
    pub smooth_order: usize,
    pub limit_cycle_order: usize,
    pub mean_cycle_duration: f64,
}

/// The identified gait model: limit cycle plus smoothed phase-indexed
/// regression coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitModel {
    pub meta: ModelMeta,
    pub limit_cycle: LimitCycle,
    /// Packed body-velocity coefficients as functions of phase.
    pub bodyvel: FourierSeries,
    /// Packed actuator coefficients as functions of phase.
    pub actuator: FourierSeries,
}

/// Smooths window coefficients across phase into continuous coefficient
/// functions of the given Fourier order.
pub fn smooth_windows(
    bodyvel: &[BodyVelWindow],
    actuator: &[ActuatorWindow],
    limit_cycle: LimitCycle,
    smooth_order: usize,
    mean_cycle_duration: f64,
) -> Result<GaitModel> {
    if bodyvel.len() != actuator.len() || bodyvel.is_empty() {
        return Err(Error::InvalidInput(format!(
            "window model lists disagree: {} vs {}",
            bodyvel.len(),
            actuator.len()
        )));
    }
    let windows = bodyvel.len();
    let d = bodyvel[0].shape_gain.ncols();
    let m = actuator[0].input_gain.ncols();
    let centers: Vec<f64> = (0..windows).map(|w| window_center(w, windows)).collect();
    let bv = DMatrix::from_fn(windows, bodyvel_channels(d), |w, c| pack_bodyvel(&bodyvel[w], d)[c]);
    let ac = DMatrix::from_fn(windows, actuator_channels(d, m), |w, c| {
        pack_actuator(&actuator[w], d, m)[c]
    });
    let bodyvel_series = fit_fourier(&centers, &bv, smooth_order)?;
    let actuator_series = fit_fourier(&centers, &ac, smooth_order)?;
    Ok(GaitModel {
        meta: ModelMeta {
            shape_dim: d,
            input_dim: m,
            windows,
            smooth_order,
            limit_cycle_order: limit_cycle.shape.order,
            mean_cycle_duration,
        },
        limit_cycle,
        bodyvel: bodyvel_series,
        actuator: actuator_series,
    })
}

impl GaitModel {
    pub fn shape_dim(&self) -> usize {
        self.meta.shape_dim
    }

    pub fn input_dim(&self) -> usize {
        self.meta.input_dim
    }

    pub fn bodyvel_at(&self, phi: f64) -> BodyVelCoeffs {
        let d = self.meta.shape_dim;
        let v = self.bodyvel.eval(phi);
        let stride = 1 + 2 * d + d * d;
        let mut intercept = Vector3::zeros();
        let mut shape_gain = DMatrix::zeros(3, d);
        let mut rate_gain = DMatrix::zeros(3, d);
        let mut mixed_gain = [DMatrix::zeros(d, d), DMatrix::zeros(d, d), DMatrix::zeros(d, d)];
        for c in 0..3 {
            let base = c * stride;
            intercept[c] = v[base];
            for j in 0..d {
                shape_gain[(c, j)] = v[base + 1 + j];
                rate_gain[(c, j)] = v[base + 1 + d + j];
            }
            for a in 0..d {
                for b in 0..d {
                    mixed_gain[c][(a, b)] = v[base + 1 + 2 * d + a * d + b];
                }
            }
        }
        BodyVelCoeffs { intercept, shape_gain, rate_gain, mixed_gain }
    }

    pub fn actuator_at(&self, phi: f64) -> ActuatorCoeffs {
        let d = self.meta.shape_dim;
        let m = self.meta.input_dim;
        let v = self.actuator.eval(phi);
        let mut mean_response = DVector::zeros(d);
        let mut shape_gain = DMatrix::zeros(d, d);
        let mut input_gain = DMatrix::zeros(d, m);
        let mut shape_mean = DVector::zeros(d);
        let mut input_mean = DVector::zeros(m);
        let mut k = 0;
        for j in 0..d {
            mean_response[j] = v[k];
            k += 1;
        }
        for a in 0..d {
            for b in 0..d {
                shape_gain[(a, b)] = v[k];
                k += 1;
            }
        }
        for a in 0..d {
            for b in 0..m {
                input_gain[(a, b)] = v[k];
                k += 1;
            }
        }
        for j in 0..d {
            shape_mean[j] = v[k];
            k += 1;
        }
        for j in 0..m {
            input_mean[j] = v[k];
            k += 1;
        }
        ActuatorCoeffs { mean_response, shape_gain, input_gain, shape_mean, input_mean }
    }

    /// Predicted body velocity at a phase for given perturbations.
    pub fn predict_xi(
        &self,
        phi: f64,
        delta_r: &DVector<f64>,
        delta_r_dot: &DVector<f64>,
    ) -> Vector3<f64> {
        let c = self.bodyvel_at(phi);
        let mut xi = c.intercept;
        let b = &c.shape_gain * delta_r;
        let a = &c.rate_gain * delta_r_dot;
        for k in 0..3 {
            xi[k] += b[k] + a[k] + (delta_r.transpose() * &c.mixed_gain[k] * delta_r_dot)[0];
        }
        xi
    }

    /// Predicted shape-velocity perturbation at a phase for given shape and
    /// input perturbations.
    pub fn predict_delta_r_dot(
        &self,
        phi: f64,
        delta_r: &DVector<f64>,
        delta_u: &DVector<f64>,
    ) -> DVector<f64> {
        let c = self.actuator_at(phi);
        &c.mean_response
            + &c.shape_gain * (delta_r - &c.shape_mean)
            + &c.input_gain * (delta_u - &c.input_mean)
    }

    /// Copy with every deviation gain zeroed; intercepts, mean responses,
    /// and window means are kept, so predictions reduce to the mean cycle.
    /// This is the honest model when the deviation terms show no held-out
    /// skill: rolling them out would only amplify fitted noise.
    pub fn nominal_only(&self) -> GaitModel {
        let d = self.meta.shape_dim;
        let m = self.meta.input_dim;
        let mut out = self.clone();
        let stride = 1 + 2 * d + d * d;
        for c in 0..3 {
            for ch in c * stride + 1..(c + 1) * stride {
                out.bodyvel.coeffs.column_mut(ch).fill(0.0);
            }
        }
        for ch in d..d + d * d + d * m {
            out.actuator.coeffs.column_mut(ch).fill(0.0);
        }
        out
    }
}
