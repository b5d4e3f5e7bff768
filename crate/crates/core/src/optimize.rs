//! Gait optimization on the fitted model.
//!
//! The objective is per-cycle forward progress minus a time penalty,
//! F = Δg_x − λ·t_cycle, evaluated by rolling the model over one synthetic
//! cycle. Search runs in box-normalized coordinates with finite-difference
//! gradients and a secant curvature estimate, projected onto the box. The
//! outer loop alternates sampling, fitting, optimizing, plant verification,
//! and box shrinking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{
    cross_validate, fit_runs, generate_dataset, process_run, split_seed, CvReport, FitReport,
    PipelineConfig, RunData,
};
use crate::gait_model::GaitModel;
use crate::plant::{simulate_schedule, PlantModel, Trajectory};
use crate::predict::predict;
use crate::se2::{Integrator, Pose};
use crate::waveform::{recommended_dt, CycleParams, CycleSchedule, ParamBox, ShrinkMode};

/// One objective evaluation, keeping the parts so the identity
/// `value = displacement - lambda * duration` stays checkable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSample {
    /// Forward progress over one cycle, in the frame at cycle start.
    pub displacement: f64,
    /// Cycle duration.
    pub duration: f64,
    pub lambda: f64,
    pub value: f64,
}

/// Rolls the model over one steady cycle of `params` and scores it.
pub fn objective_eval(
    model: &GaitModel,
    params: &CycleParams,
    lambda: f64,
    steps_per_cycle: usize,
) -> Result<ObjectiveSample> {
    if lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "time penalty must be nonnegative, got {lambda}"
        )));
    }
    let schedule = CycleSchedule::uniform(params, 0, 1, steps_per_cycle)?;
    let traj = predict(model, &schedule, Pose::identity(), Integrator::Euler)?;
    let end = traj.len() - 1;
    let displacement = traj.displacement(0, end).x;
    let duration = params.duration();
    let value = displacement - lambda * duration;
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "objective diverged at params {:?}",
            params.to_vec()
        )));
    }
    Ok(ObjectiveSample { displacement, duration, lambda, value })
}

/// Simulates the plant on `params` and scores the last measured cycle,
/// discarding warmup transients.
pub fn verify_on_plant(
    plant: &PlantModel,
    params: &CycleParams,
    lambda: f64,
    steps_per_cycle: usize,
    warmup_cycles: usize,
) -> Result<ObjectiveSample> {
    let schedule = CycleSchedule::uniform(params, warmup_cycles, 1, steps_per_cycle)?;
    let traj = simulate_schedule(plant, &schedule)?;
    let k = schedule.measured_cycles().next().expect("one measured cycle");
    let (a, b) = schedule.cycle_samples(k);
    let displacement = traj.displacement(a, b).x;
    let duration = params.duration();
    Ok(ObjectiveSample {
        displacement,
        duration,
        lambda,
        value: displacement - lambda * duration,
    })
}

/// Central-difference gradient, one-sided within `h` of a bound. `x` and
/// `h` are in normalized [0, 1] coordinates and `f` is evaluated there.
pub fn fd_gradient(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {h}")));
    }
    let mut g = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let (hi_ok, lo_ok) = (x[i] + h <= 1.0, x[i] - h >= 0.0);
        let v = match (lo_ok, hi_ok) {
            (true, true) => {
                probe[i] = x[i] + h;
                let fp = f(&probe)?;
                probe[i] = x[i] - h;
                let fm = f(&probe)?;
                (fp - fm) / (2.0 * h)
            }
            (false, true) => {
                probe[i] = x[i] + h;
                let fp = f(&probe)?;
                probe[i] = x[i];
                let f0 = f(&probe)?;
                (fp - f0) / h
            }
            (true, false) => {
                probe[i] = x[i];
                let f0 = f(&probe)?;
                probe[i] = x[i] - h;
                let fm = f(&probe)?;
                (f0 - fm) / h
            }
            (false, false) => {
                return Err(Error::InvalidConfig(format!(
                    "step {h} exceeds the box width on coordinate {i}"
                )));
            }
        };
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "gradient coordinate {i} is not finite"
            )));
        }
        probe[i] = x[i];
        g.push(v);
    }
    Ok(g)
}

/// Search diagnostics from one `optimize_box` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub iterations: usize,
    pub evaluations: usize,
    /// True when the step tolerance was reached before the iteration cap.
    pub converged: bool,
    pub objective_path: Vec<f64>,
}

const MAX_ASCENT_ITERS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-6;
const BACKTRACK_LIMIT: usize = 30;

fn clamp01(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Maximizes `f` over the box by projected ascent in normalized
/// coordinates: finite-difference gradients, a secant (Barzilai-Borwein)
/// curvature estimate, and a backtracking line search that only accepts
/// improving feasible points. Starts at `x0` (physical units) and returns
/// the best point found in physical units with its objective.
pub fn optimize_box(
    f: &mut dyn FnMut(&CycleParams) -> Result<f64>,
    bounds: &ParamBox,
    x0: &CycleParams,
    fd_step: f64,
) -> Result<(CycleParams, f64, SearchTrace)> {
    bounds.validate()?;
    let x0_vec = x0.to_vec();
    if !bounds.contains(&x0_vec, 1e-9) {
        return Err(Error::InvalidInput(format!(
            "start point {x0_vec:?} outside the box"
        )));
    }
    let dim = bounds.dim();
    let width: Vec<f64> = (0..dim).map(|i| bounds.hi[i] - bounds.lo[i]).collect();
    let to_norm = |p: &[f64]| -> Vec<f64> {
        (0..dim)
            .map(|i| {
                if width[i] > 0.0 {
                    ((p[i] - bounds.lo[i]) / width[i]).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let to_phys = |z: &[f64]| -> Vec<f64> {
        (0..dim).map(|i| bounds.lo[i] + z[i] * width[i]).collect()
    };
    let mut evaluations = 0usize;
    let family = bounds.family;
    let mut eval_norm = |z: &[f64]| -> Result<f64> {
        let params = CycleParams::from_vec(family, &to_phys(z))?;
        evaluations += 1;
        f(&params)
    };

    let mut x = to_norm(&x0_vec);
    let mut fx = eval_norm(&x)?;
    let mut path = vec![fx];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..MAX_ASCENT_ITERS {
        iterations += 1;
        let g = fd_gradient(&mut eval_norm, &x, fd_step)?;
        // Secant curvature from the previous (step, gradient change) pair;
        // unit step on the first iteration.
        let mut alpha = match &prev {
            Some((dx, dg)) => {
                let ss: f64 = dx.iter().map(|v| v * v).sum();
                let sy: f64 = dx.iter().zip(dg).map(|(a, b)| a * b).sum();
                // Ascent: curvature is negative where the secant is
                // informative; fall back to unit step otherwise.
                if sy < 0.0 {
                    (ss / -sy).clamp(1e-6, 1e3)
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        // Backtracking on the projected step; accept first improvement.
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        let mut step_len = 0.0;
        for _ in 0..BACKTRACK_LIMIT {
            let mut cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + alpha * b).collect();
            clamp01(&mut cand);
            step_len = cand
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if step_len < STEP_TOLERANCE {
                break;
            }
            let fc = eval_norm(&cand)?;
            if fc > fx {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                let dx: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
                let g_new = fd_gradient(&mut eval_norm, &cand, fd_step)?;
                let dg: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                prev = Some((dx, dg));
                x = cand;
                fx = fc;
                path.push(fx);
                if step_len < STEP_TOLERANCE {
                    converged = true;
                    break;
                }
            }
            None => {
                converged = step_len < STEP_TOLERANCE || true;
                break;
            }
        }
    }
    let best = CycleParams::from_vec(family, &to_phys(&x))?;
    Ok((
        best,
        fx,
        SearchTrace {
            iterations,
            evaluations,
            converged,
            objective_path: path,
        },
    ))
}

/// How the time penalty is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// 0.1 x (mean per-cycle |displacement| / mean cycle duration) from the
    /// first iteration's samples.
    Auto,
    /// Use `lambda` as given.
    Fixed,
}

/// Outer-loop configuration. Defaults are recorded in every manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lambda_mode: LambdaMode,
    /// Time penalty when `lambda_mode` is `fixed`.
    pub lambda: f64,
    pub iterations: usize,
    /// Cycles sampled per iteration.
    pub samples: usize,
    pub cycles_per_run: usize,
    pub warmup_cycles: usize,
    pub steps_per_cycle: usize,
    pub shrink_factor: f64,
    pub shrink_mode: ShrinkMode,
    /// Finite-difference step in normalized coordinates.
    pub fd_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lambda_mode: LambdaMode::Auto,
            lambda: 0.0,
            iterations: 3,
            samples: 100,
            cycles_per_run: 10,
            warmup_cycles: 2,
            steps_per_cycle: 300,
            shrink_factor: 0.65,
            shrink_mode: ShrinkMode::ReduceBy,
            fd_step: 1e-3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_mode == LambdaMode::Fixed && self.lambda < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.samples == 0 || self.cycles_per_run == 0 {
            return Err(Error::InvalidConfig(
                "samples and cycles_per_run must be at least 1".into(),
            ));
        }
        if self.samples % self.cycles_per_run != 0 {
            return Err(Error::InvalidConfig(format!(
                "samples ({}) must divide evenly into runs of cycles_per_run ({})",
                self.samples, self.cycles_per_run
            )));
        }
        if self.steps_per_cycle < 32 {
            return Err(Error::InvalidConfig(format!(
                "steps_per_cycle must be at least 32, got {}",
                self.steps_per_cycle
            )));
        }
        if !(0.0..1.0).contains(&self.shrink_factor) {
            return Err(Error::InvalidConfig(format!(
                "shrink_factor must lie in [0, 1), got {}",
                self.shrink_factor
            )));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "fd_step must lie in (0, 0.5), got {}",
                self.fd_step
            )));
        }
        Ok(())
    }
}

/// One refinement iteration's record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub bounds: ParamBox,
    pub seed: u64,
    pub dt: f64,
    pub fit: FitReport,
    pub cv: CvReport,
    pub start: Vec<f64>,
    /// True when cross-validated skill was non-positive and the search ran
    /// on the mean-cycle model instead of the full deviation model.
    pub mean_cycle_fallback: bool,
    pub optimum: Vec<f64>,
    pub predicted: ObjectiveSample,
    pub verified: ObjectiveSample,
    /// Plant-verified incumbent after this iteration: the new optimum if
    /// it verified at least as well as the previous incumbent, otherwise
    /// the previous incumbent. The next box shrinks about this point.
    pub selected: Vec<f64>,
    pub selected_verified: ObjectiveSample,
    pub search: SearchTrace,
}

/// Full outer-loop history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationHistory {
    pub lambda: f64,
    pub lambda_mode: LambdaMode,
    pub iterations: Vec<IterationRecord>,
}

impl OptimizationHistory {
    /// The answer the loop returns: the final plant-verified incumbent.
    pub fn best(&self) -> Option<(&[f64], &ObjectiveSample)> {
        self.iterations
            .last()
            .map(|r| (r.selected.as_slice(), &r.selected_verified))
    }
}

/// Mean |per-cycle forward progress| and mean duration over a dataset's
/// measured cycles; used to auto-scale the time penalty.
fn displacement_scale(data: &[(CycleSchedule, Trajectory)]) -> (f64, f64) {
    let mut disp = 0.0;
    let mut dur = 0.0;
    let mut count = 0usize;
    for (schedule, traj) in data {
        for k in schedule.measured_cycles() {
            let (a, b) = schedule.cycle_samples(k);
            disp += traj.displacement(a, b).x.abs();
            dur += (b - a) as f64 * schedule.dt;
            count += 1;
        }
    }
    (disp / count as f64, dur / count as f64)
}

/// Alternates sampling, fitting, model-based optimization, and plant
/// verification, shrinking the box about the plant-verified incumbent.
///
/// The shrink center and the next search start are the best point by
/// verified (plant-simulated) objective so far, not the model's own
/// optimum: a model that over-predicts in an extrapolated corner cannot
/// drag the box away from a better point already confirmed on the plant,
/// so the per-iteration `selected_verified` sequence never decreases.
///
/// Each iteration's model must earn its deviation terms: when held-out
/// skill is non-positive the search runs on the mean-cycle reduction
/// (see [`GaitModel::nominal_only`]) and the record flags the fallback.
pub fn iterate_refine(
    plant: &PlantModel,
    full_box: &ParamBox,
    opt: &OptimizerConfig,
    pipe: &PipelineConfig,
    seed: u64,
) -> Result<OptimizationHistory> {
    opt.validate()?;
    pipe.validate()?;
    full_box.validate()?;
    let runs_per_iter = opt.samples / opt.cycles_per_run;
    let mut bounds = full_box.clone();
    let mut lambda = match opt.lambda_mode {
        LambdaMode::Fixed => opt.lambda,
        LambdaMode::Auto => f64::NAN,
    };
    let mut start = CycleParams::from_vec(bounds.family, &bounds.center())?;
    let mut best: Option<(CycleParams, ObjectiveSample)> = None;
    let mut history = Vec::with_capacity(opt.iterations);
    for i in 0..opt.iterations {
        let iter_seed = split_seed(seed, &format!("iteration-{i}"));
        let dt = recommended_dt(&bounds, opt.steps_per_cycle);
        let data = generate_dataset(
            plant,
            &bounds,
            runs_per_iter,
            opt.cycles_per_run,
            opt.warmup_cycles,
            dt,
            split_seed(iter_seed, "samples"),
        )
        .map_err(|e| iteration_context(i, e))?;
        if lambda.is_nan() {
            let (disp, dur) = displacement_scale(&data);
            lambda = 0.1 * disp / dur;
        }
        let runs: Vec<RunData> = data
            .iter()
            .map(|(s, t)| process_run(t, s, pipe))
            .collect::<Result<_>>()
            .map_err(|e| iteration_context(i, e))?;
        let train: Vec<Vec<usize>> = runs.iter().map(|r| r.measured()).collect();
        let (model, fit) =
            fit_runs(&runs, &train, pipe).map_err(|e| iteration_context(i, e))?;
        let cv = cross_validate(&runs, pipe, split_seed(iter_seed, "folds"))
            .map_err(|e| iteration_context(i, e))?;
        // Non-positive held-out skill means the deviation terms lose to the
        // mean cycle on unseen data (typical once the box has shrunk below
        // the noise floor); optimize the mean-cycle model instead of
        // chasing their noise. NaN skill fails the gate too.
        let skilled = cv.mean_gamma_xi > 0.0 && cv.mean_gamma_shape_rate > 0.0;
        let search_model = if skilled { model } else { model.nominal_only() };
        let (optimum, _, search) = optimize_box(
            &mut |p| Ok(objective_eval(&search_model, p, lambda, opt.steps_per_cycle)?.value),
            &bounds,
            &start,
            opt.fd_step,
        )
        .map_err(|e| iteration_context(i, e))?;
        let predicted = objective_eval(&search_model, &optimum, lambda, opt.steps_per_cycle)
            .map_err(|e| iteration_context(i, e))?;
        let verified = verify_on_plant(
            plant,
            &optimum,
            lambda,
            opt.steps_per_cycle,
            opt.warmup_cycles,
        )
        .map_err(|e| iteration_context(i, e))?;
        if best.is_none_or(|(_, b)| verified.value >= b.value) {
            best = Some((optimum, verified));
        }
        let (selected, selected_verified) = best.expect("set above");
        history.push(IterationRecord {
            iteration: i,
            bounds: bounds.clone(),
            seed: iter_seed,
            dt,
            fit,
            cv,
            start: start.to_vec(),
            mean_cycle_fallback: !skilled,
            optimum: optimum.to_vec(),
            predicted,
            verified,
            selected: selected.to_vec(),
            selected_verified,
            search,
        });
        bounds = bounds.shrink(&selected.to_vec(), opt.shrink_factor, opt.shrink_mode)?;
        start = selected;
    }
    Ok(OptimizationHistory {
        lambda,
        lambda_mode: opt.lambda_mode,
        iterations: history,
    })
}

fn iteration_context(i: usize, e: Error) -> Error {
    match e {
        Error::DegenerateOscillation(msg) => {
            Error::DegenerateOscillation(format!("refinement iteration {i}: {msg}"))
        }
        other => other,
    }
}

/// Objective landscape samples over a grid of one coordinate, with the
/// rest fixed; plotting support.
pub fn objective_slice(
    model: &GaitModel,
    bounds: &ParamBox,
    at: &[f64],
    coord: usize,
    points: usize,
    lambda: f64,
    steps_per_cycle: usize,
) -> Result<Vec<(f64, f64)>> {
    if coord >= bounds.dim() {
        return Err(Error::InvalidInput(format!(
            "coordinate {coord} out of range for a {}-dimensional box",
            bounds.dim()
        )));
    }
    if points < 2 {
        return Err(Error::InvalidInput("need at least 2 grid points".into()));
    }
    let mut out = Vec::with_capacity(points);
    let mut p = at.to_vec();
    for k in 0..points {
        let v = bounds.lo[coord]
            + (bounds.hi[coord] - bounds.lo[coord]) * k as f64 / (points - 1) as f64;
        p[coord] = v;
        let params = CycleParams::from_vec(bounds.family, &p)?;
        let s = objective_eval(model, &params, lambda, steps_per_cycle)?;
        out.push((v, s.value));
    }
    Ok(out)
}
