//! Phase estimation from observed shape oscillations.
//!
//! The raw angle (protophase) comes from projecting shape samples onto
//! their top two principal axes, normalizing each axis to unit variance,
//! and taking the quadrant-aware angle. The protophase advances one turn
//! per cycle but not uniformly in time; a time-in-bin histogram builds the
//! monotone map to a corrected phase that does advance uniformly on
//! average, smoothed as a low-order Fourier correction.
//!
//! All phases here are in radians and unwrapped (winding accumulates).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::signal::{fit_fourier, FourierSeries, Pca};

/// Ratio below which the second principal variance marks a degenerate
/// (effectively one-dimensional) oscillation.
pub const DEGENERATE_VARIANCE_RATIO: f64 = 1e-6;

/// Maps shape samples to a raw oscillation angle.
#[derive(Debug, Clone)]
pub struct ProtophaseMap {
    pca: Pca,
    scale: [f64; 2],
    /// +1 or -1, chosen so the training record winds forward.
    orientation: f64,
}

impl ProtophaseMap {
    /// Fits the projection plane on shape samples in temporal order.
    pub fn fit(r: &DMatrix<f64>) -> Result<ProtophaseMap> {
        let pca = crate::signal::pca_reduce(r, 2)?;
        let v0 = pca.variances[0];
        let v1 = pca.variances[1];
        if !(v0 > 0.0) || v1 < DEGENERATE_VARIANCE_RATIO * v0 {
            return Err(Error::DegenerateOscillation(format!(
                "shape variance is effectively one-dimensional ({v1:.3e} vs {v0:.3e}); \
                 no rotation to track"
            )));
        }
        let mut map = ProtophaseMap {
            pca,
            scale: [1.0 / v0.sqrt(), 1.0 / v1.sqrt()],
            orientation: 1.0,
        };
        // Net winding of the training record fixes the forward direction.
        let proto = map.eval(r);
        if proto[proto.len() - 1] < proto[0] {
            map.orientation = -1.0;
        }
        Ok(map)
    }

    /// Unwrapped protophase of a contiguous record.
    pub fn eval(&self, r: &DMatrix<f64>) -> Vec<f64> {
        let scores = self.pca.project(r);
        let raw: Vec<f64> = (0..scores.nrows())
            .map(|i| {
                let x = scores[(i, 0)] * self.scale[0];
                let y = scores[(i, 1)] * self.scale[1];
                self.orientation * y.atan2(x)
            })
            .collect();
        crate::se2::unwrap_angles(&raw)
    }
}

/// Smooth correction from protophase to a phase that advances uniformly in
/// time on average: `phi = psi + h(psi)` with `h` periodic.
#[derive(Debug, Clone)]
pub struct PhaseCorrection {
    pub series: FourierSeries,
}

impl PhaseCorrection {
    /// Builds the correction from protophase samples (assumed uniformly
    /// sampled in time). The empirical time-in-bin histogram gives the
    /// cumulative fraction of a cycle spent below each bin edge; the
    /// difference from the identity is fitted as a Fourier series.
    pub fn fit(protophase: &[f64], bins: usize, order: usize) -> Result<PhaseCorrection> {
        if bins < 4 || order == 0 {
            return Err(Error::InvalidInput(format!(
                "need at least 4 bins and order 1, got {bins} bins order {order}"
            )));
        }
        if protophase.len() < bins {
            return Err(Error::DegenerateOscillation(format!(
                "{} protophase samples cannot fill {} bins",
                protophase.len(),
                bins
            )));
        }
        let tau = std::f64::consts::TAU;
        let mut counts = vec![0usize; bins];
        for &p in protophase {
            let w = p.rem_euclid(tau);
            let b = ((w / tau * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::DegenerateOscillation(format!(
                "protophase never visits bin {empty} of {bins}; oscillation does not \
                 cover the cycle"
            )));
        }
        let total: usize = counts.iter().sum();
        // Corrected phase at bin edges: fraction of time spent below the
        // edge, scaled to a full turn.
        let mut edges = Vec::with_capacity(bins);
        let mut h = Vec::with_capacity(bins);
        let mut cum = 0usize;
        edges.push(0.0);
        h.push(0.0);
        for b in 0..bins - 1 {
            cum += counts[b];
            let edge = tau * (b + 1) as f64 / bins as f64;
            edges.push(edge);
            h.push(tau * cum as f64 / total as f64 - edge);
        }
        let vals = DMatrix::from_fn(h.len(), 1, |i, _| h[i]);
        let series = fit_fourier(&edges, &vals, order)?;
        let corr = PhaseCorrection { series };
        let margin = corr.monotone_margin();
        if margin <= 0.0 {
            return Err(Error::NonMonotonePhase(format!(
                "corrected phase would reverse (min slope {margin:.3e})"
            )));
        }
        Ok(corr)
    }

    /// Minimum of `d(phi)/d(psi) = 1 + h'(psi)` over a dense grid. Positive
    /// means the correction is a valid reparameterization of the cycle.
    pub fn monotone_margin(&self) -> f64 {
        let d = self.series.derivative();
        let grid = 1024;
        (0..grid)
            .map(|i| 1.0 + d.eval(std::f64::consts::TAU * i as f64 / grid as f64)[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Applies the correction to unwrapped protophase, preserving winding.
    pub fn apply(&self, protophase: &[f64]) -> Vec<f64> {
        protophase.iter().map(|&p| p + self.series.eval(p)[0]).collect()
    }
}

/// Fits the protophase map and correction on one record and returns its
/// corrected phase.
pub fn estimate_phase(
    r: &DMatrix<f64>,
    bins: usize,
    order: usize,
) -> Result<(Vec<f64>, ProtophaseMap, PhaseCorrection)> {
    let map = ProtophaseMap::fit(r)?;
    let proto = map.eval(r);
    let corr = PhaseCorrection::fit(&proto, bins, order)?;
    let phi = corr.apply(&proto);
    Ok((phi, map, corr))
}

/// The periodic attractor of the driven oscillation: mean shape and input
/// as functions of phase, plus the average phase rate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LimitCycle {
    pub shape: FourierSeries,
    pub input: FourierSeries,
    /// Average d(phi)/dt over the fitted data.
    pub mean_rate: f64,
}

impl LimitCycle {
    pub fn shape_at(&self, phi: f64) -> nalgebra::DVector<f64> {
        self.shape.eval(phi)
    }

    pub fn input_at(&self, phi: f64) -> nalgebra::DVector<f64> {
        self.input.eval(phi)
    }

    /// Reference shape velocity: the phase derivative of the mean shape
    /// scaled by the average phase rate.
    pub fn shape_rate_at(&self, phi: f64) -> nalgebra::DVector<f64> {
        self.shape.derivative().eval(phi) * self.mean_rate
    }
}

/// Fits the limit cycle from pooled phase-indexed samples.
pub fn extract_limit_cycle(
    phi: &[f64],
    r: &DMatrix<f64>,
    u: &DMatrix<f64>,
    order: usize,
    mean_rate: f64,
) -> Result<LimitCycle> {
    if !(mean_rate > 0.0) {
        return Err(Error::DegenerateOscillation(format!(
            "mean phase rate must be positive, got {mean_rate}"
        )));
    }
    let shape = fit_fourier(phi, r, order)?;
    let input = fit_fourier(phi, u, order)?;
    Ok(LimitCycle { shape, input, mean_rate })
}

/// Circular mean of the pointwise difference `a - b`, in (-pi, pi].
pub fn circular_mean_offset(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput(format!(
            "offset needs equal nonempty series, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (mut s, mut c) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d.sin();
        c += d.cos();
    }
    if s.hypot(c) < 1e-12 * a.len() as f64 {
        return Err(Error::DegenerateOscillation(
            "phase difference has no preferred direction".into(),
        ));
    }
    Ok(s.atan2(c))
}

/// Mean resultant length of the difference of two phase series: 1 for
/// perfectly locked phases, near 0 for unrelated ones.
pub fn phase_agreement(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() || a.is_empty() {
        return 0.0;
    }
    let (mut s, mut c) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d.sin();
        c += d.cos();
    }
    s.hypot(c) / a.len() as f64
}

/// Coefficient of variation of the instantaneous phase rate: standard
/// deviation over mean of `d(phi)/dt`. Zero for a perfectly uniform clock.
pub fn phase_rate_cov(phi: &[f64], dt: f64) -> Result<f64> {
    let rates = crate::signal::finite_diff(phi, dt)?;
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    if mean.abs() < 1e-12 {
        return Err(Error::DegenerateOscillation("phase does not advance".into()));
    }
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean.abs())
}
