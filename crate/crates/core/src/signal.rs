//! Signal utilities: zero-phase low-pass filtering, finite differences,
//! Fourier series on the circle, and principal component projections.
//!
//! The filter chain (design, direct-form-II-transposed runner, steady-state
//! initial conditions, odd edge extension, forward-backward pass) follows
//! the conventional digital-filtering formulation so results match standard
//! reference implementations to rounding error.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Digital filter as transfer-function coefficients, `a[0] == 1`.
#[derive(Debug, Clone)]
pub struct IirFilter {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

fn poly_from_roots(roots: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut c = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c
}

/// Designs a low-pass Butterworth filter of the given order with cutoff as
/// a fraction of the Nyquist rate, via the bilinear transform.
pub fn butterworth_lowpass(order: usize, cutoff_ratio: f64) -> Result<IirFilter> {
    if order == 0 {
        return Err(Error::InvalidInput("filter order must be at least 1".into()));
    }
    if !(cutoff_ratio > 0.0 && cutoff_ratio < 1.0) {
        return Err(Error::InvalidInput(format!(
            "cutoff must lie in (0, 1) as a fraction of Nyquist, got {cutoff_ratio}"
        )));
    }
    let n = order as i32;
    // Analog prototype poles on the unit circle, left half plane.
    let proto: Vec<Complex<f64>> = (0..order)
        .map(|k| {
            let angle = std::f64::consts::PI * (2 * k as i32 + n + 1) as f64 / (2.0 * n as f64);
            Complex::new(angle.cos(), angle.sin())
        })
        .collect();
    // Frequency warp (sampling rate 2) and low-pass scaling.
    let fs = 2.0;
    let warped = 2.0 * fs * (std::f64::consts::PI * cutoff_ratio / fs).tan();
    let poles_s: Vec<Complex<f64>> = proto.iter().map(|p| p * warped).collect();
    let gain_s = warped.powi(n);
    // Bilinear transform: s -> 2 fs (z - 1)/(z + 1).
    let two_fs = Complex::new(2.0 * fs, 0.0);
    let poles_z: Vec<Complex<f64>> = poles_s.iter().map(|p| (two_fs + p) / (two_fs - p)).collect();
    let denom_prod: Complex<f64> = poles_s
        .iter()
        .fold(Complex::new(1.0, 0.0), |acc, p| acc * (two_fs - p));
    let gain_z = gain_s * (Complex::new(1.0, 0.0) / denom_prod).re;
    // All analog zeros at infinity map to z = -1.
    let zeros_z = vec![Complex::new(-1.0, 0.0); order];
    let b: Vec<f64> = poly_from_roots(&zeros_z).iter().map(|c| c.re * gain_z).collect();
    let a: Vec<f64> = poly_from_roots(&poles_z).iter().map(|c| c.re).collect();
    Ok(IirFilter { b, a })
}

/// Runs the filter in direct form II transposed with initial state `zi`,
/// returning the output and the final state.
pub fn lfilter(f: &IirFilter, x: &[f64], zi: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let n_ord = f.b.len().max(f.a.len());
    let mut b = f.b.clone();
    let mut a = f.a.clone();
    b.resize(n_ord, 0.0);
    a.resize(n_ord, 0.0);
    let nz = n_ord - 1;
    let mut z = match zi {
        Some(s) => s.to_vec(),
        None => vec![0.0; nz],
    };
    assert_eq!(z.len(), nz, "initial state length mismatch");
    let mut y = Vec::with_capacity(x.len());
    for &xn in x {
        let yn = b[0] * xn + if nz > 0 { z[0] } else { 0.0 };
        for i in 0..nz.saturating_sub(1) {
            z[i] = b[i + 1] * xn + z[i + 1] - a[i + 1] * yn;
        }
        if nz > 0 {
            z[nz - 1] = b[nz] * xn - a[nz] * yn;
        }
        y.push(yn);
    }
    (y, z)
}

/// Steady-state initial filter state for a unit-amplitude step, solved from
/// the companion form of the denominator.
pub fn lfilter_zi(f: &IirFilter) -> Result<Vec<f64>> {
    let n_ord = f.b.len().max(f.a.len());
    let mut b = f.b.clone();
    let mut a = f.a.clone();
    b.resize(n_ord, 0.0);
    a.resize(n_ord, 0.0);
    let m = n_ord - 1;
    if m == 0 {
        return Ok(vec![]);
    }
    let mut imat = DMatrix::<f64>::identity(m, m);
    for j in 0..m {
        imat[(j, 0)] += a[j + 1];
    }
    for i in 0..m.saturating_sub(1) {
        imat[(i, i + 1)] -= 1.0;
    }
    let rhs = DVector::from_fn(m, |j, _| b[j + 1] - a[j + 1] * b[0]);
    let lu = imat.lu();
    lu.solve(&rhs)
        .map(|v| v.as_slice().to_vec())
        .ok_or_else(|| Error::Numerical("singular system for filter initial state".into()))
}

fn odd_extend(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        out.push(2.0 * x[0] - x[i]);
    }
    out.extend_from_slice(x);
    for i in 1..=pad {
        out.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    out
}

/// Zero-phase filtering: forward and backward passes over an odd-symmetric
/// edge extension, with steady-state initial conditions scaled to the first
/// sample of each pass.
pub fn filtfilt(f: &IirFilter, x: &[f64]) -> Result<Vec<f64>> {
    let n_ord = f.b.len().max(f.a.len());
    let pad = 3 * n_ord;
    if x.len() <= pad {
        return Err(Error::InvalidInput(format!(
            "signal of length {} is too short for edge padding {}",
            x.len(),
            pad
        )));
    }
    let zi = lfilter_zi(f)?;
    let ext = odd_extend(x, pad);
    let zi0: Vec<f64> = zi.iter().map(|z| z * ext[0]).collect();
    let (fwd, _) = lfilter(f, &ext, Some(&zi0));
    let mut rev: Vec<f64> = fwd.into_iter().rev().collect();
    let zi1: Vec<f64> = zi.iter().map(|z| z * rev[0]).collect();
    let (bwd, _) = lfilter(f, &rev, Some(&zi1));
    rev = bwd.into_iter().rev().collect();
    Ok(rev[pad..pad + x.len()].to_vec())
}

/// Convenience wrapper: Butterworth design plus [`filtfilt`].
pub fn zero_phase_lowpass(x: &[f64], cutoff_ratio: f64, order: usize) -> Result<Vec<f64>> {
    let f = butterworth_lowpass(order, cutoff_ratio)?;
    filtfilt(&f, x)
}

/// Central finite differences, one-sided at the ends.
pub fn finite_diff(x: &[f64], dt: f64) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples to differentiate, got {}",
            x.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let n = x.len();
    let mut d = Vec::with_capacity(n);
    d.push((x[1] - x[0]) / dt);
    for i in 1..n - 1 {
        d.push((x[i + 1] - x[i - 1]) / (2.0 * dt));
    }
    d.push((x[n - 1] - x[n - 2]) / dt);
    Ok(d)
}

/// Truncated real Fourier series on the circle, one set of coefficients per
/// output channel. Coefficient rows are ordered `1, cos, sin, cos 2, ...`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FourierSeries {
    pub order: usize,
    /// (1 + 2*order) x channels.
    pub coeffs: DMatrix<f64>,
}

pub fn fourier_design_row(phi: f64, order: usize) -> DVector<f64> {
    let mut row = DVector::zeros(1 + 2 * order);
    row[0] = 1.0;
    for k in 1..=order {
        let (s, c) = (k as f64 * phi).sin_cos();
        row[2 * k - 1] = c;
        row[2 * k] = s;
    }
    row
}

fn max_circular_gap(phi: &[f64]) -> f64 {
    let mut w: Vec<f64> = phi.iter().map(|p| p.rem_euclid(std::f64::consts::TAU)).collect();
    w.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut gap = w[0] + std::f64::consts::TAU - w[w.len() - 1];
    for i in 1..w.len() {
        gap = gap.max(w[i] - w[i - 1]);
    }
    gap
}

/// Least-squares fit of a Fourier series to multi-channel samples indexed by
/// phase. Requires the phases to cover the circle densely enough for the
/// requested order.
pub fn fit_fourier(phi: &[f64], values: &DMatrix<f64>, order: usize) -> Result<FourierSeries> {
    let n = phi.len();
    let p = 1 + 2 * order;
    if values.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "{} phases but {} sample rows",
            n,
            values.nrows()
        )));
    }
    if n < p {
        return Err(Error::UnderDetermined { window: 0, samples: n, regressors: p });
    }
    let gap = max_circular_gap(phi);
    let limit = 2.0 * std::f64::consts::TAU / (2 * order + 1) as f64;
    if gap > limit {
        return Err(Error::DegenerateOscillation(format!(
            "phase samples leave a gap of {gap:.3} rad; order {order} needs < {limit:.3}"
        )));
    }
    let mut design = DMatrix::zeros(n, p);
    for (i, &ph) in phi.iter().enumerate() {
        design.row_mut(i).tr_copy_from(&fourier_design_row(ph, order));
    }
    let svd = design.svd(true, true);
    let coeffs = svd
        .solve(values, 1e-12)
        .map_err(|e| Error::Numerical(format!("fourier fit failed: {e}")))?;
    Ok(FourierSeries { order, coeffs })
}

impl FourierSeries {
    pub fn channels(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn eval(&self, phi: f64) -> DVector<f64> {
        let row = fourier_design_row(phi, self.order);
        self.coeffs.tr_mul(&row)
    }

    pub fn eval_channel(&self, phi: f64, channel: usize) -> f64 {
        let row = fourier_design_row(phi, self.order);
        row.dot(&self.coeffs.column(channel).into_owned())
    }

    /// Term-by-term derivative with respect to phase.
    pub fn derivative(&self) -> FourierSeries {
        let mut coeffs = DMatrix::zeros(self.coeffs.nrows(), self.coeffs.ncols());
        for k in 1..=self.order {
            let kf = k as f64;
            for ch in 0..self.coeffs.ncols() {
                coeffs[(2 * k - 1, ch)] = kf * self.coeffs[(2 * k, ch)];
                coeffs[(2 * k, ch)] = -kf * self.coeffs[(2 * k - 1, ch)];
            }
        }
        FourierSeries { order: self.order, coeffs }
    }

    /// Mean over the circle (the constant row).
    pub fn mean(&self) -> DVector<f64> {
        self.coeffs.row(0).transpose()
    }
}

/// Principal components of row-sample data.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// d x k, orthonormal columns, fixed sign convention.
    pub components: DMatrix<f64>,
    /// All d sample variances along principal axes, descending.
    pub variances: DVector<f64>,
}

/// PCA via SVD of the centered data matrix (rows are samples). Component
/// signs are fixed so each axis has a positive entry of largest magnitude,
/// making results independent of sample order.
pub fn pca_reduce(x: &DMatrix<f64>, k: usize) -> Result<Pca> {
    let n = x.nrows();
    let d = x.ncols();
    if n < 2 {
        return Err(Error::InvalidInput(format!("PCA needs at least 2 samples, got {n}")));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidInput(format!("cannot keep {k} of {d} components")));
    }
    let mean = DVector::from_fn(d, |j, _| x.column(j).mean());
    let mut centered = x.clone();
    for j in 0..d {
        centered.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Numerical("SVD failed to produce singular vectors".into()))?;
    let r = svd.singular_values.len().min(d);
    let mut variances = DVector::zeros(d);
    for i in 0..r {
        variances[i] = svd.singular_values[i].powi(2) / (n as f64 - 1.0);
    }
    let mut components = DMatrix::zeros(d, k);
    for j in 0..k {
        let mut col: DVector<f64> = v_t.row(j).transpose();
        let mut imax = 0;
        for i in 0..d {
            if col[i].abs() > col[imax].abs() {
                imax = i;
            }
        }
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        components.set_column(j, &col);
    }
    Ok(Pca { mean, components, variances })
}

impl Pca {
    /// Projects row-sample data onto the kept components.
    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = x.clone();
        for j in 0..x.ncols() {
            centered.column_mut(j).add_scalar_mut(-self.mean[j]);
        }
        centered * &self.components
    }
}
