//! Input cycle synthesis and cycle-parameter boxes.
//!
//! An input cycle is a trapezoidal excursion between two levels. The
//! symmetric family uses one period and one ramp fraction; the asymmetric
//! family gives the falling and rising halves independent durations and
//! ramp fractions. Multi-cycle schedules chain cycles so the commanded
//! input is continuous across boundaries even when parameters change.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum samples per ramp segment for the commanded slope to be resolved.
pub const MIN_RAMP_SAMPLES: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformFamily {
    /// Four parameters: low, high, period, ramp fraction. Rises first.
    Symmetric,
    /// Six parameters: low, high, fall and rise durations, fall and rise
    /// ramp fractions. Falls first (starts from the high level).
    Asymmetric,
}

impl WaveformFamily {
    pub fn dim(&self) -> usize {
        match self {
            WaveformFamily::Symmetric => 4,
            WaveformFamily::Asymmetric => 6,
        }
    }

    pub fn names(&self) -> &'static [&'static str] {
        match self {
            WaveformFamily::Symmetric => &["low", "high", "period", "ramp_frac"],
            WaveformFamily::Asymmetric => {
                &["low", "high", "fall_time", "rise_time", "fall_frac", "rise_frac"]
            }
        }
    }
}

/// One input cycle's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CycleParams {
    Symmetric { low: f64, high: f64, period: f64, ramp_frac: f64 },
    Asymmetric {
        low: f64,
        high: f64,
        fall_time: f64,
        rise_time: f64,
        fall_frac: f64,
        rise_frac: f64,
    },
}

impl CycleParams {
    pub fn family(&self) -> WaveformFamily {
        match self {
            CycleParams::Symmetric { .. } => WaveformFamily::Symmetric,
            CycleParams::Asymmetric { .. } => WaveformFamily::Asymmetric,
        }
    }

    pub fn duration(&self) -> f64 {
        match *self {
            CycleParams::Symmetric { period, .. } => period,
            CycleParams::Asymmetric { fall_time, rise_time, .. } => fall_time + rise_time,
        }
    }

    pub fn low(&self) -> f64 {
        match *self {
            CycleParams::Symmetric { low, .. } | CycleParams::Asymmetric { low, .. } => low,
        }
    }

    pub fn high(&self) -> f64 {
        match *self {
            CycleParams::Symmetric { high, .. } | CycleParams::Asymmetric { high, .. } => high,
        }
    }

    /// Level the cycle settles to at its end (the next cycle's natural
    /// starting level).
    pub fn end_level(&self) -> f64 {
        match *self {
            CycleParams::Symmetric { low, .. } => low,
            CycleParams::Asymmetric { high, .. } => high,
        }
    }

    /// Level the first cycle of a schedule starts from.
    pub fn start_level(&self) -> f64 {
        self.end_level()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            CycleParams::Symmetric { low, high, period, ramp_frac } => {
                vec![low, high, period, ramp_frac]
            }
            CycleParams::Asymmetric { low, high, fall_time, rise_time, fall_frac, rise_frac } => {
                vec![low, high, fall_time, rise_time, fall_frac, rise_frac]
            }
        }
    }

    pub fn from_vec(family: WaveformFamily, v: &[f64]) -> Result<CycleParams> {
        if v.len() != family.dim() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameters, got {}",
                family.dim(),
                v.len()
            )));
        }
        let p = match family {
            WaveformFamily::Symmetric => CycleParams::Symmetric {
                low: v[0],
                high: v[1],
                period: v[2],
                ramp_frac: v[3],
            },
            WaveformFamily::Asymmetric => CycleParams::Asymmetric {
                low: v[0],
                high: v[1],
                fall_time: v[2],
                rise_time: v[3],
                fall_frac: v[4],
                rise_frac: v[5],
            },
        };
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let check_frac = |name: &str, f: f64| -> Result<()> {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in (0, 1], got {f}"
                )));
            }
            Ok(())
        };
        if !(self.low() < self.high()) {
            return Err(Error::InvalidInput(format!(
                "low level {} must be below high level {}",
                self.low(),
                self.high()
            )));
        }
        match *self {
            CycleParams::Symmetric { period, ramp_frac, .. } => {
                if !(period > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "period must be positive, got {period}"
                    )));
                }
                check_frac("ramp_frac", ramp_frac)
            }
            CycleParams::Asymmetric { fall_time, rise_time, fall_frac, rise_frac, .. } => {
                if !(fall_time > 0.0 && rise_time > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "segment durations must be positive, got {fall_time} and {rise_time}"
                    )));
                }
                check_frac("fall_frac", fall_frac)?;
                check_frac("rise_frac", rise_frac)
            }
        }
    }

    /// Shortest ramp segment duration.
    pub fn min_ramp(&self) -> f64 {
        match *self {
            CycleParams::Symmetric { period, ramp_frac, .. } => ramp_frac * period / 2.0,
            CycleParams::Asymmetric { fall_time, rise_time, fall_frac, rise_frac, .. } => {
                (fall_frac * fall_time).min(rise_frac * rise_time)
            }
        }
    }

    /// Commanded level at elapsed time `s` into the cycle, `0 <= s <=
    /// duration`, when the cycle begins at level `start`.
    pub fn value_at(&self, s: f64, start: f64) -> f64 {
        match *self {
            CycleParams::Symmetric { low, high, period, ramp_frac } => {
                let half = period / 2.0;
                let ramp = ramp_frac * half;
                if s < ramp {
                    start + (high - start) * s / ramp
                } else if s < half {
                    high
                } else if s < half + ramp {
                    high + (low - high) * (s - half) / ramp
                } else {
                    low
                }
            }
            CycleParams::Asymmetric { low, high, fall_time, rise_time, fall_frac, rise_frac } => {
                let fall_ramp = fall_frac * fall_time;
                let rise_ramp = rise_frac * rise_time;
                if s < fall_ramp {
                    start + (low - start) * s / fall_ramp
                } else if s < fall_time {
                    low
                } else if s < fall_time + rise_ramp {
                    low + (high - low) * (s - fall_time) / rise_ramp
                } else {
                    high
                }
            }
        }
    }

    /// Returns a copy with durations snapped to multiples of `dt`.
    pub fn quantized(&self, dt: f64) -> Result<(CycleParams, usize)> {
        let snap = |d: f64| -> usize { (d / dt).round().max(1.0) as usize };
        match *self {
            CycleParams::Symmetric { low, high, period, ramp_frac } => {
                let steps = snap(period);
                Ok((
                    CycleParams::Symmetric { low, high, period: steps as f64 * dt, ramp_frac },
                    steps,
                ))
            }
            CycleParams::Asymmetric { low, high, fall_time, rise_time, fall_frac, rise_frac } => {
                let sf = snap(fall_time);
                let sr = snap(rise_time);
                Ok((
                    CycleParams::Asymmetric {
                        low,
                        high,
                        fall_time: sf as f64 * dt,
                        rise_time: sr as f64 * dt,
                        fall_frac,
                        rise_frac,
                    },
                    sf + sr,
                ))
            }
        }
    }
}

/// How [`ParamBox::shrink`] interprets its factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkMode {
    /// New width = (1 - factor) * old width.
    #[default]
    ReduceBy,
    /// New width = factor * old width.
    ReduceTo,
}

/// Axis-aligned box of cycle parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub family: WaveformFamily,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(family: WaveformFamily, lo: Vec<f64>, hi: Vec<f64>) -> Result<ParamBox> {
        let b = ParamBox { family, lo, hi };
        b.validate()?;
        Ok(b)
    }

    /// Named starting boxes for the built-in plants.
    pub fn builtin(name: &str) -> Option<ParamBox> {
        match name {
            // Thermal cycles for the gel surrogate: temperatures in deg C,
            // durations in hours.
            "hydrogel-full" => Some(ParamBox {
                family: WaveformFamily::Asymmetric,
                lo: vec![20.0, 45.0, 2.0, 0.5, 1.0 / 32.0, 1.0 / 32.0],
                hi: vec![41.0, 65.0, 8.0, 3.0, 1.0, 1.0],
            }),
            // Normalized input for the swimmer plant.
            "swimmer-full" => Some(ParamBox {
                family: WaveformFamily::Symmetric,
                lo: vec![-1.0, 0.1, 4.0, 1.0 / 32.0],
                hi: vec![-0.1, 1.0, 40.0, 1.0],
            }),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.family.dim();
        if self.lo.len() != d || self.hi.len() != d {
            return Err(Error::InvalidConfig(format!(
                "box bounds must have {d} coordinates, got {} and {}",
                self.lo.len(),
                self.hi.len()
            )));
        }
        for i in 0..d {
            if !(self.lo[i] <= self.hi[i]) {
                return Err(Error::InvalidConfig(format!(
                    "box coordinate {} has lo {} above hi {}",
                    self.family.names()[i],
                    self.lo[i],
                    self.hi[i]
                )));
            }
        }
        // Every point of the box must be a valid parameter set; the
        // binding pair is the level ordering across coordinates.
        if !(self.hi[0] < self.lo[1]) {
            return Err(Error::InvalidConfig(format!(
                "low-level range [{}, {}] must sit strictly below high-level range [{}, {}]",
                self.lo[0], self.hi[0], self.lo[1], self.hi[1]
            )));
        }
        CycleParams::from_vec(self.family, &self.center())?.validate()?;
        let lo_corner = CycleParams::from_vec(self.family, &self.lo)?;
        lo_corner.validate()?;
        Ok(())
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn width(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    /// Draws parameter sets coordinate-wise uniform over the box,
    /// reproducible from the seed.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<CycleParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v: Vec<f64> = self
                    .lo
                    .iter()
                    .zip(&self.hi)
                    .map(|(&l, &h)| if h > l { rng.random_range(l..h) } else { l })
                    .collect();
                CycleParams::from_vec(self.family, &v).expect("dimension fixed by box")
            })
            .collect()
    }

    /// Shrinks the box around `center`, clipping back into the current
    /// bounds with an inward shift that preserves the new width. Widths
    /// never grow; the result is contained in `self`.
    pub fn shrink(&self, center: &[f64], factor: f64, mode: ShrinkMode) -> Result<ParamBox> {
        if center.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "shrink center has {} coordinates, box has {}",
                center.len(),
                self.dim()
            )));
        }
        if !(0.0..1.0).contains(&factor) && mode == ShrinkMode::ReduceBy
            || !(0.0..=1.0).contains(&factor) && mode == ShrinkMode::ReduceTo
        {
            return Err(Error::InvalidInput(format!("shrink factor {factor} out of range")));
        }
        let scale = match mode {
            ShrinkMode::ReduceBy => 1.0 - factor,
            ShrinkMode::ReduceTo => factor,
        };
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let w = (self.hi[i] - self.lo[i]) * scale;
            let l = (center[i] - 0.5 * w).max(self.lo[i]).min(self.hi[i] - w);
            lo.push(l);
            hi.push(l + w);
        }
        Ok(ParamBox { family: self.family, lo, hi })
    }
}

/// One cycle of a schedule with its duration in integer steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub params: CycleParams,
    pub steps: usize,
}

/// A concrete multi-cycle input program on a uniform time grid. Cycle
/// boundaries land exactly on samples. The first `warmup_cycles` cycles
/// let the plant reach its attractor and are excluded from fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSchedule {
    pub dt: f64,
    pub warmup_cycles: usize,
    pub cycles: Vec<CycleSpec>,
}

impl CycleSchedule {
    /// Repeats one parameter set. `dt` divides the period exactly.
    pub fn uniform(
        params: &CycleParams,
        warmup_cycles: usize,
        measured_cycles: usize,
        steps_per_cycle: usize,
    ) -> Result<CycleSchedule> {
        params.validate()?;
        if measured_cycles == 0 {
            return Err(Error::InvalidInput("need at least one measured cycle".into()));
        }
        let dt = params.duration() / steps_per_cycle as f64;
        check_ramp_resolution(params, dt)?;
        let n = warmup_cycles + measured_cycles;
        Ok(CycleSchedule {
            dt,
            warmup_cycles,
            cycles: vec![CycleSpec { params: *params, steps: steps_per_cycle }; n],
        })
    }

    /// Builds a schedule from per-cycle parameter draws on a shared grid.
    /// Durations are snapped to multiples of `dt` so every cycle boundary
    /// is a sample. Warmup cycles repeat `warmup_params`.
    pub fn from_samples(
        draws: &[CycleParams],
        dt: f64,
        warmup_params: &CycleParams,
        warmup_cycles: usize,
    ) -> Result<CycleSchedule> {
        if draws.is_empty() {
            return Err(Error::InvalidInput("schedule needs at least one cycle".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        let mut cycles = Vec::with_capacity(warmup_cycles + draws.len());
        for _ in 0..warmup_cycles {
            warmup_params.validate()?;
            let (p, steps) = warmup_params.quantized(dt)?;
            check_ramp_resolution(&p, dt)?;
            cycles.push(CycleSpec { params: p, steps });
        }
        for d in draws {
            d.validate()?;
            let (p, steps) = d.quantized(dt)?;
            check_ramp_resolution(&p, dt)?;
            cycles.push(CycleSpec { params: p, steps });
        }
        Ok(CycleSchedule { dt, warmup_cycles, cycles })
    }

    pub fn total_steps(&self) -> usize {
        self.cycles.iter().map(|c| c.steps).sum()
    }

    pub fn n_samples(&self) -> usize {
        self.total_steps() + 1
    }

    /// Sample indices of cycle starts, plus the final sample.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut b = Vec::with_capacity(self.cycles.len() + 1);
        let mut acc = 0;
        b.push(0);
        for c in &self.cycles {
            acc += c.steps;
            b.push(acc);
        }
        b
    }

    pub fn duration(&self) -> f64 {
        self.total_steps() as f64 * self.dt
    }

    /// Index of the cycle containing sample `i` (the final sample belongs
    /// to the last cycle).
    pub fn cycle_of(&self, i: usize) -> usize {
        let b = self.boundaries();
        match b.binary_search(&i) {
            Ok(k) => k.min(self.cycles.len() - 1),
            Err(k) => k - 1,
        }
    }

    /// Commanded input at every sample, continuous across boundaries.
    pub fn synth(&self) -> Vec<f64> {
        let n = self.n_samples();
        let mut u = Vec::with_capacity(n);
        let mut start = self.cycles[0].params.start_level();
        let mut base = 0usize;
        for c in &self.cycles {
            for i in 0..c.steps {
                let s = i as f64 * self.dt;
                u.push(c.params.value_at(s, start));
            }
            start = c.params.value_at(c.steps as f64 * self.dt, start);
            base += c.steps;
        }
        debug_assert_eq!(base + 1, n);
        u.push(start);
        u
    }

    /// Commanded phase at every sample: advances by one turn per cycle,
    /// linearly in time within each cycle, unwrapped across the schedule.
    pub fn clock_phase(&self) -> Vec<f64> {
        let mut phi = Vec::with_capacity(self.n_samples());
        let mut acc = 0.0;
        for c in &self.cycles {
            for i in 0..c.steps {
                phi.push(acc + std::f64::consts::TAU * i as f64 / c.steps as f64);
            }
            acc += std::f64::consts::TAU;
        }
        phi.push(acc);
        phi
    }

    /// Half-open sample range [start, end) of one cycle; the closing
    /// boundary sample `end` is shared with the next cycle.
    pub fn cycle_samples(&self, k: usize) -> (usize, usize) {
        let b = self.boundaries();
        (b[k], b[k + 1])
    }

    /// Indices of cycles available for fitting (warmup excluded).
    pub fn measured_cycles(&self) -> std::ops::Range<usize> {
        self.warmup_cycles..self.cycles.len()
    }
}

fn check_ramp_resolution(params: &CycleParams, dt: f64) -> Result<()> {
    let min_ramp = params.min_ramp();
    if min_ramp < MIN_RAMP_SAMPLES * dt * (1.0 - 1e-9) {
        return Err(Error::InvalidInput(format!(
            "dt = {dt} too coarse for the shortest ramp ({min_ramp}); need at least {} samples",
            MIN_RAMP_SAMPLES
        )));
    }
    Ok(())
}

/// Largest dt that resolves every ramp any draw from the box can produce,
/// capped at `steps_per_cycle` samples over the box-center duration.
pub fn recommended_dt(bounds: &ParamBox, steps_per_cycle: usize) -> f64 {
    let lo = CycleParams::from_vec(bounds.family, &bounds.lo).expect("validated box");
    let center =
        CycleParams::from_vec(bounds.family, &bounds.center()).expect("validated box");
    let ramp_cap = lo.min_ramp() / MIN_RAMP_SAMPLES;
    let step_cap = center.duration() / steps_per_cycle as f64;
    ramp_cap.min(step_cap)
}
