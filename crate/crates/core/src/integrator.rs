//! Explicit Runge–Kutta integrators: classical fixed-step RK4 and adaptive
//! Dormand–Prince 5(4) with FSAL.
//!
//! Both advance a flat `&mut [f64]` state across an interval and land
//! exactly on its end, so the caller can hold inputs constant between
//! control ticks.

use thiserror::Error;

use crate::config::{IntegratorConfig, IntegratorMode};

pub trait OdeSystem {
    type Error;
    fn derivative(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), Self::Error>;
}

/// Adapts a closure into an [`OdeSystem`].
pub struct FnSystem<F>(pub F);

impl<F, E> OdeSystem for FnSystem<F>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    type Error = E;
    fn derivative(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), E> {
        (self.0)(t, y, dy)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError<E> {
    #[error(transparent)]
    System(E),
    #[error("step size {step:e} s fell below the minimum at t = {time} s (stiffness)")]
    StepUnderflow { time: f64, step: f64 },
}

/// Classical fourth-order Runge–Kutta with a fixed maximum step.
#[derive(Debug, Clone)]
pub struct Rk4 {
    pub step: f64,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(step: f64, dim: usize) -> Self {
        Rk4 {
            step,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    /// One step of size `h` from `(t, y)`, in place.
    pub fn step_once<S: OdeSystem>(&mut self, sys: &mut S, t: f64, y: &mut [f64], h: f64) -> Result<(), S::Error> {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        sys.derivative(t, y, k1)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        sys.derivative(t + 0.5 * h, tmp, k2)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        sys.derivative(t + 0.5 * h, tmp, k3)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + h * k3[i];
        }
        sys.derivative(t + h, tmp, k4)?;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }

    /// Integrates from `t0` to `t1` in equal steps no larger than `self.step`.
    pub fn advance<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t0: f64,
        y: &mut [f64],
        t1: f64,
    ) -> Result<usize, StepError<S::Error>> {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(0);
        }
        let steps = ((span / self.step) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for i in 0..steps {
            let t = t0 + i as f64 * h;
            self.step_once(sys, t, y, h).map_err(StepError::System)?;
        }
        Ok(steps)
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Adaptive Dormand–Prince 5(4) with local extrapolation and FSAL.
#[derive(Debug, Clone)]
pub struct DormandPrince45 {
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Step size carried over between calls to `advance`.
    pub next_step: Option<f64>,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
}

impl DormandPrince45 {
    pub fn new(rtol: f64, atol: f64, min_step: f64, max_step: f64, dim: usize) -> Self {
        DormandPrince45 {
            rtol,
            atol,
            min_step,
            max_step,
            next_step: None,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
            accepted: 0,
            rejected: 0,
        }
    }

    /// Integrates from `t0` to exactly `t1`.
    ///
    /// The derivative at `t0` is always re-evaluated, so the right-hand side
    /// may change discontinuously between calls.
    pub fn advance<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t0: f64,
        y: &mut [f64],
        t1: f64,
    ) -> Result<usize, StepError<S::Error>> {
        let n = y.len();
        let mut t = t0;
        if t1 <= t0 {
            return Ok(0);
        }
        let mut h = self.next_step.unwrap_or(self.max_step).min(self.max_step);
        let mut steps = 0;
        sys.derivative(t, y, &mut self.k[0]).map_err(StepError::System)?;
        loop {
            let remaining = t1 - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let h_try = if last { remaining } else { h };
            self.stages(sys, t, y, h_try).map_err(StepError::System)?;

            let k = &self.k;
            let mut acc = 0.0;
            for i in 0..n {
                let err = h_try
                    * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let scale = self.atol + self.rtol * y[i].abs().max(self.y_new[i].abs());
                let r = err / scale;
                acc += r * r;
            }
            let err = (acc / n as f64).sqrt();

            if err <= 1.0 {
                t = if last { t1 } else { t + h_try };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.accepted += 1;
                steps += 1;
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a truncated final step says nothing about the natural step size
                if !last {
                    h = (h_try * factor).min(self.max_step);
                } else {
                    h = h.max(h_try * factor).min(self.max_step);
                }
                if last {
                    self.next_step = Some(h);
                    return Ok(steps);
                }
            } else {
                self.rejected += 1;
                let factor = if err.is_finite() {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                } else {
                    MIN_FACTOR
                };
                h = h_try * factor;
                if h < self.min_step {
                    return Err(StepError::StepUnderflow { time: t, step: h });
                }
            }
        }
    }

    /// Stages 2–7 from k[0] = f(t, y); fills `y_new` with the fifth-order
    /// solution and k[6] with f(t + h, y_new).
    fn stages<S: OdeSystem>(&mut self, sys: &mut S, t: f64, y: &[f64], h: f64) -> Result<(), S::Error> {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.derivative(t + C2 * h, tmp, k2)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.derivative(t + C3 * h, tmp, k3)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.derivative(t + C4 * h, tmp, k4)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.derivative(t + C5 * h, tmp, k5)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.derivative(t + h, tmp, k6)?;
        let y_new = &mut self.y_new;
        for i in 0..n {
            y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        sys.derivative(t + h, y_new, k7)?;
        Ok(())
    }
}

/// Integrator selected by configuration.
#[derive(Debug, Clone)]
pub enum Integrator {
    Fixed(Rk4),
    Adaptive(DormandPrince45),
}

impl Integrator {
    pub fn from_config(cfg: &IntegratorConfig, dim: usize) -> Self {
        match cfg.mode {
            IntegratorMode::Fixed => Integrator::Fixed(Rk4::new(cfg.fixed_step, dim)),
            IntegratorMode::Adaptive => Integrator::Adaptive(DormandPrince45::new(
                cfg.rtol,
                cfg.atol,
                cfg.min_step,
                cfg.max_step,
                dim,
            )),
        }
    }

    pub fn advance<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t0: f64,
        y: &mut [f64],
        t1: f64,
    ) -> Result<usize, StepError<S::Error>> {
        match self {
            Integrator::Fixed(rk) => rk.advance(sys, t0, y, t1),
            Integrator::Adaptive(dp) => dp.advance(sys, t0, y, t1),
        }
    }
}
