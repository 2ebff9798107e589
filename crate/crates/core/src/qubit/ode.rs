//! Adaptive Dormand–Prince 5(4) integrator for complex linear systems.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on any single step (s); `f64::INFINITY` disables it.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 { rtol: 1e-8, atol: 1e-12, h_max: f64::INFINITY, max_steps: 1_000_000 }
    }
}

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
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrator state carried across calls so step sizes adapt smoothly.
pub struct Stepper<F> {
    cfg: Dopri5,
    rhs: F,
    pub t: f64,
    pub y: Vec<C64>,
    h: f64,
    steps: usize,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
}

impl<F> Stepper<F>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    pub fn new(cfg: Dopri5, rhs: F, t0: f64, y0: Vec<C64>, h0: f64) -> Self {
        let n = y0.len();
        let z = || vec![C64::new(0.0, 0.0); n];
        Stepper {
            cfg,
            rhs,
            t: t0,
            y: y0,
            h: h0.min(cfg.h_max),
            steps: 0,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
        }
    }

    fn stage(&mut self, idx: usize, c: f64, coeffs: &[(usize, f64)], h: f64) {
        for (i, tmp) in self.tmp.iter_mut().enumerate() {
            let mut acc = self.y[i];
            for &(j, a) in coeffs {
                acc += self.k[j][i] * (a * h);
            }
            *tmp = acc;
        }
        let (t, tmp) = (self.t + c * h, std::mem::take(&mut self.tmp));
        let mut out = std::mem::take(&mut self.k[idx]);
        for v in out.iter_mut() {
            *v = C64::new(0.0, 0.0);
        }
        (self.rhs)(t, &tmp, &mut out);
        self.k[idx] = out;
        self.tmp = tmp;
    }

    /// Advance exactly to `t_end` (no discontinuity may lie strictly inside).
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        let n = self.y.len();
        {
            let mut k0 = std::mem::take(&mut self.k[0]);
            k0.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            (self.rhs)(self.t, &self.y, &mut k0);
            self.k[0] = k0;
        }
        while self.t < t_end {
            let remaining = t_end - self.t;
            let span_tol = 1e-15 * t_end.abs().max(1e-300);
            if remaining <= span_tol {
                self.t = t_end;
                break;
            }
            let mut h = self.h.min(self.cfg.h_max);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            self.steps += 1;
            if self.steps > self.cfg.max_steps {
                return Err(Error::Integration { time: self.t, reason: "step budget exhausted".into() });
            }
            self.stage(1, C2, &[(0, A21)], h);
            self.stage(2, C3, &[(0, A31), (1, A32)], h);
            self.stage(3, C4, &[(0, A41), (1, A42), (2, A43)], h);
            self.stage(4, C5, &[(0, A51), (1, A52), (2, A53), (3, A54)], h);
            self.stage(5, 1.0, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], h);
            let mut y_new = vec![C64::new(0.0, 0.0); n];
            for i in 0..n {
                y_new[i] = self.y[i]
                    + (self.k[0][i] * B1
                        + self.k[2][i] * B3
                        + self.k[3][i] * B4
                        + self.k[4][i] * B5
                        + self.k[5][i] * B6)
                        * h;
            }
            let t_new = if last { t_end } else { self.t + h };
            let mut k6 = std::mem::take(&mut self.k[6]);
            k6.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            (self.rhs)(t_new, &y_new, &mut k6);
            self.k[6] = k6;

            let mut err_sq = 0.0;
            for i in 0..n {
                let e = (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * h;
                let scale = self.cfg.atol + self.cfg.rtol * self.y[i].norm().max(y_new[i].norm());
                err_sq += (e.norm() / scale).powi(2);
            }
            let err = (err_sq / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration { time: self.t, reason: "non-finite state".into() });
            }
            if err <= 1.0 {
                self.t = t_new;
                self.y = y_new;
                self.k.swap(0, 6);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // a forced short final step must not shrink the carried size
                self.h = if last { self.h.max(h * fac) } else { h * fac };
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                self.h = h * fac;
                if self.h < 1e-14 * self.t.abs().max(1e-12) {
                    return Err(Error::Integration { time: self.t, reason: "step size underflow".into() });
                }
            }
        }
        Ok(())
    }
}
