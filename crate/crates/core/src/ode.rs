//! Dormand–Prince 5(4) integrator with PI step-size control.
//!
//! The integrator works on fixed-size arrays so the 3-, 6- and 12-dimensional
//! systems used by the flow module stay on the stack. Each accepted step is
//! reported to an observer, which may stop the integration early; the step
//! carries both endpoint derivatives so observers can interpolate with a cubic
//! Hermite polynomial.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

/// An autonomous ODE `y' = F(y)` with optional hooks for error weighting and projection.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, y: &[f64; N], dy: &mut [f64; N]);

    /// Per-component multiplier applied to the absolute tolerance.
    fn abs_weight(&self, _y: &[f64; N], w: &mut [f64; N]) {
        w.fill(1.0);
    }

    /// Called after every accepted step. An `Err((component, value))` aborts the
    /// integration with [`Error::Negativity`].
    fn project(&self, _y: &mut [f64; N]) -> std::result::Result<(), (usize, f64)> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Tolerance {
    pub fn uniform(tol: f64) -> Self {
        Self { atol: tol, rtol: tol }
    }
}

/// One accepted step `[t0, t1]`.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub f0: [f64; N],
    pub f1: [f64; N],
}

impl<const N: usize> Step<N> {
    /// Cubic Hermite interpolant of component `i` at time `t` in `[t0, t1]`.
    pub fn interpolate(&self, i: usize, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        if h == 0.0 {
            return self.y1[i];
        }
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i]
    }

    pub fn interpolate_all(&self, t: f64) -> [f64; N] {
        std::array::from_fn(|i| self.interpolate(i, t))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Solution<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    /// True when an observer stopped the integration before `t_end`.
    pub stopped: bool,
}

const MAX_STEPS: usize = 5_000_000;

// Dormand–Prince tableau
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller constants (Hairer, Nørsett & Wanner, DOPRI5 defaults)
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], w: &[f64; N], tol: Tolerance) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = tol.atol * w[i] + tol.rtol * y0[i].abs().max(y1[i].abs());
        let e = err[i].abs();
        if sc > 0.0 {
            acc += (e / sc) * (e / sc);
        } else if e > 0.0 {
            return f64::INFINITY;
        }
    }
    (acc / N as f64).sqrt()
}

fn initial_step<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    y0: &[f64; N],
    f0: &[f64; N],
    w: &[f64; N],
    tol: Tolerance,
    h_max: f64,
) -> f64 {
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..N {
        let sk = tol.atol * w[i] + tol.rtol * y0[i].abs();
        if sk > 0.0 {
            dnf += (f0[i] / sk).powi(2);
            dny += (y0[i] / sk).powi(2);
        }
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * (dny / dnf).sqrt()
    };
    h = h.min(h_max);
    let y1: [f64; N] = std::array::from_fn(|i| y0[i] + h * f0[i]);
    let mut f1 = [0.0; N];
    sys.rhs(&y1, &mut f1);
    let mut der2 = 0.0;
    for i in 0..N {
        let sk = tol.atol * w[i] + tol.rtol * y0[i].abs();
        if sk > 0.0 {
            der2 += ((f1[i] - f0[i]) / sk).powi(2);
        }
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(h_max)
}

/// Integrates `sys` from `y0` over `[0, t_end]`.
///
/// `observer` sees every accepted step; returning `ControlFlow::Break(())`
/// ends the integration at that step's right endpoint.
pub fn integrate<S, F, const N: usize>(
    sys: &S,
    y0: [f64; N],
    t_end: f64,
    tol: Tolerance,
    mut observer: F,
) -> Result<Solution<N>>
where
    S: OdeSystem<N>,
    F: FnMut(&Step<N>) -> ControlFlow<()>,
{
    let mut t = 0.0;
    let mut y = y0;
    let mut out = Solution {
        t,
        y,
        accepted: 0,
        rejected: 0,
        stopped: false,
    };
    if t_end <= 0.0 {
        return Ok(out);
    }
    let h_max = t_end;
    let mut w = [1.0; N];
    let mut k1 = [0.0; N];
    sys.rhs(&y, &mut k1);
    sys.abs_weight(&y, &mut w);
    let mut h = initial_step(sys, &y, &k1, &w, tol, h_max);
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = ([0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N]);
    let mut tmp = [0.0; N];
    let mut y_new = [0.0; N];
    let mut err = [0.0; N];

    for _ in 0..MAX_STEPS {
        if t >= t_end {
            break;
        }
        let mut last = false;
        if t + h >= t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepFailure { t });
        }

        for i in 0..N {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(&tmp, &mut k2);
        for i in 0..N {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(&tmp, &mut k3);
        for i in 0..N {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(&tmp, &mut k4);
        for i in 0..N {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(&tmp, &mut k5);
        for i in 0..N {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(&tmp, &mut k6);
        for i in 0..N {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(&y_new, &mut k7);
        for i in 0..N {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&err, &y, &y_new, &w, tol);

        let fac11 = e.powf(EXPO1);
        if e <= 1.0 {
            let mut fac = fac11 / facold.powf(BETA);
            fac = (fac / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            facold = e.max(1e-4);
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;

            if let Err((component, value)) = sys.project(&mut y_new) {
                return Err(Error::Negativity {
                    t: t + h,
                    component,
                    value,
                });
            }
            let t_new = if last { t_end } else { t + h };
            // project() may have changed y_new; keep the FSAL derivative consistent
            sys.rhs(&y_new, &mut k7);
            let step = Step {
                t0: t,
                t1: t_new,
                y0: y,
                y1: y_new,
                f0: k1,
                f1: k7,
            };
            t = t_new;
            y = y_new;
            k1 = k7;
            sys.abs_weight(&y, &mut w);
            out.accepted += 1;
            if observer(&step).is_break() {
                out.stopped = true;
                break;
            }
            h = h_new.min(h_max);
        } else {
            let fac = (fac11 / SAFE).min(1.0 / FAC_MIN);
            h = if e.is_finite() { h / fac } else { h * 0.1 };
            last_rejected = true;
            out.rejected += 1;
        }
    }
    if t < t_end && !out.stopped {
        return Err(Error::StepFailure { t });
    }
    out.t = t;
    out.y = y;
    Ok(out)
}
