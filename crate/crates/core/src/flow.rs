//! The autonomous competition flow, its variational equations, the piecewise
//! seasonal solution and the closed-form logistic solution.

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::model::ModelSpec;
use crate::ode::{integrate, OdeSystem, Step, Tolerance};

/// Default absolute and relative integrator tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Coordinates in `(-NEG_CLAMP, 0)` are snapped to zero; anything lower is an error.
pub const NEG_CLAMP: f64 = 1e-12;

/// `f_i(x) = x_i (b - (A x)_i)`.
pub fn lv_vector_field(a: &Mat3, b: f64, x: &Vec3) -> Vec3 {
    let ax = a * x;
    Vec3::from_fn(|i, _| x[i] * (b - ax[i]))
}

/// `(Df)_ij = delta_ij (b - (A x)_i) - x_i a_ij`.
pub fn lv_jacobian(a: &Mat3, b: f64, x: &Vec3) -> Mat3 {
    let ax = a * x;
    Mat3::from_fn(|i, j| {
        let diag = if i == j { b - ax[i] } else { 0.0 };
        diag - x[i] * a[(i, j)]
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowResult {
    pub state: Vec3,
    /// `D_x Phi_t(x0)`, present when the variational equations were integrated.
    pub jacobian: Option<Mat3>,
    pub t: f64,
}

/// The competition system as an ODE on the first three components.
///
/// `N = 3` is the plain flow, `N = 6` appends the running integral of the
/// state, `N = 12` appends the variational matrix `W` in row-major order.
#[derive(Debug, Clone, Copy)]
pub struct LvSystem {
    a: [[f64; 3]; 3],
    b: f64,
}

impl LvSystem {
    pub fn new(a: &Mat3, b: f64) -> Self {
        let mut rows = [[0.0; 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[(i, j)];
            }
        }
        Self { a: rows, b }
    }

    #[inline]
    fn growth(&self, y: &[f64]) -> [f64; 3] {
        let a = &self.a;
        std::array::from_fn(|i| self.b - (a[i][0] * y[0] + a[i][1] * y[1] + a[i][2] * y[2]))
    }

    fn state_weight(y: &[f64]) -> f64 {
        // relative accuracy for tiny states, e.g. after a long bad season
        y[0].abs().max(y[1].abs()).max(y[2].abs()).min(1.0)
    }

    fn clamp_state(y: &mut [f64]) -> std::result::Result<(), (usize, f64)> {
        for (i, v) in y.iter_mut().take(3).enumerate() {
            if *v < 0.0 {
                if *v > -NEG_CLAMP {
                    *v = 0.0;
                } else {
                    return Err((i, *v));
                }
            }
        }
        Ok(())
    }
}

impl OdeSystem<3> for LvSystem {
    fn rhs(&self, y: &[f64; 3], dy: &mut [f64; 3]) {
        let g = self.growth(y);
        for i in 0..3 {
            dy[i] = y[i] * g[i];
        }
    }

    fn abs_weight(&self, y: &[f64; 3], w: &mut [f64; 3]) {
        w.fill(Self::state_weight(y));
    }

    fn project(&self, y: &mut [f64; 3]) -> std::result::Result<(), (usize, f64)> {
        Self::clamp_state(y)
    }
}

impl OdeSystem<6> for LvSystem {
    fn rhs(&self, y: &[f64; 6], dy: &mut [f64; 6]) {
        let g = self.growth(y);
        for i in 0..3 {
            dy[i] = y[i] * g[i];
            dy[3 + i] = y[i];
        }
    }

    fn abs_weight(&self, y: &[f64; 6], w: &mut [f64; 6]) {
        w.fill(Self::state_weight(y));
    }

    fn project(&self, y: &mut [f64; 6]) -> std::result::Result<(), (usize, f64)> {
        Self::clamp_state(y)
    }
}

impl OdeSystem<12> for LvSystem {
    fn rhs(&self, y: &[f64; 12], dy: &mut [f64; 12]) {
        let g = self.growth(y);
        let a = &self.a;
        let mut df = [[0.0; 3]; 3];
        for i in 0..3 {
            dy[i] = y[i] * g[i];
            for j in 0..3 {
                df[i][j] = -y[i] * a[i][j];
            }
            df[i][i] += g[i];
        }
        for i in 0..3 {
            for j in 0..3 {
                dy[3 + 3 * i + j] = (0..3).map(|k| df[i][k] * y[3 + 3 * k + j]).sum();
            }
        }
    }

    fn abs_weight(&self, y: &[f64; 12], w: &mut [f64; 12]) {
        w[..3].fill(Self::state_weight(y));
        w[3..].fill(1.0);
    }

    fn project(&self, y: &mut [f64; 12]) -> std::result::Result<(), (usize, f64)> {
        Self::clamp_state(y)
    }
}

fn check_start(x0: &Vec3, t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("integration time {t} must be finite and nonnegative")));
    }
    if let Some(i) = (0..3).find(|&i| !(x0[i] >= 0.0) || !x0[i].is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "initial state has invalid coordinate x_{} = {}",
            i + 1,
            x0[i]
        )));
    }
    Ok(())
}

/// `Phi_t(x0)`, optionally with `D_x Phi_t(x0)`.
pub fn flow_autonomous(a: &Mat3, b: f64, x0: &Vec3, t: f64, tol: f64, with_variational: bool) -> Result<FlowResult> {
    check_start(x0, t)?;
    let sys = LvSystem::new(a, b);
    let tol = Tolerance::uniform(tol);
    if with_variational {
        let mut y = [0.0; 12];
        y[..3].copy_from_slice(x0.as_slice());
        y[3] = 1.0;
        y[7] = 1.0;
        y[11] = 1.0;
        let sol = integrate(&sys, y, t, tol, |_| ControlFlow::Continue(()))?;
        let state = Vec3::new(sol.y[0], sol.y[1], sol.y[2]);
        let w = Mat3::from_fn(|i, j| sol.y[3 + 3 * i + j]);
        Ok(FlowResult {
            state,
            jacobian: Some(w),
            t: sol.t,
        })
    } else {
        let sol = integrate(&sys, [x0[0], x0[1], x0[2]], t, tol, |_| ControlFlow::Continue(()))?;
        Ok(FlowResult {
            state: Vec3::new(sol.y[0], sol.y[1], sol.y[2]),
            jacobian: None,
            t: sol.t,
        })
    }
}

/// `Phi_t(x0)` together with `int_0^t Phi_s(x0) ds`.
pub fn flow_with_integral(a: &Mat3, b: f64, x0: &Vec3, t: f64, tol: f64) -> Result<(Vec3, Vec3)> {
    check_start(x0, t)?;
    let sys = LvSystem::new(a, b);
    let y = [x0[0], x0[1], x0[2], 0.0, 0.0, 0.0];
    let sol = integrate(&sys, y, t, Tolerance::uniform(tol), |_| ControlFlow::Continue(()))?;
    Ok((
        Vec3::new(sol.y[0], sol.y[1], sol.y[2]),
        Vec3::new(sol.y[3], sol.y[4], sol.y[5]),
    ))
}

/// Runs the plain flow and hands every accepted step to `observer`.
pub fn flow_observed<F>(a: &Mat3, b: f64, x0: &Vec3, t: f64, tol: f64, observer: F) -> Result<crate::ode::Solution<3>>
where
    F: FnMut(&Step<3>) -> ControlFlow<()>,
{
    check_start(x0, t)?;
    let sys = LvSystem::new(a, b);
    integrate(&sys, [x0[0], x0[1], x0[2]], t, Tolerance::uniform(tol), observer)
}

/// Samples `Phi_t(x0)` on the grid `0, dt, 2 dt, ...` up to `t` (inclusive).
pub fn flow_samples(a: &Mat3, b: f64, x0: &Vec3, t: f64, dt: f64, tol: f64) -> Result<Vec<(f64, Vec3)>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("sampling step {dt} must be positive")));
    }
    let n = (t / dt).floor() as usize;
    let mut out = Vec::with_capacity(n + 2);
    out.push((0.0, *x0));
    let mut next = 1;
    let sol = flow_observed(a, b, x0, t, tol, |s| {
        while next <= n && (next as f64) * dt <= s.t1 {
            let tk = next as f64 * dt;
            out.push((tk, Vec3::from(s.interpolate_all(tk))));
            next += 1;
        }
        ControlFlow::Continue(())
    })?;
    let end = Vec3::new(sol.y[0], sol.y[1], sol.y[2]);
    match out.last() {
        Some((tl, _)) if (t - tl).abs() <= 1e-12 * t.max(1.0) => {
            let last = out.len() - 1;
            out[last] = (t, end);
        }
        _ => out.push((t, end)),
    }
    Ok(out)
}

/// Solution of the seasonal system at time `t` from `x0` at time 0.
///
/// Each period of length `omega` starts with the bad season `[0, (1 - phi) omega)`,
/// solved exactly, followed by the good season.
pub fn seasonal_solution(spec: &ModelSpec, x0: &Vec3, t: f64, tol: f64) -> Result<Vec3> {
    check_start(x0, t)?;
    let omega = spec.omega();
    let bad = (1.0 - spec.phi()) * omega;
    let mut x = *x0;
    let mut t0 = 0.0;
    while t0 < t {
        let remaining = t - t0;
        let decay = remaining.min(bad);
        if decay > 0.0 {
            x *= (-spec.mu() * decay).exp();
        }
        let grow = (remaining - bad).min(spec.good_season());
        if grow > 0.0 {
            x = flow_autonomous(spec.a(), spec.b(), &x, grow, tol, false)?.state;
        }
        if remaining <= omega {
            break;
        }
        t0 += omega;
    }
    Ok(x)
}

/// Seasonal trajectory sampled every `dt`, plus every season boundary.
pub fn seasonal_samples(spec: &ModelSpec, x0: &Vec3, t_end: f64, dt: f64, tol: f64) -> Result<Vec<(f64, Vec3)>> {
    check_start(x0, t_end)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("sampling step {dt} must be positive")));
    }
    let omega = spec.omega();
    let bad = (1.0 - spec.phi()) * omega;
    let mut out = vec![(0.0, *x0)];
    let mut x = *x0;
    let mut start = 0.0;
    let mut k = 0usize;
    while start < t_end {
        let stop_bad = (start + bad).min(t_end);
        let mut s = out.last().map(|p| p.0).unwrap_or(0.0) + dt;
        while s < stop_bad {
            out.push((s, x * (-spec.mu() * (s - start)).exp()));
            s += dt;
        }
        x *= (-spec.mu() * (stop_bad - start)).exp();
        if stop_bad > start {
            out.push((stop_bad, x));
        }
        if stop_bad >= t_end {
            break;
        }
        let grow = (start + omega).min(t_end) - stop_bad;
        let inner = flow_samples(spec.a(), spec.b(), &x, grow, dt, tol)?;
        for (tau, y) in inner.iter().skip(1) {
            out.push((stop_bad + tau, *y));
        }
        x = inner.last().map(|p| p.1).unwrap_or(x);
        k += 1;
        start = k as f64 * omega;
    }
    Ok(out)
}

/// Logistic solution `rho(t) = rho0 e^{bt} / (1 + rho0 (e^{bt} - 1))`.
pub fn logistic_solution(b: f64, rho0: f64, t: f64) -> f64 {
    if rho0 == 0.0 {
        return 0.0;
    }
    // written with e^{-bt} so large t cannot overflow
    let e = (-b * t).exp();
    rho0 / (rho0 + (1.0 - rho0) * e)
}
