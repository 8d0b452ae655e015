//! The Poincaré map `P(x) = Phi_{phi omega}(l x)`, its Jacobian and iterates.

use serde::Serialize;

use crate::error::Result;
use crate::fate::{self, Fate, CONVERGED_TOL, CURVE_TOL};
use crate::flow::flow_autonomous;
use crate::linalg::{Mat3, Vec3};
use crate::model::ModelSpec;

pub fn poincare_map(spec: &ModelSpec, x: &Vec3, tol: f64) -> Result<Vec3> {
    let lx = x * spec.constants().l;
    Ok(flow_autonomous(spec.a(), spec.b(), &lx, spec.good_season(), tol, false)?.state)
}

/// `P(x)` and `DP(x) = l D_x Phi_{phi omega}(l x)`.
pub fn poincare_map_with_jacobian(spec: &ModelSpec, x: &Vec3, tol: f64) -> Result<(Vec3, Mat3)> {
    let l = spec.constants().l;
    let r = flow_autonomous(spec.a(), spec.b(), &(x * l), spec.good_season(), tol, true)?;
    let w = r.jacobian.expect("variational flow returns a jacobian");
    Ok((r.state, w * l))
}

pub fn poincare_jacobian(spec: &ModelSpec, x: &Vec3, tol: f64) -> Result<Mat3> {
    Ok(poincare_map_with_jacobian(spec, x, tol)?.1)
}

/// `P^k(x)` by repeated application.
pub fn poincare_power(spec: &ModelSpec, x: &Vec3, k: usize, tol: f64) -> Result<Vec3> {
    let mut y = *x;
    for _ in 0..k {
        y = poincare_map(spec, &y, tol)?;
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitTrace {
    /// `points[0]` is the initial state, `points[j] = P^j(points[0])`.
    pub points: Vec<Vec3>,
    /// Number of applications of `P`.
    pub k: usize,
    pub fate: Fate,
}

impl OrbitTrace {
    pub fn last(&self) -> Vec3 {
        *self.points.last().expect("trace is never empty")
    }
}

/// Iterates `P` at most `k` times, stopping early once `||P(x) - x||_inf < stop_tol`
/// at a point that is not a saddle.
///
/// A small step is accepted as convergence right away on the first iterate.
/// Later it is accepted only if `DP` has no eigenvalue of modulus above one,
/// because orbits that shadow a heteroclinic cycle linger near saddles where
/// the step is tiny for a long time.
pub fn iterate(spec: &ModelSpec, x: &Vec3, k: usize, stop_tol: f64, tol: f64) -> Result<OrbitTrace> {
    let mut points = Vec::with_capacity(k.min(10_000) + 1);
    points.push(*x);
    let mut cur = *x;
    // skip re-testing the spectrum on every iterate of a long saddle passage
    let mut recheck_at = 0usize;
    for j in 1..=k {
        let next = poincare_map(spec, &cur, tol)?;
        let step = (next - cur).amax();
        points.push(next);
        if step < stop_tol && j >= recheck_at {
            let accept = j == 1 || is_locally_stable(spec, &next, tol)?;
            if accept {
                return Ok(OrbitTrace {
                    points,
                    k: j,
                    fate: Fate::ConvergedTo { limit: next.into() },
                });
            }
            recheck_at = j + 10;
        }
        cur = next;
    }
    let fate = classify_tail(&points);
    Ok(OrbitTrace { points, k, fate })
}

fn is_locally_stable(spec: &ModelSpec, x: &Vec3, tol: f64) -> Result<bool> {
    let dp = poincare_jacobian(spec, x, tol)?;
    Ok(dp.complex_eigenvalues().iter().all(|e| e.norm() <= 1.0 + 1e-7))
}

/// Fate of an orbit that ran to its iteration limit.
pub fn classify_tail(points: &[Vec3]) -> Fate {
    if fate::near_boundary(points) {
        return Fate::NearBoundaryCycle;
    }
    match fate::closed_curve_distance(points) {
        Some(d) if d < CURVE_TOL => Fate::OnInvariantCurve,
        _ => Fate::Undecided,
    }
}

/// Default stopping tolerance for [`iterate`].
pub const DEFAULT_STOP_TOL: f64 = CONVERGED_TOL;

/// `||P^k(x) - rho* Phi_{k rho_hat}(x / rho*)||_inf`.
///
/// The left side applies the map `k` times; the right side is one integration
/// of the autonomous flow over `k rho_hat`.
pub fn conjugacy_residual(spec: &ModelSpec, x: &Vec3, k: usize, tol: f64) -> Result<f64> {
    if k == 0 {
        return Ok(0.0);
    }
    let c = spec.constants();
    let lhs = poincare_power(spec, x, k, tol)?;
    let y = flow_autonomous(spec.a(), spec.b(), &(x / c.rho_star), k as f64 * c.rho_hat, tol, false)?.state;
    Ok((lhs - y * c.rho_star).amax())
}
