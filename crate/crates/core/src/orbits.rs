//! Periodic orbits of the autonomous flow, the resonance ratio `eta` and the
//! construction of resonant season lengths.

use std::f64::consts::TAU;
use std::ops::ControlFlow;

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::classify::{compute_invariants, zeta_threshold};
use crate::error::{Error, Result};
use crate::fixedpoints::autonomous_positive_equilibrium;
use crate::flow::{flow_autonomous, flow_observed, lv_jacobian, lv_vector_field, DEFAULT_TOL};
use crate::linalg::{Mat3, Vec3};
use crate::model::{ModelParams, ModelSpec};
use crate::poincare::poincare_map;

/// Largest denominator tried when looking for a rational `eta`.
pub const ETA_QMAX: u32 = 64;
/// Distance to an integer that counts as "is an integer".
pub const ETA_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitOptions {
    pub tol: f64,
    /// Time to flow the seed before looking for returns; `None` means `50 / b`.
    pub transient: Option<f64>,
    /// Accepted closure residual `||Phi_T(y) - y||_inf`.
    pub closure_tol: f64,
    /// Newton target for the closure residual.
    pub newton_tol: f64,
    /// Number of stored points along the orbit.
    pub samples: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            transient: None,
            closure_tol: 1e-7,
            newton_tol: 1e-10,
            samples: 256,
        }
    }
}

/// Seed for orbit searches around `x_hat`: far enough from the equilibrium
/// to pick a visibly nontrivial orbit, close enough to stay in its basin.
pub fn default_orbit_seed(x_hat: &Vec3) -> Vec3 {
    x_hat.component_mul(&Vec3::new(1.3, 0.8, 0.9))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Section {
    pub anchor: [f64; 3],
    pub normal: [f64; 3],
}

impl Section {
    fn value(&self, y: &Vec3) -> f64 {
        (y - Vec3::from(self.anchor)).dot(&Vec3::from(self.normal))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    /// Points `Phi_{t_k}(points[0])` at the matching `times`, covering one period.
    #[serde(skip)]
    pub points: Vec<Vec3>,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(rename = "T_gamma")]
    pub t_gamma: f64,
    pub section: Section,
    /// Closure error `||Phi_T(points[0]) - points[0]||_inf`.
    pub residual: f64,
    /// No one-sided section crossing strictly inside the period.
    pub minimal: bool,
    #[serde(skip)]
    a: Mat3,
    #[serde(skip)]
    b: f64,
    #[serde(skip)]
    tol: f64,
}

impl PeriodicOrbit {
    pub fn start(&self) -> Vec3 {
        self.points[0]
    }

    /// `n` points equally spaced in time along the orbit, each obtained by a
    /// fresh integration from the previous one.
    pub fn sample(&self, n: usize) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        let dt = self.t_gamma / n as f64;
        let mut y = self.start();
        out.push(y);
        for _ in 1..n {
            match flow_autonomous(&self.a, self.b, &y, dt, self.tol, false) {
                Ok(r) => y = r.state,
                Err(_) => break,
            }
            out.push(y);
        }
        out
    }
}

fn linearization_period(a: &Mat3, b: f64, x_hat: &Vec3) -> Option<f64> {
    let df = lv_jacobian(a, b, x_hat);
    df.complex_eigenvalues()
        .iter()
        .map(|e| e.im.abs())
        .filter(|&w| w > 1e-12)
        .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |m| m.max(w))))
        .map(|w| TAU / w)
}

/// Next one-sided (negative to positive) section crossing after time zero.
fn next_crossing(a: &Mat3, b: f64, y0: &Vec3, section: &Section, t_max: f64, tol: f64) -> Result<Option<(f64, Vec3)>> {
    let mut hit = None;
    let mut armed = false;
    flow_observed(a, b, y0, t_max, tol, |s| {
        let g0 = section.value(&Vec3::from(s.y0));
        let g1 = section.value(&Vec3::from(s.y1));
        if g1 < 0.0 {
            armed = true;
        }
        if armed && g0 < 0.0 && g1 >= 0.0 {
            let (mut lo, mut hi) = (s.t0, s.t1);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if section.value(&Vec3::from(s.interpolate_all(mid))) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tc = 0.5 * (lo + hi);
            hit = Some((tc, Vec3::from(s.interpolate_all(tc))));
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })?;
    Ok(hit)
}

/// Closed orbit of the autonomous flow through the neighbourhood of `seed`.
///
/// The seed is flowed for a transient, a section through the positive
/// equilibrium is set up transverse to the flow, the first return is refined
/// by Newton's method on `(y, T)` and the result is checked for closure and
/// minimality.
pub fn find_periodic_orbit(a: &Mat3, b: f64, seed: &Vec3, opts: &OrbitOptions) -> Result<PeriodicOrbit> {
    if !(a.determinant() > 0.0) {
        return Err(Error::PreconditionFailed("det A must be positive".into()));
    }
    let x_hat = autonomous_positive_equilibrium(a, b)?
        .ok_or_else(|| Error::PreconditionFailed("no positive equilibrium".into()))?;
    if !seed.iter().all(|&v| v > 0.0) {
        return Err(Error::PreconditionFailed("seed must be interior".into()));
    }
    if (seed - x_hat).amax() <= 1e-8 * x_hat.amax() {
        return Err(Error::PreconditionFailed("seed coincides with the positive equilibrium".into()));
    }
    let tol = opts.tol;
    let transient = opts.transient.unwrap_or(50.0 / b);
    let z0 = flow_autonomous(a, b, seed, transient, tol, false)?.state;
    let offset = z0 - x_hat;
    let d0 = offset.norm();
    if d0 <= 1e-9 {
        return Err(Error::NotClosed {
            residual: 0.0,
            tol: opts.closure_tol,
        });
    }
    let u = offset / d0;
    let f0 = lv_vector_field(a, b, &z0);
    let mut normal = f0 - u * f0.dot(&u);
    if normal.norm() <= 1e-14 {
        return Err(Error::NoReturn { t_max: 0.0 });
    }
    normal /= normal.norm();
    let section = Section {
        anchor: x_hat.into(),
        normal: normal.into(),
    };

    let t_lin = linearization_period(a, b, &x_hat);
    let t_max = 40.0 * t_lin.unwrap_or(TAU * 3.0 / b);
    let Some((t1, _y1)) = next_crossing(a, b, &z0, &section, t_max, tol)? else {
        return Err(Error::NoReturn { t_max });
    };

    // Newton on F(y, T) = (Phi_T(y) - y, n . (y - x_hat)); the orbit family makes
    // the Jacobian rank deficient, so use the minimum-norm step.
    let mut y = z0;
    let mut period = t1;
    let eval = |y: &Vec3, t: f64| -> Result<(Vector4<f64>, Matrix4<f64>)> {
        let r = flow_autonomous(a, b, y, t, tol, true)?;
        let w = r.jacobian.expect("variational flow");
        let end = r.state;
        let fe = lv_vector_field(a, b, &end);
        let d = end - y;
        let g = normal.dot(&(y - x_hat));
        let f = Vector4::new(d[0], d[1], d[2], g);
        let mut j = Matrix4::zeros();
        for r in 0..3 {
            for c in 0..3 {
                j[(r, c)] = w[(r, c)] - if r == c { 1.0 } else { 0.0 };
            }
            j[(r, 3)] = fe[r];
            j[(3, r)] = normal[r];
        }
        Ok((f, j))
    };
    let (mut f, mut jac) = eval(&y, period)?;
    for _ in 0..40 {
        if f.amax() <= opts.newton_tol {
            break;
        }
        let svd = jac.svd(true, true);
        let eps = 1e-9 * svd.singular_values.max();
        let Ok(step) = svd.solve(&(-f), eps) else { break };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let ty = y + Vec3::new(step[0], step[1], step[2]) * lambda;
            let tt = period + step[3] * lambda;
            if tt > 0.0 && ty.iter().all(|&v| v > 0.0) {
                let (ft, jt) = eval(&ty, tt)?;
                if ft.amax() < f.amax() {
                    accepted = Some((ty, tt, ft, jt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((ty, tt, ft, jt)) = accepted else { break };
        let moved = (ty - y).amax().max((tt - period).abs() / period);
        y = ty;
        period = tt;
        f = ft;
        jac = jt;
        if moved < 1e-14 {
            break;
        }
    }
    let residual = Vec3::new(f[0], f[1], f[2]).amax();
    let dist = (y - x_hat).norm();
    if !(dist >= 0.5 * d0 && dist <= 2.0 * d0) || residual > opts.closure_tol {
        return Err(Error::NotClosed {
            residual: if residual > opts.closure_tol { residual } else { f64::INFINITY },
            tol: opts.closure_tol,
        });
    }

    // dense samples and minimality: no one-sided crossing strictly inside (eps_T, T - eps_T)
    let n = opts.samples.max(2);
    let dt = period / n as f64;
    let mut points = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let eps_t = 1e-3 * period;
    let mut inner_returns = 0usize;
    let mut next = 0usize;
    flow_observed(a, b, &y, period, tol, |s| {
        while next < n && (next as f64) * dt <= s.t1 {
            let tk = next as f64 * dt;
            points.push(Vec3::from(s.interpolate_all(tk)));
            times.push(tk);
            next += 1;
        }
        let g0 = section.value(&Vec3::from(s.y0));
        let g1 = section.value(&Vec3::from(s.y1));
        if g0 < 0.0 && g1 >= 0.0 {
            let tc = s.t0 + (s.t1 - s.t0) * g0 / (g0 - g1);
            if tc > eps_t && tc < period - eps_t {
                inner_returns += 1;
            }
        }
        ControlFlow::Continue(())
    })?;
    if points.is_empty() {
        points.push(y);
        times.push(0.0);
    }
    points[0] = y;
    if points.iter().any(|p| p.iter().any(|&v| v <= 0.0)) {
        return Err(Error::NotClosed {
            residual,
            tol: opts.closure_tol,
        });
    }
    Ok(PeriodicOrbit {
        points,
        times,
        t_gamma: period,
        section,
        residual,
        minimal: inner_returns == 0,
        a: *a,
        b,
        tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveKind {
    /// Integer `eta`: every point of `rho* Gamma` is fixed.
    FixedCurve,
    /// `eta = p / q` in lowest terms: every orbit on the curve has period `q`.
    PeriodicOrbits { q: u32 },
    /// No rational `p / q` with `q <= ETA_QMAX` within tolerance. This is
    /// evidence only; irrationality cannot be decided numerically.
    DenseOrbits,
    /// The orbit was not accepted as a minimal closed orbit.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveClass {
    pub eta: f64,
    #[serde(flatten)]
    pub kind: CurveKind,
    /// Smallest `|q eta - round(q eta)|` over `q <= ETA_QMAX`, and the `q` attaining it.
    pub best_q: u32,
    pub best_distance: f64,
    pub closure_residual: f64,
}

/// `eta = rho_hat / T_gamma` and the resulting behaviour of `P` on `rho* Gamma`.
pub fn minimal_period_and_eta(spec: &ModelSpec, orbit: &PeriodicOrbit) -> CurveClass {
    let eta = spec.constants().rho_hat / orbit.t_gamma;
    classify_eta(eta, orbit.residual, orbit.minimal)
}

pub fn classify_eta(eta: f64, closure_residual: f64, minimal: bool) -> CurveClass {
    let dist = |q: u32| {
        let v = q as f64 * eta;
        (v - v.round()).abs()
    };
    let (best_q, best_distance) = (1..=ETA_QMAX)
        .map(|q| (q, dist(q)))
        .fold((1, f64::INFINITY), |acc, (q, d)| if d < acc.1 { (q, d) } else { acc });
    let kind = if !minimal || !eta.is_finite() {
        CurveKind::Indeterminate
    } else if dist(1) <= ETA_EPS {
        CurveKind::FixedCurve
    } else if let Some(q) = (2..=ETA_QMAX).find(|&q| dist(q) <= ETA_EPS) {
        CurveKind::PeriodicOrbits { q }
    } else {
        CurveKind::DenseOrbits
    };
    CurveClass {
        eta,
        kind,
        best_q,
        best_distance,
        closure_residual,
    }
}

/// Completes `(A, b, mu, phi)` with the resonant season length
/// `omega* = (b / r) T_gamma`, for which every point of `rho* Gamma` is a
/// positive fixed point of the Poincaré map.
pub fn construct_multiplicity(
    a: [[f64; 3]; 3],
    b: f64,
    mu: f64,
    phi: f64,
    seed: &Vec3,
    opts: &OrbitOptions,
) -> Result<(ModelSpec, PeriodicOrbit)> {
    let provisional = ModelParams {
        a,
        b,
        mu,
        phi,
        omega: 1.0,
    };
    let r = provisional.r();
    if !(r > 0.0) {
        return Err(Error::PreconditionFailed(format!("r_nonpositive: r = {r}")));
    }
    let spec = ModelSpec::new(provisional)?;
    if !(spec.det() > 0.0) {
        return Err(Error::PreconditionFailed(format!("det_nonpositive: det A = {}", spec.det())));
    }
    let zeta = compute_invariants(&spec).zeta;
    if zeta.abs() > zeta_threshold(spec.a()) {
        return Err(Error::PreconditionFailed(format!("zeta_nonzero: zeta = {zeta}")));
    }
    if autonomous_positive_equilibrium(spec.a(), b)?.is_none() {
        return Err(Error::PreconditionFailed("no_positive_equilibrium".into()));
    }
    let orbit = find_periodic_orbit(spec.a(), b, seed, opts)?;
    let omega = b / r * orbit.t_gamma;
    let resonant = spec.with_omega(omega)?;
    Ok((resonant, orbit))
}

/// `max ||P(rho* x) - rho* x||_inf` over the given points of an orbit of the flow.
pub fn fixed_curve_residual(spec: &ModelSpec, points: &[Vec3], tol: f64) -> Result<f64> {
    let rho = spec.constants().rho_star;
    points.iter().try_fold(0.0f64, |worst, x| {
        let p = x * rho;
        Ok(worst.max((poincare_map(spec, &p, tol)? - p).amax()))
    })
}

/// [`fixed_curve_residual`] over `n_samples` equally spaced points of `orbit`.
pub fn verify_fixed_curve(spec: &ModelSpec, orbit: &PeriodicOrbit, n_samples: usize, tol: f64) -> Result<f64> {
    fixed_curve_residual(spec, &orbit.sample(n_samples), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ml(alpha: f64, beta: f64) -> ModelSpec {
        ModelSpec::new(ModelParams::may_leonard(alpha, beta, 1.0, 0.5, 0.5, 1.0)).unwrap()
    }

    // Df(x_hat) = -A/3 has eigenvalues -1 and +-i sqrt(3) (alpha - beta) / 6
    const LINEAR_PERIOD: f64 = 21.765_592_370_810_614;

    #[test]
    fn linearization_period_of_neutral_may_leonard() {
        let s = ml(1.5, 0.5);
        let t = linearization_period(s.a(), 1.0, &Vec3::repeat(1.0 / 3.0)).unwrap();
        assert!((t - LINEAR_PERIOD).abs() < 1e-10);
    }

    #[test]
    fn small_orbit_has_period_near_linearization() {
        let s = ml(1.5, 0.5);
        let seed = Vec3::new(0.34, 0.333, 0.327);
        let orbit = find_periodic_orbit(s.a(), 1.0, &seed, &OrbitOptions::default()).unwrap();
        assert!(orbit.residual <= 1e-7);
        assert!(orbit.minimal);
        assert!((orbit.t_gamma - LINEAR_PERIOD).abs() / LINEAR_PERIOD < 1e-2, "{}", orbit.t_gamma);
        let end = flow_autonomous(s.a(), 1.0, &orbit.start(), orbit.t_gamma, DEFAULT_TOL, false).unwrap().state;
        assert!((end - orbit.start()).amax() <= 1e-7);
    }

    #[test]
    fn far_seed_gives_closed_orbit() {
        let s = ml(1.5, 0.5);
        let orbit = find_periodic_orbit(s.a(), 1.0, &Vec3::new(0.5, 0.3, 0.2), &OrbitOptions::default()).unwrap();
        assert!(orbit.residual <= 1e-7);
        assert!(orbit.t_gamma > LINEAR_PERIOD);
        assert!(orbit.points.iter().all(|p| p.min() > 0.0));
        // half a period away is a different point
        let half = flow_autonomous(s.a(), 1.0, &orbit.start(), orbit.t_gamma / 2.0, DEFAULT_TOL, false).unwrap().state;
        assert!((half - orbit.start()).amax() > 1e-3);
    }

    #[test]
    fn no_closed_orbit_when_zeta_nonzero() {
        for s in [ml(1.2, 0.5), ml(1.5, 0.8)] {
            let r = find_periodic_orbit(s.a(), 1.0, &Vec3::new(0.5, 0.3, 0.2), &OrbitOptions::default());
            assert!(matches!(r, Err(Error::NoReturn { .. }) | Err(Error::NotClosed { .. })), "{r:?}");
        }
    }

    #[test]
    fn seed_at_equilibrium_is_rejected() {
        let s = ml(1.5, 0.5);
        let r = find_periodic_orbit(s.a(), 1.0, &Vec3::repeat(1.0 / 3.0), &OrbitOptions::default());
        assert!(matches!(r, Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn eta_classification() {
        assert_eq!(classify_eta(1.0, 0.0, true).kind, CurveKind::FixedCurve);
        assert_eq!(classify_eta(2.0 + 1e-8, 0.0, true).kind, CurveKind::FixedCurve);
        assert_eq!(classify_eta(1.5, 0.0, true).kind, CurveKind::PeriodicOrbits { q: 2 });
        assert_eq!(classify_eta(2.0 / 7.0, 0.0, true).kind, CurveKind::PeriodicOrbits { q: 7 });
        assert_eq!(classify_eta(2f64.sqrt(), 0.0, true).kind, CurveKind::DenseOrbits);
        assert_eq!(classify_eta(1.0, 0.0, false).kind, CurveKind::Indeterminate);
    }

    #[test]
    fn construction_rejects_nonzero_zeta() {
        let p = ModelParams::may_leonard(1.2, 0.5, 1.0, 0.5, 0.5, 1.0);
        let r = construct_multiplicity(p.a, 1.0, 0.5, 0.5, &Vec3::new(0.5, 0.3, 0.2), &OrbitOptions::default());
        match r {
            Err(Error::PreconditionFailed(msg)) => assert!(msg.starts_with("zeta_nonzero")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equilibrium_is_fixed_for_any_season_length() {
        let s = ml(1.5, 0.5).with_omega(7.3).unwrap();
        let r = fixed_curve_residual(&s, &[Vec3::repeat(1.0 / 3.0)], DEFAULT_TOL).unwrap();
        assert!(r <= 1e-9);
    }
}
