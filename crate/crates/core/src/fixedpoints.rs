//! Fixed points of the Poincaré map: census, spectra, indices and the
//! eigenvalue relations at positive fixed points.

use std::cmp::Ordering;

use nalgebra::{Complex, Matrix2, Vector2};
use serde::{Serialize, Serializer};

use crate::classify::zeta_threshold;
use crate::error::{Error, Result};
use crate::flow::{flow_with_integral, lv_jacobian};
use crate::linalg::{angle_between, eigenvalues_sorted, real_eigenvector, Mat3, Vec3};
use crate::model::{det_threshold, ModelSpec};
use crate::orbits::{find_periodic_orbit, OrbitOptions};
use crate::poincare::{poincare_map, poincare_map_with_jacobian};

/// Residual accepted for every reported fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-9;
/// Eigenvalue moduli within this distance of one are nonhyperbolic.
pub const HYPERBOLIC_EPS: f64 = 1e-7;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_STEP_TOL: f64 = 1e-12;
/// Distinct fixed points closer than this are merged.
const DEDUP_DIST: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FixedPointKind {
    Origin,
    /// Nonzero coordinate (zero-based).
    Axial(usize),
    /// Vanishing coordinate (zero-based).
    Planar(usize),
    Positive,
}

impl FixedPointKind {
    pub fn label(&self) -> String {
        match self {
            FixedPointKind::Origin => "origin".into(),
            FixedPointKind::Axial(i) => format!("axial-{}", i + 1),
            FixedPointKind::Planar(k) => format!("planar-{}", k + 1),
            FixedPointKind::Positive => "positive".into(),
        }
    }
}

impl Serialize for FixedPointKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Attractor,
    Repeller,
    Saddle,
    Nonhyperbolic,
}

/// Checks of the eigenvalue relations at a positive fixed point `rho* x_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenRelations {
    /// `exp(-b rho_hat)`.
    pub expected_contraction: f64,
    /// Eigenvalue of `DP` closest to `exp(-b rho_hat)`.
    pub contraction: f64,
    /// Angle between its eigenvector and the fixed point, radians.
    pub eigenvector_angle: f64,
    /// Sum of the two eigenvalues of `Df(x_hat)` other than `-b`.
    pub pair_sum: f64,
    /// `b zeta / det A`.
    pub expected_pair_sum: f64,
    pub pair_sum_rel_error: f64,
    /// `lambda_1 lambda_2 det A`.
    pub pair_product_det: f64,
}

impl EigenRelations {
    pub fn holds(&self, rel_tol: f64, angle_tol: f64) -> bool {
        self.pair_sum_rel_error <= rel_tol
            && self.pair_product_det > 0.0
            && self.eigenvector_angle <= angle_tol
            && (self.contraction - self.expected_contraction).abs() <= rel_tol * self.expected_contraction.max(1e-300)
    }
}

fn serialize_eigs<S: Serializer>(eigs: &[Complex<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = eigs.iter().map(|e| [e.re, e.im]).collect();
    pairs.serialize(s)
}

fn serialize_vec3<S: Serializer>(v: &Vec3, s: S) -> std::result::Result<S::Ok, S::Error> {
    [v[0], v[1], v[2]].serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointRecord {
    pub kind: FixedPointKind,
    #[serde(serialize_with = "serialize_vec3")]
    pub location: Vec3,
    /// Eigenvalues of `DP`, ascending modulus.
    #[serde(serialize_with = "serialize_eigs")]
    pub eigenvalues: Vec<Complex<f64>>,
    pub index: i8,
    pub stability: Stability,
    /// `||P(location) - location||_inf`.
    pub residual: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relations: Option<EigenRelations>,
}

impl FixedPointRecord {
    fn bare(kind: FixedPointKind, location: Vec3, residual: f64) -> Self {
        Self {
            kind,
            location,
            eigenvalues: Vec::new(),
            index: 0,
            stability: Stability::Nonhyperbolic,
            residual,
            warnings: Vec::new(),
            relations: None,
        }
    }

    pub fn count_unstable(&self) -> usize {
        self.eigenvalues.iter().filter(|e| e.norm() > 1.0).count()
    }
}

/// Positive solution of `A x = b (1, 1, 1)`, if it exists.
pub fn autonomous_positive_equilibrium(a: &Mat3, b: f64) -> Result<Option<Vec3>> {
    let det = a.determinant();
    let threshold = det_threshold(a);
    if det.abs() <= threshold {
        return Err(Error::DegenerateMatrix { det, threshold });
    }
    let x = a
        .lu()
        .solve(&Vec3::repeat(b))
        .ok_or(Error::DegenerateMatrix { det, threshold })?;
    Ok(if x.iter().all(|&v| v > 0.0) { Some(x) } else { None })
}

pub fn origin_fixed_point(spec: &ModelSpec, tol: f64) -> Result<FixedPointRecord> {
    spectrum_and_index(spec, FixedPointRecord::bare(FixedPointKind::Origin, Vec3::zeros(), 0.0), tol)
}

/// `q_i = (b / a_ii) rho* e_i` for `i = 1, 2, 3`.
pub fn axial_fixed_points(spec: &ModelSpec, tol: f64) -> Result<Vec<FixedPointRecord>> {
    let rho = spec.constants().rho_star;
    (0..3)
        .map(|i| {
            let mut q = Vec3::zeros();
            q[i] = spec.b() / spec.a()[(i, i)] * rho;
            let residual = (poincare_map(spec, &q, tol)? - q).amax();
            spectrum_and_index(spec, FixedPointRecord::bare(FixedPointKind::Axial(i), q, residual), tol)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneFailure {
    /// Vanishing coordinate, one-based.
    pub plane: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarSearch {
    pub found: Vec<FixedPointRecord>,
    pub failures: Vec<PlaneFailure>,
}

fn plane_indices(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Planar fixed points, one per coordinate plane whose restricted competition
/// system has a positive equilibrium.
///
/// Each candidate is refined by Newton's method on the restricted map, which is
/// evaluated with the full flow and the off-plane coordinate pinned to zero.
pub fn planar_fixed_points(spec: &ModelSpec, tol: f64) -> Result<PlanarSearch> {
    let a = spec.a();
    let b = spec.b();
    let rho = spec.constants().rho_star;
    let mut found = Vec::new();
    let mut failures = Vec::new();
    for k in 0..3 {
        let (i, j) = plane_indices(k);
        let sub = Matrix2::new(a[(i, i)], a[(i, j)], a[(j, i)], a[(j, j)]);
        let Some(y) = sub.lu().solve(&Vector2::new(b, b)) else {
            continue;
        };
        if !(y[0] > 0.0 && y[1] > 0.0) {
            continue;
        }
        let mut guess = Vec3::zeros();
        guess[i] = rho * y[0];
        guess[j] = rho * y[1];
        match planar_newton(spec, guess, i, j, tol) {
            Ok((v, residual)) => {
                let rec = FixedPointRecord::bare(FixedPointKind::Planar(k), v, residual);
                found.push(spectrum_and_index(spec, rec, tol)?);
            }
            Err(e) => failures.push(PlaneFailure {
                plane: k + 1,
                error: e.to_string(),
            }),
        }
    }
    Ok(PlanarSearch { found, failures })
}

fn planar_newton(spec: &ModelSpec, mut x: Vec3, i: usize, j: usize, tol: f64) -> Result<(Vec3, f64)> {
    let eval = |x: &Vec3| -> Result<(Vector2<f64>, Matrix2<f64>)> {
        let (px, dp) = poincare_map_with_jacobian(spec, x, tol)?;
        let f = Vector2::new(px[i] - x[i], px[j] - x[j]);
        let jac = Matrix2::new(dp[(i, i)] - 1.0, dp[(i, j)], dp[(j, i)], dp[(j, j)] - 1.0);
        Ok((f, jac))
    };
    let (mut f, mut jac) = eval(&x)?;
    for _ in 0..NEWTON_MAX_ITER {
        if f.amax() <= NEWTON_STEP_TOL {
            break;
        }
        let Some(step) = jac.lu().solve(&(-f)) else {
            return Err(Error::NewtonDivergence("singular restricted Jacobian".into()));
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..20 {
            let mut trial = x;
            trial[i] += lambda * step[0];
            trial[j] += lambda * step[1];
            if trial[i] > 0.0 && trial[j] > 0.0 {
                let (ft, jt) = eval(&trial)?;
                if ft.amax() < f.amax() || ft.amax() <= NEWTON_STEP_TOL {
                    accepted = Some((trial, ft, jt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((trial, ft, jt)) = accepted else {
            break;
        };
        let moved = (trial - x).amax();
        x = trial;
        f = ft;
        jac = jt;
        if moved < NEWTON_STEP_TOL {
            break;
        }
    }
    let residual = (poincare_map(spec, &x, tol)? - x).amax();
    if residual <= FIXED_POINT_TOL && x[i] > 0.0 && x[j] > 0.0 {
        Ok((x, residual))
    } else {
        Err(Error::NewtonDivergence(format!(
            "plane x_{} = 0: residual {residual:e}",
            3 - i - j + 1
        )))
    }
}

/// Damped Newton iteration on `P(x) - x` using an SVD pseudo-inverse of
/// `DP - I`, so that steps stay finite along curves of fixed points.
pub fn newton_fixed_point(spec: &ModelSpec, mut x: Vec3, tol: f64) -> Result<(Vec3, f64)> {
    let eval = |x: &Vec3| -> Result<(Vec3, Mat3)> {
        let (px, dp) = poincare_map_with_jacobian(spec, x, tol)?;
        Ok((px - x, dp - Mat3::identity()))
    };
    let (mut f, mut jac) = eval(&x)?;
    for _ in 0..NEWTON_MAX_ITER {
        if f.amax() <= NEWTON_STEP_TOL {
            break;
        }
        let svd = jac.svd(true, true);
        let eps = 1e-8 * svd.singular_values.max();
        let step = svd
            .solve(&(-f), eps)
            .map_err(|e| Error::NewtonDivergence(e.to_string()))?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..20 {
            let trial = x + step * lambda;
            if trial.iter().all(|&v| v > 0.0) {
                let (ft, jt) = eval(&trial)?;
                if ft.amax() < f.amax() {
                    accepted = Some((trial, ft, jt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((trial, ft, jt)) = accepted else {
            break;
        };
        let moved = (trial - x).amax();
        x = trial;
        f = ft;
        jac = jt;
        if moved < NEWTON_STEP_TOL {
            break;
        }
    }
    let residual = f.amax();
    if residual <= FIXED_POINT_TOL {
        Ok((x, residual))
    } else {
        Err(Error::NewtonDivergence(format!("residual {residual:e} after refinement")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositiveSearchOptions {
    pub tol: f64,
    /// Seeds for periodic-orbit detection; defaults are derived from `x_hat`.
    pub orbit_seeds: Vec<Vec3>,
    /// Points taken from each detected orbit as Newton seeds.
    pub samples_per_orbit: usize,
}

impl Default for PositiveSearchOptions {
    fn default() -> Self {
        Self {
            tol: crate::flow::DEFAULT_TOL,
            orbit_seeds: Vec::new(),
            samples_per_orbit: 8,
        }
    }
}

/// Positive fixed points of `P`.
///
/// `rho* x_hat` is returned whenever the autonomous flow has a positive
/// equilibrium `x_hat`. When `det A > 0` and `zeta = 0`, periodic orbits of the
/// flow are located and points of `rho* Gamma` are refined by Newton's method;
/// these converge only when the season length is resonant with the orbit.
pub fn positive_fixed_points(spec: &ModelSpec, opts: &PositiveSearchOptions) -> Result<Vec<FixedPointRecord>> {
    let Some(x_hat) = autonomous_positive_equilibrium(spec.a(), spec.b())? else {
        return Ok(Vec::new());
    };
    let rho = spec.constants().rho_star;
    let p = x_hat * rho;
    let residual = (poincare_map(spec, &p, opts.tol)? - p).amax();
    let mut points = vec![(p, residual)];

    let zeta = crate::classify::compute_invariants(spec).zeta;
    if spec.det() > 0.0 && zeta.abs() <= zeta_threshold(spec.a()) {
        let seeds = if opts.orbit_seeds.is_empty() {
            vec![crate::orbits::default_orbit_seed(&x_hat)]
        } else {
            opts.orbit_seeds.clone()
        };
        let orbit_opts = OrbitOptions {
            tol: opts.tol,
            ..OrbitOptions::default()
        };
        for seed in seeds {
            let Ok(orbit) = find_periodic_orbit(spec.a(), spec.b(), &seed, &orbit_opts) else {
                continue;
            };
            for y in orbit.sample(opts.samples_per_orbit) {
                if let Ok((x, res)) = newton_fixed_point(spec, y * rho, opts.tol) {
                    points.push((x, res));
                }
            }
        }
    }

    let mut unique: Vec<(Vec3, f64)> = Vec::new();
    for (x, res) in points {
        if unique.iter().all(|(u, _)| (u - x).amax() > DEDUP_DIST) {
            unique.push((x, res));
        }
    }
    let mut out = unique
        .into_iter()
        .map(|(x, res)| spectrum_and_index(spec, FixedPointRecord::bare(FixedPointKind::Positive, x, res), opts.tol))
        .collect::<Result<Vec<_>>>()?;
    sort_records(&mut out);
    Ok(out)
}

fn lexicographic(a: &Vec3, b: &Vec3) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

pub fn sort_records(records: &mut [FixedPointRecord]) {
    records.sort_by(|a, b| a.kind.cmp(&b.kind).then_with(|| lexicographic(&a.location, &b.location)));
}

/// Fills in the spectrum of `DP`, the index, the stability verdict and, for
/// positive fixed points, the eigenvalue relation checks.
pub fn spectrum_and_index(spec: &ModelSpec, mut fp: FixedPointRecord, tol: f64) -> Result<FixedPointRecord> {
    let (px, dp) = poincare_map_with_jacobian(spec, &fp.location, tol)?;
    fp.residual = (px - fp.location).amax();
    let eigs = eigenvalues_sorted(&dp);
    let unstable = eigs.iter().filter(|e| e.norm() > 1.0).count();
    fp.index = if unstable % 2 == 0 { 1 } else { -1 };
    fp.warnings.clear();
    let near_one: Vec<&Complex<f64>> = eigs
        .iter()
        .filter(|e| (e.norm() - 1.0).abs() < HYPERBOLIC_EPS)
        .collect();
    fp.stability = if !near_one.is_empty() {
        fp.warnings.push(format!(
            "nonhyperbolic: {} eigenvalue(s) with modulus within {HYPERBOLIC_EPS:e} of one",
            near_one.len()
        ));
        Stability::Nonhyperbolic
    } else if unstable == 0 {
        Stability::Attractor
    } else if unstable == 3 {
        Stability::Repeller
    } else {
        Stability::Saddle
    };
    fp.eigenvalues = eigs;
    fp.relations = if fp.kind == FixedPointKind::Positive {
        Some(eigen_relations(spec, &fp.location, &dp))
    } else {
        None
    };
    Ok(fp)
}

fn eigen_relations(spec: &ModelSpec, location: &Vec3, dp: &Mat3) -> EigenRelations {
    let b = spec.b();
    let c = spec.constants();
    let expected_contraction = (-b * c.rho_hat).exp();
    let contraction = dp
        .complex_eigenvalues()
        .iter()
        .min_by(|x, y| {
            (*x - expected_contraction)
                .norm()
                .total_cmp(&(*y - expected_contraction).norm())
        })
        .map(|e| e.re)
        .unwrap_or(f64::NAN);
    let mut v = real_eigenvector(dp, contraction);
    if v.sum() < 0.0 {
        v = -v;
    }
    let eigenvector_angle = angle_between(&v, location);

    // eigenvalues of Df at the autonomous equilibrium
    let x_hat = location / c.rho_star;
    let df = lv_jacobian(spec.a(), b, &x_hat);
    let mut ev: Vec<Complex<f64>> = df.complex_eigenvalues().iter().copied().collect();
    let k = (0..3)
        .min_by(|&i, &j| (ev[i] + b).norm().total_cmp(&(ev[j] + b).norm()))
        .unwrap_or(0);
    ev.remove(k);
    let pair_sum = (ev[0] + ev[1]).re;
    let pair_product = (ev[0] * ev[1]).re;
    let det = spec.det();
    let zeta = crate::classify::compute_invariants(spec).zeta;
    let expected_pair_sum = b * zeta / det;
    // relative error, measured against b when zeta vanishes
    let scale = expected_pair_sum.abs().max(b * 1e-3);
    EigenRelations {
        expected_contraction,
        contraction,
        eigenvector_angle,
        pair_sum,
        expected_pair_sum,
        pair_sum_rel_error: (pair_sum - expected_pair_sum).abs() / scale,
        pair_product_det: pair_product * det,
    }
}

/// `A theta_hat - r omega (1, 1, 1)`, where `theta_hat` is the good-season
/// integral of the solution through the fixed point `theta`.
///
/// Taking logarithms of the fixed-point equation over one full period shows
/// that this vanishes at every positive fixed point.
pub fn theta_hat_check(spec: &ModelSpec, theta: &Vec3, tol: f64) -> Result<Vec3> {
    if !theta.iter().all(|&v| v > 0.0) {
        return Err(Error::PreconditionFailed("theta must be strictly positive".into()));
    }
    let residual = (poincare_map(spec, theta, tol)? - theta).amax();
    if residual > 1e-8 {
        return Err(Error::PreconditionFailed(format!(
            "theta is not a fixed point (residual {residual:e})"
        )));
    }
    let c = spec.constants();
    let (_, integral) = flow_with_integral(spec.a(), spec.b(), &(theta * c.l), spec.good_season(), tol)?;
    Ok(spec.a() * integral - Vec3::repeat(c.r * spec.omega()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Census {
    pub fixed_points: Vec<FixedPointRecord>,
    pub planar_failures: Vec<PlaneFailure>,
}

/// Origin, axial, planar and positive fixed points, sorted by kind and location.
pub fn fixed_point_census(spec: &ModelSpec, opts: &PositiveSearchOptions) -> Result<Census> {
    let mut fixed_points = vec![origin_fixed_point(spec, opts.tol)?];
    fixed_points.extend(axial_fixed_points(spec, opts.tol)?);
    let planar = planar_fixed_points(spec, opts.tol)?;
    fixed_points.extend(planar.found);
    fixed_points.extend(positive_fixed_points(spec, opts)?);
    sort_records(&mut fixed_points);
    Ok(Census {
        fixed_points,
        planar_failures: planar.failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::DEFAULT_TOL;
    use crate::linalg::mat_from_rows;
    use crate::model::ModelParams;

    fn spec_of(a: [[f64; 3]; 3], b: f64) -> ModelSpec {
        ModelSpec::new(ModelParams {
            a,
            b,
            mu: 0.5,
            phi: 0.5,
            omega: 1.0,
        })
        .unwrap()
    }

    fn ml(alpha: f64, beta: f64) -> ModelSpec {
        ModelSpec::new(ModelParams::may_leonard(alpha, beta, 1.0, 0.5, 0.5, 1.0)).unwrap()
    }

    const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    const DETNEG: [[f64; 3]; 3] = [[1.0, 2.0, 0.5], [2.0, 1.0, 0.5], [0.5, 0.5, 1.0]];

    #[test]
    fn autonomous_equilibria() {
        let x = autonomous_positive_equilibrium(ml(1.2, 0.5).a(), 1.0).unwrap().unwrap();
        assert!((x - Vec3::repeat(1.0 / 2.7)).amax() < 1e-15);
        let x = autonomous_positive_equilibrium(&Mat3::identity(), 2.0).unwrap().unwrap();
        assert_eq!(x, Vec3::repeat(2.0));
        let a = mat_from_rows(&[[1.0, 2.0, 2.0], [2.0, 1.0, 2.0], [2.0, 2.0, 1.0]]);
        let x = autonomous_positive_equilibrium(&a, 1.0).unwrap().unwrap();
        assert!((x - Vec3::repeat(0.2)).amax() < 1e-15);
        let x = autonomous_positive_equilibrium(&mat_from_rows(&DETNEG), 1.0).unwrap().unwrap();
        assert!((x - Vec3::new(0.2, 0.2, 0.8)).amax() < 1e-15);
        let singular = mat_from_rows(&[[1.0, 1.0, 1.0]; 3]);
        assert!(matches!(
            autonomous_positive_equilibrium(&singular, 1.0),
            Err(Error::DegenerateMatrix { .. })
        ));
    }

    #[test]
    fn axial_points_sit_at_scaled_carrying_capacity() {
        let mut a = IDENTITY;
        a[1][1] = 2.0;
        let s = spec_of(a, 1.0);
        let rho = s.constants().rho_star;
        let q = axial_fixed_points(&s, DEFAULT_TOL).unwrap();
        assert!((q[0].location - Vec3::new(rho, 0.0, 0.0)).amax() < 1e-15);
        assert!((q[1].location - Vec3::new(0.0, rho / 2.0, 0.0)).amax() < 1e-15);
        assert!(q.iter().all(|r| r.residual <= FIXED_POINT_TOL));
    }

    #[test]
    fn planar_points_for_identity_matrix() {
        let s = spec_of(IDENTITY, 1.0);
        let rho = s.constants().rho_star;
        let found = planar_fixed_points(&s, DEFAULT_TOL).unwrap();
        assert!(found.failures.is_empty());
        assert_eq!(found.found.len(), 3);
        for rec in &found.found {
            let FixedPointKind::Planar(k) = rec.kind else { panic!() };
            assert_eq!(rec.location[k], 0.0);
            assert!(rec.residual <= FIXED_POINT_TOL);
            for i in (0..3).filter(|&i| i != k) {
                assert!((rec.location[i] - rho).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn may_leonard_has_no_planar_points() {
        // each 2x2 restriction has a negative solution
        let found = planar_fixed_points(&ml(1.2, 0.5), DEFAULT_TOL).unwrap();
        assert!(found.found.is_empty());
    }

    #[test]
    fn unique_positive_point_for_attracting_may_leonard() {
        let s = ml(1.2, 0.5);
        let pts = positive_fixed_points(&s, &PositiveSearchOptions::default()).unwrap();
        assert_eq!(pts.len(), 1);
        let p = &pts[0];
        assert!((p.location - Vec3::repeat(s.constants().rho_star / 2.7)).amax() < 1e-15);
        assert!(p.residual <= FIXED_POINT_TOL);
        assert_eq!(p.stability, Stability::Attractor);
        assert_eq!(p.index, 1);
        let rel = p.relations.unwrap();
        assert!(rel.holds(1e-6, 1e-5), "{rel:?}");
        assert!((rel.pair_sum + 0.117 / 1.053).abs() < 1e-9);
    }

    #[test]
    fn saddle_for_negative_determinant() {
        let s = spec_of(DETNEG, 1.0);
        let pts = positive_fixed_points(&s, &PositiveSearchOptions::default()).unwrap();
        assert_eq!(pts.len(), 1);
        let p = &pts[0];
        assert_eq!(p.count_unstable(), 1);
        assert_eq!(p.index, -1);
        assert_eq!(p.stability, Stability::Saddle);
        let smallest = p.eigenvalues[0];
        assert!(smallest.im == 0.0 && smallest.re > 0.0 && smallest.re < 1.0);
    }

    #[test]
    fn no_positive_point_without_coexistence_equilibrium() {
        let s = spec_of([[1.0, 0.5, 0.5], [2.0, 1.0, 0.5], [2.0, 0.5, 1.0]], 1.0);
        assert!(positive_fixed_points(&s, &PositiveSearchOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn theta_hat_identity() {
        let s = ml(1.2, 0.5);
        let p = Vec3::repeat(s.constants().rho_star / 2.7);
        let res = theta_hat_check(&s, &p, DEFAULT_TOL).unwrap();
        assert!(res.amax() <= 1e-6, "{res}");
        let coarse = theta_hat_check(&s, &p, 1e-6).unwrap();
        assert!(res.amax() <= coarse.amax() + 1e-12);
        assert!(matches!(
            theta_hat_check(&s, &Vec3::new(0.3, 0.2, 0.1), DEFAULT_TOL),
            Err(Error::PreconditionFailed(_))
        ));
    }

    #[test]
    fn theta_hat_identity_uses_season_length() {
        let s = ml(1.2, 0.5).with_omega(3.0).unwrap();
        let p = Vec3::repeat(s.constants().rho_star / 2.7);
        assert!(theta_hat_check(&s, &p, DEFAULT_TOL).unwrap().amax() <= 1e-6);
    }

    #[test]
    fn census_is_sorted_and_serialises() {
        let s = ml(1.2, 0.5);
        let c = fixed_point_census(&s, &PositiveSearchOptions::default()).unwrap();
        let kinds: Vec<String> = c.fixed_points.iter().map(|r| r.kind.label()).collect();
        assert_eq!(kinds, ["origin", "axial-1", "axial-2", "axial-3", "positive"]);
        assert_eq!(c.fixed_points[0].stability, Stability::Repeller);
        let json = serde_json::to_value(&c.fixed_points[4]).unwrap();
        assert_eq!(json["kind"], "positive");
        assert_eq!(json["eigenvalues"].as_array().unwrap().len(), 3);
        assert_eq!(json["index"], 1);
        assert_eq!(json["stability"], "attractor");
    }
}
