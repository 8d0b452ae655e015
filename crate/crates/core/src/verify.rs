//! The identity suite: exact relations between the Poincaré map and the
//! autonomous flow, checked numerically on one model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::{compute_invariants, invariants_of, is_class_27, permute, PERMUTATIONS};
use crate::error::{Error, Result};
use crate::fixedpoints::{autonomous_positive_equilibrium, spectrum_and_index, FixedPointKind, FixedPointRecord};
use crate::flow::{logistic_solution, lv_jacobian};
use crate::linalg::{norm_inf, Vec3};
use crate::model::ModelSpec;
use crate::orbits::{construct_multiplicity, default_orbit_seed, fixed_curve_residual, OrbitOptions};
use crate::poincare::{conjugacy_residual, poincare_map, poincare_map_with_jacobian};
use crate::quad::adaptive_simpson;
use crate::simplex::{carrying_simplex_along, flow_carrying_simplex_along, octant_rays, scaling_report};

pub const CONJUGACY_TOL: f64 = 1e-6;
pub const QUADRATURE_TOL: f64 = 1e-8;
pub const JACOBIAN_EXP_TOL: f64 = 1e-6;
pub const PAIR_SUM_REL_TOL: f64 = 1e-6;
pub const EIGENVECTOR_ANGLE_TOL: f64 = 1e-5;
pub const FIXED_CURVE_TOL: f64 = 1e-5;
pub const DETUNED_MIN_RESIDUAL: f64 = 1e-3;
pub const EQUILIBRIUM_TOL: f64 = 1e-9;
pub const MIN_SEPARATION: f64 = 0.01;
pub const SCALING_TOL: f64 = 1e-3;
/// Relative change of `omega*` used to detune the resonance.
pub const DETUNING: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    /// Measured quantity compared against `threshold`; `NaN` when not applicable.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn bound(name: &'static str, value: f64, threshold: f64, detail: String) -> Self {
        let status = if value <= threshold { Status::Pass } else { Status::Fail };
        Self {
            name,
            status,
            value,
            threshold,
            detail,
        }
    }

    fn flag(name: &'static str, ok: bool, detail: String) -> Self {
        Self {
            name,
            status: if ok { Status::Pass } else { Status::Fail },
            value: f64::NAN,
            threshold: f64::NAN,
            detail,
        }
    }

    fn skip(name: &'static str, why: &str) -> Self {
        Self {
            name,
            status: Status::Skip,
            value: f64::NAN,
            threshold: f64::NAN,
            detail: why.to_string(),
        }
    }

    fn error(name: &'static str, e: &Error) -> Self {
        Self::flag(name, false, format!("{}: {e}", e.kind()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub tol: f64,
    pub seed: u64,
    pub conjugacy_points: usize,
    pub conjugacy_powers: Vec<usize>,
    /// Rays for the simplex scaling check; 0 skips it.
    pub simplex_rays: usize,
    /// Iterations of `P` for the simplex brackets; `None` picks a default.
    pub simplex_iters: Option<usize>,
    /// Sampled points on the resonant curve.
    pub curve_samples: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            tol: crate::flow::DEFAULT_TOL,
            seed: 0,
            conjugacy_points: 20,
            conjugacy_powers: vec![1, 10, 50],
            simplex_rays: 64,
            simplex_iters: None,
            curve_samples: 8,
        }
    }
}

/// Points drawn uniformly from `[0.01, 1]^3`.
pub fn random_box_points(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Vec3::from_fn(|_, _| rng.gen_range(0.01..=1.0))).collect()
}

/// Largest conjugacy residual over all points and powers.
pub fn max_conjugacy_residual(spec: &ModelSpec, points: &[Vec3], powers: &[usize], tol: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points {
        for &k in powers {
            worst = worst.max(conjugacy_residual(spec, x, k, tol)?);
        }
    }
    Ok(worst)
}

/// `|int_0^{phi omega} rho(s, l rho*) ds - r omega / b|`.
pub fn rho_hat_quadrature_error(spec: &ModelSpec) -> f64 {
    let c = spec.constants();
    let y0 = c.l * c.rho_star;
    let q = adaptive_simpson(|s| logistic_solution(spec.b(), y0, s), 0.0, spec.good_season(), 1e-12);
    (q - c.rho_hat).abs()
}

/// `rho* x_hat` with its spectrum, index and eigenvalue relations, if the
/// flow has a positive equilibrium.
pub fn equilibrium_fixed_point(spec: &ModelSpec, tol: f64) -> Result<Option<FixedPointRecord>> {
    let Some(x_hat) = autonomous_positive_equilibrium(spec.a(), spec.b())? else {
        return Ok(None);
    };
    let location = x_hat * spec.constants().rho_star;
    let residual = (poincare_map(spec, &location, tol)? - location).amax();
    let record = FixedPointRecord {
        kind: FixedPointKind::Positive,
        location,
        eigenvalues: Vec::new(),
        index: 0,
        stability: crate::fixedpoints::Stability::Nonhyperbolic,
        residual,
        warnings: Vec::new(),
        relations: None,
    };
    spectrum_and_index(spec, record, tol).map(Some)
}

/// `||DP(rho* x_hat) - exp(Df(x_hat) rho_hat)||_inf`, if `x_hat` exists.
pub fn jacobian_exponential_error(spec: &ModelSpec, tol: f64) -> Result<Option<f64>> {
    let Some(x_hat) = autonomous_positive_equilibrium(spec.a(), spec.b())? else {
        return Ok(None);
    };
    let c = spec.constants();
    let dp = poincare_map_with_jacobian(spec, &(x_hat * c.rho_star), tol)?.1;
    let expected = (lv_jacobian(spec.a(), spec.b(), &x_hat) * c.rho_hat).exp();
    Ok(Some(norm_inf(&(dp - expected))))
}

/// Whether the index and the number of unstable eigenvalues of `DP(rho* x_hat)`
/// agree with the sign of `det A`.
pub fn index_law_holds(det: f64, record: &FixedPointRecord) -> bool {
    let unstable = record.count_unstable();
    if det < 0.0 {
        unstable == 1 && record.index == -1
    } else {
        (unstable == 0 || unstable == 2) && record.index == 1
    }
}

/// Largest spread of `zeta` over the six relabelings of the species.
pub fn zeta_permutation_spread(spec: &ModelSpec) -> f64 {
    let r = spec.constants().r;
    let zs: Vec<f64> = PERMUTATIONS
        .iter()
        .map(|s| invariants_of(&permute(spec.a(), s), r).zeta)
        .collect();
    let max = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = zs.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Outcome of the resonant-season construction on one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityReport {
    pub omega_star: f64,
    pub t_gamma: f64,
    pub rho_hat: f64,
    /// `max ||P(x) - x||_inf` over the sampled points of `rho* Gamma`.
    pub curve_residual: f64,
    /// Largest pairwise distance between sampled fixed points.
    pub max_separation: f64,
    /// Number of sampled points at distance at least [`MIN_SEPARATION`] from
    /// every other accepted point.
    pub separated_points: usize,
    /// Residual over the same points with `omega = (1 + DETUNING) omega*`.
    pub detuned_residual: f64,
    /// `||P(rho* x_hat) - rho* x_hat||_inf` at the detuned season length.
    pub detuned_equilibrium_residual: f64,
    pub points: Vec<[f64; 3]>,
}

impl MultiplicityReport {
    pub fn multiplicity_holds(&self) -> bool {
        self.curve_residual <= FIXED_CURVE_TOL && self.separated_points >= 2
    }

    pub fn sensitivity_holds(&self) -> bool {
        self.detuned_residual >= DETUNED_MIN_RESIDUAL && self.detuned_equilibrium_residual <= EQUILIBRIUM_TOL
    }
}

/// Greedy count of points pairwise at least `min_dist` apart.
pub fn separated_count(points: &[Vec3], min_dist: f64) -> usize {
    let mut kept: Vec<Vec3> = Vec::new();
    for p in points {
        if kept.iter().all(|q| (p - q).norm() >= min_dist) {
            kept.push(*p);
        }
    }
    kept.len()
}

/// Builds the resonant season length for the model's `(A, b, mu, phi)` and
/// checks the resulting curve of fixed points and its detuned counterpart.
pub fn multiplicity_report(spec: &ModelSpec, n_samples: usize, tol: f64) -> Result<MultiplicityReport> {
    let x_hat = autonomous_positive_equilibrium(spec.a(), spec.b())?
        .ok_or_else(|| Error::PreconditionFailed("no_positive_equilibrium".into()))?;
    let p = spec.params();
    let opts = OrbitOptions {
        tol,
        ..OrbitOptions::default()
    };
    let (resonant, orbit) = construct_multiplicity(p.a, p.b, p.mu, p.phi, &default_orbit_seed(&x_hat), &opts)?;
    let samples = orbit.sample(n_samples);
    let rho = resonant.constants().rho_star;
    let fixed: Vec<Vec3> = samples.iter().map(|x| x * rho).collect();
    let curve_residual = fixed_curve_residual(&resonant, &samples, tol)?;
    let mut max_separation: f64 = 0.0;
    for (i, a) in fixed.iter().enumerate() {
        for b in &fixed[i + 1..] {
            max_separation = max_separation.max((a - b).norm());
        }
    }
    let detuned = resonant.with_omega(resonant.omega() * (1.0 + DETUNING))?;
    let detuned_residual = fixed_curve_residual(&detuned, &samples, tol)?;
    let eq = x_hat * detuned.constants().rho_star;
    let detuned_equilibrium_residual = (poincare_map(&detuned, &eq, tol)? - eq).amax();
    Ok(MultiplicityReport {
        omega_star: resonant.omega(),
        t_gamma: orbit.t_gamma,
        rho_hat: resonant.constants().rho_hat,
        curve_residual,
        max_separation,
        separated_points: separated_count(&fixed, MIN_SEPARATION),
        detuned_residual,
        detuned_equilibrium_residual,
        points: fixed.iter().map(|v| (*v).into()).collect(),
    })
}

/// Runs every check that applies to `spec`.
pub fn run_suite(spec: &ModelSpec, opts: &SuiteOptions) -> Vec<Check> {
    let tol = opts.tol;
    let mut out = Vec::new();

    let pts = random_box_points(opts.conjugacy_points, opts.seed);
    out.push(match max_conjugacy_residual(spec, &pts, &opts.conjugacy_powers, tol) {
        Ok(v) => Check::bound(
            "conjugacy",
            v,
            CONJUGACY_TOL,
            format!("{} points, powers {:?}", pts.len(), opts.conjugacy_powers),
        ),
        Err(e) => Check::error("conjugacy", &e),
    });

    out.push(Check::bound(
        "rho-hat-quadrature",
        rho_hat_quadrature_error(spec),
        QUADRATURE_TOL,
        format!("rho_hat = {}", spec.constants().rho_hat),
    ));

    out.push(match jacobian_exponential_error(spec, tol) {
        Ok(Some(v)) => Check::bound("jacobian-exponential", v, JACOBIAN_EXP_TOL, String::new()),
        Ok(None) => Check::skip("jacobian-exponential", "no positive equilibrium"),
        Err(e) => Check::error("jacobian-exponential", &e),
    });

    match equilibrium_fixed_point(spec, tol) {
        Ok(Some(rec)) => {
            let rel = rec.relations.expect("positive fixed point carries relations");
            out.push(Check::bound(
                "eigen-pair-sum",
                rel.pair_sum_rel_error,
                PAIR_SUM_REL_TOL,
                format!("sum {:.6e} vs b zeta / det A = {:.6e}", rel.pair_sum, rel.expected_pair_sum),
            ));
            out.push(Check::flag(
                "eigen-pair-product",
                rel.pair_product_det > 0.0,
                format!("lambda1 lambda2 det A = {:.6e}", rel.pair_product_det),
            ));
            out.push(Check::bound(
                "eigenvector-alignment",
                rel.eigenvector_angle,
                EIGENVECTOR_ANGLE_TOL,
                "angle between the contracting eigenvector and the fixed point".into(),
            ));
            let det = spec.det();
            if rec.warnings.is_empty() {
                out.push(Check::flag(
                    "index-law",
                    index_law_holds(det, &rec),
                    format!(
                        "det A = {det}, {} unstable eigenvalue(s), index {}",
                        rec.count_unstable(),
                        rec.index
                    ),
                ));
            } else {
                out.push(Check::skip("index-law", "fixed point is not hyperbolic"));
            }
        }
        Ok(None) => {
            for name in ["eigen-pair-sum", "eigen-pair-product", "eigenvector-alignment", "index-law"] {
                out.push(Check::skip(name, "no positive equilibrium"));
            }
        }
        Err(e) => out.push(Check::error("eigen-relations", &e)),
    }

    let spread = zeta_permutation_spread(spec);
    let inv = compute_invariants(spec);
    out.push(Check::bound(
        "zeta-relabeling",
        spread,
        1e-12 * (1.0 + inv.zeta.abs()) * norm_inf(spec.a()).powi(3).max(1.0),
        format!("zeta = {}", inv.zeta),
    ));

    if is_class_27(spec).is_some() && inv.zeta != 0.0 && inv.vartheta != 0.0 {
        out.push(Check::flag(
            "vartheta-zeta-sign",
            inv.vartheta.signum() == -inv.zeta.signum(),
            format!("vartheta = {}, zeta = {}", inv.vartheta, inv.zeta),
        ));
    } else {
        out.push(Check::skip("vartheta-zeta-sign", "not class 27 or a vanishing invariant"));
    }

    let zeta_vanishes = inv.zeta.abs() <= crate::classify::zeta_threshold(spec.a());
    if spec.det() > 0.0 && zeta_vanishes {
        match multiplicity_report(spec, opts.curve_samples, tol) {
            Ok(rep) => {
                out.push(Check::flag(
                    "multiplicity",
                    rep.multiplicity_holds(),
                    format!(
                        "omega* = {}, residual {:.3e}, {} separated points",
                        rep.omega_star, rep.curve_residual, rep.separated_points
                    ),
                ));
                out.push(Check::flag(
                    "resonance-sensitivity",
                    rep.sensitivity_holds(),
                    format!(
                        "detuned residual {:.3e}, equilibrium residual {:.3e}",
                        rep.detuned_residual, rep.detuned_equilibrium_residual
                    ),
                ));
            }
            Err(e) => {
                out.push(Check::error("multiplicity", &e));
                out.push(Check::skip("resonance-sensitivity", "no resonant season length"));
            }
        }
    } else {
        out.push(Check::skip("multiplicity", "needs det A > 0 and zeta = 0"));
        out.push(Check::skip("resonance-sensitivity", "needs det A > 0 and zeta = 0"));
    }

    if opts.simplex_rays == 0 {
        out.push(Check::skip("simplex-scaling", "disabled"));
    } else {
        let rays = octant_rays(opts.simplex_rays);
        let res = carrying_simplex_along(spec, &rays, opts.simplex_iters, tol).and_then(|pm| {
            let fm = flow_carrying_simplex_along(spec, &rays, opts.simplex_iters, tol)?;
            Ok(scaling_report(spec, &pm, &fm))
        });
        out.push(match res {
            Ok(rep) if rep.shared_rays > 0 => Check::bound(
                "simplex-scaling",
                rep.max_deviation,
                SCALING_TOL,
                format!("{} shared rays, bracket width {:.3e}", rep.shared_rays, rep.max_width),
            ),
            Ok(_) => Check::flag("simplex-scaling", false, "no ray bracketed on both meshes".into()),
            Err(e) => Check::error("simplex-scaling", &e),
        });
    }
    out
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.status != Status::Fail)
}

/// Fixed-width table, one line per check.
pub fn format_table(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        let value = if c.value.is_nan() {
            String::from("-")
        } else {
            format!("{:.3e} <= {:.0e}", c.value, c.threshold)
        };
        s.push_str(&format!("{:<4}  {:<22} {:<22} {}\n", c.status.label(), c.name, value, c.detail));
    }
    s
}
