//! Acceptance criteria 1-10, run in sequence with one PASS/FAIL line each.
//!
//! Built with `harness = false` so the lines are printed even on success and
//! the runtime budgets are measured without other tests competing for cores.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seasonal_lv::classify::{class_27_matrix, invariants_of};
use seasonal_lv::fate::Fate;
use seasonal_lv::fixedpoints::autonomous_positive_equilibrium;
use seasonal_lv::flow::DEFAULT_TOL;
use seasonal_lv::linalg::{Mat3, Vec3};
use seasonal_lv::orbits::{construct_multiplicity, default_orbit_seed, OrbitOptions};
use seasonal_lv::poincare::{poincare_map, poincare_power};
use seasonal_lv::simplex::{
    carrying_simplex_along, flow_carrying_simplex_along, octant_rays, sample_portrait, scaling_report,
};
use seasonal_lv::verify::{
    equilibrium_fixed_point, index_law_holds, jacobian_exponential_error, max_conjugacy_residual,
    multiplicity_report, random_box_points, rho_hat_quadrature_error,
};
use seasonal_lv::ModelSpec;

const FIXTURES: [&str; 6] = [
    "mayleonard-1.2-0.5",
    "mayleonard-1.5-0.8",
    "mayleonard-1.5-0.5",
    "identity",
    "detneg",
    "class26",
];

fn fixture(name: &str) -> ModelSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    ModelSpec::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, budget: Option<u64>) -> bool {
    budget.map_or(true, |s| elapsed <= Duration::from_secs(s))
}

fn conjugacy() -> Outcome {
    let spec = fixture("mayleonard-1.5-0.5");
    let pts = random_box_points(20, 1);
    match max_conjugacy_residual(&spec, &pts, &[1, 10, 50], DEFAULT_TOL) {
        Ok(v) => outcome(v <= 1e-6, format!("max residual {v:.3e} (<= 1e-6)")),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn rho_hat_identity() -> Outcome {
    let worst = FIXTURES
        .iter()
        .map(|n| rho_hat_quadrature_error(&fixture(n)))
        .fold(0.0, f64::max);
    outcome(worst <= 1e-8, format!("max error {worst:.3e} over {} fixtures (<= 1e-8)", FIXTURES.len()))
}

fn jacobian_exponential() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for n in FIXTURES {
        match jacobian_exponential_error(&fixture(n), DEFAULT_TOL) {
            Ok(Some(v)) => {
                used += 1;
                worst = worst.max(v);
            }
            Ok(None) => {}
            Err(e) => return outcome(false, format!("{n}: {e}")),
        }
    }
    outcome(
        used > 0 && worst <= 1e-6,
        format!("max error {worst:.3e} over {used} fixtures with a positive equilibrium (<= 1e-6)"),
    )
}

fn eigen_relations() -> Outcome {
    let mut used = 0;
    let mut worst_sum: f64 = 0.0;
    let mut worst_angle: f64 = 0.0;
    let mut products_positive = true;
    for n in FIXTURES {
        let spec = fixture(n);
        match equilibrium_fixed_point(&spec, DEFAULT_TOL) {
            Ok(Some(rec)) => {
                let rel = rec.relations.expect("relations at positive fixed point");
                used += 1;
                worst_sum = worst_sum.max(rel.pair_sum_rel_error);
                worst_angle = worst_angle.max(rel.eigenvector_angle);
                products_positive &= rel.pair_product_det > 0.0;
            }
            Ok(None) => {}
            Err(e) => return outcome(false, format!("{n}: {e}")),
        }
    }
    outcome(
        used > 0 && worst_sum <= 1e-6 && worst_angle <= 1e-5 && products_positive,
        format!(
            "{used} fixtures: pair sum rel error {worst_sum:.3e}, eigenvector angle {worst_angle:.3e}, \
             lambda1 lambda2 det A > 0: {products_positive}"
        ),
    )
}

fn multiplicity_and_resonance() -> (Outcome, Outcome) {
    let spec = fixture("mayleonard-1.5-0.5");
    match multiplicity_report(&spec, 8, DEFAULT_TOL) {
        Ok(rep) => {
            let eta = rep.rho_hat / rep.t_gamma;
            (
                outcome(
                    rep.multiplicity_holds() && (eta - 1.0).abs() <= 1e-9,
                    format!(
                        "omega* = {:.6}, T_gamma = {:.6}, rho_hat / T_gamma = {eta:.12}, curve residual {:.3e} (<= 1e-5), \
                         {} points pairwise >= 0.01 apart",
                        rep.omega_star, rep.t_gamma, rep.curve_residual, rep.separated_points
                    ),
                ),
                outcome(
                    rep.sensitivity_holds(),
                    format!(
                        "detuned curve residual {:.3e} (>= 1e-3), equilibrium residual {:.3e} (<= 1e-9)",
                        rep.detuned_residual, rep.detuned_equilibrium_residual
                    ),
                ),
            )
        }
        Err(e) => (outcome(false, e.to_string()), outcome(false, "no resonant spec")),
    }
}

fn trichotomy() -> Outcome {
    // (a) attracting positive fixed point
    let a = fixture("mayleonard-1.2-0.5");
    let x_hat = autonomous_positive_equilibrium(a.a(), a.b()).unwrap().unwrap();
    let target = x_hat * a.constants().rho_star;
    let (converged, a_detail) = match sample_portrait(&a, 100, 5000, 11, DEFAULT_TOL) {
        Ok(p) => {
            let hits = p
                .traces
                .iter()
                .filter(|t| match t.fate {
                    Fate::ConvergedTo { limit } => (Vec3::from(limit) - target).amax() <= 1e-5,
                    _ => false,
                })
                .count();
            (hits, format!("(a) {hits}/100 converge to rho* x_hat"))
        }
        Err(e) => (0, format!("(a) {e}")),
    };

    // (b) attracting heteroclinic cycle
    let b = fixture("mayleonard-1.5-0.8");
    let (boundary, b_detail) = match sample_portrait(&b, 100, 5000, 12, DEFAULT_TOL) {
        Ok(p) => {
            let hits = p.traces.iter().filter(|t| t.min_coordinate < 1e-3).count();
            (hits, format!("(b) {hits}/100 reach min coordinate < 1e-3"))
        }
        Err(e) => (0, format!("(b) {e}")),
    };

    // (c) half the resonant season length: period-two points
    let c = fixture("mayleonard-1.5-0.5");
    let p = c.params();
    let x_hat = autonomous_positive_equilibrium(c.a(), c.b()).unwrap().unwrap();
    let opts = OrbitOptions::default();
    let (c_ok, c_detail) = match construct_multiplicity(p.a, p.b, p.mu, p.phi, &default_orbit_seed(&x_hat), &opts)
        .and_then(|(res, orbit)| {
            let half = res.with_omega(res.omega() / 2.0)?;
            let rho = half.constants().rho_star;
            let mut p2: f64 = 0.0;
            let mut p1 = f64::INFINITY;
            for x in orbit.sample(8) {
                let x = x * rho;
                p2 = p2.max((poincare_power(&half, &x, 2, DEFAULT_TOL)? - x).amax());
                p1 = p1.min((poincare_map(&half, &x, DEFAULT_TOL)? - x).amax());
            }
            Ok((p1, p2))
        }) {
        Ok((p1, p2)) => (
            p2 <= 1e-6 && p1 >= 1e-3,
            format!("(c) ||P^2 x - x|| <= {p2:.3e}, ||P x - x|| >= {p1:.3e}"),
        ),
        Err(e) => (false, format!("(c) {e}")),
    };

    outcome(
        converged == 100 && boundary >= 95 && c_ok,
        format!("{a_detail}; {b_detail}; {c_detail}"),
    )
}

fn sign_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let r = fixture("mayleonard-1.2-0.5").constants().r;
    let mut found = 0;
    let mut agree = 0;
    let mut draws = 0;
    while found < 64 && draws < 2_000_000 {
        draws += 1;
        let a = Mat3::from_fn(|_, _| rng.gen_range(0.1..3.0));
        if class_27_matrix(&a, r).is_none() {
            continue;
        }
        let inv = invariants_of(&a, r);
        if inv.zeta == 0.0 || inv.vartheta == 0.0 {
            continue;
        }
        found += 1;
        if inv.vartheta.signum() == -inv.zeta.signum() {
            agree += 1;
        }
    }
    outcome(
        found >= 50 && agree == found,
        format!("{agree}/{found} class-27 matrices with sgn vartheta = -sgn zeta ({draws} draws)"),
    )
}

fn index_law() -> Outcome {
    let mut neg = 0;
    let mut pos = 0;
    let mut bad = Vec::new();
    for n in FIXTURES {
        let spec = fixture(n);
        match equilibrium_fixed_point(&spec, DEFAULT_TOL) {
            Ok(Some(rec)) => {
                if spec.det() < 0.0 {
                    neg += 1;
                } else {
                    pos += 1;
                }
                if !index_law_holds(spec.det(), &rec) {
                    bad.push(format!("{n} (unstable {}, index {})", rec.count_unstable(), rec.index));
                }
            }
            Ok(None) => {}
            Err(e) => bad.push(format!("{n}: {e}")),
        }
    }
    outcome(
        neg > 0 && pos > 0 && bad.is_empty(),
        format!("{neg} det A < 0 and {pos} det A > 0 fixtures checked; violations: {bad:?}"),
    )
}

fn simplex_scaling() -> Outcome {
    let spec = fixture("mayleonard-1.5-0.5");
    let rays = octant_rays(256);
    let res = carrying_simplex_along(&spec, &rays, None, DEFAULT_TOL).and_then(|pm| {
        let fm = flow_carrying_simplex_along(&spec, &rays, None, DEFAULT_TOL)?;
        Ok((scaling_report(&spec, &pm, &fm), pm.failures.len() + fm.failures.len()))
    });
    match res {
        Ok((rep, failures)) => outcome(
            rep.shared_rays == 256 && rep.max_deviation <= 1e-3,
            format!(
                "{} shared rays, max deviation {:.3e} (<= 1e-3), bracket width {:.3e}, {failures} ray failures",
                rep.shared_rays, rep.max_deviation, rep.max_width
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    let mut out = std::io::stdout();
    let mut failed = Vec::new();
    let mut report = |n: u32, name: &str, budget: Option<u64>, (o, elapsed): (Outcome, Duration)| {
        let ok = o.ok && within_budget(elapsed, budget);
        let budget_note = budget.map_or(String::new(), |s| format!(", budget {s} s"));
        writeln!(
            out,
            "criterion {n:>2} {name:<24} {}  {}  [{:.1} s{budget_note}]",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        )
        .ok();
        if !ok {
            failed.push(n);
        }
    };

    report(1, "conjugacy", Some(10), timed(conjugacy));
    report(2, "rho-hat identity", Some(1), timed(rho_hat_identity));
    report(3, "jacobian exponential", None, timed(jacobian_exponential));
    report(4, "eigenvalue relations", None, timed(eigen_relations));
    // 6 reuses the construction of 5, whose time is charged to 5
    let ((mult, reso), elapsed) = timed(multiplicity_and_resonance);
    report(5, "multiplicity", Some(60), (mult, elapsed));
    report(6, "resonance sensitivity", None, (reso, Duration::ZERO));
    report(7, "class-27 trichotomy", None, timed(trichotomy));
    report(8, "vartheta-zeta sign law", None, timed(sign_law));
    report(9, "index law", None, timed(index_law));
    report(10, "simplex scaling", Some(120), timed(simplex_scaling));
    drop(report);

    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
