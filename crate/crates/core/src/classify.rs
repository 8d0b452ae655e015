//! Algebraic invariants of the interaction matrix and the global dynamics verdict.

use serde::Serialize;

use crate::fixedpoints::autonomous_positive_equilibrium;
use crate::linalg::{norm_inf, Mat3, Vec3};
use crate::model::ModelSpec;

/// `|zeta| <= ZETA_REL_EPS * ||A||_inf^3` counts as `zeta = 0`.
pub const ZETA_REL_EPS: f64 = 1e-10;

/// Pair denominators `a_ii a_jj - a_ij a_ji` closer to zero than this make the
/// class-26 test undecidable.
pub const PAIR_DENOM_EPS: f64 = 1e-12;

/// Ordered index pairs `(i, j)`, `i != j`, used for the six-entry pair arrays.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

/// The six permutations of `{0, 1, 2}` in lexicographic order.
pub const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn pair_index(i: usize, j: usize) -> usize {
    PAIRS.iter().position(|&p| p == (i, j)).expect("i != j")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantBundle {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub zeta: f64,
    /// `gamma_ij = r (a_ii - a_ji)` in [`PAIRS`] order.
    pub gamma: [f64; 6],
    /// `beta_ij = r (a_jj - a_ij) / (a_ii a_jj - a_ij a_ji)` in [`PAIRS`] order;
    /// NaN where the denominator vanishes.
    pub beta_pairs: [f64; 6],
    pub vartheta: f64,
    #[serde(rename = "detA")]
    pub det_a: f64,
}

impl InvariantBundle {
    pub fn gamma(&self, i: usize, j: usize) -> f64 {
        self.gamma[pair_index(i, j)]
    }

    pub fn beta_pair(&self, i: usize, j: usize) -> f64 {
        self.beta_pairs[pair_index(i, j)]
    }
}

/// Invariants of an arbitrary matrix at average growth rate `r`.
pub fn invariants_of(a: &Mat3, r: f64) -> InvariantBundle {
    let alpha: [f64; 3] = std::array::from_fn(|i| {
        let n = (i + 1) % 3;
        a[(n, n)] - a[(i, n)]
    });
    let beta: [f64; 3] = std::array::from_fn(|i| {
        let p = (i + 2) % 3;
        a[(i, p)] - a[(p, p)]
    });
    let zeta = beta[0] * beta[1] * beta[2] - alpha[0] * alpha[1] * alpha[2];
    let gamma = PAIRS.map(|(i, j)| r * (a[(i, i)] - a[(j, i)]));
    let beta_pairs = PAIRS.map(|(i, j)| {
        let den = a[(i, i)] * a[(j, j)] - a[(i, j)] * a[(j, i)];
        if den.abs() <= PAIR_DENOM_EPS {
            f64::NAN
        } else {
            r * (a[(j, j)] - a[(i, j)]) / den
        }
    });
    let w = |i: usize, j: usize| r - a[(j, i)] * r / a[(i, i)];
    let vartheta = w(0, 1) * w(1, 2) * w(2, 0) + w(1, 0) * w(0, 2) * w(2, 1);
    InvariantBundle {
        alpha,
        beta,
        zeta,
        gamma,
        beta_pairs,
        vartheta,
        det_a: a.determinant(),
    }
}

pub fn compute_invariants(spec: &ModelSpec) -> InvariantBundle {
    invariants_of(spec.a(), spec.constants().r)
}

/// `a'_ij = a_{sigma(i) sigma(j)}`.
pub fn permute(a: &Mat3, sigma: &[usize; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| a[(sigma[i], sigma[j])])
}

pub fn zeta_threshold(a: &Mat3) -> f64 {
    ZETA_REL_EPS * norm_inf(a).powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Check {
    Holds,
    Fails,
    Undecidable,
}

fn class_26_check(a: &Mat3, r: f64) -> Check {
    let inv = invariants_of(a, r);
    let g = |i, j| inv.gamma(i, j);
    let signs = g(0, 1) > 0.0
        && g(0, 2) > 0.0
        && g(1, 0) < 0.0
        && g(1, 2) < 0.0
        && g(2, 0) > 0.0
        && g(2, 1) < 0.0;
    if !signs {
        return Check::Fails;
    }
    let b = |i, j| inv.beta_pair(i, j);
    if [b(1, 2), b(2, 1), b(0, 2), b(2, 0)].iter().any(|v| v.is_nan()) {
        return Check::Undecidable;
    }
    let ii = a[(0, 1)] * b(1, 2) + a[(0, 2)] * b(2, 1) > r;
    let iii = a[(1, 0)] * b(0, 2) + a[(1, 2)] * b(2, 0) < r;
    if ii && iii {
        Check::Holds
    } else {
        Check::Fails
    }
}

fn class_27_holds(a: &Mat3, r: f64) -> bool {
    let inv = invariants_of(a, r);
    let g = |i, j| inv.gamma(i, j);
    g(0, 1) > 0.0 && g(0, 2) < 0.0 && g(1, 0) < 0.0 && g(1, 2) > 0.0 && g(2, 0) > 0.0 && g(2, 1) < 0.0
}

/// First permutation (lexicographic) under which the class-26 inequalities hold.
pub fn is_class_26(spec: &ModelSpec) -> Option<[usize; 3]> {
    class_26_matrix(spec.a(), spec.constants().r)
}

pub fn class_26_matrix(a: &Mat3, r: f64) -> Option<[usize; 3]> {
    PERMUTATIONS
        .into_iter()
        .find(|s| class_26_check(&permute(a, s), r) == Check::Holds)
}

/// True when some permutation satisfies the class-26 sign pattern but a pair
/// denominator is too close to zero to evaluate the remaining inequalities.
pub fn class_26_undecidable(a: &Mat3, r: f64) -> bool {
    PERMUTATIONS
        .iter()
        .any(|s| class_26_check(&permute(a, s), r) == Check::Undecidable)
}

/// First permutation (lexicographic) under which the class-27 sign pattern holds.
pub fn is_class_27(spec: &ModelSpec) -> Option<[usize; 3]> {
    class_27_matrix(spec.a(), spec.constants().r)
}

pub fn class_27_matrix(a: &Mat3, r: f64) -> Option<[usize; 3]> {
    PERMUTATIONS.into_iter().find(|s| class_27_holds(&permute(a, s), r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcase {
    /// `zeta < 0`
    A,
    /// `zeta > 0`
    B,
    /// `zeta = 0` within tolerance
    C,
}

impl Subcase {
    pub fn letter(self) -> &'static str {
        match self {
            Subcase::A => "a",
            Subcase::B => "b",
            Subcase::C => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Attractor,
    Repeller,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassLabel {
    NoPositiveFixedPoint,
    Classes19To25,
    Class26(Subcase),
    Class27(Subcase),
    Classes28To33(Stability),
    Unresolved,
}

impl ClassLabel {
    pub fn class_code(&self) -> &'static str {
        match self {
            ClassLabel::NoPositiveFixedPoint => "none",
            ClassLabel::Classes19To25 => "19-25",
            ClassLabel::Class26(_) => "26",
            ClassLabel::Class27(_) => "27",
            ClassLabel::Classes28To33(_) => "28-33",
            ClassLabel::Unresolved => "unresolved",
        }
    }

    pub fn subcase(&self) -> Option<&'static str> {
        match self {
            ClassLabel::Class26(s) | ClassLabel::Class27(s) => Some(s.letter()),
            ClassLabel::Classes28To33(Stability::Attractor) => Some("attractor"),
            ClassLabel::Classes28To33(Stability::Repeller) => Some("repeller"),
            _ => None,
        }
    }

    /// Machine-readable code for the predicted global behaviour.
    pub fn prediction(&self) -> &'static str {
        match self {
            ClassLabel::NoPositiveFixedPoint => "trivial-dynamics-no-positive-fixed-point",
            ClassLabel::Classes19To25 => "unique-positive-fixed-point-saddle",
            ClassLabel::Class26(Subcase::A) => "positive-fixed-point-attractor-coexisting-with-axial-attractor",
            ClassLabel::Class26(Subcase::B) => "positive-fixed-point-repeller-axial-attractor",
            ClassLabel::Class26(Subcase::C) => "invariant-closed-curves-inside-heteroclinic-cycle",
            ClassLabel::Class27(Subcase::A) => "positive-fixed-point-globally-attracting",
            ClassLabel::Class27(Subcase::B) => "heteroclinic-cycle-globally-attracting",
            ClassLabel::Class27(Subcase::C) => "continuum-of-invariant-closed-curves",
            ClassLabel::Classes28To33(Stability::Attractor) => "unique-positive-fixed-point-attractor",
            ClassLabel::Classes28To33(Stability::Repeller) => "unique-positive-fixed-point-repeller",
            ClassLabel::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evidence {
    pub invariants: InvariantBundle,
    /// Positive equilibrium of the autonomous flow, if any.
    pub positive_equilibrium: Option<[f64; 3]>,
    /// The corresponding positive fixed point `rho* x_hat` of the map.
    pub positive_fixed_point: Option<[f64; 3]>,
    /// One-based permutation that realised class 26 or 27 membership.
    pub permutation: Option<[usize; 3]>,
    pub zeta_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsVerdict {
    pub class_label: ClassLabel,
    pub predicted_behavior: &'static str,
    pub evidence: Evidence,
}

/// Flat JSON layout of a verdict.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictRecord {
    pub class: &'static str,
    pub subcase: Option<&'static str>,
    pub zeta: f64,
    pub vartheta: f64,
    #[serde(rename = "detA")]
    pub det_a: f64,
    pub gamma: [f64; 6],
    pub prediction: &'static str,
    pub permutation: Option<[usize; 3]>,
    pub positive_fixed_point: Option<[f64; 3]>,
}

impl DynamicsVerdict {
    pub fn record(&self) -> VerdictRecord {
        let inv = &self.evidence.invariants;
        VerdictRecord {
            class: self.class_label.class_code(),
            subcase: self.class_label.subcase(),
            zeta: inv.zeta,
            vartheta: inv.vartheta,
            det_a: inv.det_a,
            gamma: inv.gamma,
            prediction: self.predicted_behavior,
            permutation: self.evidence.permutation,
            positive_fixed_point: self.evidence.positive_fixed_point,
        }
    }
}

fn subcase_of(zeta: f64, eps: f64) -> Subcase {
    if zeta.abs() <= eps {
        Subcase::C
    } else if zeta < 0.0 {
        Subcase::A
    } else {
        Subcase::B
    }
}

pub fn dynamics_verdict(spec: &ModelSpec) -> DynamicsVerdict {
    let a = spec.a();
    let r = spec.constants().r;
    let inv = compute_invariants(spec);
    let eps = zeta_threshold(a);
    let x_hat: Option<Vec3> = autonomous_positive_equilibrium(a, spec.b()).ok().flatten();
    let mut permutation = None;
    let one_based = |s: [usize; 3]| s.map(|i| i + 1);

    let class_label = if x_hat.is_none() {
        ClassLabel::NoPositiveFixedPoint
    } else if inv.det_a < 0.0 {
        ClassLabel::Classes19To25
    } else if let Some(s) = class_26_matrix(a, r) {
        permutation = Some(one_based(s));
        ClassLabel::Class26(subcase_of(inv.zeta, eps))
    } else if let Some(s) = class_27_matrix(a, r) {
        permutation = Some(one_based(s));
        ClassLabel::Class27(subcase_of(inv.zeta, eps))
    } else if class_26_undecidable(a, r) {
        ClassLabel::Unresolved
    } else if inv.det_a > 0.0 && inv.zeta.abs() > eps {
        ClassLabel::Classes28To33(if inv.zeta < 0.0 {
            Stability::Attractor
        } else {
            Stability::Repeller
        })
    } else {
        ClassLabel::Unresolved
    };

    let rho_star = spec.constants().rho_star;
    DynamicsVerdict {
        class_label,
        predicted_behavior: class_label.prediction(),
        evidence: Evidence {
            invariants: inv,
            positive_equilibrium: x_hat.map(Into::into),
            positive_fixed_point: x_hat.map(|x| (x * rho_star).into()),
            permutation,
            zeta_threshold: eps,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use proptest::prelude::*;

    fn spec_of(a: [[f64; 3]; 3]) -> ModelSpec {
        ModelSpec::new(ModelParams {
            a,
            b: 1.0,
            mu: 0.5,
            phi: 0.5,
            omega: 1.0,
        })
        .unwrap()
    }

    fn ml(alpha: f64, beta: f64) -> ModelSpec {
        ModelSpec::new(ModelParams::may_leonard(alpha, beta, 1.0, 0.5, 0.5, 1.0)).unwrap()
    }

    const CLASS26: [[f64; 3]; 3] = [[1.8, 2.9, 0.6], [0.7, 2.1, 2.2], [1.5, 2.3, 1.6]];

    #[test]
    fn may_leonard_invariants() {
        let inv = compute_invariants(&ml(1.5, 0.5));
        assert_eq!(inv.zeta, 0.0);
        let inv = compute_invariants(&ml(1.2, 0.5));
        assert!(inv.alpha.iter().all(|a| (a + 0.2).abs() < 1e-15));
        assert!(inv.beta.iter().all(|b| (b + 0.5).abs() < 1e-15));
        assert!((inv.zeta + 0.117).abs() < 1e-15);
        // 0.25^3 * 0.117
        assert!((inv.vartheta - 0.001_828_125).abs() < 1e-15);
        assert!((inv.det_a - 1.053).abs() < 1e-12);
        let inv = compute_invariants(&ml(1.5, 0.8));
        assert!((inv.zeta - 0.117).abs() < 1e-15);
        assert!((inv.vartheta + 0.001_828_125).abs() < 1e-15);
    }

    #[test]
    fn identity_invariants() {
        let inv = compute_invariants(&spec_of([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]));
        assert_eq!(inv.alpha, [1.0; 3]);
        assert_eq!(inv.beta, [-1.0; 3]);
        assert_eq!(inv.zeta, -2.0);
        assert!((inv.vartheta - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn class_27_membership() {
        assert_eq!(is_class_27(&ml(1.2, 0.5)), Some([0, 1, 2]));
        assert_eq!(is_class_27(&ml(0.5, 0.5)), None);
        assert_eq!(is_class_27(&spec_of([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])), None);
        assert_eq!(is_class_26(&ml(1.2, 0.5)), None);
    }

    #[test]
    fn class_26_membership() {
        let s = spec_of(CLASS26);
        assert_eq!(is_class_26(&s), Some([0, 1, 2]));
        assert_eq!(is_class_27(&s), None);
        // same gamma signs, condition (ii) broken by shrinking a_12 and a_13 contributions
        let mut broken = CLASS26;
        broken[0][1] = 2.2;
        broken[0][2] = 0.1;
        let inv = invariants_of(&crate::linalg::mat_from_rows(&broken), 0.25);
        assert!(inv.gamma(0, 1) > 0.0 && inv.gamma(1, 0) < 0.0 && inv.gamma(1, 2) < 0.0);
        assert_eq!(is_class_26(&spec_of(broken)), None);
    }

    #[test]
    fn class_26_found_under_relabelling() {
        let a = crate::linalg::mat_from_rows(&CLASS26);
        let relabelled = permute(&a, &[2, 0, 1]);
        let found = class_26_matrix(&relabelled, 0.25).unwrap();
        assert_eq!(permute(&relabelled, &found), a);
    }

    #[test]
    fn verdicts_for_fixtures() {
        let v = dynamics_verdict(&ml(1.2, 0.5));
        assert_eq!(v.class_label, ClassLabel::Class27(Subcase::A));
        assert_eq!(v.predicted_behavior, "positive-fixed-point-globally-attracting");
        assert_eq!(dynamics_verdict(&ml(1.5, 0.8)).class_label, ClassLabel::Class27(Subcase::B));
        assert_eq!(dynamics_verdict(&ml(1.5, 0.5)).class_label, ClassLabel::Class27(Subcase::C));
        let v = dynamics_verdict(&spec_of([[1.0, 2.0, 0.5], [2.0, 1.0, 0.5], [0.5, 0.5, 1.0]]));
        assert_eq!(v.class_label, ClassLabel::Classes19To25);
        assert_eq!(dynamics_verdict(&spec_of(CLASS26)).class_label, ClassLabel::Class26(Subcase::B));
        // strong self-limitation: attractor
        let v = dynamics_verdict(&ml(0.5, 0.3));
        assert_eq!(v.class_label, ClassLabel::Classes28To33(Stability::Attractor));
        // no coexistence equilibrium: species 1 dominates everything
        let v = dynamics_verdict(&spec_of([[1.0, 0.5, 0.5], [2.0, 1.0, 0.5], [2.0, 0.5, 1.0]]));
        assert_eq!(v.class_label, ClassLabel::NoPositiveFixedPoint);
    }

    #[test]
    fn verdict_record_layout() {
        let rec = dynamics_verdict(&ml(1.2, 0.5)).record();
        let json = serde_json::to_value(&rec).unwrap();
        assert_eq!(json["class"], "27");
        assert_eq!(json["subcase"], "a");
        assert!(json["detA"].is_number());
        assert_eq!(json["gamma"].as_array().unwrap().len(), 6);
    }

    fn class27_matrix() -> impl Strategy<Value = Mat3> {
        let lo = 0.05..0.95f64;
        let hi = 1.05..3.0f64;
        (
            prop::array::uniform3(0.3..2.0f64),
            (lo.clone(), hi.clone(), lo.clone(), hi.clone(), lo, hi),
        )
            .prop_map(|(d, (f21, f31, f32, f12, f13, f23))| {
                // gamma_ij = r (a_ii - a_ji): a_21 < a_11 < a_31, a_32 < a_22 < a_12, a_13 < a_33 < a_23
                let mut a = Mat3::from_diagonal(&Vec3::from(d));
                a[(1, 0)] = f21 * d[0];
                a[(2, 0)] = f31 * d[0];
                a[(2, 1)] = f32 * d[1];
                a[(0, 1)] = f12 * d[1];
                a[(0, 2)] = f13 * d[2];
                a[(1, 2)] = f23 * d[2];
                a
            })
    }

    proptest! {
        #[test]
        fn vartheta_and_zeta_have_opposite_signs_in_class_27(a in class27_matrix(), r in 0.05..2.0f64) {
            prop_assert!(class_27_matrix(&a, r).is_some());
            let inv = invariants_of(&a, r);
            prop_assume!(inv.zeta.abs() > 1e-12);
            prop_assert_eq!(inv.vartheta.signum(), -inv.zeta.signum());
        }

        #[test]
        fn zeta_is_invariant_under_relabelling(
            rows in prop::array::uniform3(prop::array::uniform3(0.1..3.0f64)),
        ) {
            let a = crate::linalg::mat_from_rows(&rows);
            let z = invariants_of(&a, 1.0).zeta;
            for s in PERMUTATIONS {
                let zs = invariants_of(&permute(&a, &s), 1.0).zeta;
                prop_assert!((zs - z).abs() <= 1e-12 * (1.0 + z.abs()));
            }
        }

        #[test]
        fn membership_is_permutation_invariant(a in class27_matrix(), s in 0usize..6) {
            let relabelled = permute(&a, &PERMUTATIONS[s]);
            prop_assert!(class_27_matrix(&relabelled, 0.3).is_some());
        }
    }
}
