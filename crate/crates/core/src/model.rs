//! Model parameters, closed-form seasonal constants and admissibility checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::logistic_solution;
use crate::linalg::{mat_from_rows, norm_inf, Mat3};

/// Relative singularity threshold: `|det A| <= DET_REL_EPS * ||A||_inf^3` is degenerate.
pub const DET_REL_EPS: f64 = 1e-9;

/// Raw parameter record, exactly as stored in a model file.
///
/// Use [`validate`] for a non-failing report and [`ModelSpec::new`] to obtain a
/// checked instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "A")]
    pub a: [[f64; 3]; 3],
    pub b: f64,
    pub mu: f64,
    pub phi: f64,
    pub omega: f64,
}

impl ModelParams {
    /// May–Leonard interaction matrix: unit diagonal, `a_12 = a_23 = a_31 = alpha`,
    /// `a_13 = a_21 = a_32 = beta`.
    pub fn may_leonard(alpha: f64, beta: f64, b: f64, mu: f64, phi: f64, omega: f64) -> Self {
        Self {
            a: [[1.0, alpha, beta], [beta, 1.0, alpha], [alpha, beta, 1.0]],
            b,
            mu,
            phi,
            omega,
        }
    }

    pub fn matrix(&self) -> Mat3 {
        mat_from_rows(&self.a)
    }

    /// Average growth rate `r = b phi - mu (1 - phi)`.
    pub fn r(&self) -> f64 {
        self.b * self.phi - self.mu * (1.0 - self.phi)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

/// Constants derived once from the seasonal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedConstants {
    /// Average growth rate.
    pub r: f64,
    /// Bad-season decay factor `exp(-mu (1 - phi) omega)`.
    pub l: f64,
    /// Positive fixed point of the seasonal logistic map.
    pub rho_star: f64,
    /// Accumulated logistic time `r omega / b`.
    pub rho_hat: f64,
}

/// A validated model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    params: ModelParams,
    a: Mat3,
    constants: DerivedConstants,
}

impl ModelSpec {
    pub fn new(params: ModelParams) -> Result<Self> {
        check_parameters(&params)?;
        let constants = derive_constants(&params)?;
        Ok(Self {
            a: params.matrix(),
            params,
            constants,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(ModelParams::from_json(text)?)
    }

    /// Same model with a different season length.
    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(ModelParams {
            omega,
            ..self.params.clone()
        })
    }

    /// Same model with externally supplied constants, e.g. a saved `derive` result.
    pub fn with_constants(&self, constants: DerivedConstants) -> Result<Self> {
        let DerivedConstants { r, l, rho_star, rho_hat } = constants;
        if !(r > 0.0) {
            return Err(Error::RInvalid { r });
        }
        if !(l > 0.0 && l <= 1.0 && rho_star > 0.0 && rho_hat > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "constants out of range: l = {l}, rho_star = {rho_star}, rho_hat = {rho_hat}"
            )));
        }
        Ok(Self {
            constants,
            ..self.clone()
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn a(&self) -> &Mat3 {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.params.b
    }

    pub fn mu(&self) -> f64 {
        self.params.mu
    }

    pub fn phi(&self) -> f64 {
        self.params.phi
    }

    pub fn omega(&self) -> f64 {
        self.params.omega
    }

    /// Length of the good season, `phi omega`.
    pub fn good_season(&self) -> f64 {
        self.params.phi * self.params.omega
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.constants
    }

    pub fn det(&self) -> f64 {
        self.a.determinant()
    }

    /// Seasonal logistic map `M(y) = rho(phi omega, l y)`.
    pub fn logistic_map(&self, y: f64) -> f64 {
        logistic_solution(self.b(), self.constants.l * y, self.good_season())
    }
}

fn check_parameters(p: &ModelParams) -> Result<()> {
    let scalars = [("b", p.b), ("mu", p.mu), ("phi", p.phi), ("omega", p.omega)];
    for (name, v) in scalars {
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} is not finite")));
        }
    }
    if p.a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("A has a non-finite entry".into()));
    }
    if p.b <= 0.0 {
        return Err(Error::InvalidParameter(format!("b = {} must be positive", p.b)));
    }
    if p.mu <= 0.0 {
        return Err(Error::InvalidParameter(format!("mu = {} must be positive", p.mu)));
    }
    if !(p.phi > 0.0 && p.phi <= 1.0) {
        return Err(Error::InvalidParameter(format!("phi = {} must lie in (0, 1]", p.phi)));
    }
    if p.omega <= 0.0 {
        return Err(Error::InvalidParameter(format!("omega = {} must be positive", p.omega)));
    }
    for i in 0..3 {
        if p.a[i][i] <= 0.0 {
            return Err(Error::InvalidParameter(format!("a_{0}{0} must be positive", i + 1)));
        }
        for j in 0..3 {
            if p.a[i][j] < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "a_{}{} = {} is negative",
                    i + 1,
                    j + 1,
                    p.a[i][j]
                )));
            }
        }
    }
    Ok(())
}

/// Closed-form constants `(r, l, rho_star, rho_hat)`.
pub fn derive_constants(p: &ModelParams) -> Result<DerivedConstants> {
    let r = p.r();
    if !(r > 0.0) {
        return Err(Error::RInvalid { r });
    }
    let a = p.matrix();
    let det = a.determinant();
    let threshold = det_threshold(&a);
    if det.abs() <= threshold {
        return Err(Error::DegenerateMatrix { det, threshold });
    }
    let bad = p.mu * (1.0 - p.phi) * p.omega;
    let good = p.b * p.phi * p.omega;
    let l = (-bad).exp();
    // (1 - e^{bad - good}) / (1 - e^{-good}), both factors via expm1 for accuracy
    let rho_star = (bad - good).exp_m1() / (-good).exp_m1();
    let rho_hat = r * p.omega / p.b;
    Ok(DerivedConstants {
        r,
        l,
        rho_star,
        rho_hat,
    })
}

pub fn det_threshold(a: &Mat3) -> f64 {
    DET_REL_EPS * norm_inf(a).powi(3)
}

/// Admissibility report. Never fails and never mutates its input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub r: f64,
    pub r_positive: bool,
    pub det: f64,
    pub det_sign: i8,
    pub det_threshold: f64,
    pub nonsingular: bool,
    /// Entries of `A` that are not strictly positive, e.g. `"a_12 = 0"`.
    pub positivity_violations: Vec<String>,
    /// Scalar parameters outside their domain.
    pub parameter_violations: Vec<String>,
}

impl Diagnostics {
    /// Whether [`ModelSpec::new`] would accept these parameters.
    pub fn admissible(&self) -> bool {
        self.r_positive && self.nonsingular && self.parameter_violations.is_empty()
    }
}

pub fn validate(p: &ModelParams) -> Diagnostics {
    let a = p.matrix();
    let det = a.determinant();
    let det_threshold = det_threshold(&a);
    let mut positivity_violations = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if !(p.a[i][j] > 0.0) {
                positivity_violations.push(format!("a_{}{} = {}", i + 1, j + 1, p.a[i][j]));
            }
        }
    }
    let parameter_violations = match check_parameters(p) {
        Ok(()) => Vec::new(),
        Err(e) => vec![e.to_string()],
    };
    let r = p.r();
    Diagnostics {
        r,
        r_positive: r > 0.0,
        det,
        det_sign: if det > 0.0 {
            1
        } else if det < 0.0 {
            -1
        } else {
            0
        },
        det_threshold,
        nonsingular: det.abs() > det_threshold,
        positivity_violations,
        parameter_violations,
    }
}
