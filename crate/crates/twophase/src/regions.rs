//! Physical parameters, the admissible resolvent regions and the uniqueness
//! inequalities that make the reduced problem uniquely solvable.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Constant coefficients of the linearized model and the region parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub nu_plus: f64,
    pub gamma1_plus: f64,
    pub gamma1_minus: f64,
    pub gamma2_plus: f64,
    /// Layer depth.
    pub b: f64,
    pub eps: f64,
    pub lambda0: f64,
    pub delta0: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            mu_plus: 1.0,
            mu_minus: 1.0,
            nu_plus: 1.0,
            gamma1_plus: 1.0,
            gamma1_minus: 1.0,
            gamma2_plus: 1.0,
            b: 1.0,
            eps: PI / 4.0,
            lambda0: 1.0,
            delta0: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("mu_plus", self.mu_plus),
            ("mu_minus", self.mu_minus),
            ("nu_plus", self.nu_plus),
            ("gamma1_plus", self.gamma1_plus),
            ("gamma1_minus", self.gamma1_minus),
            ("gamma2_plus", self.gamma2_plus),
            ("b", self.b),
            ("eps", self.eps),
            ("lambda0", self.lambda0),
            ("delta0", self.delta0),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.eps >= PI / 2.0 {
            return Err(Error::InvalidParams(format!("eps must be below pi/2, got {}", self.eps)));
        }
        Ok(())
    }

    /// `gamma1_plus * gamma2_plus / nu_plus`, the centre offset of the excluded disc.
    pub fn coupling(&self) -> f64 {
        self.gamma1_plus * self.gamma2_plus / self.nu_plus
    }
}

/// Which of the three admissible (lambda, delta) regimes a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionCase {
    /// `delta = gamma1_plus * gamma2_plus / lambda`.
    C1,
    /// Fixed shift with negative real part.
    C2,
    /// Fixed shift with nonnegative real part.
    C3,
}

impl std::fmt::Display for RegionCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RegionCase::C1 => "C1",
            RegionCase::C2 => "C2",
            RegionCase::C3 => "C3",
        };
        f.write_str(s)
    }
}

/// Resolvent parameter, shift and tangential frequency of one Fourier mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda: C64,
    pub delta: C64,
    pub xi: Vec<f64>,
    pub case: RegionCase,
}

impl SpectralPoint {
    /// Builds a point, deriving or validating the shift for `case`.
    pub fn new(lambda: C64, xi: &[f64], case: RegionCase, params: &PhysicalParams, delta_in: Option<C64>) -> Result<Self> {
        let delta = delta_of(lambda, case, params, delta_in)?;
        Ok(Self { lambda, delta, xi: xi.to_vec(), case })
    }

    /// Case C1 point with `delta` tied to `lambda`.
    pub fn c1(lambda: C64, xi: &[f64], params: &PhysicalParams) -> Result<Self> {
        Self::new(lambda, xi, RegionCase::C1, params, None)
    }

    /// Unchecked constructor; the shift is taken as given.
    pub fn raw(lambda: C64, delta: C64, xi: &[f64], case: RegionCase) -> Self {
        Self { lambda, delta, xi: xi.to_vec(), case }
    }

    /// `|xi'|`.
    pub fn a(&self) -> f64 {
        self.xi.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Spatial dimension `N`.
    pub fn dim(&self) -> usize {
        self.xi.len() + 1
    }

    /// Same point with a new `lambda`; in case C1 the shift follows.
    pub fn with_lambda(&self, lambda: C64, params: &PhysicalParams) -> Self {
        let delta = match self.case {
            RegionCase::C1 => params.gamma1_plus * params.gamma2_plus / lambda,
            _ => self.delta,
        };
        Self { lambda, delta, xi: self.xi.clone(), case: self.case }
    }

    pub fn with_xi(&self, xi: &[f64]) -> Self {
        Self { xi: xi.to_vec(), ..self.clone() }
    }

    /// `|lambda|^{1/2} + A`, the natural scale of the symbols.
    pub fn scale(&self) -> f64 {
        self.lambda.norm().sqrt() + self.a()
    }
}

fn in_sector(z: C64, eps: f64) -> bool {
    z != C64::new(0.0, 0.0) && z.arg().abs() <= PI - eps
}

/// The shift `delta` for `lambda` in the given case.
pub fn delta_of(lambda: C64, case: RegionCase, params: &PhysicalParams, delta_in: Option<C64>) -> Result<C64> {
    if lambda.norm() == 0.0 {
        return Err(Error::ZeroLambda);
    }
    if case == RegionCase::C1 {
        return Ok(params.gamma1_plus * params.gamma2_plus / lambda);
    }
    let d = delta_in.ok_or_else(|| Error::InvalidDelta(format!("case {case} needs an explicit shift")))?;
    if d.norm() > params.delta0 {
        return Err(Error::InvalidDelta(format!("|delta| = {} exceeds delta0 = {}", d.norm(), params.delta0)));
    }
    if !in_sector(d, params.eps) {
        return Err(Error::InvalidDelta(format!("delta = {d} is outside the sector |arg| <= pi - eps")));
    }
    match case {
        RegionCase::C2 if d.re >= 0.0 => Err(Error::InvalidDelta(format!("case C2 needs Re delta < 0, got {d}"))),
        RegionCase::C3 if d.re < 0.0 => Err(Error::InvalidDelta(format!("case C3 needs Re delta >= 0, got {d}"))),
        _ => Ok(d),
    }
}

/// Exact membership of `lambda` in the admissible region for the point's case.
pub fn region_contains(pt: &SpectralPoint, params: &PhysicalParams) -> bool {
    let l = pt.lambda;
    if l.norm() < params.lambda0 || l.norm() == 0.0 {
        return false;
    }
    match pt.case {
        RegionCase::C1 => {
            let c = params.coupling() + params.eps;
            in_sector(l, params.eps) && (l.re + c).powi(2) + l.im * l.im >= c * c
        }
        RegionCase::C2 => {
            let d = pt.delta;
            if d.im == 0.0 {
                l.im == 0.0 && l.re >= 0.0
            } else {
                l.re >= (d.re / d.im).abs() * l.im.abs()
            }
        }
        RegionCase::C3 => l.re >= params.lambda0 * l.im.abs(),
    }
}

/// One inequality of the uniqueness argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessCheck {
    pub name: &'static str,
    /// Left side minus right side; must be positive (strict) or nonnegative.
    pub slack: f64,
    pub strict: bool,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub case: RegionCase,
    /// Which branch of the case analysis applies.
    pub branch: &'static str,
    pub checks: Vec<UniquenessCheck>,
}

impl UniquenessReport {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }
}

fn check(name: &'static str, slack: f64, strict: bool) -> UniquenessCheck {
    let satisfied = if strict { slack > 0.0 } else { slack >= 0.0 };
    UniquenessCheck { name, slack, strict, satisfied }
}

/// Evaluates every inequality used to rule out nontrivial homogeneous solutions.
pub fn uniqueness_predicates(pt: &SpectralPoint, params: &PhysicalParams) -> UniquenessReport {
    let l = pt.lambda;
    let d = pt.delta;
    let mut checks = Vec::new();
    let branch;
    match pt.case {
        RegionCase::C1 => {
            if l.im != 0.0 {
                branch = "im_lambda_nonzero";
                let g = params.coupling();
                checks.push(check("disc_slack", (l.re + g).powi(2) + l.im * l.im - g * g, true));
            } else {
                branch = "lambda_real";
                checks.push(check("lambda_positive", l.re, true));
                checks.push(check("delta_positive", d.re, true));
            }
        }
        RegionCase::C2 | RegionCase::C3 => {
            if l.im == 0.0 {
                branch = "lambda_real";
                checks.push(check("lambda_positive", l.re, true));
                if pt.case == RegionCase::C3 {
                    checks.push(check("re_delta_nonnegative", d.re, false));
                }
            } else {
                let ratio = (d.im / l.im).abs();
                let sector = d.re + l.re * ratio;
                if l.im * d.im > 0.0 {
                    branch = "same_sign_imaginary_parts";
                    checks.push(check("imaginary_product", l.im * d.im, true));
                } else {
                    branch = "opposite_sign_imaginary_parts";
                }
                checks.push(check("shifted_sector", sector, false));
                checks.push(check("coercivity", params.nu_plus + sector, true));
                if pt.case == RegionCase::C3 {
                    checks.push(check("slope_bound", params.lambda0 * d.im.abs() + d.re, false));
                    checks.push(check("slope_dominates", sector - (params.lambda0 * d.im.abs() + d.re), false));
                }
            }
        }
    }
    UniquenessReport { case: pt.case, branch, checks }
}
