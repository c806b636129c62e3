//! Closed-form quasidistributions of the two benchmark states.
//!
//! Every function here evaluates the two-mode (or single-mode marginal)
//! quasidistribution at the loss-induced ordering `-(2 - eta) / eta`, which is
//! the ordering sampled by no-click detection with overall efficiency `eta`.
//! Amplitudes are the rescaled probe amplitudes used throughout the crate.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_unit, domain, Result};

/// Rescaled complex amplitude of an auxiliary coherent field.
pub type ComplexAmp = Complex64;

/// Squeezing values above this overflow the exponents downstream.
pub const MAX_SQUEEZING: f64 = 10.0;

/// An entangled two-mode input state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateKind {
    /// One photon split on a 50:50 beam splitter, `(|1,0> + |0,1>)/sqrt(2)`.
    SinglePhotonSplit,
    /// `sum_n tanh^n r |n,n> / cosh r`.
    TwoModeSqueezedVacuum { r: f64 },
}

/// State family searched over by the optimizer; for TMSV the squeezing is a
/// free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateFamily {
    SinglePhoton,
    Tmsv,
}

impl StateFamily {
    pub fn has_squeezing(self) -> bool {
        matches!(self, StateFamily::Tmsv)
    }

    /// Concrete state for a given squeezing; `r` is ignored for the single photon.
    pub fn state(self, r: f64) -> StateKind {
        match self {
            StateFamily::SinglePhoton => StateKind::SinglePhotonSplit,
            StateFamily::Tmsv => StateKind::TwoModeSqueezedVacuum { r },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateFamily::SinglePhoton => "single-photon",
            StateFamily::Tmsv => "tmsv",
        }
    }
}

impl fmt::Display for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StateFamily {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-photon" | "single_photon" | "sp" => Ok(StateFamily::SinglePhoton),
            "tmsv" | "two-mode-squeezed-vacuum" => Ok(StateFamily::Tmsv),
            other => Err(crate::Error::Parse(format!("unknown state '{other}'"))),
        }
    }
}

impl StateKind {
    pub fn family(&self) -> StateFamily {
        match self {
            StateKind::SinglePhotonSplit => StateFamily::SinglePhoton,
            StateKind::TwoModeSqueezedVacuum { .. } => StateFamily::Tmsv,
        }
    }

    pub fn squeezing(&self) -> Option<f64> {
        match *self {
            StateKind::SinglePhotonSplit => None,
            StateKind::TwoModeSqueezedVacuum { r } => Some(r),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let StateKind::TwoModeSqueezedVacuum { r } = *self {
            check_squeezing(r)?;
        }
        Ok(())
    }

    /// Two-mode quasidistribution at ordering `-(2 - eta)/eta`.
    pub fn w_joint(&self, alpha: ComplexAmp, beta: ComplexAmp, eta_tilde: f64) -> Result<f64> {
        match *self {
            StateKind::SinglePhotonSplit => w_joint_single_photon(alpha, beta, eta_tilde),
            StateKind::TwoModeSqueezedVacuum { r } => w_joint_tmsv(alpha, beta, eta_tilde, r),
        }
    }

    /// Single-mode marginal at ordering `-(2 - eta)/eta`. Both benchmark
    /// states are symmetric under exchange of the arms.
    pub fn w_marginal(&self, alpha: ComplexAmp, eta_tilde: f64) -> Result<f64> {
        match *self {
            StateKind::SinglePhotonSplit => w_marginal_single_photon(alpha, eta_tilde),
            StateKind::TwoModeSqueezedVacuum { r } => w_marginal_tmsv(alpha, eta_tilde, r),
        }
    }
}

pub(crate) fn check_squeezing(r: f64) -> Result<()> {
    check_finite("r", r)?;
    if !(0.0..=MAX_SQUEEZING).contains(&r) {
        return Err(domain(format!("squeezing r = {r} outside [0, {MAX_SQUEEZING}]")));
    }
    Ok(())
}

fn check_amp(name: &str, a: ComplexAmp) -> Result<()> {
    if a.re.is_finite() && a.im.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} = {a} is not finite")))
    }
}

pub fn w_joint_single_photon(alpha: ComplexAmp, beta: ComplexAmp, eta_tilde: f64) -> Result<f64> {
    check_unit("eta_tilde", eta_tilde)?;
    check_amp("alpha", alpha)?;
    check_amp("beta", beta)?;
    let e = eta_tilde;
    let pre = (e / PI).powi(2);
    let poly = 1.0 - e + 0.5 * e * e * (alpha + beta).norm_sqr();
    Ok(pre * poly * (-e * (alpha.norm_sqr() + beta.norm_sqr())).exp())
}

pub fn w_marginal_single_photon(alpha: ComplexAmp, eta_tilde: f64) -> Result<f64> {
    check_unit("eta_tilde", eta_tilde)?;
    check_amp("alpha", alpha)?;
    let e = eta_tilde;
    let a2 = alpha.norm_sqr();
    Ok(e / PI * (1.0 - 0.5 * e + 0.5 * e * e * a2) * (-e * a2).exp())
}

pub fn w_joint_tmsv(alpha: ComplexAmp, beta: ComplexAmp, eta_tilde: f64, r: f64) -> Result<f64> {
    check_unit("eta_tilde", eta_tilde)?;
    check_squeezing(r)?;
    check_amp("alpha", alpha)?;
    check_amp("beta", beta)?;
    let e = eta_tilde;
    let (sh, ch) = (r.sinh(), r.cosh());
    let denom = 1.0 + e * (2.0 - e) * sh * sh;
    let diag = (e + e * e * sh * sh) / denom;
    let cross = e * e * sh * ch / denom;
    // alpha*beta + conj(alpha*beta)
    let ab = 2.0 * (alpha * beta).re;
    let exponent = -diag * (alpha.norm_sqr() + beta.norm_sqr()) + cross * ab;
    Ok(e * e / (PI * PI * denom) * exponent.exp())
}

pub fn w_marginal_tmsv(alpha: ComplexAmp, eta_tilde: f64, r: f64) -> Result<f64> {
    check_unit("eta_tilde", eta_tilde)?;
    check_squeezing(r)?;
    check_amp("alpha", alpha)?;
    let e = eta_tilde;
    let sh = r.sinh();
    let denom = 1.0 + e * sh * sh;
    Ok(e / (PI * denom) * (-e * alpha.norm_sqr() / denom).exp())
}

/// Two-mode Q function (ordering -1) of the squeezed vacuum, computed
/// directly from its Fock representation.
pub fn q_function_tmsv(gamma: ComplexAmp, delta: ComplexAmp, r: f64) -> f64 {
    let ch = r.cosh();
    let exponent = -gamma.norm_sqr() - delta.norm_sqr() + r.tanh() * 2.0 * (gamma * delta).re;
    exponent.exp() / (PI * PI * ch * ch)
}

/// Two-mode Wigner function (ordering 0) of the squeezed vacuum.
pub fn wigner_tmsv(gamma: ComplexAmp, delta: ComplexAmp, r: f64) -> f64 {
    let c2 = (2.0 * r).cosh();
    let s2 = (2.0 * r).sinh();
    let exponent = -2.0 * c2 * (gamma.norm_sqr() + delta.norm_sqr()) + 2.0 * s2 * 2.0 * (gamma * delta).re;
    4.0 / (PI * PI) * exponent.exp()
}
