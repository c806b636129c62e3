//! Photon-silence probabilities with realistic imperfections, the
//! Clauser–Horne combination built from them, and the phase-space kernel of
//! the no-click observable.
//!
//! Outcome encoding: a detector that does not click yields 1, a click yields 0.
//! All probabilities are therefore sampled at ordering `s = -1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::detection::mismatch_envelope;
use crate::error::{check_unit, domain, Result};
use crate::ordering::OrderingParam;
use crate::states::{ComplexAmp, StateKind};

/// Imperfections shared by both arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetupParams {
    /// Overall efficiency: detector efficiency times beam-splitter transmission.
    pub eta_tilde: f64,
    /// Fraction of probe photons overlapping the signal mode.
    pub xi: f64,
    /// Probability of zero dark counts in one detector window.
    pub p_dark: f64,
}

impl Default for SetupParams {
    fn default() -> Self {
        SetupParams::perfect()
    }
}

impl SetupParams {
    pub fn new(eta_tilde: f64, xi: f64, p_dark: f64) -> Result<Self> {
        let p = SetupParams { eta_tilde, xi, p_dark };
        p.validate()?;
        Ok(p)
    }

    pub fn perfect() -> Self {
        SetupParams { eta_tilde: 1.0, xi: 1.0, p_dark: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("eta_tilde", self.eta_tilde)?;
        check_unit("xi", self.xi)?;
        check_unit("p_dark", self.p_dark)
    }

    fn envelope(&self, a: ComplexAmp) -> Result<f64> {
        mismatch_envelope(a, self.eta_tilde, self.xi, OrderingParam::Q_FUNCTION)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

/// The CH quadruple of probe settings, plus the squeezing when the state is
/// a squeezed vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementSettings {
    pub a1: ComplexAmp,
    pub a2: ComplexAmp,
    pub b1: ComplexAmp,
    pub b2: ComplexAmp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

impl DisplacementSettings {
    pub fn zero() -> Self {
        let z = ComplexAmp::new(0.0, 0.0);
        DisplacementSettings { a1: z, a2: z, b1: z, b2: z, r: None }
    }

    /// Largest imaginary part among the four amplitudes.
    pub fn max_imag(&self) -> f64 {
        [self.a1, self.a2, self.b1, self.b2].iter().map(|a| a.im.abs()).fold(0.0, f64::max)
    }
}

/// Which outcome assignment of arm B the CH value refers to.
///
/// Relabelling click and no-click on one arm maps the CH combination onto
/// `-1 - CH`, so a value below the local bound `-1` is a violation of the
/// same strength as a value above `0` under the flipped labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// No-click on both arms counts as 1.
    NoClick,
    /// Arm B's outcomes relabelled; the value is `-1 - CH`.
    FlippedB,
}

/// Outcome of a CH maximization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CHResult {
    /// Oriented CH value; `[-1, 0]` is the local-realistic band and a
    /// positive value flags a violation.
    pub value: f64,
    /// The combination under the plain no-click encoding.
    pub ch: f64,
    pub orientation: Orientation,
    pub settings: DisplacementSettings,
    pub converged: bool,
    pub restarts_used: usize,
}

/// Probability that neither detector clicks.
pub fn q_joint(state: &StateKind, alpha: ComplexAmp, beta: ComplexAmp, p: &SetupParams) -> Result<f64> {
    p.validate()?;
    let pre = PI * p.p_dark / p.eta_tilde;
    let w = state.w_joint(alpha, beta, p.eta_tilde)?;
    Ok(pre * pre * w * p.envelope(alpha)? * p.envelope(beta)?)
}

/// Probability that the detector in `arm` does not click.
pub fn q_marginal(state: &StateKind, alpha: ComplexAmp, p: &SetupParams, arm: Arm) -> Result<f64> {
    p.validate()?;
    // both benchmark states are symmetric under A <-> B
    let _ = arm;
    let pre = PI * p.p_dark / p.eta_tilde;
    Ok(pre * state.w_marginal(alpha, p.eta_tilde)? * p.envelope(alpha)?)
}

/// `Q(a1,b1) + Q(a1,b2) + Q(a2,b1) - Q(a2,b2) - Q(a1) - Q(b1)`.
pub fn ch_combination(state: &StateKind, d: &DisplacementSettings, p: &SetupParams) -> Result<f64> {
    let q = |a, b| q_joint(state, a, b, p);
    Ok(q(d.a1, d.b1)? + q(d.a1, d.b2)? + q(d.a2, d.b1)? - q(d.a2, d.b2)?
        - q_marginal(state, d.a1, p, Arm::A)?
        - q_marginal(state, d.b1, p, Arm::B)?)
}

/// Maps a raw CH value to the orientation in which it violates most.
pub fn orient(ch: f64) -> (f64, Orientation) {
    let flipped = -1.0 - ch;
    if flipped > ch {
        (flipped, Orientation::FlippedB)
    } else {
        (ch, Orientation::NoClick)
    }
}

/// Oriented CH value: `max(CH, -1 - CH)`; positive iff the settings violate
/// the Clauser–Horne inequality.
pub fn ch_violation(state: &StateKind, d: &DisplacementSettings, p: &SetupParams) -> Result<(f64, Orientation)> {
    Ok(orient(ch_combination(state, d, p)?))
}

/// Phase-space (Wigner) representation of the no-click observable at probe
/// setting `alpha`, as a function of the hidden variable `lambda`.
pub fn lhv_kernel(alpha: ComplexAmp, lambda: ComplexAmp, p: &SetupParams) -> Result<f64> {
    p.validate()?;
    let e = p.eta_tilde;
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(domain("lambda is not finite"));
    }
    let pre = 2.0 * p.p_dark / (2.0 - e);
    let spread = 2.0 * e / (2.0 - e) * (lambda - alpha).norm_sqr();
    Ok(pre * (-spread).exp() * p.envelope(alpha)?)
}

/// Maximum of [`lhv_kernel`] over the hidden variable, attained at `lambda = alpha`.
pub fn lhv_kernel_max(alpha: ComplexAmp, p: &SetupParams) -> Result<f64> {
    lhv_kernel(alpha, alpha, p)
}
