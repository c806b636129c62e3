//! s-ordering of quasidistributions: the loss-induced effective ordering and
//! the Gaussian smoothing that maps an s-ordered function to a lower ordering.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::hermite::GaussHermite;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, domain, Error, Result};
use crate::states::ComplexAmp;

/// Quasidistribution ordering parameter; statistically admissible only for `s <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OrderingParam(f64);

impl OrderingParam {
    pub const WIGNER: OrderingParam = OrderingParam(0.0);
    pub const Q_FUNCTION: OrderingParam = OrderingParam(-1.0);

    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s <= 0.0 {
            Ok(OrderingParam(s))
        } else {
            Err(domain(format!("ordering s = {s} must be finite and <= 0")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The per-count weight `(s+1)/(s-1)` used when summing photocount statistics.
    pub fn count_weight(self) -> f64 {
        (self.0 + 1.0) / (self.0 - 1.0)
    }
}

impl TryFrom<f64> for OrderingParam {
    type Error = Error;

    fn try_from(s: f64) -> Result<Self> {
        OrderingParam::new(s)
    }
}

impl From<OrderingParam> for f64 {
    fn from(s: OrderingParam) -> f64 {
        s.0
    }
}

/// Ordering of the quasidistribution actually sampled when the signal suffers
/// overall efficiency `eta_tilde` and counts are summed with ordering `s`.
pub fn effective_ordering(s: OrderingParam, eta_tilde: f64) -> Result<OrderingParam> {
    check_unit("eta_tilde", eta_tilde)?;
    OrderingParam::new(-(1.0 - s.0 - eta_tilde) / eta_tilde)
}

/// Ordering sampled by no-click (`s = -1`) detection.
pub fn no_click_ordering(eta_tilde: f64) -> Result<OrderingParam> {
    effective_ordering(OrderingParam::Q_FUNCTION, eta_tilde)
}

/// Gauss–Hermite nodes and weights for the weight `exp(-x^2)`.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    fn build(order: usize) -> Result<Self> {
        let deg = NonZeroUsize::new(order).ok_or_else(|| domain("quadrature order must be positive"))?;
        let rule = GaussHermite::new(deg);
        let (nodes, weights) = rule.iter().map(|&(x, w)| (x, w)).unzip();
        Ok(HermiteRule { nodes, weights })
    }

    /// Shared rule of the given order; built once per process.
    pub fn cached(order: usize) -> Result<Arc<HermiteRule>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HermiteRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(rule) = cache.lock().unwrap().get(&order) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(HermiteRule::build(order)?);
        cache.lock().unwrap().insert(order, rule.clone());
        Ok(rule)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

/// Tensor-product Gauss–Hermite settings.
///
/// Every integral is also evaluated with a rule of half the order; the two
/// must agree to `check_tol` relative to the result, or to `abs_floor` in
/// absolute terms, whichever is looser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub order: usize,
    pub check_tol: f64,
    pub abs_floor: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { order: 64, check_tol: 1e-9, abs_floor: 1e-12 }
    }
}

impl Quadrature {
    pub fn with_order(order: usize) -> Self {
        Quadrature { order, ..Default::default() }
    }

    fn checked<F>(&self, mut eval: F) -> Result<f64>
    where
        F: FnMut(&HermiteRule) -> f64,
    {
        if self.order < 2 {
            return Err(domain("quadrature order must be at least 2"));
        }
        let fine = eval(&*HermiteRule::cached(self.order)?);
        let coarse = eval(&*HermiteRule::cached(self.order / 2)?);
        let estimate = (fine - coarse).abs();
        if !fine.is_finite() || estimate > (self.check_tol * fine.abs()).max(self.abs_floor) {
            return Err(Error::Quadrature { order: self.order, estimate, tol: self.check_tol });
        }
        Ok(fine)
    }
}

/// Sums `weight * f(center + scale * u)` over the 2M-dimensional tensor grid.
fn tensor_sum<F>(rule: &HermiteRule, center: &[ComplexAmp], scale: f64, f: &F) -> f64
where
    F: Fn(&[ComplexAmp]) -> f64 + Sync,
{
    let n = rule.order();
    let dims = 2 * center.len();
    if dims == 0 {
        return f(&[]);
    }
    // Parallel over the first real coordinate; odometer over the rest.
    (0..n)
        .into_par_iter()
        .map(|first| {
            let mut idx = vec![0usize; dims];
            idx[0] = first;
            let mut point = center.to_vec();
            let mut acc = 0.0;
            loop {
                let mut w = 1.0;
                for (m, p) in point.iter_mut().enumerate() {
                    let (ix, iy) = (idx[2 * m], idx[2 * m + 1]);
                    w *= rule.weights[ix] * rule.weights[iy];
                    *p = center[m] + ComplexAmp::new(rule.nodes[ix], rule.nodes[iy]) * scale;
                }
                acc += w * f(&point);
                // advance indices 1..dims
                let mut d = 1;
                while d < dims {
                    idx[d] += 1;
                    if idx[d] < n {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == dims {
                    break;
                }
            }
            acc
        })
        .sum()
}

/// Maps an `s`-ordered M-mode function to ordering `s_prime < s` by Gaussian
/// smoothing, evaluated at `points` (one amplitude per mode).
///
/// `s_prime == s` is the identity.
pub fn ordering_transform<F>(
    w_src: F,
    s: OrderingParam,
    s_prime: OrderingParam,
    points: &[ComplexAmp],
    quad: &Quadrature,
) -> Result<f64>
where
    F: Fn(&[ComplexAmp]) -> f64 + Sync,
{
    let gap = s.0 - s_prime.0;
    if gap < 0.0 {
        return Err(domain(format!(
            "transform from s = {} to s' = {} would sharpen; kernel is not normalizable",
            s.0, s_prime.0
        )));
    }
    if gap == 0.0 {
        return Ok(w_src(points));
    }
    // beta = alpha + sqrt(gap/2) u turns the kernel into exp(-|u|^2) per mode.
    let scale = (gap / 2.0).sqrt();
    let norm = PI.powi(-(points.len() as i32));
    quad.checked(|rule| norm * tensor_sum(rule, points, scale, &w_src))
}

/// Integrates `f` over C^M, assuming `f` decays like a Gaussian of width
/// comparable to `scale` around `center`.
pub fn integrate_phase_space<F>(f: F, center: &[ComplexAmp], scale: f64, quad: &Quadrature) -> Result<f64>
where
    F: Fn(&[ComplexAmp]) -> f64 + Sync,
{
    if !(scale.is_finite() && scale > 0.0) {
        return Err(domain(format!("integration scale {scale} must be positive")));
    }
    let m = center.len() as i32;
    let jac = scale.powi(2 * m);
    quad.checked(|rule| {
        let reweighted = |p: &[ComplexAmp]| {
            let u2: f64 = p.iter().zip(center).map(|(z, c)| ((z - c) / scale).norm_sqr()).sum();
            f(p) * u2.exp()
        };
        jac * tensor_sum(rule, center, scale, &reweighted)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{q_function_tmsv, wigner_tmsv};
    use approx::assert_relative_eq;

    fn s(v: f64) -> OrderingParam {
        OrderingParam::new(v).unwrap()
    }

    fn vacuum_wigner(p: &[ComplexAmp]) -> f64 {
        2.0 / PI * (-2.0 * p[0].norm_sqr()).exp()
    }

    #[test]
    fn effective_ordering_examples() {
        assert_eq!(effective_ordering(s(0.0), 1.0).unwrap().value(), 0.0);
        assert_eq!(effective_ordering(s(-1.0), 1.0).unwrap().value(), -1.0);
        assert_relative_eq!(effective_ordering(s(-1.0), 0.5).unwrap().value(), -3.0);
        assert!(effective_ordering(s(-1.0), 0.0).is_err());
        assert!(effective_ordering(s(-1.0), 1.5).is_err());
        assert!(OrderingParam::new(0.1).is_err());
    }

    #[test]
    fn no_click_ordering_never_exceeds_q() {
        for k in 1..=100 {
            let eta = k as f64 / 100.0;
            let v = no_click_ordering(eta).unwrap().value();
            assert!(v <= -1.0);
            assert_eq!(v == -1.0, k == 100);
        }
    }

    #[test]
    fn effective_ordering_is_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=50 {
            let v = effective_ordering(s(-0.5), k as f64 / 50.0).unwrap().value();
            assert!(v > prev);
            prev = v;
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=50 {
            let v = effective_ordering(s(-2.0 + k as f64 / 25.0), 0.7).unwrap().value();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn vacuum_wigner_to_q() {
        let zero = [ComplexAmp::new(0.0, 0.0)];
        let q = ordering_transform(vacuum_wigner, s(0.0), s(-1.0), &zero, &Quadrature::default()).unwrap();
        assert_relative_eq!(q, 1.0 / PI, max_relative = 1e-12);
        let pt = [ComplexAmp::new(0.7, -0.2)];
        let q = ordering_transform(vacuum_wigner, s(0.0), s(-1.0), &pt, &Quadrature::default()).unwrap();
        assert_relative_eq!(q, (-pt[0].norm_sqr()).exp() / PI, max_relative = 1e-12);
    }

    #[test]
    fn tmsv_wigner_to_q() {
        let pts = [ComplexAmp::new(0.3, 0.1), ComplexAmp::new(-0.2, 0.4)];
        let r = 0.4;
        let q = ordering_transform(
            |p: &[ComplexAmp]| wigner_tmsv(p[0], p[1], r),
            s(0.0),
            s(-1.0),
            &pts,
            &Quadrature::default(),
        )
        .unwrap();
        assert_relative_eq!(q, q_function_tmsv(pts[0], pts[1], r), max_relative = 1e-9);
    }

    #[test]
    fn near_delta_kernel() {
        let pt = [ComplexAmp::new(0.4, 0.3)];
        let v = ordering_transform(vacuum_wigner, s(0.0), s(-1e-3), &pt, &Quadrature::default()).unwrap();
        let v0 = vacuum_wigner(&pt);
        assert!(((v - v0) / v0).abs() < 1e-3);
    }

    #[test]
    fn rejects_sharpening_and_identity_at_equal_orderings() {
        let pt = [ComplexAmp::new(0.1, 0.0)];
        assert!(ordering_transform(vacuum_wigner, s(-1.0), s(-0.5), &pt, &Quadrature::default()).is_err());
        assert_eq!(
            ordering_transform(vacuum_wigner, s(-1.0), s(-1.0), &pt, &Quadrature::default()).unwrap(),
            vacuum_wigner(&pt)
        );
    }

    #[test]
    fn insufficient_order_is_detected() {
        // A narrow, displaced peak is not resolved by a 4-point rule.
        let narrow = |p: &[ComplexAmp]| (-40.0 * (p[0] - ComplexAmp::new(1.5, 0.0)).norm_sqr()).exp();
        let pt = [ComplexAmp::new(0.0, 0.0)];
        let err = ordering_transform(narrow, s(0.0), s(-1.0), &pt, &Quadrature::with_order(4));
        assert!(matches!(err, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn semigroup_single_mode() {
        let quad = Quadrature::default();
        let pt = [ComplexAmp::new(0.5, -0.3)];
        let direct = ordering_transform(vacuum_wigner, s(0.0), s(-1.5), &pt, &quad).unwrap();
        let via = ordering_transform(
            |p: &[ComplexAmp]| ordering_transform(vacuum_wigner, s(0.0), s(-0.6), p, &quad).unwrap(),
            s(-0.6),
            s(-1.5),
            &pt,
            &quad,
        )
        .unwrap();
        assert_relative_eq!(direct, via, max_relative = 1e-6);
    }

    #[test]
    fn transform_preserves_mass() {
        let quad = Quadrature::default();
        let zero = [ComplexAmp::new(0.0, 0.0)];
        let vacuum_q = |p: &[ComplexAmp]| (-p[0].norm_sqr()).exp() / PI;
        let transformed = |p: &[ComplexAmp]| ordering_transform(vacuum_q, s(-1.0), s(-2.0), p, &quad).unwrap();
        // Smoothed vacuum has variance (1 - s')/4 per quadrature, i.e. scale sqrt(3/2).
        // The reweighted outer integrand is then constant, so a short outer rule is exact.
        let mass = integrate_phase_space(transformed, &zero, 1.5f64.sqrt(), &Quadrature::with_order(8)).unwrap();
        assert_relative_eq!(mass, 1.0, epsilon = 1e-9);
    }
}
