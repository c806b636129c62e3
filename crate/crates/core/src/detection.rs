//! Post-processing of photocount statistics: the ordered count sum, dark-count
//! convolution, and the mode-mismatch model.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_unit, domain, Error, Result};
use crate::ordering::OrderingParam;
use crate::states::ComplexAmp;

/// Tolerance on `sum(p_n) + tail_mass == 1`.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Probabilities `p_0..p_N` of registering `n` counts, plus the mass of
/// the discarded tail `n > N` (zero unless the distribution was truncated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDistribution {
    probs: Vec<f64>,
    #[serde(default)]
    tail_mass: f64,
}

impl CountDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::truncated(probs, 0.0)
    }

    /// Distribution known only up to `N`, with `tail_mass` beyond it.
    pub fn truncated(probs: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(domain("count distribution is empty"));
        }
        for (n, &p) in probs.iter().enumerate() {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(domain(format!("p_{n} = {p} is not a probability")));
            }
        }
        if !(tail_mass.is_finite() && (0.0..=1.0).contains(&tail_mass)) {
            return Err(domain(format!("tail mass {tail_mass} is not a probability")));
        }
        let total: f64 = probs.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(CountDistribution { probs, tail_mass })
    }

    /// The certain outcome `n = 0`.
    pub fn vacuum() -> Self {
        CountDistribution { probs: vec![1.0], tail_mass: 0.0 }
    }

    /// Poisson statistics with the given mean, cut where the remaining tail
    /// drops below `1e-16`.
    pub fn poisson(mean: f64) -> Result<Self> {
        check_finite("mean", mean)?;
        if mean < 0.0 {
            return Err(domain(format!("Poisson mean {mean} is negative")));
        }
        let mut probs = Vec::new();
        let mut p = (-mean).exp();
        let mut cum = 0.0;
        let mut n = 0usize;
        loop {
            probs.push(p);
            cum += p;
            n += 1;
            let next = p * mean / n as f64;
            // remaining terms fall off at least geometrically with ratio mean/(n+1)
            if (n as f64) > mean && next / (1.0 - mean / (n as f64 + 1.0)) < 1e-17 {
                break;
            }
            p = next;
        }
        let tail = (1.0 - cum).max(0.0);
        Ok(CountDistribution { probs, tail_mass: tail })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn p0(&self) -> f64 {
        self.probs[0]
    }

    /// Parses `n,p` rows (an optional header line and `#` comments are skipped).
    /// Rows must list `n = 0, 1, 2, ...` in order.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut probs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Option<(usize, f64)> = match fields.as_slice() {
                [n, p] => n.parse().ok().zip(p.parse().ok()),
                _ => None,
            };
            match parsed {
                Some((n, p)) if n == probs.len() => probs.push(p),
                Some((n, _)) => {
                    return Err(Error::Parse(format!("line {}: expected n = {}, found {n}", lineno + 1, probs.len())))
                }
                None if probs.is_empty() && lineno == 0 => continue, // header
                None => return Err(Error::Parse(format!("line {}: expected 'n,p'", lineno + 1))),
            }
        }
        CountDistribution::new(probs)
    }
}

/// Ordered count sum `sum_n ((s+1)/(s-1))^n p_n`.
///
/// The discarded tail is ignored; at `s = -1` the sum is exactly `p_0`.
pub fn pi_s(counts: &CountDistribution, s: OrderingParam) -> f64 {
    let w = s.count_weight();
    if w == 0.0 {
        return counts.p0();
    }
    // Horner from the top keeps the alternating sum (s > -1) well conditioned.
    counts.probs.iter().rev().fold(0.0, |acc, &p| acc * w + p)
}

/// Total counts when the dark counts are statistically independent of the
/// field counts.
pub fn convolve_dark(field: &CountDistribution, dark: &CountDistribution) -> CountDistribution {
    let (f, d) = (&field.probs, &dark.probs);
    let mut out = vec![0.0; f.len() + d.len() - 1];
    for (i, &pf) in f.iter().enumerate() {
        for (j, &pd) in d.iter().enumerate() {
            out[i + j] += pf * pd;
        }
    }
    let kept_f: f64 = f.iter().sum();
    let kept_d: f64 = d.iter().sum();
    // mass landing beyond the stored range: anything involving a tail
    let tail = 1.0 - kept_f * kept_d;
    for p in out.iter_mut() {
        *p = p.clamp(0.0, 1.0);
    }
    CountDistribution { probs: out, tail_mass: tail.max(0.0) }
}

/// Gaussian envelope multiplying the sampled quasidistribution when only a
/// fraction `xi` of the probe photons overlap the signal mode.
pub fn mismatch_envelope(alpha: ComplexAmp, eta_tilde: f64, xi: f64, s: OrderingParam) -> Result<f64> {
    check_unit("eta_tilde", eta_tilde)?;
    check_unit("xi", xi)?;
    if xi == 1.0 {
        return Ok(1.0);
    }
    let rate = 2.0 * eta_tilde / (1.0 - s.value()) * (1.0 - xi) / xi;
    Ok((-rate * alpha.norm_sqr()).exp())
}

pub fn xi_to_visibility(xi: f64) -> Result<f64> {
    check_unit("xi", xi)?;
    Ok(2.0 * xi / (1.0 + xi))
}

pub fn visibility_to_xi(visibility: f64) -> Result<f64> {
    check_unit("visibility", visibility)?;
    Ok(visibility / (2.0 - visibility))
}

/// Minimum and maximum output intensity (in photons) when a coherent test
/// signal `alpha_s` interferes with the probe at transmission `t`.
pub fn interference_extrema(alpha_s: ComplexAmp, t: f64, xi: f64) -> Result<(f64, f64)> {
    if !(t.is_finite() && t > 0.0 && t < 1.0) {
        return Err(domain(format!("transmission T = {t} is outside (0, 1)")));
    }
    check_unit("xi", xi)?;
    let n = t * alpha_s.norm_sqr();
    Ok(((1.0 - xi) * n, (1.0 + 3.0 * xi) * n))
}

/// Probe/signal overlap description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMatch {
    pub xi: f64,
    pub visibility: f64,
    /// Projection of the probe onto the signal mode.
    pub alpha_projection: ComplexAmp,
    /// Mean photon number of the whole probe field.
    pub probe_photons: f64,
}

impl ModeMatch {
    /// Builds the overlap from the projected amplitude and the total probe
    /// photon number; the ratio is bounded by one (Schwarz inequality).
    pub fn from_projection(alpha_projection: ComplexAmp, probe_photons: f64) -> Result<Self> {
        check_finite("probe_photons", probe_photons)?;
        if probe_photons <= 0.0 {
            return Err(domain("probe photon number must be positive"));
        }
        let xi = alpha_projection.norm_sqr() / probe_photons;
        if xi > 1.0 + 1e-12 {
            return Err(domain(format!(
                "projected photons {} exceed the probe total {probe_photons}",
                alpha_projection.norm_sqr()
            )));
        }
        let xi = xi.min(1.0);
        Ok(ModeMatch { xi, visibility: xi_to_visibility(xi)?, alpha_projection, probe_photons })
    }

    /// Photons in the probe that miss the signal mode.
    pub fn unmatched_photons(&self) -> f64 {
        (self.probe_photons - self.alpha_projection.norm_sqr()).max(0.0)
    }
}
