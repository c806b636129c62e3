//! Downhill-simplex maximization of the Clauser–Horne combination over the
//! probe settings (and the squeezing, for the squeezed vacuum).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{ch_violation, CHResult, DisplacementSettings, SetupParams};
use crate::error::{domain, Result};
use crate::states::{ComplexAmp, StateFamily, MAX_SQUEEZING};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplexConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Convergence threshold on the spread of function values over the simplex.
    pub f_tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    /// Half-width of the box from which starting amplitudes are drawn.
    pub init_box: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    pub rng_seed: u64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        SimplexConfig {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            f_tol: 1e-10,
            max_iters: 5000,
            restarts: 32,
            init_box: 0.5,
            initial_step: 0.5,
            rng_seed: 0x5EED_CAFE,
        }
    }
}

impl SimplexConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.reflection > 0.0
            && self.expansion > 1.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0;
        if !ok {
            return Err(domain("simplex coefficients violate reflection > 0, expansion > 1, 0 < contraction, shrink < 1"));
        }
        if !(self.f_tol.is_finite() && self.f_tol >= 0.0) {
            return Err(domain(format!("f_tol = {} must be non-negative", self.f_tol)));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(domain("restarts and max_iters must be positive"));
        }
        if !(self.init_box > 0.0 && self.initial_step > 0.0) {
            return Err(domain("init_box and initial_step must be positive"));
        }
        Ok(())
    }
}

/// Free coordinates of a CH setting under the gauge `Im(a1) = 0`:
/// `[Re a1, Re a2, Im a2, Re b1, Im b1, Re b2, Im b2]`, followed by the
/// squeezing (stored signed; its magnitude is used) for the squeezed vacuum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn dimension(family: StateFamily) -> usize {
        if family.has_squeezing() {
            8
        } else {
            7
        }
    }

    pub fn to_settings(&self, family: StateFamily) -> DisplacementSettings {
        let c = &self.0;
        DisplacementSettings {
            a1: ComplexAmp::new(c[0], 0.0),
            a2: ComplexAmp::new(c[1], c[2]),
            b1: ComplexAmp::new(c[3], c[4]),
            b2: ComplexAmp::new(c[5], c[6]),
            r: family.has_squeezing().then(|| c[7].abs()),
        }
    }

    /// Inverse of [`ParamVector::to_settings`]; `Im(a1)` must already vanish.
    pub fn from_settings(d: &DisplacementSettings, family: StateFamily) -> Result<Self> {
        if d.a1.im != 0.0 {
            return Err(domain("settings are not in the Im(a1) = 0 gauge"));
        }
        let mut c = vec![d.a1.re, d.a2.re, d.a2.im, d.b1.re, d.b1.im, d.b2.re, d.b2.im];
        if family.has_squeezing() {
            c.push(d.r.ok_or_else(|| domain("squeezed-vacuum settings need r"))?);
        }
        Ok(ParamVector(c))
    }
}

/// Result of one simplex run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Nelder–Mead minimization. Non-finite objective values are treated as `+inf`.
pub fn minimize<F>(mut objective: F, start: &[f64], cfg: &SimplexConfig) -> SimplexOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut f = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut iterations = 0usize;
    let mut best = start.to_vec();
    let mut best_val = f(&best);
    let mut converged = false;

    // Restart from the best point until a fresh simplex makes no progress.
    for _ in 0..4 {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best.clone(), best_val));
        for i in 0..n {
            let mut x = best.clone();
            x[i] += cfg.initial_step;
            let v = f(&x);
            simplex.push((x, v));
        }
        let (x, v, ok) = run_simplex(&mut f, simplex, cfg, &mut iterations);
        let improved = best_val - v;
        best = x;
        best_val = v;
        converged = ok;
        if !ok || improved <= cfg.f_tol || iterations >= cfg.max_iters {
            break;
        }
    }
    SimplexOutcome { best, value: best_val, converged, iterations }
}

fn run_simplex<F>(
    f: &mut F,
    mut simplex: Vec<(Vec<f64>, f64)>,
    cfg: &SimplexConfig,
    iterations: &mut usize,
) -> (Vec<f64>, f64, bool)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = simplex.len() - 1;
    let mut centroid = vec![0.0; n];
    let along = |c: &[f64], x: &[f64], t: f64| -> Vec<f64> { c.iter().zip(x).map(|(ci, xi)| ci + t * (xi - ci)).collect() };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread.is_finite() && spread <= cfg.f_tol {
            let (x, v) = simplex.swap_remove(0);
            return (x, v, true);
        }
        if *iterations >= cfg.max_iters {
            let (x, v) = simplex.swap_remove(0);
            return (x, v, false);
        }
        *iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let (worst, f_worst) = (simplex[n].0.clone(), simplex[n].1);
        let (f_best, f_second) = (simplex[0].1, simplex[n - 1].1);

        let xr = along(&centroid, &worst, -cfg.reflection);
        let fr = f(&xr);
        if fr < f_best {
            let xe = along(&centroid, &xr, cfg.expansion);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < f_worst {
            let xc = along(&centroid, &xr, cfg.contraction);
            let fc = f(&xc);
            (xc, fc, fc <= fr)
        } else {
            let xc = along(&centroid, &worst, cfg.contraction);
            let fc = f(&xc);
            (xc, fc, fc < f_worst)
        };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            *x = along(&anchor, x, cfg.shrink);
            *v = f(x);
        }
    }
}

/// Nelder–Mead maximization of `objective`; the returned value is the
/// objective at the best vertex.
pub fn nelder_mead<F>(mut objective: F, start: &ParamVector, cfg: &SimplexConfig) -> (ParamVector, f64, bool)
where
    F: FnMut(&ParamVector) -> f64,
{
    let mut buf = ParamVector(start.0.clone());
    let out = minimize(
        |x| {
            buf.0.copy_from_slice(x);
            -objective(&buf)
        },
        &start.0,
        cfg,
    );
    (ParamVector(out.best), -out.value, out.converged)
}

/// Mixes a base seed with stream indices into an independent 64-bit seed.
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    stream.iter().fold(splitmix(base), |h, &s| splitmix(h ^ splitmix(s)))
}

fn random_start(family: StateFamily, cfg: &SimplexConfig, restart: usize) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &[restart as u64]));
    let mut c: Vec<f64> = (0..7).map(|_| rng.gen_range(-cfg.init_box..=cfg.init_box)).collect();
    if family.has_squeezing() {
        c.push(rng.gen_range(0.0..=2.0));
    }
    ParamVector(c)
}

/// Settings far enough out that every no-click probability is below
/// `e^-50`. CH tends to zero there, which is the supremum wherever the
/// inequality holds; local maxima near the origin can sit well below it.
fn far_field_start(family: StateFamily, p: &SetupParams) -> ParamVector {
    let amp = (50.0 / p.eta_tilde).sqrt();
    let mut c = vec![amp, 0.0, amp, -amp, 0.0, 0.0, -amp];
    if family.has_squeezing() {
        c.push(0.0);
    }
    ParamVector(c)
}

fn oriented_value(family: StateFamily, x: &ParamVector, p: &SetupParams) -> f64 {
    let d = x.to_settings(family);
    if d.r.is_some_and(|r| r > MAX_SQUEEZING) {
        return f64::NEG_INFINITY;
    }
    let state = family.state(d.r.unwrap_or(0.0));
    ch_violation(&state, &d, p).map(|(v, _)| v).unwrap_or(f64::NEG_INFINITY)
}

/// Fixes the residual sign freedom: `Re(a1) >= 0`, negating all four
/// amplitudes if needed (a symmetry of both states).
pub fn canonicalize(mut d: DisplacementSettings) -> DisplacementSettings {
    if d.a1.re < 0.0 {
        d.a1 = -d.a1;
        d.a2 = -d.a2;
        d.b1 = -d.b1;
        d.b2 = -d.b2;
    }
    d.a1.im = 0.0;
    d
}

/// Maximizes the oriented CH value from `cfg.restarts` seeded random starts
/// plus one far-field start, and returns the best extremum found.
pub fn maximize_ch(family: StateFamily, p: &SetupParams, cfg: &SimplexConfig) -> Result<CHResult> {
    maximize_ch_with_starts(family, p, cfg, &[])
}

/// As [`maximize_ch`], with additional caller-supplied starting points run
/// after the random restarts.
pub fn maximize_ch_with_starts(
    family: StateFamily,
    p: &SetupParams,
    cfg: &SimplexConfig,
    extra_starts: &[ParamVector],
) -> Result<CHResult> {
    p.validate()?;
    cfg.validate()?;
    let dim = ParamVector::dimension(family);
    if let Some(bad) = extra_starts.iter().find(|s| s.0.len() != dim) {
        return Err(domain(format!("start has {} coordinates, expected {dim}", bad.0.len())));
    }
    let starts: Vec<ParamVector> = (0..cfg.restarts)
        .map(|i| random_start(family, cfg, i))
        .chain(extra_starts.iter().cloned())
        .chain(std::iter::once(far_field_start(family, p)))
        .collect();

    let runs: Vec<(ParamVector, f64, bool)> = starts
        .par_iter()
        .map(|start| nelder_mead(|x| oriented_value(family, x, p), start, cfg))
        .collect();

    // max by value; ties keep the lower restart index
    let (best, _, converged) = runs
        .into_iter()
        .reduce(|acc, run| if run.1 > acc.1 { run } else { acc })
        .expect("at least one restart");

    let settings = canonicalize(best.to_settings(family));
    let state = family.state(settings.r.unwrap_or(0.0));
    let ch = crate::bell::ch_combination(&state, &settings, p)?;
    let (value, orientation) = crate::bell::orient(ch);
    Ok(CHResult { value, ch, orientation, settings, converged, restarts_used: starts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::ch_combination;

    #[test]
    fn quadratic_bowl() {
        let cfg = SimplexConfig { f_tol: 1e-14, ..Default::default() };
        let (x, v, ok) = nelder_mead(
            |p| -((p.0[0] - 1.0).powi(2) + (p.0[1] + 2.0).powi(2)),
            &ParamVector(vec![0.0, 0.0]),
            &cfg,
        );
        assert!(ok);
        assert!(v.abs() < 1e-12);
        assert!((x.0[0] - 1.0).abs() < 1e-5 && (x.0[1] + 2.0).abs() < 1e-5, "{x:?}");
    }

    #[test]
    fn constant_objective_converges_immediately() {
        let out = minimize(|_| 0.0, &[0.3, -0.2, 1.0], &SimplexConfig::default());
        assert!(out.converged);
        assert_eq!(out.value, 0.0);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn rosenbrock() {
        let cfg = SimplexConfig { f_tol: 1e-20, max_iters: 20_000, ..Default::default() };
        let out = minimize(|x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), &[-1.2, 1.0], &cfg);
        assert!(out.converged);
        assert!((out.best[0] - 1.0).abs() < 1e-6 && (out.best[1] - 1.0).abs() < 1e-6, "{out:?}");
    }

    #[test]
    fn iteration_budget_reports_nonconvergence() {
        let cfg = SimplexConfig { max_iters: 5, ..Default::default() };
        let out = minimize(|x| x.iter().map(|v| v * v).sum(), &[3.0, 3.0, 3.0], &cfg);
        assert!(!out.converged);
        assert_eq!(out.iterations, 5);
    }

    #[test]
    fn rejects_invalid_coefficients() {
        for cfg in [
            SimplexConfig { reflection: 0.0, ..Default::default() },
            SimplexConfig { expansion: 1.0, ..Default::default() },
            SimplexConfig { contraction: 1.0, ..Default::default() },
            SimplexConfig { shrink: 0.0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn param_vector_roundtrip() {
        let x = ParamVector(vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, 0.8]);
        let d = x.to_settings(StateFamily::Tmsv);
        assert_eq!(d.a1.im, 0.0);
        assert_eq!(ParamVector::from_settings(&d, StateFamily::Tmsv).unwrap(), x);
        let y = ParamVector(x.0[..7].to_vec());
        assert_eq!(ParamVector::from_settings(&y.to_settings(StateFamily::SinglePhoton), StateFamily::SinglePhoton).unwrap(), y);
        // negative r coordinates fold onto |r|
        let z = ParamVector(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.4]);
        assert_eq!(z.to_settings(StateFamily::Tmsv).r, Some(0.4));
    }

    #[test]
    fn seeds_differ_per_stream() {
        let a = derive_seed(1, &[0, 0]);
        assert_ne!(a, derive_seed(1, &[0, 1]));
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 0]));
        assert_eq!(a, derive_seed(1, &[0, 0]));
    }

    #[test]
    fn result_value_matches_its_settings() {
        let cfg = SimplexConfig { restarts: 4, ..Default::default() };
        let p = SetupParams::new(0.9, 0.95, 1.0).unwrap();
        let res = maximize_ch(StateFamily::SinglePhoton, &p, &cfg).unwrap();
        assert_eq!(res.settings.a1.im, 0.0);
        assert!(res.settings.a1.re >= 0.0);
        let raw = ch_combination(&crate::states::StateKind::SinglePhotonSplit, &res.settings, &p).unwrap();
        assert_eq!(raw, res.ch);
        assert_eq!(res.restarts_used, 5);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = SimplexConfig { restarts: 6, rng_seed: 99, ..Default::default() };
        let p = SetupParams::new(0.85, 1.0, 0.99).unwrap();
        let a = maximize_ch(StateFamily::Tmsv, &p, &cfg).unwrap();
        let b = maximize_ch(StateFamily::Tmsv, &p, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
