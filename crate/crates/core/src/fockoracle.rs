//! Truncated Fock-space reference computation of click statistics.
//!
//! Everything here works from number-state coefficients and displacement
//! matrix elements only, so it can be checked against the phase-space
//! closed forms in [`crate::states`] and [`crate::bell`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bell::SetupParams;
use crate::detection::CountDistribution;
use crate::error::{check_unit, domain, Error, Result};
use crate::states::{check_squeezing, ComplexAmp, StateKind};

/// Default Fock truncation per mode.
pub const DEFAULT_DIM: usize = 60;

/// Largest change in a no-click probability tolerated when the truncation is
/// enlarged by half.
pub const TRUNCATION_TOL: f64 = 1e-10;

/// Columns of a displacement matrix are added until every row has unit norm
/// to within this tolerance.
const ROW_TAIL_TOL: f64 = 1e-13;
const MAX_COLUMNS: usize = 4096;

/// Matrix elements `<m|D(alpha)|k>` for `m < rows` and `k < cols`, with the
/// column count chosen so that each row's missing norm is negligible.
#[derive(Debug, Clone)]
pub struct DisplacementRows {
    rows: usize,
    cols: usize,
    /// Row-major, `rows x cols`.
    data: Vec<Complex64>,
    /// Largest `1 - sum_k |<m|D|k>|^2` over the rows.
    pub row_tail: f64,
}

impl DisplacementRows {
    pub fn new(alpha: ComplexAmp, rows: usize) -> Result<Self> {
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(domain("displacement amplitude is not finite"));
        }
        // column 0: <m|alpha> = exp(-|alpha|^2/2) alpha^m / sqrt(m!)
        let mut col: Vec<Complex64> = Vec::with_capacity(rows);
        let mut v = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for m in 0..rows {
            if m > 0 {
                v = v * alpha / (m as f64).sqrt();
            }
            col.push(v);
        }
        let mut columns = vec![col];
        let mut norms: Vec<f64> = columns[0].iter().map(|z| z.norm_sqr()).collect();
        let tail = |norms: &[f64]| norms.iter().map(|n| 1.0 - n).fold(0.0f64, f64::max);
        // <m|D|k+1> = (sqrt(m) <m-1|D|k> - conj(alpha) <m|D|k>) / sqrt(k+1)
        while tail(&norms) > ROW_TAIL_TOL {
            let k = columns.len() - 1;
            if k + 1 >= MAX_COLUMNS {
                return Err(Error::Truncation { dim: MAX_COLUMNS, suggested: 2 * MAX_COLUMNS, estimate: tail(&norms) });
            }
            let prev = &columns[k];
            let inv = 1.0 / ((k + 1) as f64).sqrt();
            let next: Vec<Complex64> = (0..rows)
                .map(|m| {
                    let down = if m > 0 { prev[m - 1] * (m as f64).sqrt() } else { Complex64::new(0.0, 0.0) };
                    (down - alpha.conj() * prev[m]) * inv
                })
                .collect();
            for (n, z) in norms.iter_mut().zip(&next) {
                *n += z.norm_sqr();
            }
            columns.push(next);
        }
        let cols = columns.len();
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        for (k, c) in columns.iter().enumerate() {
            for (m, z) in c.iter().enumerate() {
                data[m * cols + k] = *z;
            }
        }
        Ok(DisplacementRows { rows, cols, data, row_tail: tail(&norms).max(0.0) })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, m: usize, k: usize) -> Complex64 {
        self.data[m * self.cols + k]
    }
}

/// Pure two-mode state truncated to `dim` number states per mode.
#[derive(Debug, Clone)]
pub struct TruncatedState {
    dim: usize,
    /// Row-major `c[n_a * dim + n_b]`.
    coeffs: Vec<Complex64>,
    /// Norm discarded by the truncation.
    pub tail_mass: f64,
}

impl TruncatedState {
    /// Builds a state from its coefficient matrix; the retained norm must be
    /// at most one.
    pub fn from_coefficients(dim: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || coeffs.len() != dim * dim {
            return Err(domain(format!("coefficient matrix of length {} is not {dim} x {dim}", coeffs.len())));
        }
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if !norm.is_finite() || norm > 1.0 + 1e-12 {
            return Err(domain(format!("state norm {norm} exceeds one")));
        }
        Ok(TruncatedState { dim, coeffs, tail_mass: (1.0 - norm).max(0.0) })
    }

    pub fn new(state: &StateKind, dim: usize) -> Result<Self> {
        let zero = Complex64::new(0.0, 0.0);
        let mut c = vec![zero; dim * dim];
        match *state {
            StateKind::SinglePhotonSplit => {
                if dim < 2 {
                    return Err(Error::Truncation { dim, suggested: 2, estimate: 1.0 });
                }
                let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                c[dim] = h; // |1,0>
                c[1] = h; // |0,1>
            }
            StateKind::TwoModeSqueezedVacuum { r } => {
                check_squeezing(r)?;
                let t = r.tanh();
                let mut amp = 1.0 / r.cosh();
                for n in 0..dim {
                    c[n * dim + n] = Complex64::new(amp, 0.0);
                    amp *= t;
                }
            }
        }
        Self::from_coefficients(dim, c)
    }

    /// Product of coherent states `|gamma>|delta>`.
    pub fn coherent_pair(gamma: ComplexAmp, delta: ComplexAmp, dim: usize) -> Result<Self> {
        let ket = |a: ComplexAmp| {
            let mut v = Vec::with_capacity(dim);
            let mut z = Complex64::new((-a.norm_sqr() / 2.0).exp(), 0.0);
            for n in 0..dim {
                if n > 0 {
                    z = z * a / (n as f64).sqrt();
                }
                v.push(z);
            }
            v
        };
        let (g, d) = (ket(gamma), ket(delta));
        let coeffs = g.iter().flat_map(|x| d.iter().map(move |y| x * y)).collect();
        Self::from_coefficients(dim, coeffs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Amplitudes `M_kl = <k,l| D^dag(alpha) (x) D^dag(beta) |psi>`.
    fn displaced_amplitudes(&self, alpha: ComplexAmp, beta: ComplexAmp) -> Result<(Vec<Complex64>, usize, usize)> {
        let da = DisplacementRows::new(alpha, self.dim)?;
        let db = DisplacementRows::new(beta, self.dim)?;
        let (ka, kb) = (da.cols(), db.cols());
        let d = self.dim;
        // T[m, l] = sum_n c[m, n] conj(Db[n, l])
        let mut t = vec![Complex64::new(0.0, 0.0); d * kb];
        for m in 0..d {
            for n in 0..d {
                let c = self.coeffs[m * d + n];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                for l in 0..kb {
                    t[m * kb + l] += c * db.get(n, l).conj();
                }
            }
        }
        // M[k, l] = sum_m conj(Da[m, k]) T[m, l]
        let mut out = vec![Complex64::new(0.0, 0.0); ka * kb];
        for m in 0..d {
            for k in 0..ka {
                let a = da.get(m, k).conj();
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for l in 0..kb {
                    out[k * kb + l] += a * t[m * kb + l];
                }
            }
        }
        Ok((out, ka, kb))
    }

    /// Photon-number distribution `P(k, l)` of the two modes after the
    /// displacements, before detection.
    pub fn displaced_number_distribution(&self, alpha: ComplexAmp, beta: ComplexAmp) -> Result<Vec<Vec<f64>>> {
        let (m, ka, kb) = self.displaced_amplitudes(alpha, beta)?;
        Ok((0..ka).map(|k| (0..kb).map(|l| m[k * kb + l].norm_sqr()).collect()).collect())
    }

    /// Joint no-click probability of both detectors.
    pub fn no_click_joint(&self, alpha: ComplexAmp, beta: ComplexAmp, p: &SetupParams) -> Result<f64> {
        p.validate()?;
        let atten = 1.0 - p.eta_tilde;
        let dist = self.displaced_number_distribution(alpha, beta)?;
        let mut acc = 0.0;
        let mut wk = 1.0;
        for row in &dist {
            let mut wl = wk;
            for q in row {
                acc += wl * q;
                wl *= atten;
            }
            wk *= atten;
        }
        Ok(p.p_dark * p.p_dark * unmatched_no_click(alpha, p) * unmatched_no_click(beta, p) * acc)
    }

    /// No-click probability of detector A alone.
    pub fn no_click_a(&self, alpha: ComplexAmp, p: &SetupParams) -> Result<f64> {
        p.validate()?;
        let atten = 1.0 - p.eta_tilde;
        let dist = self.displaced_number_distribution(alpha, Complex64::new(0.0, 0.0))?;
        let acc: f64 = dist.iter().enumerate().map(|(k, row)| atten.powi(k as i32) * row.iter().sum::<f64>()).sum();
        Ok(p.p_dark * unmatched_no_click(alpha, p) * acc)
    }
}

/// Vacuum probability of the part of the probe that does not interfere with
/// the signal, which reaches the detector as a coherent state.
fn unmatched_no_click(alpha: ComplexAmp, p: &SetupParams) -> f64 {
    (-unmatched_mean(alpha, p)).exp()
}

fn unmatched_mean(alpha: ComplexAmp, p: &SetupParams) -> f64 {
    p.eta_tilde * (1.0 - p.xi) / p.xi * alpha.norm_sqr()
}

fn dark_mean(p: &SetupParams) -> f64 {
    -p.p_dark.ln()
}

/// Runs `eval` at `dim` and at `3 dim / 2`; the results must agree to
/// [`TRUNCATION_TOL`].
fn converged<F>(state: &StateKind, dim: usize, mut eval: F) -> Result<f64>
where
    F: FnMut(&TruncatedState) -> Result<f64>,
{
    let coarse = eval(&TruncatedState::new(state, dim)?)?;
    let finer_dim = dim + dim.div_ceil(2);
    let fine = eval(&TruncatedState::new(state, finer_dim)?)?;
    let estimate = (fine - coarse).abs();
    if estimate > TRUNCATION_TOL {
        return Err(Error::Truncation { dim, suggested: 2 * dim, estimate });
    }
    Ok(coarse)
}

/// Joint no-click probability computed in the number basis.
pub fn oracle_q_joint(state: &StateKind, alpha: ComplexAmp, beta: ComplexAmp, p: &SetupParams, dim: usize) -> Result<f64> {
    converged(state, dim, |s| s.no_click_joint(alpha, beta, p))
}

/// Single-detector no-click probability computed in the number basis.
pub fn oracle_q_marginal(state: &StateKind, alpha: ComplexAmp, p: &SetupParams, dim: usize) -> Result<f64> {
    converged(state, dim, |s| s.no_click_a(alpha, p))
}

/// Thins a photon-number distribution by detection efficiency `eta`.
fn thin(photons: &[f64], eta: f64) -> Vec<f64> {
    let mut out = vec![0.0; photons.len()];
    for (k, &pk) in photons.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        // binomial(k, eta) by its recurrence in j
        let mut b = (1.0 - eta).powi(k as i32);
        for (j, o) in out.iter_mut().enumerate().take(k + 1) {
            *o += pk * b;
            if j < k {
                b = if eta == 1.0 && j + 1 == k {
                    1.0
                } else {
                    b * (k - j) as f64 / (j + 1) as f64 * eta / (1.0 - eta)
                };
            }
        }
    }
    out
}

fn convolve(a: &[f64], b: &[f64], n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    for (i, &x) in a.iter().enumerate().take(n_max + 1) {
        for (j, &y) in b.iter().enumerate().take(n_max + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn poisson_terms(mean: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut p = (-mean).exp();
    for n in 0..=n_max {
        if n > 0 {
            p *= mean / n as f64;
        }
        out.push(p);
    }
    out
}

/// Registered counts of each detector, `P(n_A, n_B)` for `n_A, n_B <= n_max`,
/// including loss, the unmatched probe background and dark counts.
pub fn oracle_joint_counts(
    state: &StateKind,
    alpha: ComplexAmp,
    beta: ComplexAmp,
    p: &SetupParams,
    dim: usize,
    n_max: usize,
) -> Result<Vec<Vec<f64>>> {
    p.validate()?;
    let st = TruncatedState::new(state, dim)?;
    let photons = st.displaced_number_distribution(alpha, beta)?;
    let eta = p.eta_tilde;
    // thin each arm, then add Poisson noise per arm
    let rows: Vec<Vec<f64>> = photons.iter().map(|row| thin(row, eta)).collect();
    let kb = rows.first().map_or(0, Vec::len);
    let cols: Vec<Vec<f64>> = (0..kb).map(|l| thin(&rows.iter().map(|r| r[l]).collect::<Vec<_>>(), eta)).collect();
    // cols[l][k] now holds detected (k on A, l on B)
    let noise_a = poisson_terms(unmatched_mean(alpha, p) + dark_mean(p), n_max);
    let noise_b = poisson_terms(unmatched_mean(beta, p) + dark_mean(p), n_max);
    let ka = cols.first().map_or(0, Vec::len);
    let mut with_a = vec![vec![0.0; n_max + 1]; kb];
    for (l, col) in cols.iter().enumerate() {
        with_a[l] = convolve(&col[..ka], &noise_a, n_max);
    }
    let mut out = vec![vec![0.0; n_max + 1]; n_max + 1];
    for (na, row) in out.iter_mut().enumerate() {
        let along_b: Vec<f64> = with_a.iter().map(|c| c[na]).collect();
        *row = convolve(&along_b, &noise_b, n_max);
    }
    Ok(out)
}

/// Distribution of the total number of counts registered by both detectors.
pub fn oracle_count_distribution(
    state: &StateKind,
    alpha: ComplexAmp,
    beta: ComplexAmp,
    p: &SetupParams,
    dim: usize,
    n_max: usize,
) -> Result<CountDistribution> {
    p.validate()?;
    let st = TruncatedState::new(state, dim)?;
    let photons = st.displaced_number_distribution(alpha, beta)?;
    let kmax = photons.iter().map(Vec::len).max().unwrap_or(0) + photons.len();
    let mut total = vec![0.0; kmax];
    for (k, row) in photons.iter().enumerate() {
        for (l, q) in row.iter().enumerate() {
            total[k + l] += q;
        }
    }
    let detected = thin(&total, p.eta_tilde);
    let noise = poisson_terms(unmatched_mean(alpha, p) + unmatched_mean(beta, p) + 2.0 * dark_mean(p), n_max);
    let probs: Vec<f64> = convolve(&detected, &noise, n_max).into_iter().map(|q| q.clamp(0.0, 1.0)).collect();
    let kept: f64 = probs.iter().sum();
    CountDistribution::truncated(probs, (1.0 - kept).max(0.0))
}

/// Draws `n_samples` outcomes from `dist` by inverse-CDF sampling with a
/// ChaCha8 generator and returns their empirical distribution. Draws that
/// land in the unresolved tail are reported as tail mass.
pub fn sample_clicks(dist: &CountDistribution, n_samples: usize, seed: u64) -> Result<CountDistribution> {
    if n_samples == 0 {
        return Err(domain("n_samples must be positive"));
    }
    let mut cdf = Vec::with_capacity(dist.len());
    let mut acc = 0.0;
    for p in dist.probs() {
        acc += p;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; dist.len()];
    let mut tail = 0usize;
    for _ in 0..n_samples {
        let u: f64 = rng.gen();
        let n = cdf.partition_point(|&c| c <= u);
        match counts.get_mut(n) {
            Some(c) => *c += 1,
            None => tail += 1,
        }
    }
    let n = n_samples as f64;
    CountDistribution::truncated(counts.iter().map(|&c| c as f64 / n).collect(), tail as f64 / n)
}

/// One-sigma binomial error of an empirical frequency `p` from `n` draws.
pub fn binomial_error(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Vacuum probability of a coherent state `|gamma>` behind a lossy
/// detector of efficiency `eta`, from the attenuation `(1 - eta)^n`.
pub fn attenuated_coherent_p0(gamma: ComplexAmp, eta: f64, dim: usize) -> Result<f64> {
    check_unit("eta", eta)?;
    let st = TruncatedState::coherent_pair(gamma, Complex64::new(0.0, 0.0), dim)?;
    let p = SetupParams::new(eta, 1.0, 1.0)?;
    st.no_click_a(Complex64::new(0.0, 0.0), &p)
}
