//! Self-checks comparing the closed forms against independent routes.

use std::fmt;

use quasibell::bell::{lhv_kernel, lhv_kernel_max, q_joint, q_marginal, Arm};
use quasibell::detection::convolve_dark;
use quasibell::fockoracle::{oracle_q_joint, oracle_q_marginal};
use quasibell::states::{q_function_tmsv, w_joint_tmsv};
use quasibell::{
    no_click_ordering, ordering_transform, pi_s, ComplexAmp, CountDistribution, OrderingParam, Quadrature, SetupParams,
    StateKind,
};
use rayon::prelude::*;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Oracle,
    Factorization,
    Transform,
    Lhv,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Oracle, Suite::Factorization, Suite::Transform, Suite::Lhv];

    fn tolerance(self) -> f64 {
        match self {
            Suite::Oracle => 1e-8,
            Suite::Factorization => 1e-12,
            Suite::Transform => 1e-6,
            Suite::Lhv => 1e-12,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Oracle => "oracle",
            Suite::Factorization => "factorization",
            Suite::Transform => "transform",
            Suite::Lhv => "lhv",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub note: String,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: max deviation {:.3e} (tolerance {:.0e}){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.max_deviation,
            self.tolerance,
            if self.note.is_empty() { String::new() } else { format!("; {}", self.note) }
        )
    }
}

fn c(re: f64, im: f64) -> ComplexAmp {
    ComplexAmp::new(re, im)
}

fn amplitudes() -> Vec<ComplexAmp> {
    vec![c(0.0, 0.0), c(0.4, 0.0), c(-0.3, 0.7), c(0.9, -0.5), c(-1.1, -0.2), c(0.2, 1.3)]
}

fn setups() -> Vec<SetupParams> {
    [(1.0, 1.0, 1.0), (0.8, 0.9, 0.97), (0.55, 0.7, 0.9)]
        .into_iter()
        .map(|(e, x, p)| SetupParams::new(e, x, p).expect("fixed setups are valid"))
        .collect()
}

fn oracle(dim: usize) -> Result<(f64, String), CliError> {
    let states = [
        StateKind::SinglePhotonSplit,
        StateKind::TwoModeSqueezedVacuum { r: 0.3 },
        StateKind::TwoModeSqueezedVacuum { r: 0.8 },
    ];
    let amps = amplitudes();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for state in &states {
        for p in setups() {
            for (k, &a) in amps.iter().enumerate() {
                let b = amps[(k + 2) % amps.len()];
                worst = worst.max((q_joint(state, a, b, &p)? - oracle_q_joint(state, a, b, &p, dim)?).abs());
                worst = worst.max((q_marginal(state, a, &p, Arm::A)? - oracle_q_marginal(state, a, &p, dim)?).abs());
                count += 2;
            }
        }
    }
    Ok((worst, format!("{count} probabilities at Fock dimension {dim}")))
}

fn factorization() -> Result<(f64, String), CliError> {
    let poisson = |means: &[f64]| means.iter().map(|&m| CountDistribution::poisson(m)).collect::<Result<Vec<_>, _>>();
    let (fields, darks) = (poisson(&[0.1, 0.8, 2.5])?, poisson(&[0.01, 0.2])?);
    let mut worst: f64 = 0.0;
    for field in &fields {
        for dark in &darks {
            let joint = convolve_dark(field, dark);
            for s in [-1.0, -0.8, -0.5, -0.2] {
                let s = OrderingParam::new(s)?;
                worst = worst.max((pi_s(&joint, s) - pi_s(field, s) * pi_s(dark, s)).abs());
            }
        }
    }
    Ok((worst, "Poisson field and dark-count pairs".into()))
}

fn transform() -> Result<(f64, String), CliError> {
    let quad = Quadrature::default();
    let amps = amplitudes();
    let cases: Vec<(f64, f64, usize)> =
        [0.5, 1.0].into_iter().flat_map(|r| [0.6, 1.0].into_iter().flat_map(move |eta| (0..3).map(move |k| (r, eta, k)))).collect();
    let deviations = cases
        .into_par_iter()
        .map(|(r, eta, k)| {
            let pts = [amps[k + 1], amps[k + 3]];
            let via = ordering_transform(
                |z: &[ComplexAmp]| q_function_tmsv(z[0], z[1], r),
                OrderingParam::Q_FUNCTION,
                no_click_ordering(eta)?,
                &pts,
                &quad,
            )?;
            Ok((via - w_joint_tmsv(pts[0], pts[1], eta, r)?).abs())
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let worst = deviations.into_iter().fold(0.0, f64::max);
    Ok((worst, "squeezed-vacuum Q function carried to the no-click ordering".into()))
}

fn lhv() -> Result<(f64, String), CliError> {
    let perfect = SetupParams::perfect();
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for a in amplitudes() {
        let top = lhv_kernel_max(a, &perfect)?;
        peak = peak.max(top);
        worst = worst.max((top - 2.0).abs());
        for b in amplitudes() {
            // a kernel value above the peak counts as a deviation
            worst = worst.max(lhv_kernel(a, a + b, &perfect)? - top);
        }
    }
    Ok((worst, format!("kernel max {peak:?} at perfect parameters")))
}

pub fn run(suite: Suite, dim: usize) -> Result<SuiteReport, CliError> {
    let (max_deviation, note) = match suite {
        Suite::Oracle => oracle(dim)?,
        Suite::Factorization => factorization()?,
        Suite::Transform => transform()?,
        Suite::Lhv => lhv()?,
    };
    let tolerance = suite.tolerance();
    Ok(SuiteReport { suite, passed: max_deviation < tolerance, max_deviation, tolerance, note })
}
