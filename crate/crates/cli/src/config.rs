use std::path::{Path, PathBuf};

use quasibell::sweep::{AxisRange, CONTOUR_OFFSET};
use quasibell::{ExportFormat, SetupParams, SimplexConfig, StateFamily, SweepSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRanges {
    /// Lower end of the efficiency axis; defaults to `1 / resolution`.
    pub eta_min: Option<f64>,
    pub eta_max: f64,
    /// Lower end of the mode-matching axis; defaults to `1 / resolution`.
    pub xi_min: Option<f64>,
    pub xi_max: f64,
    /// Points per axis.
    pub resolution: usize,
    pub warm_start: bool,
}

impl Default for SweepRanges {
    fn default() -> Self {
        SweepRanges { eta_min: None, eta_max: 1.0, xi_min: None, xi_max: 1.0, resolution: 50, warm_start: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdOptions {
    pub tol: f64,
    /// Contour level the maximized CH value has to exceed.
    pub level: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions { tol: 1e-3, level: CONTOUR_OFFSET }
    }
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub state: Option<StateFamily>,
    pub setup: SetupParams,
    pub simplex: SimplexConfig,
    pub sweep: SweepRanges,
    pub threshold: ThresholdOptions,
    pub output: Option<PathBuf>,
    pub format: ExportFormat,
    /// Overrides `simplex.rng_seed` when set.
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// Fock truncation for the oracle checks.
    pub dim: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            state: None,
            setup: SetupParams::perfect(),
            simplex: SimplexConfig::default(),
            sweep: SweepRanges::default(),
            threshold: ThresholdOptions::default(),
            output: None,
            format: ExportFormat::Csv,
            seed: None,
            workers: None,
            dim: quasibell::fockoracle::DEFAULT_DIM,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Folds `seed` into the simplex settings and validates the result.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        if let Some(seed) = self.seed {
            self.simplex.rng_seed = seed;
        }
        self.seed = Some(self.simplex.rng_seed);
        self.simplex.validate()?;
        self.setup.validate()?;
        if self.workers == Some(0) {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        if self.sweep.resolution == 0 {
            return Err(CliError::Usage("--resolution must be positive".into()));
        }
        Ok(self)
    }

    pub fn family(&self) -> Result<StateFamily, CliError> {
        self.state.ok_or_else(|| CliError::Usage("no state given; pass --state single-photon|tmsv".into()))
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, CliError> {
        let n = self.sweep.resolution;
        let lo = 1.0 / n as f64;
        let eta = AxisRange::new(self.sweep.eta_min.unwrap_or(lo), self.sweep.eta_max, n)?;
        let xi = AxisRange::new(self.sweep.xi_min.unwrap_or(lo), self.sweep.xi_max, n)?;
        let mut spec = SweepSpec::new(self.family()?, eta, xi, self.setup.p_dark);
        spec.warm_start = self.sweep.warm_start;
        Ok(spec)
    }
}
