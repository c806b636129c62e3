//! Bell tests with on/off (no-click) detectors, expressed through
//! s-parametrized phase-space quasiprobabilities.
//!
//! The no-click probability of a detector with efficiency `eta` behind a
//! displaced mode samples the state's quasiprobability at ordering
//! `-(2 - eta)/eta`. This crate evaluates the Clauser–Horne combination from
//! those samples, optimizes it over the probe amplitudes, sweeps it over
//! efficiency and mode matching, and cross-checks everything against a
//! truncated Fock-space simulation.

pub mod bell;
pub mod detection;
pub mod error;
pub mod fockoracle;
pub mod optimize;
pub mod ordering;
pub mod states;
pub mod sweep;

pub use bell::{ch_combination, ch_violation, orient, CHResult, DisplacementSettings, Orientation, SetupParams};
pub use detection::{pi_s, CountDistribution};
pub use error::{Error, Result};
pub use optimize::{maximize_ch, nelder_mead, ParamVector, SimplexConfig};
pub use ordering::{effective_ordering, no_click_ordering, ordering_transform, OrderingParam, Quadrature};
pub use states::{ComplexAmp, StateFamily, StateKind};

pub use sweep::{export_grid, find_eta_threshold, sweep_ch, AxisRange, ExportFormat, SweepGrid, SweepSpec, ThresholdResult};
