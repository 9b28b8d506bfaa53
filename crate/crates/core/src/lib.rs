//! Nonparametric estimation and testing for mixture cure models with
//! right-censored data and a single covariate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beran;
pub mod covtest;
pub mod cure;
pub mod error;
pub mod hboot;
pub mod io;
pub mod kernel;
pub mod km;
pub mod mz;
pub mod params;
pub mod pilot;
pub mod resample;
pub mod rng;
pub mod sample;
pub mod sim;
pub mod stats;

pub use beran::{
    beran_censoring, beran_curve, beran_survival, beran_survival_weighted, berancv, BandwidthGrid,
    BandwidthSpec, SelectedBandwidth,
};
pub use covtest::{
    estimate_eta, testcov, testcov_with, u_process, CensoringModel, CovTestOptions, CovTestResult,
    CovariateKind, EtaResponse,
};
pub use cure::{
    conditional_survival, latency, probcure, CureEstimate, CurveEstimate, CurveKind,
    LatencyEstimate,
};
pub use error::{CureError, ErrorClass, PointError, Result};
pub use hboot::{latency_hboot, probcure_hboot, smooth_bandwidths};
pub use kernel::{epanechnikov, nw_weights, KernelWeights};
pub use km::{km_cure, km_survival, stratified_cure, StepCurve, StratumCure};
pub use mz::{mz_pvalue, testmz, MZTestResult};
pub use params::{ControlParams, PilotHook, DEFAULT_SEED};
pub use pilot::{hpilot, PilotBandwidth};
pub use resample::bootstrap_resample;
pub use sample::{Covariate, SurvivalSample};
pub use sim::{simulate_model, Simulated, TrueModel};
