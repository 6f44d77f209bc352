//! Metrics, estimator adapters, and the Monte Carlo experiment drivers.

mod estimator;
mod experiments;
mod metrics;
mod report;

pub use estimator::{Estimator, Method, Model, Music, Omp, Oracle, Periodogram, Trial};
pub use experiments::{
    psnr_vs_snr, resolution_sweep, sidelobe_experiment, two_tone_scene, ExperimentConfig, SidelobeCondition,
    SIDELOBE_SEPARATIONS, SIDELOBE_SNRS,
};
pub use metrics::{psnr, resolution_decision, PSNR_CAP_DB};
pub use report::{Curve, ExperimentReport, REPORT_FORMAT, REPORT_VERSION};
