//! Classical line-spectra estimators: windowed periodogram, MUSIC, OMP, and
//! eigenvalue-based model-order selection.

mod covariance;
mod music;
mod omp;
mod order;
mod periodogram;

pub use covariance::{sample_covariance, HermitianMatrix};
pub use music::{music, music_with_order, OrderRule};
pub use omp::{omp, OmpResult};
pub use order::{estimate_order_aic, estimate_order_sorte, SorteEstimate};
pub use periodogram::{periodogram, Window};
