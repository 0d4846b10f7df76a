//! Detection of cross-correlated extreme events in multivariate return data
//! using fourth-order multivariate cumulant tensors.
//!
//! Ordinary multivariate returns with a Gaussian dependence structure have
//! vanishing cumulants of order three and four. Joint extreme events (many
//! marginals moving together) show up as large fourth-order cumulants, which
//! this crate exploits for outlier detection:
//!
//! - [`tensor`] — symmetric tensor storage, central moments, cumulants of
//!   orders 2–4, tensor self-contraction and its eigendirections, whitening.
//! - [`dist`] — univariate t-Student / Gaussian / χ² distributions, special
//!   functions, tail dependence and the mutual-information split of the
//!   t-Student copula.
//! - [`datagen`] — synthetic data laboratory: random correlation matrices,
//!   Gaussian sampling, t-Student-copula injection, labeled experiment sets.
//! - [`detect`] — the RX (Mahalanobis) baseline and the iterative
//!   fourth-cumulant projection detector, plus ROC construction.
//! - [`eval`] — multi-seed experiment orchestration and aggregation.
//! - [`ingest`] — price CSV ingestion into log-increment matrices.
//! - [`io`] — file formats (data/labels CSV, tensor and result JSON).

// parameter checks are written as `!(x > 0.0)` so that NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod datagen;
pub mod detect;
pub mod dist;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod io;
pub mod tensor;

pub use data::DataMatrix;
pub use datagen::{
    gcop2tstudent, make_experiment, random_correlation, sample_gaussian, CopulaSpec,
    CorrelationMatrix, ExperimentDataset, ExperimentMeta,
};
pub use detect::{
    hosvd_c4_detect, roc_curve, rx_detect, rx_scores, DetectionResult, IterationDiag, RocCurve,
    RocPoint, RxScores, RxThreshold,
};
pub use dist::{
    chi2_quantile, chi2_sample, gaussian_cdf, gaussian_quantile, mi_gaussian, mi_student_extra,
    t_cdf, t_quantile, tail_dependence, MutualInfoReport, TDist,
};
pub use error::{Error, ErrorCategory, Result};
pub use eval::{
    c4_beta_sweep, run_experiment, rx_quantile_sweep, BetaGrid, DetectorChoice, ExperimentConfig,
    ExperimentReport, SeedSpec,
};
pub use ingest::{ingest_prices, log_increments, PriceSeries};
pub use tensor::{
    central_moment, contract_self, cumulants_upto_4, leading_directions, whiten,
    SpectralDirections, SymmetricTensor,
};

/// Configure the global worker-thread count for parallel sections
/// (0 keeps the default of all cores). A no-op without the `parallel`
/// feature. Fails if a global pool was already configured.
pub fn configure_threads(threads: usize) -> std::result::Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            return rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| e.to_string());
        }
        Ok(())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(())
    }
}
