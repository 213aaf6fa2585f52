//! Spectral gaps of level sets and distortion bounds for their embeddings.

mod distortion;
mod gap;

pub use distortion::{
    classical_mds, distortion_lower_bound, distortion_of, distortion_report, distortion_upper_bound, DistortionReport,
    Embedding, LowerBound, MetricMatrix, OptimizerConfig, UpperBound,
};
pub use gap::{gap_trend, spectral_gap, AveragingOperator, GapTrend, SpectralGap, ITERATION_CAP, RESIDUAL_TOL};
