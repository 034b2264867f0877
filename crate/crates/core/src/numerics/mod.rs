//! Dense matrices, seeded random generation, special functions and
//! histogram statistics shared by every other module.

mod matrix;
mod rng;
mod special;
mod stats;

pub use matrix::Matrix;
pub use rng::{gaussian_matrix, mix_seed, Rng};
pub use special::{erf, erfc, erfinv, normal_cdf, normal_pdf};
pub use stats::{build_histogram, mean_std, sturges_bin_count, HistogramSummary};
