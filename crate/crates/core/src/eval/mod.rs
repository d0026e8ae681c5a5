//! Distortion metrics, memory significance, speaker classification and
//! attention reports.

mod analysis;
mod mcd;
mod perf;

pub use analysis::{attention_report, is_nondecreasing, memory_significance, CentroidClassifier, SignificanceProfile};
pub use mcd::{mcd, mcd_dtw, DtwResult};
pub use perf::{benchmark_inference, InferenceBenchmark};
