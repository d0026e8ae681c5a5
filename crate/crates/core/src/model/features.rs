use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_FRAME_SHIFT_MS: f64 = 5.0;

/// `T x d_o` vocoder feature frames, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub frames: Matrix<f64>,
    pub frame_shift_ms: f64,
}

impl FeatureSequence {
    pub fn new(frames: Matrix<f64>, frame_shift_ms: f64) -> Result<Self> {
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(Error::invalid("feature sequence needs at least one frame and one feature"));
        }
        if !frames.is_finite() {
            return Err(Error::invalid("feature sequence contains non-finite values"));
        }
        Ok(Self { frames, frame_shift_ms })
    }

    pub fn from_rows(rows: &[Vec<f64>], frame_shift_ms: f64) -> Result<Self> {
        let t = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("ragged feature rows"));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(Matrix::from_vec(t, d, data), frame_shift_ms)
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    #[inline]
    pub fn frame(&self, t: usize) -> &[f64] {
        self.frames.row(t)
    }

    pub fn mean_frame(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for t in 0..self.len() {
            for (a, v) in m.iter_mut().zip(self.frame(t)) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn duration_ms(&self) -> f64 {
        self.len() as f64 * self.frame_shift_ms
    }
}
