use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::FeatureSequence;

/// `10 / ln 10`
const DB: f64 = 10.0 / std::f64::consts::LN_10;

fn check_range(range: &Range<usize>, len: usize) -> Result<()> {
    if range.start >= range.end || range.end > len {
        return Err(Error::invalid(format!("coefficient range {range:?} invalid for {len} coefficients")));
    }
    Ok(())
}

/// Mel cepstral distortion between two frames over `range`:
/// `(10 / ln 10) * sqrt(2 * sum (a_i - b_i)^2)`.
pub fn mcd(a: &[f64], b: &[f64], range: Range<usize>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("frames have lengths {} and {}", a.len(), b.len())));
    }
    check_range(&range, a.len())?;
    Ok(mcd_unchecked(&a[range.clone()], &b[range]))
}

fn mcd_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    DB * (2.0 * s).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    /// Aligned frame pairs, 0-based, from `(0, 0)` to `(T_a - 1, T_b - 1)`.
    pub path: Vec<(usize, usize)>,
    pub total_cost: f64,
    /// Total cost divided by the path length.
    pub mean_cost: f64,
}

impl DtwResult {
    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }
}

/// Dynamic time warping with steps `(1,0)`, `(0,1)`, `(1,1)` and frame-level
/// MCD as the local cost. Returns the mean cost along the optimal path.
pub fn mcd_dtw(a: &FeatureSequence, b: &FeatureSequence, range: Range<usize>) -> Result<(f64, DtwResult)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("DTW needs two non-empty sequences"));
    }
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!("sequences have {} and {} features", a.dim(), b.dim())));
    }
    check_range(&range, a.dim())?;
    let (n, m) = (a.len(), b.len());
    let cost = |i: usize, j: usize| mcd_unchecked(&a.frame(i)[range.clone()], &b.frame(j)[range.clone()]);

    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
                let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i * m + j] = best + cost(i, j);
        }
    }

    // Backtrack, preferring the diagonal on ties.
    let (mut i, mut j) = (n - 1, m - 1);
    let mut path = vec![(i, j)];
    while i > 0 || j > 0 {
        let (pi, pj) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[(i - 1) * m + j - 1];
            let up = acc[(i - 1) * m + j];
            let left = acc[i * m + j - 1];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        i = pi;
        j = pj;
        path.push((i, j));
    }
    path.reverse();
    let total_cost = acc[n * m - 1];
    let mean_cost = total_cost / path.len() as f64;
    Ok((mean_cost, DtwResult { path, total_cost, mean_cost }))
}
