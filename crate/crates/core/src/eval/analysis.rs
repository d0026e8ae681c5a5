use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{AttentionTrace, FeatureSequence, ModelParams};

/// Mean absolute first-layer weight fed by each buffer column, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceProfile {
    pub n_u: Vec<f64>,
    pub n_a: Vec<f64>,
    pub n_o: Vec<f64>,
}

fn column_significance(w1: &Matrix<f64>, d: usize, k: usize) -> Vec<f64> {
    (0..k)
        .map(|j| {
            let mut s = 0.0;
            for r in 0..w1.rows() {
                s += w1.row(r)[j * d..(j + 1) * d].iter().map(|v| v.abs()).sum::<f64>();
            }
            s / (w1.rows() * d) as f64
        })
        .collect()
}

/// Averages `|W1|` over hidden units and the `d` inputs of each buffer
/// column. For the update network only the buffer block of the input is
/// used. Loop-less models report an empty `n_u`.
pub fn memory_significance(params: &ModelParams) -> SignificanceProfile {
    let h = &params.hyper;
    let (d, k) = (h.d(), h.k);
    let n_u = match h.update {
        crate::model::BufferUpdate::Network => column_significance(&params.n_u.w1, d, k),
        crate::model::BufferUpdate::Concat => Vec::new(),
    };
    SignificanceProfile {
        n_u,
        n_a: column_significance(&params.n_a.w1, d, k),
        n_o: column_significance(&params.n_o.w1, d, k),
    }
}

impl SignificanceProfile {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("column\tn_u\tn_a\tn_o\n");
        for j in 0..self.n_a.len() {
            let u = self.n_u.get(j).map_or(String::from("-"), |v| format!("{v:.6e}"));
            s.push_str(&format!("{}\t{u}\t{:.6e}\t{:.6e}\n", j + 1, self.n_a[j], self.n_o[j]));
        }
        s
    }
}

/// Nearest-centroid speaker classifier over mean frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidClassifier {
    pub centroids: Vec<Vec<f64>>,
}

impl CentroidClassifier {
    /// `groups[s]` holds the sequences of speaker `s`. The centroid is the
    /// mean over every frame of every sequence.
    pub fn fit(groups: &[Vec<&FeatureSequence>]) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::invalid("a classifier needs at least two speakers"));
        }
        let dim = groups.iter().flatten().next().map(|s| s.dim()).ok_or_else(|| Error::invalid("no sequences"))?;
        let mut centroids = Vec::with_capacity(groups.len());
        for (s, seqs) in groups.iter().enumerate() {
            let mut sum = vec![0.0; dim];
            let mut n = 0usize;
            for seq in seqs {
                if seq.dim() != dim {
                    return Err(Error::invalid(format!("speaker {s}: frame width {} differs from {dim}", seq.dim())));
                }
                for t in 0..seq.len() {
                    sum.iter_mut().zip(seq.frame(t)).for_each(|(a, b)| *a += b);
                }
                n += seq.len();
            }
            if n == 0 {
                return Err(Error::invalid(format!("speaker {s} has no frames")));
            }
            centroids.push(sum.into_iter().map(|v| v / n as f64).collect());
        }
        Ok(Self { centroids })
    }

    pub fn fit_corpus(corpus: &crate::data::Corpus) -> Result<Self> {
        let groups: Vec<Vec<&FeatureSequence>> =
            (0..corpus.n_speakers).map(|s| corpus.by_speaker(s).map(|u| &u.features).collect()).collect();
        Self::fit(&groups)
    }

    pub fn distances(&self, seq: &FeatureSequence) -> Vec<f64> {
        let m = seq.mean_frame();
        self.centroids.iter().map(|c| c.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()).collect()
    }

    /// Closest centroid; ties go to the lowest speaker id.
    pub fn classify(&self, seq: &FeatureSequence) -> Result<usize> {
        if seq.dim() != self.centroids[0].len() {
            return Err(Error::invalid(format!("frame width {} differs from {}", seq.dim(), self.centroids[0].len())));
        }
        let d = self.distances(seq);
        let mut best = 0;
        for (i, v) in d.iter().enumerate() {
            if *v < d[best] {
                best = i;
            }
        }
        Ok(best)
    }
}

/// For each input position, the frame (0-based) where its attention weight
/// peaks. Ties go to the earliest frame.
pub fn attention_report(trace: &AttentionTrace, n_phonemes: usize) -> Result<Vec<usize>> {
    if trace.is_empty() {
        return Err(Error::invalid("attention trace is empty"));
    }
    if trace.alpha.iter().any(|a| a.len() != n_phonemes) {
        return Err(Error::invalid(format!("trace rows do not have {n_phonemes} positions")));
    }
    Ok((0..n_phonemes)
        .map(|j| {
            let mut best = 0;
            for (t, a) in trace.alpha.iter().enumerate() {
                if a[j] > trace.alpha[best][j] {
                    best = t;
                }
            }
            best
        })
        .collect())
}

pub fn is_nondecreasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HyperParams;

    #[test]
    fn significance_of_constant_weights_is_flat() {
        let mut p = ModelParams::<f64>::zeros(HyperParams::toy()).unwrap();
        p.n_a.w1.fill(-1.0);
        p.n_o.w1.fill(1.0);
        p.n_u.w1.fill(2.0);
        let s = memory_significance(&p);
        assert_eq!(s.n_a, vec![1.0; 3]);
        assert_eq!(s.n_o, vec![1.0; 3]);
        assert_eq!(s.n_u, vec![2.0; 3]);
    }

    #[test]
    fn significance_of_first_column_only() {
        let h = HyperParams::toy();
        let mut p = ModelParams::<f64>::zeros(h).unwrap();
        for r in 0..p.n_o.w1.rows() {
            for c in 0..h.d() {
                p.n_o.w1.set(r, c, 0.5);
            }
        }
        let s = memory_significance(&p);
        assert!(s.n_o[0] > 0.0);
        assert_eq!(&s.n_o[1..], &[0.0, 0.0]);
    }

    fn seq(v: f64) -> FeatureSequence {
        FeatureSequence::from_rows(&[vec![v, v]], 5.0).unwrap()
    }

    #[test]
    fn classifier_ties_and_nearest() {
        let (a, b) = (seq(0.0), seq(0.0));
        let c = CentroidClassifier::fit(&[vec![&a], vec![&b]]).unwrap();
        assert_eq!(c.classify(&seq(3.0)).unwrap(), 0);
        let far = seq(5.0);
        let c = CentroidClassifier::fit(&[vec![&a], vec![&far]]).unwrap();
        assert_eq!(c.classify(&seq(4.0)).unwrap(), 1);
        assert!(CentroidClassifier::fit(&[vec![&a], vec![]]).is_err());
        assert!(CentroidClassifier::fit(&[vec![&a]]).is_err());
    }

    #[test]
    fn report_picks_earliest_peak() {
        let trace = AttentionTrace { alpha: vec![vec![0.5, 0.1], vec![0.5, 0.3], vec![0.1, 0.3]], mu: vec![vec![]; 3] };
        assert_eq!(attention_report(&trace, 2).unwrap(), vec![0, 1]);
        assert!(attention_report(&AttentionTrace::default(), 2).is_err());
    }
}
