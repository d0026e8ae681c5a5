//! Central finite-difference verification of the analytic gradients.

use std::fmt;

use super::{sequence_loss, sequence_loss_and_grads, Gradients};
use crate::error::{Error, Result};
use crate::model::{
    synthesize, FeatureSequence, HyperParams, ModelParams, SpeakerEmbedding, SynthesisConfig, TENSOR_NAMES,
};
use crate::rng;
use crate::train::TeacherForcingConfig;

/// `(f(x + eps) - f(x - eps)) / (2 eps)`
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, eps: f64) -> f64 {
    (f(x + eps) - f(x - eps)) / (2.0 * eps)
}

/// Which coordinates to perturb.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckPlan {
    /// Every coordinate of every tensor and of `z`.
    All,
    /// Up to `per_tensor` coordinates per tensor, drawn without replacement
    /// from a seeded stream; tensors with fewer coordinates are checked fully.
    Subsample { per_tensor: usize, seed: u64 },
    /// Explicit `(tensor name, flat index)` pairs; `"dz"` names the speaker vector.
    Explicit(Vec<(String, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    /// Flat index of the worst coordinate.
    pub argmax: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err() < tol
    }

    /// Tab-separated rows with a header.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("tensor\tchecked\tmax_rel_err\targmax\tanalytic\tnumeric\n");
        for t in &self.tensors {
            s.push_str(&format!(
                "{}\t{}\t{:e}\t{}\t{:e}\t{:e}\n",
                t.name, t.checked, t.max_rel_err, t.argmax, t.analytic, t.numeric
            ));
        }
        s
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:>7} {:>12} {:>7} {:>14} {:>14}",
            "tensor", "checked", "max_rel_err", "argmax", "analytic", "numeric"
        )?;
        for t in &self.tensors {
            writeln!(
                f,
                "{:<8} {:>7} {:>12.3e} {:>7} {:>14.6e} {:>14.6e}",
                t.name, t.checked, t.max_rel_err, t.argmax, t.analytic, t.numeric
            )?;
        }
        write!(f, "max relative error {:.3e}", self.max_rel_err())
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compares analytic gradients with central differences of the loss.
///
/// The teacher-forcing noise stream is fixed by `rng_seed`, so the loss is a
/// deterministic function of the parameters.
#[allow(clippy::too_many_arguments)]
pub fn finite_diff_check(
    params: &ModelParams,
    z: &SpeakerEmbedding,
    phonemes: &[usize],
    target: &FeatureSequence,
    tf: &TeacherForcingConfig,
    rng_seed: u64,
    eps: f64,
    plan: &CheckPlan,
) -> Result<GradCheckReport> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid("eps must be positive"));
    }
    let selection = select(params, z, plan)?;
    if selection.iter().all(|idx| idx.is_empty()) {
        return Ok(GradCheckReport::default());
    }
    let (_, grads) = sequence_loss_and_grads(params, z, phonemes, target, tf, rng_seed)?;

    let loss_at = |slot: usize, idx: usize, delta: f64| -> Result<f64> {
        let mut p = params.clone();
        let mut zz = z.clone();
        if slot == TENSOR_NAMES.len() {
            zz.z[idx] += delta;
        } else {
            p.tensors_mut()[slot].as_mut_slice()[idx] += delta;
            if let Some(id) = z.id {
                zz.z = p.speaker(id)?;
            }
        }
        let l = sequence_loss(&p, &zz, phonemes, target, tf, rng_seed)?;
        if !l.is_finite() {
            return Err(Error::numerical("non-finite loss at perturbed point"));
        }
        Ok(l)
    };

    let mut report = GradCheckReport::default();
    for (slot, indices) in selection.into_iter().enumerate() {
        if indices.is_empty() {
            continue;
        }
        let name = if slot == TENSOR_NAMES.len() { "dz" } else { TENSOR_NAMES[slot] };
        let mut worst = TensorCheck {
            name: name.to_string(),
            checked: indices.len(),
            max_rel_err: -1.0,
            argmax: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for idx in indices {
            let numeric = (loss_at(slot, idx, eps)? - loss_at(slot, idx, -eps)?) / (2.0 * eps);
            let analytic = analytic_at(&grads, slot, idx);
            let err = relative_error(analytic, numeric);
            if err > worst.max_rel_err {
                worst = TensorCheck { max_rel_err: err, argmax: idx, analytic, numeric, ..worst };
            }
        }
        report.tensors.push(worst);
    }
    Ok(report)
}

fn analytic_at(g: &Gradients, slot: usize, idx: usize) -> f64 {
    if slot == TENSOR_NAMES.len() {
        g.dz[idx]
    } else {
        g.params.tensors()[slot].as_slice()[idx]
    }
}

/// Coordinates per slot; slot 16 is the speaker vector.
fn select(params: &ModelParams, z: &SpeakerEmbedding, plan: &CheckPlan) -> Result<Vec<Vec<usize>>> {
    let mut sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    sizes.push(z.z.len());
    Ok(match plan {
        CheckPlan::All => sizes.iter().map(|&n| (0..n).collect()).collect(),
        CheckPlan::Subsample { per_tensor, seed } => {
            let mut r = rng::seeded(*seed);
            sizes
                .iter()
                .map(|&n| {
                    let mut idx: Vec<usize> = (0..n).collect();
                    if n > *per_tensor {
                        rng::shuffle(&mut r, &mut idx);
                        idx.truncate(*per_tensor);
                        idx.sort_unstable();
                    }
                    idx
                })
                .collect()
        }
        CheckPlan::Explicit(pairs) => {
            let mut out = vec![Vec::new(); sizes.len()];
            for (name, idx) in pairs {
                let slot = if name == "dz" {
                    TENSOR_NAMES.len()
                } else {
                    TENSOR_NAMES
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| Error::invalid(format!("unknown tensor {name}")))?
                };
                if *idx >= sizes[slot] {
                    return Err(Error::invalid(format!("index {idx} out of range for {name}")));
                }
                out[slot].push(*idx);
            }
            out
        }
    })
}

/// A seeded toy problem for gradient checks: toy dimensions, `l = 5`, `T = 6`.
///
/// Biases are drawn at random rather than zero so no ReLU sits exactly on
/// its kink, and the targets are the model's own free-running output plus a
/// uniform residual of half-width 0.3. Keeping the loss moderate keeps the
/// rounding error of the central differences well below the smallest
/// gradients being compared.
#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub params: ModelParams,
    pub z: SpeakerEmbedding,
    pub phonemes: Vec<usize>,
    pub target: FeatureSequence,
    pub tf: TeacherForcingConfig,
    pub rng_seed: u64,
}

impl ToyProblem {
    pub const FRAMES: usize = 6;
    pub const PHONEMES: usize = 5;

    pub fn new(hyper: HyperParams, seed: u64) -> Result<Self> {
        let mut params = ModelParams::init(hyper, seed)?;
        let mut r = rng::seeded(rng::derive_seed(seed, &[1]));
        for (name, t) in TENSOR_NAMES.iter().zip(params.tensors_mut()) {
            if name.ends_with(".b1") || name.ends_with(".b2") {
                t.as_mut_slice().iter_mut().for_each(|v| *v = rng::symmetric(&mut r, 0.3));
            }
        }
        let phonemes: Vec<usize> =
            (0..Self::PHONEMES).map(|_| rng::int_inclusive(&mut r, 0, hyper.n_phonemes - 1)).collect();
        let z = SpeakerEmbedding::from_table(&params, seed as usize % hyper.n_speakers)?;
        let cfg = SynthesisConfig { max_frames: Some(Self::FRAMES), stop_margin: f64::INFINITY, ..Default::default() };
        let own = synthesize(&phonemes, &z, &params, &cfg, None)?.features;
        let rows: Vec<Vec<f64>> =
            (0..Self::FRAMES).map(|t| own.frame(t).iter().map(|v| v + rng::symmetric(&mut r, 0.3)).collect()).collect();
        let target = FeatureSequence::from_rows(&rows, own.frame_shift_ms)?;
        Ok(Self { params, z, phonemes, target, tf: TeacherForcingConfig::default(), rng_seed: seed })
    }

    pub fn check(&self, eps: f64, plan: &CheckPlan) -> Result<GradCheckReport> {
        finite_diff_check(&self.params, &self.z, &self.phonemes, &self.target, &self.tf, self.rng_seed, eps, plan)
    }
}
