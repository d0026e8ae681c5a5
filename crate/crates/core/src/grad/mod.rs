//! Exact reverse-mode gradients of the teacher-forced sequence loss.
//!
//! The forward pass records everything the backward pass needs (buffer
//! snapshots, hidden activations, mixture parameters); the backward pass
//! walks the frames in reverse, carrying adjoints of the buffer, the
//! attention means and the previous output.

mod check;

pub use check::{
    central_difference, finite_diff_check, relative_error, CheckPlan, GradCheckReport, TensorCheck, ToyProblem,
};

use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::model::{
    encode_sentence, gmm_attention, init_buffer, update_input, AttentionDetail, BufferUpdate, FeatureSequence, Mlp,
    ModelParams, SpeakerEmbedding, SpeakerTerms,
};
use crate::rng;
use crate::train::{teacher_forced_input, TeacherForcingConfig};

/// One tensor per parameter tensor, plus the gradient for the speaker vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: ModelParams,
    pub dz: Vec<f64>,
}

impl Gradients {
    pub fn zeros(params: &ModelParams) -> Self {
        Self {
            params: ModelParams::zeros(params.hyper).expect("validated hyper-parameters"),
            dz: vec![0.0; params.hyper.d_s()],
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.params.tensors_mut().into_iter().zip(other.params.tensors()) {
            axpy(1.0, b.as_slice(), a.as_mut_slice());
        }
        axpy(1.0, &other.dz, &mut self.dz);
    }

    pub fn scale(&mut self, a: f64) {
        for t in self.params.tensors_mut() {
            t.as_mut_slice().iter_mut().for_each(|v| *v *= a);
        }
        self.dz.iter_mut().for_each(|v| *v *= a);
    }

    /// L2 norm over the parameter tensors (the speaker vector is not included).
    pub fn norm(&self) -> f64 {
        self.params.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.params.is_finite() && self.dz.iter().all(|v| v.is_finite())
    }
}

/// Everything recorded by the teacher-forced forward pass.
struct Tape {
    /// `flatten(S_t)` for `t = 0..=T`.
    buffers: Vec<Vec<f64>>,
    frames: Vec<FrameRecord>,
    z: Vec<f64>,
    spk: SpeakerTerms<f64>,
    e: Matrix<f64>,
}

struct FrameRecord {
    a_hidden: Vec<f64>,
    detail: AttentionDetail<f64>,
    mu_new: Vec<f64>,
    alpha: Vec<f64>,
    context: Vec<f64>,
    prev_in: Vec<f64>,
    u_hidden: Vec<f64>,
    o_hidden: Vec<f64>,
    o: Vec<f64>,
    residual: Vec<f64>,
}

/// Teacher-forced loss `mean_t (1/d_o) |Y_t - o_t|^2` over exactly `T = Y.len()` frames.
pub fn sequence_loss(
    params: &ModelParams,
    z: &SpeakerEmbedding,
    phonemes: &[usize],
    target: &FeatureSequence,
    tf: &TeacherForcingConfig,
    rng_seed: u64,
) -> Result<f64> {
    forward(params, z, phonemes, target, tf, rng_seed).map(|(loss, _)| loss)
}

/// Loss and its exact gradient with respect to every tensor and `z`.
///
/// When `z.id` is set the speaker gradient is also added to that column of
/// the speaker table.
pub fn sequence_loss_and_grads(
    params: &ModelParams,
    z: &SpeakerEmbedding,
    phonemes: &[usize],
    target: &FeatureSequence,
    tf: &TeacherForcingConfig,
    rng_seed: u64,
) -> Result<(f64, Gradients)> {
    let (loss, tape) = forward(params, z, phonemes, target, tf, rng_seed)?;
    let grads = backward(params, z, phonemes, tf, &tape, true);
    if !grads.is_finite() {
        return Err(Error::numerical("non-finite gradient"));
    }
    Ok((loss, grads))
}

/// Loss and gradient with respect to the speaker vector only. Skips the
/// weight accumulations, which dominate the cost of a full backward pass.
pub fn speaker_loss_and_grad(
    params: &ModelParams,
    z: &SpeakerEmbedding,
    phonemes: &[usize],
    target: &FeatureSequence,
    tf: &TeacherForcingConfig,
    rng_seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let (loss, tape) = forward(params, z, phonemes, target, tf, rng_seed)?;
    let free = SpeakerEmbedding { id: None, ..z.clone() };
    let dz = backward(params, &free, phonemes, tf, &tape, false).dz;
    if dz.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite speaker gradient"));
    }
    Ok((loss, dz))
}

fn mlp_forward_cached(mlp: &Mlp, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut h = vec![0.0; mlp.hidden_dim()];
    let mut y = vec![0.0; mlp.output_dim()];
    mlp.forward_into(x, &mut h, &mut y);
    (h, y)
}

fn finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::numerical(format!("non-finite {what}")))
    }
}

fn forward(
    params: &ModelParams,
    z: &SpeakerEmbedding,
    phonemes: &[usize],
    target: &FeatureSequence,
    tf: &TeacherForcingConfig,
    rng_seed: u64,
) -> Result<(f64, Tape)> {
    let h = params.hyper;
    if target.is_empty() {
        return Err(Error::invalid("target sequence has no frames"));
    }
    if target.dim() != h.d_o {
        return Err(Error::invalid(format!("target has {} features, model outputs {}", target.dim(), h.d_o)));
    }
    if !z.is_finite() {
        return Err(Error::numerical("non-finite speaker embedding"));
    }
    let enc = encode_sentence(phonemes, params)?;
    let l = enc.len();
    let mut s = init_buffer(z, &h)?;
    let spk = SpeakerTerms::new(&z.z, params);
    let mut noise = rng::seeded(rng_seed);

    let n_frames = target.len();
    let mut buffers = Vec::with_capacity(n_frames + 1);
    buffers.push(s.flat().to_vec());
    let mut frames: Vec<FrameRecord> = Vec::with_capacity(n_frames);
    let mut mu = vec![0.0; h.c];
    let mut loss = 0.0;

    for t in 0..n_frames {
        let mut step = || -> Result<FrameRecord> {
            let (a_hidden, raw) = mlp_forward_cached(&params.n_a, s.flat());
            finite(&raw, "attention network output")?;
            let (alpha, mu_new, detail) = gmm_attention(&raw, &mu, l);
            let mut context = vec![0.0; h.d_p];
            enc.e.matvec(&alpha, &mut context);
            finite(&context, "attention context")?;

            let prev_in = match frames.last() {
                None => vec![0.0; h.d_o],
                Some(prev) => teacher_forced_input(&prev.o, target.frame(t - 1), tf, &mut noise),
            };

            let (u_hidden, u) = match h.update {
                BufferUpdate::Network => {
                    let x = update_input(&s, &context, &prev_in, &spk.update);
                    mlp_forward_cached(&params.n_u, &x)
                }
                BufferUpdate::Concat => (Vec::new(), context.iter().chain(&prev_in).copied().collect()),
            };
            finite(&u, "buffer update")?;
            s.shift_insert(&u);

            let (o_hidden, mut o) = mlp_forward_cached(&params.n_o, s.flat());
            axpy(1.0, &spk.output, &mut o);
            finite(&o, "output")?;
            // residual = Y_t - o_t
            let residual: Vec<f64> = target.frame(t).iter().zip(&o).map(|(y, o)| y - o).collect();
            Ok(FrameRecord { a_hidden, detail, mu_new, alpha, context, prev_in, u_hidden, o_hidden, o, residual })
        };
        let rec = step().map_err(|e| e.context(format_args!("frame {t}")))?;
        loss += rec.residual.iter().map(|r| r * r).sum::<f64>() / h.d_o as f64;
        mu.clone_from(&rec.mu_new);
        buffers.push(s.flat().to_vec());
        frames.push(rec);
    }
    let loss = loss / n_frames as f64;
    if !loss.is_finite() {
        return Err(Error::numerical("non-finite loss"));
    }
    Ok((loss, Tape { buffers, frames, z: z.z.clone(), spk, e: enc.e }))
}

/// Backward through `y = W2 relu(W1 x + b1) + b2`, accumulating into `g` and
/// optionally into `dx`. With `weights == false` only `dx` is produced.
fn mlp_backward(mlp: &Mlp, x: &[f64], hidden: &[f64], dy: &[f64], g: &mut Mlp, dx: Option<&mut [f64]>, weights: bool) {
    if weights {
        g.w2.outer_acc(dy, hidden);
        axpy(1.0, dy, g.b2.as_mut_slice());
    }
    let mut dh = vec![0.0; hidden.len()];
    mlp.w2.matvec_t_acc(dy, &mut dh);
    for (d, h) in dh.iter_mut().zip(hidden) {
        if *h <= 0.0 {
            *d = 0.0;
        }
    }
    if weights {
        g.w1.outer_acc(&dh, x);
        axpy(1.0, &dh, g.b1.as_mut_slice());
    }
    if let Some(dx) = dx {
        mlp.w1.matvec_t_acc(&dh, dx);
    }
}

fn backward(
    params: &ModelParams,
    z: &SpeakerEmbedding,
    phonemes: &[usize],
    tf: &TeacherForcingConfig,
    tape: &Tape,
    weights: bool,
) -> Gradients {
    let h = params.hyper;
    let (d, d_p, d_o, c) = (h.d(), h.d_p, h.d_o, h.c);
    let kd = h.buffer_len();
    let l = phonemes.len();
    let n_frames = tape.frames.len();
    let scale = 2.0 / (n_frames as f64 * d_o as f64);

    let mut g = Gradients::zeros(params);
    let mut de = Matrix::<f64>::zeros(d_p, l);
    // Adjoint of tanh(F_u z) + context, summed over frames and pre-multiplied by tanh'.
    let mut d_fu_pre = vec![0.0; d_p];
    let mut d_o_carry = vec![0.0; d_o];
    let mut d_mu = vec![0.0; c];
    let mut d_s = vec![0.0; kd];
    let mut d_s_prev = vec![0.0; kd];
    let mut d_out_total = vec![0.0; d_o];

    let two_pi = std::f64::consts::TAU;
    for t in (0..n_frames).rev() {
        let f = &tape.frames[t];
        let s_prev = &tape.buffers[t];
        let s_cur = &tape.buffers[t + 1];

        // Output: o_t = N_o(flatten S_t) + F_o z
        let g_o: Vec<f64> = f.residual.iter().zip(&d_o_carry).map(|(r, carry)| -scale * r + carry).collect();
        axpy(1.0, &g_o, &mut d_out_total);
        mlp_backward(&params.n_o, s_cur, &f.o_hidden, &g_o, &mut g.params.n_o, Some(&mut d_s), weights);

        // Shift: the newest column is u, the rest came from S_{t-1}.
        let du = d_s[..d].to_vec();
        d_s_prev[..kd - d].copy_from_slice(&d_s[d..]);
        d_s_prev[kd - d..].iter_mut().for_each(|v| *v = 0.0);

        let mut dctx = vec![0.0; d_p];
        let mut d_prev_in = vec![0.0; d_o];
        match h.update {
            BufferUpdate::Network => {
                let x = update_input_from_flat(s_prev, &f.context, &f.prev_in, &tape.spk.update);
                let mut dx = vec![0.0; x.len()];
                mlp_backward(&params.n_u, &x, &f.u_hidden, &du, &mut g.params.n_u, Some(&mut dx), weights);
                axpy(1.0, &dx[..kd], &mut d_s_prev);
                dctx.copy_from_slice(&dx[kd..kd + d_p]);
                d_prev_in.copy_from_slice(&dx[kd + d_p..]);
                for ((acc, dc), th) in d_fu_pre.iter_mut().zip(&dctx).zip(&tape.spk.update) {
                    *acc += dc * (1.0 - th * th);
                }
            }
            BufferUpdate::Concat => {
                dctx.copy_from_slice(&du[..d_p]);
                d_prev_in.copy_from_slice(&du[d_p..]);
            }
        }

        // prev_in = (o_{t-1} + Y_{t-1}) / 2 + eta; frame 0 reads a constant zero.
        if t > 0 && !tf.detach {
            d_o_carry.iter_mut().zip(&d_prev_in).for_each(|(c, v)| *c = 0.5 * v);
        } else {
            d_o_carry.iter_mut().for_each(|c| *c = 0.0);
        }

        // context = E alpha
        if weights {
            de.outer_acc(&dctx, &f.alpha);
        }
        let mut d_alpha = vec![0.0; l];
        tape.e.matvec_t_acc(&dctx, &mut d_alpha);

        // Mixture over positions 1..=l.
        let det = &f.detail;
        let mut d_gp = vec![0.0; c];
        let mut d_raw = vec![0.0; 3 * c];
        for i in 0..c {
            let (gp, var, mu) = (det.gamma_prime[i], det.sigma_sq[i], f.mu_new[i]);
            let unit_norm = 1.0 / (two_pi * var).sqrt();
            let (mut dg, mut dm, mut dv) = (0.0, 0.0, 0.0);
            for (j, da) in d_alpha.iter().enumerate() {
                let diff = (j + 1) as f64 - mu;
                let q = diff * diff / (2.0 * var);
                let n = unit_norm * (-q).exp();
                let phi = gp * n;
                dg += da * n;
                dm += da * phi * diff / var;
                dv += da * phi * (q - 0.5) / var;
            }
            d_gp[i] = dg;
            d_mu[i] += dm;
            d_raw[i] = d_mu[i] * det.increment[i];
            d_raw[c + i] = dv * var;
        }
        let weighted: f64 = det.gamma_prime.iter().zip(&d_gp).map(|(p, dg)| p * dg).sum();
        for i in 0..c {
            d_raw[2 * c + i] = det.gamma_prime[i] * (d_gp[i] - weighted);
        }
        mlp_backward(&params.n_a, s_prev, &f.a_hidden, &d_raw, &mut g.params.n_a, Some(&mut d_s_prev), weights);

        std::mem::swap(&mut d_s, &mut d_s_prev);
    }

    // S_0: z repeated in the top rows of every column.
    let mut dz = vec![0.0; d_p];
    for j in 0..h.k {
        axpy(1.0, &d_s[j * d..j * d + d_p], &mut dz);
    }
    params.f_o.matvec_t_acc(&d_out_total, &mut dz);
    if h.update == BufferUpdate::Network {
        params.f_u.matvec_t_acc(&d_fu_pre, &mut dz);
    }
    if !weights {
        g.dz = dz;
        return g;
    }
    g.params.f_o.outer_acc(&d_out_total, &tape.z);
    if h.update == BufferUpdate::Network {
        g.params.f_u.outer_acc(&d_fu_pre, &tape.z);
    }
    for (j, &s) in phonemes.iter().enumerate() {
        for r in 0..d_p {
            let v = g.params.lut_p.get(r, s) + de.get(r, j);
            g.params.lut_p.set(r, s, v);
        }
    }
    if let Some(id) = z.id {
        for (r, v) in dz.iter().enumerate() {
            let cur = g.params.lut_s.get(r, id);
            g.params.lut_s.set(r, id, cur + v);
        }
    }
    g.dz = dz;
    g
}

fn update_input_from_flat(s_flat: &[f64], context: &[f64], prev_in: &[f64], spk_update: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(s_flat.len() + context.len() + prev_in.len());
    x.extend_from_slice(s_flat);
    x.extend(context.iter().zip(spk_update).map(|(c, s)| c + s));
    x.extend_from_slice(prev_in);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{synthesize, HyperParams, SynthesisConfig};

    fn setup(seed: u64) -> (ModelParams, SpeakerEmbedding, Vec<usize>, FeatureSequence) {
        let p = ModelParams::init(HyperParams::toy(), seed).unwrap();
        let z = SpeakerEmbedding::from_table(&p, 1).unwrap();
        let mut r = rng::seeded(seed + 100);
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng::symmetric(&mut r, 1.0)).collect()).collect();
        (p, z, vec![1, 4, 2, 2, 7], FeatureSequence::from_rows(&rows, 5.0).unwrap())
    }

    #[test]
    fn exact_single_frame_target_gives_zero_gradient() {
        let (p, z, ph, _) = setup(1);
        let cfg = SynthesisConfig { max_frames: Some(1), ..Default::default() };
        let y = synthesize(&ph, &z, &p, &cfg, None).unwrap().features;
        let (loss, g) = sequence_loss_and_grads(&p, &z, &ph, &y, &TeacherForcingConfig::default(), 3).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.params.tensors().iter().all(|t| t.as_slice().iter().all(|v| *v == 0.0)));
        assert!(g.dz.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn noiseless_teacher_forcing_matches_free_running_on_own_output() {
        // With Y equal to the free-running output and no noise, the mixed input
        // equals o_{t-1}, so the loss is zero over every frame.
        let (p, z, ph, _) = setup(2);
        let cfg = SynthesisConfig { max_frames: Some(6), ..Default::default() };
        let y = synthesize(&ph, &z, &p, &cfg, None).unwrap().features;
        let loss = sequence_loss(&p, &z, &ph, &y, &TeacherForcingConfig::noiseless(), 0).unwrap();
        assert!(loss < 1e-28, "{loss}");
    }

    #[test]
    fn speaker_only_gradient_matches_full_pass() {
        let (p, z, ph, y) = setup(4);
        let tf = TeacherForcingConfig::default();
        let (l1, g) = sequence_loss_and_grads(&p, &z, &ph, &y, &tf, 9).unwrap();
        let (l2, dz) = speaker_loss_and_grad(&p, &z, &ph, &y, &tf, 9).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g.dz, dz);
    }

    #[test]
    fn doubling_residual_quadruples_loss() {
        let (p, z, ph, _) = setup(3);
        let cfg = SynthesisConfig { max_frames: Some(6), ..Default::default() };
        let own = synthesize(&ph, &z, &p, &cfg, None).unwrap().features;
        let tf = TeacherForcingConfig::noiseless();
        // Teacher forcing feeds back (o + Y)/2, so perturb only the final frame
        // where no later frame reads the target.
        let shifted = |a: f64| {
            let mut f = own.frames.clone();
            for c in 0..3 {
                let v = f.get(5, c) + a * (c as f64 + 1.0);
                f.set(5, c, v);
            }
            FeatureSequence::new(f, 5.0).unwrap()
        };
        let l1 = sequence_loss(&p, &z, &ph, &shifted(0.5), &tf, 0).unwrap();
        let l2 = sequence_loss(&p, &z, &ph, &shifted(1.0), &tf, 0).unwrap();
        assert!((l2 - 4.0 * l1).abs() < 1e-12 * l2.max(1.0), "{l1} {l2}");
    }

    #[test]
    fn gradients_are_local_to_used_rows() {
        let (p, z, ph, y) = setup(4);
        let (_, g) = sequence_loss_and_grads(&p, &z, &ph, &y, &TeacherForcingConfig::default(), 9).unwrap();
        for s in 0..p.hyper.n_phonemes {
            let col = g.params.lut_p.column(s);
            if ph.contains(&s) {
                assert!(col.iter().any(|v| *v != 0.0));
            } else {
                assert!(col.iter().all(|v| *v == 0.0), "phoneme {s}");
            }
        }
        for id in 0..p.hyper.n_speakers {
            let col = g.params.lut_s.column(id);
            if id == 1 {
                assert_eq!(col, g.dz);
            } else {
                assert!(col.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn concat_update_leaves_update_network_untouched() {
        let (mut p, z, ph, y) = setup(5);
        p.hyper.update = BufferUpdate::Concat;
        let (_, g) = sequence_loss_and_grads(&p, &z, &ph, &y, &TeacherForcingConfig::default(), 1).unwrap();
        assert!(g.params.n_u.w1.as_slice().iter().all(|v| *v == 0.0));
        assert!(g.params.f_u.as_slice().iter().all(|v| *v == 0.0));
        assert!(g.params.n_a.w1.as_slice().iter().any(|v| *v != 0.0));
    }

    #[test]
    fn wrong_target_width_is_invalid() {
        let (p, z, ph, _) = setup(6);
        let y = FeatureSequence::from_rows(&[vec![0.0; 5]], 5.0).unwrap();
        let err = sequence_loss(&p, &z, &ph, &y, &TeacherForcingConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
