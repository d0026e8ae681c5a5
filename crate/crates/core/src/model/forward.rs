//! One generation step and full-sequence synthesis.

use super::buffer::Buffer;
use super::features::{FeatureSequence, DEFAULT_FRAME_SHIFT_MS};
use super::hyper::{BufferUpdate, HyperParams};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Real};

/// Phoneme embeddings of one sentence, one column per phoneme.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEncoding<T = f64> {
    pub phonemes: Vec<usize>,
    /// `d_p x l`
    pub e: Matrix<T>,
}

impl<T: Real> SentenceEncoding<T> {
    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerEmbedding<T = f64> {
    pub z: Vec<T>,
    /// Set when `z` is a column of the speaker table; gradients with respect
    /// to `z` are then also routed into that column.
    pub id: Option<usize>,
}

impl<T: Real> SpeakerEmbedding<T> {
    pub fn new(z: Vec<T>) -> Self {
        Self { z, id: None }
    }

    pub fn from_table(params: &ModelParams<T>, id: usize) -> Result<Self> {
        Ok(Self { z: params.speaker(id)?, id: Some(id) })
    }

    pub fn zeros(hyper: &HyperParams) -> Self {
        Self::new(vec![T::zero(); hyper.d_s()])
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> SpeakerEmbedding<U> {
        SpeakerEmbedding { z: self.z.iter().map(|v| U::of(v.as_f64())).collect(), id: self.id }
    }
}

/// Means of the attention mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState<T = f64> {
    pub mu: Vec<T>,
}

impl<T: Real> AttentionState<T> {
    pub fn zeros(c: usize) -> Self {
        Self { mu: vec![T::zero(); c] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionDetail<T = f64> {
    /// Mixture weights after softmax.
    pub gamma_prime: Vec<T>,
    pub sigma_sq: Vec<T>,
    /// Per-step mean increments `exp(kappa)`.
    pub increment: Vec<T>,
    /// `c x l` per-component weights over input positions.
    pub phi: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStepOutput<T = f64> {
    pub alpha: Vec<T>,
    pub context: Vec<T>,
    pub mu_new: Vec<T>,
    pub detail: AttentionDetail<T>,
}

/// Per-frame attention weights and mixture means of one synthesis run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionTrace {
    /// `T` rows of length `l`.
    pub alpha: Vec<Vec<f64>>,
    /// `T` rows of length `c`.
    pub mu: Vec<Vec<f64>>,
}

impl AttentionTrace {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// The attention weights as a `T x l` matrix.
    pub fn alpha_matrix(&self) -> Matrix<f64> {
        let l = self.alpha.first().map_or(0, |r| r.len());
        Matrix::from_vec(self.alpha.len(), l, self.alpha.iter().flatten().copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    /// Frame cap per input phoneme when `max_frames` is unset.
    pub frames_per_phoneme: usize,
    /// Stop once the dominant component's mean passes `l + stop_margin`.
    pub stop_margin: f64,
    pub max_frames: Option<usize>,
    pub frame_shift_ms: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self { frames_per_phoneme: 20, stop_margin: 1.0, max_frames: None, frame_shift_ms: DEFAULT_FRAME_SHIFT_MS }
    }
}

impl SynthesisConfig {
    pub fn frame_cap(&self, l: usize) -> usize {
        self.max_frames.unwrap_or(self.frames_per_phoneme * l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The attention moved past the end of the input.
    AttentionEnd,
    MaxFrames,
}

#[derive(Debug, Clone)]
pub struct Synthesis<T = f64> {
    pub features: FeatureSequence,
    pub trace: AttentionTrace,
    pub stop: StopReason,
    pub final_buffer: Buffer<T>,
}

pub fn encode_sentence<T: Real>(phonemes: &[usize], params: &ModelParams<T>) -> Result<SentenceEncoding<T>> {
    if phonemes.is_empty() {
        return Err(Error::invalid("empty phoneme sequence"));
    }
    let n = params.hyper.n_phonemes;
    if let Some((i, &s)) = phonemes.iter().enumerate().find(|(_, &s)| s >= n) {
        return Err(Error::invalid(format!("phoneme id {s} at index {i} out of range 0..{n}")));
    }
    let d_p = params.hyper.d_p;
    let e = Matrix::from_fn(d_p, phonemes.len(), |r, j| params.lut_p.get(r, phonemes[j]));
    Ok(SentenceEncoding { phonemes: phonemes.to_vec(), e })
}

/// `S_0`: the speaker embedding repeated in the top `d_p` rows of every
/// column, zeros below.
pub fn init_buffer<T: Real>(z: &SpeakerEmbedding<T>, hyper: &HyperParams) -> Result<Buffer<T>> {
    if z.z.len() != hyper.d_s() {
        return Err(Error::invalid(format!("speaker embedding has {} entries, expected {}", z.z.len(), hyper.d_s())));
    }
    let mut s = Buffer::zeros(hyper.d(), hyper.k);
    for j in 0..hyper.k {
        s.column_mut(j)[..hyper.d_p].copy_from_slice(&z.z);
    }
    Ok(s)
}

/// Turns the raw attention-network output `[kappa, beta, gamma]` into the
/// mixture over input positions `1..=l`.
pub fn gmm_attention<T: Real>(raw: &[T], mu_prev: &[T], l: usize) -> (Vec<T>, Vec<T>, AttentionDetail<T>) {
    let c = mu_prev.len();
    debug_assert_eq!(raw.len(), 3 * c);
    let (kappa, rest) = raw.split_at(c);
    let (beta, gamma) = rest.split_at(c);

    let g_max = gamma.iter().copied().fold(T::neg_infinity(), T::max);
    let mut gamma_prime: Vec<T> = gamma.iter().map(|g| (*g - g_max).exp()).collect();
    let g_sum: T = gamma_prime.iter().copied().sum();
    gamma_prime.iter_mut().for_each(|g| *g = *g / g_sum);

    let increment: Vec<T> = kappa.iter().map(|k| k.exp()).collect();
    let mu_new: Vec<T> = mu_prev.iter().zip(&increment).map(|(m, inc)| *m + *inc).collect();
    let sigma_sq: Vec<T> = beta.iter().map(|b| b.exp()).collect();

    let two = T::of(2.0);
    let two_pi = T::of(std::f64::consts::TAU);
    let mut phi = Matrix::zeros(c, l);
    let mut alpha = vec![T::zero(); l];
    for i in 0..c {
        let norm = gamma_prime[i] / (two_pi * sigma_sq[i]).sqrt();
        let row = phi.row_mut(i);
        for (j, (p, a)) in row.iter_mut().zip(alpha.iter_mut()).enumerate() {
            let pos = T::of((j + 1) as f64);
            let diff = pos - mu_new[i];
            *p = norm * (-(diff * diff) / (two * sigma_sq[i])).exp();
            *a = *a + *p;
        }
    }
    (alpha, mu_new, AttentionDetail { gamma_prime, sigma_sq, increment, phi })
}

pub fn attention_step<T: Real>(
    s_prev: &Buffer<T>,
    state: &AttentionState<T>,
    enc: &SentenceEncoding<T>,
    params: &ModelParams<T>,
) -> Result<AttentionStepOutput<T>> {
    let raw = params.n_a.forward(s_prev.flat());
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("attention network produced a non-finite value"));
    }
    let (alpha, mu_new, detail) = gmm_attention(&raw, &state.mu, enc.len());
    let mut context = vec![T::zero(); params.hyper.d_p];
    enc.e.matvec(&alpha, &mut context);
    if context.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite attention context"));
    }
    Ok(AttentionStepOutput { alpha, context, mu_new, detail })
}

/// Speaker-dependent terms that stay fixed for a whole utterance.
#[derive(Debug, Clone)]
pub(crate) struct SpeakerTerms<T> {
    /// `tanh(F_u z)`
    pub update: Vec<T>,
    /// `F_o z`
    pub output: Vec<T>,
}

impl<T: Real> SpeakerTerms<T> {
    pub fn new(z: &[T], params: &ModelParams<T>) -> Self {
        let mut update = vec![T::zero(); params.hyper.d_p];
        params.f_u.matvec(z, &mut update);
        update.iter_mut().for_each(|v| *v = v.tanh());
        let mut output = vec![T::zero(); params.hyper.d_o];
        params.f_o.matvec(z, &mut output);
        Self { update, output }
    }
}

/// Input of the update network: `[flatten(S), context + tanh(F_u z), o_prev]`.
pub(crate) fn update_input<T: Real>(s_prev: &Buffer<T>, context: &[T], o_prev: &[T], spk_update: &[T]) -> Vec<T> {
    let mut x = Vec::with_capacity(s_prev.flat().len() + context.len() + o_prev.len());
    x.extend_from_slice(s_prev.flat());
    x.extend(context.iter().zip(spk_update).map(|(c, s)| *c + *s));
    x.extend_from_slice(o_prev);
    x
}

pub(crate) fn new_column<T: Real>(
    s_prev: &Buffer<T>,
    context: &[T],
    o_prev: &[T],
    spk_update: &[T],
    params: &ModelParams<T>,
) -> Result<Vec<T>> {
    let u = match params.hyper.update {
        BufferUpdate::Network => params.n_u.forward(&update_input(s_prev, context, o_prev, spk_update)),
        BufferUpdate::Concat => context.iter().chain(o_prev).copied().collect(),
    };
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("buffer update produced a non-finite value"));
    }
    Ok(u)
}

fn check_lengths<T>(what: &str, v: &[T], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::invalid(format!("{what} has length {}, expected {expected}", v.len())));
    }
    Ok(())
}

/// Computes the new representation `u` and returns it with the shifted buffer.
pub fn buffer_step<T: Real>(
    s_prev: &Buffer<T>,
    context: &[T],
    o_prev: &[T],
    z: &SpeakerEmbedding<T>,
    params: &ModelParams<T>,
) -> Result<(Vec<T>, Buffer<T>)> {
    let h = &params.hyper;
    check_lengths("context", context, h.d_p)?;
    check_lengths("previous output", o_prev, h.d_o)?;
    check_lengths("speaker embedding", &z.z, h.d_s())?;
    let terms = SpeakerTerms::new(&z.z, params);
    let u = new_column(s_prev, context, o_prev, &terms.update, params)?;
    let mut s_new = s_prev.clone();
    s_new.shift_insert(&u);
    Ok((u, s_new))
}

pub(crate) fn output_with<T: Real>(s: &Buffer<T>, spk_output: &[T], params: &ModelParams<T>) -> Result<Vec<T>> {
    let mut o = params.n_o.forward(s.flat());
    for (v, f) in o.iter_mut().zip(spk_output) {
        *v = *v + *f;
    }
    if o.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("output network produced a non-finite value"));
    }
    Ok(o)
}

/// `o_t = N_o(flatten(S_t)) + F_o z`
pub fn output_step<T: Real>(s: &Buffer<T>, z: &SpeakerEmbedding<T>, params: &ModelParams<T>) -> Result<Vec<T>> {
    check_lengths("speaker embedding", &z.z, params.hyper.d_s())?;
    let mut fo = vec![T::zero(); params.hyper.d_o];
    params.f_o.matvec(&z.z, &mut fo);
    output_with(s, &fo, params)
}

/// Index of the largest mixture weight; ties go to the lowest index.
pub(crate) fn dominant<T: Real>(gamma_prime: &[T]) -> usize {
    let mut best = 0;
    for (i, g) in gamma_prime.iter().enumerate() {
        if *g > gamma_prime[best] {
            best = i;
        }
    }
    best
}

/// Free-running generation from `S_0` (the prime if given, otherwise the
/// speaker initialisation), with `mu_0 = 0` and `o_0 = 0`.
pub fn synthesize<T: Real>(
    phonemes: &[usize],
    z: &SpeakerEmbedding<T>,
    params: &ModelParams<T>,
    cfg: &SynthesisConfig,
    prime: Option<&Buffer<T>>,
) -> Result<Synthesis<T>> {
    let h = params.hyper;
    let enc = encode_sentence(phonemes, params)?;
    let cap = cfg.frame_cap(enc.len());
    if cap == 0 {
        return Err(Error::invalid("max_frames must be at least 1"));
    }
    let mut s = match prime {
        Some(b) => {
            if b.rows() != h.d() || b.capacity() != h.k {
                return Err(Error::invalid("prime buffer shape does not match the model"));
            }
            b.clone()
        }
        None => init_buffer(z, &h)?,
    };
    let terms = SpeakerTerms::new(&z.z, params);
    let mut state = AttentionState::zeros(h.c);
    let mut o_prev = vec![T::zero(); h.d_o];
    let end = enc.len() as f64 + cfg.stop_margin;

    let mut frames = Vec::with_capacity(cap * h.d_o);
    let mut trace = AttentionTrace::default();
    let mut stop = StopReason::MaxFrames;
    for t in 0..cap {
        let step = (|| {
            let att = attention_step(&s, &state, &enc, params)?;
            let u = new_column(&s, &att.context, &o_prev, &terms.update, params)?;
            s.shift_insert(&u);
            let o = output_with(&s, &terms.output, params)?;
            Ok::<_, Error>((att, o))
        })()
        .map_err(|e| e.context(format_args!("frame {t}")))?;
        let (att, o) = step;

        frames.extend(o.iter().map(|v| v.as_f64()));
        trace.alpha.push(att.alpha.iter().map(|v| v.as_f64()).collect());
        trace.mu.push(att.mu_new.iter().map(|v| v.as_f64()).collect());
        let lead = dominant(&att.detail.gamma_prime);
        let passed = att.mu_new[lead].as_f64() > end;
        state.mu = att.mu_new;
        o_prev = o;
        if passed {
            stop = StopReason::AttentionEnd;
            break;
        }
    }
    let t = trace.len();
    let features = FeatureSequence::new(Matrix::from_vec(t, h.d_o, frames), cfg.frame_shift_ms)?;
    Ok(Synthesis { features, trace, stop, final_buffer: s })
}
