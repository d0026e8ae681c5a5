use crate::error::{Error, Result};

/// How the newest buffer column is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BufferUpdate {
    /// `u = N_u([flatten(S), c + tanh(F_u z), o_prev])`
    #[default]
    Network,
    /// Loop-less ablation: `u = [c, o_prev]`; `N_u` is kept but unused.
    Concat,
}

impl BufferUpdate {
    pub fn code(self) -> u32 {
        match self {
            BufferUpdate::Network => 0,
            BufferUpdate::Concat => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(BufferUpdate::Network),
            1 => Ok(BufferUpdate::Concat),
            other => Err(Error::format(format!("unknown buffer update mode {other}"))),
        }
    }
}

/// Model dimensions. The buffer height `d = d_p + d_o` and the speaker
/// dimension `d_s = d_p` are derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperParams {
    /// Phoneme embedding size.
    pub d_p: usize,
    /// Output feature size.
    pub d_o: usize,
    /// Buffer capacity (columns).
    pub k: usize,
    /// Mixture components in the attention.
    pub c: usize,
    pub n_phonemes: usize,
    /// Speakers in the lookup table.
    pub n_speakers: usize,
    /// Hidden layer = input dim / divisor, floored, at least 1.
    pub hidden_divisor: usize,
    pub update: BufferUpdate,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            d_p: 256,
            d_o: 63,
            k: 20,
            c: 10,
            n_phonemes: 42,
            n_speakers: 22,
            hidden_divisor: 10,
            update: BufferUpdate::Network,
        }
    }
}

impl HyperParams {
    /// The small configuration used for gradient checks.
    pub fn toy() -> Self {
        Self {
            d_p: 4,
            d_o: 3,
            k: 3,
            c: 2,
            n_phonemes: 10,
            n_speakers: 3,
            hidden_divisor: 10,
            update: BufferUpdate::Network,
        }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d_p + self.d_o
    }

    #[inline]
    pub fn d_s(&self) -> usize {
        self.d_p
    }

    /// Length of the flattened buffer, `k * d`.
    #[inline]
    pub fn buffer_len(&self) -> usize {
        self.k * self.d()
    }

    pub fn hidden(&self, input: usize) -> usize {
        (input / self.hidden_divisor).max(1)
    }

    pub fn attention_io(&self) -> (usize, usize) {
        (self.buffer_len(), 3 * self.c)
    }

    pub fn update_io(&self) -> (usize, usize) {
        (self.buffer_len() + self.d_p + self.d_o, self.d())
    }

    pub fn output_io(&self) -> (usize, usize) {
        (self.buffer_len(), self.d_o)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("d_p", self.d_p),
            ("d_o", self.d_o),
            ("k", self.k),
            ("c", self.c),
            ("n_phonemes", self.n_phonemes),
            ("n_speakers", self.n_speakers),
            ("hidden_divisor", self.hidden_divisor),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}
