use rand::Rng;

use crate::rng;

/// Noisy teacher forcing: the "previous output" fed to the model during
/// training is `(o_prev + y_prev) / 2 + eta` with `eta ~ N(0, noise_std^2 I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeacherForcingConfig {
    pub noise_std: f64,
    /// Treat `o_prev` as a constant in the mixture (stop-gradient).
    pub detach: bool,
}

impl Default for TeacherForcingConfig {
    fn default() -> Self {
        Self { noise_std: 2.0, detach: false }
    }
}

impl TeacherForcingConfig {
    pub fn noiseless() -> Self {
        Self { noise_std: 0.0, detach: false }
    }
}

/// Mixes the model's previous output with the ground truth and adds one
/// Gaussian draw per coordinate.
pub fn teacher_forced_input(o_prev: &[f64], y_prev: &[f64], tf: &TeacherForcingConfig, rng: &mut impl Rng) -> Vec<f64> {
    assert_eq!(o_prev.len(), y_prev.len(), "previous output and target differ in length");
    o_prev
        .iter()
        .zip(y_prev)
        .map(|(o, y)| {
            let mid = 0.5 * (o + y);
            if tf.noise_std > 0.0 {
                mid + tf.noise_std * rng::normal(rng)
            } else {
                mid
            }
        })
        .collect()
}
