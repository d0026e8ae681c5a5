//! Training, speaker fitting and priming.

mod checkpoint;
mod fit;
mod optim;
mod teacher;
mod trainer;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use fit::{fit_speaker, prime_buffer, FitConfig, FitResult};
pub use optim::{Optimizer, OptimizerState};
pub use teacher::{teacher_forced_input, TeacherForcingConfig};
pub use trainer::{train, EpochRecord, TrainConfig, TrainLog, Trainer};
