//! Phoneme inventory, grapheme-to-phoneme lookup, corpus files and the
//! synthetic corpus generator.

mod corpus;
mod dictionary;
mod features;
mod g2p;
mod inventory;
mod manifest;
mod synthetic;

pub use corpus::{Corpus, Utterance};
pub use dictionary::{strip_stress, Dictionary};
pub use features::{
    read_features, read_features_dim, read_matrix, write_features, write_matrix, write_matrix_file, FEATURES_MAGIC,
};
pub use g2p::{g2p, g2p_with_rules, Pause, PauseRules};
pub use inventory::{PhonemeInventory, ARPABET, FILLER, PAUSE_LONG, PAUSE_SHORT};
pub use manifest::{CorpusManifest, ManifestRow, PhonemeSource, MANIFEST_HEADER};
pub use synthetic::{SpeakerProfile, SyntheticCorpus, SyntheticCorpusSpec};
