//! Neural refinement: feature extraction, a two-trunk CRNN with
//! hand-written backpropagation, the training objective, ADAM, FOA-domain
//! augmentation and checkpoints.

pub mod adam;
pub mod augment;
pub mod checkpoint;
pub mod features;
pub mod gru;
pub mod layers;
pub mod network;
pub mod objective;
pub mod tensor;
pub mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState, LrSchedule};
pub use augment::AugPattern;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use features::{ExtractedFeatures, FeatureExtractor, FeatureTensor};
pub use layers::Mode;
pub use network::{ArchConfig, Grads, NetOutput, Network, OutputGrads};
pub use objective::{azimuth_distance, bce, doa_loss, objective, refine_with_net, total_loss, LossParts};
pub use tensor::Tensor3;
pub use trainer::{train, EpochLog, TrainConfig, TrainExample};
