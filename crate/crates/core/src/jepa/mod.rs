//! Context/target encoders, the masked-token predictor, the feature
//! prediction loss and the training loop.

mod model;
mod train;

pub use model::{
    embedding_std, jepa_loss, unmasked_indices, EncoderConfig, EncoderPair, GroupPrediction, GroupReduction,
    JepaLossReport, Predictor, PredictorConfig, VideoEncoder,
};
pub use train::{epoch_permutation, JepaConfig, JepaModel};
