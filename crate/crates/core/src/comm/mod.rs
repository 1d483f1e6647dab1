//! Message autoencoder trained by alternating supervised receiver updates
//! and policy-gradient transmitter updates, with a pluggable path for the
//! per-example losses that travel back to the transmitter.

mod system;
mod train;
mod transport;

pub use system::{
    argmax_rows, ce_losses, CeLosses, CommConfig, CommSystem, PolicyBatch, ReceiverKind, PROB_FLOOR,
};
pub use train::{alternating_train, CommStreams, LogRecord, Phase, StopReason, TrainConfig, TrainLog};
pub use transport::FeedbackTransport;
