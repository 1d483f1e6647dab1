//! Learned transmission of real numbers between two devices, A and B, with
//! no channel model and no reliable return link: each direction's
//! transmitter learns from losses carried back by the other direction.

mod device;
mod link;
mod train;

pub use device::{
    check_unit_interval, real_receiver, Device, DeviceId, Direction, FeedbackConfig, RealTransmitter, TxPass,
    DEFAULT_SCALE_DECAY,
};
pub use link::{evaluate_mse, LearnedLink, LearnedTransport, RealLink};
pub use train::{
    main_loop, DirectionStreams, FeedbackLog, FeedbackLogRecord, FeedbackSystem, FeedbackTrainConfig, LossReturn,
    TrainingSource, TransmitterStep, DIVERGENCE_MSE,
};
