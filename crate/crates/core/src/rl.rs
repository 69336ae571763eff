//! Learned governor: Q-network, reward, replay, training, and model files.

pub mod model;
pub mod net;
pub mod policy;
pub mod replay;
pub mod reward;
pub mod train;
