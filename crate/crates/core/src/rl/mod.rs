//! PPO with a from-scratch MLP, sized for single-core runs.

pub mod adam;
pub mod checkpoint;
pub mod dist;
pub mod gae;
pub mod net;
pub mod obs;
pub mod ppo;
pub mod train;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use gae::{compute_gae, normalize_advantages};
pub use net::{Head, PolicyNet};
pub use obs::ObsBatch;
pub use ppo::{loss_and_grad, ppo_update, Actions, Batch, LossStats, PpoConfig, PpoError};
pub use train::{train, BinningConfig, BinningKind, MetricsRow, TrainConfig, TrainError, TrainLog};
