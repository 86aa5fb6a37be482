//! PPO with generalized advantage estimation, symmetry augmentation and a
//! three-phase curriculum.

pub mod augment;
pub mod checkpoint;
pub mod curriculum;
pub mod gae;
pub mod normalizer;
pub mod policy;
pub mod ppo;
pub mod train;

pub use augment::symmetry_augment;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use curriculum::{CurriculumConfig, CurriculumState, PlateauDetector};
pub use gae::{compute_gae, normalize};
pub use normalizer::{ReturnScaler, RunningNorm};
pub use policy::{critic, log_prob, GaussianPolicy};
pub use ppo::{clipped_surrogate, policy_loss_grad, value_loss_grad, Batch, Learner, PpoConfig, UpdateStats};
pub use train::{train, IterationMetrics, RunSummary, Trainer, Trajectory, METRICS_COLUMNS};
