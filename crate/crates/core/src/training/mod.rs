//! Losses, the whole-utterance and two-segment training passes, the
//! optimizer, and partial initialization from a checkpoint.

pub mod check;
pub mod demo;
mod init;
pub mod loss;
pub mod optim;
pub mod procedure;

pub use check::{model_grad_check, ModelCheck, ModelCheckConfig, Precision};
pub use init::param_init_from_checkpoint;
pub use loss::{ce_loss, penalty_loss, si_snr_loss, total_loss, LossWeights};
pub use optim::{Adam, PlateauSchedule, ScheduleAction, DEFAULT_LR, PRETRAINED_LR};
pub use procedure::{seg_loss, training_loss, utt_loss, Example, LossVars, SegPlan, SegSampler, SegVars};
pub use demo::{demo_data, demo_si_snr, train_demo, DemoConfig, DemoData, StepRecord, DEMO_LAMBDA, LOSS_LOG_HEADER};
