//! Base logistic-regression models and the cross-stitch stack model.

pub mod logistic;
pub mod stack;

pub use logistic::{fit_logistic, sigmoid, train_base, BaseModel, LrConfig, LrFit, LrSolver};
pub use stack::{
    beta_schedule, predict_task_shared, predict_task_specific, stitch_weight_report, train_stack, user_loss,
    weight_shares, CrossStitch, LossMode, PredictionVector, StackConfig, StackData, StackHyperparams, StackModel,
    TaskHead,
};
