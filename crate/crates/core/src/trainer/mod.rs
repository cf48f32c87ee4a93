//! Adaptive adversarial training with a noise-awareness auxiliary task, plus
//! the baseline fine-tuning regimes it is compared against.

mod config;
mod gradcheck;
mod objective;
mod prompt;
mod step;
mod train;

pub use config::{Mode, OrderPolicy, RaatWeights, TrainConfig, CONFIG_KEYS};
pub use gradcheck::{gradcheck, GradCheckReport, GRADCHECK_EPS, GRADCHECK_TOL};
pub use objective::{select_extremes, GroupForward, LossBreakdown};
pub use prompt::{assemble_prompt, join_prompt, order_contexts, prompt_contexts, SEP_TOKEN};
pub use step::{
    baseline_step, clip_gradients, group_losses, raat_step, BaselineUpdate, GenLossLog, RaatStep, RetrobustBranch,
    StepRecord,
};
pub use train::{
    corpus_texts, init_model, read_step_log, train, train_with, write_step_log, SelectionStats, TrainOutcome,
};
