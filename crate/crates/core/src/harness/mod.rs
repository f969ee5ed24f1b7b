//! Desk-scale training harness: paired synthetic data, linear encoders,
//! gradient descent on the dual-domain objective, retrieval evaluation and
//! the ablation grid.

mod ablation;
mod eval;
mod task;
mod train;

pub use ablation::{
    ablation_csv, ablation_suite, csv_row, run_cell, run_experiment, AblationMode, AblationRow, RunMetrics,
    ABLATION_CSV_HEADER,
};
pub use eval::{
    evaluate, least_squares_oracle, perturbed_eval, perturbed_precision, precision_at_1, test_embeddings,
};
pub use task::{generate_task, SyntheticTask, TaskConfig};
pub use train::{
    log_jsonl, replay_step, train, EncoderParams, StepRecord, SvdGrad, TrainConfig, TrainMode, TrainOutcome, Trainer,
};
