//! Convergence diagnostics and the sampler-correctness harness.

mod geweke;
mod joint;
mod mtf_joint;
mod rmtf_joint;
mod summary;

pub use geweke::{batch_means_variance, geweke_z, geweke_z_default};
pub use joint::{
    bonferroni_threshold, joint_distribution_test, joint_test_hypers, JointModel, JointReport,
    JointSizes, JointStatistic,
};
pub use mtf_joint::MtfJoint;
pub use rmtf_joint::RmtfJoint;
pub use summary::{structure_of, summarize_run, RunState, RunSummary, TraceCheck};
