//! Loss functionals and the direction searches built on them.

mod adam;
mod config;
pub(crate) mod losses;
mod report;
mod search;

pub use config::{
    OptimizeConfig, SearchMode, DEFAULT_BATCH_SIZE, DEFAULT_EXCLUDE_TOP_BLOCKS, DEFAULT_ITERATIONS,
    DEFAULT_LAMBDA_C, DEFAULT_LAMBDA_ID, DEFAULT_OPT_RESOLUTION, DEFAULT_STEP_SIZE, MAX_LAMBDA_ID,
};
pub use losses::{
    clip_loss, composite_loss, identity_loss, single_channel_loss, single_channel_loss_with,
};
pub use report::OptimizeReport;
pub use search::{
    find_direction, find_direction_with, find_single_channel_direction,
    find_single_channel_direction_with, Progress, SearchOptions, DIVERGENCE_FACTOR,
    DIVERGENCE_PATIENCE,
};
