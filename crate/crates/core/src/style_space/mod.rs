//! Style-space data model: layouts, style vectors, channel masks and
//! directions, plus the small amount of vector arithmetic the rest of the
//! crate needs.

mod direction;
mod layout;
mod mask;
mod vector;

pub use direction::{Direction, PromptSpec, DIRECTION_FORMAT_VERSION};
pub use layout::{
    build_layout, BlockConfig, BlockSpec, LayerConfig, LayerInfo, LayerKind, LayoutConfig,
    LayoutRef, StyleLayout, LAYOUT_FORMAT_VERSION, PRESET_FFHQ_1024, PRESET_TOY_128,
};
pub use mask::{default_mask, ChannelMask};
pub use vector::{axpy, project_mask, zeros_like, StyleVector};
