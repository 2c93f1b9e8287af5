//! Text-driven global edit directions in the style space of a style-based
//! image generator.
//!
//! A direction is a sparse offset `delta` in the flat style space. It is
//! found once per prompt by minimizing a text-image alignment loss plus an
//! identity-preservation loss over a fixed batch of generated images, and is
//! then applied to any image as `G(s + alpha * delta)`.

pub mod backends;
pub mod bench;
pub mod clock;
pub mod error;
pub mod imageio;
pub mod manipulator;
pub mod optimizer;
pub mod store;
pub mod style_space;

pub use error::{Error, ErrorKind, Result};
