//! Flow-front tracking for two-phase drainage experiments.
//!
//! The pipeline condenses a segmented grayscale image series into a per-pixel
//! invasion [`TimeMap`], splits it into equal-time [`FlowFront`]s, and links
//! those into a temporal [`DisplacementGraph`] whose edges carry
//! interface-based velocities. Noise fixes, simplification, breakthrough and
//! main-channel detection, a pinned force-directed layout, and the viewer
//! bundle export sit on top of that graph.
//!
//! ```text
//! images ─► segment ─► time map ─► fronts ─► quantize ─► graph ─► fixes ─► simplify ─► layout ─► bundle
//! ```

pub mod error;
pub mod export;
pub mod fixtures;
pub mod fronts;
pub mod graph;
pub mod grid;
pub mod ingestion;
pub mod layout;
pub mod pipeline;
pub mod timemap;

pub use error::{Error, Result};
pub use fronts::{FlowFront, FrontLabelMap, InterfaceSet};
pub use graph::{DisplacementGraph, FrameMetrics, MainChannel};
pub use grid::Rect;
pub use ingestion::{BinaryFrame, DatasetConfig, GrayFrame, ImageSeries};
pub use layout::{LayoutParams, LayoutResult};
pub use timemap::{TimeMap, TimeValue};
