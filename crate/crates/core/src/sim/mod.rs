//! Desk-scale stand-ins for simulated target signatures and measured clutter.

mod clutter;
mod library;
mod scatterer;
mod templates;

pub use clutter::{synthesize_clutter, ClutterConfig};
pub use library::{
    build_chip_library, chip_poses, generate_chip_library, AzimuthGrid, ChipIndexEntry,
    ChipLibrary, ChipLibraryConfig, ChipPose, VignetteConfig,
};
pub(crate) use library::{render_chip, render_vignette};
pub use scatterer::{
    synthesize_shadow_mask, synthesize_signature, Scatterer, ScattererSet,
};
pub use templates::{ObjectTemplate, TemplateRegistry, DISTRACTOR_CLASSES, VEHICLE_CLASSES};
