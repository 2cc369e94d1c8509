//! Multi-view part segmentation machinery for textureless triangle meshes.

pub mod eval;
pub mod lift;
pub mod mesh;
pub mod pipeline;
pub mod postprocess;
pub mod render;
pub mod scene;
pub mod segment;
pub mod spatial;
pub mod synth;
pub mod toy;
