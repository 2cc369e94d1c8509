//! Canonical viewpoints and software rasterization.
//!
//! Camera convention: world-to-camera `x_c = R x_w + t`; the camera looks down
//! its +z axis with +x to the right and +y down the image. Pixel `(i, j)` has
//! its center at continuous image coordinates `(i + 0.5, j + 0.5)` and the
//! projection is `u = fx * x_c / z_c + cx`, `v = fy * y_c / z_c + cy`. Depth is
//! the camera-space `z_c`, positive in front of the camera.
//!
//! Back-projection inverts this exactly: `x_w = R^T (K^{-1} [u, v, 1]^T * D - t)`.

mod camera;
mod export;
mod raster;

pub use camera::{canonical_views, CameraPose, ElevationLayout, Intrinsics, View, ViewConfig, ViewSet};
pub use export::{
    decode_normal, encode_normal, encode_normal_map, raw_header, write_depth_raw, write_face_id_raw,
    write_normal_png, write_point_raw, RawHeader,
};
pub use raster::{
    back_project, back_project_pixel, project_point, rasterize, ray_dir, render_views, unproject, Projection,
    RenderBuffers, EMPTY_FACE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid view configuration: {0}")]
    InvalidConfig(String),
    #[error("view {view} clips the canonical cube: corner projects outside the image")]
    FrustumClip { view: usize },
    #[error("depth map is {got_w}x{got_h} but the pose expects {want_w}x{want_h}")]
    SizeMismatch {
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("image encoding failed: {0}")]
    Image(#[from] image::ImageError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
