//! Normal-map PNG encoding and raw little-endian buffer dumps.

use std::io::Write;
use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{CameraPose, RenderBuffers, RenderError};

/// Maps a normal component in `[-1, 1]` to 8 bits: `floor((n + 1) / 2 * 255 + 0.5)`,
/// i.e. round half up.
pub fn encode_normal(n: [f32; 3]) -> [u8; 3] {
    n.map(|c| {
        let scaled = (c as f64 + 1.0) / 2.0 * 255.0;
        (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
    })
}

pub fn decode_normal(rgb: [u8; 3]) -> [f32; 3] {
    rgb.map(|c| (c as f32 / 255.0) * 2.0 - 1.0)
}

/// RGB normal image plus a validity mask (255 = surface). Background pixels
/// are `(0, 0, 0)`.
pub fn encode_normal_map(buffers: &RenderBuffers) -> (RgbImage, GrayImage) {
    let mut rgb = RgbImage::new(buffers.width, buffers.height);
    let mut valid = GrayImage::new(buffers.width, buffers.height);
    for y in 0..buffers.height {
        for x in 0..buffers.width {
            let i = buffers.index(x, y);
            if buffers.is_valid(i) {
                rgb.put_pixel(x, y, Rgb(encode_normal(buffers.normal[i])));
                valid.put_pixel(x, y, Luma([255]));
            }
        }
    }
    (rgb, valid)
}

/// Writes `normal.png` and `valid.png` style outputs.
pub fn write_normal_png(buffers: &RenderBuffers, normal_path: &Path, valid_path: &Path) -> Result<(), RenderError> {
    let (rgb, valid) = encode_normal_map(buffers);
    rgb.save(normal_path)?;
    valid.save(valid_path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub view_index: usize,
    pub pose: CameraPose,
}

pub fn raw_header(buffers: &RenderBuffers, channels: u32, view_index: usize, pose: &CameraPose) -> RawHeader {
    RawHeader {
        width: buffers.width,
        height: buffers.height,
        channels,
        view_index,
        pose: *pose,
    }
}

fn write_raw(path: &Path, header: &RawHeader, payload: &[u8]) -> Result<(), RenderError> {
    std::fs::File::create(path)?.write_all(payload)?;
    let header_path = path.with_extension("json");
    std::fs::write(header_path, serde_json::to_vec_pretty(header).expect("header serializes"))?;
    Ok(())
}

/// Depth as little-endian f32 (`0.0` = empty) with a JSON header beside it.
pub fn write_depth_raw(path: &Path, buffers: &RenderBuffers, view_index: usize, pose: &CameraPose) -> Result<(), RenderError> {
    let payload: Vec<u8> = buffers.depth.iter().flat_map(|d| d.to_le_bytes()).collect();
    write_raw(path, &raw_header(buffers, 1, view_index, pose), &payload)
}

/// Point map as interleaved little-endian f32 xyz.
pub fn write_point_raw(path: &Path, buffers: &RenderBuffers, view_index: usize, pose: &CameraPose) -> Result<(), RenderError> {
    let payload: Vec<u8> = buffers
        .point
        .iter()
        .flat_map(|p| p.iter().flat_map(|c| c.to_le_bytes()).collect::<Vec<_>>())
        .collect();
    write_raw(path, &raw_header(buffers, 3, view_index, pose), &payload)
}

/// Face ids as little-endian u32, `0xFFFFFFFF` = empty.
pub fn write_face_id_raw(path: &Path, buffers: &RenderBuffers) -> Result<(), RenderError> {
    let payload: Vec<u8> = buffers.face_id.iter().flat_map(|f| f.to_le_bytes()).collect();
    std::fs::write(path, payload)?;
    Ok(())
}
