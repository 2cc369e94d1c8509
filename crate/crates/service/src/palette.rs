//! Fixed colors for part ids, shared by every rendered view.

use image::{ImageEncoder, RgbImage};
use mvpart::render::{RenderBuffers, EMPTY_FACE};

/// Pixels with no surface.
pub const BACKGROUND: [u8; 3] = [0, 0, 0];
/// Surface pixels whose face carries no label.
pub const UNLABELED: [u8; 3] = [90, 90, 90];

/// Color of part `id`; negative ids map to [`UNLABELED`].
pub fn part_color(id: i32) -> [u8; 3] {
    if id < 0 {
        return UNLABELED;
    }
    // Golden-ratio hue steps keep neighbouring ids far apart.
    let h = (id as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let (s, v) = (0.65, 0.95);
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let q = |t: f64| ((t + m) * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

/// Flat color-coded render of per-face labels in one view.
pub fn render_labels(buffers: &RenderBuffers, face_labels: &[i32]) -> RgbImage {
    let mut img = RgbImage::new(buffers.width, buffers.height);
    for (px, &f) in img.pixels_mut().zip(&buffers.face_id) {
        px.0 = if f == EMPTY_FACE {
            BACKGROUND
        } else {
            part_color(face_labels[f as usize])
        };
    }
    img
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding succeeds");
    out
}
