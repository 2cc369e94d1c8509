use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};

use super::{MaskSet, SegmentError};
use crate::render::ViewSet;

/// `mask_07.png` for view 7.
pub fn mask_file_name(view: usize) -> String {
    format!("mask_{view:02}.png")
}

/// Reads one 16-bit grayscale PNG per view. Pixel value 0 is unlabeled and
/// `n > 0` is segment `n - 1`.
pub fn load_external_masks(dir: &Path, views: &ViewSet) -> Result<MaskSet, SegmentError> {
    let (want_w, want_h) = (views.width(), views.height());
    let mut masks = MaskSet::empty(want_w, want_h, views.len());
    for view in 0..views.len() {
        let path: PathBuf = dir.join(mask_file_name(view));
        if !path.is_file() {
            return Err(SegmentError::MissingView { view, path });
        }
        let img = image::open(&path)?;
        let DynamicImage::ImageLuma16(img) = img else {
            return Err(SegmentError::PixelFormat {
                view,
                found: format!("{:?}", img.color()),
            });
        };
        if img.dimensions() != (want_w, want_h) {
            return Err(SegmentError::Dimension {
                view,
                got_w: img.width(),
                got_h: img.height(),
                want_w,
                want_h,
            });
        }
        masks.views[view] = img.pixels().map(|p| p.0[0] as i32 - 1).collect();
    }
    Ok(masks)
}

/// Writes `masks` in the format read by [`load_external_masks`].
pub fn write_masks(dir: &Path, masks: &MaskSet) -> Result<(), SegmentError> {
    std::fs::create_dir_all(dir)?;
    for (view, raster) in masks.views.iter().enumerate() {
        let data: Vec<u16> = raster
            .iter()
            .map(|&l| u16::try_from(l + 1).unwrap_or(0))
            .collect();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(masks.width, masks.height, data).expect("raster matches dimensions");
        img.save(dir.join(mask_file_name(view)))?;
    }
    Ok(())
}
