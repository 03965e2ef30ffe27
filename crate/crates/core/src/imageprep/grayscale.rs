use std::path::Path;

use image::DynamicImage;

use crate::error::Result;

/// Default per-channel MSE tolerance on the 0 to 255 scale.
pub const DEFAULT_GRAYSCALE_TOLERANCE: f64 = 10.0;

/// Mean squared deviation of each RGB channel from the per-pixel channel mean.
pub fn channel_mse(image: &DynamicImage) -> [f64; 3] {
    let rgb = image.to_rgb8();
    let n = (rgb.width() as u64 * rgb.height() as u64).max(1) as f64;
    let mut acc = [0f64; 3];
    for p in rgb.pixels() {
        let [r, g, b] = p.0.map(f64::from);
        let mean = (r + g + b) / 3.0;
        acc[0] += (r - mean).powi(2);
        acc[1] += (g - mean).powi(2);
        acc[2] += (b - mean).powi(2);
    }
    acc.map(|s| s / n)
}

/// True when every channel stays within `tolerance` MSE of the per-pixel mean.
/// Images stored with a single channel are grayscale by definition.
pub fn is_grayscale(image: &DynamicImage, tolerance: f64) -> bool {
    if !image.color().has_color() {
        return true;
    }
    channel_mse(image).iter().all(|m| *m <= tolerance)
}

pub fn is_grayscale_file(path: &Path, tolerance: f64) -> Result<bool> {
    Ok(is_grayscale(&super::open_image(path)?, tolerance))
}
