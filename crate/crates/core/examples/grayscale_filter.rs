//! Tell grayscale actor pictures from color ones by per-channel deviation.

use image::{DynamicImage, Rgb, RgbImage};
use posterlens::imageprep::{channel_mse, is_grayscale, DEFAULT_GRAYSCALE_TOLERANCE};
use posterlens::synthetic::{color_portrait, gray_portrait};

fn main() {
    let samples = [
        ("color portrait", DynamicImage::ImageRgb8(color_portrait(1, 64, 80))),
        ("gray portrait", DynamicImage::ImageRgb8(gray_portrait(1, 64, 80))),
        ("pure red", DynamicImage::ImageRgb8(RgbImage::from_pixel(8, 8, Rgb([255, 0, 0])))),
        ("sepia-ish", DynamicImage::ImageRgb8(RgbImage::from_pixel(8, 8, Rgb([112, 110, 108])))),
    ];
    for (name, img) in &samples {
        let mse = channel_mse(img);
        let gray = is_grayscale(img, DEFAULT_GRAYSCALE_TOLERANCE);
        println!("{name:<15} mse=[{:.1}, {:.1}, {:.1}] grayscale={gray}", mse[0], mse[1], mse[2]);
    }
}
