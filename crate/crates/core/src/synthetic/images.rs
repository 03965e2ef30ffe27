use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Base poster layouts whose difference hashes are pairwise ≥ 32 bits apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosterDesign {
    RampUp,
    RampDown,
    SplitRamp,
    AlternatingRows,
}

impl PosterDesign {
    pub const ALL: [PosterDesign; 4] = [
        PosterDesign::RampUp,
        PosterDesign::RampDown,
        PosterDesign::SplitRamp,
        PosterDesign::AlternatingRows,
    ];

    fn level(self, x: u32, y: u32, w: u32, h: u32) -> f64 {
        let t = x as f64 / (w - 1).max(1) as f64;
        let up = 30.0 + 190.0 * t;
        let down = 220.0 - 190.0 * t;
        match self {
            PosterDesign::RampUp => up,
            PosterDesign::RampDown => down,
            PosterDesign::SplitRamp => {
                if t < 0.5 {
                    30.0 + 380.0 * t
                } else {
                    410.0 - 380.0 * t
                }
            }
            PosterDesign::AlternatingRows => {
                if (y * 8 / h.max(1)).is_multiple_of(2) {
                    up
                } else {
                    down
                }
            }
        }
    }
}

/// Poster of `design`; variant 0 is clean, variant k ≥ 1 adds a small caption block.
pub fn render_poster(design: PosterDesign, variant: u32, tint: [u8; 3], width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_fn(width, height, |x, y| {
        let v = design.level(x, y, width, height);
        Rgb([
            (v * 0.9 + tint[0] as f64 * 0.1) as u8,
            (v * 0.9 + tint[1] as f64 * 0.1) as u8,
            (v * 0.9 + tint[2] as f64 * 0.1) as u8,
        ])
    });
    if variant > 0 {
        let bw = (width / 7).max(2);
        let bh = (height / 12).max(2);
        let slot = (variant - 1) % 3;
        let x0 = width / 10 + slot * (width * 3 / 10);
        let y0 = height - bh - height / 20;
        for y in y0..(y0 + bh).min(height) {
            for x in x0..(x0 + bw).min(width) {
                let stripe = (x / 2 + y / 3) % 2 == 0;
                img.put_pixel(x, y, if stripe { Rgb([250, 250, 250]) } else { Rgb([15, 15, 15]) });
            }
        }
    }
    img
}

/// Colourful head-and-shoulders stand-in.
pub fn color_portrait(seed: u64, width: u32, height: u32) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f64; 3] = [rng.random_range(80.0..200.0), rng.random_range(40.0..160.0), rng.random_range(60.0..220.0)];
    RgbImage::from_fn(width, height, |x, y| {
        let fx = x as f64 / width as f64;
        let fy = y as f64 / height as f64;
        Rgb([
            (base[0] + 50.0 * fx) as u8,
            (base[1] + 60.0 * fy) as u8,
            (base[2] - 50.0 * fx * fy) as u8,
        ])
    })
}

/// Same layout as [`color_portrait`] with equal channels.
pub fn gray_portrait(seed: u64, width: u32, height: u32) -> RgbImage {
    let c = color_portrait(seed, width, height);
    RgbImage::from_fn(width, height, |x, y| {
        let p = c.get_pixel(x, y).0;
        let g = ((p[0] as u32 + p[1] as u32 + p[2] as u32) / 3) as u8;
        Rgb([g, g, g])
    })
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("PNG encoding into memory");
    out.into_inner()
}
