use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::DynamicImage;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Sample grid width; one more column than bits per row.
pub const HASH_WIDTH: u32 = 9;
pub const HASH_HEIGHT: u32 = 8;

// Bilinear weights are exact rationals with these denominators.
const X_DENOM: i64 = 2 * HASH_WIDTH as i64;
const Y_DENOM: i64 = 2 * HASH_HEIGHT as i64;

/// 64-bit horizontal-gradient difference hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct DHash(pub u64);

impl DHash {
    pub fn distance(self, other: DHash) -> u32 {
        hamming(self, other)
    }
}

impl fmt::Display for DHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for DHash {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 {
            return Err(format!("dhash must be 16 hex chars, got `{s}`"));
        }
        u64::from_str_radix(s, 16)
            .map(DHash)
            .map_err(|e| format!("bad dhash `{s}`: {e}"))
    }
}

impl From<DHash> for String {
    fn from(h: DHash) -> String {
        h.to_string()
    }
}

impl TryFrom<String> for DHash {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Number of differing bits.
pub fn hamming(a: DHash, b: DHash) -> u32 {
    (a.0 ^ b.0).count_ones()
}

fn luma(r: u8, g: u8, b: u8) -> i64 {
    // ITU-R 601 weights, rounded to the nearest integer level.
    (299 * r as i64 + 587 * g as i64 + 114 * b as i64 + 500) / 1000
}

/// Source index and fractional weight (out of `denom`) for one output sample.
fn tap(out: u32, src_len: u32, out_len: u32, denom: i64) -> (usize, usize, i64) {
    let last = src_len as i64 - 1;
    let num = ((2 * out as i64 + 1) * src_len as i64 - out_len as i64).max(0);
    let (mut i0, mut frac) = (num / denom, num % denom);
    if i0 >= last {
        i0 = last;
        frac = 0;
    }
    let i1 = (i0 + 1).min(last);
    (i0 as usize, i1 as usize, frac)
}

/// Bilinear 9×8 luma grid, each cell scaled by `18 * 16` so it stays integral.
pub fn luma_grid(image: &DynamicImage) -> [[i64; HASH_WIDTH as usize]; HASH_HEIGHT as usize] {
    let rgb = image.to_rgb8();
    let (w, h) = rgb.dimensions();
    assert!(w > 0 && h > 0, "image must have at least one pixel");
    let y_of = |x: usize, y: usize| {
        let p = rgb.get_pixel(x as u32, y as u32).0;
        luma(p[0], p[1], p[2])
    };

    let cols: Vec<_> = (0..HASH_WIDTH)
        .map(|x| tap(x, w, HASH_WIDTH, X_DENOM))
        .collect();
    let mut grid = [[0i64; HASH_WIDTH as usize]; HASH_HEIGHT as usize];
    for (row, cells) in grid.iter_mut().enumerate() {
        let (j0, j1, g) = tap(row as u32, h, HASH_HEIGHT, Y_DENOM);
        for (col, cell) in cells.iter_mut().enumerate() {
            let (i0, i1, f) = cols[col];
            let top = y_of(i0, j0) * (X_DENOM - f) + y_of(i1, j0) * f;
            let bottom = y_of(i0, j1) * (X_DENOM - f) + y_of(i1, j1) * f;
            *cell = top * (Y_DENOM - g) + bottom * g;
        }
    }
    grid
}

/// Difference hash: bit `row * 8 + col` is set when brightness increases from
/// `col` to `col + 1` on the downscaled grid.
pub fn compute_dhash(image: &DynamicImage) -> DHash {
    let grid = luma_grid(image);
    let mut bits = 0u64;
    for (row, cells) in grid.iter().enumerate() {
        for col in 0..(HASH_WIDTH as usize - 1) {
            if cells[col + 1] > cells[col] {
                bits |= 1 << (row * 8 + col);
            }
        }
    }
    DHash(bits)
}

pub fn dhash_file(path: &Path) -> Result<DHash> {
    Ok(compute_dhash(&super::open_image(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    #[test]
    fn solid_color_hashes_to_zero() {
        for (w, h) in [(1, 1), (9, 8), (300, 450), (17, 3)] {
            let img = RgbImage::from_pixel(w, h, Rgb([200, 30, 90]));
            assert_eq!(compute_dhash(&DynamicImage::ImageRgb8(img)), DHash(0));
        }
    }

    #[test]
    fn ramp_hashes_to_all_ones() {
        let img = RgbImage::from_fn(9, 8, |x, y| {
            let v = (20 * x + y) as u8;
            Rgb([v, v, v])
        });
        assert_eq!(compute_dhash(&DynamicImage::ImageRgb8(img)), DHash(u64::MAX));
    }

    #[test]
    fn decreasing_ramp_hashes_to_zero() {
        let img = RgbImage::from_fn(90, 80, |x, _| {
            let v = 255 - (2 * x) as u8;
            Rgb([v, v, v])
        });
        assert_eq!(compute_dhash(&DynamicImage::ImageRgb8(img)), DHash(0));
    }

    #[test]
    fn hamming_examples() {
        let h = DHash(0xdead_beef_0123_4567);
        assert_eq!(hamming(h, h), 0);
        assert_eq!(hamming(h, DHash(!h.0)), 64);
        assert_eq!(hamming(DHash(0b1010), DHash(0b0110)), 2);
    }

    #[test]
    fn hex_round_trip() {
        let h = DHash(0x00ab_0000_0000_00ff);
        assert_eq!(h.to_string(), "00ab0000000000ff");
        assert_eq!("00ab0000000000ff".parse::<DHash>().unwrap(), h);
        assert!("abc".parse::<DHash>().is_err());
        assert_eq!(serde_json::to_string(&h).unwrap(), "\"00ab0000000000ff\"");
    }

    #[test]
    fn lossless_reencode_preserves_hash() {
        let img = RgbImage::from_fn(40, 30, |x, y| Rgb([(x * 6) as u8, (y * 8) as u8, ((x * y) % 255) as u8]));
        let img = DynamicImage::ImageRgb8(img);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        img.save(&path).unwrap();
        assert_eq!(dhash_file(&path).unwrap(), compute_dhash(&img));
    }

    #[test]
    fn undecodable_file_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.png");
        std::fs::write(&path, b"definitely not a png").unwrap();
        let err = dhash_file(&path).unwrap_err();
        assert!(err.to_string().contains("broken.png"), "{err}");
    }
}
