//! Hash synthetic posters and collapse near-duplicates within a movie.

use image::DynamicImage;
use posterlens::imageprep::{compute_dhash, dedup_posters, HashedPoster, DEFAULT_DEDUP_THRESHOLD};
use posterlens::ingestion::{PosterRef, PosterSource};
use posterlens::synthetic::{render_poster, PosterDesign};

fn main() -> posterlens::Result<()> {
    let designs = [PosterDesign::RampUp, PosterDesign::RampDown, PosterDesign::SplitRamp, PosterDesign::AlternatingRows];
    let mut hashed = Vec::new();
    for (d, design) in designs.iter().enumerate() {
        for variant in 0..3 {
            let img = DynamicImage::ImageRgb8(render_poster(*design, variant, [200, 120, 40], 180, 270));
            let dhash = compute_dhash(&img);
            println!("{design:?} v{variant}: {}", dhash);
            hashed.push(HashedPoster {
                poster: PosterRef {
                    poster_id: format!("tt0000001-d{d}v{variant}"),
                    movie_id: "tt0000001".into(),
                    source: if variant == 0 { PosterSource::ImdbMain } else { PosterSource::Tmdb },
                    image_path: format!("d{d}v{variant}.png").into(),
                    width: 180,
                    height: 270,
                },
                dhash,
            });
        }
    }
    let outcome = dedup_posters(&hashed, DEFAULT_DEDUP_THRESHOLD)?;
    println!("\n{} posters -> {} kept", hashed.len(), outcome.kept.len());
    for c in &outcome.clusters {
        println!("cluster {:?} kept {}", c.members, c.representative);
    }
    Ok(())
}
