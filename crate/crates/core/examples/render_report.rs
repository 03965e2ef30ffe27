//! Render metric tables as SVG line charts and heatmaps.

use posterlens::demographics::CensusTable;
use posterlens::metrics::{analyze, AnalyzeOptions};
use posterlens::report::render_report;
use posterlens::synthetic::{random_facts, FactOptions};

fn main() -> posterlens::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("posterlens-report"));
    let analysis = analyze(&random_facts(&FactOptions { movies: 60, ..Default::default() }), &CensusTable::bundled(), &AnalyzeOptions::default())?;
    analysis.write(&out.join("metrics"))?;
    for svg in render_report(&out.join("metrics"), &out.join("plots"))? {
        println!("{}", svg.display());
    }
    Ok(())
}
