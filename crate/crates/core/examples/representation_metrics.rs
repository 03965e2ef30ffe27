//! Compute every representation table from a set of per-face facts.

use posterlens::demographics::CensusTable;
use posterlens::metrics::{analyze, AnalyzeOptions, LanguageFilter};
use posterlens::synthetic::{random_facts, FactOptions};

fn main() -> posterlens::Result<()> {
    let facts = random_facts(&FactOptions { movies: 40, ..Default::default() });
    let census = CensusTable::bundled();
    let analysis = analyze(&facts, &census, &AnalyzeOptions::default())?;
    for t in &analysis.tables {
        println!("{:<28} {:>4} rows  keys={:?}", t.name, t.rows.len(), t.key_columns);
    }
    let freq = analysis.table("ethnic_frequency_by_decade").unwrap();
    println!("\n{}", freq.to_csv());
    println!("{}", serde_json::to_string_pretty(&analysis.summary)?);

    let en = analyze(&facts, &census, &AnalyzeOptions { language: LanguageFilter::En, ..Default::default() })?;
    println!("english-language movies: {}", en.summary.movies);
    Ok(())
}
