//! Generate a synthetic corpus and run every stage, then run again to show skipping.

use posterlens::pipeline::{run_pipeline, Config, RunOptions};
use posterlens::synthetic::{write_corpus, SynthOptions};

fn main() -> posterlens::Result<()> {
    let root = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("posterlens-demo"));
    let _ = std::fs::remove_dir_all(&root);
    let corpus = write_corpus(&root, &SynthOptions::default())?;
    let cfg = Config::load(&corpus.config_path)?;
    for pass in ["first", "second"] {
        let manifest = run_pipeline(&cfg, &RunOptions::default())?;
        println!("{pass} run:");
        for r in &manifest.stages {
            println!("  {:<10} {:?}", r.stage.name(), r.status);
        }
    }
    let parity = std::fs::read_to_string(cfg.paths.out_dir.join("metrics/parity_ratio.csv"))
        .map_err(|e| posterlens::Error::io(&cfg.paths.out_dir, e))?;
    println!("\n{parity}");
    Ok(())
}
