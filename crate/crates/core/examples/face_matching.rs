//! Match planted poster faces to cast members and score against ground truth.

use posterlens::gateway::{InferenceRequest, MockBackend};
use posterlens::identity::{evaluate_matching, match_posters, select_profile_faces, IndexScope, MatchOptions};
use posterlens::synthetic::{matching_corpus, MatchingCorpusOptions};

fn main() {
    let corpus = matching_corpus(&MatchingCorpusOptions { scramble_extra_cast: 10, ..Default::default() });
    let bundle = MockBackend::new(3, corpus.plan.clone())
        .infer(&corpus.manifest(), &InferenceRequest::default())
        .expect("mock inference");
    let profiles = select_profile_faces(&corpus.actors, &bundle, 0.9);
    println!("planted availability {:.3}", corpus.planted_availability());
    for scope in [IndexScope::WholeCast, IndexScope::TopK(10)] {
        let opts = MatchOptions { scope, ..Default::default() };
        let (matches, stats) = match_posters(&corpus.movies, &corpus.posters, &bundle, &profiles, &opts);
        let report = evaluate_matching(&corpus.truth, &matches);
        println!(
            "{scope:<8} matched {:>4} of {:>4} faces  verification {:.3}  identification {:.3}",
            stats.matched,
            stats.faces_seen,
            report.verification_rate.unwrap_or(f64::NAN),
            report.identification_rate.unwrap_or(f64::NAN),
        );
    }
}
