//! Planted corpora with known answers, for examples and tests.

mod corpus;
mod facts;
mod images;
mod matching;

pub use corpus::{
    actor_has_gray_image, actor_has_no_images, actor_id, default_config, movie_id, planted_ethnicity, write_corpus,
    SynthCorpus, SynthOptions, CASSETTE_DIR, CONFIG_FILE, DUMP_DIR, PLAN_FILE, POSTER_HEIGHT, POSTER_WIDTH, TRUTH_FILE,
};
pub use facts::{random_facts, FactOptions};
pub use images::{color_portrait, encode_png, gray_portrait, render_poster, PosterDesign};
pub use matching::{matching_corpus, MatchingCorpus, MatchingCorpusOptions};
