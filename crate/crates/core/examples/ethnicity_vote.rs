//! Average per-picture ethnicity scores into one label per actor.

use posterlens::gateway::EthnicityScores;
use posterlens::identity::{vote_ethnicity, vote_raw};
use posterlens::EthnicityModel;

fn main() {
    let model = EthnicityModel::FourClass;
    println!("categories: {:?}", model.categories());
    let pictures = [
        EthnicityScores::new(model, vec![0.10, 0.05, 0.05, 0.80]).unwrap(),
        EthnicityScores::new(model, vec![0.60, 0.05, 0.05, 0.30]).unwrap(),
        EthnicityScores::new(model, vec![0.20, 0.05, 0.05, 0.70]).unwrap(),
    ];
    let refs: Vec<&EthnicityScores> = pictures.iter().collect();
    let vote = vote_ethnicity(&refs).unwrap();
    println!("averaged {:?} -> {:?}", vote.averaged_scores, vote.voted);

    let tie = vote_raw(model, &[vec![0.5, 0.0, 0.0, 0.5]]).unwrap();
    println!("exact tie resolves to the first category: {:?}", tie.voted);
}
