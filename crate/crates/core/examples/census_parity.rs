//! Compare on-poster representation with census shares for a release year.

use std::collections::BTreeMap;

use posterlens::demographics::{parity_ratio, CensusTable};
use posterlens::Ethnicity;

fn main() {
    let census = CensusTable::bundled();
    for (decade, shares) in census.decades() {
        println!("{decade}: {shares:?}");
    }
    let representation: BTreeMap<Ethnicity, f64> =
        [(Ethnicity::White, 0.79), (Ethnicity::Black, 0.11), (Ethnicity::Asian, 0.06), (Ethnicity::Indian, 0.04)].into();
    for year in [1995, 2018, 2031] {
        let row = parity_ratio(&representation, &census, year).expect("census covers the year");
        println!(
            "\n{year}: census decade {} (fallback {}), White ratio {:.3}, excluding Other {:.3}",
            row.census_decade,
            row.fallback,
            row.ratio[&posterlens::demographics::CensusCategory::White].unwrap(),
            row.ratio_excluding_other[&posterlens::demographics::CensusCategory::White].unwrap(),
        );
    }
}
