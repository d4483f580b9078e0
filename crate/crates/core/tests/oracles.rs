mod common;

use common::{oracles, sampling};

#[test]
fn loss_matches_scalar_oracle() {
    oracles::loss().unwrap();
}

#[test]
fn decoders_match_scalar_oracles() {
    oracles::decoders().unwrap();
}

#[test]
fn aggregators_match_scalar_oracles() {
    oracles::aggregators().unwrap();
}

#[test]
fn fixed_points_are_exact() {
    oracles::fixed_points().unwrap();
}

#[test]
fn sampler_frequencies_match_theory() {
    sampling::check().unwrap();
}
