#![allow(dead_code)]

use avery_sim::trace::{generate_trace, Band, BandwidthTrace, TraceSegmentSpec};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

/// Fixed-seed runner configuration so failures reproduce exactly.
pub fn config(cases: u32) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(0x5eed_a7e5), failure_persistence: None, ..Config::default() }
}

fn segment(duration_s: f64) -> impl Strategy<Value = TraceSegmentSpec<f64>> {
    prop_oneof![
        (8.0..20.0f64).prop_map(move |l| TraceSegmentSpec::constant(duration_s, l)),
        (8.0..20.0f64, 8.0..20.0f64).prop_map(move |(a, b)| TraceSegmentSpec::ramp(duration_s, a, b)),
        (8.0..20.0f64, 0.0..2.0f64).prop_map(move |(s, sd)| TraceSegmentSpec::random_walk(duration_s, s, sd)),
        (8.0..20.0f64, 8.0..20.0f64).prop_map(move |(h, l)| TraceSegmentSpec::step_drop(duration_s, h, l)),
    ]
}

/// Seeded traces in the default [8, 20] Mbps band, `segments` pieces of `piece_s` seconds each.
pub fn band_trace(segments: std::ops::Range<usize>, piece_s: f64) -> impl Strategy<Value = BandwidthTrace<f64>> {
    (prop::collection::vec(segment(piece_s), segments), any::<u64>())
        .prop_map(|(segs, seed)| generate_trace(&segs, Band::default(), seed, 1.0).expect("valid segments"))
}
