mod common;

use avery_sim::controller::{compute_max_pps, select_optimal_tier};
use avery_sim::model::{derive_threshold, load_lut, MissionGoal, SystemLut, TierName, TierSpec};
use proptest::prelude::*;

#[test]
fn threshold_dichotomy_over_the_bandwidth_grid() {
    let lut = SystemLut::<f64>::table1();
    let mut switch_index = None;
    for i in 800..=2000u32 {
        let b = f64::from(i) / 100.0;
        let d = select_optimal_tier(b, MissionGoal::PrioritizeAccuracy, &lut).unwrap();
        let expect = if b >= 11.68 { TierName::HighAccuracy } else { TierName::Balanced };
        assert_eq!(d.tier, expect, "b = {b}");
        if d.tier == TierName::HighAccuracy && switch_index.is_none() {
            switch_index = Some(i);
        }
    }
    assert_eq!(switch_index, Some(1168));
}

#[test]
fn bundled_threshold_is_derived_exactly() {
    let lut = SystemLut::<f64>::table1();
    let ha = lut.tier(TierName::HighAccuracy).data_size_mb;
    assert_eq!(derive_threshold(ha, lut.min_insight_pps().unwrap()).unwrap(), lut.bandwidth_threshold_mbps());
}

fn lut_strategy() -> impl Strategy<Value = SystemLut<f64>> {
    // Three strictly decreasing values per column, built from positive gaps.
    let col = |lo: f64, hi: f64, gap: f64| {
        (lo..hi, gap / 100.0..gap, gap / 100.0..gap).prop_map(|(c, g1, g2)| [c + g1 + g2, c + g2, c])
    };
    (col(0.01, 0.5, 0.25), col(0.1, 3.0, 2.0), col(40.0, 80.0, 5.0), col(40.0, 80.0, 5.0), 0.05..4.0f64).prop_map(
        |(ratio, size, orig, fine, pps)| {
            let tiers = TierName::ALL
                .iter()
                .enumerate()
                .map(|(i, &name)| TierSpec {
                    name,
                    compression_ratio: ratio[i],
                    accuracy_original: orig[i],
                    accuracy_finetuned: fine[i],
                    data_size_mb: size[i],
                })
                .collect();
            let threshold = derive_threshold(size[0], pps).unwrap();
            SystemLut::new(tiers, threshold, Some(pps)).expect("constructed valid")
        },
    )
}

proptest! {
    #![proptest_config(common::config(256))]

    #[test]
    fn derive_threshold_is_linear(s in 0.001..100.0f64, p in 0.001..100.0f64) {
        let base = derive_threshold(s, p).unwrap();
        prop_assert_eq!(derive_threshold(2.0 * s, p).unwrap(), 2.0 * base);
        prop_assert_eq!(derive_threshold(s, 2.0 * p).unwrap(), 2.0 * base);
    }

    #[test]
    fn lut_round_trips_through_json(lut in lut_strategy()) {
        let back: SystemLut<f64> = load_lut(&lut.to_json()).unwrap();
        prop_assert_eq!(back, lut);
    }

    #[test]
    fn throughput_goal_always_picks_high_throughput(b in 0.0..1000.0f64) {
        let lut = SystemLut::<f64>::table1();
        let d = select_optimal_tier(b, MissionGoal::PrioritizeThroughput, &lut).unwrap();
        prop_assert_eq!(d.tier, TierName::HighThroughput);
    }

    #[test]
    fn accuracy_goal_never_picks_high_throughput(b in 0.0..1000.0f64) {
        let lut = SystemLut::<f64>::table1();
        let d = select_optimal_tier(b, MissionGoal::PrioritizeAccuracy, &lut).unwrap();
        prop_assert_ne!(d.tier, TierName::HighThroughput);
    }

    #[test]
    fn max_pps_is_monotone(b1 in 0.0..100.0f64, b2 in 0.0..100.0f64, s1 in 0.01..10.0f64, s2 in 0.01..10.0f64) {
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        prop_assert!(compute_max_pps(lo, s1).unwrap() <= compute_max_pps(hi, s1).unwrap());
        prop_assume!(s1 != s2 && hi > 0.0);
        let (small, large) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(compute_max_pps(hi, small).unwrap() > compute_max_pps(hi, large).unwrap());
    }

    #[test]
    fn decisions_are_pure_and_complete(b in 0.0..40.0f64, accuracy in any::<bool>()) {
        let lut = SystemLut::<f64>::table1();
        let goal = if accuracy { MissionGoal::PrioritizeAccuracy } else { MissionGoal::PrioritizeThroughput };
        let a = select_optimal_tier(b, goal, &lut).unwrap();
        let again = select_optimal_tier(b, goal, &lut).unwrap();
        prop_assert_eq!(&a, &again);
        let names: Vec<TierName> = a.evaluated_points.iter().map(|p| p.tier).collect();
        prop_assert_eq!(names, TierName::ALL.to_vec());
        let chosen = a.evaluated_points.iter().find(|p| p.tier == a.tier).unwrap();
        prop_assert_eq!(chosen.max_pps, a.target_pps);
    }

    #[test]
    fn single_precision_agrees_with_double(b in 8.0..20.0f32) {
        let lut32 = SystemLut::<f32>::table1();
        let lut64 = SystemLut::<f64>::table1();
        let d32 = select_optimal_tier(b, MissionGoal::PrioritizeAccuracy, &lut32).unwrap();
        let d64 = select_optimal_tier(f64::from(b), MissionGoal::PrioritizeAccuracy, &lut64).unwrap();
        prop_assert_eq!(d32.tier, d64.tier);
        prop_assert!((f64::from(d32.target_pps) - d64.target_pps).abs() < 1e-5);
    }
}
