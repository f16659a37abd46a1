mod common;

use avery_sim::trace::{generate_trace, Band, BandwidthTrace, TraceSegmentSpec};
use proptest::prelude::*;

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5..50.0f64, 1..200)
}

proptest! {
    #![proptest_config(common::config(256))]

    #[test]
    fn generation_is_pure_and_clamped(trace in common::band_trace(1..6, 60.0)) {
        prop_assert!(trace.samples().iter().all(|&v| (8.0..=20.0).contains(&v)));
        prop_assert_eq!(trace.duration_s(), 60.0 * (trace.samples().len() / 60) as f64);
    }

    #[test]
    fn same_inputs_same_trace(seed in any::<u64>(), start in 0.0..30.0f64, sd in 0.0..5.0f64, lo in 0.0..10.0f64, width in 0.1..20.0f64) {
        let band = Band::new(lo, lo + width).unwrap();
        let segs = [TraceSegmentSpec::random_walk(120.0, start, sd), TraceSegmentSpec::step_drop(30.0, start, lo)];
        let a = generate_trace(&segs, band, seed, 1.0).unwrap();
        let b = generate_trace(&segs, band, seed, 1.0).unwrap();
        prop_assert!(a.samples().iter().all(|&v| v >= band.min && v <= band.max));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn integral_is_additive(s in samples(), f0 in 0.0..1.0f64, f1 in 0.0..1.0f64, f2 in 0.0..1.0f64) {
        let trace = BandwidthTrace::from_samples(s, 0.5, 0).unwrap();
        let d = trace.duration_s();
        let mut t = [f0 * d, f1 * d, f2 * d];
        t.sort_by(f64::total_cmp);
        let whole = trace.integrate_megabits(t[0], t[2]).unwrap();
        let parts = trace.integrate_megabits(t[0], t[1]).unwrap() + trace.integrate_megabits(t[1], t[2]).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.max(1.0), "{} vs {}", whole, parts);
    }

    #[test]
    fn aligned_integral_is_a_sample_sum(s in samples(), a in 0usize..200, b in 0usize..200) {
        let trace = BandwidthTrace::from_samples(s.clone(), 1.0, 0).unwrap();
        let (i, j) = (a.min(b) % (s.len() + 1), a.max(b) % (s.len() + 1));
        let (i, j) = (i.min(j), i.max(j));
        let expect: f64 = s[i..j].iter().sum();
        prop_assert_eq!(trace.integrate_megabits(i as f64, j as f64).unwrap(), expect);
    }

    #[test]
    fn time_to_deliver_inverts_the_integral(s in samples(), f0 in 0.0..1.0f64, f1 in 0.0..1.0f64) {
        let trace = BandwidthTrace::from_samples(s, 1.0, 0).unwrap();
        let d = trace.duration_s();
        let (t0, t1) = if f0 <= f1 { (f0 * d, f1 * d) } else { (f1 * d, f0 * d) };
        let bits = trace.integrate_megabits(t0, t1).unwrap();
        prop_assume!(bits > 0.0);
        let done = trace.time_to_deliver(t0, bits).unwrap().expect("fits in the trace");
        prop_assert!((trace.integrate_megabits(t0, done).unwrap() - bits).abs() < 1e-6);
    }

    #[test]
    fn csv_round_trip(s in prop::collection::vec(0.5..50.0f64, 2..100)) {
        let trace = BandwidthTrace::from_samples(s, 1.0, 0).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let back = BandwidthTrace::read_csv(&buf[..]).unwrap();
        prop_assert_eq!(back.samples().len(), trace.samples().len());
        for (x, y) in back.samples().iter().zip(trace.samples()) {
            prop_assert!((x - y).abs() <= 5e-7);
        }
    }
}
