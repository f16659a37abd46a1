mod common;

use avery_sim::link::LinkState;
use avery_sim::trace::BandwidthTrace;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Arrival {
    gap_s: f64,
    size_mb: f64,
}

fn arrivals() -> impl Strategy<Value = Vec<Arrival>> {
    prop::collection::vec((0.0..3.0f64, 0.01..5.0f64).prop_map(|(gap_s, size_mb)| Arrival { gap_s, size_mb }), 1..30)
}

/// Feeds packets into the link at their arrival times and drains it to the end of the trace.
fn drive(trace: &BandwidthTrace<f64>, arrivals: &[Arrival]) -> Vec<(u64, f64, f64, f64)> {
    let mut link = LinkState::new();
    let mut sizes = Vec::new();
    let mut starts = std::collections::HashMap::new();
    let mut done = Vec::new();
    let mut now = 0.0;
    let end = trace.duration_s();
    let mut record = |out: avery_sim::link::StepOutcome<f64>, sizes: &Vec<f64>| {
        for (id, t) in out.started {
            starts.insert(id, t);
        }
        for (id, t) in out.completed {
            done.push((id, sizes[id as usize], starts[&id], t));
        }
    };
    for (id, a) in arrivals.iter().enumerate() {
        let next = (now + a.gap_s).min(end);
        let out = link.step_transmission(trace, now, next).unwrap();
        record(out, &sizes);
        now = next;
        sizes.push(a.size_mb);
        link.enqueue(id as u64, a.size_mb);
    }
    let out = link.step_transmission(trace, now, end).unwrap();
    record(out, &sizes);
    done
}

proptest! {
    #![proptest_config(common::config(1000))]

    #[test]
    fn completed_packets_carry_exactly_their_bits(
        samples in prop::collection::vec(0.5..40.0f64, 5..120),
        resolution in prop_oneof![Just(1.0), Just(0.5), Just(0.1)],
        arrivals in arrivals(),
    ) {
        let trace = BandwidthTrace::from_samples(samples, resolution, 0).unwrap();
        let done = drive(&trace, &arrivals);
        let mut last_done = 0.0;
        for (id, size, start, finish) in done {
            let sent = trace.integrate_megabits(start, finish).unwrap();
            prop_assert!((sent - size * 8.0).abs() <= 1e-6, "packet {}: {} vs {}", id, sent, size * 8.0);
            // serial, FIFO: each transmission starts no earlier than the previous one ends
            prop_assert!(start >= last_done);
            prop_assert!(finish >= start);
            last_done = finish;
        }
    }
}
