//! Serial, non-preemptive uplink under a fluid-flow model: the packet in
//! flight drains at the instantaneous trace bandwidth and its completion time
//! is solved exactly against the piecewise-constant trace.

use std::collections::VecDeque;

use crate::controller::LinkOccupancy;
use crate::scalar::{megabits, Scalar};
use crate::trace::{BandwidthTrace, TraceError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InFlight<S> {
    pub packet_id: u64,
    pub size_mb: S,
    pub tx_start_s: S,
    /// `None` when the trace ends before the last bit leaves.
    pub done_at_s: Option<S>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome<S> {
    /// (packet id, transmission start)
    pub started: Vec<(u64, S)>,
    /// (packet id, completion time)
    pub completed: Vec<(u64, S)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkState<S> {
    in_flight: Option<InFlight<S>>,
    queue: VecDeque<(u64, S)>,
}

impl<S: Scalar> Default for LinkState<S> {
    fn default() -> Self {
        LinkState { in_flight: None, queue: VecDeque::new() }
    }
}

impl<S: Scalar> LinkState<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a ready packet to the FIFO; it starts on the next step.
    pub fn enqueue(&mut self, packet_id: u64, size_mb: S) {
        assert!(size_mb > S::zero(), "packet size must be positive");
        self.queue.push_back((packet_id, size_mb));
    }

    pub fn in_flight(&self) -> Option<&InFlight<S>> {
        self.in_flight.as_ref()
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    pub fn occupancy(&self) -> LinkOccupancy {
        match (&self.in_flight, self.queue.is_empty()) {
            (_, false) => LinkOccupancy::Backlogged,
            (Some(_), true) => LinkOccupancy::Busy,
            (None, true) => LinkOccupancy::Idle,
        }
    }

    pub fn next_completion(&self) -> Option<S> {
        self.in_flight.and_then(|f| f.done_at_s)
    }

    /// Megabits of the in-flight packet still to send at `t_s`.
    pub fn remaining_megabits(&self, trace: &BandwidthTrace<S>, t_s: S) -> Result<Option<S>, TraceError> {
        let Some(f) = self.in_flight else { return Ok(None) };
        let sent = trace.integrate_megabits(f.tx_start_s, t_s)?;
        Ok(Some(megabits(f.size_mb) - sent))
    }

    /// Advances the link from `t0_s` to `t1_s`. Queued packets start as soon
    /// as the link frees up (at `t0_s` if it is already idle); every packet
    /// whose last bit leaves by `t1_s` is reported with its exact completion time.
    pub fn step_transmission(
        &mut self,
        trace: &BandwidthTrace<S>,
        t0_s: S,
        t1_s: S,
    ) -> Result<StepOutcome<S>, TraceError> {
        if t1_s < t0_s {
            return Err(TraceError::ReversedInterval { t0: t0_s.as_f64(), t1: t1_s.as_f64() });
        }
        let end = trace.duration_s();
        for t in [t0_s, t1_s] {
            if !(t >= S::zero() && t <= end) {
                return Err(TraceError::OutOfTraceRange { t: t.as_f64(), duration: end.as_f64() });
            }
        }
        let mut out = StepOutcome { started: Vec::new(), completed: Vec::new() };
        let mut cursor = t0_s;
        loop {
            if self.in_flight.is_none() {
                let Some((packet_id, size_mb)) = self.queue.pop_front() else { break };
                let done_at_s = trace.time_to_deliver(cursor, megabits(size_mb))?;
                self.in_flight = Some(InFlight { packet_id, size_mb, tx_start_s: cursor, done_at_s });
                out.started.push((packet_id, cursor));
            }
            let f = self.in_flight.expect("in flight");
            match f.done_at_s {
                Some(done) if done <= t1_s => {
                    out.completed.push((f.packet_id, done));
                    cursor = cursor.max(done);
                    self.in_flight = None;
                }
                _ => break,
            }
        }
        Ok(out)
    }
}
