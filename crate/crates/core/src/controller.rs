//! On-board split controller: tier selection for the Insight stream
//! (Sense -> Evaluate -> Decide over the LUT), stream selection between
//! Context and Insight frames, and bandwidth sensing.

use thiserror::Error;

use crate::model::{MissionGoal, StreamKind, SystemLut, TierName};
use crate::scalar::{megabits, Scalar};
use crate::trace::{BandwidthTrace, TraceError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("data size must be positive")]
    NonPositiveDataSize,
    #[error("bandwidth {0} Mbps must be finite and non-negative")]
    InvalidBandwidth(f64),
    #[error("context period {period} s shorter than context compute latency {latency} s")]
    ContextPeriodTooShort { period: f64, latency: f64 },
}

/// Highest packet rate the link sustains for a payload: `(bandwidth / 8) / size`.
pub fn compute_max_pps<S: Scalar>(bandwidth_mbps: S, data_size_mb: S) -> Result<S, ControllerError> {
    if !(data_size_mb > S::zero()) {
        return Err(ControllerError::NonPositiveDataSize);
    }
    check_bandwidth(bandwidth_mbps)?;
    Ok((bandwidth_mbps / S::lit(8.0)) / data_size_mb)
}

fn check_bandwidth<S: Scalar>(bandwidth_mbps: S) -> Result<(), ControllerError> {
    if !(bandwidth_mbps >= S::zero()) || !bandwidth_mbps.is_finite() {
        return Err(ControllerError::InvalidBandwidth(bandwidth_mbps.as_f64()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<S> {
    pub tier: TierName,
    pub max_pps: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerDecision<S> {
    pub tier: TierName,
    pub target_pps: S,
    pub bandwidth_mbps: S,
    /// One entry per LUT tier, in table order.
    pub evaluated_points: [OperatingPoint<S>; 3],
}

fn evaluate<S: Scalar>(bandwidth_mbps: S, lut: &SystemLut<S>) -> Result<[OperatingPoint<S>; 3], ControllerError> {
    let mut points = [OperatingPoint { tier: TierName::HighAccuracy, max_pps: S::zero() }; 3];
    for (slot, tier) in points.iter_mut().zip(lut.tiers()) {
        *slot = OperatingPoint { tier: tier.name, max_pps: compute_max_pps(bandwidth_mbps, tier.data_size_mb)? };
    }
    Ok(points)
}

fn decision_for<S: Scalar>(
    tier: TierName,
    bandwidth_mbps: S,
    evaluated_points: [OperatingPoint<S>; 3],
) -> ControllerDecision<S> {
    let target_pps = evaluated_points
        .iter()
        .find(|p| p.tier == tier)
        .map(|p| p.max_pps)
        .expect("every tier evaluated");
    ControllerDecision { tier, target_pps, bandwidth_mbps, evaluated_points }
}

/// Adaptive tier choice.
///
/// Accuracy goal: High-Accuracy when `bandwidth >= threshold`, otherwise
/// Balanced (never High-Throughput). Throughput goal: always High-Throughput.
/// The target rate is the chosen tier's max PPS at the sensed bandwidth.
pub fn select_optimal_tier<S: Scalar>(
    bandwidth_mbps: S,
    goal: MissionGoal,
    lut: &SystemLut<S>,
) -> Result<ControllerDecision<S>, ControllerError> {
    // Sense happens in the caller; `bandwidth_mbps` is the sensed value.
    let points = evaluate(bandwidth_mbps, lut)?;
    let tier = match goal {
        MissionGoal::PrioritizeAccuracy if bandwidth_mbps >= lut.bandwidth_threshold_mbps() => TierName::HighAccuracy,
        MissionGoal::PrioritizeAccuracy => TierName::Balanced,
        MissionGoal::PrioritizeThroughput => TierName::HighThroughput,
    };
    Ok(decision_for(tier, bandwidth_mbps, points))
}

/// Decision of a baseline pinned to one tier.
pub fn fixed_tier<S: Scalar>(
    bandwidth_mbps: S,
    tier: TierName,
    lut: &SystemLut<S>,
) -> Result<ControllerDecision<S>, ControllerError> {
    Ok(decision_for(tier, bandwidth_mbps, evaluate(bandwidth_mbps, lut)?))
}

/// Oracle read of the trace at the decision instant.
pub fn sense_bandwidth<S: Scalar>(trace: &BandwidthTrace<S>, now_s: S) -> Result<S, TraceError> {
    trace.bandwidth_at(now_s)
}

/// Exponentially weighted throughput estimate over completed transmissions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaEstimator<S> {
    alpha: S,
    estimate: Option<S>,
}

impl<S: Scalar> EwmaEstimator<S> {
    pub fn new(alpha: S) -> Self {
        assert!(alpha > S::zero() && alpha <= S::one(), "EWMA weight must lie in (0, 1]");
        EwmaEstimator { alpha, estimate: None }
    }

    pub fn observe(&mut self, size_mb: S, tx_seconds: S) {
        if !(tx_seconds > S::zero()) {
            return;
        }
        let sample = megabits(size_mb) / tx_seconds;
        self.estimate = Some(match self.estimate {
            None => sample,
            Some(prev) => self.alpha * sample + (S::one() - self.alpha) * prev,
        });
    }

    pub fn estimate(&self) -> Option<S> {
        self.estimate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerMode {
    ContextOnly,
    /// Operator has requested Insight analysis.
    DualStream,
}

/// Uplink occupancy as seen by the stream selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkOccupancy {
    /// Nothing in flight, nothing waiting.
    Idle,
    /// One packet in flight, nothing waiting behind it.
    Busy,
    /// At least one packet waiting for the link.
    Backlogged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState<S> {
    mode: SchedulerMode,
    context_period_s: S,
    insight_request_log: Vec<(S, SchedulerMode)>,
    target_pps: S,
    last_insight_capture_s: Option<S>,
    last_context_capture_s: Option<S>,
}

impl<S: Scalar> SchedulerState<S> {
    pub fn new(context_period_s: S, context_compute_latency_s: S) -> Result<Self, ControllerError> {
        if !(context_period_s > S::zero() && context_period_s >= context_compute_latency_s) {
            return Err(ControllerError::ContextPeriodTooShort {
                period: context_period_s.as_f64(),
                latency: context_compute_latency_s.as_f64(),
            });
        }
        Ok(SchedulerState {
            mode: SchedulerMode::ContextOnly,
            context_period_s,
            insight_request_log: Vec::new(),
            target_pps: S::zero(),
            last_insight_capture_s: None,
            last_context_capture_s: None,
        })
    }

    pub fn mode(&self) -> SchedulerMode {
        self.mode
    }
    pub fn context_period_s(&self) -> S {
        self.context_period_s
    }
    pub fn target_pps(&self) -> S {
        self.target_pps
    }
    pub fn insight_request_log(&self) -> &[(S, SchedulerMode)] {
        &self.insight_request_log
    }

    pub fn set_mode(&mut self, now_s: S, mode: SchedulerMode) {
        self.insight_request_log.push((now_s, mode));
        self.mode = mode;
    }

    pub fn set_target_pps(&mut self, pps: S) {
        self.target_pps = pps;
    }

    pub fn record_capture(&mut self, stream: StreamKind, now_s: S) {
        match stream {
            StreamKind::Insight => self.last_insight_capture_s = Some(now_s),
            StreamKind::Context => self.last_context_capture_s = Some(now_s),
        }
    }

    /// Earliest time the next Insight capture is allowed; `None` while the
    /// target rate is zero or Insight is not requested.
    pub fn insight_due_at(&self) -> Option<S> {
        if self.mode != SchedulerMode::DualStream || !(self.target_pps > S::zero()) {
            return None;
        }
        Some(match self.last_insight_capture_s {
            None => S::zero(),
            Some(last) => last + S::one() / self.target_pps,
        })
    }

    pub fn context_due_at(&self) -> S {
        match self.last_context_capture_s {
            None => S::zero(),
            Some(last) => last + self.context_period_s,
        }
    }

    /// Next instant a pending stream becomes due, if later than `now_s`.
    pub fn next_due_after(&self, now_s: S) -> Option<S> {
        [self.insight_due_at(), Some(self.context_due_at())]
            .into_iter()
            .flatten()
            .filter(|&t| t > now_s)
            .fold(None, |acc: Option<S>, t| Some(acc.map_or(t, |a| a.min(t))))
    }
}

/// Which frame the pipeline should capture next, if any.
///
/// Insight wins when both are due. An Insight frame may be encoded while the
/// previous packet is still in flight, but not while another waits for the
/// link. While Insight is requested, Context frames only fill an idle link.
pub fn select_stream<S: Scalar>(state: &SchedulerState<S>, now_s: S, link: LinkOccupancy) -> Option<StreamKind> {
    let insight_due = state.insight_due_at().is_some_and(|t| now_s >= t);
    if insight_due && link != LinkOccupancy::Backlogged {
        return Some(StreamKind::Insight);
    }
    let context_due = now_s >= state.context_due_at();
    let context_allowed = match state.mode {
        SchedulerMode::ContextOnly => true,
        SchedulerMode::DualStream => link == LinkOccupancy::Idle,
    };
    (context_due && context_allowed).then_some(StreamKind::Context)
}
