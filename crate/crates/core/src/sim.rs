//! Discrete-event mission clock.
//!
//! The on-board pipeline has two serial stages: compute (one frame at a
//! time) and the uplink (one packet at a time, FIFO). A frame may be encoded
//! while the previous packet is still being sent. Events at equal times are
//! ordered by kind (Sense, insight on, insight off, Capture, ComputeDone,
//! TxDone, MissionEnd) and then by packet id, which makes the processing
//! order independent of insertion order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{
    self, fixed_tier, select_optimal_tier, select_stream, ControllerError, EwmaEstimator, SchedulerMode,
    SchedulerState,
};
use crate::harness::{assign_dataset, stream_energy};
use crate::link::{LinkState, StepOutcome};
use crate::model::{Dataset, MissionGoal, Packet, ProfileError, StageProfile, StreamKind, SystemLut, TierName};
use crate::trace::{BandwidthTrace, TraceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    Avery,
    StaticHighAccuracy,
    StaticBalanced,
    StaticHighThroughput,
    /// Whole backbone on-board; no Insight packets hit the network.
    FullEdge,
}

impl Policy {
    pub const COMPARED: [Policy; 4] =
        [Policy::Avery, Policy::StaticHighAccuracy, Policy::StaticBalanced, Policy::StaticHighThroughput];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Avery => "Avery",
            Policy::StaticHighAccuracy => "StaticHighAccuracy",
            Policy::StaticBalanced => "StaticBalanced",
            Policy::StaticHighThroughput => "StaticHighThroughput",
            Policy::FullEdge => "FullEdge",
        }
    }

    pub fn fixed_tier(self) -> Option<TierName> {
        match self {
            Policy::StaticHighAccuracy => Some(TierName::HighAccuracy),
            Policy::StaticBalanced => Some(TierName::Balanced),
            Policy::StaticHighThroughput => Some(TierName::HighThroughput),
            Policy::Avery | Policy::FullEdge => None,
        }
    }
}

/// How the controller learns the current bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Sensing {
    /// Read the trace at the sensing instant.
    #[default]
    Oracle,
    /// EWMA of throughput over completed transmissions; oracle until the first completion.
    Ewma { alpha: f64 },
}

/// Operator intent: Insight analysis requested (`on`) or released.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsightRequest {
    pub t_s: f64,
    pub on: bool,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("trace covers {trace_s} s but the mission lasts {mission_s} s")]
    TraceTooShort { trace_s: f64, mission_s: f64 },
    #[error("invalid mission: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Everything one mission run reads. All inputs are borrowed immutably.
#[derive(Debug, Clone)]
pub struct World<'a> {
    pub duration_s: f64,
    pub trace: &'a BandwidthTrace<f64>,
    pub lut: &'a SystemLut<f64>,
    pub profile: StageProfile<f64>,
    pub goal: MissionGoal,
    pub policy: Policy,
    pub sensing_period_s: f64,
    pub context_period_s: f64,
    pub insight_schedule: Vec<InsightRequest>,
    pub sensing: Sensing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Sense,
    InsightRequestOn,
    InsightRequestOff,
    Capture,
    ComputeDone,
    TxDone,
    MissionEnd,
}

impl EventKind {
    fn rank(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub t_s: f64,
    pub kind: EventKind,
    /// Packet or frame id for ComputeDone; zero otherwise.
    pub key: u64,
    seq: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t_s
            .total_cmp(&other.t_s)
            .then(self.kind.rank().cmp(&other.kind.rank()))
            .then(self.key.cmp(&other.key))
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Default)]
struct EventQueue {
    heap: BinaryHeap<std::cmp::Reverse<Event>>,
    seq: u64,
}

impl EventQueue {
    fn push(&mut self, t_s: f64, kind: EventKind, key: u64) {
        self.seq += 1;
        self.heap.push(std::cmp::Reverse(Event { t_s, kind, key, seq: self.seq }));
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|r| r.0)
    }
}

/// Timeline row label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Sense,
    InsightOn,
    InsightOff,
    Capture,
    ComputeDone,
    TxStart,
    TxDone,
    MissionEnd,
}

impl RowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::Sense => "sense",
            RowKind::InsightOn => "insight_on",
            RowKind::InsightOff => "insight_off",
            RowKind::Capture => "capture",
            RowKind::ComputeDone => "compute_done",
            RowKind::TxStart => "tx_start",
            RowKind::TxDone => "tx_done",
            RowKind::MissionEnd => "mission_end",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineRow {
    pub t_s: f64,
    pub event: RowKind,
    pub stream: Option<StreamKind>,
    pub tier: Option<TierName>,
    pub dataset: Option<Dataset>,
    pub packet_id: Option<u64>,
    pub size_mb: Option<f64>,
    pub bandwidth_mbps: Option<f64>,
    pub target_pps: Option<f64>,
    pub energy_j: Option<f64>,
}

impl TimelineRow {
    fn at(t_s: f64, event: RowKind) -> Self {
        TimelineRow {
            t_s,
            event,
            stream: None,
            tier: None,
            dataset: None,
            packet_id: None,
            size_mb: None,
            bandwidth_mbps: None,
            target_pps: None,
            energy_j: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub t_s: f64,
    /// `None` for the full on-board baseline.
    pub tier: Option<TierName>,
    pub bandwidth_mbps: f64,
    pub target_pps: f64,
}

/// Insight frame processed entirely on-board (full-edge baseline).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub id: u64,
    pub dataset: Dataset,
    pub t_capture_s: f64,
    pub t_done_s: Option<f64>,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionTimeline {
    pub duration_s: f64,
    pub policy: Policy,
    pub goal: MissionGoal,
    pub rows: Vec<TimelineRow>,
    /// Every network packet captured, in id order.
    pub packets: Vec<Packet<f64>>,
    pub local_frames: Vec<LocalFrame>,
    pub decisions: Vec<DecisionRecord>,
}

impl MissionTimeline {
    pub fn delivered_insight(&self) -> impl Iterator<Item = &Packet<f64>> {
        self.packets.iter().filter(|p| p.stream() == StreamKind::Insight && p.t_tx_done_s().is_some())
    }
}

struct Frame {
    id: u64,
    stream: StreamKind,
    local: bool,
}

struct Mission<'w, 'a> {
    world: &'w World<'a>,
    queue: EventQueue,
    link: LinkState<f64>,
    scheduler: SchedulerState<f64>,
    estimator: Option<EwmaEstimator<f64>>,
    decision: Option<DecisionRecord>,
    computing: Option<Frame>,
    pending_wakeup: Option<f64>,
    next_id: u64,
    insight_count: u64,
    context_count: u64,
    timeline: MissionTimeline,
}

/// Runs one mission to its end and returns the full event log.
pub fn run_event_loop(world: &World<'_>) -> Result<MissionTimeline, SimError> {
    validate(world)?;
    let scheduler = SchedulerState::new(world.context_period_s, world.profile.context_compute_latency_s)?;
    let estimator = match world.sensing {
        Sensing::Oracle => None,
        Sensing::Ewma { alpha } => Some(EwmaEstimator::new(alpha)),
    };
    let mut mission = Mission {
        world,
        queue: EventQueue::default(),
        link: LinkState::new(),
        scheduler,
        estimator,
        decision: None,
        computing: None,
        pending_wakeup: None,
        next_id: 0,
        insight_count: 0,
        context_count: 0,
        timeline: MissionTimeline {
            duration_s: world.duration_s,
            policy: world.policy,
            goal: world.goal,
            rows: Vec::new(),
            packets: Vec::new(),
            local_frames: Vec::new(),
            decisions: Vec::new(),
        },
    };
    mission.queue.push(0.0, EventKind::Sense, 0);
    for req in &world.insight_schedule {
        let kind = if req.on { EventKind::InsightRequestOn } else { EventKind::InsightRequestOff };
        mission.queue.push(req.t_s, kind, 0);
    }
    mission.queue.push(world.duration_s, EventKind::MissionEnd, 0);
    mission.run()?;
    Ok(mission.timeline)
}

fn validate(world: &World<'_>) -> Result<(), SimError> {
    if !(world.duration_s > 0.0) || !world.duration_s.is_finite() {
        return Err(SimError::InvalidConfig("duration_s must be positive".into()));
    }
    if !(world.sensing_period_s > 0.0) {
        return Err(SimError::InvalidConfig("sensing_period_s must be positive".into()));
    }
    if let Sensing::Ewma { alpha } = world.sensing {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(SimError::InvalidConfig("EWMA alpha must lie in (0, 1]".into()));
        }
    }
    for req in &world.insight_schedule {
        if !(req.t_s >= 0.0 && req.t_s <= world.duration_s) {
            return Err(SimError::InvalidConfig(format!("insight request at {} s outside the mission", req.t_s)));
        }
    }
    world.profile.validate()?;
    let trace_s = world.trace.duration_s();
    if trace_s < world.duration_s {
        return Err(SimError::TraceTooShort { trace_s, mission_s: world.duration_s });
    }
    Ok(())
}

impl Mission<'_, '_> {
    fn run(&mut self) -> Result<(), SimError> {
        while let Some(ev) = self.queue.pop() {
            let now = ev.t_s;
            match ev.kind {
                EventKind::Sense => self.sense(now)?,
                EventKind::InsightRequestOn | EventKind::InsightRequestOff => {
                    let on = ev.kind == EventKind::InsightRequestOn;
                    let mode = if on { SchedulerMode::DualStream } else { SchedulerMode::ContextOnly };
                    self.scheduler.set_mode(now, mode);
                    let row = if on { RowKind::InsightOn } else { RowKind::InsightOff };
                    self.timeline.rows.push(TimelineRow::at(now, row));
                }
                EventKind::Capture => {
                    if self.pending_wakeup == Some(now) {
                        self.pending_wakeup = None;
                    }
                }
                EventKind::ComputeDone => self.compute_done(now)?,
                EventKind::TxDone => self.advance_link(now)?,
                EventKind::MissionEnd => {
                    self.timeline.rows.push(TimelineRow::at(now, RowKind::MissionEnd));
                    return Ok(());
                }
            }
            self.try_capture(now)?;
        }
        Ok(())
    }

    fn sense(&mut self, now: f64) -> Result<(), SimError> {
        let world = self.world;
        let oracle = controller::sense_bandwidth(world.trace, now)?;
        let bandwidth = self.estimator.and_then(|e| e.estimate()).unwrap_or(oracle);
        let record = match world.policy {
            Policy::Avery => {
                let d = select_optimal_tier(bandwidth, world.goal, world.lut)?;
                DecisionRecord { t_s: now, tier: Some(d.tier), bandwidth_mbps: bandwidth, target_pps: d.target_pps }
            }
            Policy::FullEdge => DecisionRecord {
                t_s: now,
                tier: None,
                bandwidth_mbps: bandwidth,
                target_pps: 1.0 / world.profile.full_edge_latency_s,
            },
            fixed => {
                let tier = fixed.fixed_tier().expect("static policy has a tier");
                let d = fixed_tier(bandwidth, tier, world.lut)?;
                DecisionRecord { t_s: now, tier: Some(tier), bandwidth_mbps: bandwidth, target_pps: d.target_pps }
            }
        };
        self.scheduler.set_target_pps(record.target_pps);
        self.decision = Some(record);
        self.timeline.decisions.push(record);
        self.timeline.rows.push(TimelineRow {
            tier: record.tier,
            bandwidth_mbps: Some(bandwidth),
            target_pps: Some(record.target_pps),
            ..TimelineRow::at(now, RowKind::Sense)
        });

        let k = (now / world.sensing_period_s).round() + 1.0;
        let next = k * world.sensing_period_s;
        if next < world.duration_s {
            self.queue.push(next, EventKind::Sense, 0);
        }
        Ok(())
    }

    fn try_capture(&mut self, now: f64) -> Result<(), SimError> {
        if self.computing.is_some() {
            return Ok(());
        }
        match select_stream(&self.scheduler, now, self.link.occupancy()) {
            Some(stream) => self.capture(now, stream),
            None => {
                if let Some(t) = self.scheduler.next_due_after(now) {
                    if t < self.world.duration_s && self.pending_wakeup != Some(t) {
                        self.pending_wakeup = Some(t);
                        self.queue.push(t, EventKind::Capture, 0);
                    }
                }
            }
        }
        Ok(())
    }

    fn capture(&mut self, now: f64, stream: StreamKind) {
        let world = self.world;
        let profile = &world.profile;
        let id = self.next_id;
        self.next_id += 1;
        self.scheduler.record_capture(stream, now);
        let decision = self.decision.expect("sensed before first capture");

        let (latency, local, row) = match stream {
            StreamKind::Insight => {
                let dataset = assign_dataset(self.insight_count);
                self.insight_count += 1;
                if world.policy == Policy::FullEdge {
                    let energy = stream_energy(StreamKind::Insight, 0.0, profile, world.policy);
                    self.timeline.local_frames.push(LocalFrame {
                        id,
                        dataset,
                        t_capture_s: now,
                        t_done_s: None,
                        energy_j: energy,
                    });
                    let row = TimelineRow {
                        stream: Some(stream),
                        dataset: Some(dataset),
                        packet_id: Some(id),
                        target_pps: Some(decision.target_pps),
                        energy_j: Some(energy),
                        ..TimelineRow::at(now, RowKind::Capture)
                    };
                    (profile.full_edge_latency_s, true, row)
                } else {
                    let tier = decision.tier.expect("split policy decides a tier");
                    let size = world.lut.tier(tier).data_size_mb;
                    let packet = Packet::insight(id, tier, size, dataset, now);
                    (profile.insight_compute_latency_s, false, self.capture_packet(packet, decision.target_pps))
                }
            }
            StreamKind::Context => {
                let dataset = assign_dataset(self.context_count);
                self.context_count += 1;
                let packet = Packet::context(id, profile.context_size_mb, dataset, now);
                (profile.context_compute_latency_s, false, self.capture_packet(packet, decision.target_pps))
            }
        };
        self.timeline.rows.push(row);
        self.computing = Some(Frame { id, stream, local });
        self.queue.push(now + latency, EventKind::ComputeDone, id);
    }

    fn capture_packet(&mut self, packet: Packet<f64>, target_pps: f64) -> TimelineRow {
        let energy = stream_energy(packet.stream(), packet.size_mb(), &self.world.profile, self.world.policy);
        let row = TimelineRow {
            stream: Some(packet.stream()),
            tier: packet.tier(),
            dataset: Some(packet.dataset()),
            packet_id: Some(packet.id()),
            size_mb: Some(packet.size_mb()),
            target_pps: (packet.stream() == StreamKind::Insight).then_some(target_pps),
            energy_j: Some(energy),
            ..TimelineRow::at(packet.t_capture_s(), RowKind::Capture)
        };
        self.timeline.packets.push(packet);
        row
    }

    fn packet_mut(&mut self, id: u64) -> &mut Packet<f64> {
        let idx = self
            .timeline
            .packets
            .binary_search_by_key(&id, |p| p.id())
            .expect("packet recorded at capture");
        &mut self.timeline.packets[idx]
    }

    fn compute_done(&mut self, now: f64) -> Result<(), SimError> {
        let frame = self.computing.take().expect("compute stage busy");
        if frame.local {
            let f = self
                .timeline
                .local_frames
                .iter_mut()
                .find(|f| f.id == frame.id)
                .expect("local frame recorded");
            f.t_done_s = Some(now);
            let dataset = f.dataset;
            self.timeline.rows.push(TimelineRow {
                stream: Some(frame.stream),
                dataset: Some(dataset),
                packet_id: Some(frame.id),
                ..TimelineRow::at(now, RowKind::ComputeDone)
            });
            return Ok(());
        }
        let packet = self.packet_mut(frame.id);
        packet.mark_compute_done(now);
        let row = packet_row(packet, now, RowKind::ComputeDone);
        let size = packet.size_mb();
        self.timeline.rows.push(row);
        self.link.enqueue(frame.id, size);
        self.advance_link(now)
    }

    fn advance_link(&mut self, now: f64) -> Result<(), SimError> {
        let had_in_flight = self.link.in_flight().map(|f| f.packet_id);
        let StepOutcome { started, completed } = self.link.step_transmission(self.world.trace, now, now)?;
        let bandwidth = self.world.trace.bandwidth_at(now).ok();
        for &(id, t) in &completed {
            let packet = self.packet_mut(id);
            packet.mark_tx_done(t);
            let row = TimelineRow { bandwidth_mbps: bandwidth, ..packet_row(packet, t, RowKind::TxDone) };
            let (size, start) = (packet.size_mb(), packet.t_tx_start_s().expect("started"));
            self.timeline.rows.push(row);
            if let Some(est) = self.estimator.as_mut() {
                est.observe(size, t - start);
            }
        }
        for &(id, t) in &started {
            let packet = self.packet_mut(id);
            packet.mark_tx_start(t);
            let row = TimelineRow { bandwidth_mbps: bandwidth, ..packet_row(packet, t, RowKind::TxStart) };
            self.timeline.rows.push(row);
        }
        let now_in_flight = self.link.in_flight().map(|f| f.packet_id);
        if now_in_flight.is_some() && now_in_flight != had_in_flight {
            if let Some(done) = self.link.next_completion() {
                if done <= self.world.duration_s {
                    self.queue.push(done, EventKind::TxDone, 0);
                }
            }
        }
        Ok(())
    }
}

fn packet_row(packet: &Packet<f64>, t: f64, event: RowKind) -> TimelineRow {
    TimelineRow {
        stream: Some(packet.stream()),
        tier: packet.tier(),
        dataset: Some(packet.dataset()),
        packet_id: Some(packet.id()),
        size_mb: Some(packet.size_mb()),
        ..TimelineRow::at(t, event)
    }
}
