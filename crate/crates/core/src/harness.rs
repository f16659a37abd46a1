//! Scenario files, policy runs and mission metrics.
//!
//! A scenario names a trace (scripted segments or a CSV file), a LUT, the
//! stage profile, the operator's goal and Insight-request script. Running it
//! yields the event timeline plus a [`MissionSummary`]: mean IoU over
//! delivered Insight packets, delivered Insight packets per second, energy,
//! and tier switches. [`run_comparison`] runs the adaptive controller and the
//! three single-tier baselines over the same inputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{load_lut, AccuracySample, Dataset, LutError, MissionGoal, Packet, StageProfile, StreamKind, SystemLut};
use crate::sim::{run_event_loop, InsightRequest, MissionTimeline, Policy, Sensing, SimError, World};
use crate::trace::{generate_trace, Band, BandwidthTrace, GaussianSource, TraceError, TraceSegmentSpec};

/// Environment variable capping the worker threads used for comparisons and sweeps.
pub const THREADS_ENV: &str = "AVERY_SIM_THREADS";

/// Random stream reserved for IoU jitter, kept clear of per-segment trace streams.
const JITTER_STREAM: usize = 1024;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
    #[error(transparent)]
    Lut(#[from] LutError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("context packet {0} carries no mask to score")]
    ContextPacketNotScorable(u64),
}

/// Where the bandwidth signal comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<TraceSegmentSpec<f64>>>,
    /// Trace CSV, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub band: Band<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub resolution_s: f64,
}

impl TraceConfig {
    pub fn segments(segments: Vec<TraceSegmentSpec<f64>>, band: Band<f64>, seed: u64) -> Self {
        TraceConfig { segments: Some(segments), file: None, band, seed, resolution_s: 1.0 }
    }

    pub fn build(&self, base_dir: &Path) -> Result<BandwidthTrace<f64>, ScenarioError> {
        match (&self.segments, &self.file) {
            (Some(segs), None) => Ok(generate_trace(segs, self.band, self.seed, self.resolution_s)?),
            (None, Some(file)) => {
                let path = base_dir.join(file);
                let bytes = fs::read(&path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
                let trace = BandwidthTrace::read_csv(&bytes[..])?;
                Band::new(self.band.min, self.band.max)?;
                if !trace.within(&self.band) {
                    return Err(ScenarioError::Invalid(format!(
                        "trace {} leaves the band [{}, {}]",
                        path.display(),
                        self.band.min,
                        self.band.max
                    )));
                }
                Ok(trace)
            }
            _ => Err(ScenarioError::Invalid("trace needs exactly one of `segments` or `file`".into())),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_duration() -> f64 {
    1200.0
}
fn default_policy() -> Policy {
    Policy::Avery
}
fn default_goal() -> MissionGoal {
    MissionGoal::PrioritizeAccuracy
}

/// One mission configuration, as stored in `*.scenario.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    pub trace: TraceConfig,
    #[serde(default = "default_goal")]
    pub goal: MissionGoal,
    #[serde(default = "default_policy")]
    pub policy: Policy,
    /// LUT file relative to the scenario file; the bundled table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lut_path: Option<PathBuf>,
    #[serde(default)]
    pub stage_profile: StageProfile<f64>,
    #[serde(default = "one")]
    pub sensing_period_s: f64,
    #[serde(default = "one")]
    pub context_period_s: f64,
    #[serde(default)]
    pub insight_schedule: Vec<InsightRequest>,
    #[serde(default)]
    pub sensing: Sensing,
    /// Standard deviation of zero-mean IoU noise, percentage points. Off by default.
    #[serde(default)]
    pub iou_jitter_stddev: f64,
    /// Directory relative paths resolve against; set by [`Scenario::from_file`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    /// A mission over a flat trace with Insight requested for its whole length.
    pub fn constant(bandwidth_mbps: f64, duration_s: f64, policy: Policy, goal: MissionGoal) -> Self {
        Scenario {
            name: format!("constant-{bandwidth_mbps}"),
            duration_s,
            trace: TraceConfig::segments(
                vec![TraceSegmentSpec::constant(duration_s, bandwidth_mbps)],
                Band { min: 0.0, max: bandwidth_mbps + 1.0 },
                0,
            ),
            goal,
            policy,
            lut_path: None,
            stage_profile: StageProfile::default(),
            sensing_period_s: 1.0,
            context_period_s: 1.0,
            insight_schedule: vec![InsightRequest { t_s: 0.0, on: true }],
            sensing: Sensing::Oracle,
            iou_jitter_stddev: 0.0,
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
        let mut s: Scenario = serde_json::from_str(&text)
            .map_err(|e| ScenarioError::Parse { path: path.to_path_buf(), msg: e.to_string() })?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Input files this scenario reads, resolved against its directory.
    pub fn referenced_files(&self) -> Vec<PathBuf> {
        let mut files = Vec::new();
        if let Some(lut) = &self.lut_path {
            files.push(self.base_dir.join(lut));
        }
        if let Some(trace) = &self.trace.file {
            files.push(self.base_dir.join(trace));
        }
        files
    }

    pub fn load_lut(&self) -> Result<SystemLut<f64>, ScenarioError> {
        match &self.lut_path {
            None => Ok(SystemLut::table1()),
            Some(p) => {
                let path = self.base_dir.join(p);
                let text = fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path, source })?;
                Ok(load_lut(&text)?)
            }
        }
    }

    pub fn build_trace(&self) -> Result<BandwidthTrace<f64>, ScenarioError> {
        self.trace.build(&self.base_dir)
    }

    /// Loads the LUT and trace and checks cross-field constraints.
    pub fn prepare(&self) -> Result<Prepared, ScenarioError> {
        if !(self.iou_jitter_stddev >= 0.0) {
            return Err(ScenarioError::Invalid("iou_jitter_stddev must be non-negative".into()));
        }
        let lut = self.load_lut()?;
        let trace = self.build_trace()?;
        self.stage_profile.validate().map_err(SimError::from)?;
        if trace.duration_s() < self.duration_s {
            return Err(SimError::TraceTooShort { trace_s: trace.duration_s(), mission_s: self.duration_s }.into());
        }
        Ok(Prepared { lut, trace })
    }

    fn world<'a>(&self, prepared: &'a Prepared, policy: Policy) -> World<'a> {
        World {
            duration_s: self.duration_s,
            trace: &prepared.trace,
            lut: &prepared.lut,
            profile: self.stage_profile,
            goal: self.goal,
            policy,
            sensing_period_s: self.sensing_period_s,
            context_period_s: self.context_period_s,
            insight_schedule: self.insight_schedule.clone(),
            sensing: self.sensing,
        }
    }
}

/// Immutable inputs shared by every run of one scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub lut: SystemLut<f64>,
    pub trace: BandwidthTrace<f64>,
}

/// Round-robin dataset assignment: even ordinals Original, odd Finetuned.
pub fn assign_dataset(packet_index: u64) -> Dataset {
    if packet_index.is_multiple_of(2) {
        Dataset::Original
    } else {
        Dataset::Finetuned
    }
}

/// IoU of a delivered Insight packet: its tier's LUT value for its dataset column.
pub fn score_packet(packet: &Packet<f64>, lut: &SystemLut<f64>) -> Result<AccuracySample<f64>, ScenarioError> {
    let tier = match (packet.stream(), packet.tier()) {
        (StreamKind::Insight, Some(t)) => t,
        _ => return Err(ScenarioError::ContextPacketNotScorable(packet.id())),
    };
    Ok(AccuracySample { packet_id: packet.id(), iou_percent: lut.tier(tier).accuracy(packet.dataset()) })
}

/// On-board energy of one frame of `stream` with a `size_mb` payload.
pub fn stream_energy(stream: StreamKind, size_mb: f64, profile: &StageProfile<f64>, policy: Policy) -> f64 {
    match (stream, policy) {
        (StreamKind::Insight, Policy::FullEdge) => profile.full_edge_energy_j,
        (StreamKind::Insight, _) => profile.insight_energy_j + profile.tx_energy_j_per_mb * size_mb,
        (StreamKind::Context, _) => profile.context_energy_j + profile.tx_energy_j_per_mb * size_mb,
    }
}

pub fn frame_energy(packet: &Packet<f64>, profile: &StageProfile<f64>, policy: Policy) -> f64 {
    stream_energy(packet.stream(), packet.size_mb(), profile, policy)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetBreakdown {
    pub original_iou: Option<f64>,
    pub finetuned_iou: Option<f64>,
    pub original_count: usize,
    pub finetuned_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionSummary {
    pub policy: Policy,
    pub goal: MissionGoal,
    /// Blended mean over delivered Insight packets; `None` when nothing was scored.
    pub avg_iou_percent: Option<f64>,
    pub avg_pps: f64,
    pub insight_delivered: usize,
    pub context_delivered: usize,
    pub total_energy_j: f64,
    pub energy_per_insight_frame_j: Option<f64>,
    pub tier_switch_count: usize,
    pub switch_times_s: Vec<f64>,
    pub per_dataset: DatasetBreakdown,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Aggregates a timeline into mission metrics.
pub fn summarize(
    timeline: &MissionTimeline,
    lut: &SystemLut<f64>,
    profile: &StageProfile<f64>,
    jitter: Option<(f64, u64)>,
) -> Result<MissionSummary, ScenarioError> {
    let mut noise = jitter.filter(|(sd, _)| *sd > 0.0).map(|(sd, seed)| (sd, GaussianSource::new(seed, JITTER_STREAM)));
    let (mut all, mut original, mut finetuned) = (Vec::new(), Vec::new(), Vec::new());
    if timeline.policy != Policy::FullEdge {
        for packet in timeline.delivered_insight() {
            let mut iou = score_packet(packet, lut)?.iou_percent;
            if let Some((sd, g)) = noise.as_mut() {
                iou = (iou + *sd * g.next_standard()).clamp(0.0, 100.0);
            }
            all.push(iou);
            match packet.dataset() {
                Dataset::Original => original.push(iou),
                Dataset::Finetuned => finetuned.push(iou),
            }
        }
    }
    let insight_delivered = if timeline.policy == Policy::FullEdge {
        timeline.local_frames.iter().filter(|f| f.t_done_s.is_some()).count()
    } else {
        all.len()
    };
    let context_delivered = timeline
        .packets
        .iter()
        .filter(|p| p.stream() == StreamKind::Context && p.t_tx_done_s().is_some())
        .count();

    let packet_energy: f64 = timeline.packets.iter().map(|p| frame_energy(p, profile, timeline.policy)).sum();
    let local_energy: f64 = timeline.local_frames.iter().map(|f| f.energy_j).sum();
    let insight_frames: Vec<f64> = timeline
        .packets
        .iter()
        .filter(|p| p.stream() == StreamKind::Insight)
        .map(|p| frame_energy(p, profile, timeline.policy))
        .chain(timeline.local_frames.iter().map(|f| f.energy_j))
        .collect();

    let switch_times_s: Vec<f64> = timeline
        .decisions
        .windows(2)
        .filter(|d| d[0].tier != d[1].tier)
        .map(|d| d[1].t_s)
        .collect();

    Ok(MissionSummary {
        policy: timeline.policy,
        goal: timeline.goal,
        avg_iou_percent: mean(&all),
        avg_pps: insight_delivered as f64 / timeline.duration_s,
        insight_delivered,
        context_delivered,
        total_energy_j: packet_energy + local_energy,
        energy_per_insight_frame_j: mean(&insight_frames),
        tier_switch_count: switch_times_s.len(),
        switch_times_s,
        per_dataset: DatasetBreakdown {
            original_iou: mean(&original),
            finetuned_iou: mean(&finetuned),
            original_count: original.len(),
            finetuned_count: finetuned.len(),
        },
    })
}

pub fn run_prepared(
    scenario: &Scenario,
    prepared: &Prepared,
    policy: Policy,
) -> Result<(MissionTimeline, MissionSummary), ScenarioError> {
    let timeline = run_event_loop(&scenario.world(prepared, policy))?;
    let jitter = Some((scenario.iou_jitter_stddev, scenario.trace.seed));
    let summary = summarize(&timeline, &prepared.lut, &scenario.stage_profile, jitter)?;
    Ok((timeline, summary))
}

/// Runs the scenario's own policy.
pub fn run_scenario(scenario: &Scenario) -> Result<(MissionTimeline, MissionSummary), ScenarioError> {
    let prepared = scenario.prepare()?;
    run_prepared(scenario, &prepared, scenario.policy)
}

/// Worker pool honoring [`THREADS_ENV`] (unset or 0 means one per core).
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

/// Adaptive controller plus the three single-tier baselines over identical
/// inputs, in [`Policy::COMPARED`] order.
pub fn run_comparison(scenario: &Scenario) -> Result<Vec<(MissionTimeline, MissionSummary)>, ScenarioError> {
    let prepared = scenario.prepare()?;
    thread_pool().install(|| {
        Policy::COMPARED
            .par_iter()
            .map(|&p| run_prepared(scenario, &prepared, p))
            .collect::<Result<Vec<_>, _>>()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub bandwidth_mbps: f64,
    pub policy: Policy,
    pub avg_iou: Option<f64>,
    pub avg_pps: f64,
}

/// Bandwidth grid `from, from + step, ..., <= to`, each point rounded to 1e-9.
pub fn sweep_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, ScenarioError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(ScenarioError::Invalid(format!("sweep step must be positive, got {step}")));
    }
    if !(from > 0.0) || !(to >= from) || !to.is_finite() {
        return Err(ScenarioError::Invalid(format!("sweep range {from}..{to} must be positive and ordered")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((from + i as f64 * step) * 1e9).round() / 1e9).collect())
}

/// Every compared policy at every grid bandwidth, on flat traces built from `base`.
pub fn run_sweep(base: &Scenario, bandwidths: &[f64]) -> Result<Vec<FrontierPoint>, ScenarioError> {
    let lut = base.load_lut()?;
    let jobs: Vec<(f64, Policy)> =
        bandwidths.iter().flat_map(|&b| Policy::COMPARED.into_iter().map(move |p| (b, p))).collect();
    thread_pool().install(|| {
        jobs.par_iter()
            .map(|&(b, policy)| {
                let mut s = base.clone();
                s.trace = TraceConfig::segments(
                    vec![TraceSegmentSpec::constant(base.duration_s, b)],
                    Band { min: 0.0, max: b + 1.0 },
                    0,
                );
                let prepared = Prepared { lut: lut.clone(), trace: s.build_trace()? };
                let (_, summary) = run_prepared(&s, &prepared, policy)?;
                Ok(FrontierPoint { bandwidth_mbps: b, policy, avg_iou: summary.avg_iou_percent, avg_pps: summary.avg_pps })
            })
            .collect()
    })
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn io_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub const TIMELINE_HEADER: [&str; 10] =
    ["t_s", "event", "stream", "tier", "dataset", "packet_id", "size_mb", "bandwidth_mbps", "target_pps", "energy_j"];

pub fn write_timeline_csv<W: Write>(timeline: &MissionTimeline, out: W) -> std::io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(TIMELINE_HEADER).map_err(io_err)?;
    for r in &timeline.rows {
        w.write_record([
            fixed(r.t_s),
            r.event.as_str().to_string(),
            opt(r.stream, |s| s.as_str().into()),
            opt(r.tier, |t| t.as_str().into()),
            opt(r.dataset, |d| d.as_str().into()),
            opt(r.packet_id, |id| id.to_string()),
            opt(r.size_mb, fixed),
            opt(r.bandwidth_mbps, fixed),
            opt(r.target_pps, fixed),
            opt(r.energy_j, fixed),
        ])
        .map_err(io_err)?;
    }
    w.flush()
}

pub const SUMMARY_HEADER: [&str; 6] = ["policy", "goal", "avg_iou", "avg_pps", "total_energy_j", "switches"];

pub fn write_summary_csv<W: Write>(summaries: &[MissionSummary], out: W) -> std::io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(io_err)?;
    for s in summaries {
        w.write_record([
            s.policy.as_str().to_string(),
            s.goal.as_str().to_string(),
            opt(s.avg_iou_percent, fixed),
            fixed(s.avg_pps),
            fixed(s.total_energy_j),
            s.tier_switch_count.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush()
}

pub const FRONTIER_HEADER: [&str; 4] = ["bandwidth_mbps", "policy", "avg_iou", "avg_pps"];

pub fn write_frontier_csv<W: Write>(points: &[FrontierPoint], out: W) -> std::io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(FRONTIER_HEADER).map_err(io_err)?;
    for p in points {
        w.write_record([fixed(p.bandwidth_mbps), p.policy.as_str().to_string(), opt(p.avg_iou, fixed), fixed(p.avg_pps)])
            .map_err(io_err)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TierName;

    #[test]
    fn round_robin_parity() {
        assert_eq!(assign_dataset(0), Dataset::Original);
        assert_eq!(assign_dataset(1), Dataset::Finetuned);
        assert_eq!(assign_dataset(7), Dataset::Finetuned);
    }

    #[test]
    fn scoring_reads_the_lut_column() {
        let lut = SystemLut::table1();
        let p = Packet::insight(0, TierName::HighAccuracy, 2.92, Dataset::Original, 0.0);
        assert_eq!(score_packet(&p, &lut).unwrap().iou_percent, 84.42);
        let p = Packet::insight(1, TierName::Balanced, 1.35, Dataset::Finetuned, 0.0);
        assert_eq!(score_packet(&p, &lut).unwrap().iou_percent, 79.20);
        let c = Packet::context(2, 0.1, Dataset::Original, 0.0);
        assert!(matches!(score_packet(&c, &lut), Err(ScenarioError::ContextPacketNotScorable(2))));
    }

    #[test]
    fn frame_energy_examples() {
        let profile = StageProfile::default();
        let insight = Packet::insight(0, TierName::HighAccuracy, 2.92, Dataset::Original, 0.0);
        assert_eq!(frame_energy(&insight, &profile, Policy::Avery), 3.12);
        assert!((frame_energy(&insight, &profile, Policy::FullEdge) - 51.83).abs() < 0.005);
        let context = Packet::context(1, 0.1, Dataset::Original, 0.0);
        assert_eq!(frame_energy(&context, &profile, Policy::Avery), 0.4875);

        let with_tx = StageProfile { tx_energy_j_per_mb: 0.5, ..profile };
        assert!((frame_energy(&insight, &with_tx, Policy::StaticHighAccuracy) - (3.12 + 1.46)).abs() < 1e-12);
    }

    #[test]
    fn sweep_grid_points() {
        assert_eq!(sweep_grid(8.0, 20.0, 1.0).unwrap().len(), 13);
        assert_eq!(sweep_grid(11.68, 11.68, 1.0).unwrap(), vec![11.68]);
        let fine = sweep_grid(8.0, 20.0, 0.01).unwrap();
        assert_eq!(fine.len(), 1201);
        assert_eq!(fine[368], 11.68);
        assert!(sweep_grid(8.0, 20.0, 0.0).is_err());
        assert!(sweep_grid(20.0, 8.0, 1.0).is_err());
    }

    #[test]
    fn constant_high_accuracy_rate_and_accuracy() {
        let s = Scenario::constant(15.0, 1200.0, Policy::StaticHighAccuracy, MissionGoal::PrioritizeAccuracy);
        let (_, summary) = run_scenario(&s).unwrap();
        assert!((summary.avg_pps - 0.642).abs() <= 0.01, "pps {}", summary.avg_pps);
        assert!((summary.avg_iou_percent.unwrap() - 82.77).abs() < 0.01);
        assert_eq!(summary.tier_switch_count, 0);
    }

    #[test]
    fn jitter_is_seeded_and_off_by_default() {
        let mut s = Scenario::constant(15.0, 300.0, Policy::StaticHighAccuracy, MissionGoal::PrioritizeAccuracy);
        let (_, plain) = run_scenario(&s).unwrap();
        s.iou_jitter_stddev = 1.0;
        let (_, a) = run_scenario(&s).unwrap();
        let (_, b) = run_scenario(&s).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.avg_iou_percent, plain.avg_iou_percent);
        assert!((a.avg_iou_percent.unwrap() - plain.avg_iou_percent.unwrap()).abs() < 0.5);
    }

    #[test]
    fn scenario_requires_one_trace_source() {
        let mut s = Scenario::constant(15.0, 60.0, Policy::Avery, MissionGoal::PrioritizeAccuracy);
        s.trace.file = Some("x.csv".into());
        assert!(matches!(s.prepare(), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn scenario_json_round_trips() {
        let s = Scenario::constant(12.0, 60.0, Policy::StaticBalanced, MissionGoal::PrioritizeThroughput);
        let back: Scenario = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }
}
