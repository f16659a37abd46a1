//! Domain types shared by the controller, the link model and the mission
//! harness: operational tiers and the lookup table the controller reasons
//! over, stream and dataset tags, packets, and on-board stage profiles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{megabits, Scalar};

/// Values measured on the reference hardware, used to calibrate the energy
/// and latency model. Constants marked "modeling default" are not measured.
pub mod calibration {
    /// On-board energy per Insight frame with the split after the first ViT block, joules.
    pub const SPLIT1_INSIGHT_ENERGY_J: f64 = 3.12;
    /// On-board energy per frame with the split after the tenth ViT block, joules.
    pub const SPLIT10_INSIGHT_ENERGY_J: f64 = 13.81;
    /// Fractional energy saving of split@1 versus running the backbone fully on-board.
    pub const FULL_EDGE_ENERGY_REDUCTION: f64 = 0.9398;
    /// Fractional accuracy drop going from split@1 to split@10.
    pub const SPLIT10_ACCURACY_DROP: f64 = 0.165;
    /// Context-stream on-board processing speedup relative to the Insight stream.
    pub const CONTEXT_SPEEDUP: f64 = 6.4;
    /// Uncompressed SAM activation at the split point, megabytes.
    pub const SAM_ACTIVATION_MB: f64 = 10.49;
    /// Minimum Insight update rate the bandwidth threshold is derived from.
    pub const MIN_INSIGHT_PPS: f64 = 0.5;

    /// Modeling default: on-board Insight compute time per frame, seconds.
    pub const DEFAULT_INSIGHT_LATENCY_S: f64 = 0.5;
    /// Modeling default: Context payload, megabytes.
    pub const DEFAULT_CONTEXT_SIZE_MB: f64 = 0.10;

    /// Full on-board backbone energy per frame.
    ///
    /// If split@1 costs `E_split` and saves a fraction `r` relative to full
    /// edge execution, then `E_split = (1 - r) * E_full`, so
    /// `E_full = 3.12 / (1 - 0.9398) = 3.12 / 0.0602 ≈ 51.827 J`.
    pub fn full_edge_energy_j() -> f64 {
        SPLIT1_INSIGHT_ENERGY_J / (1.0 - FULL_EDGE_ENERGY_REDUCTION)
    }

    /// Modeling default: full-edge latency assuming the same average power
    /// draw as the split pipeline, `0.5 s * 51.827 / 3.12 ≈ 8.306 s`.
    pub fn full_edge_latency_s() -> f64 {
        DEFAULT_INSIGHT_LATENCY_S * full_edge_energy_j() / SPLIT1_INSIGHT_ENERGY_J
    }

    /// `1 - part / whole`.
    pub fn energy_reduction(split_j: f64, full_j: f64) -> f64 {
        1.0 - split_j / full_j
    }

    /// `to / from - 1`.
    pub fn relative_increase(from: f64, to: f64) -> f64 {
        to / from - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TierName {
    HighAccuracy,
    Balanced,
    HighThroughput,
}

impl TierName {
    /// Tiers in table order, most accurate first.
    pub const ALL: [TierName; 3] = [TierName::HighAccuracy, TierName::Balanced, TierName::HighThroughput];

    pub fn as_str(self) -> &'static str {
        match self {
            TierName::HighAccuracy => "HighAccuracy",
            TierName::Balanced => "Balanced",
            TierName::HighThroughput => "HighThroughput",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TierName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TierName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TierName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tier '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MissionGoal {
    PrioritizeAccuracy,
    PrioritizeThroughput,
}

impl MissionGoal {
    pub fn as_str(self) -> &'static str {
        match self {
            MissionGoal::PrioritizeAccuracy => "PrioritizeAccuracy",
            MissionGoal::PrioritizeThroughput => "PrioritizeThroughput",
        }
    }
}

impl fmt::Display for MissionGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MissionGoal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PrioritizeAccuracy" | "accuracy" | "Accuracy" => Ok(MissionGoal::PrioritizeAccuracy),
            "PrioritizeThroughput" | "throughput" | "Throughput" => Ok(MissionGoal::PrioritizeThroughput),
            other => Err(format!("unknown mission goal '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamKind {
    Context,
    Insight,
}

impl StreamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StreamKind::Context => "Context",
            StreamKind::Insight => "Insight",
        }
    }
}

/// Which model/dataset column a frame is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dataset {
    Original,
    Finetuned,
}

impl Dataset {
    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Original => "Original",
            Dataset::Finetuned => "Finetuned",
        }
    }
}

/// One operational tier: a pre-trained bottleneck and its profiled cost/quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TierSpec<S> {
    pub name: TierName,
    /// Descriptive only; `data_size_mb` is what the controller uses.
    pub compression_ratio: S,
    pub accuracy_original: S,
    pub accuracy_finetuned: S,
    pub data_size_mb: S,
}

impl<S: Scalar> TierSpec<S> {
    pub fn accuracy(&self, dataset: Dataset) -> S {
        match dataset {
            Dataset::Original => self.accuracy_original,
            Dataset::Finetuned => self.accuracy_finetuned,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LutError {
    #[error("malformed LUT document: {0}")]
    Parse(String),
    #[error("tier {0} missing from LUT")]
    MissingTier(TierName),
    #[error("tier {0} listed more than once")]
    DuplicateTier(TierName),
    #[error("{field} must strictly decrease from {upper} to {lower}")]
    MonotonicityViolation {
        field: &'static str,
        upper: TierName,
        lower: TierName,
    },
    #[error("{field} must be positive{}", tier.map(|t| format!(" (tier {t})")).unwrap_or_default())]
    NonPositiveField {
        tier: Option<TierName>,
        field: &'static str,
    },
    #[error("{field} of tier {tier} outside {range}")]
    OutOfRange {
        tier: TierName,
        field: &'static str,
        range: &'static str,
    },
    #[error("bandwidth_threshold_mbps {stored} disagrees with derived value {derived}")]
    ThresholdMismatch { stored: f64, derived: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{0} must be positive")]
pub struct NonPositiveInput(pub &'static str);

/// Bandwidth (Mbps) needed to ship a payload of `size_mb` megabytes at `pps` packets per second.
pub fn derive_threshold<S: Scalar>(size_mb: S, pps: S) -> Result<S, NonPositiveInput> {
    if !(size_mb > S::zero()) {
        return Err(NonPositiveInput("size_mb"));
    }
    if !(pps > S::zero()) {
        return Err(NonPositiveInput("pps"));
    }
    Ok(megabits(size_mb) * pps)
}

/// The controller's self-model: three tiers plus the viability threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemLut<S> {
    tiers: [TierSpec<S>; 3],
    bandwidth_threshold_mbps: S,
    min_insight_pps: Option<S>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar", deny_unknown_fields)]
struct LutDocument<S> {
    tiers: Vec<TierSpec<S>>,
    bandwidth_threshold_mbps: S,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_insight_pps: Option<S>,
}

const TABLE1_JSON: &str = include_str!("../data/table1.lut.json");

/// A named per-tier column, for the monotonicity checks.
type Column<S> = (&'static str, fn(&TierSpec<S>) -> S);

impl<S: Scalar> SystemLut<S> {
    /// Validates and assembles a LUT. When `min_insight_pps` is given the
    /// stored threshold must match the one derived from the High-Accuracy
    /// payload within 1e-6.
    pub fn new(
        tiers: Vec<TierSpec<S>>,
        bandwidth_threshold_mbps: S,
        min_insight_pps: Option<S>,
    ) -> Result<Self, LutError> {
        let mut slots: [Option<TierSpec<S>>; 3] = [None, None, None];
        for tier in tiers {
            let slot = &mut slots[tier.name.index()];
            if slot.is_some() {
                return Err(LutError::DuplicateTier(tier.name));
            }
            *slot = Some(tier);
        }
        let mut ordered = Vec::with_capacity(3);
        for (name, slot) in TierName::ALL.into_iter().zip(slots) {
            ordered.push(slot.ok_or(LutError::MissingTier(name))?);
        }
        let tiers: [TierSpec<S>; 3] = [ordered[0], ordered[1], ordered[2]];

        let hundred = S::lit(100.0);
        for t in &tiers {
            let positive = [
                ("compression_ratio", t.compression_ratio),
                ("data_size_mb", t.data_size_mb),
            ];
            for (field, v) in positive {
                if !(v > S::zero()) {
                    return Err(LutError::NonPositiveField { tier: Some(t.name), field });
                }
            }
            if t.compression_ratio > S::one() {
                return Err(LutError::OutOfRange {
                    tier: t.name,
                    field: "compression_ratio",
                    range: "(0, 1]",
                });
            }
            for (field, v) in [("accuracy_original", t.accuracy_original), ("accuracy_finetuned", t.accuracy_finetuned)] {
                if !(v >= S::zero() && v <= hundred) {
                    return Err(LutError::OutOfRange { tier: t.name, field, range: "[0, 100]" });
                }
            }
        }
        if !(bandwidth_threshold_mbps > S::zero()) {
            return Err(LutError::NonPositiveField { tier: None, field: "bandwidth_threshold_mbps" });
        }

        for pair in tiers.windows(2) {
            let (upper, lower) = (&pair[0], &pair[1]);
            let checks: [Column<S>; 4] = [
                ("data_size_mb", |t| t.data_size_mb),
                ("accuracy_original", |t| t.accuracy_original),
                ("accuracy_finetuned", |t| t.accuracy_finetuned),
                ("compression_ratio", |t| t.compression_ratio),
            ];
            for (field, get) in checks {
                if !(get(lower) < get(upper)) {
                    return Err(LutError::MonotonicityViolation { field, upper: upper.name, lower: lower.name });
                }
            }
        }

        if let Some(pps) = min_insight_pps {
            let derived = derive_threshold(tiers[0].data_size_mb, pps)
                .map_err(|_| LutError::NonPositiveField { tier: None, field: "min_insight_pps" })?;
            if (derived - bandwidth_threshold_mbps).abs() > S::lit(1e-6) {
                return Err(LutError::ThresholdMismatch {
                    stored: bandwidth_threshold_mbps.as_f64(),
                    derived: derived.as_f64(),
                });
            }
        }

        Ok(SystemLut { tiers, bandwidth_threshold_mbps, min_insight_pps })
    }

    /// The bundled table of profiled tiers (`data/table1.lut.json`).
    pub fn table1() -> Self {
        load_lut(TABLE1_JSON).expect("bundled LUT is valid")
    }

    pub fn tier(&self, name: TierName) -> &TierSpec<S> {
        &self.tiers[name.index()]
    }

    pub fn tiers(&self) -> &[TierSpec<S>; 3] {
        &self.tiers
    }

    pub fn bandwidth_threshold_mbps(&self) -> S {
        self.bandwidth_threshold_mbps
    }

    pub fn min_insight_pps(&self) -> Option<S> {
        self.min_insight_pps
    }

    /// True when the threshold was checked against `min_insight_pps` on load.
    pub fn is_derived(&self) -> bool {
        self.min_insight_pps.is_some()
    }

    pub fn accuracy_bounds(&self) -> (S, S) {
        let values = self.tiers.iter().flat_map(|t| [t.accuracy_original, t.accuracy_finetuned]);
        values.fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn to_json(&self) -> String {
        let doc = LutDocument {
            tiers: self.tiers.to_vec(),
            bandwidth_threshold_mbps: self.bandwidth_threshold_mbps,
            min_insight_pps: self.min_insight_pps,
        };
        serde_json::to_string_pretty(&doc).expect("LUT serializes")
    }
}

/// Parses and validates a JSON LUT document.
pub fn load_lut<S: Scalar>(document: &str) -> Result<SystemLut<S>, LutError> {
    let doc: LutDocument<S> = serde_json::from_str(document).map_err(|e| LutError::Parse(e.to_string()))?;
    SystemLut::new(doc.tiers, doc.bandwidth_threshold_mbps, doc.min_insight_pps)
}

/// One Context or Insight transmission unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet<S> {
    id: u64,
    stream: StreamKind,
    tier: Option<TierName>,
    size_mb: S,
    dataset: Dataset,
    t_capture_s: S,
    t_compute_done_s: Option<S>,
    t_tx_start_s: Option<S>,
    t_tx_done_s: Option<S>,
}

impl<S: Scalar> Packet<S> {
    pub fn insight(id: u64, tier: TierName, size_mb: S, dataset: Dataset, t_capture_s: S) -> Self {
        Self::new(id, StreamKind::Insight, Some(tier), size_mb, dataset, t_capture_s)
    }

    pub fn context(id: u64, size_mb: S, dataset: Dataset, t_capture_s: S) -> Self {
        Self::new(id, StreamKind::Context, None, size_mb, dataset, t_capture_s)
    }

    fn new(id: u64, stream: StreamKind, tier: Option<TierName>, size_mb: S, dataset: Dataset, t_capture_s: S) -> Self {
        assert!(size_mb > S::zero(), "packet size must be positive");
        Packet {
            id,
            stream,
            tier,
            size_mb,
            dataset,
            t_capture_s,
            t_compute_done_s: None,
            t_tx_start_s: None,
            t_tx_done_s: None,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }
    pub fn stream(&self) -> StreamKind {
        self.stream
    }
    pub fn tier(&self) -> Option<TierName> {
        self.tier
    }
    pub fn size_mb(&self) -> S {
        self.size_mb
    }
    pub fn size_megabits(&self) -> S {
        megabits(self.size_mb)
    }
    pub fn dataset(&self) -> Dataset {
        self.dataset
    }
    pub fn t_capture_s(&self) -> S {
        self.t_capture_s
    }
    pub fn t_compute_done_s(&self) -> Option<S> {
        self.t_compute_done_s
    }
    pub fn t_tx_start_s(&self) -> Option<S> {
        self.t_tx_start_s
    }
    pub fn t_tx_done_s(&self) -> Option<S> {
        self.t_tx_done_s
    }

    pub(crate) fn mark_compute_done(&mut self, t: S) {
        assert!(t >= self.t_capture_s, "compute finished before capture");
        self.t_compute_done_s = Some(t);
    }

    pub(crate) fn mark_tx_start(&mut self, t: S) {
        assert!(t >= self.t_compute_done_s.unwrap_or(self.t_capture_s), "tx started before compute finished");
        self.t_tx_start_s = Some(t);
    }

    pub(crate) fn mark_tx_done(&mut self, t: S) {
        let start = self.t_tx_start_s.expect("tx done without start");
        assert!(t >= start, "tx finished before it started");
        self.t_tx_done_s = Some(t);
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("stage profile: {0}")]
pub struct ProfileError(pub String);

/// Per-frame on-board latency and energy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", default, deny_unknown_fields)]
pub struct StageProfile<S> {
    pub insight_compute_latency_s: S,
    pub context_compute_latency_s: S,
    pub context_speedup: S,
    pub insight_energy_j: S,
    pub context_energy_j: S,
    pub full_edge_energy_j: S,
    /// Compute time per frame for the full on-board baseline.
    pub full_edge_latency_s: S,
    pub context_size_mb: S,
    pub tx_energy_j_per_mb: S,
}

impl<S: Scalar> Default for StageProfile<S> {
    fn default() -> Self {
        use calibration::*;
        StageProfile {
            insight_compute_latency_s: S::lit(DEFAULT_INSIGHT_LATENCY_S),
            context_compute_latency_s: S::lit(DEFAULT_INSIGHT_LATENCY_S) / S::lit(CONTEXT_SPEEDUP),
            context_speedup: S::lit(CONTEXT_SPEEDUP),
            insight_energy_j: S::lit(SPLIT1_INSIGHT_ENERGY_J),
            // the speedup doubles as the Context energy ratio (modeling default)
            context_energy_j: S::lit(SPLIT1_INSIGHT_ENERGY_J) / S::lit(CONTEXT_SPEEDUP),
            full_edge_energy_j: S::lit(full_edge_energy_j()),
            full_edge_latency_s: S::lit(full_edge_latency_s()),
            context_size_mb: S::lit(DEFAULT_CONTEXT_SIZE_MB),
            tx_energy_j_per_mb: S::zero(),
        }
    }
}

impl<S: Scalar> StageProfile<S> {
    /// Profile with the given Insight latency; the Context latency follows from the speedup.
    pub fn with_insight_latency(mut self, latency_s: S) -> Self {
        self.insight_compute_latency_s = latency_s;
        self.context_compute_latency_s = latency_s / self.context_speedup;
        self
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let positive = [
            ("insight_compute_latency_s", self.insight_compute_latency_s),
            ("context_compute_latency_s", self.context_compute_latency_s),
            ("context_speedup", self.context_speedup),
            ("insight_energy_j", self.insight_energy_j),
            ("context_energy_j", self.context_energy_j),
            ("full_edge_energy_j", self.full_edge_energy_j),
            ("full_edge_latency_s", self.full_edge_latency_s),
            ("context_size_mb", self.context_size_mb),
        ];
        for (field, v) in positive {
            if !(v > S::zero()) {
                return Err(ProfileError(format!("{field} must be positive")));
            }
        }
        if !(self.tx_energy_j_per_mb >= S::zero()) {
            return Err(ProfileError("tx_energy_j_per_mb must be non-negative".into()));
        }
        let expected = self.insight_compute_latency_s / self.context_speedup;
        if (expected - self.context_compute_latency_s).abs() > S::lit(1e-6) * expected.max(S::one()) {
            return Err(ProfileError(format!(
                "context_compute_latency_s {} != insight latency / speedup {}",
                self.context_compute_latency_s, expected
            )));
        }
        if !(self.insight_energy_j < self.full_edge_energy_j) {
            return Err(ProfileError("insight_energy_j must be below full_edge_energy_j".into()));
        }
        Ok(())
    }
}

/// Score of one delivered Insight packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracySample<S> {
    pub packet_id: u64,
    pub iou_percent: S,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_doc() -> serde_json::Value {
        serde_json::from_str(TABLE1_JSON).unwrap()
    }

    #[test]
    fn bundled_table_has_published_values() {
        let lut = SystemLut::<f64>::table1();
        let ha = lut.tier(TierName::HighAccuracy);
        let bal = lut.tier(TierName::Balanced);
        let ht = lut.tier(TierName::HighThroughput);
        assert_eq!((ha.compression_ratio, bal.compression_ratio, ht.compression_ratio), (0.25, 0.10, 0.05));
        assert_eq!((ha.accuracy_original, bal.accuracy_original, ht.accuracy_original), (84.42, 82.89, 80.67));
        assert_eq!((ha.accuracy_finetuned, bal.accuracy_finetuned, ht.accuracy_finetuned), (81.12, 79.20, 78.48));
        assert_eq!((ha.data_size_mb, bal.data_size_mb, ht.data_size_mb), (2.92, 1.35, 0.83));
        assert_eq!(lut.bandwidth_threshold_mbps(), 11.68);
        assert!(lut.is_derived());
        assert_eq!(derive_threshold(2.92, 0.5).unwrap(), lut.bandwidth_threshold_mbps());
    }

    #[test]
    fn bundled_table_loads_as_f32() {
        let lut = SystemLut::<f32>::table1();
        assert_eq!(lut.tier(TierName::Balanced).data_size_mb, 1.35f32);
        assert_eq!(derive_threshold(2.92f32, 0.5).unwrap(), lut.bandwidth_threshold_mbps());
    }

    #[test]
    fn balanced_larger_than_high_accuracy_is_rejected() {
        let mut doc = table1_doc();
        doc["tiers"][1]["data_size_mb"] = 3.0.into();
        let err = load_lut::<f64>(&doc.to_string()).unwrap_err();
        assert_eq!(
            err,
            LutError::MonotonicityViolation {
                field: "data_size_mb",
                upper: TierName::HighAccuracy,
                lower: TierName::Balanced
            }
        );
    }

    #[test]
    fn missing_tier_is_named() {
        let mut doc = table1_doc();
        doc["tiers"].as_array_mut().unwrap().pop();
        let err = load_lut::<f64>(&doc.to_string()).unwrap_err();
        assert_eq!(err, LutError::MissingTier(TierName::HighThroughput));
    }

    #[test]
    fn duplicate_tier_is_named() {
        let mut doc = table1_doc();
        let first = doc["tiers"][0].clone();
        doc["tiers"].as_array_mut().unwrap().push(first);
        let err = load_lut::<f64>(&doc.to_string()).unwrap_err();
        assert_eq!(err, LutError::DuplicateTier(TierName::HighAccuracy));
    }

    #[test]
    fn non_positive_fields_are_named() {
        let mut doc = table1_doc();
        doc["tiers"][2]["data_size_mb"] = 0.0.into();
        let err = load_lut::<f64>(&doc.to_string()).unwrap_err();
        assert_eq!(err, LutError::NonPositiveField { tier: Some(TierName::HighThroughput), field: "data_size_mb" });

        let mut doc = table1_doc();
        doc["bandwidth_threshold_mbps"] = (-1.0).into();
        doc.as_object_mut().unwrap().remove("min_insight_pps");
        let err = load_lut::<f64>(&doc.to_string()).unwrap_err();
        assert_eq!(err, LutError::NonPositiveField { tier: None, field: "bandwidth_threshold_mbps" });
    }

    #[test]
    fn accuracy_order_and_range_checked() {
        let mut doc = table1_doc();
        doc["tiers"][2]["accuracy_finetuned"] = 79.5.into();
        let err = load_lut::<f64>(&doc.to_string()).unwrap_err();
        assert!(matches!(err, LutError::MonotonicityViolation { field: "accuracy_finetuned", .. }));

        let mut doc = table1_doc();
        doc["tiers"][0]["accuracy_original"] = 101.0.into();
        assert!(matches!(load_lut::<f64>(&doc.to_string()), Err(LutError::OutOfRange { .. })));
    }

    #[test]
    fn stored_threshold_must_match_derived() {
        let mut doc = table1_doc();
        doc["bandwidth_threshold_mbps"] = 12.0.into();
        assert!(matches!(load_lut::<f64>(&doc.to_string()), Err(LutError::ThresholdMismatch { .. })));

        // without min_insight_pps the threshold is taken as given
        doc.as_object_mut().unwrap().remove("min_insight_pps");
        let lut = load_lut::<f64>(&doc.to_string()).unwrap();
        assert_eq!(lut.bandwidth_threshold_mbps(), 12.0);
        assert!(!lut.is_derived());
    }

    #[test]
    fn unknown_tier_name_is_a_parse_error() {
        let mut doc = table1_doc();
        doc["tiers"][0]["name"] = "Ultra".into();
        assert!(matches!(load_lut::<f64>(&doc.to_string()), Err(LutError::Parse(_))));
    }

    #[test]
    fn derive_threshold_examples() {
        assert_eq!(derive_threshold(2.92, 0.5).unwrap(), 11.68);
        assert_eq!(derive_threshold(1.0, 1.0).unwrap(), 8.0);
        assert!((derive_threshold(0.83f64, 0.5).unwrap() - 3.32).abs() < 1e-12);
        assert_eq!(derive_threshold(0.0, 0.5), Err(NonPositiveInput("size_mb")));
        assert_eq!(derive_threshold(1.0, -0.5), Err(NonPositiveInput("pps")));
    }

    #[test]
    fn default_profile_matches_calibration() {
        let p = StageProfile::<f64>::default();
        p.validate().unwrap();
        assert!((p.full_edge_energy_j - 51.83).abs() < 0.005);
        assert_eq!(p.context_energy_j, 0.4875);
        assert_eq!(p.context_compute_latency_s, 0.078125);
        assert!((calibration::energy_reduction(p.insight_energy_j, p.full_edge_energy_j) - 0.9398).abs() < 1e-12);
    }

    #[test]
    fn profile_rejects_inconsistent_context_latency() {
        let p = StageProfile::<f64> { context_compute_latency_s: 0.2, ..Default::default() };
        assert!(p.validate().is_err());
        let p = StageProfile::<f64>::default().with_insight_latency(1.28);
        assert!((p.context_compute_latency_s - 0.2).abs() < 1e-12);
        p.validate().unwrap();
        let p = StageProfile::<f64> { insight_energy_j: 60.0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn packet_stream_and_tier_agree() {
        let p = Packet::insight(3, TierName::Balanced, 1.35, Dataset::Finetuned, 0.0);
        assert_eq!(p.stream(), StreamKind::Insight);
        assert_eq!(p.tier(), Some(TierName::Balanced));
        let c = Packet::context(4, 0.1, Dataset::Original, 0.0);
        assert_eq!(c.tier(), None);
    }

    #[test]
    #[should_panic]
    fn packet_timestamps_must_be_ordered() {
        let mut p = Packet::context(0, 0.1, Dataset::Original, 5.0);
        p.mark_compute_done(4.0);
    }
}
