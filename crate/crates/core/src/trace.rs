//! Piecewise-constant bandwidth traces: scripted generation, CSV I/O,
//! point lookup and exact integration.
//!
//! Random segments draw from xoshiro256** seeded through SplitMix64
//! (`rand_xoshiro::Xoshiro256StarStar::seed_from_u64`). Segment `i` uses the
//! base stream advanced by `i` jumps of 2^128 steps, so editing one segment
//! never shifts the random numbers of another. Gaussian steps come from the
//! cosine branch of Box–Muller:
//!
//! ```text
//! u1 = ((x1 >> 11) + 1) * 2^-53      in (0, 1]
//! u2 = (x2 >> 11) * 2^-53            in [0, 1)
//! z  = sqrt(-2 ln u1) * cos(2 pi u2)
//! ```

use std::io::{Read, Write};

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("trace needs at least one segment")]
    EmptySegments,
    #[error("invalid band [{min}, {max}]: min must be below max")]
    InvalidBand { min: f64, max: f64 },
    #[error("segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("resolution must be positive")]
    InvalidResolution,
    #[error("sample {index} is not a finite non-negative bandwidth")]
    InvalidSample { index: usize },
    #[error("t={t} outside trace [0, {duration})")]
    OutOfTraceRange { t: f64, duration: f64 },
    #[error("interval [{t0}, {t1}] is reversed")]
    ReversedInterval { t0: f64, t1: f64 },
    #[error("trace csv: {0}")]
    Csv(String),
    #[error("trace csv row {row}: time steps must be uniform and start at 0")]
    NonUniformTime { row: usize },
}

/// Inclusive bandwidth band, Mbps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Band<S> {
    pub min: S,
    pub max: S,
}

impl<S: Scalar> Band<S> {
    pub fn new(min: S, max: S) -> Result<Self, TraceError> {
        if !(min < max) || min < S::zero() {
            return Err(TraceError::InvalidBand { min: min.as_f64(), max: max.as_f64() });
        }
        Ok(Band { min, max })
    }

    pub fn clamp(&self, v: S) -> S {
        v.max(self.min).min(self.max)
    }

    pub fn contains(&self, v: S) -> bool {
        v >= self.min && v <= self.max
    }
}

impl<S: Scalar> Default for Band<S> {
    fn default() -> Self {
        Band { min: S::lit(8.0), max: S::lit(20.0) }
    }
}

/// Shape of one scripted stretch of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", bound = "S: Scalar")]
pub enum SegmentKind<S> {
    /// Stable period.
    Constant { level: S },
    LinearRamp { start: S, end: S },
    /// Volatile period: Gaussian steps, clamped into the band after every step.
    RandomWalk { start: S, step_stddev: S },
    /// Sustained drop: `high` until `drop_after_s` (default: half the segment), then `low`.
    StepDrop {
        high: S,
        low: S,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drop_after_s: Option<S>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TraceSegmentSpec<S> {
    pub duration_s: S,
    #[serde(flatten)]
    pub kind: SegmentKind<S>,
}

impl<S: Scalar> TraceSegmentSpec<S> {
    pub fn constant(duration_s: S, level: S) -> Self {
        TraceSegmentSpec { duration_s, kind: SegmentKind::Constant { level } }
    }
    pub fn ramp(duration_s: S, start: S, end: S) -> Self {
        TraceSegmentSpec { duration_s, kind: SegmentKind::LinearRamp { start, end } }
    }
    pub fn random_walk(duration_s: S, start: S, step_stddev: S) -> Self {
        TraceSegmentSpec { duration_s, kind: SegmentKind::RandomWalk { start, step_stddev } }
    }
    pub fn step_drop(duration_s: S, high: S, low: S) -> Self {
        TraceSegmentSpec { duration_s, kind: SegmentKind::StepDrop { high, low, drop_after_s: None } }
    }
}

/// Bandwidth (Mbps) held constant over each `resolution_s`-long sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthTrace<S> {
    resolution_s: S,
    samples: Vec<S>,
    seed: u64,
    /// prefix[k] = samples[0] + ... + samples[k-1]
    prefix: Vec<S>,
}

impl<S: Scalar> BandwidthTrace<S> {
    pub fn from_samples(samples: Vec<S>, resolution_s: S, seed: u64) -> Result<Self, TraceError> {
        if !(resolution_s > S::zero()) || !resolution_s.is_finite() {
            return Err(TraceError::InvalidResolution);
        }
        if samples.is_empty() {
            return Err(TraceError::Csv("trace has no samples".into()));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite() || *v < S::zero()) {
            return Err(TraceError::InvalidSample { index });
        }
        let mut prefix = Vec::with_capacity(samples.len() + 1);
        let mut acc = S::zero();
        prefix.push(acc);
        for &v in &samples {
            acc = acc + v;
            prefix.push(acc);
        }
        Ok(BandwidthTrace { resolution_s, samples, seed, prefix })
    }

    pub fn constant(level: S, duration_s: S, resolution_s: S) -> Result<Self, TraceError> {
        let n = sample_count(duration_s, resolution_s).map_err(|reason| TraceError::InvalidSegment { index: 0, reason })?;
        Self::from_samples(vec![level; n], resolution_s, 0)
    }

    pub fn resolution_s(&self) -> S {
        self.resolution_s
    }
    pub fn samples(&self) -> &[S] {
        &self.samples
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn duration_s(&self) -> S {
        self.resolution_s * S::from_usize(self.samples.len()).unwrap()
    }

    fn index_of(&self, t: S) -> usize {
        let k = (t / self.resolution_s).floor().to_usize().unwrap_or(0);
        k.min(self.samples.len() - 1)
    }

    /// Sample-and-hold lookup; a sample boundary belongs to the later sample.
    pub fn bandwidth_at(&self, t_s: S) -> Result<S, TraceError> {
        if !(t_s >= S::zero() && t_s < self.duration_s()) {
            return Err(self.out_of_range(t_s));
        }
        Ok(self.samples[self.index_of(t_s)])
    }

    /// Megabits deliverable over `[0, t]`; `t` must lie in `[0, duration]`.
    fn cumulative(&self, t: S) -> S {
        let k = self.index_of(t);
        let k_s = S::from_usize(k).unwrap();
        self.resolution_s * self.prefix[k] + self.samples[k] * (t - k_s * self.resolution_s)
    }

    fn aligned_index(&self, t_s: S) -> Option<usize> {
        let k = (t_s / self.resolution_s).round().to_usize()?;
        (S::from_usize(k)? * self.resolution_s == t_s).then_some(k)
    }

    /// Megabits deliverable over `[t0, t1]`.
    pub fn integrate_megabits(&self, t0_s: S, t1_s: S) -> Result<S, TraceError> {
        let end = self.duration_s();
        for t in [t0_s, t1_s] {
            if !(t >= S::zero() && t <= end) {
                return Err(self.out_of_range(t));
            }
        }
        if t1_s < t0_s {
            return Err(TraceError::ReversedInterval { t0: t0_s.as_f64(), t1: t1_s.as_f64() });
        }
        if t0_s == t1_s {
            return Ok(S::zero());
        }
        // Sample-aligned intervals are summed directly so they match a plain sum bit for bit.
        if let (Some(i), Some(j)) = (self.aligned_index(t0_s), self.aligned_index(t1_s)) {
            let sum = self.samples[i..j].iter().fold(S::zero(), |acc, &v| acc + v);
            return Ok(self.resolution_s * sum);
        }
        Ok(self.cumulative(t1_s) - self.cumulative(t0_s))
    }

    /// Earliest `t >= t0` with `integrate_megabits(t0, t) == megabits`, or
    /// `None` if the trace ends first. Solved in closed form inside the
    /// sample where the cumulative volume crosses the target.
    pub fn time_to_deliver(&self, t0_s: S, megabits: S) -> Result<Option<S>, TraceError> {
        let end = self.duration_s();
        if !(t0_s >= S::zero() && t0_s <= end) {
            return Err(self.out_of_range(t0_s));
        }
        if megabits <= S::zero() {
            return Ok(Some(t0_s));
        }
        let target = self.cumulative(t0_s) + megabits;
        let res = self.resolution_s;
        let total = res * self.prefix[self.samples.len()];
        if target > total {
            return Ok(None);
        }
        // first sample whose end-of-sample volume reaches the target
        let k = self.prefix[1..].partition_point(|&p| res * p < target).min(self.samples.len() - 1);
        let rate = self.samples[k];
        let k_s = S::from_usize(k).unwrap();
        let t = if rate > S::zero() {
            k_s * res + (target - res * self.prefix[k]) / rate
        } else {
            k_s * res
        };
        Ok(Some(t.max(t0_s).min(end)))
    }

    pub fn mean_mbps(&self) -> S {
        self.prefix[self.samples.len()] / S::from_usize(self.samples.len()).unwrap()
    }

    /// Fraction of samples strictly below `level`.
    pub fn fraction_below(&self, level: S) -> f64 {
        let below = self.samples.iter().filter(|&&v| v < level).count();
        below as f64 / self.samples.len() as f64
    }

    pub fn within(&self, band: &Band<S>) -> bool {
        self.samples.iter().all(|&v| band.contains(v))
    }

    /// Trace CSV: `time_s,bandwidth_mbps` header then one row per sample.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TraceError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let csv_err = |e: csv::Error| TraceError::Csv(e.to_string());
        w.write_record(["time_s", "bandwidth_mbps"]).map_err(csv_err)?;
        for (i, v) in self.samples.iter().enumerate() {
            let t = self.resolution_s.as_f64() * i as f64;
            w.write_record([format!("{t:.6}"), format!("{:.6}", v.as_f64())]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| TraceError::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, TraceError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = r.headers().map_err(|e| TraceError::Csv(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["time_s", "bandwidth_mbps"] {
            return Err(TraceError::Csv("header must be time_s,bandwidth_mbps".into()));
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| TraceError::Csv(e.to_string()))?;
            let parse = |i: usize| -> Result<f64, TraceError> {
                rec.get(i)
                    .ok_or_else(|| TraceError::Csv(format!("row {}: missing column", row + 1)))?
                    .parse::<f64>()
                    .map_err(|e| TraceError::Csv(format!("row {}: {e}", row + 1)))
            };
            times.push(parse(0)?);
            samples.push(S::lit(parse(1)?));
        }
        if times.len() < 2 {
            return Err(TraceError::Csv("need at least two rows to infer the resolution".into()));
        }
        let resolution = times[1] - times[0];
        if !(resolution > 0.0) {
            return Err(TraceError::NonUniformTime { row: 2 });
        }
        for (i, &t) in times.iter().enumerate() {
            if (t - resolution * i as f64).abs() > 1e-6 {
                return Err(TraceError::NonUniformTime { row: i + 1 });
            }
        }
        Self::from_samples(samples, S::lit(resolution), 0)
    }

    fn out_of_range(&self, t: S) -> TraceError {
        TraceError::OutOfTraceRange { t: t.as_f64(), duration: self.duration_s().as_f64() }
    }
}

fn sample_count<S: Scalar>(duration_s: S, resolution_s: S) -> Result<usize, String> {
    if !(duration_s > S::zero()) {
        return Err("duration_s must be positive".into());
    }
    let ratio = (duration_s / resolution_s).as_f64();
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(format!("duration_s {duration_s} is not a whole number of {resolution_s} s samples"));
    }
    Ok(n as usize)
}

/// Standard normal deviates from a fixed xoshiro256** stream (Box–Muller, cosine branch).
pub struct GaussianSource {
    rng: Xoshiro256StarStar,
}

impl GaussianSource {
    /// Stream `index` of the generator seeded with `seed`.
    pub fn new(seed: u64, index: usize) -> Self {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        for _ in 0..index {
            rng.jump();
        }
        GaussianSource { rng }
    }

    pub fn next_standard(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Builds a trace from scripted segments. Pure in all arguments.
pub fn generate_trace<S: Scalar>(
    segments: &[TraceSegmentSpec<S>],
    band: Band<S>,
    seed: u64,
    resolution_s: S,
) -> Result<BandwidthTrace<S>, TraceError> {
    if segments.is_empty() {
        return Err(TraceError::EmptySegments);
    }
    let band = Band::new(band.min, band.max)?;
    if !(resolution_s > S::zero()) {
        return Err(TraceError::InvalidResolution);
    }
    let mut samples = Vec::new();
    for (index, seg) in segments.iter().enumerate() {
        let bad = |reason: String| TraceError::InvalidSegment { index, reason };
        let n = sample_count(seg.duration_s, resolution_s).map_err(bad)?;
        match seg.kind {
            SegmentKind::Constant { level } => {
                samples.extend(std::iter::repeat_n(band.clamp(level), n));
            }
            SegmentKind::LinearRamp { start, end } => {
                let span = S::from_usize(n.saturating_sub(1).max(1)).unwrap();
                for i in 0..n {
                    let frac = S::from_usize(i).unwrap() / span;
                    samples.push(band.clamp(start + (end - start) * frac));
                }
            }
            SegmentKind::RandomWalk { start, step_stddev } => {
                if !(step_stddev >= S::zero()) {
                    return Err(bad("step_stddev must be non-negative".into()));
                }
                let mut normal = GaussianSource::new(seed, index);
                let mut level = band.clamp(start);
                samples.push(level);
                for _ in 1..n {
                    level = band.clamp(level + step_stddev * S::lit(normal.next_standard()));
                    samples.push(level);
                }
            }
            SegmentKind::StepDrop { high, low, drop_after_s } => {
                let drop_at = drop_after_s.unwrap_or(seg.duration_s / S::lit(2.0));
                if !(drop_at >= S::zero() && drop_at <= seg.duration_s) {
                    return Err(bad("drop_after_s must lie within the segment".into()));
                }
                let n_high = (drop_at / resolution_s).round().to_usize().unwrap().min(n);
                samples.extend(std::iter::repeat_n(band.clamp(high), n_high));
                samples.extend(std::iter::repeat_n(band.clamp(low), n - n_high));
            }
        }
    }
    let mut trace = BandwidthTrace::from_samples(samples, resolution_s, seed)?;
    trace.seed = seed;
    Ok(trace)
}
