//! Small self-contained SVG charts for mission output. Rendering is
//! deterministic: the same inputs always produce the same bytes.

use std::fmt::Write;

use crate::harness::FrontierPoint;
use crate::model::{StreamKind, SystemLut, TierName};
use crate::sim::{MissionTimeline, Policy};
use crate::trace::BandwidthTrace;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#7f7f7f"];

/// Window for the moving packet-rate estimate, seconds.
const RATE_WINDOW_S: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mark {
    Line,
    Step,
    Dots,
    /// Hollow circles, drawn on top of dots sharing a position.
    Rings,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub mark: Mark,
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Horizontal reference lines: (y, label).
    pub guides: Vec<(f64, String)>,
    /// Category names for an integer-valued y axis.
    pub y_categories: Option<Vec<String>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn policy_color(p: Policy) -> &'static str {
    match p {
        Policy::Avery => PALETTE[0],
        Policy::StaticHighAccuracy => PALETTE[1],
        Policy::StaticBalanced => PALETTE[2],
        Policy::StaticHighThroughput => PALETTE[3],
        Policy::FullEdge => PALETTE[4],
    }
}

fn series_color(name: &str, i: usize) -> &'static str {
    [Policy::Avery, Policy::StaticHighAccuracy, Policy::StaticBalanced, Policy::StaticHighThroughput, Policy::FullEdge]
        .into_iter()
        .find(|p| p.as_str() == name)
        .map(policy_color)
        .unwrap_or(PALETTE[i % PALETTE.len()])
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-9);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

impl Chart {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.series.iter().flat_map(|s| s.points.iter().copied());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        for (y, _) in &self.guides {
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        if let Some(c) = &self.y_categories {
            y0 = -0.5;
            y1 = c.len() as f64 - 0.5;
        }
        if !x0.is_finite() {
            (x0, x1) = (0.0, 1.0);
        }
        if !y0.is_finite() {
            (y0, y1) = (0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y0 -= 0.5;
            y1 += 0.5;
        } else if self.y_categories.is_none() {
            let pad = 0.05 * (y1 - y0);
            y0 -= pad;
            y1 += pad;
        }
        (x0, x1, y0, y1)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let left = if self.y_categories.is_some() { 120.0 } else { 70.0 };
        let pw = WIDTH - left - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_T + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            left + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{left}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );

        for t in nice_ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                MARGIN_T + ph,
                MARGIN_T + ph + 5.0,
                MARGIN_T + ph + 18.0,
                fmt_tick(t)
            );
        }
        match &self.y_categories {
            Some(names) => {
                for (i, name) in names.iter().enumerate() {
                    let y = sy(i as f64);
                    let _ = writeln!(
                        s,
                        r##"<line x1="{:.2}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"##,
                        left - 5.0,
                        left - 7.0,
                        y + 4.0,
                        escape(name)
                    );
                }
            }
            None => {
                for t in nice_ticks(y0, y1) {
                    let y = sy(t);
                    let _ = writeln!(
                        s,
                        r##"<line x1="{:.2}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                        left - 5.0,
                        left - 7.0,
                        y + 4.0,
                        fmt_tick(t)
                    );
                }
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            left + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        );

        for (y, label) in &self.guides {
            let yy = sy(*y);
            let _ = writeln!(
                s,
                r##"<line x1="{left}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#555" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}" fill="#555">{}</text>"##,
                left + pw,
                left + pw + 6.0,
                yy + 4.0,
                escape(label)
            );
        }

        for (i, series) in self.series.iter().enumerate() {
            let color = series_color(&series.name, i);
            match series.mark {
                Mark::Dots => {
                    for &(x, y) in &series.points {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
                    }
                }
                Mark::Rings => {
                    for &(x, y) in &series.points {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
                Mark::Line | Mark::Step => {
                    let mut d = String::new();
                    let mut prev_y = None;
                    for (k, &(x, y)) in series.points.iter().enumerate() {
                        let cmd = if k == 0 { 'M' } else { 'L' };
                        if let (Mark::Step, Some(py)) = (series.mark, prev_y) {
                            let _ = write!(d, "L{:.2},{:.2} ", sx(x), sy(py));
                        }
                        let _ = write!(d, "{cmd}{:.2},{:.2} ", sx(x), sy(y));
                        prev_y = Some(y);
                    }
                    if !d.is_empty() {
                        let _ = writeln!(
                            s,
                            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                            d.trim_end()
                        );
                    }
                }
            }
            let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
            let lx = left + pw + 10.0;
            let _ = writeln!(
                s,
                r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="4" fill="{color}"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
                ly - 6.0,
                lx + 16.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        let mut t = format!("{r:.6}");
        while t.ends_with('0') {
            t.pop();
        }
        t
    }
}

/// Bandwidth over time with the High-Accuracy threshold as a guide line.
pub fn bandwidth_chart(trace: &BandwidthTrace<f64>, threshold_mbps: f64) -> String {
    let res = trace.resolution_s();
    let mut points: Vec<(f64, f64)> = trace.samples().iter().enumerate().map(|(i, &b)| (i as f64 * res, b)).collect();
    if let Some(&(_, last)) = points.last() {
        points.push((trace.duration_s(), last));
    }
    Chart {
        title: "Available uplink bandwidth".into(),
        x_label: "time (s)".into(),
        y_label: "bandwidth (Mbps)".into(),
        series: vec![Series { name: "trace".into(), points, mark: Mark::Step }],
        guides: vec![(threshold_mbps, format!("threshold {threshold_mbps}"))],
        y_categories: None,
    }
    .render()
}

fn tier_level(tier: Option<TierName>) -> f64 {
    match tier {
        Some(TierName::HighThroughput) => 0.0,
        Some(TierName::Balanced) => 1.0,
        Some(TierName::HighAccuracy) => 2.0,
        None => 3.0,
    }
}

/// Tier chosen at each sensing instant, one step line per run.
pub fn tier_chart(timelines: &[MissionTimeline]) -> String {
    let with_local = timelines.iter().any(|t| t.policy == Policy::FullEdge);
    let mut names: Vec<String> =
        ["HighThroughput", "Balanced", "HighAccuracy"].into_iter().map(String::from).collect();
    if with_local {
        names.push("on-board".into());
    }
    let series = timelines
        .iter()
        .map(|t| {
            let mut points: Vec<(f64, f64)> = t.decisions.iter().map(|d| (d.t_s, tier_level(d.tier))).collect();
            if let Some(&(_, y)) = points.last() {
                points.push((t.duration_s, y));
            }
            Series { name: t.policy.as_str().into(), points, mark: Mark::Step }
        })
        .collect();
    Chart {
        title: "Insight tier".into(),
        x_label: "time (s)".into(),
        y_label: "tier".into(),
        series,
        guides: Vec::new(),
        y_categories: Some(names),
    }
    .render()
}

/// Running mean IoU of delivered Insight packets.
pub fn accuracy_chart(timelines: &[MissionTimeline], lut: &SystemLut<f64>) -> String {
    let series = timelines
        .iter()
        .filter(|t| t.policy != Policy::FullEdge)
        .map(|t| {
            let mut delivered: Vec<(f64, f64)> = t
                .delivered_insight()
                .filter_map(|p| {
                    let tier = p.tier()?;
                    Some((p.t_tx_done_s()?, lut.tier(tier).accuracy(p.dataset())))
                })
                .collect();
            delivered.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut sum = 0.0;
            let points = delivered
                .iter()
                .enumerate()
                .map(|(i, &(t, iou))| {
                    sum += iou;
                    (t, sum / (i + 1) as f64)
                })
                .collect();
            Series { name: t.policy.as_str().into(), points, mark: Mark::Line }
        })
        .collect();
    Chart {
        title: "Mean IoU of delivered Insight packets".into(),
        x_label: "time (s)".into(),
        y_label: "IoU (%)".into(),
        series,
        guides: Vec::new(),
        y_categories: None,
    }
    .render()
}

fn delivery_times(t: &MissionTimeline) -> Vec<f64> {
    let mut times: Vec<f64> = if t.policy == Policy::FullEdge {
        t.local_frames.iter().filter_map(|f| f.t_done_s).collect()
    } else {
        t.packets
            .iter()
            .filter(|p| p.stream() == StreamKind::Insight)
            .filter_map(|p| p.t_tx_done_s())
            .collect()
    };
    times.sort_by(f64::total_cmp);
    times
}

/// Insight packets per second over a trailing window.
pub fn throughput_chart(timelines: &[MissionTimeline]) -> String {
    let series = timelines
        .iter()
        .map(|t| {
            let times = delivery_times(t);
            let steps = (t.duration_s / RATE_WINDOW_S * 4.0).ceil().max(1.0) as usize;
            let points = (0..=steps)
                .map(|k| {
                    let end = (k as f64 * RATE_WINDOW_S / 4.0).min(t.duration_s);
                    let start = (end - RATE_WINDOW_S).max(0.0);
                    let lo = times.partition_point(|&x| x <= start);
                    let hi = times.partition_point(|&x| x <= end);
                    let span = (end - start).max(1e-9);
                    (end, if end > 0.0 { (hi - lo) as f64 / span } else { 0.0 })
                })
                .collect();
            Series { name: t.policy.as_str().into(), points, mark: Mark::Line }
        })
        .collect();
    Chart {
        title: format!("Insight throughput ({RATE_WINDOW_S} s window)"),
        x_label: "time (s)".into(),
        y_label: "packets / s".into(),
        series,
        guides: Vec::new(),
        y_categories: None,
    }
    .render()
}

/// Accuracy versus throughput scatter over a bandwidth sweep.
pub fn frontier_chart(points: &[FrontierPoint]) -> String {
    let mut series: Vec<Series> = Vec::new();
    for p in points {
        let Some(iou) = p.avg_iou else { continue };
        let name = p.policy.as_str();
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((p.avg_pps, iou)),
            None => {
                let mark = if p.policy == Policy::Avery { Mark::Rings } else { Mark::Dots };
                series.push(Series { name: name.into(), points: vec![(p.avg_pps, iou)], mark })
            }
        }
    }
    // Rings last so they sit above the baseline dots they coincide with.
    series.sort_by_key(|s| s.mark == Mark::Rings);
    Chart {
        title: "Accuracy / throughput frontier".into(),
        x_label: "Insight packets / s".into(),
        y_label: "mean IoU (%)".into(),
        series,
        guides: Vec::new(),
        y_categories: None,
    }
    .render()
}
