//! Static SVG line plots of spectrum files.
//!
//! Output is plain SVG 1.1 with no scripts, fonts or external references;
//! every coordinate is printed with two decimals so identical inputs give
//! identical bytes. A channel that is constant (or equal to the
//! `--reference` level) is drawn as a dashed horizontal baseline instead of
//! a curve.

use std::fmt::Write as _;

use cavfb_core::spectrum::ChannelData;

use crate::error::{CliError, CliResult};
use crate::spectrum_file::SpectrumFile;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 84.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotOptions {
    /// Channels to draw; all of them when `None`. Complex channels are drawn
    /// as magnitudes.
    pub channels: Option<Vec<String>>,
    pub log_x: bool,
    pub log_y: bool,
    /// Level of a reference line, e.g. 1 for shot noise.
    pub reference: Option<f64>,
    pub title: Option<String>,
}

struct Series {
    label: String,
    y: Vec<f64>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn t(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn usable(&self, v: f64) -> bool {
        v.is_finite() && (!self.log || v > 0.0)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let a = self.lo.log10().ceil() as i32;
            let b = self.hi.log10().floor() as i32;
            let step = (((b - a) / 8) + 1).max(1);
            return (a..=b).step_by(step as usize).map(|e| 10f64.powi(e)).collect();
        }
        let step = nice_step((self.hi - self.lo) / 6.0);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }

    /// Pads and rounds the data range so curves do not touch the frame.
    fn fit(lo: f64, hi: f64, log: bool) -> Axis {
        if log {
            let (l, h) = if lo == hi { (lo / 2.0, hi * 2.0) } else { (lo, hi) };
            let pad = (h / l).log10() * 0.05;
            return Axis {
                lo: l / 10f64.powf(pad),
                hi: h * 10f64.powf(pad),
                log,
            };
        }
        let (l, h) = if lo == hi {
            let d = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            (lo - d, hi + d)
        } else {
            (lo, hi)
        };
        let pad = 0.05 * (h - l);
        Axis {
            lo: l - pad,
            hi: h + pad,
            log,
        }
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.6}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        let s = format!("{v:.3e}");
        let (m, e) = s.split_once('e').unwrap_or((&s, "0"));
        let m = m.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn collect_series(file: &SpectrumFile, wanted: Option<&[String]>) -> CliResult<Vec<Series>> {
    let mut out = Vec::new();
    let pick: Vec<&str> = match wanted {
        Some(w) => w.iter().map(String::as_str).collect(),
        None => file.channels.iter().map(|c| c.label.as_str()).collect(),
    };
    for name in pick {
        let c = file
            .channel(name)
            .ok_or_else(|| CliError::usage(format!("no channel {name:?} in the spectrum file")))?;
        let (label, y) = match &c.data {
            ChannelData::Real(v) => (c.label.clone(), v.clone()),
            ChannelData::Complex(v) => (format!("|{}|", c.label), v.iter().map(|z| z.norm()).collect()),
        };
        out.push(Series { label, y });
    }
    Ok(out)
}

pub fn render_svg(file: &SpectrumFile, opts: &PlotOptions) -> CliResult<String> {
    if file.freq_hz.is_empty() || file.channels.is_empty() {
        return Err(CliError::io("empty spectrum: nothing to plot"));
    }
    let series = collect_series(file, opts.channels.as_deref())?;

    // split into curves and baselines
    let mut baselines: Vec<(String, f64)> = Vec::new();
    if let Some(r) = opts.reference {
        baselines.push(("reference".into(), r));
    }
    let mut curves = Vec::new();
    for s in series {
        let first = s.y[0];
        let constant = s.y.iter().all(|v| *v == first);
        if constant && baselines.iter().any(|b| b.1 == first) {
            continue;
        }
        if constant {
            baselines.push((s.label, first));
        } else {
            curves.push(s);
        }
    }

    let xa_probe = Axis {
        lo: 1.0,
        hi: 2.0,
        log: opts.log_x,
    };
    let ya_probe = Axis {
        lo: 1.0,
        hi: 2.0,
        log: opts.log_y,
    };
    let xs: Vec<f64> = file.freq_hz.iter().copied().filter(|v| xa_probe.usable(*v)).collect();
    if xs.is_empty() {
        return Err(CliError::usage("no frequencies are usable on this x axis"));
    }
    let mut ys: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.y.iter().zip(&file.freq_hz).filter(|(_, x)| xa_probe.usable(**x)).map(|(y, _)| *y))
        .filter(|v| ya_probe.usable(*v))
        .collect();
    ys.extend(baselines.iter().map(|b| b.1).filter(|v| ya_probe.usable(*v)));
    if ys.is_empty() {
        return Err(CliError::usage("no values are usable on this y axis"));
    }
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xa = Axis {
        lo: min(&xs),
        hi: max(&xs),
        log: opts.log_x,
    };
    let xa = if xa.lo == xa.hi { Axis::fit(xa.lo, xa.hi, xa.log) } else { xa };
    let ya = Axis::fit(min(&ys), max(&ys), opts.log_y);

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |v: f64| LEFT + xa.t(v) * pw;
    let py = |v: f64| TOP + (1.0 - ya.t(v)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    for (k, v) in &file.metadata.entries {
        if k != "generated" {
            let _ = writeln!(s, "<!-- {} = {} -->", escape(k), escape(v).replace("--", "- -"));
        }
    }
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let title = opts
        .title
        .clone()
        .or_else(|| file.metadata.get("command").map(str::to_string))
        .unwrap_or_default();
    if !title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&title)
        );
    }

    // frame, grid and ticks
    let _ = writeln!(s, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(s, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}"/>"#);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="ticks" font-size="11">"#);
    for t in xa.ticks() {
        let x = px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{TOP:.2}" stroke="#dddddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            tick_label(t)
        );
    }
    for t in ya.ticks() {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">frequency (Hz)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0
    );

    // baselines, then curves
    for (label, v) in &baselines {
        if !ya.usable(*v) {
            continue;
        }
        let y = py(*v);
        let _ = writeln!(
            s,
            r##"<line class="baseline" x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#555555" stroke-dasharray="6 4"><title>{}</title></line>"##,
            LEFT + pw,
            escape(label)
        );
    }
    for (i, c) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        // break the line at unusable samples
        let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (x, y) in file.freq_hz.iter().zip(&c.y) {
            if xa.usable(*x) && ya.usable(*y) {
                segments.last_mut().expect("never empty").push((px(*x), py(*y)));
            } else if !segments.last().expect("never empty").is_empty() {
                segments.push(Vec::new());
            }
        }
        for seg in segments.iter().filter(|s| !s.is_empty()) {
            let pts: Vec<String> = seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
    }

    // legend
    let mut entries: Vec<(String, String, bool)> = curves
        .iter()
        .enumerate()
        .map(|(i, c)| (c.label.clone(), PALETTE[i % PALETTE.len()].to_string(), false))
        .collect();
    entries.extend(baselines.iter().map(|(l, _)| (l.clone(), "#555555".to_string(), true)));
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, (label, colour, dashed)) in entries.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = LEFT + pw - 150.0;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="1.5"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 24.0,
            x + 30.0,
            y + 4.0,
            escape(label)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    Ok(s)
}
