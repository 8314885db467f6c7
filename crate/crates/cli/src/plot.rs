//! Self-contained SVG figures: per-class histograms, two-feature scatter
//! plots and ROC curves.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use pdvol_core::dataset::{Label, LabeledDataset};
use pdvol_core::metrics::{auc, RocCurve};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PD_COLOR: &str = "#d62728";
const HC_COLOR: &str = "#1f77b4";

fn color(label: Label) -> &'static str {
    match label {
        Label::Pd => PD_COLOR,
        Label::Hc => HC_COLOR,
    }
}

/// Linear map from data coordinates onto the plotting area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Frame { x: widen(x), y: widen(y) }
    }

    fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(out, r#"<g class="axes" stroke="black" fill="none"><path d="M{l} {t}V{b}H{r}"/></g>"#);
    let _ = writeln!(out, r#"<g class="ticks" fill="black">"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, frame.px(xv), b + 16.0, tick(xv));
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, l - 4.0, frame.py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 16.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(y_label),
        y = HEIGHT / 2.0
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (i, (name, fill)) in entries.iter().enumerate() {
        let y = MARGIN + 8.0 + 18.0 * i as f64;
        let x = WIDTH - MARGIN - 70.0;
        let _ = writeln!(out, r#"<rect x="{x}" y="{}" width="12" height="12" fill="{fill}"/>"#, y - 10.0);
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, x + 18.0, escape(name));
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Freedman–Diaconis bin count over `values`, never fewer than 10.
pub fn bin_count(values: &[f64]) -> usize {
    const FLOOR: usize = 10;
    const CAP: usize = 200;
    if values.len() < 2 {
        return FLOOR;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let range = s[s.len() - 1] - s[0];
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    let width = 2.0 * iqr / (s.len() as f64).cbrt();
    if !(width > 0.0) || !(range > 0.0) {
        return FLOOR;
    }
    ((range / width).ceil() as usize).clamp(FLOOR, CAP)
}

/// Overlaid PD and HC histograms of one feature.
pub fn feature_distribution(ds: &LabeledDataset, feature: &str) -> Result<String> {
    let j = ds.feature_index(feature)?;
    let values = ds.features().column(j);
    let bins = bin_count(&values);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut counts = [vec![0usize; bins], vec![0usize; bins]];
    for (v, l) in values.iter().zip(ds.labels()) {
        let b = (((v - lo) / span * bins as f64) as usize).min(bins - 1);
        counts[l.index()][b] += 1;
    }
    let top = counts.iter().flatten().copied().max().unwrap_or(1) as f64;
    let frame = Frame::new((lo, lo + span), (0.0, top));

    let mut out = String::new();
    open(&mut out, &format!("Distribution of {feature} by class"));
    for label in [Label::Hc, Label::Pd] {
        let _ = writeln!(
            out,
            r#"<g class="series" data-label="{label}" fill="{}" fill-opacity="0.5" stroke="{}">"#,
            color(label),
            color(label)
        );
        for (b, &c) in counts[label.index()].iter().enumerate() {
            if c == 0 {
                continue;
            }
            let x0 = frame.px(lo + span * b as f64 / bins as f64);
            let x1 = frame.px(lo + span * (b + 1) as f64 / bins as f64);
            let y = frame.py(c as f64);
            let _ = writeln!(
                out,
                r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}"/>"#,
                x1 - x0,
                frame.py(0.0) - y
            );
        }
        let _ = writeln!(out, "</g>");
    }
    axes(&mut out, &frame, feature, "subjects");
    legend(&mut out, &[("PD", PD_COLOR), ("HC", HC_COLOR)]);
    out.push_str("</svg>\n");
    Ok(out)
}

/// One marker per subject over two features, coloured by class.
pub fn pair_scatter(ds: &LabeledDataset, x_feature: &str, y_feature: &str) -> Result<String> {
    let (jx, jy) = (ds.feature_index(x_feature)?, ds.feature_index(y_feature)?);
    let (xs, ys) = (ds.features().column(jx), ds.features().column(jy));
    let range = |v: &[f64]| {
        (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    let frame = Frame::new(range(&xs), range(&ys));

    let mut out = String::new();
    open(&mut out, &format!("{x_feature} vs {y_feature}"));
    for label in [Label::Hc, Label::Pd] {
        let _ = writeln!(out, r#"<g class="series" data-label="{label}" fill="{}" fill-opacity="0.7">"#, color(label));
        for i in (0..ds.n_rows()).filter(|&i| ds.labels()[i] == label) {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, frame.px(xs[i]), frame.py(ys[i]));
        }
        let _ = writeln!(out, "</g>");
    }
    axes(&mut out, &frame, x_feature, y_feature);
    legend(&mut out, &[("PD", PD_COLOR), ("HC", HC_COLOR)]);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Reads the `threshold,fpr,tpr` CSV written by `run`.
pub fn read_roc_csv(text: &str) -> Result<RocCurve> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    if lines.next().map(str::trim) != Some("threshold,fpr,tpr") {
        bail!("ROC CSV must start with the header threshold,fpr,tpr");
    }
    let mut curve = RocCurve { points: Vec::new(), thresholds: Vec::new() };
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let nums: Vec<f64> = match f.as_slice() {
            [a, b, c] => [a, b, c].iter().map(|s| s.parse::<f64>()).collect::<Result<_, _>>()?,
            _ => bail!("ROC CSV data row {} has {} fields, expected 3", i + 1, f.len()),
        };
        curve.thresholds.push(nums[0]);
        curve.points.push((nums[1], nums[2]));
    }
    if curve.points.is_empty() {
        bail!("ROC CSV has no points");
    }
    Ok(curve)
}

/// ROC step curve with the chance diagonal and an AUC annotation.
pub fn roc(curve: &RocCurve, title: &str) -> String {
    let frame = Frame::new((0.0, 1.0), (0.0, 1.0));
    let mut out = String::new();
    open(&mut out, title);
    let _ = writeln!(
        out,
        r#"<path class="chance" d="M{:.2} {:.2}L{:.2} {:.2}" stroke="gray" stroke-dasharray="4 4" fill="none"/>"#,
        frame.px(0.0),
        frame.py(0.0),
        frame.px(1.0),
        frame.py(1.0)
    );
    let mut d = String::new();
    for (i, (fpr, tpr)) in curve.points.iter().enumerate() {
        let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, frame.px(*fpr), frame.py(*tpr));
    }
    let _ = writeln!(out, r#"<path class="roc" d="{d}" stroke="{PD_COLOR}" stroke-width="2" fill="none"/>"#);
    let _ = writeln!(
        out,
        r#"<text class="auc" x="{}" y="{}" text-anchor="end">AUC = {:.4}</text>"#,
        WIDTH - MARGIN - 8.0,
        HEIGHT - MARGIN - 12.0,
        auc(curve)
    );
    axes(&mut out, &frame, "false positive rate", "true positive rate");
    out.push_str("</svg>\n");
    out
}
