use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CalibrationExport, ImportanceReport, PairShapeExport, ShapeBin, ShapeFunctionExport, CI_Z};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    ImportanceBars,
    ShapeLine,
    ShapeCategoryBars,
    PairHeatmap,
    Calibration,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::ImportanceBars => "importance-bars",
            PlotKind::ShapeLine => "shape-line",
            PlotKind::ShapeCategoryBars => "shape-category-bars",
            PlotKind::PairHeatmap => "pair-heatmap",
            PlotKind::Calibration => "calibration",
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            PlotKind::ImportanceBars,
            PlotKind::ShapeLine,
            PlotKind::ShapeCategoryBars,
            PlotKind::PairHeatmap,
            PlotKind::Calibration,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown plot kind `{s}`")))
    }
}

/// Anything `render_svg` can draw.
#[derive(Debug, Clone, Copy)]
pub enum Export<'a> {
    Importance(&'a ImportanceReport),
    Shape(&'a ShapeFunctionExport),
    Pair(&'a PairShapeExport),
    Calibration(&'a CalibrationExport),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    /// Bars shown in an importance plot.
    pub top_n: usize,
    pub width: f64,
    pub height: f64,
    /// Which block (evaluation time) of a shape or calibration export to draw.
    pub block: usize,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            top_n: 10,
            width: 640.0,
            height: 400.0,
            block: 0,
        }
    }
}

const LEFT: f64 = 160.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Linear map from `[lo, hi]` onto `[a, b]`, widening degenerate domains.
#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Scale {
        let (lo, hi) = if hi - lo > 1e-12 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Scale { lo, hi, a, b }
    }

    fn at(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

struct Canvas {
    body: String,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(opts: &SvgOptions, title: &str) -> Canvas {
        let mut c = Canvas {
            body: String::new(),
            width: opts.width,
            height: opts.height,
        };
        c.text(opts.width / 2.0, 22.0, "middle", "title", title);
        c
    }

    fn plot_x(&self) -> (f64, f64) {
        (LEFT, self.width - RIGHT)
    }

    fn plot_y(&self) -> (f64, f64) {
        (self.height - BOTTOM, TOP)
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, class: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            esc(s)
        );
    }

    fn rect(&mut self, class: &str, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let (x, w) = if w < 0.0 { (x + w, -w) } else { (x, w) };
        let (y, h) = if h < 0.0 { (y + h, -h) } else { (y, h) };
        let _ = writeln!(
            self.body,
            r#"<rect class="{class}" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn line(&mut self, class: &str, x1: f64, y1: f64, x2: f64, y2: f64) {
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="black"/>"#
        );
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let (x0, x1) = self.plot_x();
        let (y0, y1) = self.plot_y();
        self.line("axis", x0, y0, x1, y0);
        self.line("axis", x0, y0, x0, y1);
        self.text((x0 + x1) / 2.0, self.height - 12.0, "middle", "axis-label", x_label);
        let _ = writeln!(
            self.body,
            r#"<text class="axis-label" x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            esc(y_label)
        );
    }

    fn ticks(&mut self, sx: Scale, sy: Scale) {
        let y0 = self.plot_y().0;
        for v in [sx.lo, sx.hi] {
            self.text(sx.at(v), y0 + 16.0, "middle", "tick", &format!("{v:.3}"));
        }
        for v in [sy.lo, sy.hi] {
            self.text(LEFT - 6.0, sy.at(v) + 4.0, "end", "tick", &format!("{v:.3}"));
        }
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Standalone SVG 1.1 for an export. Output depends only on the inputs.
pub fn render_svg(export: Export<'_>, kind: PlotKind, opts: &SvgOptions) -> Result<String> {
    match (export, kind) {
        (Export::Importance(r), PlotKind::ImportanceBars) => importance_bars(r, opts),
        (Export::Shape(s), PlotKind::ShapeLine) => shape_line(s, opts),
        (Export::Shape(s), PlotKind::ShapeCategoryBars) => shape_bars(s, opts),
        (Export::Pair(p), PlotKind::PairHeatmap) => heatmap(p, opts),
        (Export::Calibration(c), PlotKind::Calibration) => calibration_plot(c, opts),
        (_, kind) => Err(Error::Config(format!("plot kind `{}` does not fit this export", kind.as_str()))),
    }
}

fn importance_bars(r: &ImportanceReport, opts: &SvgOptions) -> Result<String> {
    let terms: Vec<_> = r.terms.iter().take(opts.top_n).collect();
    if terms.is_empty() {
        return Err(Error::EmptyExport);
    }
    let mut c = Canvas::new(opts, &format!("Feature importance ({})", r.mode));
    let hi = terms
        .iter()
        .map(|t| {
            let m = t.missing.map_or(0.0, |m| m.mean + m.ci_half_width());
            (t.score.mean + t.score.ci_half_width()).max(m)
        })
        .fold(0.0, f64::max);
    let (x0, x1) = c.plot_x();
    let sx = Scale::new(0.0, hi, x0, x1);
    let (y0, y1) = c.plot_y();
    let slot = (y0 - y1) / terms.len() as f64;
    let stratify = terms.iter().any(|t| t.missing.is_some());
    let bar_h = if stratify { slot * 0.4 } else { slot * 0.7 };
    for (i, t) in terms.iter().enumerate() {
        let top = y1 + i as f64 * slot + slot * 0.15;
        c.rect("bar", x0, top, sx.at(t.score.mean) - x0, bar_h, "#4878a8");
        let mid = top + bar_h / 2.0;
        let e = t.score.ci_half_width();
        c.line("err", sx.at((t.score.mean - e).max(0.0)), mid, sx.at(t.score.mean + e), mid);
        if let Some(m) = t.missing {
            let top = top + bar_h;
            c.rect("bar-missing", x0, top, sx.at(m.mean) - x0, bar_h, "#d08040");
            let mid = top + bar_h / 2.0;
            let e = m.ci_half_width();
            c.line("err", sx.at((m.mean - e).max(0.0)), mid, sx.at(m.mean + e), mid);
        }
        c.text(x0 - 6.0, top + bar_h * 0.75 + 3.0, "end", "label", &t.name);
    }
    c.axes("importance", "");
    c.text(sx.at(hi), y0 + 16.0, "middle", "tick", &format!("{hi:.3}"));
    c.text(x0, y0 + 16.0, "middle", "tick", "0");
    if stratify {
        c.text(x1, TOP - 6.0, "end", "legend", "blue: observed, orange: missing");
    }
    Ok(c.finish())
}

fn shape_block<'a>(s: &'a ShapeFunctionExport, opts: &SvgOptions) -> Result<&'a [ShapeBin]> {
    let block = s.blocks.get(opts.block).ok_or(Error::EmptyExport)?;
    if block.bins.is_empty() {
        return Err(Error::EmptyExport);
    }
    Ok(&block.bins)
}

fn title(s: &ShapeFunctionExport, opts: &SvgOptions) -> String {
    match s.blocks.get(opts.block).and_then(|b| b.eval_time) {
        Some(t) => format!("{} (t = {t})", s.feature),
        None => s.feature.clone(),
    }
}

fn y_range(bins: &[ShapeBin]) -> (f64, f64) {
    bins.iter().fold((0.0f64, 0.0f64), |(lo, hi), b| {
        let e = CI_Z * b.se;
        (lo.min(b.mean - e), hi.max(b.mean + e))
    })
}

fn shape_line(s: &ShapeFunctionExport, opts: &SvgOptions) -> Result<String> {
    let bins = shape_block(s, opts)?;
    let (missing, observed): (Vec<&ShapeBin>, Vec<&ShapeBin>) = bins.iter().partition(|b| b.index == 0);
    if observed.iter().any(|b| b.interval.is_none()) {
        return Err(Error::Config("shape-line needs a continuous feature".into()));
    }
    let mut c = Canvas::new(opts, &title(s, opts));
    let (ylo, yhi) = y_range(bins);
    let (y0, y1) = c.plot_y();
    let sy = Scale::new(ylo, yhi, y0, y1);
    let (x0, x1) = c.plot_x();
    let xlo = observed.iter().map(|b| b.interval.unwrap().0).fold(f64::INFINITY, f64::min);
    let xhi = observed.iter().map(|b| b.interval.unwrap().1).fold(f64::NEG_INFINITY, f64::max);
    let sx = Scale::new(xlo, xhi, x0 + 10.0, x1);
    if !observed.is_empty() {
        let mut band: Vec<(f64, f64)> = Vec::new();
        let mut lower: Vec<(f64, f64)> = Vec::new();
        let mut path = String::new();
        for (i, b) in observed.iter().enumerate() {
            let (lo, hi) = b.interval.unwrap();
            let (xa, xb, y) = (sx.at(lo), sx.at(hi), sy.at(b.mean));
            let _ = write!(path, "{}{xa:.2} {y:.2} L{xb:.2} {y:.2} ", if i == 0 { "M" } else { "L" });
            let e = CI_Z * b.se;
            band.extend([(xa, sy.at(b.mean + e)), (xb, sy.at(b.mean + e))]);
            lower.extend([(xa, sy.at(b.mean - e)), (xb, sy.at(b.mean - e))]);
        }
        band.extend(lower.into_iter().rev());
        let points: Vec<String> = band.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            c.body,
            r##"<polygon class="band" points="{}" fill="#4878a8" fill-opacity="0.25" stroke="none"/>"##,
            points.join(" ")
        );
        let _ = writeln!(
            c.body,
            r##"<path class="shape" d="{}" fill="none" stroke="#4878a8" stroke-width="2"/>"##,
            path.trim_end()
        );
    }
    for b in missing {
        let (x, y, e) = (x0 - 30.0, sy.at(b.mean), CI_Z * b.se);
        c.line("err", x, sy.at(b.mean - e), x, sy.at(b.mean + e));
        let _ = writeln!(
            c.body,
            r##"<circle class="missing" cx="{x:.2}" cy="{y:.2}" r="4" fill="#d08040"/>"##
        );
        c.text(x, y0 + 16.0, "middle", "label", "missing");
    }
    c.line("zero", x0, sy.at(0.0), x1, sy.at(0.0));
    c.axes(&s.feature, "contribution");
    c.ticks(sx, sy);
    Ok(c.finish())
}

fn shape_bars(s: &ShapeFunctionExport, opts: &SvgOptions) -> Result<String> {
    let bins = shape_block(s, opts)?;
    let mut c = Canvas::new(opts, &title(s, opts));
    let (ylo, yhi) = y_range(bins);
    let (y0, y1) = c.plot_y();
    let sy = Scale::new(ylo, yhi, y0, y1);
    let (x0, x1) = c.plot_x();
    let slot = (x1 - x0) / bins.len() as f64;
    let base = sy.at(0.0);
    for (i, b) in bins.iter().enumerate() {
        let left = x0 + i as f64 * slot + slot * 0.15;
        let w = slot * 0.7;
        let (class, fill) = if b.index == 0 {
            ("bar-missing", "#d08040")
        } else {
            ("bar", "#4878a8")
        };
        c.rect(class, left, base, w, sy.at(b.mean) - base, fill);
        let e = CI_Z * b.se;
        let mid = left + w / 2.0;
        c.line("err", mid, sy.at(b.mean - e), mid, sy.at(b.mean + e));
        c.text(mid, y0 + 16.0, "middle", "label", &b.label);
    }
    c.line("zero", x0, base, x1, base);
    c.axes(&s.feature, "contribution");
    for v in [sy.lo, sy.hi] {
        c.text(LEFT - 6.0, sy.at(v) + 4.0, "end", "tick", &format!("{v:.3}"));
    }
    Ok(c.finish())
}

/// Blue for negative, white at zero, red for positive.
fn diverging(v: f64, max: f64) -> String {
    let u = if max > 0.0 { (v / max).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |x: f64| (255.0 * (1.0 - x.abs())).round() as u8;
    if u >= 0.0 {
        format!("#ff{:02x}{:02x}", fade(u), fade(u))
    } else {
        format!("#{:02x}{:02x}ff", fade(u), fade(u))
    }
}

fn heatmap(p: &PairShapeExport, opts: &SvgOptions) -> Result<String> {
    if p.labels_a.is_empty() || p.labels_b.is_empty() {
        return Err(Error::EmptyExport);
    }
    let mut c = Canvas::new(opts, &format!("{} x {}", p.feature_a, p.feature_b));
    let max = p.mean.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let (x0, x1) = c.plot_x();
    let (y0, y1) = c.plot_y();
    let (cw, ch) = ((x1 - x0) / p.labels_b.len() as f64, (y0 - y1) / p.labels_a.len() as f64);
    for (i, row) in p.mean.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            c.rect("cell", x0 + j as f64 * cw, y0 - (i + 1) as f64 * ch, cw, ch, &diverging(v, max));
        }
    }
    let every = |n: usize| n.div_ceil(12).max(1);
    for (i, l) in p.labels_a.iter().enumerate().step_by(every(p.labels_a.len())) {
        c.text(x0 - 6.0, y0 - (i as f64 + 0.5) * ch + 4.0, "end", "label", l);
    }
    for (j, l) in p.labels_b.iter().enumerate().step_by(every(p.labels_b.len())) {
        c.text(x0 + (j as f64 + 0.5) * cw, y0 + 16.0, "middle", "label", l);
    }
    c.axes(&p.feature_b, &p.feature_a);
    c.text(x1, TOP - 6.0, "end", "legend", &format!("|max| = {max:.3}"));
    Ok(c.finish())
}

fn calibration_plot(cal: &CalibrationExport, opts: &SvgOptions) -> Result<String> {
    let block = cal.blocks.get(opts.block).ok_or(Error::EmptyExport)?;
    if block.points.is_empty() {
        return Err(Error::EmptyExport);
    }
    let mut c = Canvas::new(opts, &format!("Calibration at t = {}", block.eval_time));
    let (x0, x1) = c.plot_x();
    let (y0, y1) = c.plot_y();
    let side = (x1 - x0).min(y0 - y1);
    let sx = Scale::new(0.0, 1.0, x0, x0 + side);
    let sy = Scale::new(0.0, 1.0, y0, y0 - side);
    c.line("diagonal", sx.at(0.0), sy.at(0.0), sx.at(1.0), sy.at(1.0));
    for p in &block.points {
        let _ = writeln!(
            c.body,
            r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="#4878a8"/>"##,
            sx.at(p.mean_pred),
            sy.at(p.km_cdf)
        );
    }
    c.axes("mean predicted CDF", "Kaplan-Meier CDF");
    c.ticks(sx, sy);
    Ok(c.finish())
}
