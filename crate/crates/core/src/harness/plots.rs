//! Static SVG 1.1 figures: lag-vs-duration scatter grid and boxplots.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::{SummaryRow, TokenRecord, POOLED};
use crate::error::{Error, Result};
use crate::score::Preset;

const PANEL_W: f64 = 260.0;
const PANEL_H: f64 = 200.0;
const MARGIN: f64 = 55.0;
const GAP: f64 = 30.0;

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" {style}/>"#
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" {style}/>"#
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, style: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" {style}/>"#);
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="{size}">{}</text>"#,
            escape(s)
        );
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Data range padded by 5%, widened when degenerate.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 4.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-9 * step { 0.0 } else { t });
        t += step;
    }
    out
}

struct Frame {
    x0: f64,
    y0: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * PANEL_W
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + PANEL_H - (y - self.yr.0) / (self.yr.1 - self.yr.0) * PANEL_H
    }

    fn axes(&self, svg: &mut Svg, xlabel: &str, ylabel: &str, x_ticks: bool) {
        svg.rect(self.x0, self.y0, PANEL_W, PANEL_H, r#"fill="none" stroke="black""#);
        for t in ticks(self.yr.0, self.yr.1) {
            let y = self.py(t);
            svg.line(self.x0 - 4.0, y, self.x0, y, r#"stroke="black""#);
            svg.text(self.x0 - 6.0, y + 3.0, "end", 9.0, &format!("{t}"));
        }
        if x_ticks {
            for t in ticks(self.xr.0, self.xr.1) {
                let x = self.px(t);
                svg.line(x, self.y0 + PANEL_H, x, self.y0 + PANEL_H + 4.0, r#"stroke="black""#);
                svg.text(x, self.y0 + PANEL_H + 14.0, "middle", 9.0, &format!("{t}"));
            }
        }
        svg.text(self.x0 + PANEL_W / 2.0, self.y0 + PANEL_H + 28.0, "middle", 10.0, xlabel);
        let (lx, ly) = (self.x0 - 40.0, self.y0 + PANEL_H / 2.0);
        let _ = writeln!(
            svg.body,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" font-family="sans-serif" font-size="10" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
            escape(ylabel)
        );
    }
}

fn kept(tokens: &[TokenRecord]) -> impl Iterator<Item = &TokenRecord> {
    tokens.iter().filter(|t| !t.excluded && t.g1_duration_ms.is_some() && t.lag_ms.is_some())
}

fn min_max(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

/// Slope annotation as printed in the scatter panels.
pub fn slope_label(row: Option<&SummaryRow>) -> String {
    match row.and_then(|r| r.regression) {
        Some(r) => format!("slope = {:.3}", r.slope),
        None => "slope = NA".to_string(),
    }
}

/// Lag against G1 duration, one panel per speaker (rows) and condition
/// (columns), with the per-speaker OLS line.
pub fn scatter_svg(tokens: &[TokenRecord], summary: &[SummaryRow]) -> Result<String> {
    let data: Vec<&TokenRecord> = kept(tokens).collect();
    if data.is_empty() {
        return Err(Error::Data("no usable tokens to plot".into()));
    }
    let speakers: BTreeSet<&str> = data.iter().map(|t| t.speaker.as_str()).collect();
    let conditions: BTreeSet<Preset> = data.iter().map(|t| t.condition).collect();
    let xr = padded_pair(min_max(data.iter().map(|t| t.g1_duration_ms.unwrap())));
    let yr = padded_pair(min_max(data.iter().map(|t| t.lag_ms.unwrap())));

    let cols = conditions.len() as f64;
    let rows = speakers.len() as f64;
    let mut svg = Svg::new(
        MARGIN + cols * (PANEL_W + GAP) + 10.0,
        30.0 + rows * (PANEL_H + MARGIN),
    );
    for (r, s) in speakers.iter().enumerate() {
        for (c, cond) in conditions.iter().enumerate() {
            let frame = Frame {
                x0: MARGIN + c as f64 * (PANEL_W + GAP),
                y0: 30.0 + r as f64 * (PANEL_H + MARGIN),
                xr,
                yr,
            };
            let _ = writeln!(svg.body, r#"<g class="panel" data-speaker="{s}" data-condition="{cond}">"#);
            frame.axes(&mut svg, "G1 duration (ms)", "lag (ms)", true);
            svg.text(frame.x0 + PANEL_W / 2.0, frame.y0 - 6.0, "middle", 11.0, &format!("{s} {cond}"));
            for t in data.iter().filter(|t| t.speaker == *s && t.condition == *cond) {
                svg.circle(
                    frame.px(t.g1_duration_ms.unwrap()),
                    frame.py(t.lag_ms.unwrap()),
                    1.8,
                    r#"fill="steelblue" fill-opacity="0.6""#,
                );
            }
            let row = summary.iter().find(|x| x.speaker == *s && x.condition == *cond);
            if let Some(reg) = row.and_then(|x| x.regression) {
                let (a, b) = xr;
                let clip = |y: f64| y.clamp(yr.0, yr.1);
                svg.line(
                    frame.px(a),
                    frame.py(clip(reg.intercept + reg.slope * a)),
                    frame.px(b),
                    frame.py(clip(reg.intercept + reg.slope * b)),
                    r#"stroke="firebrick" stroke-width="1.5""#,
                );
            }
            svg.text(frame.x0 + 6.0, frame.y0 + 14.0, "start", 10.0, &slope_label(row));
            svg.body.push_str("</g>\n");
        }
    }
    Ok(svg.finish())
}

fn padded_pair((lo, hi): (f64, f64)) -> (f64, f64) {
    padded(lo, hi)
}

/// Tukey boxplot summary: quartiles by linear interpolation, whiskers at
/// the most extreme data within 1.5 IQR of the box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence).collect();
        Some(Self {
            q1,
            median,
            q3,
            whisker_lo: inside.first().copied().unwrap_or(q1),
            whisker_hi: inside.last().copied().unwrap_or(q3),
            outliers: v.into_iter().filter(|x| *x < lo_fence || *x > hi_fence).collect(),
        })
    }
}

fn boxplot_panel(svg: &mut Svg, x0: f64, y0: f64, groups: &[(String, Vec<f64>)], ylabel: &str, title: &str) {
    let yr = padded_pair(min_max(groups.iter().flat_map(|g| g.1.iter().copied())));
    let frame = Frame {
        x0,
        y0,
        xr: (0.0, groups.len() as f64),
        yr,
    };
    frame.axes(svg, "", ylabel, false);
    svg.text(x0 + PANEL_W / 2.0, y0 - 6.0, "middle", 11.0, title);
    let slot = PANEL_W / groups.len() as f64;
    for (k, (label, values)) in groups.iter().enumerate() {
        let Some(b) = BoxStats::from_values(values) else { continue };
        let cx = x0 + (k as f64 + 0.5) * slot;
        let half = (0.3 * slot).min(25.0);
        let stroke = r#"stroke="black""#;
        svg.line(cx, frame.py(b.whisker_lo), cx, frame.py(b.q1), stroke);
        svg.line(cx, frame.py(b.q3), cx, frame.py(b.whisker_hi), stroke);
        svg.line(cx - half / 2.0, frame.py(b.whisker_lo), cx + half / 2.0, frame.py(b.whisker_lo), stroke);
        svg.line(cx - half / 2.0, frame.py(b.whisker_hi), cx + half / 2.0, frame.py(b.whisker_hi), stroke);
        let (top, bottom) = (frame.py(b.q3), frame.py(b.q1));
        svg.rect(cx - half, top, 2.0 * half, bottom - top, r#"fill="lightsteelblue" stroke="black""#);
        svg.line(cx - half, frame.py(b.median), cx + half, frame.py(b.median), r#"stroke="black" stroke-width="2""#);
        for o in &b.outliers {
            svg.circle(cx, frame.py(*o), 1.5, r#"fill="none" stroke="gray""#);
        }
        svg.text(cx, y0 + PANEL_H + 14.0, "middle", 9.0, label);
    }
}

fn grouped<K: Ord>(tokens: &[TokenRecord], key: impl Fn(&TokenRecord) -> K, value: impl Fn(&TokenRecord) -> Option<f64>) -> BTreeMap<K, Vec<f64>> {
    let mut map: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for t in tokens.iter().filter(|t| !t.excluded) {
        if let Some(v) = value(t) {
            map.entry(key(t)).or_default().push(v);
        }
    }
    map
}

fn short(c: Preset) -> &'static str {
    match c {
        Preset::Underlying => "UND",
        Preset::Assimilatory => "ASSIM",
        Preset::Sequence => "SEQ",
    }
}

pub fn lag_boxplot_svg(tokens: &[TokenRecord]) -> Result<String> {
    let groups: Vec<(String, Vec<f64>)> = grouped(tokens, |t| t.condition, |t| t.lag_ms)
        .into_iter()
        .map(|(c, v)| (short(c).to_string(), v))
        .collect();
    if groups.is_empty() {
        return Err(Error::Data("no lags to plot".into()));
    }
    let mut svg = Svg::new(MARGIN + PANEL_W + 20.0, PANEL_H + 80.0);
    boxplot_panel(&mut svg, MARGIN, 30.0, &groups, "lag (ms)", "Onset-to-onset lag by condition");
    Ok(svg.finish())
}

pub fn tb_boxplot_svg(tokens: &[TokenRecord]) -> Result<String> {
    let by_condition: Vec<(String, Vec<f64>)> = grouped(tokens, |t| t.condition, |t| t.tb_pos_mm)
        .into_iter()
        .map(|(c, v)| (short(c).to_string(), v))
        .collect();
    if by_condition.is_empty() {
        return Err(Error::Data("no TB positions to plot".into()));
    }
    let by_speaker: Vec<(String, Vec<f64>)> = grouped(tokens, |t| (t.speaker.clone(), t.condition), |t| t.tb_pos_mm)
        .into_iter()
        .map(|((s, c), v)| (format!("{s} {}", &short(c)[..1]), v))
        .collect();
    let mut svg = Svg::new(2.0 * MARGIN + 2.0 * PANEL_W + GAP + 20.0, PANEL_H + 80.0);
    boxplot_panel(&mut svg, MARGIN, 30.0, &by_condition, "TB position at palatal onset (mm)", "By condition");
    boxplot_panel(
        &mut svg,
        2.0 * MARGIN + PANEL_W + GAP,
        30.0,
        &by_speaker,
        "TB position (mm)",
        "By speaker and condition",
    );
    Ok(svg.finish())
}

/// Writes `scatter.svg`, `lag_boxplot.svg` and `tb_boxplot.svg`. Per-speaker
/// rows of `summary` supply the regression lines.
pub fn emit_plots(tokens: &[TokenRecord], summary: &[SummaryRow], out: &Path) -> Result<Vec<PathBuf>> {
    let per_speaker: Vec<SummaryRow> = summary.iter().filter(|r| r.speaker != POOLED).cloned().collect();
    let files = [
        ("scatter.svg", scatter_svg(tokens, &per_speaker)?),
        ("lag_boxplot.svg", lag_boxplot_svg(tokens)?),
        ("tb_boxplot.svg", tb_boxplot_svg(tokens)?),
    ];
    fs::create_dir_all(out)?;
    let mut paths = Vec::new();
    for (name, body) in files {
        let p = out.join(name);
        fs::write(&p, body)?;
        paths.push(p);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str, c: Preset, rep: usize, dur: f64, lag: f64) -> TokenRecord {
        TokenRecord {
            speaker: s.into(),
            condition: c,
            item: "x".into(),
            rep,
            g1_onset_ms: Some(0.0),
            g1_offset_ms: Some(dur),
            g2_onset_ms: Some(lag),
            g1_duration_ms: Some(dur),
            lag_ms: Some(lag),
            tb_pos_mm: Some(lag / 10.0),
            tb_pos_z: None,
            excluded: false,
            exclusion_reason: None,
        }
    }

    #[test]
    fn two_by_two_grid_has_four_panels() {
        let mut tokens = Vec::new();
        for s in ["S1", "S2"] {
            for c in [Preset::Underlying, Preset::Assimilatory] {
                for i in 0..5 {
                    tokens.push(tok(s, c, i, 200.0 + i as f64, 30.0 + i as f64));
                }
            }
        }
        let svg = scatter_svg(&tokens, &[]).unwrap();
        assert_eq!(svg.matches(r#"class="panel""#).count(), 4);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("slope = NA"));
    }

    #[test]
    fn identical_lags_render() {
        let tokens: Vec<_> = (0..6).map(|i| tok("S1", Preset::Underlying, i, 200.0, 30.0)).collect();
        let b = BoxStats::from_values(&[30.0; 6]).unwrap();
        assert_eq!((b.whisker_lo, b.q1, b.median, b.q3, b.whisker_hi), (30.0, 30.0, 30.0, 30.0, 30.0));
        assert!(lag_boxplot_svg(&tokens).unwrap().contains("<rect"));
    }

    #[test]
    fn box_stats_quartiles() {
        let b = BoxStats::from_values(&[1.0, 2.0, 3.0, 4.0, 5.0, 100.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.25, 3.5, 4.75));
        assert_eq!(b.whisker_hi, 5.0);
        assert_eq!(b.outliers, vec![100.0]);
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(matches!(scatter_svg(&[], &[]), Err(Error::Data(_))));
        assert!(emit_plots(&[], &[], Path::new("/nonexistent")).is_err());
    }
}
