//! Radar charts (SVG) and the text trait table.
//!
//! Output is a pure function of the input: fixed palette, fixed axis angles,
//! fixed decimal precision.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{SocialProfile, SocialTraits, AXIS_LABELS, NORMALIZATION};

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const GRID_LEVELS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSeries {
    pub name: String,
    pub values: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSpec {
    pub axes: [String; 5],
    pub series: Vec<RadarSeries>,
    /// All series on one pentagon, or one panel per series.
    pub overlay: bool,
    pub width: f64,
    pub height: f64,
    /// Footnote printed under the chart.
    pub note: String,
}

impl RadarSpec {
    pub fn from_profiles(profiles: &[SocialProfile], overlay: bool) -> Self {
        RadarSpec {
            axes: AXIS_LABELS.map(String::from),
            series: profiles
                .iter()
                .map(|p| RadarSeries {
                    name: p.traits.wearer_id.clone(),
                    values: p.normalized_axes,
                })
                .collect(),
            overlay,
            width: 640.0,
            height: 560.0,
            note: format!("axes: {NORMALIZATION}; compare within this cohort only"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::EmptyChart);
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::InvalidParameter("canvas must have positive size".into()));
        }
        for s in &self.series {
            if s.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParameter(format!(
                    "series {:?} has values outside [0, 1]",
                    s.name
                )));
            }
        }
        Ok(())
    }
}

/// Angle of axis `i` in degrees, counter-clockwise from the positive x axis.
pub fn axis_angle_deg(i: usize) -> f64 {
    90.0 - 72.0 * i as f64
}

/// Point at normalized radius `value` on axis `i`, in SVG coordinates (y down).
pub fn vertex(cx: f64, cy: f64, radius: f64, i: usize, value: f64) -> (f64, f64) {
    let a = axis_angle_deg(i).to_radians();
    (cx + radius * value * a.cos(), cy - radius * value * a.sin())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn points(cx: f64, cy: f64, radius: f64, values: &[f64; 5]) -> String {
    (0..5)
        .map(|i| {
            let (x, y) = vertex(cx, cy, radius, i, values[i]);
            format!("{x:.6},{y:.6}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

struct Panel {
    cx: f64,
    cy: f64,
    radius: f64,
}

fn draw_frame(svg: &mut String, p: &Panel, axes: &[String; 5]) {
    let _ = writeln!(
        svg,
        r#"  <g class="frame" data-cx="{:.6}" data-cy="{:.6}" data-r="{:.6}">"#,
        p.cx, p.cy, p.radius
    );
    for level in GRID_LEVELS {
        let _ = writeln!(
            svg,
            r##"    <polygon class="grid" points="{}" fill="none" stroke="#cccccc" stroke-width="1"/>"##,
            points(p.cx, p.cy, p.radius, &[level; 5])
        );
    }
    for (i, label) in axes.iter().enumerate() {
        let (x, y) = vertex(p.cx, p.cy, p.radius, i, 1.0);
        let _ = writeln!(
            svg,
            r##"    <line class="axis" x1="{:.6}" y1="{:.6}" x2="{x:.6}" y2="{y:.6}" stroke="#999999" stroke-width="1"/>"##,
            p.cx, p.cy
        );
        let (lx, ly) = vertex(p.cx, p.cy, p.radius, i, 1.12);
        let anchor = match lx.partial_cmp(&p.cx) {
            Some(std::cmp::Ordering::Less) if (lx - p.cx).abs() > 1e-6 => "end",
            Some(std::cmp::Ordering::Greater) if (lx - p.cx).abs() > 1e-6 => "start",
            _ => "middle",
        };
        let _ = writeln!(
            svg,
            r#"    <text class="axis-label" x="{lx:.6}" y="{ly:.6}" text-anchor="{anchor}" font-size="12">{}</text>"#,
            escape(label)
        );
    }
    svg.push_str("  </g>\n");
}

fn draw_series(svg: &mut String, p: &Panel, index: usize, s: &RadarSeries) {
    let color = PALETTE[index % PALETTE.len()];
    let _ = writeln!(
        svg,
        r#"  <polygon class="series" data-series="{}" data-cx="{:.6}" data-cy="{:.6}" data-r="{:.6}" points="{}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="2"/>"#,
        escape(&s.name),
        p.cx,
        p.cy,
        p.radius,
        points(p.cx, p.cy, p.radius, &s.values)
    );
}

/// Renders the chart as an SVG document.
pub fn render_radar(spec: &RadarSpec) -> Result<String> {
    spec.validate()?;
    let legend_h = 20.0 * spec.series.len() as f64 + 40.0;
    let plot_h = (spec.height - legend_h).max(spec.height * 0.5);
    let panels: Vec<Panel> = if spec.overlay {
        vec![Panel {
            cx: spec.width / 2.0,
            cy: plot_h / 2.0,
            radius: 0.35 * spec.width.min(plot_h),
        }]
    } else {
        let w = spec.width / spec.series.len() as f64;
        (0..spec.series.len())
            .map(|k| Panel {
                cx: w * (k as f64 + 0.5),
                cy: plot_h / 2.0,
                radius: 0.35 * w.min(plot_h),
            })
            .collect()
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.6} {:.6}" font-family="sans-serif">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(svg, r#"  <rect width="100%" height="100%" fill="white"/>"#);
    for (k, panel) in panels.iter().enumerate() {
        draw_frame(&mut svg, panel, &spec.axes);
        if spec.overlay {
            for (i, s) in spec.series.iter().enumerate() {
                draw_series(&mut svg, panel, i, s);
            }
        } else {
            draw_series(&mut svg, panel, k, &spec.series[k]);
        }
    }

    let mut y = plot_h + 10.0;
    svg.push_str("  <g class=\"legend\">\n");
    for (i, s) in spec.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"    <rect x="20" y="{y:.6}" width="12" height="12" fill="{color}"/>"#
        );
        let _ = writeln!(
            svg,
            r#"    <text x="38" y="{:.6}" font-size="12">{}</text>"#,
            y + 10.0,
            escape(&s.name)
        );
        y += 20.0;
    }
    svg.push_str("  </g>\n");
    let _ = writeln!(
        svg,
        r##"  <text class="note" x="20" y="{:.6}" font-size="10" fill="#555555">{}</text>"##,
        y + 10.0,
        escape(&spec.note)
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Recovers each series' normalized values from rendered SVG.
pub fn parse_radar_values(svg: &str) -> Result<Vec<(String, [f64; 5])>> {
    fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
        let key = format!(" {name}=\"");
        let start = tag.find(&key)? + key.len();
        let len = tag[start..].find('"')?;
        Some(&tag[start..start + len])
    }
    let num = |s: Option<&str>| -> Result<f64> {
        s.and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::InvalidParameter("malformed radar polygon".into()))
    };
    let mut out = Vec::new();
    for line in svg.lines().filter(|l| l.contains(r#"class="series""#)) {
        let (cx, cy, r) = (
            num(attr(line, "data-cx"))?,
            num(attr(line, "data-cy"))?,
            num(attr(line, "data-r"))?,
        );
        let name = attr(line, "data-series").unwrap_or_default().to_string();
        let pts = attr(line, "points").unwrap_or_default();
        let mut values = [0.0; 5];
        let mut count = 0;
        for (i, p) in pts.split_whitespace().enumerate().take(5) {
            let (x, y) = p
                .split_once(',')
                .ok_or_else(|| Error::InvalidParameter("malformed point".into()))?;
            let (x, y) = (num(Some(x))?, num(Some(y))?);
            values[i] = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / r;
            count += 1;
        }
        if count != 5 {
            return Err(Error::InvalidParameter("radar polygon needs five vertices".into()));
        }
        out.push((name, values));
    }
    Ok(out)
}

/// Formats minutes as `"{h}h {m}m"`, rounded to the nearest minute.
pub fn format_hm(minutes: f64) -> String {
    let total = minutes.round().max(0.0) as i64;
    format!("{}h {}m", total / 60, total % 60)
}

pub fn parse_hm(s: &str) -> Result<f64> {
    let bad = || Error::TableParse(format!("bad duration {s:?}"));
    let (h, rest) = s.trim().split_once("h ").ok_or_else(bad)?;
    let m = rest.strip_suffix('m').ok_or_else(bad)?;
    let h: i64 = h.parse().map_err(|_| bad())?;
    let m: i64 = m.parse().map_err(|_| bad())?;
    if !(0..60).contains(&m) || h < 0 {
        return Err(bad());
    }
    Ok((h * 60 + m) as f64)
}

/// Up to two decimals, trailing zeros dropped.
pub fn format_number(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub const TABLE_HEADER: &str = "Wearer | Num p/day | Avg int/day | Avg t/int | Avg t/p | Avg t/alone";

/// One row without the wearer column, e.g. `9 | 12 | 12 | 12 | 8h 23m`.
pub fn trait_row(t: &SocialTraits) -> String {
    format!(
        "{} | {} | {} | {} | {}",
        format_number(t.num_p_day),
        format_number(t.inter_day),
        format_number(t.t_inter),
        format_number(t.t_p),
        format_hm(t.t_alone)
    )
}

pub fn render_table(traits: &[SocialTraits]) -> String {
    let mut s = String::new();
    s.push_str(TABLE_HEADER);
    s.push('\n');
    s.push_str(&"-".repeat(TABLE_HEADER.len()));
    s.push('\n');
    for t in traits {
        let _ = writeln!(s, "{} | {}", t.wearer_id, trait_row(t));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub wearer_id: String,
    /// `[num_p_day, inter_day, t_inter, t_p, t_alone_minutes]`
    pub values: [f64; 5],
}

/// Parses the output of [`render_table`]; lines starting with `#` are skipped.
pub fn parse_table(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some(h) if h == TABLE_HEADER => {}
        _ => return Err(Error::TableParse("missing header".into())),
    }
    lines.next();
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(" | ").collect();
            if cells.len() != 6 {
                return Err(Error::TableParse(format!("expected 6 cells in {l:?}")));
            }
            let mut values = [0.0; 5];
            for k in 0..4 {
                values[k] = cells[k + 1]
                    .parse()
                    .map_err(|_| Error::TableParse(format!("bad number {:?}", cells[k + 1])))?;
            }
            values[4] = parse_hm(cells[5])?;
            Ok(TableRow {
                wearer_id: cells[0].to_string(),
                values,
            })
        })
        .collect()
}
