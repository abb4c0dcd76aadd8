use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Tag;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::protocol::{cell_stats, ExperimentRecord};
use crate::resample::Method;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HeatCell {
    /// Below the diagonal (osr < usr).
    Masked,
    /// Allowed but not run.
    Empty,
    Timeout,
    Value(f64),
}

/// Mean test f1 over the USR×OSR grid of one (method, sampling).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub title: String,
    pub usr: Vec<f64>,
    pub osr: Vec<f64>,
    /// `cells[i][j]` is the cell at `usr[i]`, `osr[j]`.
    pub cells: Vec<Vec<HeatCell>>,
    pub scale: (f64, f64),
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl Heatmap {
    /// Builds the grid from a lookup; cells with osr < usr are masked.
    pub fn new(
        title: impl Into<String>,
        usr: Vec<f64>,
        osr: Vec<f64>,
        lookup: impl Fn(f64, f64) -> HeatCell,
    ) -> Self {
        let usr = sorted_unique(usr);
        let osr = sorted_unique(osr);
        let cells: Vec<Vec<HeatCell>> = usr
            .iter()
            .map(|&u| {
                osr.iter()
                    .map(|&o| {
                        if o < u {
                            HeatCell::Masked
                        } else {
                            lookup(u, o)
                        }
                    })
                    .collect()
            })
            .collect();
        let values: Vec<f64> = cells
            .iter()
            .flatten()
            .filter_map(|c| {
                if let HeatCell::Value(v) = c {
                    Some(*v)
                } else {
                    None
                }
            })
            .collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = if values.is_empty() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            ((lo - 0.005).max(0.0), (hi + 0.005).min(1.0))
        } else {
            (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
        };
        Self {
            title: title.into(),
            usr,
            osr,
            cells,
            scale,
        }
    }

    /// Heatmap of `method`/`sampling`; the diagonal (no oversampling) comes
    /// from the undersampling-only records.
    pub fn from_records(records: &[ExperimentRecord], method: &str, sampling: &str) -> Self {
        let stats = cell_stats(records);
        let under = Method::RandomUnder.id();
        let own: Vec<_> = stats
            .iter()
            .filter(|c| c.method == method && c.sampling == sampling)
            .collect();
        let diag: Vec<_> = stats.iter().filter(|c| c.method == under).collect();
        let usr: Vec<f64> = own.iter().chain(&diag).map(|c| c.usr).collect();
        let osr: Vec<f64> = own
            .iter()
            .map(|c| c.osr)
            .chain(diag.iter().map(|c| c.usr))
            .collect();
        let cell_of = |c: &crate::protocol::CellStat| {
            if c.timeout {
                HeatCell::Timeout
            } else {
                HeatCell::Value(c.test_mean)
            }
        };
        let title = if sampling.is_empty() {
            method.to_string()
        } else {
            format!("{method} ({sampling})")
        };
        Self::new(title, usr, osr, |u, o| {
            let hit = if o == u {
                diag.iter().find(|c| c.usr == u)
            } else {
                own.iter().find(|c| c.usr == u && c.osr == o)
            };
            hit.map_or(HeatCell::Empty, |c| cell_of(c))
        })
    }

    pub fn filled(&self) -> usize {
        self.cells
            .iter()
            .flatten()
            .filter(|c| matches!(c, HeatCell::Value(_) | HeatCell::Timeout))
            .count()
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const STOPS: [(f64, [u8; 3]); 5] = [
    (0.0, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.5, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

/// Viridis-like colour for `t` in [0, 1].
pub fn colour(t: f64) -> String {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let k = STOPS
        .windows(2)
        .position(|w| t <= w[1].0)
        .unwrap_or(STOPS.len() - 2);
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let f = (t - a.0) / (b.0 - a.0);
    let mix = |i: usize| (a.1[i] as f64 + f * (b.1[i] as f64 - a.1[i] as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(0), mix(1), mix(2))
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

/// USR on the vertical axis, OSR on the horizontal one.
pub fn render_heatmap(map: &Heatmap) -> String {
    let cell = 52.0;
    let (left, top) = (80.0, 40.0);
    let w = left + cell * map.osr.len() as f64 + 120.0;
    let h = top + cell * map.usr.len() as f64 + 60.0;
    let mut s = String::new();
    header(&mut s, w, h, &map.title);
    let (lo, hi) = map.scale;
    for (i, u) in map.usr.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell / 2.0 + 4.0,
            crate::protocol::ratio_label(*u)
        );
        for (j, c) in map.cells[i].iter().enumerate() {
            let x = left + cell * j as f64;
            match c {
                HeatCell::Masked | HeatCell::Empty => {}
                HeatCell::Timeout => {
                    let _ = writeln!(
                        s,
                        r##"<rect class="cell timeout" x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="#bbbbbb" stroke="white"/>"##
                    );
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="middle">timeout</text>"#,
                        x + cell / 2.0,
                        y + cell / 2.0 + 3.0
                    );
                }
                HeatCell::Value(v) => {
                    let t = (v - lo) / (hi - lo);
                    let ink = if t > 0.6 { "black" } else { "white" };
                    let _ = writeln!(
                        s,
                        r#"<rect class="cell" data-usr="{u}" data-osr="{o}" data-value="{v}" x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="{}" stroke="white"/>"#,
                        colour(t),
                        o = map.osr[j]
                    );
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle" fill="{ink}">{v:.3}</text>"#,
                        x + cell / 2.0,
                        y + cell / 2.0 + 4.0
                    );
                }
            }
        }
    }
    let base = top + cell * map.usr.len() as f64;
    for (j, o) in map.osr.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            left + cell * (j as f64 + 0.5),
            base + 16.0,
            crate::protocol::ratio_label(*o)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">OSR</text>"#,
        left + cell * map.osr.len() as f64 / 2.0,
        base + 36.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-size="12" transform="rotate(-90 16 {:.1})" text-anchor="middle">USR</text>"#,
        top + cell * map.usr.len() as f64 / 2.0,
        top + cell * map.usr.len() as f64 / 2.0
    );
    let lx = w - 90.0;
    for k in 0..10 {
        let t = 1.0 - k as f64 / 9.0;
        let _ = writeln!(
            s,
            r#"<rect class="legend" x="{lx:.1}" y="{:.1}" width="16" height="12" fill="{}"/>"#,
            top + 12.0 * k as f64,
            colour(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="10">{hi:.3}</text>"#,
        lx + 20.0,
        top + 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="10">{lo:.3}</text>"#,
        lx + 20.0,
        top + 118.0
    );
    s.push_str("</svg>\n");
    s
}

const TAG_COLOURS: [&str; 3] = ["#4c72b0", "#dd8452", "#55a868"];

/// 2-D scatter of tagged points.
pub fn render_scatter(title: &str, coords: &Matrix<f64>, tags: &[Tag]) -> Result<String> {
    if coords.cols() != 2 || coords.rows() != tags.len() {
        return Err(Error::Shape(format!(
            "scatter needs n×2 coordinates and n tags, got {:?} and {}",
            coords.shape(),
            tags.len()
        )));
    }
    let (size, pad) = (420.0, 40.0);
    let mut s = String::new();
    header(&mut s, size + 130.0, size + pad, title);
    let range = |c: usize| {
        let lo = coords
            .iter_rows()
            .map(|r| r[c])
            .fold(f64::INFINITY, f64::min);
        let hi = coords
            .iter_rows()
            .map(|r| r[c])
            .fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > 1e-12 {
            (lo, hi - lo)
        } else {
            (lo - 0.5, 1.0)
        }
    };
    let (x0, xs) = range(0);
    let (y0, ys) = range(1);
    let plot = size - 2.0 * pad;
    let _ = writeln!(
        s,
        r##"<rect x="{pad:.1}" y="{pad:.1}" width="{plot:.1}" height="{plot:.1}" fill="none" stroke="#888888"/>"##
    );
    for tag in Tag::ALL {
        let _ = writeln!(
            s,
            r#"<g class="{}" fill="{}" fill-opacity="0.7">"#,
            tag.as_str(),
            TAG_COLOURS[tag as usize]
        );
        for (r, t) in coords.iter_rows().zip(tags) {
            if *t == tag {
                let cx = pad + plot * (r[0] - x0) / xs;
                let cy = pad + plot * (1.0 - (r[1] - y0) / ys);
                let _ = writeln!(
                    s,
                    r#"<circle class="point" cx="{cx:.2}" cy="{cy:.2}" r="3"/>"#
                );
            }
        }
        s.push_str("</g>\n");
    }
    legend(&mut s, size + 10.0, pad);
    s.push_str("</svg>\n");
    Ok(s)
}

fn legend(s: &mut String, x: f64, y: f64) {
    for tag in Tag::ALL {
        let yy = y + 18.0 * tag as usize as f64;
        let _ = writeln!(
            s,
            r#"<rect class="legend" x="{x:.1}" y="{yy:.1}" width="12" height="12" fill="{}"/>"#,
            TAG_COLOURS[tag as usize]
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            x + 16.0,
            yy + 10.0,
            tag.as_str()
        );
    }
}

/// One pie glyph per SOM unit showing its tag mix. Each slice carries its
/// angle in degrees as `data-angle`.
pub fn render_som(
    title: &str,
    width: usize,
    height: usize,
    counts: &[[usize; 3]],
) -> Result<String> {
    if counts.len() != width * height {
        return Err(Error::Shape(format!(
            "{} cell counts for a {width}×{height} map",
            counts.len()
        )));
    }
    let cell = 40.0;
    let (left, top) = (20.0, 36.0);
    let radius = cell * 0.42;
    let mut s = String::new();
    header(
        &mut s,
        left + cell * width as f64 + 130.0,
        top + cell * height as f64 + 20.0,
        title,
    );
    for (u, c) in counts.iter().enumerate() {
        let cx = left + cell * ((u % width) as f64 + 0.5);
        let cy = top + cell * ((u / width) as f64 + 0.5);
        let total: usize = c.iter().sum();
        let _ = writeln!(
            s,
            r#"<g class="glyph" data-unit="{u}" data-count="{total}">"#
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{radius:.2}" fill="none" stroke="#dddddd"/>"##
        );
        let mut start = 0.0f64;
        for tag in Tag::ALL {
            let k = c[tag as usize];
            if k == 0 {
                continue;
            }
            let sweep = 360.0 * k as f64 / total as f64;
            let fill = TAG_COLOURS[tag as usize];
            if k == total {
                let _ = writeln!(
                    s,
                    r#"<circle class="slice" data-tag="{}" data-angle="360" cx="{cx:.2}" cy="{cy:.2}" r="{radius:.2}" fill="{fill}"/>"#,
                    tag.as_str()
                );
            } else {
                let point = |deg: f64| {
                    let a = (deg - 90.0).to_radians();
                    (cx + radius * a.cos(), cy + radius * a.sin())
                };
                let (x0, y0) = point(start);
                let (x1, y1) = point(start + sweep);
                let large = u8::from(sweep > 180.0);
                let _ = writeln!(
                    s,
                    r#"<path class="slice" data-tag="{}" data-angle="{sweep:.6}" d="M{cx:.2},{cy:.2} L{x0:.3},{y0:.3} A{radius:.2},{radius:.2} 0 {large} 1 {x1:.3},{y1:.3} Z" fill="{fill}"/>"#,
                    tag.as_str()
                );
            }
            start += sweep;
        }
        s.push_str("</g>\n");
    }
    legend(&mut s, left + cell * width as f64 + 10.0, top);
    s.push_str("</svg>\n");
    Ok(s)
}
