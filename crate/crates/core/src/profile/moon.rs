use serde::{Deserialize, Serialize};

use super::CaResult;
use crate::svg::{self, Svg};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoonStyle {
    pub size: f64,
    pub radius: f64,
    /// Fraction of the radius available to word glyphs.
    pub inner: f64,
    pub min_pt: f64,
    pub max_pt: f64,
    pub word_pt: f64,
    /// Nudging increment in degrees.
    pub nudge_deg: f64,
}

impl Default for MoonStyle {
    fn default() -> Self {
        MoonStyle {
            size: 720.0,
            radius: 220.0,
            inner: 0.8,
            min_pt: 7.0,
            max_pt: 16.0,
            word_pt: 15.0,
            nudge_deg: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordGlyph {
    pub label: String,
    /// Canvas position.
    pub x: f64,
    pub y: f64,
    /// Degrees, counter-clockwise from the first axis.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLabel {
    pub label: String,
    /// Angle of the standard coordinates, degrees in (−180, 180].
    pub raw_angle: f64,
    /// Angle after nudging.
    pub angle: f64,
    pub font_size: f64,
    /// Norm of the 2-D principal coordinates.
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoonPlotSpec {
    pub style: MoonStyle,
    pub words: Vec<WordGlyph>,
    pub features: Vec<FeatureLabel>,
}

fn first_two(v: &[f64]) -> (f64, f64) {
    (v.first().copied().unwrap_or(0.0), v.get(1).copied().unwrap_or(0.0))
}

/// Lays out a moon plot: words inside the disc at their principal
/// coordinates, features on the circle at the angle of their standard
/// coordinates, font size linear in principal-coordinate norm.
pub fn moon_plot(ca: &CaResult, style: &MoonStyle) -> MoonPlotSpec {
    let centre = style.size / 2.0;
    let word_xy: Vec<(f64, f64)> = ca.column_principal.iter().map(|c| first_two(c)).collect();
    let max_norm = word_xy.iter().map(|(x, y)| x.hypot(*y)).fold(0.0, f64::max);
    let scale = if max_norm > 0.0 {
        style.radius * style.inner / max_norm
    } else {
        0.0
    };
    let words = ca
        .column_labels
        .iter()
        .zip(&word_xy)
        .map(|(label, &(x, y))| WordGlyph {
            label: label.clone(),
            x: centre + x * scale,
            y: centre - y * scale,
            angle: y.atan2(x).to_degrees(),
        })
        .collect();

    let norms: Vec<f64> = ca
        .row_principal
        .iter()
        .map(|r| {
            let (x, y) = first_two(r);
            x.hypot(y)
        })
        .collect();
    let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut features: Vec<FeatureLabel> = ca
        .row_labels
        .iter()
        .zip(&ca.row_standard)
        .zip(&norms)
        .map(|((label, coords), &norm)| {
            let (x, y) = first_two(coords);
            let angle = y.atan2(x).to_degrees();
            let font_size = if hi > lo {
                style.min_pt + (norm - lo) / (hi - lo) * (style.max_pt - style.min_pt)
            } else {
                style.max_pt
            };
            FeatureLabel {
                label: label.clone(),
                raw_angle: angle,
                angle,
                font_size,
                norm,
            }
        })
        .collect();
    nudge(&mut features, style);
    MoonPlotSpec {
        style: style.clone(),
        words,
        features,
    }
}

/// Walks labels in angular order and pushes each one forward in fixed steps
/// until it clears its predecessor by half their summed font sizes (as arc length).
fn nudge(features: &mut [FeatureLabel], style: &MoonStyle) {
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| features[a].raw_angle.total_cmp(&features[b].raw_angle).then(a.cmp(&b)));
    for w in 1..order.len() {
        let (prev, cur) = (order[w - 1], order[w]);
        let gap = ((features[prev].font_size + features[cur].font_size) / 2.0 / style.radius).to_degrees();
        let floor = features[prev].angle;
        let mut a = features[cur].angle.max(floor);
        while a - floor < gap {
            a += style.nudge_deg;
        }
        features[cur].angle = a;
    }
}

impl MoonPlotSpec {
    pub fn to_svg(&self) -> String {
        let s = &self.style;
        let c = s.size / 2.0;
        let mut doc = Svg::new(s.size, s.size);
        doc.circle(c, c, s.radius, "none", "#444444");
        doc.line(c - s.radius, c, c + s.radius, c, "#bbbbbb", true);
        doc.line(c, c - s.radius, c, c + s.radius, "#bbbbbb", true);
        for f in &self.features {
            let t = f.angle.to_radians();
            let (x, y) = (c + (s.radius + 4.0) * t.cos(), c - (s.radius + 4.0) * t.sin());
            let left = t.cos() < 0.0;
            let rotate = if left { 180.0 - f.angle } else { -f.angle };
            let anchor = if left { "end" } else { "start" };
            doc.text(x, y, f.font_size, anchor, Some(rotate), &f.label);
        }
        for (i, w) in self.words.iter().enumerate() {
            let colour = svg::PALETTE[i % svg::PALETTE.len()];
            doc.circle(w.x, w.y, 3.0, colour, "none");
            doc.text(w.x, w.y - 6.0, s.word_pt, "middle", None, &w.label);
        }
        doc.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{appendix_table, correspondence_analysis};
    use super::*;

    #[test]
    fn largest_norm_gets_max_font() {
        let ca = correspondence_analysis(&appendix_table()).unwrap();
        let style = MoonStyle::default();
        let spec = moon_plot(&ca, &style);
        let top = spec.features.iter().max_by(|a, b| a.norm.total_cmp(&b.norm)).unwrap();
        assert_eq!(top.font_size, style.max_pt);
        assert!(spec.features.iter().all(|f| f.font_size >= style.min_pt && f.font_size <= style.max_pt));
    }

    #[test]
    fn nudging_preserves_order_and_separates() {
        let style = MoonStyle::default();
        let mk = |a: f64| FeatureLabel {
            label: String::new(),
            raw_angle: a,
            angle: a,
            font_size: 10.0,
            norm: 1.0,
        };
        let mut f = vec![mk(10.0), mk(10.0), mk(-5.0), mk(10.2)];
        nudge(&mut f, &style);
        let gap = (10.0 / style.radius).to_degrees();
        assert_eq!(f[0].angle, 10.0);
        assert!(f[1].angle - f[0].angle >= gap && f[1].angle - f[0].angle < gap + 0.5 + 1e-9);
        assert!(f[3].angle >= f[1].angle + gap);
        assert_eq!(f[2].angle, -5.0);
    }
}
