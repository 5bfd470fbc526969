//! Static SVG heatmaps on a diverging blue-white-red scale.

use std::fmt::Write;

const NEG: [f64; 3] = [33.0, 102.0, 172.0];
const MID: [f64; 3] = [247.0, 247.0, 247.0];
const POS: [f64; 3] = [178.0, 24.0, 43.0];

/// Hex colour of `v` on a scale clamped to `[-1, 1]`.
pub fn diverging(v: f64) -> String {
    let t = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    let (from, to, w) = if t < 0.0 { (MID, NEG, -t) } else { (MID, POS, t) };
    let c: Vec<u8> = (0..3)
        .map(|i| (from[i] + (to[i] - from[i]) * w).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub struct Heatmap<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    /// `values[row][col]`, drawn top to bottom.
    pub values: &'a [Vec<f64>],
    pub row_labels: Vec<String>,
    pub col_labels: (String, String),
}

const CELL_AREA_W: f64 = 720.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const BAR_W: f64 = 16.0;

impl Heatmap<'_> {
    pub fn render(&self) -> String {
        let rows = self.values.len().max(1);
        let cols = self.values.first().map_or(1, Vec::len).max(1);
        let cell_w = CELL_AREA_W / cols as f64;
        let cell_h = (320.0 / rows as f64).clamp(8.0, 48.0);
        let height = cell_h * rows as f64;
        let total_w = LEFT + CELL_AREA_W + 90.0;
        let total_h = TOP + height + 50.0;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.0}" height="{total_h:.0}" viewBox="0 0 {total_w:.0} {total_h:.0}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{LEFT:.0}" y="22" font-size="14">{}</text>"#,
            escape(self.title)
        );
        let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
        for (r, row) in self.values.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                    LEFT + c as f64 * cell_w,
                    TOP + r as f64 * cell_h,
                    cell_w,
                    cell_h,
                    diverging(v)
                );
            }
        }
        let _ = writeln!(s, "</g>");
        for (r, label) in self.row_labels.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{:.0}" y="{:.3}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
                LEFT - 6.0,
                TOP + (r as f64 + 0.5) * cell_h,
                escape(label)
            );
        }
        let axis_y = TOP + height + 16.0;
        let _ = writeln!(
            s,
            r#"<text x="{LEFT:.0}" y="{axis_y:.0}">{}</text>"#,
            escape(&self.col_labels.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{axis_y:.0}" text-anchor="end">{}</text>"#,
            LEFT + CELL_AREA_W,
            escape(&self.col_labels.1)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{:.0}" text-anchor="middle">{}</text>"#,
            LEFT + CELL_AREA_W / 2.0,
            axis_y + 18.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.0}" transform="rotate(-90 14 {:.0})" text-anchor="middle">{}</text>"#,
            TOP + height / 2.0,
            TOP + height / 2.0,
            escape(self.y_label)
        );
        self.colour_bar(&mut s, height);
        s.push_str("</svg>\n");
        s
    }

    fn colour_bar(&self, s: &mut String, height: f64) {
        let x = LEFT + CELL_AREA_W + 20.0;
        let steps = 40;
        let h = height / steps as f64;
        let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
        for i in 0..steps {
            let v = 1.0 - 2.0 * (i as f64 + 0.5) / steps as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.0}" y="{:.3}" width="{BAR_W:.0}" height="{:.3}" fill="{}"/>"#,
                TOP + i as f64 * h,
                h,
                diverging(v)
            );
        }
        let _ = writeln!(s, "</g>");
        for (v, y) in [(1, TOP), (0, TOP + height / 2.0), (-1, TOP + height)] {
            let _ = writeln!(
                s,
                r#"<text x="{:.0}" y="{y:.3}" dominant-baseline="middle">{v}</text>"#,
                x + BAR_W + 4.0
            );
        }
    }
}

/// Averages consecutive columns so that at most `max_cols` remain.
pub fn downsample(values: &[Vec<f64>], max_cols: usize) -> Vec<Vec<f64>> {
    values
        .iter()
        .map(|row| {
            if row.len() <= max_cols {
                return row.clone();
            }
            let width = row.len().div_ceil(max_cols);
            row.chunks(width)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect()
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_endpoints() {
        assert_eq!(diverging(0.0), "#f7f7f7");
        assert_eq!(diverging(1.0), "#b2182b");
        assert_eq!(diverging(-1.0), "#2166ac");
        assert_eq!(diverging(7.0), diverging(1.0));
        assert_eq!(diverging(f64::NAN), diverging(0.0));
    }

    #[test]
    fn render_is_stable() {
        let values = vec![vec![0.5, -0.5, 0.0], vec![1.0, -1.0, 0.25]];
        let map = Heatmap {
            title: "t",
            x_label: "x",
            y_label: "y",
            values: &values,
            row_labels: vec!["a".into(), "b".into()],
            col_labels: ("0".into(), "2".into()),
        };
        let a = map.render();
        assert_eq!(a, map.render());
        assert_eq!(a.matches("<rect").count(), 1 + 6 + 40);
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
    }

    #[test]
    fn downsample_averages_chunks() {
        let row: Vec<f64> = (0..10).map(f64::from).collect();
        let out = downsample(&[row.clone()], 5);
        assert_eq!(out[0], vec![0.5, 2.5, 4.5, 6.5, 8.5]);
        assert_eq!(downsample(&[row.clone()], 20)[0], row);
    }
}
