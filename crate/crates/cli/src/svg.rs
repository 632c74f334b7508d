//! Heatmaps of interaction maps as standalone SVG.
//!
//! The `[min, max]` range is split into quartiles shown as blue, green,
//! orange and red; colors interpolate linearly between the quartile centers.
//! Output depends only on the inputs.

use std::fmt::Write;

use banzhaf_core::Matrix;

const CELL: usize = 28;
const LEFT: usize = 90;
const TOP: usize = 70;
const STOPS: [(f64, [u8; 3]); 4] = [
    (0.125, [49, 99, 206]),
    (0.375, [60, 170, 90]),
    (0.625, [240, 150, 40]),
    (0.875, [210, 40, 40]),
];

pub struct Heatmap<'a> {
    pub title: &'a str,
    pub values: &'a Matrix,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

/// Position of `v` in `[min, max]`, 0.5 for a constant map.
fn unit(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

pub fn color(t: f64) -> [u8; 3] {
    if t <= STOPS[0].0 {
        return STOPS[0].1;
    }
    for w in STOPS.windows(2) {
        let ((t0, c0), (t1, c1)) = (w[0], w[1]);
        if t <= t1 {
            let f = (t - t0) / (t1 - t0);
            let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
            return [mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2])];
        }
    }
    STOPS[3].1
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render(h: &Heatmap) -> String {
    let (rows, cols) = h.values.shape();
    let (min, max) = (h.values.min(), h.values.max());
    let width = LEFT + cols * CELL + 20;
    let height = TOP + rows * CELL + 60;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="10">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="14" font-size="12">{}</text>"#,
        escape(h.title)
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="30">min = {min:.6e}  max = {max:.6e}</text>"#
    );
    for (c, label) in h.col_labels.iter().enumerate().take(cols) {
        let x = LEFT + c * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" transform="rotate(-60 {x} {})" >{}</text>"#,
            TOP - 4,
            TOP - 4,
            escape(label)
        );
    }
    for r in 0..rows {
        let y = TOP + r * CELL;
        if let Some(label) = h.row_labels.get(r) {
            let _ = writeln!(
                s,
                r#"<text x="4" y="{}">{}</text>"#,
                y + CELL / 2 + 3,
                escape(label)
            );
        }
        for c in 0..cols {
            let v = h.values.get(r, c);
            let [red, green, blue] = color(unit(v, min, max));
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{y}" width="{CELL}" height="{CELL}" fill="#{red:02x}{green:02x}{blue:02x}"><title>({r},{c}) {v:.6e}</title></rect>"##,
                LEFT + c * CELL
            );
        }
    }
    let ly = TOP + rows * CELL + 16;
    for (k, (t, _)) in STOPS.iter().enumerate() {
        let [red, green, blue] = color(*t);
        let x = LEFT + k * 60;
        // lower edge of the quartile
        let v = min + 0.25 * k as f64 * (max - min);
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{ly}" width="12" height="12" fill="#{red:02x}{green:02x}{blue:02x}"/><text x="{}" y="{}">{v:.3e}</text>"##,
            x + 15,
            ly + 10
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `"{prefix}{index}"`, extended with `:c{cluster}` when a cluster id is known.
pub fn labels(prefix: &str, count: usize, clusters: Option<&[usize]>) -> Vec<String> {
    (0..count)
        .map(|i| match clusters.and_then(|c| c.get(i)) {
            Some(c) => format!("{prefix}{i}:c{c}"),
            None => format!("{prefix}{i}"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_endpoints_and_constant_map() {
        assert_eq!(color(0.0), STOPS[0].1);
        assert_eq!(color(1.0), STOPS[3].1);
        assert_eq!(color(0.625), STOPS[2].1);
        assert_eq!(color(0.25), [55, 135, 148]);
        assert_eq!(unit(3.0, 3.0, 3.0), 0.5);
    }

    #[test]
    fn render_is_deterministic_and_annotated() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [-2.0, 0.5]]).unwrap();
        let h = Heatmap {
            title: "t<1>",
            values: &m,
            row_labels: labels("v", 2, Some(&[0, 1])),
            col_labels: labels("w", 2, None),
        };
        let a = render(&h);
        assert_eq!(a, render(&h));
        assert!(a.contains("min = -2.000000e0"));
        assert!(a.contains("max = 1.000000e0"));
        assert!(a.contains("v1:c1"));
        assert!(a.contains("t&lt;1&gt;"));
        assert_eq!(a.matches("<rect x=").count(), 4 + 4);
    }
}
