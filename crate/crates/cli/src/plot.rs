//! Static SVG trajectory overlays.

use std::fmt::Write as _;

use radioslam::pose_graph::{NodeId, Pose2};

pub struct Layer {
    pub label: String,
    pub color: String,
    /// One polyline per robot.
    pub paths: Vec<Vec<(f64, f64)>>,
}

impl Layer {
    pub fn from_robots(label: &str, color: &str, robots: &[Vec<Pose2<f64>>]) -> Self {
        Self {
            label: label.into(),
            color: color.into(),
            paths: robots.iter().map(|r| r.iter().map(|p| (p.x, p.y)).collect()).collect(),
        }
    }

    pub fn from_estimate(label: &str, color: &str, est: &[(NodeId, Pose2<f64>)]) -> Self {
        let mut paths: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut current = None;
        for (id, p) in est {
            if current != Some(id.robot) {
                paths.push(Vec::new());
                current = Some(id.robot);
            }
            paths.last_mut().unwrap().push((p.x, p.y));
        }
        Self {
            label: label.into(),
            color: color.into(),
            paths,
        }
    }
}

pub fn render(layers: &[Layer]) -> String {
    let pts = layers.iter().flat_map(|l| l.paths.iter().flatten());
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let scale = 800.0 / (x1 - x0).max(y1 - y0).max(1e-9);
    let pad = 20.0;
    let w = (x1 - x0) * scale + 2.0 * pad;
    let h = (y1 - y0) * scale + 2.0 * pad + 20.0 * layers.len() as f64;
    // y axis points up in the world frame
    let map = |x: f64, y: f64| (pad + (x - x0) * scale, pad + (y1 - y) * scale);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" font-family="sans-serif" font-size="12">"#
    );
    for layer in layers {
        for path in &layer.paths {
            let mut d = String::new();
            for (k, &(x, y)) in path.iter().enumerate() {
                let (px, py) = map(x, y);
                let _ = write!(d, "{}{px:.2},{py:.2}", if k == 0 { "M" } else { " L" });
            }
            let _ = writeln!(
                s,
                r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.2" opacity="0.8"/>"#,
                layer.color
            );
        }
    }
    let legend_top = (y1 - y0) * scale + 2.0 * pad;
    for (k, layer) in layers.iter().enumerate() {
        let y = legend_top + 20.0 * k as f64 + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{pad}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            pad + 24.0,
            layer.color,
            pad + 30.0,
            y + 4.0,
            layer.label
        );
    }
    s.push_str("</svg>\n");
    s
}
