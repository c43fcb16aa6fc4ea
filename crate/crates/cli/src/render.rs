//! SVG rendering of one frame: grid, ground-truth footprints and predicted
//! footprints, each with a heading tick from the center along `(d_x, d_y)`.

use std::fmt::Write;

use rqr3d::{corners_bev, encode, BevGridSpec, OrientedBox3D, Result, Vec2};

pub struct Layer<'a> {
    pub role: &'a str,
    pub stroke: &'a str,
    pub dash: Option<&'a str>,
    pub boxes: Vec<(OrientedBox3D, &'a str)>,
}

pub fn render_svg(grid: &BevGridSpec, px_per_m: f64, layers: &[Layer]) -> Result<String> {
    let side = grid.side_length();
    let size = side * px_per_m;
    let map = |p: Vec2| ((p.x - grid.origin.x) * px_per_m, (side - (p.y - grid.origin.y)) * px_per_m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" viewBox="0 0 {size:.3} {size:.3}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r##"<g class="grid" stroke="#e0e0e0" stroke-width="0.5">"##);
    for k in 0..=grid.cells_per_side {
        let t = k as f64 * grid.meters_per_cell * px_per_m;
        let _ = writeln!(s, r#"<line x1="{t:.3}" y1="0" x2="{t:.3}" y2="{size:.3}"/>"#);
        let _ = writeln!(s, r#"<line x1="0" y1="{t:.3}" x2="{size:.3}" y2="{t:.3}"/>"#);
    }
    let _ = writeln!(s, "</g>");
    for layer in layers {
        let dash = layer.dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let _ =
            writeln!(s, r#"<g class="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}>"#, layer.role, layer.stroke);
        for (b, name) in &layer.boxes {
            let pts: Vec<String> = corners_bev(b)
                .iter()
                .map(|&p| {
                    let (x, y) = map(p);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            let _ = writeln!(s, r#"<polygon class="{name}" points="{}"/>"#, pts.join(" "));
            let t = encode(b)?;
            let c = b.center_bev();
            let (x1, y1) = map(c);
            let (x2, y2) = map(c + Vec2::new(t.d_x, t.d_y));
            let _ = writeln!(s, r#"<line class="heading" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}"/>"#);
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}
