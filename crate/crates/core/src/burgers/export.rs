//! CSV and SVG renderings of height slices and shock diagrams.

use super::{HeightField, ShockRecord};
use std::fmt::Write;

/// `t,x,h` rows for each slice on `n` equally spaced abscissas in `[−c·t, c·t]`
/// widened by one unit.
pub fn height_slices_csv(field: &HeightField, cone_radius: f64, n: usize) -> String {
    let mut s = String::from("t,x,h\n");
    for (t, h) in &field.slices {
        let half = cone_radius * t + 1.0;
        for i in 0..=n {
            let x = -half + 2.0 * half * i as f64 / n as f64;
            let _ = writeln!(s, "{t},{x},{}", h.eval(x));
        }
    }
    s
}

/// `record,t,x,v_left,v_right,class` rows.
pub fn shocks_csv(records: &[ShockRecord]) -> String {
    let mut s = String::from("record,t,x,v_left,v_right,class\n");
    for (i, r) in records.iter().enumerate() {
        for p in &r.samples {
            let _ = writeln!(s, "{i},{},{},{},{},{}", p.t, p.x, p.v_left, p.v_right, r.class.as_str());
        }
    }
    s
}

/// Shock paths (solid) and characteristics traced back from `t = 1`
/// (dashed) in the `(x, t)` plane, time increasing upwards.
///
/// `characteristics` holds `(x, u)` pairs at `t = 1`; each is drawn along
/// `x(t) = x + (1 − t)u/2` until it meets a shock.
pub fn characteristics_svg(records: &[ShockRecord], characteristics: &[(f64, f64)], cone_radius: f64) -> String {
    let w = cone_radius + 1.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} 0 {} 1" preserveAspectRatio="none">"#,
        -w,
        2.0 * w
    );
    let stroke = 2.0 * w / 400.0;
    for &(x1, u) in characteristics {
        let at = |t: f64| x1 + (1.0 - t) * u / 2.0;
        let mut t_end = 0.0;
        for r in records {
            for win in r.samples.windows(2) {
                let (a, b) = (&win[0], &win[1]);
                let (da, db) = (at(a.t) - a.x, at(b.t) - b.x);
                if da * db < 0.0 {
                    let tc = a.t + (b.t - a.t) * da / (da - db);
                    if tc < 1.0 - 1e-12 {
                        t_end = f64::max(t_end, tc);
                    }
                }
            }
        }
        let _ = writeln!(
            s,
            r#"<line x1="{x1}" y1="0" x2="{}" y2="{}" stroke="gray" stroke-width="{stroke}" stroke-dasharray="{} {}"/>"#,
            at(t_end),
            1.0 - t_end,
            4.0 * stroke,
            3.0 * stroke
        );
    }
    for r in records {
        let pts: Vec<String> = r.samples.iter().map(|p| format!("{},{}", p.x, 1.0 - p.t)).collect();
        let color = match r.class {
            super::ShockClass::NonEntropy => "black",
            super::ShockClass::Entropy => "red",
            super::ShockClass::Contact => "blue",
        };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{}"/>"#,
            pts.join(" "),
            2.0 * stroke
        );
    }
    s.push_str("</svg>\n");
    s
}
