//! Trace, summary and plot files.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::geometry::{Feature, Shape};
use crate::math::Vec2;

use super::metrics::Summary;
use super::sim::Trace;

pub const CSV_HEADER: &str = "t,robot,x,y,theta,v,omega,u_r,u_l,mode,d_o,e_y,s_eta,s_xi,s_zeta";

/// Formats `x` with 9 significant digits, `%g` style.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_csv<W: Write>(trace: &Trace, mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let mut line = String::with_capacity(256);
    for r in &trace.rows {
        line.clear();
        let s = &r.state;
        let _ = write!(line, "{},{}", sig9(r.t), trace.robot_names[r.robot]);
        for v in [
            s.x,
            s.y,
            s.theta,
            s.v,
            s.omega,
            r.command.u_r,
            r.command.u_l,
        ] {
            let _ = write!(line, ",{}", sig9(v));
        }
        let _ = write!(line, ",{}", r.mode);
        for v in [r.d_o, r.e_y, r.s_eta, r.s_xi, r.s_zeta] {
            let _ = write!(line, ",{}", sig9(v));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn csv_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_csv(trace, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

pub fn summary_json(summary: &Summary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serializes")
}

struct Frame {
    min: Vec2,
    max: Vec2,
}

impl Frame {
    fn new() -> Self {
        Self {
            min: Vec2::new(f64::INFINITY, f64::INFINITY),
            max: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn include(&mut self, p: Vec2, pad: f64) {
        self.min = Vec2::new(self.min.x.min(p.x - pad), self.min.y.min(p.y - pad));
        self.max = Vec2::new(self.max.x.max(p.x + pad), self.max.y.max(p.y + pad));
    }
}

fn circle_path(c: Vec2, r: f64) -> String {
    format!(
        "M {} {} A {r} {r} 0 1 0 {} {} A {r} {r} 0 1 0 {} {} Z",
        c.x + r,
        c.y,
        c.x - r,
        c.y,
        c.x + r,
        c.y
    )
}

fn points(ps: impl Iterator<Item = Vec2>) -> String {
    let mut s = String::new();
    for p in ps {
        let _ = write!(s, "{:.4},{:.4} ", p.x, p.y);
    }
    s.trim_end().to_string()
}

const ROBOT_COLORS: [&str; 4] = ["#1f5fbf", "#2a9d3a", "#9b3dbf", "#c07a00"];

/// SVG plot: one `<path>` per robot trajectory and one per feature band, with
/// safety-mode stretches overlaid as red polylines and references dashed.
pub fn svg(trace: &Trace, features: &[Feature]) -> String {
    const STRIDE: usize = 10;
    let mut frame = Frame::new();
    for r in &trace.rows {
        frame.include(Vec2::new(r.state.x, r.state.y), 0.0);
        frame.include(Vec2::new(r.reference.0, r.reference.1), 0.0);
    }
    let last_pos = |robot: usize| {
        trace
            .final_states
            .get(robot)
            .map(|s| s.position())
            .unwrap_or(Vec2::ZERO)
    };
    for f in features {
        match &f.shape {
            Shape::Disc { center, radius } => frame.include(*center, radius + f.safe_distance),
            Shape::Polyline { vertices } => vertices
                .iter()
                .for_each(|v| frame.include(*v, f.safe_distance)),
            Shape::MovingPoint { robot } => frame.include(last_pos(*robot), f.safe_distance),
        }
    }
    if !frame.min.x.is_finite() {
        frame.include(Vec2::ZERO, 1.0);
    }
    let pad = 0.2;
    let (w, h) = (
        frame.max.x - frame.min.x + 2.0 * pad,
        frame.max.y - frame.min.y + 2.0 * pad,
    );

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="{:.4} {:.4} {:.4} {:.4}">"#,
        w * 200.0,
        h * 200.0,
        frame.min.x - pad,
        -(frame.max.y + pad),
        w,
        h
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, trace.scenario);
    let _ = writeln!(
        s,
        r#"<g transform="scale(1,-1)" fill="none" stroke-linejoin="round" stroke-linecap="round">"#
    );

    for f in features {
        match &f.shape {
            Shape::Disc { center, radius } => {
                let _ = writeln!(
                    s,
                    r##"<path class="band" d="{}" fill="#d04040" fill-opacity="0.12" stroke="#d04040" stroke-width="0.004"/>"##,
                    circle_path(*center, radius + f.safe_distance)
                );
                let _ = writeln!(
                    s,
                    r##"<circle cx="{}" cy="{}" r="{}" fill="#000"/>"##,
                    center.x,
                    center.y,
                    radius.max(0.015)
                );
            }
            Shape::Polyline { vertices } => {
                let d = format!(
                    "M {} Z",
                    points(vertices.iter().copied()).replace(' ', " L ")
                );
                let _ = writeln!(
                    s,
                    r##"<path class="band" d="{d}" stroke="#d04040" stroke-opacity="0.15" stroke-width="{}"/>"##,
                    2.0 * f.safe_distance
                );
                let _ = writeln!(
                    s,
                    r##"<polygon points="{}" stroke="#000" stroke-width="0.01"/>"##,
                    points(vertices.iter().copied())
                );
            }
            Shape::MovingPoint { robot } => {
                let _ = writeln!(
                    s,
                    r##"<path class="band" d="{}" fill="#d04040" fill-opacity="0.08" stroke="#d04040" stroke-width="0.004"/>"##,
                    circle_path(last_pos(*robot), f.safe_distance)
                );
            }
        }
    }

    for (i, _) in trace.robot_names.iter().enumerate() {
        let color = ROBOT_COLORS[i % ROBOT_COLORS.len()];
        let rows: Vec<_> = trace.robot_rows(i).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="reference" points="{}" stroke="{color}" stroke-opacity="0.5" stroke-width="0.006" stroke-dasharray="0.03 0.02"/>"#,
            points(
                rows.iter()
                    .step_by(STRIDE)
                    .map(|r| Vec2::new(r.reference.0, r.reference.1))
            )
        );
        let path = points(
            rows.iter()
                .step_by(STRIDE)
                .map(|r| Vec2::new(r.state.x, r.state.y)),
        );
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<path class="robot" d="M {}" stroke="{color}" stroke-width="0.012"/>"#,
                path.replace(' ', " L ")
            );
        }
        // Safety-mode stretches.
        let mut k = 0;
        while k < rows.len() {
            if !rows[k].mode.is_safety() {
                k += 1;
                continue;
            }
            let start = k;
            while k < rows.len() && rows[k].mode.is_safety() {
                k += 1;
            }
            let seg = rows[start..k]
                .iter()
                .step_by(STRIDE)
                .chain(std::iter::once(&rows[k - 1]));
            let _ = writeln!(
                s,
                r##"<polyline class="safety" points="{}" stroke="#e03030" stroke-width="0.012"/>"##,
                points(seg.map(|r| Vec2::new(r.state.x, r.state.y)))
            );
        }
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Files written for one run.
#[derive(Clone, Debug, Default)]
pub struct Written {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub svg: Option<PathBuf>,
}

pub fn write_all(
    dir: &Path,
    trace: &Trace,
    summary: &Summary,
    features: &[Feature],
    with_svg: bool,
) -> io::Result<Written> {
    std::fs::create_dir_all(dir)?;
    let stem = sanitize(&trace.scenario);
    let trace_path = dir.join(format!("{stem}.csv"));
    write_csv(
        trace,
        io::BufWriter::new(std::fs::File::create(&trace_path)?),
    )?;
    let summary_path = dir.join(format!("{stem}.summary.json"));
    std::fs::write(&summary_path, summary_json(summary) + "\n")?;
    let svg_path = if with_svg {
        let p = dir.join(format!("{stem}.svg"));
        std::fs::write(&p, svg(trace, features))?;
        Some(p)
    } else {
        None
    };
    Ok(Written {
        trace: trace_path,
        summary: summary_path,
        svg: svg_path,
    })
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "scenario".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(-0.5), "-0.5");
        assert_eq!(sig9(std::f64::consts::PI), "3.14159265");
        assert_eq!(sig9(123456789.4), "123456789");
        assert_eq!(sig9(1.5e9), "1.5e9");
        assert_eq!(sig9(1.23456789012e-7), "1.23456789e-7");
        assert_eq!(sig9(0.000123456789012), "0.000123456789");
        assert_eq!(sig9(9.9999999999), "10");
        assert_eq!(sig9(f64::NAN), "nan");
    }

    #[test]
    fn digits_round_trip_to_nine_places() {
        for &x in &[0.123456789123, -42.000000017, 7.77e-12, 6.02214076e23] {
            let y: f64 = sig9(x).parse().unwrap();
            assert!(((x - y) / x).abs() < 5e-9, "{x} {y}");
        }
    }

    #[test]
    fn sanitized_names() {
        assert_eq!(sanitize("border patrol/2"), "border_patrol_2");
        assert_eq!(sanitize(""), "scenario");
    }
}
