//! Step logs, curve snapshots, SVG figures and the run summary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use curveflow_core::{ControlCurve, StepRecord, Vec2};
use serde::Serialize;

pub const STEPS_HEADER: &str =
    "n,t,dt,F0,F_area,F_length,lambda0,lambda_area,lambda_length,newton_iters,residual,wall_ms";

pub const SAMPLES: usize = 512;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn steps_row(r: &StepRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.n,
        fmt_f64(r.t),
        opt(r.dt),
        fmt_f64(r.f0),
        opt(r.f_area),
        opt(r.f_length),
        opt(r.lambda0),
        opt(r.lambda_area),
        opt(r.lambda_length),
        r.newton_iters,
        fmt_f64(r.residual),
        opt(r.wall_ms),
    )
}

/// Appends one line per record to `steps.csv`.
pub struct StepsWriter {
    out: BufWriter<File>,
}

impl StepsWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{STEPS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &StepRecord) -> io::Result<()> {
        writeln!(self.out, "{}", steps_row(r))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Curve points at `SAMPLES` uniform parameters.
pub fn sample_curve(curve: &ControlCurve) -> Vec<Vec2> {
    (0..SAMPLES)
        .map(|i| {
            curve
                .eval(i as f64 / SAMPLES as f64, 0)
                .expect("position is always defined")
        })
        .collect()
}

pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("step_{step}.csv"))
}

pub fn write_snapshot(path: &Path, curve: &ControlCurve) -> io::Result<()> {
    let mut text = String::from("kind,x,y\n");
    let samples = sample_curve(curve);
    let rows = curve
        .points()
        .iter()
        .map(|p| ("control", p))
        .chain(samples.iter().map(|p| ("sample", p)));
    for (kind, p) in rows {
        writeln!(text, "{kind},{},{}", fmt_f64(p.x), fmt_f64(p.y)).unwrap();
    }
    fs::write(path, text)
}

/// Reads control points from a snapshot (`kind,x,y`, control rows only) or
/// from plain `x,y` lines. Blank lines and `#` comments are skipped.
pub fn read_control_points(path: &Path) -> io::Result<Vec<Vec2>> {
    let bad = |line: usize, msg: &str| {
        io::Error::new(
            io::ErrorKind::InvalidData,
            format!("{}:{line}: {msg}", path.display()),
        )
    };
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == "kind,x,y" || line == "x,y" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let coords = match fields.as_slice() {
            ["control", x, y] => [*x, *y],
            ["sample", _, _] => continue,
            [x, y] => [*x, *y],
            _ => return Err(bad(idx + 1, "expected `x,y` or `kind,x,y`")),
        };
        let x = coords[0].parse::<f64>().map_err(|_| bad(idx + 1, "bad number"))?;
        let y = coords[1].parse::<f64>().map_err(|_| bad(idx + 1, "bad number"))?;
        points.push(Vec2::new(x, y));
    }
    Ok(points)
}

/// Curve polyline plus control points as small circles.
pub fn render_svg(curve: &ControlCurve) -> String {
    let samples = sample_curve(curve);
    let (mut lo, mut hi) = (samples[0], samples[0]);
    for p in samples.iter().chain(curve.points()) {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let size = hi - lo;
    let margin = 0.1 * size;
    let (x0, y0) = (lo.x - margin.x, lo.y - margin.y);
    let (w, h) = (size.x + 2.0 * margin.x, size.y + 2.0 * margin.y);
    let stroke = 0.005 * size.norm();
    // SVG's y axis points down; flip so the figure has the usual orientation.
    let flip = |p: &Vec2| (p.x, 2.0 * y0 + h - p.y);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        x0, y0, w, h
    )
    .unwrap();
    let mut path = String::new();
    for (i, p) in samples.iter().enumerate() {
        let (x, y) = flip(p);
        write!(path, "{}{x} {y} ", if i == 0 { "M" } else { "L" }).unwrap();
    }
    path.push('Z');
    writeln!(
        s,
        r#"<path d="{path}" fill="none" stroke="black" stroke-width="{stroke}"/>"#
    )
    .unwrap();
    for p in curve.points() {
        let (x, y) = flip(p);
        writeln!(
            s,
            r#"<circle cx="{x}" cy="{y}" r="{}" fill="none" stroke="red" stroke-width="{}"/>"#,
            2.0 * stroke,
            0.5 * stroke
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalValues {
    #[serde(rename = "F0")]
    pub f0: f64,
    pub area: f64,
    pub length: f64,
    pub bending: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scheme: String,
    pub termination: String,
    /// Failure code, e.g. `NON_CONVERGENCE`, when the run stopped early.
    pub cause: Option<String>,
    pub message: Option<String>,
    pub steps: usize,
    pub t_final: f64,
    pub initial: FunctionalValues,
    #[serde(rename = "final")]
    pub last: FunctionalValues,
    pub max_area_drift: Option<f64>,
    pub max_length_drift: Option<f64>,
    pub max_abs_lambda0: Option<f64>,
}

pub fn write_summary(path: &Path, summary: &Summary) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(summary).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use curveflow_core::SplineSpace;

    fn circle() -> ControlCurve {
        SplineSpace::new(12, 3, 5)
            .unwrap()
            .l2_project(|u| {
                let a = std::f64::consts::TAU * u;
                Vec2::new(a.cos() + 3.0, a.sin())
            })
            .unwrap()
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-4] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn unused_columns_are_empty() {
        let r = StepRecord {
            n: 3,
            t: 0.5,
            dt: Some(0.25),
            f0: 2.0,
            lambda0: Some(-1e-9),
            newton_iters: 4,
            residual: 1e-13,
            ..Default::default()
        };
        assert_eq!(steps_row(&r), "3,0.5,0.25,2.0,,,-1e-9,,,4,1e-13,");
        assert_eq!(steps_row(&r).split(',').count(), STEPS_HEADER.split(',').count());
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = circle();
        let path = snapshot_path(dir.path(), 7);
        write_snapshot(&path, &c).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 12 + SAMPLES);
        assert_eq!(read_control_points(&path).unwrap(), c.points());
    }

    #[test]
    fn plain_point_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        fs::write(&path, "# square\nx,y\n0,0\n1, 0\n\n1,1\n").unwrap();
        assert_eq!(read_control_points(&path).unwrap().len(), 3);
        fs::write(&path, "0,0,0,0\n").unwrap();
        assert!(read_control_points(&path).is_err());
    }

    #[test]
    fn svg_has_fitted_view_box() {
        let svg = render_svg(&circle());
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 12);
        let vb: Vec<f64> = svg
            .split("viewBox=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap()
            .split(' ')
            .map(|v| v.parse().unwrap())
            .collect();
        // Bounding box of curve and control polygon, widened by 10 % per side.
        let c = circle();
        let xs = sample_curve(&c).iter().chain(c.points()).map(|p| p.x).collect::<Vec<_>>();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((vb[0] - (lo - 0.1 * (hi - lo))).abs() < 1e-12, "{vb:?}");
        assert!((vb[2] - 1.2 * (hi - lo)).abs() < 1e-12, "{vb:?}");
        assert!(lo < 2.0 && hi > 4.0);
    }
}
